//! Multi-trial experiment runner: builds streams and trackers from an
//! [`ExperimentConfig`], aggregates all-times success over trials, calibrates
//! the copy-count constant and sweeps stream lengths.
//!
//! Seed tree: trial `t` uses `derive_seed(master, t, TRIAL)`; its stream and
//! sketch seeds are derived from that with roles `STREAM` and `SKETCH`, so any
//! single trial can be re-run in isolation.

mod config;

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{persist_key, CopyPolicy, ExperimentConfig, SketchKind, Source, DEFAULT_COPY_CONSTANT, KEYS};

use crate::hard_instances::{
    gen_cash_hard, gen_turnstile_hard, gen_uniform, gen_zipf, hard_params, CashHardInput, HardError, HardFamily,
    TurnstileHardInput,
};
use crate::hashing::{derive_seed, role};
use crate::sketches::{ExactOracle, MomentEstimator, SketchError, StableSketch};
use crate::stable_dist::{ScaleTable, SCALE_SAMPLES};
use crate::stream_model::{MomentTracker, Stream, StreamError, StreamEvent};
use crate::tracker::{
    copies_for_tracking, evaluate_tracking, naive_copies, naive_rows, rows_for_tracking, CheckpointPolicy, TrackError,
    TrackOptions, TrackReport, Tracker,
};
use crate::AmsSketch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Hard(#[from] HardError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// `3 sqrt(p (1 - p) / trials)`.
pub fn binomial_half_width(fraction: f64, trials: usize) -> f64 {
    3.0 * (fraction * (1.0 - fraction) / trials as f64).sqrt()
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, trial as u64, role::TRIAL)
}

/// Stream of one trial. File sources ignore the seed.
pub fn build_stream(cfg: &ExperimentConfig, trial_seed: u64) -> Result<Stream, HarnessError> {
    let seed = derive_seed(trial_seed, 0, role::STREAM);
    let input_seed = derive_seed(seed, 0, role::INPUT);
    let stream = match &cfg.source {
        Source::Zipf { n, m, skew } => gen_zipf(*n, *m, *skew, seed)?,
        Source::Uniform { n, m } => gen_uniform(*n, *m, seed)?,
        Source::File { path } => read_stream_file(path)?,
        Source::CashHard { positions, players, alphabet } => {
            let params = hard_params(cfg.p, HardFamily::CashRegister)?;
            let input = CashHardInput::random(*positions, *players, *alphabet, input_seed)?;
            gen_cash_hard(&params, &input)?.stream
        }
        Source::TurnstileHard { positions, players, alphabet } => {
            let params = hard_params(cfg.p, HardFamily::Turnstile)?;
            let input = TurnstileHardInput::random(*positions, *players, *alphabet, input_seed)?;
            gen_turnstile_hard(&params, &input)?.stream
        }
    };
    if let Some(mode) = cfg.mode {
        if mode != stream.mode {
            return Err(HarnessError::BadConfig(format!(
                "config expects a {mode} stream, source gives {}",
                stream.mode
            )));
        }
    }
    Ok(stream)
}

pub fn read_stream_file(path: &Path) -> Result<Stream, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(Stream::read_from(std::io::BufReader::new(file))?)
}

/// Copies (AMS) or rows (stable) a trial on a stream of `m` updates over
/// `universe` items gets.
pub fn copies_for(cfg: &ExperimentConfig, m: u64, universe: u64) -> usize {
    let f0 = cfg.f0_bound.unwrap_or(universe);
    match (cfg.sketch, cfg.copy_policy) {
        (SketchKind::Oracle, _) => 1,
        (_, CopyPolicy::Explicit(l)) => l,
        (SketchKind::Ams, CopyPolicy::Theorem(c)) => copies_for_tracking(f0, m, cfg.eps, c),
        (SketchKind::Ams, CopyPolicy::Naive(c)) => naive_copies(m, c),
        (SketchKind::Stable, CopyPolicy::Theorem(c)) => rows_for_tracking(f0, m, cfg.eps, c),
        (SketchKind::Stable, CopyPolicy::Naive(c)) => naive_rows(m, cfg.eps, c),
    }
}

fn ams_buckets(cfg: &ExperimentConfig) -> usize {
    cfg.buckets.unwrap_or_else(|| AmsSketch::buckets_for(cfg.eps))
}

fn stable_scale(cfg: &ExperimentConfig) -> Result<f64, HarnessError> {
    if cfg.sketch != SketchKind::Stable {
        return Ok(1.0);
    }
    Ok(ScaleTable::builtin().get_or_compute(cfg.p, cfg.quantile, SCALE_SAMPLES).map_err(SketchError::from)?)
}

fn build_estimator(
    cfg: &ExperimentConfig,
    copies: usize,
    universe: u64,
    seed: u64,
    scale: f64,
) -> Result<Box<dyn MomentEstimator>, HarnessError> {
    Ok(match cfg.sketch {
        SketchKind::Ams => Box::new(Tracker::ams(copies, ams_buckets(cfg), universe, seed)?),
        SketchKind::Stable => {
            let s = StableSketch::with_scale(copies, cfg.p, universe, seed, cfg.quantile, scale)?;
            Box::new(if cfg.column_cache { s.with_column_cache() } else { s })
        }
        SketchKind::Oracle => Box::new(ExactOracle::new(cfg.p, universe)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub copies: usize,
    pub stream_length: u64,
    pub report: TrackReport,
    pub wall_clock: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub trials: Vec<TrialOutcome>,
    pub success_fraction: f64,
    pub half_width: f64,
    pub mean_max_rel_error: f64,
    pub max_max_rel_error: f64,
}

impl AggregateReport {
    pub const CSV_HEADER: &'static str =
        "trial,seed,copies,stream_length,all_times_success,checkpoints,max_rel_error,max_error_time,first_violation,epochs";

    fn from_trials(trials: Vec<TrialOutcome>) -> Self {
        let t = trials.len() as f64;
        let successes = trials.iter().filter(|o| o.report.all_times_success).count();
        let success_fraction = successes as f64 / t;
        Self {
            half_width: binomial_half_width(success_fraction, trials.len()),
            success_fraction,
            mean_max_rel_error: trials.iter().map(|o| o.report.max_rel_error).sum::<f64>() / t,
            max_max_rel_error: trials.iter().map(|o| o.report.max_rel_error).fold(0.0, f64::max),
            trials,
        }
    }

    pub fn success_bits(&self) -> Vec<bool> {
        self.trials.iter().map(|o| o.report.all_times_success).collect()
    }

    /// Per-trial CSV. Wall-clock times are left out so reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        fn opt(v: Option<u64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for o in &self.trials {
            let r = &o.report;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                o.trial,
                o.seed,
                o.copies,
                o.stream_length,
                u8::from(r.all_times_success),
                r.checkpoints,
                r.max_rel_error,
                opt(r.max_error_time),
                opt(r.first_violation),
                opt(r.epochs)
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let copies: Vec<usize> = self.trials.iter().map(|o| o.copies).collect();
        let (lo, hi) = (copies.iter().min().unwrap(), copies.iter().max().unwrap());
        let copies = if lo == hi { lo.to_string() } else { format!("{lo}..{hi}") };
        let wall: Duration = self.trials.iter().map(|o| o.wall_clock).sum();
        format!(
            "trials {}  copies {}  success {:.4} +- {:.4}  max rel error mean {:.4} max {:.4}  trial time {:.2}s",
            self.trials.len(),
            copies,
            self.success_fraction,
            self.half_width,
            self.mean_max_rel_error,
            self.max_max_rel_error,
            wall.as_secs_f64()
        )
    }
}

/// Runs `cfg.trials` independent tracking trials in parallel and writes the
/// per-trial CSV to `cfg.output` and trial 0's checkpoint trace to
/// `cfg.trace` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateReport, HarnessError> {
    cfg.validate()?;
    let scale = stable_scale(cfg)?;
    let shared = match &cfg.source {
        Source::File { path } => Some(read_stream_file(path)?),
        _ => None,
    };
    let opts = TrackOptions::new(cfg.p, cfg.eps).policy(cfg.checkpoint);
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome, HarnessError> {
            let start = Instant::now();
            let seed = trial_seed(cfg.seed, t);
            let stream = match &shared {
                Some(s) => s.clone(),
                None => build_stream(cfg, seed)?,
            };
            let length = stream.length();
            let copies = copies_for(cfg, length, stream.universe);
            let mut est = build_estimator(cfg, copies, stream.universe, derive_seed(seed, 0, role::SKETCH), scale)?;
            let opts = if t == 0 && cfg.trace.is_some() { opts.recording() } else { opts };
            let report = evaluate_tracking(&stream, &mut est, &opts)?;
            Ok(TrialOutcome { trial: t, seed, copies, stream_length: length, report, wall_clock: start.elapsed() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = AggregateReport::from_trials(trials);
    if let Some(path) = &cfg.trace {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        report.trials[0].report.write_csv(std::io::BufWriter::new(file))?;
        report.trials[0].report.records = Vec::new();
    }
    if let Some(path) = &cfg.output {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        report.write_csv(std::io::BufWriter::new(file))?;
    }
    Ok(report)
}

pub const CALIBRATION_GRID: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, PartialEq)]
pub enum Calibration {
    Calibrated {
        constant: f64,
        success_fraction: f64,
        trials: usize,
    },
    /// No grid point reached the target.
    Failed {
        best_constant: f64,
        best_fraction: f64,
        trials: usize,
    },
}

impl Calibration {
    pub fn constant(&self) -> Option<f64> {
        match self {
            Calibration::Calibrated { constant, .. } => Some(*constant),
            Calibration::Failed { .. } => None,
        }
    }
}

/// Smallest `C` in `grid` (ascending) whose theorem copy count reaches
/// `target` all-times success over `cfg.trials` trials.
pub fn calibrate_constant(cfg: &ExperimentConfig, target: f64, grid: &[f64]) -> Result<Calibration, HarnessError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(HarnessError::BadConfig(format!("calibration target {target} outside (0, 1)")));
    }
    if grid.is_empty() {
        return Err(HarnessError::BadConfig("empty calibration grid".into()));
    }
    let mut best = (grid[0], -1.0);
    for &c in grid {
        let probe = ExperimentConfig { copy_policy: CopyPolicy::Theorem(c), output: None, trace: None, ..cfg.clone() };
        let fraction = run_experiment(&probe)?.success_fraction;
        if fraction >= target {
            return Ok(Calibration::Calibrated { constant: c, success_fraction: fraction, trials: cfg.trials });
        }
        if fraction > best.1 {
            best = (c, fraction);
        }
    }
    Ok(Calibration::Failed { best_constant: best.0, best_fraction: best.1, trials: cfg.trials })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: u64,
    /// Smallest odd copy count reaching the target, if any up to the cap.
    pub l_min: Option<usize>,
    /// `ceil(log2 m) * C`.
    pub l_naive: usize,
    /// Success fraction at `l_min` (or the best fraction seen when none qualifies).
    pub success: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub trials: usize,
    pub constant: f64,
    pub target: f64,
    /// Largest copy count probed.
    pub l_cap: usize,
}

impl SweepTable {
    pub const CSV_HEADER: &'static str = "m,l_min,l_naive,success";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        writeln!(w, "# trials {} target {} constant {} l_cap {}", self.trials, self.target, self.constant, self.l_cap)?;
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            let l = r.l_min.map(|l| l.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.m, l, r.l_naive, r.success)?;
        }
        Ok(())
    }

    /// `l_min` defined everywhere and non-decreasing in m.
    pub fn monotone(&self) -> bool {
        let ls: Option<Vec<usize>> = self.rows.iter().map(|r| r.l_min).collect();
        ls.is_some_and(|ls| ls.windows(2).all(|w| w[0] <= w[1]))
    }
}

/// `ceil(log2 m) * C`, rounded up.
pub fn naive_baseline(m: u64, constant: f64) -> usize {
    ((m.max(2) as f64).log2().ceil() * constant).ceil() as usize
}

/// For every stream length, the smallest odd number of tracker copies whose
/// all-times success over `cfg.trials` trials reaches `target`.
///
/// The streams of the different lengths are prefixes of one generated stream
/// per trial, and a tracker with `l` copies is the first `l` copies of one
/// with `l_cap` copies. One pass over the longest stream therefore records,
/// for every odd `l`, the first time that tracker leaves the `eps` band, and
/// every `(l, m)` probe is read off that table.
pub fn scaling_sweep(cfg: &ExperimentConfig, lengths: &[u64], target: f64) -> Result<SweepTable, HarnessError> {
    cfg.validate()?;
    if lengths.len() < 2 {
        return Err(HarnessError::BadConfig("a sweep needs at least two stream lengths".into()));
    }
    if !(target > 0.0 && target <= 1.0) {
        return Err(HarnessError::BadConfig(format!("sweep target {target} outside (0, 1]")));
    }
    let constant = match cfg.copy_policy {
        CopyPolicy::Theorem(c) | CopyPolicy::Naive(c) => c,
        CopyPolicy::Explicit(_) => 1.0,
    };
    let mut lengths = lengths.to_vec();
    lengths.sort_unstable();
    let m_max = *lengths.last().unwrap();
    let long = cfg.with_length(m_max)?;
    let universe = match cfg.source {
        Source::Zipf { n, .. } | Source::Uniform { n, .. } => n,
        _ => unreachable!("with_length accepts generated sources only"),
    };
    let f0 = cfg.f0_bound.unwrap_or(universe);
    let l_cap = match cfg.sketch {
        SketchKind::Oracle => 1,
        SketchKind::Ams => (naive_baseline(m_max, constant) | 1).max(copies_for_tracking(f0, m_max, cfg.eps, constant)),
        SketchKind::Stable => {
            return Err(HarnessError::BadConfig("the sweep varies tracker copies; use sketch = ams or oracle".into()))
        }
    };
    let odd: Vec<usize> = (1..=l_cap).step_by(2).collect();

    let violations = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<Option<u64>>, HarnessError> {
            let seed = trial_seed(cfg.seed, t);
            let stream = build_stream(&long, seed)?;
            first_violations(cfg, &stream, l_cap, derive_seed(seed, 0, role::SKETCH))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rows = lengths
        .iter()
        .map(|&m| {
            let fraction = |k: usize| {
                let ok = violations.iter().filter(|v| v[k].is_none_or(|time| time > m)).count();
                ok as f64 / cfg.trials as f64
            };
            let hit = (0..odd.len()).find(|&k| fraction(k) >= target);
            let success = match hit {
                Some(k) => fraction(k),
                None => (0..odd.len()).map(fraction).fold(0.0, f64::max),
            };
            SweepRow { m, l_min: hit.map(|k| odd[k]), l_naive: naive_baseline(m, constant), success }
        })
        .collect();
    Ok(SweepTable { rows, trials: cfg.trials, constant, target, l_cap })
}

/// First violation time of the lower-median tracker over the first `l`
/// copies, for every odd `l <= l_cap`.
fn first_violations(
    cfg: &ExperimentConfig,
    stream: &Stream,
    l_cap: usize,
    sketch_seed: u64,
) -> Result<Vec<Option<u64>>, HarnessError> {
    let slots = l_cap.div_ceil(2);
    let mut first = vec![None; slots];
    let mut exact = MomentTracker::new(cfg.p, stream.universe, stream.mode)?;
    let mut tracker = match cfg.sketch {
        SketchKind::Ams => Some(Tracker::ams(l_cap, ams_buckets(cfg), stream.universe, sketch_seed)?),
        _ => None,
    };
    let mut sorted: Vec<f64> = Vec::with_capacity(l_cap);
    let mut check = |exact: &MomentTracker, tracker: &Option<Tracker<AmsSketch>>| {
        let truth = exact.moment();
        if truth == 0.0 {
            return;
        }
        let Some(tracker) = tracker else { return };
        sorted.clear();
        for (c, copy) in tracker.copies().iter().enumerate() {
            let e = copy.estimate();
            let pos = sorted.partition_point(|x| x.total_cmp(&e).is_lt());
            sorted.insert(pos, e);
            if c % 2 == 0 && first[c / 2].is_none() {
                let rel = (sorted[c / 2] - truth).abs() / truth;
                if !(rel <= cfg.eps) {
                    first[c / 2] = Some(exact.time());
                }
            }
        }
    };
    for event in &stream.events {
        event.validate(stream.universe, stream.mode)?;
        match cfg.checkpoint {
            CheckpointPolicy::EventBoundaries => {
                exact.apply(event)?;
                if let Some(t) = tracker.as_mut() {
                    t.apply_event(event)?;
                }
                check(&exact, &tracker);
            }
            CheckpointPolicy::EveryUpdate => {
                let unit = StreamEvent { repeat: 1, ..*event };
                for _ in 0..event.repeat {
                    exact.apply(&unit)?;
                    if let Some(t) = tracker.as_mut() {
                        t.update(unit.item, unit.delta as i64)?;
                    }
                    check(&exact, &tracker);
                }
            }
        }
    }
    Ok(first)
}
