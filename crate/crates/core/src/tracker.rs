//! All-times tracking: median of independent sketch copies, the copy-count
//! rule, and the machinery that checks an estimator against the exact moment
//! at every prefix of a stream.
//!
//! The copy-count rule is `l = C * (log2 F0 + log2 log2 m + log2(1/eps))`,
//! rounded up to an odd integer, instead of the `C * log2 m` copies a union
//! bound over all m time instances would ask for. Its justification is an
//! epoch argument: split the stream wherever `||f||_1` has grown by a factor
//! `1 + eps / F0^c`; inside one epoch a single sketch copy is either right
//! everywhere or wrong somewhere with bounded probability, so the median only
//! has to survive one Chernoff bound per epoch rather than per update.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

use crate::hashing::{derive_seed, role};
use crate::sketches::{AmsSketch, MomentEstimator, SketchError};
use crate::stable_dist::quantile_in_place;
use crate::stream_model::{MomentTracker, Stream, StreamError, StreamEvent, StreamMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("stream is empty")]
    EmptyStream,
    #[error("epochs are only defined for cash-register streams")]
    TurnstileEpochs,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TrackError {
    fn from(e: std::io::Error) -> Self {
        TrackError::Io(e.to_string())
    }
}

fn next_odd_at_least(x: f64) -> usize {
    if !(x > 1.0) {
        return 1;
    }
    let l = x.ceil() as usize;
    if l % 2 == 0 {
        l + 1
    } else {
        l
    }
}

/// Copies needed for all-times tracking of F_2:
/// the next odd integer `>= C (log2 F0 + log2 log2 m + log2(1/eps))`, at least 1.
pub fn copies_for_tracking(f0_bound: u64, m: u64, eps: f64, c: f64) -> usize {
    next_odd_at_least(c * tracking_log_term(f0_bound, m, eps))
}

/// Union-bound baseline: the next odd integer `>= C log2 m`.
pub fn naive_copies(m: u64, c: f64) -> usize {
    next_odd_at_least(c * (m.max(1) as f64).log2())
}

/// Rows for tracking F_p with a p-stable sketch:
/// `ceil((C / eps^2) (log2 F0 + log2 log2 m + log2(1/eps)))`, at least 1.
pub fn rows_for_tracking(f0_bound: u64, m: u64, eps: f64, c: f64) -> usize {
    ((c / (eps * eps)) * tracking_log_term(f0_bound, m, eps)).ceil().max(1.0) as usize
}

/// Union-bound baseline rows: `ceil((C / eps^2) log2 m)`.
pub fn naive_rows(m: u64, eps: f64, c: f64) -> usize {
    ((c / (eps * eps)) * (m.max(1) as f64).log2()).ceil().max(1.0) as usize
}

fn tracking_log_term(f0_bound: u64, m: u64, eps: f64) -> f64 {
    let f0 = f0_bound.max(1) as f64;
    let m = m.max(2) as f64;
    (f0.log2() + m.log2().log2() + (1.0 / eps).log2()).max(0.0)
}

/// Lower median (sorted index `floor((len - 1) / 2)`). Panics on empty input.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    quantile_in_place(&mut v, 0.5)
}

/// `l` independent sketch copies answering with the lower median of their
/// estimates.
#[derive(Debug, Clone)]
pub struct Tracker<S> {
    copies: Vec<S>,
    master_seed: u64,
}

impl<S> Tracker<S> {
    /// Builds copy `c` from `make(master_seed, c)`.
    pub fn from_factory<F>(copies: usize, master_seed: u64, mut make: F) -> Result<Self, SketchError>
    where
        F: FnMut(u64, u64) -> Result<S, SketchError>,
    {
        if copies == 0 {
            return Err(SketchError::BadParameter("tracker needs at least one copy".into()));
        }
        let copies = (0..copies as u64).map(|c| make(master_seed, c)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { copies, master_seed })
    }

    pub fn copies(&self) -> &[S] {
        &self.copies
    }

    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }
}

impl Tracker<AmsSketch> {
    /// AMS copies; copy `c` hashes with seeds `derive_seed(master, c, role)`.
    pub fn ams(copies: usize, buckets: usize, universe: u64, master_seed: u64) -> Result<Self, SketchError> {
        Self::from_factory(copies, master_seed, |master, c| {
            AmsSketch::from_seeds(
                buckets,
                universe,
                derive_seed(master, c, role::SIGN),
                derive_seed(master, c, role::BUCKET),
            )
        })
    }

    /// Copy-wise merge of a tracker built with the same parameters.
    pub fn merge(&mut self, other: &Self) -> Result<(), SketchError> {
        if self.len() != other.len() {
            return Err(SketchError::Incompatible(format!("{} vs {} copies", self.len(), other.len())));
        }
        for (a, b) in self.copies.iter_mut().zip(&other.copies) {
            a.merge(b)?;
        }
        Ok(())
    }
}

impl<S: MomentEstimator> Tracker<S> {
    pub fn copy_estimates(&self) -> Vec<f64> {
        self.copies.iter().map(MomentEstimator::estimate).collect()
    }
}

impl<S: MomentEstimator> MomentEstimator for Tracker<S> {
    fn update(&mut self, item: u64, delta: i64) -> Result<(), SketchError> {
        for c in &mut self.copies {
            c.update(item, delta)?;
        }
        Ok(())
    }

    fn estimate(&self) -> f64 {
        let mut est = self.copy_estimates();
        quantile_in_place(&mut est, 0.5)
    }
}

/// Where the estimate is compared against the exact moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckpointPolicy {
    /// After every unit update; run-length events are expanded.
    EveryUpdate,
    /// After every (run-length) event.
    #[default]
    EventBoundaries,
}

impl std::str::FromStr for CheckpointPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "every_update" => Ok(Self::EveryUpdate),
            "event_boundaries" => Ok(Self::EventBoundaries),
            other => Err(format!("unknown checkpoint policy `{other}`")),
        }
    }
}

impl std::fmt::Display for CheckpointPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::EveryUpdate => "every_update",
            Self::EventBoundaries => "event_boundaries",
        })
    }
}

/// Geometric `||f||_1` thresholds `factor^e`, `e = 0, 1, ...`, with
/// `factor = 1 + eps / F0^c`. Epoch `e` ends once `||f||_1` exceeds the
/// `e`-th threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSchedule {
    eps: f64,
    exponent: f64,
    factor: f64,
}

impl EpochSchedule {
    pub fn new(eps: f64, exponent: f64, f0: u64) -> Result<Self, TrackError> {
        if !(eps > 0.0) || !(exponent >= 0.0) {
            return Err(TrackError::BadParameter(format!("eps {eps}, exponent {exponent}")));
        }
        let factor = 1.0 + eps / (f0.max(1) as f64).powf(exponent);
        if !(factor > 1.0) || !factor.is_finite() {
            return Err(TrackError::BadParameter(format!("epoch growth factor {factor} not above 1")));
        }
        Ok(Self { eps, exponent, factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// The first `count` thresholds.
    pub fn thresholds(&self, count: usize) -> Vec<f64> {
        std::iter::successors(Some(1.0), |t| Some(t * self.factor)).take(count).collect()
    }

    pub fn counter(&self) -> EpochCounter {
        EpochCounter { next: 1.0, factor: self.factor, epochs: 0 }
    }
}

/// Incremental epoch index for a non-decreasing `||f||_1`.
#[derive(Debug, Clone, Copy)]
pub struct EpochCounter {
    next: f64,
    factor: f64,
    epochs: u64,
}

impl EpochCounter {
    /// Number of thresholds strictly below `l1` so far.
    pub fn advance(&mut self, l1: u64) -> u64 {
        let l1 = l1 as f64;
        while self.next < l1 {
            self.epochs += 1;
            self.next *= self.factor;
        }
        self.epochs
    }

    pub fn epochs(&self) -> u64 {
        self.epochs
    }
}

/// Number of epoch thresholds crossed by a cash-register stream, with F0 the
/// final distinct count.
pub fn epoch_count(stream: &Stream, eps: f64, exponent: f64) -> Result<u64, TrackError> {
    if stream.mode != StreamMode::CashRegister {
        return Err(TrackError::TurnstileEpochs);
    }
    let f0 = stream.frequency()?.distinct_count() as u64;
    let mut counter = EpochSchedule::new(eps, exponent, f0)?.counter();
    let mut l1 = 0u64;
    for e in &stream.events {
        l1 += e.repeat;
        counter.advance(l1);
    }
    Ok(counter.epochs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    pub p: f64,
    pub eps: f64,
    pub policy: CheckpointPolicy,
    /// Keep one [`CheckpointRecord`] per checkpoint.
    pub record: bool,
    /// Exponent `c` of the epoch schedule used for instrumentation.
    pub epoch_exponent: f64,
}

impl TrackOptions {
    pub fn new(p: f64, eps: f64) -> Self {
        Self { p, eps, policy: CheckpointPolicy::EventBoundaries, record: false, epoch_exponent: 1.0 }
    }

    pub fn policy(mut self, policy: CheckpointPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRecord {
    /// Unit updates applied so far.
    pub time: u64,
    pub l1_norm: u64,
    pub exact: f64,
    pub estimate: f64,
    pub rel_error: f64,
    pub epoch_index: Option<u64>,
}

/// Outcome of one tracking trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackReport {
    pub eps: f64,
    /// Checkpoints at which the relative error was evaluated.
    pub checkpoints: u64,
    /// Checkpoints skipped because the exact moment was 0.
    pub skipped_zero: u64,
    pub max_rel_error: f64,
    /// Time of the largest relative error.
    pub max_error_time: Option<u64>,
    /// Time of the first checkpoint with relative error above `eps`.
    pub first_violation: Option<u64>,
    pub all_times_success: bool,
    /// Epochs crossed by the whole stream (cash-register streams only).
    pub epochs: Option<u64>,
    pub records: Vec<CheckpointRecord>,
}

impl TrackReport {
    pub const CSV_HEADER: &'static str = "checkpoint,l1_norm,exact,estimate,rel_error,epoch_index";

    /// Per-checkpoint CSV; requires a report built with recording enabled.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TrackError> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            let epoch = r.epoch_index.map(|e| e.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{},{}", r.time, r.l1_norm, r.exact, r.estimate, r.rel_error, epoch)?;
        }
        Ok(())
    }
}

/// Feeds `stream` into `estimator` and compares its estimate with the exact
/// F_p of the current prefix at every checkpoint.
pub fn evaluate_tracking<E: MomentEstimator + ?Sized>(
    stream: &Stream,
    estimator: &mut E,
    opts: &TrackOptions,
) -> Result<TrackReport, TrackError> {
    if stream.events.is_empty() {
        return Err(TrackError::EmptyStream);
    }
    if !(opts.eps > 0.0) {
        return Err(TrackError::BadParameter(format!("eps {}", opts.eps)));
    }
    let mut exact = MomentTracker::new(opts.p, stream.universe, stream.mode)?;
    let mut epochs = match stream.mode {
        StreamMode::CashRegister => {
            let f0 = stream.frequency()?.distinct_count() as u64;
            Some(EpochSchedule::new(opts.eps, opts.epoch_exponent, f0)?.counter())
        }
        StreamMode::Turnstile => None,
    };
    let mut report = TrackReport {
        eps: opts.eps,
        checkpoints: 0,
        skipped_zero: 0,
        max_rel_error: 0.0,
        max_error_time: None,
        first_violation: None,
        all_times_success: true,
        epochs: None,
        records: Vec::new(),
    };

    let mut check = |exact: &MomentTracker, estimator: &E, report: &mut TrackReport| {
        let truth = exact.moment();
        let l1 = exact.frequency().l1_norm();
        let epoch_index = epochs.as_mut().map(|c| c.advance(l1));
        if truth == 0.0 {
            report.skipped_zero += 1;
            return;
        }
        let estimate = estimator.estimate();
        let rel_error = (estimate - truth).abs() / truth;
        let time = exact.time();
        report.checkpoints += 1;
        // NaN estimates count as failures
        if !(rel_error <= report.max_rel_error) {
            report.max_rel_error = if rel_error.is_nan() { f64::INFINITY } else { rel_error };
            report.max_error_time = Some(time);
        }
        if !(rel_error <= opts.eps) && report.first_violation.is_none() {
            report.first_violation = Some(time);
            report.all_times_success = false;
        }
        if opts.record {
            report.records.push(CheckpointRecord { time, l1_norm: l1, exact: truth, estimate, rel_error, epoch_index });
        }
    };

    for event in &stream.events {
        event.validate(stream.universe, stream.mode)?;
        match opts.policy {
            CheckpointPolicy::EventBoundaries => {
                exact.apply(event)?;
                estimator.apply_event(event)?;
                check(&exact, estimator, &mut report);
            }
            CheckpointPolicy::EveryUpdate => {
                let unit = StreamEvent { repeat: 1, ..*event };
                for _ in 0..event.repeat {
                    exact.apply(&unit)?;
                    estimator.update(unit.item, unit.delta as i64)?;
                    check(&exact, estimator, &mut report);
                }
            }
        }
    }
    report.epochs = epochs.map(|c| c.epochs());
    Ok(report)
}

/// Result of the neighbourhood-stability experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BallStability {
    pub trials: usize,
    /// Trials whose hash pair kept `|ratio - 1| <= eps` at every sampled point.
    pub stable_trials: usize,
    pub probability: f64,
    pub radius: f64,
    pub buckets: usize,
    pub samples_per_ball: usize,
}

/// Radius `coeff * ||a||_1 * eps / F0^(3/2)` of the stability ball around `center`.
pub fn stability_radius(center: &[f64], eps: f64, radius_coeff: f64) -> f64 {
    let l1: f64 = center.iter().map(|v| v.abs()).sum();
    let f0 = center.iter().filter(|v| **v != 0.0).count().max(1) as f64;
    radius_coeff * l1 * eps / f0.powf(1.5)
}

/// Estimates the probability, over random AMS hash pairs with
/// `ceil(16 / eps^2)` buckets, that the approximation ratio stays within
/// `1 +- eps` on a whole l1 ball around `center`.
///
/// Points are drawn uniformly from the l1 ball of radius
/// [`stability_radius`] restricted to the support of `center`; the center
/// itself is always checked. Coordinates may turn negative inside the ball.
pub fn ball_stability_experiment(
    center: &[f64],
    eps: f64,
    radius_coeff: f64,
    trials: usize,
    samples_per_ball: usize,
    seed: u64,
) -> Result<BallStability, TrackError> {
    if center.iter().all(|v| *v == 0.0) {
        return Err(SketchError::ZeroVector.into());
    }
    if !(eps > 0.0 && eps < 1.0) || !(radius_coeff >= 0.0) || trials == 0 {
        return Err(TrackError::BadParameter(format!("eps {eps}, radius_coeff {radius_coeff}, trials {trials}")));
    }
    let buckets = AmsSketch::buckets_for(eps);
    let radius = stability_radius(center, eps, radius_coeff);
    let support: Vec<usize> = (0..center.len()).filter(|&i| center[i] != 0.0).collect();
    let universe = center.len() as u64;

    let mut stable_trials = 0;
    let mut point = center.to_vec();
    let mut weights = vec![0.0f64; support.len() + 1];
    for trial in 0..trials as u64 {
        let sketch = AmsSketch::from_seeds(
            buckets,
            universe,
            derive_seed(seed, trial, role::SIGN),
            derive_seed(seed, trial, role::BUCKET),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial, role::BALL));
        let within = |x: &[f64]| -> Result<bool, SketchError> { Ok((sketch.ratio(x)? - 1.0).abs() <= eps) };
        let mut ok = within(center)?;
        for _ in 0..samples_per_ball {
            if !ok {
                break;
            }
            // uniform point of the l1 ball: normalized exponentials with a slack coordinate
            for w in weights.iter_mut() {
                *w = Exp1.sample(&mut rng);
            }
            let total: f64 = weights.iter().sum();
            point.copy_from_slice(center);
            for (&i, w) in support.iter().zip(&weights) {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                point[i] += sign * radius * w / total;
            }
            ok = within(&point)?;
        }
        if ok {
            stable_trials += 1;
        }
    }
    Ok(BallStability {
        trials,
        stable_trials,
        probability: stable_trials as f64 / trials as f64,
        radius,
        buckets,
        samples_per_ball,
    })
}

/// Dense Zipf-shaped vector `round(top / (i + 1)^skew)`, used as a default
/// stability-ball center.
pub fn zipf_profile(dim: usize, top: f64, skew: f64) -> Vec<f64> {
    (0..dim).map(|i| (top / ((i + 1) as f64).powf(skew)).round().max(1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketches::ExactOracle;

    #[test]
    fn copy_count_examples() {
        assert_eq!(copies_for_tracking(256, 1 << 20, 0.25, 1.0), 15);
        assert_eq!(copies_for_tracking(1, 2, 0.5, 1.0), 1);
        assert_eq!(naive_copies(1 << 20, 1.0), 21);
        // exact even values round up to the next odd
        assert_eq!(next_odd_at_least(14.0), 15);
        assert_eq!(next_odd_at_least(15.0), 15);
        assert_eq!(next_odd_at_least(0.3), 1);
    }

    #[test]
    fn row_count_formula() {
        // (1 / 0.0625) * (8 + log2 20 + 2) = 16 * 14.3219 = 229.15
        assert_eq!(rows_for_tracking(256, 1 << 20, 0.25, 1.0), 230);
        assert_eq!(naive_rows(1 << 20, 0.25, 1.0), 320);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(lower_median(&[4.0, 9.0, 7.0]), 7.0);
        assert_eq!(lower_median(&[4.0, 9.0]), 4.0);
        assert_eq!(lower_median(&[3.0; 5]), 3.0);
    }

    #[test]
    fn single_copy_tracker_matches_sketch() {
        let mut t = Tracker::ams(1, 16, 100, 9).unwrap();
        let mut s = t.copies()[0].clone();
        for i in 0..300u64 {
            t.update(i % 100, 1).unwrap();
            s.update(i % 100, 1).unwrap();
            assert_eq!(t.estimate(), s.estimate());
        }
    }

    #[test]
    fn copy_seeds_are_distinct() {
        let t = Tracker::ams(25, 8, 100, 3).unwrap();
        let mut seeds: Vec<(u64, u64)> = t.copies().iter().map(AmsSketch::seeds).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 25);
        assert!(Tracker::ams(0, 8, 100, 3).is_err());
    }

    #[test]
    fn epoch_examples() {
        for m in [1u64, 2, 3, 4, 5, 1000, 1024, 1025] {
            let mut s = Stream::new(StreamMode::CashRegister, 1);
            s.push(StreamEvent::insert(0, m));
            let want = (m as f64).log2().ceil() as u64;
            assert_eq!(epoch_count(&s, 1.0, 0.0).unwrap(), want, "m = {m}");
            // same answer one update at a time
            let unit = Stream { events: vec![StreamEvent::unit(0); m as usize], ..s.clone() };
            assert_eq!(epoch_count(&unit, 1.0, 0.0).unwrap(), want);
        }
        let empty = Stream::new(StreamMode::CashRegister, 4);
        assert_eq!(epoch_count(&empty, 0.25, 1.0).unwrap(), 0);
        let turnstile = Stream::new(StreamMode::Turnstile, 4);
        assert_eq!(epoch_count(&turnstile, 0.25, 1.0), Err(TrackError::TurnstileEpochs));
    }

    #[test]
    fn schedule_thresholds_increase() {
        let s = EpochSchedule::new(0.25, 1.0, 64).unwrap();
        let t = s.thresholds(100);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(EpochSchedule::new(1e-300, 3.0, 1 << 40).is_err());
    }

    #[test]
    fn oracle_tracks_perfectly() {
        let mut s = Stream::new(StreamMode::Turnstile, 5);
        for i in 0..40u64 {
            s.push(if i % 3 == 2 { StreamEvent::delete(i % 5, 1) } else { StreamEvent::insert(i % 5, 2) });
        }
        let mut oracle = ExactOracle::new(1.5, 5);
        let r = evaluate_tracking(&s, &mut oracle, &TrackOptions::new(1.5, 0.01)).unwrap();
        assert!(r.all_times_success);
        assert!(r.max_rel_error < 1e-12);
        assert_eq!(r.epochs, None);
    }

    #[test]
    fn single_item_ams_tracking_is_exact() {
        let mut s = Stream::new(StreamMode::CashRegister, 10);
        for r in 1..50 {
            s.push(StreamEvent::insert(4, r));
        }
        let mut t = Tracker::ams(5, 4, 10, 1).unwrap();
        let opts = TrackOptions::new(2.0, 1e-9).policy(CheckpointPolicy::EveryUpdate);
        let r = evaluate_tracking(&s, &mut t, &opts).unwrap();
        assert!(r.all_times_success);
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.checkpoints, s.length());
    }

    #[test]
    fn zero_moment_prefixes_are_skipped() {
        let mut s = Stream::new(StreamMode::Turnstile, 3);
        s.push(StreamEvent::insert(1, 1));
        s.push(StreamEvent::delete(1, 1));
        s.push(StreamEvent::insert(2, 1));
        let mut o = ExactOracle::new(2.0, 3);
        let r = evaluate_tracking(&s, &mut o, &TrackOptions::new(2.0, 0.1)).unwrap();
        assert_eq!(r.skipped_zero, 1);
        assert_eq!(r.checkpoints, 2);
    }

    #[test]
    fn empty_stream_is_an_error() {
        let s = Stream::new(StreamMode::CashRegister, 3);
        let mut o = ExactOracle::new(2.0, 3);
        assert_eq!(evaluate_tracking(&s, &mut o, &TrackOptions::new(2.0, 0.1)), Err(TrackError::EmptyStream));
    }

    #[test]
    fn violation_bookkeeping() {
        struct Fixed(f64);
        impl MomentEstimator for Fixed {
            fn update(&mut self, _: u64, _: i64) -> Result<(), SketchError> {
                Ok(())
            }
            fn estimate(&self) -> f64 {
                self.0
            }
        }
        let mut s = Stream::new(StreamMode::CashRegister, 2);
        for _ in 0..4 {
            s.push(StreamEvent::unit(0));
        }
        // truth 1, 4, 9, 16 against a constant 4
        let r = evaluate_tracking(&s, &mut Fixed(4.0), &TrackOptions::new(2.0, 0.5).recording()).unwrap();
        assert_eq!(r.first_violation, Some(1));
        assert_eq!(r.max_rel_error, 3.0);
        assert_eq!(r.max_error_time, Some(1));
        assert!(!r.all_times_success);
        assert_eq!(r.records.len(), 4);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(TrackReport::CSV_HEADER));
        assert_eq!(text.lines().nth(2).unwrap(), "2,2,4,4,0,2");
    }

    #[test]
    fn ball_on_basis_vector_is_always_stable() {
        let mut center = vec![0.0; 8];
        center[3] = 10.0;
        let r = ball_stability_experiment(&center, 0.25, 2.0, 50, 50, 1).unwrap();
        assert_eq!(r.probability, 1.0);
        assert!(ball_stability_experiment(&[0.0; 4], 0.25, 0.1, 10, 10, 1).is_err());
    }
}
