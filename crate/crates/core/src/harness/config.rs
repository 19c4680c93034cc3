use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::HarnessError;
use crate::stream_model::StreamMode;
use crate::tracker::CheckpointPolicy;

/// Where the trial streams come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Zipf {
        n: u64,
        m: u64,
        skew: f64,
    },
    Uniform {
        n: u64,
        m: u64,
    },
    /// Stream file in the text format of [`crate::stream_model::Stream`];
    /// every trial reads the same stream.
    File {
        path: PathBuf,
    },
    CashHard {
        positions: usize,
        players: usize,
        alphabet: u32,
    },
    TurnstileHard {
        positions: usize,
        players: usize,
        alphabet: u32,
    },
}

impl Source {
    pub fn name(&self) -> &'static str {
        match self {
            Source::Zipf { .. } => "zipf",
            Source::Uniform { .. } => "uniform",
            Source::File { .. } => "file",
            Source::CashHard { .. } => "cash-hard",
            Source::TurnstileHard { .. } => "turnstile-hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchKind {
    Ams,
    Stable,
    Oracle,
}

impl FromStr for SketchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ams" => Ok(SketchKind::Ams),
            "stable" => Ok(SketchKind::Stable),
            "oracle" => Ok(SketchKind::Oracle),
            _ => Err(format!("unknown sketch `{s}` (ams, stable, oracle)")),
        }
    }
}

impl std::fmt::Display for SketchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SketchKind::Ams => "ams",
            SketchKind::Stable => "stable",
            SketchKind::Oracle => "oracle",
        })
    }
}

/// How many copies (AMS) or rows (stable) each trial uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CopyPolicy {
    Explicit(usize),
    /// `copies_for_tracking` / `rows_for_tracking` with constant `C`.
    Theorem(f64),
    /// `C log2 m` baseline.
    Naive(f64),
}

impl CopyPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            CopyPolicy::Explicit(_) => "explicit",
            CopyPolicy::Theorem(_) => "theorem",
            CopyPolicy::Naive(_) => "naive",
        }
    }
}

/// Copy constant used until a calibration run replaces it.
pub const DEFAULT_COPY_CONSTANT: f64 = 8.0;

/// Experiment description, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    /// Expected stream mode; checked against every generated stream.
    pub mode: Option<StreamMode>,
    pub p: f64,
    pub eps: f64,
    pub sketch: SketchKind,
    /// AMS buckets; `ceil(16 / eps^2)` when absent.
    pub buckets: Option<usize>,
    pub quantile: f64,
    pub column_cache: bool,
    pub copy_policy: CopyPolicy,
    /// F0 bound fed to the copy formula; the universe size when absent.
    pub f0_bound: Option<u64>,
    pub trials: usize,
    pub seed: u64,
    pub checkpoint: CheckpointPolicy,
    /// Success fraction `run` must reach for exit status 0.
    pub target: Option<f64>,
    pub output: Option<PathBuf>,
    /// Per-checkpoint CSV of trial 0.
    pub trace: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "source",
    "n",
    "m",
    "skew",
    "path",
    "positions",
    "players",
    "alphabet",
    "mode",
    "p",
    "eps",
    "sketch",
    "buckets",
    "quantile",
    "column_cache",
    "copy_policy",
    "copies",
    "copy_constant",
    "f0_bound",
    "trials",
    "seed",
    "checkpoint",
    "target",
    "output",
    "trace",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: Source::Zipf { n: 1 << 10, m: 100_000, skew: 1.1 },
            mode: None,
            p: 2.0,
            eps: 0.25,
            sketch: SketchKind::Ams,
            buckets: None,
            quantile: 0.5,
            column_cache: true,
            copy_policy: CopyPolicy::Theorem(DEFAULT_COPY_CONSTANT),
            f0_bound: None,
            trials: 1,
            seed: 0,
            checkpoint: CheckpointPolicy::EventBoundaries,
            target: None,
            output: None,
            trace: None,
        }
    }
}

/// Integer that may be written in float notation (`1e5`).
fn parse_count(v: &str) -> Result<u64, String> {
    if let Ok(x) = v.parse::<u64>() {
        return Ok(x);
    }
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(64) {
        Ok(x as u64)
    } else {
        Err(format!("`{v}` is not a non-negative integer"))
    }
}

fn parse_real(v: &str) -> Result<f64, String> {
    v.parse().map_err(|_| format!("`{v}` is not a number"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

struct Assignments(Vec<(usize, String, String)>);

impl Assignments {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.0.iter().find(|(_, k, _)| k == key).map(|(line, _, v)| (*line, v.as_str()))
    }

    fn convert<T>(&self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, HarnessError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, v)) => {
                f(v).map(Some).map_err(|m| HarnessError::Config { line, message: format!("{key}: {m}") })
            }
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HarnessError::Config { line: idx + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(format!("unknown key `{k}`")));
            }
            if pairs.iter().any(|(_, pk, _)| pk == k) {
                return Err(err(format!("duplicate key `{k}`")));
            }
            pairs.push((idx + 1, k.to_string(), v.to_string()));
        }
        let kv = Assignments(pairs);
        let get = |key: &str| kv.get(key).map(|(_, v)| v.to_string());
        let count = |key: &str| kv.convert(key, parse_count);
        let real = |key: &str| kv.convert(key, parse_real);
        let d = Self::default();

        let source_name = get("source").unwrap_or_else(|| "zipf".into());
        let n = count("n")?.unwrap_or(1 << 10);
        let m = count("m")?.unwrap_or(100_000);
        let positions = count("positions")?.unwrap_or(8) as usize;
        let players = count("players")?.unwrap_or(4) as usize;
        let alphabet = count("alphabet")?.unwrap_or(2) as u32;
        let source = match source_name.as_str() {
            "zipf" => Source::Zipf { n, m, skew: real("skew")?.unwrap_or(1.1) },
            "uniform" => Source::Uniform { n, m },
            "file" => Source::File {
                path: get("path")
                    .map(PathBuf::from)
                    .ok_or_else(|| HarnessError::BadConfig("source = file needs `path`".into()))?,
            },
            "cash-hard" => Source::CashHard { positions, players, alphabet },
            "turnstile-hard" => Source::TurnstileHard { positions, players, alphabet },
            other => return Err(HarnessError::BadConfig(format!("unknown source `{other}`"))),
        };
        let p = real("p")?.unwrap_or(d.p);
        let sketch =
            kv.convert("sketch", |v| v.parse())?.unwrap_or(if p == 2.0 { SketchKind::Ams } else { SketchKind::Stable });
        let constant = real("copy_constant")?.unwrap_or(DEFAULT_COPY_CONSTANT);
        let copy_policy = match get("copy_policy").as_deref().unwrap_or("theorem") {
            "explicit" => CopyPolicy::Explicit(
                count("copies")?
                    .ok_or_else(|| HarnessError::BadConfig("copy_policy = explicit needs `copies`".into()))?
                    as usize,
            ),
            "theorem" => CopyPolicy::Theorem(constant),
            "naive" => CopyPolicy::Naive(constant),
            other => return Err(HarnessError::BadConfig(format!("unknown copy_policy `{other}`"))),
        };
        let cfg = Self {
            source,
            mode: kv.convert("mode", |v| v.parse::<StreamMode>().map_err(|e| e.to_string()))?,
            p,
            eps: real("eps")?.unwrap_or(d.eps),
            sketch,
            buckets: count("buckets")?.map(|b| b as usize),
            quantile: real("quantile")?.unwrap_or(d.quantile),
            column_cache: kv.convert("column_cache", parse_bool)?.unwrap_or(d.column_cache),
            copy_policy,
            f0_bound: count("f0_bound")?,
            trials: count("trials")?.unwrap_or(1) as usize,
            seed: count("seed")?.unwrap_or(0),
            checkpoint: kv
                .convert("checkpoint", |v| v.parse::<CheckpointPolicy>().map_err(|e| e.to_string()))?
                .unwrap_or(d.checkpoint),
            target: real("target")?,
            output: get("output").map(PathBuf::from),
            trace: get("trace").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::BadConfig(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} outside (0, 1)", self.eps));
        }
        if !(self.p > 0.0 && self.p <= 2.0) {
            return bad(format!("p = {} outside (0, 2]", self.p));
        }
        if self.sketch == SketchKind::Ams && self.p != 2.0 {
            return bad("the AMS sketch estimates F2 only; use sketch = stable".into());
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return bad(format!("quantile = {} outside (0, 1)", self.quantile));
        }
        if let Some(t) = self.target {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("target = {t} outside [0, 1]"));
            }
        }
        match self.copy_policy {
            CopyPolicy::Explicit(0) => return bad("copies must be at least 1".into()),
            CopyPolicy::Theorem(c) | CopyPolicy::Naive(c) if !(c > 0.0 && c.is_finite()) => {
                return bad(format!("copy_constant = {c} must be positive"))
            }
            _ => {}
        }
        if self.buckets == Some(0) {
            return bad("buckets must be at least 1".into());
        }
        match &self.source {
            Source::Zipf { n, skew, .. } if *n == 0 || !(*skew > 0.0) => bad("zipf needs n >= 1 and skew > 0".into()),
            Source::Uniform { n: 0, .. } => bad("uniform needs n >= 1".into()),
            Source::CashHard { positions, players, alphabet }
            | Source::TurnstileHard { positions, players, alphabet }
                if *positions == 0 || *players == 0 || *alphabet == 0 =>
            {
                bad("hard instances need positions, players and alphabet >= 1".into())
            }
            _ => Ok(()),
        }
    }

    /// Canonical text form; parsing it returns an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("source", self.source.name().into());
        match &self.source {
            Source::Zipf { n, m, skew } => {
                kv("n", n.to_string());
                kv("m", m.to_string());
                kv("skew", skew.to_string());
            }
            Source::Uniform { n, m } => {
                kv("n", n.to_string());
                kv("m", m.to_string());
            }
            Source::File { path } => kv("path", path.display().to_string()),
            Source::CashHard { positions, players, alphabet }
            | Source::TurnstileHard { positions, players, alphabet } => {
                kv("positions", positions.to_string());
                kv("players", players.to_string());
                kv("alphabet", alphabet.to_string());
            }
        }
        if let Some(mode) = self.mode {
            kv("mode", mode.to_string());
        }
        kv("p", self.p.to_string());
        kv("eps", self.eps.to_string());
        kv("sketch", self.sketch.to_string());
        if let Some(b) = self.buckets {
            kv("buckets", b.to_string());
        }
        kv("quantile", self.quantile.to_string());
        kv("column_cache", self.column_cache.to_string());
        kv("copy_policy", self.copy_policy.name().into());
        match self.copy_policy {
            CopyPolicy::Explicit(l) => kv("copies", l.to_string()),
            CopyPolicy::Theorem(c) | CopyPolicy::Naive(c) => kv("copy_constant", c.to_string()),
        }
        if let Some(f0) = self.f0_bound {
            kv("f0_bound", f0.to_string());
        }
        kv("trials", self.trials.to_string());
        kv("seed", self.seed.to_string());
        kv("checkpoint", self.checkpoint.to_string());
        if let Some(t) = self.target {
            kv("target", t.to_string());
        }
        if let Some(o) = &self.output {
            kv("output", o.display().to_string());
        }
        if let Some(t) = &self.trace {
            kv("trace", t.display().to_string());
        }
        out
    }

    /// Stream length of generated sources, if known before generation.
    pub fn planned_length(&self) -> Option<u64> {
        match self.source {
            Source::Zipf { m, .. } | Source::Uniform { m, .. } => Some(m),
            _ => None,
        }
    }

    /// Same config reading only the first `m` updates of a generated stream.
    pub fn with_length(&self, m: u64) -> Result<Self, HarnessError> {
        let mut cfg = self.clone();
        match &mut cfg.source {
            Source::Zipf { m: len, .. } | Source::Uniform { m: len, .. } => *len = m,
            _ => return Err(HarnessError::BadConfig("stream length is only adjustable for zipf and uniform".into())),
        }
        Ok(cfg)
    }
}

/// Sets `key = value` in a config file, replacing an existing assignment
/// in place or appending one. Comments and other lines are kept.
pub fn persist_key(path: &Path, key: &str, value: &str) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let mut found = false;
    let mut lines: Vec<String> = text
        .lines()
        .map(|line| {
            let body = line.split('#').next().unwrap_or("");
            match body.split_once('=') {
                Some((k, _)) if k.trim() == key && !found => {
                    found = true;
                    format!("{key} = {value}")
                }
                _ => line.to_string(),
            }
        })
        .collect();
    if !found {
        lines.push(format!("{key} = {value}"));
    }
    let mut out = lines.join("\n");
    out.push('\n');
    std::fs::write(path, out).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        assert_eq!(ExperimentConfig::parse("# nothing\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_reference_config() {
        let cfg = ExperimentConfig::parse(
            "source = uniform\nn = 1024\nm = 1e5\neps = 0.25\ntrials = 200 # comment\ncopy_policy = explicit\ncopies = 17\n",
        )
        .unwrap();
        assert_eq!(cfg.source, Source::Uniform { n: 1024, m: 100_000 });
        assert_eq!(cfg.copy_policy, CopyPolicy::Explicit(17));
        assert_eq!(cfg.trials, 200);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.source = Source::TurnstileHard { positions: 5, players: 2, alphabet: 3 };
        cfg.p = 1.5;
        cfg.sketch = SketchKind::Stable;
        cfg.copy_policy = CopyPolicy::Naive(2.0);
        cfg.trace = Some("t.csv".into());
        cfg.target = Some(0.9);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid_configs() {
        for text in [
            "trials = 0",
            "eps = 1",
            "p = 2.5",
            "p = 1.5\nsketch = ams",
            "source = file",
            "copy_policy = explicit",
            "colour = red",
            "n = 3\nn = 4",
            "m = -1",
            "n = 1.5",
            "just a line",
            "source = pareto",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn stable_is_the_default_sketch_off_two() {
        assert_eq!(ExperimentConfig::parse("p = 1.5").unwrap().sketch, SketchKind::Stable);
    }

    #[test]
    fn persist_replaces_or_appends() {
        let dir = std::env::temp_dir().join(format!("fmtrack-persist-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.conf");
        std::fs::write(&path, "# header\ncopy_constant = 1 # old\ntrials = 3\n").unwrap();
        persist_key(&path, "copy_constant", "4").unwrap();
        persist_key(&path, "seed", "9").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "# header\ncopy_constant = 4\ntrials = 3\nseed = 9\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
