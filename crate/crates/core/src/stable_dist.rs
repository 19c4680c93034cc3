//! Symmetric p-stable variates and quantile scale constants.
//!
//! Parameterization: characteristic function `exp(-|t|^p)`. Under it, p = 1
//! is the standard Cauchy law and p = 2 is a Gaussian with variance 2.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt::Write as _;

use thiserror::Error;

use crate::hashing::{derive_seed, unit_open};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StableError {
    #[error("stability index must lie in (0, 2], got {0}")]
    BadIndex(f64),
    #[error("quantile must lie in (0, 1), got {0}")]
    BadQuantile(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Draw-index addressed sampler: variate `i` depends only on `(seed, i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSampler {
    p: f64,
    seed: u64,
}

impl StableSampler {
    pub fn new(p: f64, seed: u64) -> Result<Self, StableError> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(StableError::BadIndex(p));
        }
        Ok(Self { p, seed })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Chambers-Mallows-Stuck transform of a uniform angle and a unit
    /// exponential, both derived from `(seed, draw_index)`.
    #[inline]
    pub fn sample(&self, draw_index: u64) -> f64 {
        let u = unit_open(derive_seed(self.seed, draw_index, 0));
        let w = -unit_open(derive_seed(self.seed, draw_index, 1)).ln();
        let theta = PI * (u - 0.5);
        cms(self.p, theta, w)
    }
}

#[inline]
fn cms(p: f64, theta: f64, w: f64) -> f64 {
    if p == 1.0 {
        theta.tan()
    } else if p == 2.0 {
        2.0 * theta.sin() * w.sqrt()
    } else {
        let a = (p * theta).sin() / theta.cos().powf(1.0 / p);
        let b = (((1.0 - p) * theta).cos() / w).powf((1.0 - p) / p);
        a * b
    }
}

/// Lower `s`-quantile of a slice (sorted index `floor(s * (len - 1))`).
///
/// Reorders `values`. Panics on an empty slice.
pub fn quantile_in_place(values: &mut [f64], s: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let idx = ((values.len() - 1) as f64 * s).floor() as usize;
    let (_, v, _) = values.select_nth_unstable_by(idx, f64::total_cmp);
    *v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEntry {
    pub p: f64,
    pub s: f64,
    pub scale: f64,
    /// Monte-Carlo sample count; 0 for analytic entries.
    pub samples: u64,
    pub provenance: Provenance,
}

/// Seed used for every Monte-Carlo scale computation.
pub const SCALE_SEED: u64 = 0x5ca1_e5ee_d000_0001;

/// Sample count behind the frozen Monte-Carlo entries.
pub const SCALE_SAMPLES: u64 = 10_000_000;

/// `median_scale(1.5, 0.5, SCALE_SAMPLES)` frozen so estimators do not pay
/// for the Monte-Carlo run.
const P15_MEDIAN_SCALE: f64 = 0.968_507_815_122_332_5;

/// s-quantile of |X| for standard p-stable X.
///
/// Analytic for p = 1 (Cauchy: `tan(pi s / 2)`); otherwise Monte-Carlo over
/// `samples` draws with the fixed [`SCALE_SEED`].
pub fn median_scale(p: f64, s: f64, samples: u64) -> Result<f64, StableError> {
    let sampler = StableSampler::new(p, SCALE_SEED)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(StableError::BadQuantile(s));
    }
    if p == 1.0 {
        return Ok(if s == 0.5 { 1.0 } else { (FRAC_PI_2 * s).tan() });
    }
    let mut draws: Vec<f64> = (0..samples.max(1)).map(|i| sampler.sample(i).abs()).collect();
    Ok(quantile_in_place(&mut draws, s))
}

/// Cache of scale constants keyed by (p, s).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScaleTable {
    entries: Vec<ScaleEntry>,
}

impl ScaleTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Analytic medians for p = 1 and p = 2 plus the frozen p = 1.5 median.
    pub fn builtin() -> Self {
        let mut t = Self::empty();
        t.insert(ScaleEntry { p: 1.0, s: 0.5, scale: 1.0, samples: 0, provenance: Provenance::Analytic });
        // sqrt(2) times the upper quartile of N(0, 1)
        t.insert(ScaleEntry {
            p: 2.0,
            s: 0.5,
            scale: SQRT_2 * 0.674_489_750_196_081_7,
            samples: 0,
            provenance: Provenance::Analytic,
        });
        t.insert(ScaleEntry {
            p: 1.5,
            s: 0.5,
            scale: P15_MEDIAN_SCALE,
            samples: SCALE_SAMPLES,
            provenance: Provenance::MonteCarlo,
        });
        t
    }

    pub fn entries(&self) -> &[ScaleEntry] {
        &self.entries
    }

    pub fn insert(&mut self, entry: ScaleEntry) {
        self.entries.retain(|e| !(e.p == entry.p && e.s == entry.s));
        self.entries.push(entry);
    }

    pub fn lookup(&self, p: f64, s: f64) -> Option<f64> {
        self.entries.iter().find(|e| e.p == p && e.s == s).map(|e| e.scale)
    }

    /// Cached scale, computing and storing a Monte-Carlo entry on a miss.
    pub fn get_or_compute(&mut self, p: f64, s: f64, samples: u64) -> Result<f64, StableError> {
        if let Some(v) = self.lookup(p, s) {
            return Ok(v);
        }
        let scale = median_scale(p, s, samples)?;
        let (samples, provenance) =
            if p == 1.0 { (0, Provenance::Analytic) } else { (samples, Provenance::MonteCarlo) };
        self.insert(ScaleEntry { p, s, scale, samples, provenance });
        Ok(scale)
    }

    /// `p s scale samples` rows; analytic entries carry 0 samples.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(out, "{} {} {} {}", e.p, e.s, e.scale, e.samples).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, StableError> {
        let mut t = Self::empty();
        for (idx, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| StableError::Parse { line: idx + 1, message };
            let fields: Vec<&str> = content.split_whitespace().collect();
            let [p, s, scale, samples] = fields.as_slice() else {
                return Err(err(format!("expected 4 fields, got {}", fields.len())));
            };
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{v}: {e}")));
            let samples: u64 = samples.parse().map_err(|e| err(format!("{samples}: {e}")))?;
            let provenance = if samples == 0 { Provenance::Analytic } else { Provenance::MonteCarlo };
            t.insert(ScaleEntry { p: num(p)?, s: num(s)?, scale: num(scale)?, samples, provenance });
        }
        Ok(t)
    }
}
