use std::collections::HashMap;
use std::fmt::Write as _;

use super::{MomentEstimator, SketchError};
use crate::hashing::{derive_seed, role};
use crate::stable_dist::{quantile_in_place, ScaleTable, StableSampler, SCALE_SAMPLES};

/// Indyk-style p-stable sketch: `y = A f` with i.i.d. standard p-stable
/// entries `A[j][i]`.
///
/// Entries are regenerated from `(seed, row, item)` on every update, so the
/// sketch stores only the `rows` accumulators. [`StableSketch::with_column_cache`]
/// trades `rows` doubles per distinct item for speed on small universes.
///
/// The estimate is `(quantile_s |y_j| / scale)^p`, where `scale` is the
/// s-quantile of `|X|` for a standard p-stable `X`.
#[derive(Debug, Clone)]
pub struct StableSketch {
    p: f64,
    quantile: f64,
    scale: f64,
    universe: u64,
    seed: u64,
    rows: Vec<StableSampler>,
    acc: Vec<f64>,
    cache: Option<HashMap<u64, Box<[f64]>>>,
}

impl StableSketch {
    /// Median-based sketch; the scale comes from the builtin table or a
    /// Monte-Carlo run when `p` is not tabulated.
    pub fn new(rows: usize, p: f64, universe: u64, seed: u64) -> Result<Self, SketchError> {
        let scale = ScaleTable::builtin().get_or_compute(p, 0.5, SCALE_SAMPLES)?;
        Self::with_scale(rows, p, universe, seed, 0.5, scale)
    }

    pub fn with_scale(
        rows: usize,
        p: f64,
        universe: u64,
        seed: u64,
        quantile: f64,
        scale: f64,
    ) -> Result<Self, SketchError> {
        if rows == 0 {
            return Err(SketchError::BadParameter("stable sketch needs at least one row".into()));
        }
        if !(quantile > 0.0 && quantile < 1.0) {
            return Err(SketchError::BadParameter(format!("quantile {quantile} outside (0, 1)")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(SketchError::BadParameter(format!("scale {scale} must be positive")));
        }
        let rows = (0..rows as u64)
            .map(|j| StableSampler::new(p, derive_seed(seed, j, role::STABLE_ROW)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { p, quantile, scale, universe, seed, acc: vec![0.0; rows.len()], rows, cache: None })
    }

    /// Memoizes each item's column of `A` after its first update.
    pub fn with_column_cache(mut self) -> Self {
        self.cache = Some(HashMap::new());
        self
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.acc
    }

    /// Matrix entry `A[row][item]`.
    pub fn entry(&self, row: usize, item: u64) -> f64 {
        self.rows[row].sample(item)
    }

    /// Estimate of the p-norm `||f||_p`.
    pub fn norm_estimate(&self) -> f64 {
        let mut abs: Vec<f64> = self.acc.iter().map(|v| v.abs()).collect();
        quantile_in_place(&mut abs, self.quantile) / self.scale
    }

    /// Estimate of the moment `F_p = ||f||_p^p`.
    pub fn estimate(&self) -> f64 {
        self.norm_estimate().powf(self.p)
    }

    fn check_compatible(&self, other: &StableSketch) -> Result<(), SketchError> {
        if self.rows() != other.rows()
            || self.p != other.p
            || self.seed != other.seed
            || self.universe != other.universe
        {
            return Err(SketchError::Incompatible("rows, p, seed or universe differ".into()));
        }
        Ok(())
    }

    /// Adds the accumulators of a sketch built with the same parameters.
    pub fn merge(&mut self, other: &StableSketch) -> Result<(), SketchError> {
        self.check_compatible(other)?;
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            *a += b;
        }
        Ok(())
    }

    /// Text dump: parameter header, then accumulators in shortest
    /// round-trip decimal form.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "stable rows={} p={} universe={} seed={} quantile={} scale={}\n",
            self.rows(),
            self.p,
            self.universe,
            self.seed,
            self.quantile,
            self.scale
        );
        let line: Vec<String> = self.acc.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, SketchError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| SketchError::Dump("empty dump".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("stable") {
            return Err(SketchError::Dump("expected `stable` header".into()));
        }
        let mut get = |key: &str| -> Result<String, SketchError> {
            let field = fields.next().ok_or_else(|| SketchError::Dump(format!("missing {key}")))?;
            field
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| SketchError::Dump(format!("bad field `{field}`, expected {key}=...")))
        };
        let bad = |v: &str| SketchError::Dump(format!("bad value `{v}`"));
        let rows: usize = get("rows").and_then(|v| v.parse().map_err(|_| bad(&v)))?;
        let p: f64 = get("p").and_then(|v| v.parse().map_err(|_| bad(&v)))?;
        let universe: u64 = get("universe").and_then(|v| v.parse().map_err(|_| bad(&v)))?;
        let seed: u64 = get("seed").and_then(|v| v.parse().map_err(|_| bad(&v)))?;
        let quantile: f64 = get("quantile").and_then(|v| v.parse().map_err(|_| bad(&v)))?;
        let scale: f64 = get("scale").and_then(|v| v.parse().map_err(|_| bad(&v)))?;
        let mut sketch = Self::with_scale(rows, p, universe, seed, quantile, scale)?;
        let acc: Vec<f64> = lines
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad(v)))
            .collect::<Result<_, _>>()?;
        if acc.len() != rows {
            return Err(SketchError::Dump(format!("expected {rows} accumulators, got {}", acc.len())));
        }
        sketch.acc = acc;
        Ok(sketch)
    }
}

impl MomentEstimator for StableSketch {
    fn update(&mut self, item: u64, delta: i64) -> Result<(), SketchError> {
        if item >= self.universe {
            return Err(SketchError::ItemOutOfRange { item, universe: self.universe });
        }
        let d = delta as f64;
        match &mut self.cache {
            Some(cache) => {
                let rows = &self.rows;
                let column = cache.entry(item).or_insert_with(|| rows.iter().map(|r| r.sample(item)).collect());
                for (a, x) in self.acc.iter_mut().zip(column.iter()) {
                    *a += d * x;
                }
            }
            None => {
                for (a, r) in self.acc.iter_mut().zip(&self.rows) {
                    *a += d * r.sample(item);
                }
            }
        }
        Ok(())
    }

    fn estimate(&self) -> f64 {
        StableSketch::estimate(self)
    }
}
