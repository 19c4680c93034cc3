use std::fmt::Write as _;

use super::{MomentEstimator, SketchError};
use crate::hashing::{derive_seed, role, HashFamily};

/// AMS / fast-AMS sketch for F_2.
///
/// Item `i` adds `delta * g(i)` to counter `h(i)`, where `g` is a 4-wise
/// independent sign hash and `h` a pairwise independent bucket hash. The
/// estimate is the sum of squared counters; it is maintained incrementally so
/// that reading it is O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct AmsSketch {
    universe: u64,
    sign_seed: u64,
    bucket_seed: u64,
    sign_hash: HashFamily,
    bucket_hash: HashFamily,
    counters: Vec<i64>,
    sum_sq: i128,
}

impl AmsSketch {
    /// Sketch with hash seeds derived from `seed`.
    pub fn new(buckets: usize, universe: u64, seed: u64) -> Result<Self, SketchError> {
        Self::from_seeds(buckets, universe, derive_seed(seed, 0, role::SIGN), derive_seed(seed, 0, role::BUCKET))
    }

    pub fn from_seeds(buckets: usize, universe: u64, sign_seed: u64, bucket_seed: u64) -> Result<Self, SketchError> {
        if buckets == 0 {
            return Err(SketchError::BadParameter("AMS sketch needs at least one bucket".into()));
        }
        Ok(Self {
            universe,
            sign_seed,
            bucket_seed,
            sign_hash: HashFamily::new(sign_seed, 4, universe, 2)?,
            bucket_hash: HashFamily::new(bucket_seed, 2, universe, buckets as u64)?,
            counters: vec![0; buckets],
            sum_sq: 0,
        })
    }

    /// Bucket count giving a one-shot `eps` approximation with probability 2/3.
    pub fn buckets_for(eps: f64) -> usize {
        (16.0 / (eps * eps)).ceil() as usize
    }

    pub fn buckets(&self) -> usize {
        self.counters.len()
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn seeds(&self) -> (u64, u64) {
        (self.sign_seed, self.bucket_seed)
    }

    pub fn counters(&self) -> &[i64] {
        &self.counters
    }

    pub fn sign(&self, item: u64) -> Result<i64, SketchError> {
        Ok(self.sign_hash.sign(item)?)
    }

    pub fn bucket(&self, item: u64) -> Result<usize, SketchError> {
        Ok(self.bucket_hash.bucket(item)?)
    }

    fn check_item(&self, item: u64) -> Result<(), SketchError> {
        if item >= self.universe {
            Err(SketchError::ItemOutOfRange { item, universe: self.universe })
        } else {
            Ok(())
        }
    }

    /// Sum of squared counters.
    pub fn estimate(&self) -> f64 {
        self.sum_sq as f64
    }

    /// Adds the counters of `other`; both sketches must share buckets and seeds.
    pub fn merge(&mut self, other: &AmsSketch) -> Result<(), SketchError> {
        if self.buckets() != other.buckets() {
            return Err(SketchError::Incompatible(format!("bucket counts {} and {}", self.buckets(), other.buckets())));
        }
        if self.seeds() != other.seeds() || self.universe != other.universe {
            return Err(SketchError::Incompatible("hash seeds or universe differ".into()));
        }
        for (c, o) in self.counters.iter_mut().zip(&other.counters) {
            *c = c.checked_add(*o).ok_or(SketchError::Overflow)?;
        }
        self.sum_sq = recompute_sum_sq(&self.counters)?;
        Ok(())
    }

    /// Approximation ratio `x^T H x / x^T x` of this sketch's hash pair at a
    /// dense real vector, with `H_ij = g(i) g(j) [h(i) = h(j)]`.
    ///
    /// Only the hash functions are used; the sketch counters are ignored.
    pub fn ratio(&self, x: &[f64]) -> Result<f64, SketchError> {
        if x.len() as u64 > self.universe {
            return Err(SketchError::ItemOutOfRange { item: x.len() as u64 - 1, universe: self.universe });
        }
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        if norm_sq == 0.0 {
            return Err(SketchError::ZeroVector);
        }
        let mut counters = vec![0.0f64; self.buckets()];
        for (i, &v) in x.iter().enumerate() {
            let i = i as u64;
            counters[self.bucket_hash.bucket_unchecked(i)] += self.sign_hash.sign_unchecked(i) as f64 * v;
        }
        Ok(counters.iter().map(|c| c * c).sum::<f64>() / norm_sq)
    }

    /// Text dump: a header line with parameters and seeds, then the counters.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "ams buckets={} universe={} sign_seed={} bucket_seed={}\n",
            self.buckets(),
            self.universe,
            self.sign_seed,
            self.bucket_seed
        );
        let line: Vec<String> = self.counters.iter().map(i64::to_string).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, SketchError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| SketchError::Dump("empty dump".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("ams") {
            return Err(SketchError::Dump("expected `ams` header".into()));
        }
        let mut get = |key: &str| -> Result<u64, SketchError> {
            let field = fields.next().ok_or_else(|| SketchError::Dump(format!("missing {key}")))?;
            field
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| SketchError::Dump(format!("bad field `{field}`, expected {key}=<int>")))
        };
        let buckets = get("buckets")? as usize;
        let universe = get("universe")?;
        let sign_seed = get("sign_seed")?;
        let bucket_seed = get("bucket_seed")?;
        let mut sketch = Self::from_seeds(buckets, universe, sign_seed, bucket_seed)?;
        let counters: Vec<i64> = lines
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| SketchError::Dump(format!("bad counter `{v}`"))))
            .collect::<Result<_, _>>()?;
        if counters.len() != buckets {
            return Err(SketchError::Dump(format!("expected {buckets} counters, got {}", counters.len())));
        }
        sketch.sum_sq = recompute_sum_sq(&counters)?;
        sketch.counters = counters;
        Ok(sketch)
    }
}

fn recompute_sum_sq(counters: &[i64]) -> Result<i128, SketchError> {
    counters.iter().try_fold(0i128, |acc, &c| {
        let c = c as i128;
        acc.checked_add(c * c).ok_or(SketchError::Overflow)
    })
}

impl MomentEstimator for AmsSketch {
    #[inline]
    fn update(&mut self, item: u64, delta: i64) -> Result<(), SketchError> {
        self.check_item(item)?;
        let j = self.bucket_hash.bucket_unchecked(item);
        let step = delta.checked_mul(self.sign_hash.sign_unchecked(item)).ok_or(SketchError::Overflow)?;
        let old = self.counters[j];
        let new = old.checked_add(step).ok_or(SketchError::Overflow)?;
        let (old, new) = (old as i128, new as i128);
        self.sum_sq = self.sum_sq.checked_add(new * new - old * old).ok_or(SketchError::Overflow)?;
        self.counters[j] = new as i64;
        Ok(())
    }

    fn estimate(&self) -> f64 {
        AmsSketch::estimate(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_item_lands_in_one_counter() {
        let mut s = AmsSketch::new(16, 100, 5).unwrap();
        s.update(42, 3).unwrap();
        let nonzero: Vec<i64> = s.counters().iter().copied().filter(|&c| c != 0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].abs(), 3);
        assert_eq!(s.estimate(), 9.0);
    }

    #[test]
    fn insert_then_delete_cancels() {
        let mut s = AmsSketch::new(16, 100, 5).unwrap();
        s.update(7, 1).unwrap();
        s.update(7, -1).unwrap();
        assert!(s.counters().iter().all(|&c| c == 0));
        assert_eq!(s.estimate(), 0.0);
    }

    #[test]
    fn colliding_opposite_signs_cancel() {
        // find a seed where items 1 and 2 collide with opposite signs
        let s = (0..10_000u64)
            .map(|seed| AmsSketch::new(2, 3, seed).unwrap())
            .find(|s| {
                s.bucket(1).unwrap() == s.bucket(2).unwrap() && s.sign(1).unwrap() == 1 && s.sign(2).unwrap() == -1
            })
            .expect("some seed collides");
        let mut s = s;
        s.update(1, 1).unwrap();
        s.update(2, 1).unwrap();
        assert_eq!(s.counters()[s.bucket(1).unwrap()], 0);
    }

    #[test]
    fn single_item_estimate_is_exact_for_every_seed() {
        for seed in 0..200 {
            let mut s = AmsSketch::new(8, 1000, seed).unwrap();
            s.update(seed % 1000, 17).unwrap();
            assert_eq!(s.estimate(), 289.0);
        }
    }

    #[test]
    fn empty_sketch_estimates_zero() {
        assert_eq!(AmsSketch::new(4, 10, 1).unwrap().estimate(), 0.0);
    }

    #[test]
    fn merge_rules() {
        let mut a = AmsSketch::new(8, 50, 1).unwrap();
        let b = AmsSketch::new(16, 50, 1).unwrap();
        assert!(matches!(a.merge(&b), Err(SketchError::Incompatible(_))));
        let c = AmsSketch::new(8, 50, 2).unwrap();
        assert!(matches!(a.merge(&c), Err(SketchError::Incompatible(_))));
        a.update(3, 4).unwrap();
        let before = a.clone();
        a.merge(&AmsSketch::new(8, 50, 1).unwrap()).unwrap();
        assert_eq!(a, before);
    }

    #[test]
    fn ratio_basics() {
        let s = AmsSketch::new(4, 8, 9).unwrap();
        let mut e = vec![0.0; 8];
        e[5] = 1.0;
        assert_eq!(s.ratio(&e).unwrap(), 1.0);
        assert_eq!(s.ratio(&[0.0; 8]), Err(SketchError::ZeroVector));
        assert!(s.ratio(&[1.0; 9]).is_err());
    }

    #[test]
    fn out_of_range_update() {
        let mut s = AmsSketch::new(4, 8, 9).unwrap();
        assert_eq!(s.update(8, 1), Err(SketchError::ItemOutOfRange { item: 8, universe: 8 }));
    }

    #[test]
    fn dump_round_trip() {
        let mut s = AmsSketch::new(8, 100, 3).unwrap();
        for i in 0..100 {
            s.update(i, (i as i64 % 7) - 3).unwrap();
        }
        let back = AmsSketch::from_dump(&s.dump()).unwrap();
        assert_eq!(back, s);
        assert!(AmsSketch::from_dump("cms buckets=1").is_err());
        assert!(AmsSketch::from_dump("ams buckets=2 universe=4 sign_seed=1 bucket_seed=2\n1\n").is_err());
    }
}
