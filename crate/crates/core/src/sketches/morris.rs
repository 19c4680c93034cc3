use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SketchError;

/// Morris approximate counter.
///
/// Stores only an exponent register `X`; an increment bumps `X` with
/// probability `base^-X`, and `(base^X - 1) / (base - 1)` is an unbiased
/// estimate of the number of increments.
#[derive(Debug, Clone)]
pub struct MorrisCounter {
    register: u32,
    base: f64,
    // base^-register, kept in sync with the register
    threshold: f64,
    rng: ChaCha8Rng,
}

impl MorrisCounter {
    pub fn new(base: f64, seed: u64) -> Result<Self, SketchError> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(SketchError::BadParameter(format!("Morris base must exceed 1, got {base}")));
        }
        Ok(Self { register: 0, base, threshold: 1.0, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn increment(&mut self) {
        if self.rng.random::<f64>() < self.threshold {
            self.register += 1;
            self.threshold = self.base.powi(-(self.register as i32));
        }
    }

    pub fn estimate(&self) -> f64 {
        (self.base.powi(self.register as i32) - 1.0) / (self.base - 1.0)
    }

    pub fn register(&self) -> u32 {
        self.register
    }
}
