//! Seeded k-wise independent polynomial hash families.
//!
//! A family of independence level `d` is a uniformly random polynomial of
//! degree `d - 1` over a prime field, evaluated by Horner's rule. Production
//! families use the Mersenne prime 2^61 - 1; small prime moduli are accepted
//! so that exhaustive independence checks can enumerate every coefficient
//! tuple.
//!
//! Field values are folded into the output range by `value % range`; the sign
//! hash uses the low bit. Neither fold is perfectly uniform over an odd field:
//! for a single input the probability of any output differs from `1/range` by
//! at most `1/modulus` absolute. Over 2^61 - 1 this is negligible; over the
//! tiny test fields it is the documented skew.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Seed-derivation roles. Distinct roles keep derived streams independent.
pub mod role {
    pub const SIGN: u64 = 1;
    pub const BUCKET: u64 = 2;
    pub const STABLE_ROW: u64 = 3;
    pub const COPY: u64 = 4;
    pub const TRIAL: u64 = 5;
    pub const STREAM: u64 = 6;
    pub const SKETCH: u64 = 7;
    pub const BALL: u64 = 8;
    pub const MORRIS: u64 = 9;
    pub const INPUT: u64 = 10;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HashError {
    #[error("unsupported independence degree {0} (expected 2 or 4)")]
    UnsupportedDegree(usize),
    #[error("hash range must be at least 1")]
    EmptyRange,
    #[error("universe must be at least 1")]
    EmptyUniverse,
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("universe {universe} does not fit in field of modulus {modulus}")]
    UniverseTooLarge { universe: u64, modulus: u64 },
    #[error("coefficient {0} outside the field")]
    CoefficientOutOfField(u64),
    #[error("index {index} out of universe of size {universe}")]
    IndexOutOfRange { index: u64, universe: u64 },
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes `(master, index, role)` into a 64-bit seed.
///
/// Every seed in the crate comes from this function, which forms the seed
/// tree: trial seeds from the master seed, copy seeds from the trial seed,
/// hash seeds from the copy seed.
#[inline]
pub fn derive_seed(master: u64, index: u64, role: u64) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ index.wrapping_mul(0xa076_1d64_78bd_642f));
    splitmix64(h ^ role.wrapping_mul(0xe703_7ed1_a0b4_28db))
}

/// Converts 64 random bits to a uniform double in the open interval (0, 1).
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    let v = ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    // the top grid point rounds up to 1.0
    v.min(1.0 - f64::EPSILON / 2.0)
}

fn is_prime(m: u64) -> bool {
    if m < 2 {
        return false;
    }
    if m == MERSENNE_61 {
        return true;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= m {
        if m % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[inline]
fn mul_mod_mersenne(a: u64, b: u64) -> u64 {
    let z = a as u128 * b as u128;
    let lo = (z as u64) & MERSENNE_61;
    let hi = (z >> 61) as u64;
    let s = lo + hi;
    let s = (s & MERSENNE_61) + (s >> 61);
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

#[inline]
fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

/// A polynomial hash `[universe] -> [range]` with `degree`-wise independence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    /// Constant term first.
    coefficients: Vec<u64>,
    modulus: u64,
    universe: u64,
    range: u64,
}

impl HashFamily {
    /// Draws a fresh family over the Mersenne field from `seed`.
    pub fn new(seed: u64, degree: usize, universe: u64, range: u64) -> Result<Self, HashError> {
        check_degree(degree)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefficients = (0..degree).map(|_| rng.random_range(0..MERSENNE_61)).collect();
        Self::with_coefficients(MERSENNE_61, coefficients, universe, range)
    }

    /// Builds a family from explicit coefficients, constant term first.
    ///
    /// All coefficient tuples are allowed, including a zero leading
    /// coefficient; that is what makes the map from coefficients to the
    /// values at `degree` distinct points a bijection.
    pub fn with_coefficients(
        modulus: u64,
        coefficients: Vec<u64>,
        universe: u64,
        range: u64,
    ) -> Result<Self, HashError> {
        check_degree(coefficients.len())?;
        if range == 0 {
            return Err(HashError::EmptyRange);
        }
        if universe == 0 {
            return Err(HashError::EmptyUniverse);
        }
        if !is_prime(modulus) {
            return Err(HashError::NotPrime(modulus));
        }
        if universe > modulus {
            return Err(HashError::UniverseTooLarge { universe, modulus });
        }
        if let Some(&c) = coefficients.iter().find(|&&c| c >= modulus) {
            return Err(HashError::CoefficientOutOfField(c));
        }
        Ok(Self { coefficients, modulus, universe, range })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coefficients
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    /// Raw field value of the polynomial at `x`; caller guarantees `x < universe`.
    #[inline]
    pub(crate) fn field_value(&self, x: u64) -> u64 {
        let m = self.modulus;
        let mut coeffs = self.coefficients.iter().rev();
        let mut acc = *coeffs.next().expect("degree >= 2");
        if m == MERSENNE_61 {
            for &c in coeffs {
                acc = add_mod(mul_mod_mersenne(acc, x), c, m);
            }
        } else {
            for &c in coeffs {
                acc = add_mod(((acc as u128 * x as u128) % m as u128) as u64, c, m);
            }
        }
        acc
    }

    #[inline]
    pub(crate) fn sign_unchecked(&self, x: u64) -> i64 {
        if self.field_value(x) & 1 == 0 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub(crate) fn bucket_unchecked(&self, x: u64) -> usize {
        (self.field_value(x) % self.range) as usize
    }

    fn check_index(&self, x: u64) -> Result<(), HashError> {
        if x >= self.universe {
            Err(HashError::IndexOutOfRange { index: x, universe: self.universe })
        } else {
            Ok(())
        }
    }

    /// Sign hash: +1 when the field value is even, -1 when odd.
    pub fn sign(&self, x: u64) -> Result<i64, HashError> {
        self.check_index(x)?;
        Ok(self.sign_unchecked(x))
    }

    /// Bucket hash: field value folded into `[0, range)`.
    pub fn bucket(&self, x: u64) -> Result<usize, HashError> {
        self.check_index(x)?;
        Ok(self.bucket_unchecked(x))
    }
}

fn check_degree(degree: usize) -> Result<(), HashError> {
    match degree {
        2 | 4 => Ok(()),
        d => Err(HashError::UnsupportedDegree(d)),
    }
}
