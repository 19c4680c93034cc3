//! Linear one-shot sketches and the Morris probabilistic counter.

mod ams;
mod morris;
mod stable;

pub use ams::AmsSketch;
pub use morris::MorrisCounter;
pub use stable::StableSketch;

use thiserror::Error;

use crate::hashing::HashError;
use crate::stable_dist::StableError;
use crate::stream_model::{FrequencyVector, StreamError, StreamEvent, StreamMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Stable(#[from] StableError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("item {item} outside universe of size {universe}")]
    ItemOutOfRange { item: u64, universe: u64 },
    #[error("sketches are not mergeable: {0}")]
    Incompatible(String),
    #[error("counter overflow")]
    Overflow,
    #[error("approximation ratio undefined for the zero vector")]
    ZeroVector,
    #[error("invalid sketch parameter: {0}")]
    BadParameter(String),
    #[error("malformed sketch dump: {0}")]
    Dump(String),
}

/// Anything that ingests signed updates and reports an F_p estimate.
pub trait MomentEstimator {
    fn update(&mut self, item: u64, delta: i64) -> Result<(), SketchError>;

    fn estimate(&self) -> f64;

    fn apply_event(&mut self, event: &StreamEvent) -> Result<(), SketchError> {
        self.update(event.item, event.signed_mass())
    }
}

impl<T: MomentEstimator + ?Sized> MomentEstimator for Box<T> {
    fn update(&mut self, item: u64, delta: i64) -> Result<(), SketchError> {
        (**self).update(item, delta)
    }

    fn estimate(&self) -> f64 {
        (**self).estimate()
    }
}

/// Exact F_p estimator; the test double for the evaluation harness.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    p: f64,
    freq: FrequencyVector,
}

impl ExactOracle {
    pub fn new(p: f64, universe: u64) -> Self {
        Self { p, freq: FrequencyVector::new(universe) }
    }
}

impl MomentEstimator for ExactOracle {
    fn update(&mut self, item: u64, delta: i64) -> Result<(), SketchError> {
        self.freq.add(item, delta)?;
        Ok(())
    }

    fn estimate(&self) -> f64 {
        self.freq.exact_moment(self.p).unwrap_or(f64::NAN)
    }
}

/// Feeds every event of a stream into an estimator, validating against `mode`.
pub fn ingest<E: MomentEstimator + ?Sized>(
    est: &mut E,
    events: &[StreamEvent],
    universe: u64,
    mode: StreamMode,
) -> Result<(), SketchError> {
    for e in events {
        e.validate(universe, mode)?;
        est.apply_event(e)?;
    }
    Ok(())
}
