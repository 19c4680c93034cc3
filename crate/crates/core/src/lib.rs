pub mod hard_instances;
pub mod harness;
pub mod hashing;
pub mod sketches;
pub mod stable_dist;
pub mod stream_model;
pub mod tracker;

pub use hard_instances::{HardFamily, HardStream};
pub use harness::{run_experiment, AggregateReport, ExperimentConfig};
pub use sketches::{AmsSketch, MomentEstimator, StableSketch};
pub use stream_model::{FrequencyVector, Stream, StreamEvent, StreamMode};
pub use tracker::{evaluate_tracking, TrackOptions, TrackReport, Tracker};
