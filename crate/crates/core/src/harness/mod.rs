//! Adversarial evaluation harness, minus the IO: seeded sample generation,
//! the three mediating subjects, mock sinks, and scoring.

pub mod evaluation;
pub mod prng;
pub mod samples;
pub mod sink;
pub mod subjects;

pub use evaluation::{mcnemar_pair, overall, per_cell, run_subjects, Cell, McNemarResult};
pub use prng::{fnv1a32, seed_from_string, Mulberry32};
pub use samples::{generate_samples, harness_policy, Channel, FCategory, GenConfig, Sample};
pub use sink::{clamp, ChannelSink, MockChannelSink, NullSink};
pub use subjects::{
    block_notice, Behavior, BootError, Decision, Detected, Envelope, Extension, GatedConfig, GatedSubject,
    Passthrough, Subject,
};
