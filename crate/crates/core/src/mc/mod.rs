//! Seeded, parallel, deterministic Monte Carlo estimation.
//!
//! Draw `i` of a batch uses a ChaCha8 stream keyed by the batch seed and selected by `i`, and
//! every reduction runs sequentially over the per-draw values in draw order. Results are
//! therefore bit-identical for any rayon pool size.

mod batch;
mod estimators;

pub use batch::{sample_joint, DrawRecord, JointSampler, PosteriorReplay, SampleBatch};
pub use estimators::*;
