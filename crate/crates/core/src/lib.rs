//! Core engine for active-learning post-editing.
//!
//! A referenceless quality estimator is trained online from every post-edit
//! and drives a prioritized post-editing queue: worst hypotheses are served
//! first, confidently good ones may be auto-closed, and large gaps between
//! the estimator's blind guess and the realized edit distance raise advisory
//! sanity flags. The [`simulator`] replays gold post-edits to measure corpus
//! quality against human effort.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, the HTTP service
//! and the command-line tool live in the `pedal` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x >= 0.0)` is how NaN gets rejected; DP loops index several rows at once
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::should_implement_trait)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod error;
pub mod features;
pub mod journal;
pub mod learner;
pub mod metrics;
pub mod scheduler;
pub mod simulator;
pub mod synthetic;

pub use crate::corpus::{
    Corpus, Hypothesis, LangCode, PostEditEvent, PostEditRecord, Segment, SegmentId, SegmentState,
};
pub use crate::error::{Error, Result};
pub use crate::features::{EmbeddingTable, FeatureLayout, FeatureVector, Featurizer, Side};
pub use crate::learner::{EstimatorModel, Hyperparams, OnlineLearner, PrequentialLog};
pub use crate::metrics::{EvalStats, TerResult, TokenSequence};
pub use crate::scheduler::{Policy, SanityFlag, Scheduler, SchedulerConfig, Task};
pub use crate::simulator::{ComparisonReport, RunConfig, RunReport};

/// Engine version written into snapshots and reports.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
