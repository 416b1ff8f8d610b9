//! Sequential Monte Carlo testing of a single p-value with bucket decisions.
//!
//! Given a stream of exceedance indicators `X_i ~ Bernoulli(p)` (each `X_i`
//! records whether a resampled test statistic exceeded the observed one), the
//! algorithms here decide which member of a finite family of intervals
//! ("buckets") covering `[0, 1]` contains the unknown `p`, while keeping the
//! probability of reporting a bucket not containing `p` below a caller-chosen
//! risk bound.
//!
//! The crate is organised around the pipeline:
//!
//! * [`buckets`]: interval families, validation, the overlap property that
//!   makes bounded-effort decisions possible, star-rating codes, and
//!   Clopper-Pearson intervals used by one of the bucket generators.
//! * [`rl`]: an anytime-valid confidence sequence for `p` built from the
//!   Robbins mixture bound, with an exact containment test that needs no
//!   root-finding.
//! * [`simctest`]: sequential stopping boundaries for a single threshold
//!   built by spending an error budget over time, combined across all bucket
//!   boundaries into a joint confidence sequence.
//! * [`engine`]: the sampling loop that draws batches from an exceedance
//!   stream and stops once the current confidence set fits inside a bucket.
//! * [`analysis`]: exact expected-effort computations via conditional
//!   distribution recursions, Wald-style lower bounds on the effort of any
//!   valid procedure, density-weighted integrals of both, and the
//!   multiple-testing screening driver.
//!
//! The crate is `no_std`-compatible (it requires `alloc`); all floating-point
//! transcendentals go through `libm` so results are bit-identical with and
//! without `std`.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod buckets;
pub mod engine;
pub mod math;
pub mod rl;
pub mod simctest;

pub use buckets::{Bucket, BucketSet, RatingCode};
pub use engine::{
    BatchSchedule, BatchSource, BernoulliSource, DecisionReport, Engine, EngineConfig, Method,
    Outcome, RecordedSource,
};
