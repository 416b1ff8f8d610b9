//! Decision engine: feeds a Bernoulli sample stream into a bucket family
//! until some bucket provably contains the underlying rate.
//!
//! Two methods are supported. `Rl` keeps a single always-valid confidence
//! sequence and stops once it fits inside a bucket; the whole risk budget
//! `eps` caps the probability that the sequence ever drops the true rate.
//! `Simctest` runs one stopping-boundary table per distinct bucket endpoint
//! with per-side risk `eps / 2`; wrong upper calls are nested across
//! thresholds (a path beyond the boundary of a far threshold is also beyond
//! every nearer one), so the two sides together cost at most `eps`.
//!
//! Sampling proceeds in batches. Statuses are evaluated at batch ends only,
//! which never hurts validity (fewer looks means fewer chances to stop
//! wrongly) but trades a little extra sampling for fewer boundary lookups.
//! Threshold calls latch: once a boundary is hit the comparison is fixed
//! and its table is no longer consulted or grown. If latched calls ever
//! contradict each other (probability at most `eps`), the engine falls back
//! to the bucket containing the point estimate and says so in the report.

use alloc::vec::Vec;
use core::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::buckets::{
    star_rating, Bucket, BucketError, BucketSet, RatingCode, CLASSICAL_THRESHOLDS,
};
use crate::math;
use crate::rl;
use crate::simctest::{BoundaryTable, SimctestError, Spending, ThresholdCall};

/// Cap on total samples per stream when the caller does not set one.
pub const DEFAULT_N_CAP: u64 = 10_000_000;

// ---------------------------------------------------------------------------
// Method and configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// Confidence-sequence containment.
    Rl,
    /// Per-threshold stopping boundaries.
    Simctest,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rl => write!(f, "rl"),
            Self::Simctest => write!(f, "simctest"),
        }
    }
}

/// Geometric batch schedule: the first evaluation happens at `initial`
/// samples, and each later one at `max(n + 1, ceil(n * growth))`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatchSchedule {
    pub initial: u64,
    pub growth: f64,
}

impl BatchSchedule {
    pub fn new(initial: u64, growth: f64) -> Result<Self, EngineError> {
        if initial == 0 || !(growth >= 1.0) || !growth.is_finite() {
            return Err(EngineError::InvalidBatch { initial, growth });
        }
        Ok(Self { initial, growth })
    }

    /// Evaluate after every sample.
    pub fn every_sample() -> Self {
        Self { initial: 1, growth: 1.0 }
    }

    /// The first evaluation point after `n` samples.
    pub fn next_end(&self, n: u64) -> u64 {
        if n == 0 {
            self.initial
        } else {
            (n + 1).max(math::ceil(n as f64 * self.growth) as u64)
        }
    }
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self { initial: 10, growth: 1.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EngineConfig {
    pub method: Method,
    /// Total risk budget: probability the reported bucket misses the true
    /// rate.
    pub eps: f64,
    /// Spending shape `k` for the boundary method (`eps_n ~ n / (n + k)`).
    pub spending_k: f64,
    pub batch: BatchSchedule,
    /// Hard cap on samples; reaching it truncates with a fallback report.
    pub n_cap: u64,
}

impl EngineConfig {
    pub fn new(method: Method, eps: f64) -> Self {
        Self {
            method,
            eps,
            spending_k: 1000.0,
            batch: BatchSchedule::default(),
            n_cap: DEFAULT_N_CAP,
        }
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum EngineError {
    Bucket(BucketError),
    Simctest(SimctestError),
    /// `eps` outside the method's valid range: `(0, 1)` for the confidence
    /// sequence, `(0, 1/2]` for boundaries (each side spends `eps / 2`).
    InvalidRisk { eps: f64 },
    InvalidBatch { initial: u64, growth: f64 },
    InvalidCap,
    /// A success rate outside `[0, 1]`.
    InvalidRate { p: f64 },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bucket(e) => write!(f, "{e}"),
            Self::Simctest(e) => write!(f, "{e}"),
            Self::InvalidRisk { eps } => write!(f, "risk budget {eps} out of range"),
            Self::InvalidBatch { initial, growth } => {
                write!(f, "batch schedule ({initial}, {growth}) invalid")
            }
            Self::InvalidCap => write!(f, "sample cap must be positive"),
            Self::InvalidRate { p } => write!(f, "success rate {p} outside [0, 1]"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<BucketError> for EngineError {
    fn from(e: BucketError) -> Self {
        Self::Bucket(e)
    }
}

impl From<SimctestError> for EngineError {
    fn from(e: SimctestError) -> Self {
        Self::Simctest(e)
    }
}

// ---------------------------------------------------------------------------
// Sample sources
// ---------------------------------------------------------------------------

/// A source of Bernoulli samples consumed in batches.
pub trait BatchSource {
    /// Draw about `requested` more samples; returns `(drawn, ones)`.
    /// Pre-recorded sources may return a different `drawn` (their own batch
    /// granularity); `drawn = 0` means the source is exhausted.
    fn next_batch(&mut self, requested: u64) -> (u64, u64);
}

/// Deterministic Bernoulli source: one ChaCha12 substream per
/// `(seed, stream)` pair, so runs are reproducible and streams are
/// independent.
#[derive(Clone, Debug)]
pub struct BernoulliSource {
    rng: ChaCha12Rng,
    p: f64,
}

impl BernoulliSource {
    pub fn new(p: f64, seed: u64, stream: u64) -> Self {
        debug_assert!((0.0..=1.0).contains(&p));
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, p }
    }
}

impl BatchSource for BernoulliSource {
    fn next_batch(&mut self, requested: u64) -> (u64, u64) {
        let mut ones = 0u64;
        for _ in 0..requested {
            // 53-bit uniform in [0, 1).
            let u = ((self.rng.next_u64() >> 11) as f64) * (1.0 / 9007199254740992.0);
            ones += (u < self.p) as u64;
        }
        (requested, ones)
    }
}

/// Replays batches recorded as `(size, ones)` pairs; the recorded
/// granularity overrides the engine's requested batch sizes.
#[derive(Clone, Debug)]
pub struct RecordedSource {
    batches: Vec<(u64, u64)>,
    next: usize,
}

impl RecordedSource {
    /// Validates `ones <= size` and `size > 0` for every batch.
    pub fn new(batches: Vec<(u64, u64)>) -> Result<Self, EngineError> {
        for &(size, ones) in &batches {
            if size == 0 || ones > size {
                return Err(EngineError::InvalidBatch { initial: size, growth: ones as f64 });
            }
        }
        Ok(Self { batches, next: 0 })
    }

    pub fn remaining(&self) -> usize {
        self.batches.len() - self.next
    }
}

impl BatchSource for RecordedSource {
    fn next_batch(&mut self, _requested: u64) -> (u64, u64) {
        match self.batches.get(self.next) {
            Some(&b) => {
                self.next += 1;
                b
            }
            None => (0, 0),
        }
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Outcome {
    /// A bucket provably contains the rate (up to the risk budget).
    Decided,
    /// The sample cap was reached (or the source ran dry) first; the
    /// reported bucket merely contains the point estimate.
    Truncated,
    /// Latched threshold calls contradicted each other (probability at most
    /// `eps`); the reported bucket contains the point estimate.
    ConflictFallback,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecisionReport {
    pub method: Method,
    pub eps: f64,
    pub outcome: Outcome,
    pub bucket_index: usize,
    pub bucket: Bucket,
    pub rating: RatingCode,
    pub samples: u64,
    pub exceedances: u64,
    pub estimate: f64,
}

impl DecisionReport {
    pub fn decided(&self) -> bool {
        self.outcome == Outcome::Decided
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// A prepared decision procedure for one bucket family. Boundary tables are
/// grown lazily and kept across calls, so deciding many streams against the
/// same family reuses all construction work.
#[derive(Clone, Debug)]
pub struct Engine {
    config: EngineConfig,
    set: BucketSet,
    order: Vec<usize>,
    thresholds: Vec<f64>,
    tables: Vec<BoundaryTable>,
}

impl Engine {
    pub fn new(set: BucketSet, config: EngineConfig) -> Result<Self, EngineError> {
        let eps_ok = match config.method {
            Method::Rl => config.eps > 0.0 && config.eps < 1.0,
            Method::Simctest => config.eps > 0.0 && config.eps <= 0.5,
        };
        if !eps_ok || !config.eps.is_finite() {
            return Err(EngineError::InvalidRisk { eps: config.eps });
        }
        BatchSchedule::new(config.batch.initial, config.batch.growth)?;
        if config.n_cap == 0 {
            return Err(EngineError::InvalidCap);
        }
        let thresholds = set.boundary_points();
        let tables = match config.method {
            Method::Rl => Vec::new(),
            Method::Simctest => {
                let rho = config.eps / 2.0;
                let mut tables = Vec::with_capacity(thresholds.len());
                for &t in &thresholds {
                    let spending = Spending::rational(rho, config.spending_k)?;
                    tables.push(BoundaryTable::build(t, spending, 1)?);
                }
                tables
            }
        };
        Ok(Self {
            order: set.decision_order(),
            config,
            set,
            thresholds,
            tables,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn bucket_set(&self) -> &BucketSet {
        &self.set
    }

    /// Runs one stream to a decision, truncation, or conflict fallback.
    pub fn decide(&mut self, source: &mut dyn BatchSource) -> Result<DecisionReport, EngineError> {
        let mut n = 0u64;
        let mut s = 0u64;
        // Latched interval: the rate is known to lie in (alpha_lo, alpha_hi].
        let mut alpha_lo = 0.0f64;
        let mut alpha_hi = 1.0f64;
        let mut pending: Vec<usize> = (0..self.tables.len()).collect();

        loop {
            if n >= self.config.n_cap {
                return Ok(self.fallback_report(Outcome::Truncated, n, s));
            }
            let target = self.config.batch.next_end(n).min(self.config.n_cap);
            let (got, ones) = source.next_batch(target - n);
            if got == 0 {
                return Ok(self.fallback_report(Outcome::Truncated, n, s));
            }
            n += got;
            s += ones;

            match self.config.method {
                Method::Rl => {
                    for &bi in &self.order {
                        if rl::contains(n, s, self.config.eps, &self.set.buckets()[bi]) {
                            return Ok(self.report(Outcome::Decided, bi, n, s));
                        }
                    }
                }
                Method::Simctest => {
                    let mut conflict = false;
                    let mut i = 0;
                    while i < pending.len() {
                        let ti = pending[i];
                        self.tables[ti].extend_to(n)?;
                        match self.tables[ti].call(n, s) {
                            ThresholdCall::Pending => i += 1,
                            ThresholdCall::Above => {
                                let t = self.thresholds[ti];
                                conflict |= t >= alpha_hi;
                                alpha_lo = alpha_lo.max(t);
                                pending.swap_remove(i);
                            }
                            ThresholdCall::AtMost => {
                                let t = self.thresholds[ti];
                                conflict |= t <= alpha_lo;
                                alpha_hi = alpha_hi.min(t);
                                pending.swap_remove(i);
                            }
                        }
                    }
                    if conflict {
                        return Ok(self.fallback_report(Outcome::ConflictFallback, n, s));
                    }
                    // With no lower call yet the rate may be exactly 0, so
                    // the known interval is closed there; a candidate
                    // bucket must then contain 0 to cover it.
                    let known = Bucket {
                        lo: alpha_lo,
                        hi: alpha_hi,
                        lo_closed: alpha_lo == 0.0,
                        hi_closed: true,
                    };
                    for &bi in &self.order {
                        if self.set.buckets()[bi].covers(&known) {
                            return Ok(self.report(Outcome::Decided, bi, n, s));
                        }
                    }
                }
            }
        }
    }

    /// Test-only injection of prepared tables (e.g. imported ones), to
    /// exercise paths honest construction cannot reach.
    #[cfg(test)]
    fn with_tables(set: BucketSet, config: EngineConfig, tables: Vec<BoundaryTable>) -> Self {
        Self {
            order: set.decision_order(),
            thresholds: tables.iter().map(|t| t.threshold()).collect(),
            config,
            set,
            tables,
        }
    }

    fn report(&self, outcome: Outcome, bucket_index: usize, n: u64, s: u64) -> DecisionReport {
        let bucket = self.set.buckets()[bucket_index];
        let rating = star_rating(&self.set, &bucket, &CLASSICAL_THRESHOLDS)
            .expect("decided bucket belongs to the set");
        DecisionReport {
            method: self.config.method,
            eps: self.config.eps,
            outcome,
            bucket_index,
            bucket,
            rating,
            samples: n,
            exceedances: s,
            estimate: if n > 0 { s as f64 / n as f64 } else { f64::NAN },
        }
    }

    /// Bucket containing the point estimate, in decision priority order;
    /// used when no bucket was proven (`Truncated`, `ConflictFallback`).
    fn fallback_report(&self, outcome: Outcome, n: u64, s: u64) -> DecisionReport {
        let estimate = if n > 0 { s as f64 / n as f64 } else { 0.0 };
        let bi = self
            .order
            .iter()
            .copied()
            .find(|&i| self.set.buckets()[i].contains(estimate))
            .expect("bucket sets cover [0, 1]");
        self.report(outcome, bi, n, s)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
