//! Sequential stopping boundaries for one threshold comparison.
//!
//! For a threshold `t`, Bernoulli(p) samples accumulate into a count `S_n`,
//! and the question is whether `p <= t` or `p > t`. A boundary table holds,
//! for every `n`, a pair `(L_n, U_n)`: reaching `S_n <= L_n` stops with the
//! call `p <= t`, reaching `S_n >= U_n` stops with `p > t`, anything between
//! keeps sampling. In the style of sequential implementation testing
//! (simctest), the boundaries are computed under the least favorable rate
//! `p = t` by spending an error budget `eps_n` separately on each tail:
//! `U_n` is the smallest value whose cumulative stopping mass stays within
//! `eps_n`, `L_n` the largest. Monotonicity of the hitting probabilities in
//! `p` then caps the probability of a wrong call at `rho = lim eps_n` for
//! every `p` on either side of `t`.
//!
//! Tables are built incrementally and stored run-length encoded, so lookups
//! deep into a table (n in the hundreds of millions) stay cheap in memory.
//! The construction keeps the exact sub-probability vector of alive states
//! under `p = t`; the accumulated spent mass on each side equals the exact
//! probability of having stopped on that side, which the tests exploit.

use alloc::vec::Vec;
use core::fmt;

use crate::math::CompensatedSum;

/// Largest per-side risk accepted by the builder. Keeping each tail at or
/// below 1/4 leaves at least half the mass alive forever, so the
/// continuation window can never empty.
pub const MAX_RHO: f64 = 0.25;

// ---------------------------------------------------------------------------
// Spending schedules
// ---------------------------------------------------------------------------

/// Per-side error budget as a function of `n`, nondecreasing with limit
/// `rho`.
#[derive(Clone, Debug, PartialEq)]
pub enum Spending {
    /// `eps_n = rho * n / (n + k)`; larger `k` defers the budget to larger
    /// `n`, tightening early boundaries.
    Rational { rho: f64, k: f64 },
    /// Explicit budgets for `n = 1, 2, ...`; constant at the last value
    /// beyond the end of the table.
    Table(Vec<f64>),
}

impl Spending {
    pub fn rational(rho: f64, k: f64) -> Result<Self, SimctestError> {
        if !(rho > 0.0 && rho <= MAX_RHO) || !rho.is_finite() {
            return Err(SimctestError::InvalidRisk { rho });
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(SimctestError::InvalidSpending);
        }
        Ok(Self::Rational { rho, k })
    }

    /// The default schedule: `k = 1000`.
    pub fn default_for(rho: f64) -> Result<Self, SimctestError> {
        Self::rational(rho, 1000.0)
    }

    pub fn table(values: Vec<f64>) -> Result<Self, SimctestError> {
        if values.is_empty() {
            return Err(SimctestError::InvalidSpending);
        }
        let first = values[0];
        let last = *values.last().unwrap();
        if !(first > 0.0) || !last.is_finite() {
            return Err(SimctestError::InvalidSpending);
        }
        if !(last <= MAX_RHO) {
            return Err(SimctestError::InvalidRisk { rho: last });
        }
        if values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(SimctestError::InvalidSpending);
        }
        Ok(Self::Table(values))
    }

    /// The limiting per-side risk.
    pub fn rho(&self) -> f64 {
        match self {
            Self::Rational { rho, .. } => *rho,
            Self::Table(v) => *v.last().unwrap(),
        }
    }

    /// Budget available at step `n >= 1`.
    pub fn eps(&self, n: u64) -> f64 {
        match self {
            Self::Rational { rho, k } => rho * n as f64 / (n as f64 + k),
            Self::Table(v) => {
                let i = (n as usize).min(v.len());
                v[i - 1]
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum SimctestError {
    /// Threshold outside `(0, 1)`.
    InvalidThreshold { t: f64 },
    /// Per-side risk outside `(0, 1/4]`.
    InvalidRisk { rho: f64 },
    /// Spending table empty, non-positive, decreasing, or `k <= 0`.
    InvalidSpending,
    /// Every state was truncated at step `n`; cannot happen when the
    /// per-side risk is at most 1/4.
    WindowCollapse { n: u64 },
    /// The table was imported from rows and carries no construction state.
    NotExtendable,
    /// Imported rows violate a structural invariant at row `n`.
    MalformedRows { n: u64 },
    /// Threshold calls violate the monotone ordering: some threshold was
    /// called `p > t` while a smaller one was called `p <= t'`.
    InconsistentDecisions,
}

impl fmt::Display for SimctestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidThreshold { t } => write!(f, "threshold {t} outside (0, 1)"),
            Self::InvalidRisk { rho } => {
                write!(f, "per-side risk {rho} outside (0, {MAX_RHO}]")
            }
            Self::InvalidSpending => write!(f, "spending schedule must be positive and nondecreasing"),
            Self::WindowCollapse { n } => {
                write!(f, "continuation window emptied at n = {n}")
            }
            Self::NotExtendable => write!(f, "imported boundary table cannot be extended"),
            Self::MalformedRows { n } => write!(f, "imported boundary rows invalid at n = {n}"),
            Self::InconsistentDecisions => {
                write!(f, "threshold calls violate the monotone ordering")
            }
        }
    }
}

impl core::error::Error for SimctestError {}

// ---------------------------------------------------------------------------
// Construction state
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Builder {
    t: f64,
    /// `v[i]` is the probability, under `p = t`, of being at state
    /// `base + i` after `n` samples without having stopped.
    v: Vec<f64>,
    base: i64,
    spent_lower: CompensatedSum,
    spent_upper: CompensatedSum,
    n: u64,
    lower: i64,
    upper: i64,
}

impl Builder {
    /// The first row is pinned: `S_1` is 0 or 1 and both stay alive, so
    /// `(L_1, U_1) = (-1, 2)`. Spending starts at `n = 2`.
    fn new(t: f64) -> Self {
        Self {
            t,
            v: alloc::vec![1.0 - t, t],
            base: 0,
            spent_lower: CompensatedSum::new(),
            spent_upper: CompensatedSum::new(),
            n: 1,
            lower: -1,
            upper: 2,
        }
    }

    fn step(&mut self, eps: f64) -> Result<(), SimctestError> {
        let t = self.t;
        let len = self.v.len();
        // One more draw moves each alive state up with probability t.
        let mut w = Vec::with_capacity(len + 1);
        w.push(self.v[0] * (1.0 - t));
        for i in 1..len {
            w.push(self.v[i] * (1.0 - t) + self.v[i - 1] * t);
        }
        w.push(self.v[len - 1] * t);
        self.n += 1;

        // Upper boundary: the smallest u whose tail mass fits the budget.
        let top = self.base + len as i64; // state of w's last entry
        let mut u = top + 1;
        let mut tail = 0.0f64;
        while u > self.base {
            let cand = tail + w[(u - 1 - self.base) as usize];
            if self.spent_upper.value() + cand <= eps {
                tail = cand;
                u -= 1;
            } else {
                break;
            }
        }
        if u == self.base {
            return Err(SimctestError::WindowCollapse { n: self.n });
        }
        self.spent_upper.add(tail);
        w.truncate((u - self.base) as usize);

        // Lower boundary: the largest l whose prefix mass fits the budget.
        let mut l = self.base - 1;
        let mut prefix = 0.0f64;
        while l + 1 <= u - 1 {
            let cand = prefix + w[(l + 1 - self.base) as usize];
            if self.spent_lower.value() + cand <= eps {
                prefix = cand;
                l += 1;
            } else {
                break;
            }
        }
        if l >= u - 1 {
            return Err(SimctestError::WindowCollapse { n: self.n });
        }
        self.spent_lower.add(prefix);
        let drop = (l + 1 - self.base) as usize;
        if drop > 0 {
            w.drain(..drop);
            self.base = l + 1;
        }
        self.v = w;
        self.lower = l;
        self.upper = u;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// BoundaryTable
// ---------------------------------------------------------------------------

/// One run of constant boundaries: rows `from ..` until the next run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryRun {
    pub from: u64,
    pub lower: i64,
    pub upper: i64,
}

/// One expanded row, as produced by the streaming constructor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryRow {
    pub n: u64,
    pub lower: i64,
    pub upper: i64,
    pub eps: f64,
    pub spent_lower: f64,
    pub spent_upper: f64,
}

/// Status of the threshold comparison after observing `S_n = s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdCall {
    /// Stopped low: `p <= t`.
    AtMost,
    /// Stopped high: `p > t`.
    Above,
    /// Still between the boundaries (or past the end of the table).
    Pending,
}

/// Stopping boundaries for one threshold, valid for `n = 1..=len`.
#[derive(Clone, Debug)]
pub struct BoundaryTable {
    threshold: f64,
    spending: Option<Spending>,
    runs: Vec<BoundaryRun>,
    len: u64,
    builder: Option<Builder>,
}

impl BoundaryTable {
    /// Builds boundaries for `threshold` out to `n_max` rows.
    pub fn build(
        threshold: f64,
        spending: Spending,
        n_max: u64,
    ) -> Result<Self, SimctestError> {
        if !(threshold > 0.0 && threshold < 1.0) || !threshold.is_finite() {
            return Err(SimctestError::InvalidThreshold { t: threshold });
        }
        // Re-validate regardless of how the schedule was produced.
        match &spending {
            Spending::Rational { rho, k } => {
                Spending::rational(*rho, *k)?;
            }
            Spending::Table(v) => {
                Spending::table(v.clone())?;
            }
        }
        let mut table = Self {
            threshold,
            spending: Some(spending),
            runs: alloc::vec![BoundaryRun { from: 1, lower: -1, upper: 2 }],
            len: 1,
            builder: Some(Builder::new(threshold)),
        };
        table.extend_to(n_max)?;
        Ok(table)
    }

    /// Builds with the default rational schedule (`k = 1000`).
    pub fn build_default(threshold: f64, rho: f64, n_max: u64) -> Result<Self, SimctestError> {
        Self::build(threshold, Spending::default_for(rho)?, n_max)
    }

    /// Grows the table so rows `1..=n_max` are available. No-op if already
    /// long enough; fails on imported tables.
    pub fn extend_to(&mut self, n_max: u64) -> Result<(), SimctestError> {
        if n_max <= self.len {
            return Ok(());
        }
        let builder = self.builder.as_mut().ok_or(SimctestError::NotExtendable)?;
        let spending = self.spending.as_ref().expect("built tables keep their schedule");
        for n in (self.len + 1)..=n_max {
            builder.step(spending.eps(n))?;
            let last = *self.runs.last().unwrap();
            if (builder.lower, builder.upper) != (last.lower, last.upper) {
                self.runs.push(BoundaryRun {
                    from: n,
                    lower: builder.lower,
                    upper: builder.upper,
                });
            }
        }
        self.len = n_max;
        Ok(())
    }

    /// Streams every row of a fresh construction to `f` without storing the
    /// table; used for bulk export.
    pub fn for_each_row(
        threshold: f64,
        spending: Spending,
        n_max: u64,
        mut f: impl FnMut(&BoundaryRow),
    ) -> Result<(), SimctestError> {
        if !(threshold > 0.0 && threshold < 1.0) || !threshold.is_finite() {
            return Err(SimctestError::InvalidThreshold { t: threshold });
        }
        match &spending {
            Spending::Rational { rho, k } => {
                Spending::rational(*rho, *k)?;
            }
            Spending::Table(v) => {
                Spending::table(v.clone())?;
            }
        }
        let mut b = Builder::new(threshold);
        f(&BoundaryRow {
            n: 1,
            lower: -1,
            upper: 2,
            eps: spending.eps(1),
            spent_lower: 0.0,
            spent_upper: 0.0,
        });
        for n in 2..=n_max {
            b.step(spending.eps(n))?;
            f(&BoundaryRow {
                n,
                lower: b.lower,
                upper: b.upper,
                eps: spending.eps(n),
                spent_lower: b.spent_lower.value(),
                spent_upper: b.spent_upper.value(),
            });
        }
        Ok(())
    }

    /// Reconstructs a lookup-only table from `(lower, upper)` rows for
    /// `n = 1, 2, ...`, validating the structural invariants.
    pub fn from_rows(
        threshold: f64,
        rows: impl IntoIterator<Item = (i64, i64)>,
    ) -> Result<Self, SimctestError> {
        if !(threshold > 0.0 && threshold < 1.0) || !threshold.is_finite() {
            return Err(SimctestError::InvalidThreshold { t: threshold });
        }
        let mut runs: Vec<BoundaryRun> = Vec::new();
        let mut n = 0u64;
        let mut prev: Option<(i64, i64)> = None;
        for (lower, upper) in rows {
            n += 1;
            let ok = lower >= -1
                && upper <= n as i64 + 1
                && lower + 2 <= upper
                && prev.is_none_or(|(pl, pu)| lower >= pl && upper <= pu + 1);
            if !ok {
                return Err(SimctestError::MalformedRows { n });
            }
            if prev != Some((lower, upper)) {
                runs.push(BoundaryRun { from: n, lower, upper });
            }
            prev = Some((lower, upper));
        }
        if n == 0 {
            return Err(SimctestError::MalformedRows { n: 0 });
        }
        Ok(Self {
            threshold,
            spending: None,
            runs,
            len: n,
            builder: None,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn spending(&self) -> Option<&Spending> {
        self.spending.as_ref()
    }

    /// Number of valid rows; `bounds` answers for `n` in `1..=len`.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The run-length encoding of the rows.
    pub fn runs(&self) -> &[BoundaryRun] {
        &self.runs
    }

    /// Exact stopping probabilities so far under `p = threshold`:
    /// `(lower side, upper side)`. `None` for imported tables.
    pub fn spent(&self) -> Option<(f64, f64)> {
        self.builder
            .as_ref()
            .map(|b| (b.spent_lower.value(), b.spent_upper.value()))
    }

    /// `(L_n, U_n)`, or `None` when `n` is 0 or past the end of the table.
    pub fn bounds(&self, n: u64) -> Option<(i64, i64)> {
        if n == 0 || n > self.len {
            return None;
        }
        let idx = self.runs.partition_point(|r| r.from <= n) - 1;
        let run = self.runs[idx];
        Some((run.lower, run.upper))
    }

    /// The call made (or not) by state `s` at time `n`.
    pub fn call(&self, n: u64, s: u64) -> ThresholdCall {
        match self.bounds(n) {
            Some((l, u)) => {
                let s = s as i64;
                if s <= l {
                    ThresholdCall::AtMost
                } else if s >= u {
                    ThresholdCall::Above
                } else {
                    ThresholdCall::Pending
                }
            }
            None => ThresholdCall::Pending,
        }
    }
}

// ---------------------------------------------------------------------------
// Cross-threshold structure
// ---------------------------------------------------------------------------

/// Whether both boundaries are pointwise nondecreasing in the threshold.
///
/// `tables` must be sorted by threshold. Checks every adjacent pair for
/// all `n < n_limit`: the smaller threshold's `L_n` and `U_n` must not
/// exceed the larger one's. This ordering is what makes simultaneous
/// calls intersect into a nonempty rate interval; rows missing below
/// `n_limit` count as a failure since the property cannot be verified.
pub fn check_monotone(tables: &[BoundaryTable], n_limit: u64) -> bool {
    for pair in tables.windows(2) {
        debug_assert!(pair[0].threshold() <= pair[1].threshold());
        for n in 1..n_limit {
            let (Some((la, ua)), Some((lb, ub))) = (pair[0].bounds(n), pair[1].bounds(n)) else {
                return false;
            };
            if la > lb || ua > ub {
                return false;
            }
        }
    }
    true
}

/// Intersects per-threshold calls into the implied rate interval.
///
/// A low stop at threshold `t` pins the rate to `[0, t]` (closed at `t`,
/// matching buckets whose upper endpoint is closed); a high stop pins it
/// to `(t, 1]`. The intersection over all calls is `(lo, hi]`, closed at
/// zero when no high stop has occurred. Pending thresholds contribute
/// the full `[0, 1]`.
///
/// Calls that cross (a high stop at or above a low stop) have an empty
/// intersection, which monotone tables never produce on one data stream.
pub fn intersect_calls(
    calls: &[(f64, ThresholdCall)],
) -> Result<(f64, f64), SimctestError> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for &(t, call) in calls {
        match call {
            ThresholdCall::Above => lo = lo.max(t),
            ThresholdCall::AtMost => hi = hi.min(t),
            ThresholdCall::Pending => {}
        }
    }
    if lo >= hi {
        return Err(SimctestError::InconsistentDecisions);
    }
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Definitional reconstruction on the full state vector `0..=n` with
    /// plain summation: no windowing, no run-length encoding, boundaries
    /// read off directly as the min/max satisfying the budget constraint.
    fn oracle(
        t: f64,
        eps_at: impl Fn(u64) -> f64,
        n_max: u64,
    ) -> (Vec<(i64, i64)>, f64, f64) {
        let mut v = alloc::vec![0.0f64; n_max as usize + 1];
        v[0] = 1.0 - t;
        v[1] = t;
        let mut rows = alloc::vec![(-1i64, 2i64)];
        let (mut sl, mut su) = (0.0f64, 0.0f64);
        for n in 2..=n_max {
            for i in (1..=n as usize).rev() {
                v[i] = v[i] * (1.0 - t) + v[i - 1] * t;
            }
            v[0] *= 1.0 - t;
            let eps = eps_at(n);

            let mut tail = 0.0;
            let mut u = n as i64 + 1;
            while u - 1 >= 0 {
                let cand = tail + v[(u - 1) as usize];
                if su + cand <= eps {
                    tail = cand;
                    u -= 1;
                } else {
                    break;
                }
            }
            su += tail;
            for s in u..=n as i64 {
                v[s as usize] = 0.0;
            }

            let mut prefix = 0.0;
            let mut l = -1i64;
            while l + 1 <= n as i64 {
                let cand = prefix + v[(l + 1) as usize];
                if sl + cand <= eps {
                    prefix = cand;
                    l += 1;
                } else {
                    break;
                }
            }
            sl += prefix;
            for s in 0..=l {
                v[s as usize] = 0.0;
            }
            rows.push((l, u));
        }
        (rows, sl, su)
    }

    #[test]
    fn first_row_is_pinned() {
        let t = BoundaryTable::build_default(0.05, 0.001, 1).unwrap();
        assert_eq!(t.bounds(1), Some((-1, 2)));
        assert_eq!(t.bounds(0), None);
        assert_eq!(t.bounds(2), None);
        assert_eq!(t.spent(), Some((0.0, 0.0)));
    }

    #[test]
    fn matches_definitional_oracle_row_by_row() {
        for (t, rho, k, n_max) in [
            (0.5, 0.25, 1.0, 300u64),
            (0.05, 0.001, 10.0, 300),
            (0.01, 0.0005, 1000.0, 300),
            (0.3, 0.1, 100.0, 200),
        ] {
            let sp = Spending::rational(rho, k).unwrap();
            let table = BoundaryTable::build(t, sp.clone(), n_max).unwrap();
            let (rows, sl, su) = oracle(t, |n| sp.eps(n), n_max);
            for n in 1..=n_max {
                assert_eq!(
                    table.bounds(n),
                    Some(rows[n as usize - 1]),
                    "t={t} rho={rho} k={k} n={n}"
                );
            }
            let (got_sl, got_su) = table.spent().unwrap();
            assert!((got_sl - sl).abs() <= 1e-12, "{got_sl} vs {sl}");
            assert!((got_su - su).abs() <= 1e-12, "{got_su} vs {su}");
        }
    }

    #[test]
    fn structural_invariants_hold() {
        for (t, rho, k) in [(0.05, 0.25, 1.0), (0.001, 0.0005, 1000.0), (0.9, 0.1, 50.0)] {
            let sp = Spending::rational(rho, k).unwrap();
            let table = BoundaryTable::build(t, sp, 4000).unwrap();
            let mut prev: Option<(i64, i64)> = None;
            for n in 1..=4000 {
                let (l, u) = table.bounds(n).unwrap();
                assert!(l >= -1 && u <= n as i64 + 1);
                assert!(l + 2 <= u, "window empty at n={n}");
                if let Some((pl, pu)) = prev {
                    assert!(l >= pl, "lower decreased at n={n}");
                    assert!(u <= pu + 1, "upper jumped at n={n}");
                }
                prev = Some((l, u));
            }
            let (sl, su) = table.spent().unwrap();
            assert!(sl <= rho && su <= rho);
            assert!(sl + su <= 2.0 * rho);
        }
    }

    #[test]
    fn boundaries_track_the_threshold_mean() {
        let table = BoundaryTable::build_default(0.1, 0.01, 5000).unwrap();
        let (l, u) = table.bounds(5000).unwrap();
        let mean = 500.0;
        assert!((l as f64) > 0.6 * mean, "lower {l} too slack");
        assert!((u as f64) < 1.5 * mean, "upper {u} too slack");
        assert!((l as f64) < mean && (u as f64) > mean);
    }

    #[test]
    fn extension_reproduces_a_fresh_build_exactly() {
        let sp = Spending::rational(0.01, 100.0).unwrap();
        let mut grown = BoundaryTable::build(0.07, sp.clone(), 500).unwrap();
        grown.extend_to(3000).unwrap();
        let fresh = BoundaryTable::build(0.07, sp, 3000).unwrap();
        assert_eq!(grown.runs(), fresh.runs());
        assert_eq!(grown.len(), fresh.len());
        assert_eq!(grown.spent(), fresh.spent());
    }

    #[test]
    fn spending_schedules_validate_and_saturate() {
        assert!(Spending::rational(0.0, 1000.0).is_err());
        assert!(Spending::rational(0.3, 1000.0).is_err());
        assert!(Spending::rational(0.1, 0.0).is_err());
        assert!(Spending::table(alloc::vec![]).is_err());
        assert!(Spending::table(alloc::vec![0.0, 0.1]).is_err());
        assert!(Spending::table(alloc::vec![0.2, 0.1]).is_err());
        assert!(Spending::table(alloc::vec![0.1, 0.3]).is_err());

        let sp = Spending::rational(0.2, 50.0).unwrap();
        assert!(sp.eps(1) < sp.eps(10) && sp.eps(10) < sp.eps(1_000_000));
        assert!(sp.eps(100_000_000) < 0.2 && (0.2 - sp.eps(100_000_000)) < 1e-6);
        assert_eq!(sp.rho(), 0.2);

        let tb = Spending::table(alloc::vec![0.01, 0.02, 0.05]).unwrap();
        assert_eq!(tb.eps(1), 0.01);
        assert_eq!(tb.eps(3), 0.05);
        assert_eq!(tb.eps(1000), 0.05);
        assert_eq!(tb.rho(), 0.05);

        // A custom table drives construction just like the rational form.
        let custom = BoundaryTable::build(0.2, tb, 50).unwrap();
        assert!(custom.bounds(50).is_some());
    }

    #[test]
    fn rows_round_trip_through_import() {
        let built = BoundaryTable::build_default(0.05, 0.01, 800).unwrap();
        let rows: Vec<(i64, i64)> = (1..=800).map(|n| built.bounds(n).unwrap()).collect();
        let imported = BoundaryTable::from_rows(0.05, rows).unwrap();
        for n in 1..=800 {
            assert_eq!(imported.bounds(n), built.bounds(n));
        }
        assert_eq!(imported.spent(), None);
        assert!(matches!(
            imported.clone().extend_to(900),
            Err(SimctestError::NotExtendable)
        ));

        // Violations are rejected with the offending row index.
        assert!(matches!(
            BoundaryTable::from_rows(0.05, alloc::vec![(-1, 2), (0, 2), (-1, 3)]),
            Err(SimctestError::MalformedRows { n: 3 })
        ));
        assert!(matches!(
            BoundaryTable::from_rows(0.05, alloc::vec![(-1, 2), (-1, 4)]),
            Err(SimctestError::MalformedRows { n: 2 })
        ));
        assert!(matches!(
            BoundaryTable::from_rows(0.05, alloc::vec![(1, 2)]),
            Err(SimctestError::MalformedRows { n: 1 })
        ));
    }

    #[test]
    fn spent_mass_equals_simulated_hitting_probability() {
        // The spent upper mass is, by construction, the exact probability
        // under p = t of stopping high by the end of the table.
        let (t, rho) = (0.05, 0.05);
        let table = BoundaryTable::build(t, Spending::rational(rho, 10.0).unwrap(), 1500)
            .unwrap();
        let (_, su) = table.spent().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let trials = 4000u64;
        let mut hits_high = 0u64;
        for _ in 0..trials {
            let mut s = 0u64;
            for n in 1..=1500u64 {
                let x = ((rng.next_u64() >> 11) as f64) * (1.0 / 9007199254740992.0);
                s += (x < t) as u64;
                match table.call(n, s) {
                    ThresholdCall::Above => {
                        hits_high += 1;
                        break;
                    }
                    ThresholdCall::AtMost => break,
                    ThresholdCall::Pending => {}
                }
            }
        }
        let freq = hits_high as f64 / trials as f64;
        let se = math::sqrt(su * (1.0 - su) / trials as f64);
        assert!(
            (freq - su).abs() <= 4.0 * se + 1e-3,
            "freq {freq} vs exact {su}"
        );
    }

    #[test]
    fn deeper_tables_stay_compact() {
        // Run-length encoding keeps a million rows in a few thousand runs.
        let table = BoundaryTable::build_default(0.01, 0.0005, 1_000_000).unwrap();
        assert_eq!(table.len(), 1_000_000);
        assert!(
            table.runs().len() < 50_000,
            "runs = {}",
            table.runs().len()
        );
        let (l, u) = table.bounds(1_000_000).unwrap();
        // Mean is 10^4; the window brackets it at a few hundred wide.
        assert!(l > 9_000 && u < 11_000);
    }

    #[test]
    fn adjacent_thresholds_are_monotone() {
        let n = 3_000u64;
        let tables: alloc::vec::Vec<BoundaryTable> = [0.001, 0.01, 0.05]
            .iter()
            .map(|&t| BoundaryTable::build_default(t, 0.0005, n).unwrap())
            .collect();
        assert!(check_monotone(&tables, n + 1));
        assert!(check_monotone(&tables[..1], n + 1));
        // Rows missing below the requested limit cannot be verified.
        assert!(!check_monotone(&tables, n + 2));
    }

    #[test]
    fn perturbed_import_breaks_monotonicity() {
        let a = BoundaryTable::build_default(0.01, 0.01, 40).unwrap();
        let rows_a: alloc::vec::Vec<(i64, i64)> =
            (1..=40).map(|n| a.bounds(n).unwrap()).collect();
        // Depress the larger threshold's upper boundary below the
        // smaller's; structurally valid rows, impossible from honest
        // construction.
        let rows_b: alloc::vec::Vec<(i64, i64)> = rows_a
            .iter()
            .map(|&(l, u)| if u >= l + 3 { (l, u - 1) } else { (l, u) })
            .collect();
        assert_ne!(rows_a, rows_b);
        let b = BoundaryTable::from_rows(0.05, rows_b).unwrap();
        assert!(!check_monotone(&[a, b], 41));
    }

    #[test]
    fn call_intersection_narrows_the_rate_interval() {
        use ThresholdCall::{AtMost, Above, Pending};
        // Nothing decided: the full unit interval.
        assert_eq!(
            intersect_calls(&[(0.001, Pending), (0.05, Pending)]).unwrap(),
            (0.0, 1.0)
        );
        // Above both small thresholds: lower edge is the largest one.
        assert_eq!(
            intersect_calls(&[(0.0005, Above), (0.001, Above), (0.05, Pending)])
                .unwrap(),
            (0.001, 1.0)
        );
        // At most everything: pinned under the smallest threshold.
        assert_eq!(
            intersect_calls(&[(0.0005, AtMost), (0.001, AtMost), (0.05, AtMost)])
                .unwrap(),
            (0.0, 0.0005)
        );
        // Sandwiched between two thresholds.
        assert_eq!(
            intersect_calls(&[(0.01, Above), (0.05, AtMost)]).unwrap(),
            (0.01, 0.05)
        );
        // Crossed calls cannot come from one monotone family.
        assert!(matches!(
            intersect_calls(&[(0.05, Above), (0.01, AtMost)]),
            Err(SimctestError::InconsistentDecisions)
        ));
        assert!(matches!(
            intersect_calls(&[(0.01, Above), (0.01, AtMost)]),
            Err(SimctestError::InconsistentDecisions)
        ));
    }
}
