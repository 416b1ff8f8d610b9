//! Exact effort and decision-probability curves.
//!
//! A decision policy assigns to every time `n` the set of success counts
//! `s` at which a run stops and which bucket it reports. Both stopping
//! rules are memoryless in `(n, s)`, so the full run distribution under a
//! Bernoulli rate `p` is computed by one forward pass over the alive
//! probability mass: advance the mass by one draw, drain the entries that
//! the policy decides at `n`, repeat. The pass is exact up to float
//! rounding; no simulation is involved.
//!
//! The policy evaluates after every draw. A batched runner that looks at
//! the data less often stops later and errs less often, so the curves
//! produced here upper-bound the error and lower-bound nothing: they are
//! the per-draw reference the batched runner is compared against.
//!
//! The alive mass is held as a list of disjoint islands of consecutive
//! `s` values. Decided regions split the alive range into separated
//! bands (counts between two buckets stay undecided longest), and a
//! single flat vector spanning them would cost `O(n)` per step; islands
//! keep the work proportional to the number of genuinely alive states.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::buckets::{Bucket, BucketSet};
use crate::engine::EngineError;
use crate::math::CompensatedSum;
use crate::rl;
use crate::simctest::{BoundaryTable, Spending};

/// Inclusive range of success counts decided at one time, with the index
/// of the reported bucket in the owning set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecidedSegment {
    pub s_lo: u64,
    pub s_hi: u64,
    pub bucket: usize,
}

/// A memoryless stopping rule: for each `n`, the decided count ranges.
pub trait DecisionPolicy {
    fn bucket_count(&self) -> usize;

    /// Writes the segments decided at exactly time `n` into `out`,
    /// sorted by `s_lo` and pairwise disjoint.
    fn segments_at(&mut self, n: u64, out: &mut Vec<DecidedSegment>) -> Result<(), EngineError>;
}

/// Decided segments depend on `n` alone, yet a policy is asked about the
/// same `n` once per rate when sweeping a curve or integrating; caching
/// computed rows turns every revisit into a copy.
#[derive(Clone, Debug, Default)]
struct SegmentMemo {
    rows: Vec<Option<Box<[DecidedSegment]>>>,
}

impl SegmentMemo {
    fn get(&self, n: u64) -> Option<&[DecidedSegment]> {
        match self.rows.get(n as usize) {
            Some(Some(r)) => Some(r),
            _ => None,
        }
    }

    fn put(&mut self, n: u64, segs: &[DecidedSegment]) {
        let i = n as usize;
        if i >= self.rows.len() {
            self.rows.resize_with(i + 1, || None);
        }
        self.rows[i] = Some(segs.into());
    }
}

/// Confidence-sequence policy: a count decides as soon as the running
/// confidence set fits inside some bucket, ties broken by preferring the
/// bucket with the smaller upper endpoint (then the larger lower one).
#[derive(Clone, Debug)]
pub struct RlPolicy {
    set: BucketSet,
    order: Vec<usize>,
    scanners: Vec<rl::RangeScanner>,
    memo: SegmentMemo,
}

impl RlPolicy {
    pub fn new(set: BucketSet, eps: f64) -> Result<Self, EngineError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(EngineError::InvalidRisk { eps });
        }
        let order = set.decision_order();
        let scanners = set.buckets().iter().map(|&b| rl::RangeScanner::new(b, eps)).collect();
        Ok(Self { set, order, scanners, memo: SegmentMemo::default() })
    }

    pub fn set(&self) -> &BucketSet {
        &self.set
    }
}

impl DecisionPolicy for RlPolicy {
    fn bucket_count(&self) -> usize {
        self.set.buckets().len()
    }

    fn segments_at(&mut self, n: u64, out: &mut Vec<DecidedSegment>) -> Result<(), EngineError> {
        out.clear();
        if let Some(rows) = self.memo.get(n) {
            out.extend_from_slice(rows);
            return Ok(());
        }
        let terms = rl::NTerms::new(n);
        // Claimed ranges, sorted and disjoint; earlier buckets in the
        // preference order keep the counts they claim.
        let mut claimed: Vec<(u64, u64)> = Vec::new();
        for idx in 0..self.order.len() {
            let bi = self.order[idx];
            let Some((a, b)) = self.scanners[bi].contained_s_range(n, terms) else {
                continue;
            };
            let mut cur = a;
            for &(ca, cb) in claimed.iter() {
                if cb < cur {
                    continue;
                }
                if ca > b {
                    break;
                }
                if ca > cur {
                    out.push(DecidedSegment { s_lo: cur, s_hi: ca - 1, bucket: bi });
                }
                cur = cur.max(cb + 1);
                if cur > b {
                    break;
                }
            }
            if cur <= b {
                out.push(DecidedSegment { s_lo: cur, s_hi: b, bucket: bi });
            }
            claimed.push((a, b));
            claimed.sort_unstable();
            merge_touching(&mut claimed);
        }
        out.sort_unstable_by_key(|s| s.s_lo);
        self.memo.put(n, out);
        Ok(())
    }
}

/// Stopping-boundary policy: one boundary table per distinct bucket
/// endpoint; a count decides once the table calls pin the rate interval
/// inside some bucket. Unlike the sequential runner this rule re-reads
/// every table at every `n` instead of latching calls, which keeps it
/// memoryless in `(n, s)`; a latched run stops no later and the two
/// distributions agree except on boundary-recrossing paths.
#[derive(Clone, Debug)]
pub struct TablePolicy {
    set: BucketSet,
    order: Vec<usize>,
    thresholds: Vec<f64>,
    tables: Vec<BoundaryTable>,
    cuts: Vec<u64>,
    memo: SegmentMemo,
}

impl TablePolicy {
    /// Per-table risk is `eps / 2`: a wrong report requires a wrong call
    /// on at least one side, the wrong calls of nested thresholds imply
    /// one another, and each side's calls are wrong with probability at
    /// most `eps / 2` simultaneously over all `n`.
    pub fn new(set: BucketSet, eps: f64, spending_k: f64) -> Result<Self, EngineError> {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(EngineError::InvalidRisk { eps });
        }
        let rho = eps / 2.0;
        let order = set.decision_order();
        let thresholds: Vec<f64> =
            set.boundary_points().into_iter().filter(|&t| t > 0.0 && t < 1.0).collect();
        let mut tables = Vec::with_capacity(thresholds.len());
        for &t in &thresholds {
            tables.push(BoundaryTable::build(t, Spending::rational(rho, spending_k)?, 1)?);
        }
        Ok(Self { set, order, thresholds, tables, cuts: Vec::new(), memo: SegmentMemo::default() })
    }

    pub fn set(&self) -> &BucketSet {
        &self.set
    }
}

impl DecisionPolicy for TablePolicy {
    fn bucket_count(&self) -> usize {
        self.set.buckets().len()
    }

    fn segments_at(&mut self, n: u64, out: &mut Vec<DecidedSegment>) -> Result<(), EngineError> {
        out.clear();
        if let Some(rows) = self.memo.get(n) {
            out.extend_from_slice(rows);
            return Ok(());
        }
        for table in &mut self.tables {
            table.extend_to(n)?;
        }
        // Cut points where some table's call changes; between consecutive
        // cuts every call is constant in s.
        self.cuts.clear();
        self.cuts.push(0);
        self.cuts.push(n + 1);
        for table in &self.tables {
            let (l, u) = table.bounds(n).expect("table extended to n");
            if l >= 0 && (l as u64) < n {
                self.cuts.push(l as u64 + 1);
            }
            if u as u64 <= n {
                self.cuts.push(u as u64);
            }
        }
        self.cuts.sort_unstable();
        self.cuts.dedup();
        for w in self.cuts.windows(2) {
            let (s_lo, s_hi) = (w[0], w[1] - 1);
            let mut alpha_lo = 0.0f64;
            let mut alpha_hi = 1.0f64;
            for (i, table) in self.tables.iter().enumerate() {
                let (l, u) = table.bounds(n).expect("table extended to n");
                if s_lo as i64 >= u {
                    alpha_lo = alpha_lo.max(self.thresholds[i]);
                }
                if s_lo as i64 <= l {
                    alpha_hi = alpha_hi.min(self.thresholds[i]);
                }
            }
            if alpha_lo >= alpha_hi {
                // Calls that cross would need a lower boundary above an
                // upper one for nested thresholds; construction keeps the
                // windows nested, so treat as still running.
                debug_assert!(false, "crossed calls at n={n} s={s_lo}");
                continue;
            }
            // With no high stop yet the rate may be exactly 0, so the
            // known interval is closed there; a candidate bucket must
            // then contain 0 to cover it.
            let known = Bucket {
                lo: alpha_lo,
                hi: alpha_hi,
                lo_closed: alpha_lo == 0.0,
                hi_closed: true,
            };
            if let Some(&bi) = self.order.iter().find(|&&bi| self.set.buckets()[bi].covers(&known))
            {
                out.push(DecidedSegment { s_lo, s_hi, bucket: bi });
            }
        }
        self.memo.put(n, out);
        Ok(())
    }
}

fn merge_touching(ranges: &mut Vec<(u64, u64)>) {
    let mut w = 0;
    for i in 1..ranges.len() {
        if ranges[i].0 <= ranges[w].1.saturating_add(1) {
            ranges[w].1 = ranges[w].1.max(ranges[i].1);
        } else {
            w += 1;
            ranges[w] = ranges[i];
        }
    }
    ranges.truncate(ranges.len().min(w + 1));
}

/// Exact run statistics of a policy at rate `p`, truncated at `horizon`.
#[derive(Clone, Debug)]
pub struct EffortSummary {
    /// Expected draws consumed, counting `horizon` for runs still alive
    /// there (a truncated run has paid for every draw).
    pub expected_samples: f64,
    /// Probability of reporting each bucket, indexed as in the set.
    pub bucket_probs: Vec<f64>,
    /// Probability of reaching `horizon` undecided.
    pub undecided: f64,
    pub horizon: u64,
}

impl EffortSummary {
    /// Total probability of reporting a bucket that does not contain `p`.
    pub fn miss_probability(&self, set: &BucketSet, p: f64) -> f64 {
        let mut miss = 0.0;
        for (i, b) in set.buckets().iter().enumerate() {
            if !b.contains(p) {
                miss += self.bucket_probs[i];
            }
        }
        miss
    }
}

struct Island {
    base: u64,
    v: Vec<f64>,
}

impl Island {
    fn top(&self) -> u64 {
        self.base + self.v.len() as u64 - 1
    }

    fn mass(&self) -> f64 {
        let mut c = CompensatedSum::new();
        for &x in &self.v {
            c.add(x);
        }
        c.value()
    }
}

/// One-draw advance. Entries that underflow to exact zero at the edges
/// are trimmed so an island never outgrows its support.
fn advance(islands: &mut Vec<Island>, p: f64) {
    let q = 1.0 - p;
    let mut next: Vec<Island> = Vec::with_capacity(islands.len());
    for isl in islands.drain(..) {
        let len = isl.v.len();
        let mut w = Vec::with_capacity(len + 1);
        w.push(isl.v[0] * q);
        for i in 1..len {
            w.push(isl.v[i] * q + isl.v[i - 1] * p);
        }
        w.push(isl.v[len - 1] * p);
        let mut base = isl.base;
        let mut start = 0;
        while start < w.len() && w[start] == 0.0 {
            start += 1;
            base += 1;
        }
        let mut end = w.len();
        while end > start && w[end - 1] == 0.0 {
            end -= 1;
        }
        if start >= end {
            continue;
        }
        w.truncate(end);
        if start > 0 {
            w.drain(..start);
        }
        let v = w;
        // The previous gap to the island below was at least one count and
        // only the top edge grew, so islands can touch but not overlap.
        if let Some(last) = next.last_mut() {
            if last.top() + 1 == base {
                last.v.extend_from_slice(&v);
                continue;
            }
        }
        next.push(Island { base, v });
    }
    *islands = next;
}

/// Drains decided mass out of the islands. Returns whether any island
/// got an interior zero and must be re-split.
fn drain(
    islands: &mut [Island],
    segs: &[DecidedSegment],
    n: u64,
    effort: &mut CompensatedSum,
    probs: &mut [CompensatedSum],
) -> bool {
    let mut dirty = false;
    for isl in islands.iter_mut() {
        for seg in segs {
            if seg.s_hi < isl.base || seg.s_lo > isl.top() {
                continue;
            }
            let lo = seg.s_lo.max(isl.base) - isl.base;
            let hi = seg.s_hi.min(isl.top()) - isl.base;
            let mut mass = CompensatedSum::new();
            for x in &mut isl.v[lo as usize..=hi as usize] {
                mass.add(*x);
                *x = 0.0;
            }
            let mass = mass.value();
            if mass != 0.0 {
                effort.add(n as f64 * mass);
                probs[seg.bucket].add(mass);
            }
            dirty = true;
        }
    }
    dirty
}

fn resplit(islands: &mut Vec<Island>) {
    let mut next: Vec<Island> = Vec::with_capacity(islands.len());
    for isl in islands.drain(..) {
        let mut i = 0;
        while i < isl.v.len() {
            if isl.v[i] == 0.0 {
                i += 1;
                continue;
            }
            let start = i;
            while i < isl.v.len() && isl.v[i] != 0.0 {
                i += 1;
            }
            next.push(Island { base: isl.base + start as u64, v: isl.v[start..i].to_vec() });
        }
    }
    *islands = next;
}

/// Runs the forward pass for `policy` at rate `p` up to `horizon` draws.
///
/// Overlapping sets close: every count decides by some finite time, the
/// pass ends early, and `undecided` is exactly zero. Non-overlapping
/// sets keep boundary-straddling mass alive all the way to `horizon`.
pub fn effort_and_probs(
    policy: &mut dyn DecisionPolicy,
    p: f64,
    horizon: u64,
) -> Result<EffortSummary, EngineError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EngineError::InvalidRate { p });
    }
    if horizon == 0 {
        return Err(EngineError::InvalidCap);
    }
    let nb = policy.bucket_count();
    let mut probs: Vec<CompensatedSum> = alloc::vec![CompensatedSum::new(); nb];
    let mut effort = CompensatedSum::new();
    let mut islands = alloc::vec![Island { base: 0, v: alloc::vec![1.0] }];
    let mut segs: Vec<DecidedSegment> = Vec::new();
    let mut undecided = 0.0;
    for n in 1..=horizon {
        advance(&mut islands, p);
        policy.segments_at(n, &mut segs)?;
        if drain(&mut islands, &segs, n, &mut effort, &mut probs) {
            resplit(&mut islands);
        }
        if islands.is_empty() {
            break;
        }
        if n == horizon {
            let mut rest = CompensatedSum::new();
            for isl in &islands {
                rest.add(isl.mass());
            }
            undecided = rest.value();
            effort.add(horizon as f64 * undecided);
        }
    }
    let bucket_probs: Vec<f64> = probs.iter().map(|c| c.value()).collect();
    #[cfg(debug_assertions)]
    {
        let total: f64 = bucket_probs.iter().sum::<f64>() + undecided;
        debug_assert!((total - 1.0).abs() < 1e-9, "mass leak: {total}");
    }
    Ok(EffortSummary { expected_samples: effort.value(), bucket_probs, undecided, horizon })
}
