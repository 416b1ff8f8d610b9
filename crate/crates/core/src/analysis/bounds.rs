//! Information-theoretic floors on the expected number of draws.
//!
//! Any procedure that reports a bucket containing the true rate with
//! probability at least `1 - eps` embeds binary tests between the rate
//! and nearby alternatives, and every such test obeys the sequential
//! likelihood-ratio bound: its expected sample size is at least the
//! error-rate divergence over the per-draw divergence. Maximising over
//! the embedded tests gives floors that hold for every stopping rule
//! with the same guarantee, so measured effort curves can be judged
//! against them.

use alloc::vec::Vec;

use crate::buckets::{Bucket, BucketSet};
use crate::math;

use super::AnalysisError;

/// Divergence between success rates `a` and `b` per draw,
/// `a ln(a/b) + (1-a) ln((1-a)/(1-b))`, with `0 ln 0 = 0`.
///
/// Infinite when `b` sits on the boundary and `a` does not.
pub fn kl_bern(a: f64, b: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
    let pos = if a == 0.0 { 0.0 } else { a * math::ln(a / b) };
    let neg = if a == 1.0 { 0.0 } else { (1.0 - a) * math::ln((1.0 - a) / (1.0 - b)) };
    pos + neg
}

/// Floor on the expected draws of any test that errs with probability at
/// most `type1` when the rate is `p0` and at most `type2` when it is
/// `p1`.
///
/// The numerator is the divergence between the error behaviours,
/// `kl_bern(type1, 1 - type2)`; the denominator is the per-draw
/// divergence `kl_bern(p0, p1)`. A `type1` at or above one allows the
/// test to always err at `p0`, so no draws are forced and the floor is
/// zero. Coinciding rates make any error budget below one-half
/// unattainable in finite time, so the floor is infinite (zero when the
/// numerator also vanishes, as at `type1 = 1 - type2`).
fn wald_ratio(type1: f64, type2: f64, p0: f64, p1: f64) -> f64 {
    debug_assert!(type2 > 0.0 && type2 < 1.0);
    if type1 >= 1.0 {
        return 0.0;
    }
    let num = kl_bern(type1.max(0.0), 1.0 - type2);
    let den = kl_bern(p0, p1);
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// Public form of the test floor with checked arguments: distinguishing
/// rate `p0` from `p1` with error at most `type1` at `p0` and `type2`
/// at `p1` needs at least this many draws in expectation under `p0`.
///
/// Coinciding rates leave nothing to distinguish, so they are rejected
/// rather than reported as an infinite floor.
pub fn wald_bound(p0: f64, p1: f64, type1: f64, type2: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&p0)
        || !(0.0..=1.0).contains(&p1)
        || !(type1 > 0.0 && type1 < 1.0)
        || !(type2 > 0.0 && type2 < 1.0)
    {
        return Err(AnalysisError::InvalidParams);
    }
    if p0 == p1 {
        return Err(AnalysisError::DegenerateAlternative);
    }
    Ok(wald_ratio(type1, type2, p0, p1))
}

fn outside_alternatives(b: &Bucket) -> impl Iterator<Item = f64> {
    // A closed endpoint is approached from outside in the limit; the
    // divergence is continuous there, so the endpoint value itself gives
    // the supremum of the bounds over true outsiders.
    let lo = (b.lo > 0.0).then_some(b.lo);
    let hi = (b.hi < 1.0).then_some(b.hi);
    lo.into_iter().chain(hi)
}

fn check_point_and_risk(p_tilde: f64, eps: f64) -> Result<(), AnalysisError> {
    if !(0.0..=1.0).contains(&p_tilde) || !(eps > 0.0 && eps < 1.0) {
        return Err(AnalysisError::InvalidParams);
    }
    Ok(())
}

/// Floor from the union of buckets containing `p_tilde`: outside that
/// union every reportable answer is wrong, so the procedure embeds a
/// `(eps, eps)` test against each alternative just past the union's
/// edge. Edges at 0 or 1 have no outside and contribute nothing; an
/// edge at `p_tilde` itself makes the floor infinite, which is exactly
/// the non-overlapping situation where no bound on effort exists.
pub fn lower_bound_basic(set: &BucketSet, p_tilde: f64, eps: f64) -> Result<f64, AnalysisError> {
    check_point_and_risk(p_tilde, eps)?;
    let holders = set.indices_containing(p_tilde);
    debug_assert!(!holders.is_empty(), "bucket sets cover [0, 1]");
    let buckets = set.buckets();
    let hull_lo =
        holders.iter().map(|&i| buckets[i].lo).fold(f64::INFINITY, f64::min);
    let hull_hi =
        holders.iter().map(|&i| buckets[i].hi).fold(f64::NEG_INFINITY, f64::max);
    let mut best = 0.0f64;
    if hull_lo > 0.0 {
        best = best.max(wald_ratio(eps, eps, p_tilde, hull_lo));
    }
    if hull_hi < 1.0 {
        best = best.max(wald_ratio(eps, eps, p_tilde, hull_hi));
    }
    Ok(best)
}

/// Grid pitch for the report-probability split in the improved floor.
const ETA_STEP: f64 = 1e-3;

/// Sharper floor for points covered by exactly two buckets.
///
/// Let `eta` be the probability the procedure reports the first of the
/// two buckets at `p_tilde`. Reporting the first bucket is itself a
/// test against alternatives outside it with errors
/// `(1 - eta, eps)`; reporting the second likewise with errors
/// `(eta + eps, eps)` up to the grid pitch, which is added to keep the
/// floor valid for splits between grid points. The procedure gets to
/// pick its own split, so the floor is the minimum over the grid of the
/// larger branch; both assignments of the two bucket labels are valid
/// floors and the larger is kept. Falls back to the basic floor when
/// the point is not covered by exactly two buckets, and never returns
/// less than the basic floor.
pub fn lower_bound_improved(
    set: &BucketSet,
    p_tilde: f64,
    eps: f64,
) -> Result<f64, AnalysisError> {
    check_point_and_risk(p_tilde, eps)?;
    let basic = lower_bound_basic(set, p_tilde, eps)?;
    let holders = set.indices_containing(p_tilde);
    if holders.len() != 2 {
        return Ok(basic);
    }
    let buckets = set.buckets();
    let pair = [&buckets[holders[0]], &buckets[holders[1]]];
    let mut best = basic;
    for (ja, jb) in [(pair[0], pair[1]), (pair[1], pair[0])] {
        let qa: Vec<f64> = outside_alternatives(ja).collect();
        let qb: Vec<f64> = outside_alternatives(jb).collect();
        let steps = (1.0 / ETA_STEP) as u32;
        let mut min_max = f64::INFINITY;
        for k in 0..=steps {
            let eta = f64::from(k) * ETA_STEP;
            let branch_a = qa
                .iter()
                .map(|&q| wald_ratio(1.0 - eta, eps, p_tilde, q))
                .fold(0.0f64, f64::max);
            let branch_b = qb
                .iter()
                .map(|&q| wald_ratio(eta + ETA_STEP + eps, eps, p_tilde, q))
                .fold(0.0f64, f64::max);
            min_max = min_max.min(branch_a.max(branch_b));
            if min_max == 0.0 {
                break;
            }
        }
        best = best.max(min_max);
    }
    Ok(best)
}
