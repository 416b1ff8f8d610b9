//! Always-valid confidence sequences for a Bernoulli rate.
//!
//! After `n` trials with `s` successes, the confidence set at level
//! `1 - eps` is
//!
//! ```text
//! I_n = { p : (n + 1) * binom_pmf(n, s, p) > eps }
//! ```
//!
//! By Robbins' mixture supermartingale bound, the probability that any
//! `I_n` ever excludes the true `p` is at most `eps`, uniformly over `n`
//! (no multiplicity correction as `n` grows). The set is an interval,
//! relatively open in `[0, 1]`: it contains the endpoint 0 only when
//! `s = 0` and the endpoint 1 only when `s = n`, and is open elsewhere.
//! It is never empty because `(n + 1) * pmf >= 1` at the mode `s / n`.
//!
//! Containment of `I_n` in a bucket is decided exactly from the sign
//! structure of `pmf` (unimodal in `p` with peak at `s / n`), with no
//! root-finding. Numeric interval endpoints, when wanted for reporting,
//! come from log-space bisection.

use crate::buckets::Bucket;
use crate::math;

/// `ln((n + 1) * binom_pmf(n, s, p))`, the log of the quantity compared
/// against `eps`. Returns `-inf` when the pmf is exactly zero.
#[inline]
pub fn ln_weight(n: u64, s: u64, p: f64) -> f64 {
    math::ln((n + 1) as f64) + math::ln_binom_pmf(n, s, p)
}

/// Whether the point `p` lies in the confidence set `I_n`.
#[inline]
pub fn point_in_set(n: u64, s: u64, eps: f64, p: f64) -> bool {
    ln_weight(n, s, p) > math::ln(eps)
}

fn lower_ok(n: u64, s: u64, ln_eps: f64, bucket: &Bucket) -> bool {
    if s == 0 {
        // I_n contains the endpoint 0, so the bucket must too.
        bucket.lo == 0.0 && bucket.lo_closed
    } else {
        // I_n is open at its lower end g, so the bucket fits from below
        // iff lo <= g, i.e. lo is on the rising side of the pmf with
        // weight already at or below eps.
        ln_weight(n, s, bucket.lo) <= ln_eps && bucket.lo <= s as f64 / n as f64
    }
}

fn upper_ok(n: u64, s: u64, ln_eps: f64, bucket: &Bucket) -> bool {
    if s == n {
        bucket.hi == 1.0 && bucket.hi_closed
    } else {
        ln_weight(n, s, bucket.hi) <= ln_eps && bucket.hi >= s as f64 / n as f64
    }
}

/// Exact containment test: whether `I_n` is a subset of `bucket`,
/// respecting the bucket's endpoint closure. `n = 0` gives `I_0 = [0, 1]`,
/// contained only in a closed `[0, 1]` bucket.
pub fn contains(n: u64, s: u64, eps: f64, bucket: &Bucket) -> bool {
    debug_assert!(s <= n && eps > 0.0 && eps < 1.0);
    let ln_eps = math::ln(eps);
    lower_ok(n, s, ln_eps, bucket) && upper_ok(n, s, ln_eps, bucket)
}

/// The contiguous range of success counts `s` for which `I_n` fits in
/// `bucket`, or `None` when no count does. Contiguity holds because the
/// interval's endpoints both move right as `s` grows, making `lower_ok`
/// nondecreasing and `upper_ok` nonincreasing in `s`.
pub fn contained_s_range(n: u64, eps: f64, bucket: &Bucket) -> Option<(u64, u64)> {
    let ln_eps = math::ln(eps);
    let s_min = first_true(n + 1, |s| lower_ok(n, s, ln_eps, bucket));
    if s_min > n {
        return None;
    }
    // Last s with upper_ok = (first s with !upper_ok) - 1.
    let cut = first_true(n + 1, |s| !upper_ok(n, s, ln_eps, bucket));
    if cut == 0 || cut - 1 < s_min {
        return None;
    }
    Some((s_min, cut - 1))
}

fn first_true(limit: u64, pred: impl Fn(u64) -> bool) -> u64 {
    let (mut lo, mut hi) = (0u64, limit);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// [`first_true`] with a warm start: gallops outward from `guess` to
/// bracket the boundary, then bisects inside the bracket. Exact for any
/// guess; costs O(log distance(guess, answer)) predicate calls, so a
/// caller sweeping consecutive `n` pays O(1) amortized.
fn first_true_from(guess: u64, limit: u64, pred: impl Fn(u64) -> bool) -> u64 {
    if limit == 0 {
        return 0;
    }
    let g = guess.min(limit - 1);
    if pred(g) {
        // Answer <= g: walk down in doubling steps to a false value.
        let (mut hi, mut d) = (g, 1u64);
        loop {
            if hi == 0 {
                return 0;
            }
            let probe = hi - d.min(hi);
            if pred(probe) {
                hi = probe;
                d = d.saturating_mul(2);
            } else {
                // First true in (probe, hi], with pred(hi) known true.
                let (mut lo, mut hi) = (probe + 1, hi);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if pred(mid) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                return lo;
            }
        }
    } else {
        // Answer > g: walk up in doubling steps to a true value.
        let (mut lo, mut d) = (g, 1u64);
        loop {
            let hi = match lo.checked_add(d) {
                Some(p) if p < limit => {
                    if !pred(p) {
                        lo = p;
                        d = d.saturating_mul(2);
                        continue;
                    }
                    p
                }
                // Nothing known true: plain bisection up to `limit`.
                _ => limit,
            };
            let (mut lo, mut hi) = (lo + 1, hi);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if pred(mid) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            return lo;
        }
    }
}

/// Incremental version of [`contained_s_range`] for one fixed bucket and
/// level.
///
/// Evaluates the same float expressions as the free function — results
/// are bit-identical — but caches the per-endpoint logs, shares the
/// per-`n` terms across buckets (the caller passes them in), and starts
/// each boundary search at the previous answer. A sweep over consecutive
/// `n` then costs O(1) amortized weight evaluations per step instead of
/// O(log n).
#[derive(Clone, Debug)]
pub struct RangeScanner {
    bucket: Bucket,
    ln_eps: f64,
    ln_lo: f64,
    ln1m_lo: f64,
    ln_hi: f64,
    ln1m_hi: f64,
    guess_min: u64,
    guess_cut: u64,
}

/// Per-`n` terms shared by every [`RangeScanner`] at the same `n`:
/// `ln(n + 1)` and `ln_gamma(n + 1)`, computed exactly as the cold scan
/// computes them.
#[derive(Clone, Copy, Debug)]
pub struct NTerms {
    ln_n1: f64,
    ln_gamma_n1: f64,
}

impl NTerms {
    pub fn new(n: u64) -> Self {
        Self {
            ln_n1: math::ln((n + 1) as f64),
            ln_gamma_n1: math::ln_gamma(n as f64 + 1.0),
        }
    }
}

impl RangeScanner {
    pub fn new(bucket: Bucket, eps: f64) -> Self {
        Self {
            ln_eps: math::ln(eps),
            ln_lo: math::ln(bucket.lo),
            ln1m_lo: math::ln_1p(-bucket.lo),
            ln_hi: math::ln(bucket.hi),
            ln1m_hi: math::ln_1p(-bucket.hi),
            bucket,
            guess_min: 0,
            guess_cut: 0,
        }
    }

    /// `ln_weight(n, s, p)` with the logs of `p` precomputed; same
    /// operation tree as the cold path, so identical rounding.
    fn ln_weight_warm(n: u64, s: u64, lp: f64, l1p: f64, t: NTerms) -> f64 {
        let mut acc = if s == 0 || s == n {
            0.0
        } else {
            t.ln_gamma_n1
                - math::ln_gamma(s as f64 + 1.0)
                - math::ln_gamma((n - s) as f64 + 1.0)
        };
        if s > 0 {
            acc += s as f64 * lp;
        }
        if s < n {
            acc += (n - s) as f64 * l1p;
        }
        t.ln_n1 + acc
    }

    fn lower_ok(&self, n: u64, s: u64, t: NTerms) -> bool {
        if s == 0 {
            return self.bucket.lo == 0.0 && self.bucket.lo_closed;
        }
        if self.bucket.lo <= 0.0 {
            // The weight at p = 0 is zero for s > 0, so the test holds.
            return true;
        }
        Self::ln_weight_warm(n, s, self.ln_lo, self.ln1m_lo, t) <= self.ln_eps
            && self.bucket.lo <= s as f64 / n as f64
    }

    fn upper_ok(&self, n: u64, s: u64, t: NTerms) -> bool {
        if s == n {
            return self.bucket.hi == 1.0 && self.bucket.hi_closed;
        }
        if self.bucket.hi >= 1.0 {
            return true;
        }
        Self::ln_weight_warm(n, s, self.ln_hi, self.ln1m_hi, t) <= self.ln_eps
            && self.bucket.hi >= s as f64 / n as f64
    }

    /// Same value as [`contained_s_range`] at this scanner's bucket and
    /// level.
    pub fn contained_s_range(&mut self, n: u64, t: NTerms) -> Option<(u64, u64)> {
        let s_min = first_true_from(self.guess_min, n + 1, |s| self.lower_ok(n, s, t));
        self.guess_min = s_min;
        if s_min > n {
            return None;
        }
        let cut = first_true_from(self.guess_cut, n + 1, |s| !self.upper_ok(n, s, t));
        self.guess_cut = cut;
        if cut == 0 || cut - 1 < s_min {
            return None;
        }
        Some((s_min, cut - 1))
    }
}

/// Endpoints of the closed hull of `I_n`, to absolute tolerance 1e-12.
///
/// Extreme counts have closed forms from `(n + 1)(1 - p)^n = eps` (and its
/// mirror); interior counts bisect the log-weight on each side of the mode.
pub fn interval(n: u64, s: u64, eps: f64) -> (f64, f64) {
    debug_assert!(s <= n && eps > 0.0 && eps < 1.0);
    if n == 0 {
        return (0.0, 1.0);
    }
    const TOL: f64 = 1e-12;
    let ln_eps = math::ln(eps);
    let root = math::exp((ln_eps - math::ln((n + 1) as f64)) / n as f64);
    if s == 0 {
        return (0.0, -math::exp_m1((ln_eps - math::ln((n + 1) as f64)) / n as f64));
    }
    if s == n {
        return (root, 1.0);
    }
    let mode = s as f64 / n as f64;
    let lo = math::bisect(0.0, mode, TOL, |p| ln_weight(n, s, p) <= ln_eps);
    let hi = math::bisect(mode, 1.0, TOL, |p| ln_weight(n, s, p) > ln_eps);
    (lo, hi)
}

/// Deterministic upper bound on the length of `I_n`:
/// `sqrt((2 / n) * ln((n + 1) / eps))`. Holds for every `s`; `n = 0`
/// returns infinity (the set is all of `[0, 1]`).
pub fn length_bound(n: u64, eps: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    math::sqrt(2.0 / n as f64 * math::ln((n + 1) as f64 / eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn zero_samples_give_the_unit_interval() {
        assert_eq!(interval(0, 0, 0.05), (0.0, 1.0));
        let unit = Bucket::closed(0.0, 1.0).unwrap();
        assert!(contains(0, 0, 0.05, &unit));
        let half_open = Bucket::half_open(0.0, 1.0).unwrap();
        assert!(!contains(0, 0, 0.05, &half_open));
        let sub = Bucket::closed(0.0, 0.999).unwrap();
        assert!(!contains(0, 0, 0.05, &sub));
    }

    #[test]
    fn extreme_count_closed_forms_match_the_defining_equation() {
        for (n, eps) in [(10u64, 0.05), (100, 0.001), (10_000, 0.001), (7, 0.5)] {
            let (lo, hi) = interval(n, 0, eps);
            assert_eq!(lo, 0.0);
            let w = (n + 1) as f64 * math::exp(n as f64 * math::ln_1p(-hi));
            assert!((w - eps).abs() < 1e-9 * eps, "n={n} w={w}");

            let (lo, hi) = interval(n, n, eps);
            assert_eq!(hi, 1.0);
            let w = (n + 1) as f64 * math::exp(n as f64 * math::ln(lo));
            assert!((w - eps).abs() < 1e-9 * eps);
        }
    }

    #[test]
    fn interval_is_symmetric_under_count_reflection() {
        for (n, s, eps) in [(50u64, 10u64, 0.01), (200, 3, 0.001), (9, 4, 0.3)] {
            let (lo, hi) = interval(n, s, eps);
            let (lo_r, hi_r) = interval(n, n - s, eps);
            assert!((lo - (1.0 - hi_r)).abs() < 1e-9);
            assert!((hi - (1.0 - lo_r)).abs() < 1e-9);
        }
    }

    #[test]
    fn interval_contains_the_point_estimate() {
        for n in [1u64, 2, 17, 400, 20_000] {
            for s in [0, 1, n / 3, n / 2, n - 1, n] {
                let (lo, hi) = interval(n, s, 1e-6);
                let hat = s as f64 / n as f64;
                assert!(lo <= hat && hat <= hi, "n={n} s={s}");
                assert!(point_in_set(n, s, 1e-6, hat));
            }
        }
    }

    #[test]
    fn containment_agrees_with_numeric_endpoints() {
        // Buckets built by nudging the numeric endpoints in or out are a
        // sharp oracle for the root-free containment test.
        let d = 1e-6;
        for (n, s, eps) in [
            (100u64, 30u64, 0.01),
            (1_000, 1, 0.001),
            (1_000, 999, 0.001),
            (50, 25, 0.2),
            (10_000, 500, 1e-5),
        ] {
            let (g, f) = interval(n, s, eps);
            let around =
                Bucket::new((g - d).max(0.0), (f + d).min(1.0), false, false).unwrap();
            assert!(contains(n, s, eps, &around), "n={n} s={s}");
            let clipped_lo = Bucket::new(g + d, (f + d).min(1.0), true, true).unwrap();
            assert!(!contains(n, s, eps, &clipped_lo));
            let clipped_hi = Bucket::new((g - d).max(0.0), f - d, true, true).unwrap();
            assert!(!contains(n, s, eps, &clipped_hi));
        }
    }

    #[test]
    fn all_zero_counts_decide_the_smallest_bucket_only_once_narrow_enough() {
        let b = Bucket::closed(0.0, 0.001).unwrap();
        // At n = 10^4 the set [0, r_n) still reaches past 1e-3
        // (r_n ~ 1.61e-3), so the bucket does not yet contain it.
        assert!(!contains(10_000, 0, 0.001, &b));
        let (_, hi) = interval(10_000, 0, 0.001);
        assert!(hi > 0.001 && hi < 0.002, "r_n = {hi}");
        // A wider bucket already holds it, and by n = 2*10^4 the narrow
        // bucket does too.
        assert!(contains(10_000, 0, 0.001, &Bucket::closed(0.0, 0.002).unwrap()));
        assert!(contains(20_000, 0, 0.001, &b));
        // Open at zero never works for s = 0.
        assert!(!contains(20_000, 0, 0.001, &Bucket::half_open(0.0, 0.001).unwrap()));
    }

    #[test]
    fn length_bound_reference_values() {
        assert!((length_bound(1, 0.5) - 1.6651092223153954).abs() < 1e-12);
        assert!((length_bound(10_000, 0.001) - 0.05678).abs() < 5e-5);
        assert_eq!(length_bound(0, 0.5), f64::INFINITY);
    }

    #[test]
    fn length_bound_dominates_actual_length() {
        for n in [1u64, 2, 5, 30, 100, 1_000, 10_000] {
            let bound = length_bound(n, 0.01);
            for s in [0, 1, n / 4, n / 2, (3 * n) / 4, n.saturating_sub(1), n] {
                let (lo, hi) = interval(n, s, 0.01);
                assert!(hi - lo <= bound + 1e-9, "n={n} s={s}: {} > {bound}", hi - lo);
            }
        }
        for eps in [0.5, 0.05, 1e-4, 1e-8] {
            let n = 500;
            let bound = length_bound(n, eps);
            for s in [0, 125, 250, 500] {
                let (lo, hi) = interval(n, s, eps);
                assert!(hi - lo <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn contained_range_matches_exhaustive_scan() {
        let jstar = crate::buckets::BucketSet::jstar();
        for n in [1u64, 7, 40, 60] {
            for eps in [0.3, 0.05, 0.001] {
                for b in jstar.buckets() {
                    let scan: Vec<u64> = (0..=n).filter(|&s| contains(n, s, eps, b)).collect();
                    let got = contained_s_range(n, eps, b);
                    match got {
                        None => assert!(scan.is_empty(), "n={n} eps={eps} b={b}"),
                        Some((a, z)) => {
                            assert!(!scan.is_empty());
                            assert_eq!((scan[0], *scan.last().unwrap()), (a, z));
                            assert_eq!(scan.len() as u64, z - a + 1, "range must be contiguous");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn warm_scanner_matches_the_cold_scan_in_any_query_order() {
        // Consecutive sweeps (warm guesses near the answer), large jumps
        // (stale guesses), and revisits must all reproduce the cold scan
        // exactly: the scanner evaluates the same float expressions.
        let mut buckets: Vec<Bucket> = crate::buckets::BucketSet::jstar().buckets().to_vec();
        buckets.push(Bucket::closed(0.0, 1.0).unwrap());
        buckets.push(Bucket::new(0.3, 0.7, false, false).unwrap());
        buckets.push(Bucket::new(0.9, 1.0, false, true).unwrap());
        let mut plan: Vec<u64> = (1..200).collect();
        plan.extend([5000, 31, 5001, 4999, 120_000, 5002, 1, 119_999]);
        for eps in [0.05, 1e-3] {
            for b in &buckets {
                let mut scanner = RangeScanner::new(*b, eps);
                for &n in &plan {
                    assert_eq!(
                        scanner.contained_s_range(n, NTerms::new(n)),
                        contained_s_range(n, eps, b),
                        "n={n} eps={eps} b={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn wide_bucket_gains_all_counts_at_large_n() {
        // For n far past closure, every s decides some bucket of an
        // overlapping family; here the middle bucket absorbs mid counts.
        let b = Bucket::half_open(0.008, 0.012).unwrap();
        let (a, z) = contained_s_range(100_000, 0.001, &b).unwrap();
        let hat_a = a as f64 / 100_000.0;
        let hat_z = z as f64 / 100_000.0;
        assert!(hat_a > 0.008 && hat_z < 0.012);
        assert!(hat_a < 0.0105 && hat_z > 0.0095, "range should span the center");
    }
}
