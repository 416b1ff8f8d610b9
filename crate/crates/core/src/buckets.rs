//! P-value buckets: finite interval families covering `[0, 1]`.
//!
//! A decision procedure reports one bucket of a family instead of a point
//! estimate. Two structural properties of a family matter here:
//!
//! * *Covering*: every `p` in `[0, 1]` lies in at least one bucket, so a
//!   report is always possible.
//! * *Overlapping*: every `p` in `(0, 1)` lies in the **open interior** of
//!   some bucket. This is exactly what allows a sequential procedure to stop
//!   with probability one under every `p`: a shrinking confidence interval
//!   around `p` eventually fits inside a bucket interior.
//!
//! The module also carries the star-rating presentation of a decided bucket
//! (`***`, `**~`, ...), three generators that add overlap buckets around a
//! set of classical thresholds, and Clopper-Pearson intervals used by the
//! width-matching generator.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Classical significance thresholds used for star ratings.
pub const CLASSICAL_THRESHOLDS: [f64; 3] = [0.001, 0.01, 0.05];

// ---------------------------------------------------------------------------
// Bucket
// ---------------------------------------------------------------------------

/// One interval of a bucket family, with explicit endpoint closure.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Bucket {
    /// Validated constructor: endpoints must satisfy `0 <= lo < hi <= 1`.
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Result<Self, BucketError> {
        if !(lo.is_finite() && hi.is_finite() && (0.0..=1.0).contains(&lo) && hi <= 1.0) {
            return Err(BucketError::InvalidEndpoint { lo, hi });
        }
        if !(lo < hi) {
            return Err(BucketError::DegenerateBucket { lo, hi });
        }
        Ok(Self {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    /// Closed interval `[lo, hi]`.
    pub fn closed(lo: f64, hi: f64) -> Result<Self, BucketError> {
        Self::new(lo, hi, true, true)
    }

    /// Half-open interval `(lo, hi]`, the shape of generated overlap buckets.
    pub fn half_open(lo: f64, hi: f64) -> Result<Self, BucketError> {
        Self::new(lo, hi, false, true)
    }

    /// Membership respecting endpoint closure.
    pub fn contains(&self, p: f64) -> bool {
        let lo_ok = p > self.lo || (self.lo_closed && p == self.lo);
        let hi_ok = p < self.hi || (self.hi_closed && p == self.hi);
        lo_ok && hi_ok
    }

    /// Membership in the open interior `(lo, hi)`.
    pub fn interior_contains(&self, p: f64) -> bool {
        p > self.lo && p < self.hi
    }

    /// Whether `inner` is a subset of `self`, respecting closure on both.
    pub fn covers(&self, inner: &Bucket) -> bool {
        let lo_ok = self.lo < inner.lo
            || (self.lo == inner.lo && (self.lo_closed || !inner.lo_closed));
        let hi_ok = self.hi > inner.hi
            || (self.hi == inner.hi && (self.hi_closed || !inner.hi_closed));
        lo_ok && hi_ok
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' },
        )
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BucketError {
    /// The family has no buckets.
    Empty,
    /// An endpoint is NaN, infinite, or outside `[0, 1]`.
    InvalidEndpoint { lo: f64, hi: f64 },
    /// `lo >= hi`.
    DegenerateBucket { lo: f64, hi: f64 },
    /// Some point of `[0, 1]` is in no bucket; `at` is a witness.
    CoverageGap { at: f64 },
    /// A rating was requested for a bucket that is not a member of the set.
    BucketNotInSet,
    /// A generated overlap bucket would reach past another threshold or
    /// outside `(0, 1)`.
    OverlapCollision { threshold: f64 },
    /// `t - rho*sqrt(t) <= 0` (or the mirrored failure at 1): the requested
    /// half-width does not fit around the threshold.
    RhoTooLarge { threshold: f64 },
}

impl fmt::Display for BucketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "bucket set is empty"),
            Self::InvalidEndpoint { lo, hi } => {
                write!(f, "bucket endpoints ({lo}, {hi}) outside [0, 1] or non-finite")
            }
            Self::DegenerateBucket { lo, hi } => {
                write!(f, "bucket ({lo}, {hi}) has non-positive width")
            }
            Self::CoverageGap { at } => write!(f, "no bucket contains the point {at}"),
            Self::BucketNotInSet => write!(f, "bucket is not a member of the set"),
            Self::OverlapCollision { threshold } => write!(
                f,
                "generated bucket for threshold {threshold} collides with another threshold or the domain boundary"
            ),
            Self::RhoTooLarge { threshold } => write!(
                f,
                "rho too large: generated bucket around {threshold} leaves (0, 1)"
            ),
        }
    }
}

impl core::error::Error for BucketError {}

// ---------------------------------------------------------------------------
// BucketSet
// ---------------------------------------------------------------------------

/// A validated, covering family of buckets, stored sorted by `(lo, hi)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "UncheckedBucketSet"))]
pub struct BucketSet {
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    name: Option<String>,
    buckets: Vec<Bucket>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct UncheckedBucketSet {
    #[serde(default)]
    name: Option<String>,
    buckets: Vec<Bucket>,
}

#[cfg(feature = "serde")]
impl TryFrom<UncheckedBucketSet> for BucketSet {
    type Error = BucketError;
    fn try_from(raw: UncheckedBucketSet) -> Result<Self, BucketError> {
        Self::new(raw.name, raw.buckets)
    }
}

impl BucketSet {
    /// Validates that the buckets cover `[0, 1]` (closure-aware) and stores
    /// them sorted by `(lo, hi)`.
    pub fn new(name: Option<String>, mut buckets: Vec<Bucket>) -> Result<Self, BucketError> {
        if buckets.is_empty() {
            return Err(BucketError::Empty);
        }
        for b in &buckets {
            // Re-validate: buckets may come from deserialization.
            Bucket::new(b.lo, b.hi, b.lo_closed, b.hi_closed)?;
        }
        // Closed lower endpoints first among equal `lo` so the coverage sweep
        // sees the bucket that can actually cover the current frontier point.
        buckets.sort_by(|a, b| {
            a.lo.total_cmp(&b.lo)
                .then(a.lo_closed.cmp(&b.lo_closed).reverse())
                .then(a.hi.total_cmp(&b.hi))
                .then(a.hi_closed.cmp(&b.hi_closed))
        });

        // Sweep: `reach` is the covered frontier; `reach_closed` says whether
        // the point `reach` itself is covered.
        let mut reach = 0.0f64;
        let mut reach_closed = false;
        for b in &buckets {
            if b.lo > reach {
                let at = if reach_closed {
                    0.5 * (reach + b.lo)
                } else {
                    reach
                };
                return Err(BucketError::CoverageGap { at });
            }
            if b.lo == reach && !reach_closed && !b.lo_closed {
                return Err(BucketError::CoverageGap { at: reach });
            }
            if b.hi > reach {
                reach = b.hi;
                reach_closed = b.hi_closed;
            } else if b.hi == reach {
                reach_closed |= b.hi_closed;
            }
        }
        if reach < 1.0 || !reach_closed {
            let at = if reach_closed { 0.5 * (reach + 1.0) } else { reach };
            return Err(BucketError::CoverageGap { at });
        }
        Ok(Self { name, buckets })
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// The single trivial bucket `[0, 1]`.
    pub fn single() -> Self {
        Self::new(
            Some(String::from("single")),
            alloc::vec![Bucket::closed(0.0, 1.0).unwrap()],
        )
        .unwrap()
    }

    /// Classical buckets at the 0.1% / 1% / 5% thresholds (non-overlapping).
    pub fn j0() -> Self {
        let b = alloc::vec![
            Bucket::closed(0.0, 0.001).unwrap(),
            Bucket::half_open(0.001, 0.01).unwrap(),
            Bucket::half_open(0.01, 0.05).unwrap(),
            Bucket::half_open(0.05, 1.0).unwrap(),
        ];
        Self::new(Some(String::from("J0")), b).unwrap()
    }

    /// The classical buckets plus one overlap bucket straddling each
    /// threshold; the default overlapping family.
    pub fn jstar() -> Self {
        let b = alloc::vec![
            Bucket::closed(0.0, 0.001).unwrap(),
            Bucket::half_open(0.0005, 0.002).unwrap(),
            Bucket::half_open(0.001, 0.01).unwrap(),
            Bucket::half_open(0.008, 0.012).unwrap(),
            Bucket::half_open(0.01, 0.05).unwrap(),
            Bucket::half_open(0.045, 0.055).unwrap(),
            Bucket::half_open(0.05, 1.0).unwrap(),
        ];
        Self::new(Some(String::from("Jstar")), b).unwrap()
    }

    /// Order-of-magnitude buckets for screening very small p-values:
    /// `[0, 1e-7]` plus `(10^(i-2), 10^i]` for `i = -6..=0`.
    pub fn js() -> Self {
        let mut b = alloc::vec![Bucket::closed(0.0, 1e-7).unwrap()];
        for i in -6i32..=0 {
            let lo = math::pow(10.0, (i - 2) as f64);
            let hi = math::pow(10.0, i as f64);
            b.push(Bucket::half_open(lo, hi).unwrap());
        }
        Self::new(Some(String::from("Js")), b).unwrap()
    }

    /// All finite endpoints except 0 and 1, sorted and deduplicated. These
    /// are the points a confidence interval must clear to fit in a bucket,
    /// and the thresholds the boundary-based method tracks.
    pub fn boundary_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = Vec::new();
        for b in &self.buckets {
            for e in [b.lo, b.hi] {
                if e > 0.0 && e < 1.0 {
                    pts.push(e);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Whether every `p` in `(0, 1)` lies in the open interior of some
    /// bucket. Interior coverage only changes at bucket endpoints, so it
    /// suffices to test the endpoints and the midpoints between consecutive
    /// candidate points.
    pub fn is_overlapping(&self) -> bool {
        for q in self.interior_candidates() {
            if !self.buckets.iter().any(|b| b.interior_contains(q)) {
                return false;
            }
        }
        true
    }

    fn interior_candidates(&self) -> Vec<f64> {
        let mut pts = self.boundary_points();
        pts.insert(0, 0.0);
        pts.push(1.0);
        let mut cand = Vec::with_capacity(2 * pts.len());
        for w in pts.windows(2) {
            cand.push(0.5 * (w[0] + w[1]));
            if w[1] < 1.0 {
                cand.push(w[1]);
            }
        }
        cand
    }

    /// Largest `c` such that every interval of length `< c` inside `[0, 1]`
    /// is guaranteed to fit in some bucket; `None` when the set is not
    /// overlapping (no such positive `c` exists).
    ///
    /// `c` is the minimum of (a) the smallest gap between consecutive points
    /// of `{0} ∪ A ∪ {1}` where `A` is the interior endpoint set, and (b) for
    /// each `a` in `A`, the largest interior half-width `min(a - lo, hi - a)`
    /// over buckets whose interior contains `a`.
    pub fn fit_radius(&self) -> Option<f64> {
        if !self.is_overlapping() {
            return None;
        }
        let mut pts = self.boundary_points();
        let inner = pts.clone();
        pts.insert(0, 0.0);
        pts.push(1.0);
        pts.dedup();
        let mut c = f64::INFINITY;
        for w in pts.windows(2) {
            c = c.min(w[1] - w[0]);
        }
        for a in inner {
            let mut r = 0.0f64;
            for b in &self.buckets {
                if b.interior_contains(a) {
                    r = r.max((a - b.lo).min(b.hi - a));
                }
            }
            c = c.min(r);
        }
        Some(c)
    }

    /// Indices of buckets containing `p`, respecting closure.
    pub fn indices_containing(&self, p: f64) -> Vec<usize> {
        self.buckets
            .iter()
            .enumerate()
            .filter(|(_, b)| b.contains(p))
            .map(|(i, _)| i)
            .collect()
    }

    /// Bucket indices in decision priority order: smallest upper endpoint
    /// first, ties broken by largest lower endpoint. When a confidence set
    /// fits several buckets at once, the first fitting bucket in this order
    /// is reported.
    pub fn decision_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.buckets.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&self.buckets[i], &self.buckets[j]);
            a.hi.total_cmp(&b.hi).then(b.lo.total_cmp(&a.lo))
        });
        order
    }

    /// Index of an exact member (all four fields equal).
    pub fn index_of(&self, bucket: &Bucket) -> Option<usize> {
        self.buckets.iter().position(|b| b == bucket)
    }
}

// ---------------------------------------------------------------------------
// Star ratings
// ---------------------------------------------------------------------------

/// Star code for a decided bucket: `stars` counts significance stars and
/// `tilde` marks a bucket that straddles a classical threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RatingCode {
    pub stars: u8,
    pub tilde: bool,
}

impl fmt::Display for RatingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in 0..self.stars {
            write!(f, "*")?;
        }
        if self.tilde {
            write!(f, "~")?;
        }
        Ok(())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for RatingCode {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for RatingCode {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = <&str as serde::Deserialize>::deserialize(de)?;
        let stars = s.chars().take_while(|&c| c == '*').count() as u8;
        let rest = &s[stars as usize..];
        let tilde = rest == "~";
        if !rest.is_empty() && !tilde {
            return Err(serde::de::Error::custom("malformed rating code"));
        }
        Ok(RatingCode { stars, tilde })
    }
}

/// Star rating of a decided bucket relative to `thresholds` (strictly
/// increasing, inside `(0, 1)`).
///
/// A bucket that straddles no threshold gets the stars of the smallest
/// threshold `>=` its upper endpoint (0 stars if there is none). A bucket
/// that contains a threshold in its open interior gets `tilde = true` and
/// the stars of the smallest threshold strictly above its upper endpoint.
pub fn star_rating(
    set: &BucketSet,
    decided: &Bucket,
    thresholds: &[f64],
) -> Result<RatingCode, BucketError> {
    if set.index_of(decided).is_none() {
        return Err(BucketError::BucketNotInSet);
    }
    debug_assert!(thresholds.windows(2).all(|w| w[0] < w[1]));
    let m = thresholds.len();
    let stars_for = |cut: f64, strict: bool| -> u8 {
        for (j, &t) in thresholds.iter().enumerate() {
            if (strict && t > cut) || (!strict && t >= cut) {
                return (m - j) as u8;
            }
        }
        0
    };
    let straddles = thresholds.iter().any(|&t| decided.interior_contains(t));
    if straddles {
        Ok(RatingCode {
            stars: stars_for(decided.hi, true),
            tilde: true,
        })
    } else {
        Ok(RatingCode {
            stars: stars_for(decided.hi, false),
            tilde: false,
        })
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

fn classical_buckets(thresholds: &[f64]) -> Result<Vec<Bucket>, BucketError> {
    if thresholds.is_empty() {
        return Err(BucketError::Empty);
    }
    for w in thresholds.windows(2) {
        if !(w[0] < w[1]) {
            return Err(BucketError::InvalidEndpoint { lo: w[0], hi: w[1] });
        }
    }
    if !(thresholds[0] > 0.0 && *thresholds.last().unwrap() < 1.0) {
        return Err(BucketError::InvalidEndpoint {
            lo: thresholds[0],
            hi: *thresholds.last().unwrap(),
        });
    }
    let mut b = alloc::vec![Bucket::closed(0.0, thresholds[0])?];
    for w in thresholds.windows(2) {
        b.push(Bucket::half_open(w[0], w[1])?);
    }
    b.push(Bucket::half_open(*thresholds.last().unwrap(), 1.0)?);
    Ok(b)
}

fn check_collision(thresholds: &[f64], own: f64, lo: f64, hi: f64) -> Result<(), BucketError> {
    for &t in thresholds {
        if t != own && t >= lo && t <= hi {
            return Err(BucketError::OverlapCollision { threshold: own });
        }
    }
    Ok(())
}

/// Classical buckets plus, for each threshold `t`, the overlap bucket
/// `(rho*t, t/rho]` with `rho` in `(0, 1)`.
pub fn gen_proportional(thresholds: &[f64], rho: f64) -> Result<BucketSet, BucketError> {
    let mut buckets = classical_buckets(thresholds)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(BucketError::InvalidEndpoint { lo: rho, hi: rho });
    }
    for &t in thresholds {
        let (lo, hi) = (rho * t, t / rho);
        if !(lo < t && t < hi) {
            return Err(BucketError::DegenerateBucket { lo, hi });
        }
        if hi >= 1.0 {
            return Err(BucketError::OverlapCollision { threshold: t });
        }
        check_collision(thresholds, t, lo, hi)?;
        buckets.push(Bucket::half_open(lo, hi)?);
    }
    BucketSet::new(None, buckets)
}

/// Classical buckets plus, for each threshold `t`, the overlap bucket
/// `(t - rho*sqrt(t), t + rho*sqrt(t)]`.
pub fn gen_sqrt(thresholds: &[f64], rho: f64) -> Result<BucketSet, BucketError> {
    let mut buckets = classical_buckets(thresholds)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(BucketError::InvalidEndpoint { lo: rho, hi: rho });
    }
    for &t in thresholds {
        let half = rho * math::sqrt(t);
        let (lo, hi) = (t - half, t + half);
        if lo <= 0.0 || hi >= 1.0 {
            return Err(BucketError::RhoTooLarge { threshold: t });
        }
        check_collision(thresholds, t, lo, hi)?;
        buckets.push(Bucket::half_open(lo, hi)?);
    }
    BucketSet::new(None, buckets)
}

/// Classical buckets plus, for each threshold `t`, the smallest interval
/// containing every Clopper-Pearson interval `CP(s, n, eps)` that contains
/// `t`. These overlap buckets match the width a fixed-`n` procedure can
/// resolve.
pub fn gen_match_naive(thresholds: &[f64], n: u64, eps: f64) -> Result<BucketSet, BucketError> {
    let mut buckets = classical_buckets(thresholds)?;
    if n == 0 || !(eps > 0.0 && eps < 1.0) {
        return Err(BucketError::InvalidEndpoint { lo: eps, hi: eps });
    }
    for &t in thresholds {
        // Both CP endpoints are nondecreasing in s, so the set of s whose
        // interval contains t is contiguous; binary-search its ends instead
        // of scanning all n+1 values.
        let s_first = first_true(n + 1, |s| clopper_pearson(s, n, eps).1 >= t);
        let cut = first_true(n + 1, |s| clopper_pearson(s, n, eps).0 > t);
        debug_assert!(s_first <= n && cut >= 1, "CP intervals cover [0, 1]");
        let s_last = cut.min(n + 1) - 1;
        let lo = clopper_pearson(s_first, n, eps).0;
        let hi = clopper_pearson(s_last, n, eps).1;
        if !(lo < t && t < hi) {
            // No CP interval strictly brackets t; cannot build an overlap
            // bucket with t in its interior.
            return Err(BucketError::DegenerateBucket { lo, hi });
        }
        check_collision(thresholds, t, lo, hi)?;
        buckets.push(Bucket::half_open(lo, hi.min(1.0))?);
    }
    BucketSet::new(None, buckets)
}

/// Smallest `s` in `[0, limit)` with `pred(s)` true, assuming `pred` is
/// monotone (false then true); returns `limit` when always false.
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

// ---------------------------------------------------------------------------
// Clopper-Pearson
// ---------------------------------------------------------------------------

/// Equal-tailed Clopper-Pearson interval for `p` after observing `s`
/// successes in `n` Bernoulli trials, with coverage at least `1 - eps`.
///
/// Endpoints are found by monotone bisection on the binomial tail
/// probabilities to absolute tolerance 1e-12; `s = 0` pins the lower
/// endpoint at 0 and `s = n` pins the upper endpoint at 1.
pub fn clopper_pearson(s: u64, n: u64, eps: f64) -> (f64, f64) {
    debug_assert!(n >= 1 && s <= n && eps > 0.0 && eps < 1.0);
    const TOL: f64 = 1e-12;
    let half = 0.5 * eps;
    let lower = if s == 0 {
        0.0
    } else {
        // P_p(X >= s) increases in p; boundary where it reaches eps/2.
        math::bisect(0.0, 1.0, TOL, |p| math::binom_upper_tail(n, s, p) < half)
    };
    let upper = if s == n {
        1.0
    } else {
        // P_p(X <= s) decreases in p; boundary where it drops to eps/2.
        math::bisect(0.0, 1.0, TOL, |p| math::binom_lower_tail(n, s, p) > half)
    };
    (lower, upper)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
