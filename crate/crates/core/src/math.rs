//! Internal numerics: `libm`-backed transcendentals, log-gamma, regularized
//! incomplete beta, binomial tails, compensated summation, bisection, and
//! adaptive Gauss-Kronrod quadrature.
//!
//! Everything routes through `libm` (never `std` float intrinsics) so the
//! crate produces bit-identical results in `std` and `no_std` builds.

use alloc::vec::Vec;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

// ---------------------------------------------------------------------------
// Log-gamma (Lanczos approximation, g = 7, 9 coefficients)
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`, accurate to ~1e-14 relative.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Reflection keeps the Lanczos argument >= 0.5.
        let pi = core::f64::consts::PI;
        ln(pi / sin(pi * x)) - ln_gamma(1.0 - x)
    } else {
        let z = x - 1.0;
        let mut a = LANCZOS[0];
        for (k, c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (z + k as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        LN_SQRT_2PI + (z + 0.5) * ln(t) - t + ln(a)
    }
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln b(n, p, s)` for the binomial pmf `b(n, p, s) = C(n, s) p^s (1-p)^(n-s)`.
///
/// `p = 0` and `p = 1` are handled exactly (the pmf is an indicator there).
pub fn ln_binom_pmf(n: u64, s: u64, p: f64) -> f64 {
    debug_assert!(s <= n);
    if p <= 0.0 {
        return if s == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if s == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let mut acc = ln_binomial(n, s);
    if s > 0 {
        acc += s as f64 * ln(p);
    }
    if s < n {
        acc += (n - s) as f64 * ln_1p(-p);
    }
    acc
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta and binomial tails
// ---------------------------------------------------------------------------

/// Continued fraction for the incomplete beta (modified Lentz method).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if abs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x` in `[0, 1]`.
pub fn betainc(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * ln(x) + b * ln_1p(-x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - exp(ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + b * ln_1p(-x) + a * ln(x))
            * betacf(b, a, 1.0 - x)
            / b
    }
}

/// `P(X >= s)` for `X ~ Binomial(n, p)`.
pub fn binom_upper_tail(n: u64, s: u64, p: f64) -> f64 {
    if s == 0 {
        return 1.0;
    }
    if s > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    betainc(s as f64, (n - s) as f64 + 1.0, p)
}

/// `P(X <= s)` for `X ~ Binomial(n, p)`.
pub fn binom_lower_tail(n: u64, s: u64, p: f64) -> f64 {
    if s >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    1.0 - binom_upper_tail(n, s + 1, p)
}

/// CDF of Student's t distribution with `nu` degrees of freedom.
pub fn student_t_cdf(x: f64, nu: f64) -> f64 {
    let w = nu / (nu + x * x);
    let half_tail = 0.5 * betainc(0.5 * nu, 0.5, w);
    if x >= 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

// ---------------------------------------------------------------------------
// Compensated summation
// ---------------------------------------------------------------------------

/// Neumaier-compensated accumulator; keeps absolute error near one ulp of the
/// running total regardless of the number of terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// ---------------------------------------------------------------------------
// Bisection
// ---------------------------------------------------------------------------

/// Bisect on `[lo, hi]` for the boundary between a `true` region on the left
/// and a `false` region on the right, to absolute tolerance `tol`.
///
/// Requires `left_of(lo)` and `!left_of(hi)`; returns the interval midpoint.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut left_of: impl FnMut(f64) -> bool) -> f64 {
    debug_assert!(lo <= hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if left_of(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Gauss-Kronrod 15-point rule and adaptive panel refinement
// ---------------------------------------------------------------------------

const XGK15: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_17,
    0.207_784_955_007_898_47,
    0.0,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG7: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// 15-point Gauss-Kronrod estimate of `∫_a^b f` with an error estimate from
/// the embedded 7-point Gauss rule.
pub fn gauss_kronrod_15(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_kronrod = f_center * WGK15[7];
    let mut res_gauss = f_center * WG7[3];
    let mut res_abs = abs(res_kronrod);
    let mut fv = [0.0f64; 15];
    fv[7] = f_center;

    for j in 0..7 {
        let x = half * XGK15[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        let sum = f1 + f2;
        res_kronrod += WGK15[j] * sum;
        res_abs += WGK15[j] * (abs(f1) + abs(f2));
        if j % 2 == 1 {
            // XGK15 odd positions are the embedded Gauss nodes.
            res_gauss += WG7[j / 2] * sum;
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK15[7] * abs(f_center - mean);
    for j in 0..7 {
        res_asc += WGK15[j] * (abs(fv[j] - mean) + abs(fv[14 - j] - mean));
    }

    let result = res_kronrod * half;
    res_abs *= abs(half);
    res_asc *= abs(half);
    let mut err = abs((res_kronrod - res_gauss) * half);
    if res_asc != 0.0 && err != 0.0 {
        let scale = pow(200.0 * err / res_asc, 1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

/// Result of [`adaptive_integral`].
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
    pub converged: bool,
}

/// Adaptive composite Gauss-Kronrod integration over the panels delimited by
/// `breakpoints` (strictly increasing). The panel with the largest error
/// estimate is bisected until the summed estimate drops below
/// `rel_tol * |value|` (or `abs_tol`), or `max_panels` is reached.
pub fn adaptive_integral(
    mut f: impl FnMut(f64) -> f64,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Quadrature {
    debug_assert!(breakpoints.len() >= 2);
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breakpoints.windows(2) {
        let (v, e) = gauss_kronrod_15(&mut f, w[0], w[1]);
        panels.push((w[0], w[1], v, e));
    }
    loop {
        let mut total = CompensatedSum::new();
        let mut err = CompensatedSum::new();
        for p in &panels {
            total.add(p.2);
            err.add(p.3);
        }
        let tol = abs_tol.max(rel_tol * abs(total.value()));
        if err.value() <= tol {
            return Quadrature {
                value: total.value(),
                error_estimate: err.value(),
                panels: panels.len(),
                converged: true,
            };
        }
        if panels.len() >= max_panels {
            return Quadrature {
                value: total.value(),
                error_estimate: err.value(),
                panels: panels.len(),
                converged: false,
            };
        }
        // Deterministic choice: largest error, ties broken by left endpoint.
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.3 > panels[worst].3 || (p.3 == panels[worst].3 && p.0 < panels[worst].0) {
                worst = i;
            }
        }
        let (a, b, _, _) = panels[worst];
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Panel no longer splittable in f64; treat it as converged.
            panels[worst].3 = 0.0;
            continue;
        }
        let (v1, e1) = gauss_kronrod_15(&mut f, a, mid);
        let (v2, e2) = gauss_kronrod_15(&mut f, mid, b);
        panels[worst] = (a, mid, v1, e1);
        panels.push((mid, b, v2, e2));
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
