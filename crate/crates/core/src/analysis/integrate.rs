//! Mixture-weighted integrals of per-rate curves.
//!
//! Effort curves and floors are functions of the true rate; summarising
//! a study means integrating them against a density of rates. The
//! integrands are expensive (each evaluation can be a full forward
//! pass), so panels are seeded at every known kink: bucket endpoints
//! passed by the caller, the density's own breakpoints, and a geometric
//! ladder toward zero where both the curves and the densities move
//! fastest. Adaptive bisection then spends evaluations only where the
//! error estimate says they matter.

use alloc::vec::Vec;

use crate::math::{self, Quadrature};

use super::AnalysisError;

/// Rate densities on `[0, 1]` used to weight per-rate curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Density {
    Uniform,
    /// Half-weight uniform background plus a ten-fold plateau on
    /// `[0, 0.05]`: a population where a twentieth of the mass holds
    /// all the enrichment. Integrates to one.
    Spiked,
    /// `Beta(1/2, 25)`: mass piled against zero with an integrable
    /// singularity there; a population of mostly strong effects.
    Beta,
}

impl Density {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform => 1.0,
            Self::Spiked => {
                if x <= 0.05 {
                    10.5
                } else {
                    0.5
                }
            }
            Self::Beta => {
                let ln_b = math::ln_gamma(0.5) + math::ln_gamma(25.0) - math::ln_gamma(25.5);
                math::exp(-0.5 * math::ln(x) + 24.0 * math::ln_1p(-x) - ln_b)
            }
        }
    }

    /// Points where the density itself is kinked or steep.
    fn breakpoints(&self) -> &'static [f64] {
        match self {
            Self::Uniform => &[],
            Self::Spiked => &[0.05],
            Self::Beta => &[1e-10, 1e-9],
        }
    }
}

/// Integrates `f(x) * pdf(x)` over `[0, 1]`.
///
/// `kinks` should list where `f` changes character (bucket endpoints);
/// a decade ladder down to `1e-8` is always included. Fails with
/// [`AnalysisError::NotConverged`] if the error estimate is still above
/// twice the requested relative tolerance when `max_panels` is spent.
pub fn integrate(
    f: &mut dyn FnMut(f64) -> f64,
    density: Density,
    kinks: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quadrature, AnalysisError> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) || max_panels < 2 {
        return Err(AnalysisError::InvalidParams);
    }
    let mut bps: Vec<f64> = Vec::new();
    bps.push(0.0);
    bps.push(1.0);
    for i in -8..0 {
        bps.push(math::pow(10.0, i as f64));
    }
    bps.extend_from_slice(density.breakpoints());
    bps.extend(kinks.iter().copied().filter(|x| x.is_finite()));
    bps.retain(|&x| (0.0..=1.0).contains(&x));
    bps.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    let q = math::adaptive_integral(
        |x| f(x) * density.pdf(x),
        &bps,
        rel_tol,
        1e-12,
        max_panels,
    );
    if q.error_estimate > 2.0 * rel_tol * math::abs(q.value) + 1e-12 {
        return Err(AnalysisError::NotConverged { value: q.value, error: q.error_estimate });
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_density_integrates_to_one() {
        for d in [Density::Uniform, Density::Spiked, Density::Beta] {
            let q = integrate(&mut |_| 1.0, d, &[], 1e-3, 400).unwrap();
            assert!((q.value - 1.0).abs() < 5e-3, "{d:?} mass {}", q.value);
        }
    }

    #[test]
    fn first_moments_match_closed_forms() {
        let q = integrate(&mut |x| x, Density::Uniform, &[], 1e-6, 400).unwrap();
        assert!((q.value - 0.5).abs() < 1e-9);
        // Half-uniform contributes 1/4; the plateau adds 10 * 0.05^2 / 2.
        let q = integrate(&mut |x| x, Density::Spiked, &[], 1e-6, 400).unwrap();
        assert!((q.value - 0.2625).abs() < 1e-7);
        // Mean of Beta(a, b) is a / (a + b).
        let q = integrate(&mut |x| x, Density::Beta, &[], 1e-6, 400).unwrap();
        assert!((q.value - 0.5 / 25.5).abs() < 1e-6, "got {}", q.value);
    }

    #[test]
    fn caller_kinks_are_honored() {
        // A step that no default breakpoint matches: with the kink
        // declared the integral is exact at machine level.
        let mut f = |x: f64| if x <= 0.3137 { 2.0 } else { 1.0 };
        let q = integrate(&mut f, Density::Uniform, &[0.3137], 1e-9, 400).unwrap();
        assert!((q.value - 1.3137).abs() < 1e-12);
    }

    #[test]
    fn starved_budgets_report_failure_instead_of_a_wrong_value() {
        // Same step, no kink hint, and far too few panels to find it.
        let mut f = |x: f64| if x <= 0.3137 { 2.0 } else { 1.0 };
        let err = integrate(&mut f, Density::Uniform, &[], 1e-9, 12);
        assert!(matches!(err, Err(AnalysisError::NotConverged { .. })));
    }
}
