//! Linear statistics `⟨[Div s_n], φ⟩` by zero summation and by the
//! Poincaré–Lelong integral, and the expectation from the diagonal kernel.

use num_complex::Complex64;

use crate::basis::SectionBasis;
use crate::geometry::{TestForm, WeightModel};
use crate::kernel::KernelEvaluator;
use crate::quadrature::{integrate_disk_adaptive_retrying, AdaptiveConfig, DiskRule};
use crate::sampling::RandomSection;
use crate::zeros::{divisor_pairing, section_divisor};
use crate::{Error, Result};

/// Log-integral settings for the Poincaré–Lelong route.
#[derive(Clone, Copy, Debug)]
pub struct PlConfig {
    pub adaptive: AdaptiveConfig,
    /// Grid rotations tried when a node lands on a zero.
    pub retries: usize,
}

impl Default for PlConfig {
    fn default() -> Self {
        Self {
            adaptive: AdaptiveConfig {
                radial_cells: 12,
                angular_cells: 48,
                order: 6,
                max_level: 3,
                cell_tol: 1e-4,
            },
            retries: 3,
        }
    }
}

/// Smooth disk rule over the support of a form, split at its breakpoints.
fn form_rule(form: &TestForm) -> DiskRule {
    DiskRule::new(form.support_radius(), &form.radial_breakpoints(), 16, 16, 128)
}

/// `n ∫ c₁ φ dA`.
pub fn curvature_term(model: &WeightModel, form: &TestForm, n: u32) -> Result<f64> {
    if form.support_radius() > model.truncation_radius() * (1.0 + 1e-12) {
        return Err(Error::InvalidForm(format!(
            "support radius {} exceeds truncation radius {}",
            form.support_radius(),
            model.truncation_radius()
        )));
    }
    let weight = model.weight();
    Ok(n as f64 * form_rule(form).integrate(|z| weight.chern_density(z) * form.value(z)))
}

/// `∫ψ dA` and `∫|ψ| dA`.
pub fn density_mass(form: &TestForm) -> (f64, f64) {
    let rule = form_rule(form);
    (rule.integrate(|z| form.density(z)), rule.integrate(|z| form.density(z).abs()))
}

/// `∫ψ² dA`.
pub fn density_square_integral(form: &TestForm) -> f64 {
    form_rule(form).integrate(|z| form.density(z).powi(2))
}

/// Both log-integral routes of one section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlOutcome {
    /// `∫ log|s_n|²_{hⁿ} ψ dA + n∫c₁φ dA`.
    pub pl: f64,
    /// `∫ log|α_n|² ψ dA`.
    pub zpsi: f64,
    pub evaluations: usize,
    pub unresolved_cells: usize,
}

/// Evaluates `∫ log|s_n|²ψ` and `∫ log|α_n|²ψ` on the same adaptive grid;
/// `curvature` is [`curvature_term`] for the section's model, form and `n`.
pub fn linear_statistics_pl(sec: &RandomSection<'_>, form: &TestForm, curvature: f64, cfg: &PlConfig) -> Result<PlOutcome> {
    let basis = sec.basis();
    let coeffs = sec.coeffs();
    let mut scratch = Vec::with_capacity(basis.dimension());
    let outcome = integrate_disk_adaptive_retrying(
        form.support_radius(),
        &form.radial_breakpoints(),
        &cfg.adaptive,
        cfg.retries,
        |z: Complex64| {
            let psi = form.density(z);
            let (value, diag) = basis.section_and_diagonal(z, coeffs, &mut scratch);
            let log_s = value.norm_sqr().ln();
            [log_s * psi, (log_s - diag.ln()) * psi]
        },
    )?;
    Ok(PlOutcome {
        pl: outcome.value[0] + curvature,
        zpsi: outcome.value[1],
        evaluations: outcome.evaluations,
        unresolved_cells: outcome.unresolved_cells,
    })
}

/// `∫ log|s_n|²ψ + n∫c₁φ` alone.
pub fn linear_statistic_pl(sec: &RandomSection<'_>, form: &TestForm, cfg: &PlConfig) -> Result<f64> {
    let basis = sec.basis();
    let curvature = curvature_term(basis.model(), form, basis.tensor_power())?;
    Ok(linear_statistics_pl(sec, form, curvature, cfg)?.pl)
}

/// Zero-summation route: `Σ φ(z_k)` over the zeros of the section.
pub fn linear_statistic_zeros(sec: &RandomSection<'_>, form: &TestForm, polish_tol: f64) -> Result<f64> {
    Ok(divisor_pairing(&section_divisor(sec, polish_tol)?, form))
}

/// `E⟨[Div s_n], φ⟩ = ∫ log K_n(x,x) ψ dA + n∫c₁φ dA`; needs `∫ψ = 0`.
pub fn expectation_kernel_route(ev: &KernelEvaluator, form: &TestForm) -> Result<f64> {
    expectation_from_basis(ev.basis(), form)
}

pub fn expectation_from_basis(basis: &SectionBasis, form: &TestForm) -> Result<f64> {
    let (mass, abs) = density_mass(form);
    if mass.abs() > 1e-8 * abs.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidForm(format!(
            "expectation route needs a density with zero integral, got {mass:e}"
        )));
    }
    let curvature = curvature_term(basis.model(), form, basis.tensor_power())?;
    let mut scratch = Vec::new();
    let zero = vec![Complex64::new(0.0, 0.0); basis.dimension()];
    let log_kernel = form_rule(form).integrate(|z| {
        let (_, diag) = basis.section_and_diagonal(z, &zero, &mut scratch);
        diag.ln() * form.density(z)
    });
    Ok(log_kernel + curvature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis_closed_form, QuadratureConfig};
    use crate::zeros::DEFAULT_POLISH_TOL;

    fn setup(n: u32, degree: usize) -> (SectionBasis, TestForm) {
        let model = WeightModel::bargmann_fock(1.0).unwrap();
        (
            build_basis_closed_form(&model, n, degree, &QuadratureConfig::default()).unwrap(),
            TestForm::poly_bump(1.0).unwrap(),
        )
    }

    #[test]
    fn nonvanishing_section_has_zero_statistic() {
        let (basis, form) = setup(20, 60);
        let e0 = RandomSection::unit(&basis, 0).unwrap();
        assert!(linear_statistic_pl(&e0, &form, &PlConfig::default()).unwrap().abs() <= 1e-3);
        assert_eq!(linear_statistic_zeros(&e0, &form, DEFAULT_POLISH_TOL).unwrap(), 0.0);
    }

    #[test]
    fn single_zero_at_origin() {
        let (basis, form) = setup(20, 60);
        let e1 = RandomSection::unit(&basis, 1).unwrap();
        let pl = linear_statistic_pl(&e1, &form, &PlConfig::default()).unwrap();
        assert!((pl - form.value(Complex64::new(0.0, 0.0))).abs() <= 1e-3, "{pl}");
        assert!((linear_statistic_zeros(&e1, &form, DEFAULT_POLISH_TOL).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bargmann_fock_expectation_is_linear_in_n() {
        let form = TestForm::poly_bump(1.0).unwrap();
        let model = WeightModel::bargmann_fock(1.0).unwrap();
        let quad = QuadratureConfig::default();
        // ∫(1 − r²)⁴ dA = π/5
        let e50 = expectation_from_basis(&build_basis_closed_form(&model, 50, 140, &quad).unwrap(), &form).unwrap();
        let e100 = expectation_from_basis(&build_basis_closed_form(&model, 100, 220, &quad).unwrap(), &form).unwrap();
        assert!((e50 - 10.0).abs() < 1e-8, "{e50}");
        assert!((e100 - 2.0 * e50).abs() < 1e-8);
    }

    #[test]
    fn expectation_rejects_forms_with_mass() {
        let (basis, _) = setup(10, 30);
        let form = TestForm::custom("bowl", |z: Complex64| z.norm_sqr(), |_| 4.0, 0.8).unwrap();
        assert!(matches!(expectation_from_basis(&basis, &form), Err(Error::InvalidForm(_))));
    }
}
