//! Flat weighted model geometries over ℂ and compactly supported test forms.
//!
//! A model is a potential `φ` on ℂ defining the metric `h = e^{-φ}` on the
//! trivial line bundle, so a section `f` of the n-th tensor power has
//! pointwise norm `|f(z)|² e^{-nφ(z)}`. The ambient metric is Euclidean:
//! the exponential map is translation and the volume form is Lebesgue
//! measure.
//!
//! Normalizations used throughout the crate:
//!
//! * `dd^c = (√−1/2π)∂∂̄` acting on functions equals `(Δ/4π)·Lebesgue`;
//! * the curvature eigenvalue is `κ = Δφ/2`, so the Bargmann–Fock weight
//!   `|z|²` has `κ ≡ 2` and its normalized kernel `e^{-n|z-w|²/2}` equals
//!   `exp(-n/4·Ψ²)` with `Ψ² = κ|z-w|²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::{Error, Result};

/// Resolution of the polar grid used to check the curvature floor and to
/// bound the curvature on the disk.
pub const CURVATURE_GRID: usize = 200;

type ScalarField = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;

/// A potential registered in code, together with its Laplacian.
#[derive(Clone)]
pub struct CustomWeight {
    name: String,
    potential: ScalarField,
    laplacian: ScalarField,
    radial: bool,
}

impl CustomWeight {
    /// `radial` asserts that the potential depends on `|z|` only; the basis
    /// builder then skips the angular Fourier analysis.
    pub fn new<P, L>(name: impl Into<String>, potential: P, laplacian: L, radial: bool) -> Self
    where
        P: Fn(Complex64) -> f64 + Send + Sync + 'static,
        L: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            potential: Arc::new(potential),
            laplacian: Arc::new(laplacian),
            radial,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomWeight")
            .field("name", &self.name)
            .field("radial", &self.radial)
            .finish()
    }
}

/// The potential `φ` of the Hermitian metric `h = e^{-φ}`.
#[derive(Clone, Debug)]
pub enum Weight {
    /// `φ(z) = |z|²`.
    BargmannFock,
    /// `φ(z) = Σ_k c_k |z|^{2k}`, coefficients listed from `k = 0`.
    RadialPolynomial(Vec<f64>),
    Custom(CustomWeight),
}

impl Weight {
    pub fn potential(&self, z: Complex64) -> f64 {
        match self {
            Weight::BargmannFock => z.norm_sqr(),
            Weight::RadialPolynomial(c) => {
                let s = z.norm_sqr();
                c.iter().rev().fold(0.0, |acc, &ck| acc * s + ck)
            }
            Weight::Custom(w) => (w.potential)(z),
        }
    }

    /// Euclidean Laplacian `Δφ`.
    pub fn laplacian(&self, z: Complex64) -> f64 {
        match self {
            Weight::BargmannFock => 4.0,
            Weight::RadialPolynomial(c) => {
                // Δ|z|^{2k} = 4k²|z|^{2k-2}
                let s = z.norm_sqr();
                c.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &ck)| acc * s + 4.0 * (k * k) as f64 * ck)
            }
            Weight::Custom(w) => (w.laplacian)(z),
        }
    }

    pub fn is_radial(&self) -> bool {
        match self {
            Weight::BargmannFock | Weight::RadialPolynomial(_) => true,
            Weight::Custom(w) => w.radial,
        }
    }

    /// `κ = Δφ/2`, the single curvature eigenvalue in dimension one.
    pub fn curvature_eigenvalue(&self, z: Complex64) -> f64 {
        0.5 * self.laplacian(z)
    }

    /// Density of the first Chern form `c₁(L, h)` against Lebesgue measure.
    pub fn chern_density(&self, z: Complex64) -> f64 {
        self.laplacian(z) / (4.0 * PI)
    }

    pub fn label(&self) -> String {
        match self {
            Weight::BargmannFock => "bargmann_fock".into(),
            Weight::RadialPolynomial(c) => format!("radial_polynomial{c:?}"),
            Weight::Custom(w) => format!("custom:{}", w.name),
        }
    }
}

/// Points of the closed disk of radius `radius` on a `CURVATURE_GRID`²
/// polar grid (radii include both the center and the boundary circle).
fn polar_check_grid(radius: f64) -> impl Iterator<Item = Complex64> {
    let m = CURVATURE_GRID;
    (0..m).flat_map(move |i| {
        let r = radius * i as f64 / (m - 1) as f64;
        let count = if i == 0 { 1 } else { m };
        (0..count).map(move |j| Complex64::from_polar(r, 2.0 * PI * j as f64 / m as f64))
    })
}

/// A weight restricted to the closed disk where experiments take place,
/// with a certified lower bound on its curvature.
#[derive(Clone, Debug)]
pub struct WeightModel {
    weight: Weight,
    curvature_floor: f64,
    truncation_radius: f64,
    curvature_min: f64,
    curvature_max: f64,
}

impl WeightModel {
    /// Validates the curvature floor `κ ≥ ε > 0` on a polar grid of the disk.
    pub fn new(weight: Weight, curvature_floor: f64, truncation_radius: f64) -> Result<Self> {
        if !(curvature_floor > 0.0 && curvature_floor.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "curvature floor must be positive, got {curvature_floor}"
            )));
        }
        if !(truncation_radius > 0.0 && truncation_radius.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "truncation radius must be positive, got {truncation_radius}"
            )));
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for z in polar_check_grid(truncation_radius) {
            let kappa = weight.curvature_eigenvalue(z);
            let phi = weight.potential(z);
            if !kappa.is_finite() || !phi.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "weight is not finite at {z}"
                )));
            }
            if kappa < curvature_floor {
                return Err(Error::DegenerateCurvature {
                    point: z,
                    value: kappa,
                    floor: curvature_floor,
                });
            }
            lo = lo.min(kappa);
            hi = hi.max(kappa);
        }
        Ok(Self {
            weight,
            curvature_floor,
            truncation_radius,
            curvature_min: lo,
            curvature_max: hi,
        })
    }

    pub fn bargmann_fock(truncation_radius: f64) -> Result<Self> {
        Self::new(Weight::BargmannFock, 2.0, truncation_radius)
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn curvature_floor(&self) -> f64 {
        self.curvature_floor
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn is_bargmann_fock(&self) -> bool {
        matches!(self.weight, Weight::BargmannFock)
    }

    fn check_domain(&self, x: Complex64) -> Result<()> {
        // a relative slack keeps boundary points computed in floating point inside
        if x.norm() > self.truncation_radius * (1.0 + 1e-12) {
            Err(Error::Domain {
                point: x,
                radius: self.truncation_radius,
            })
        } else {
            Ok(())
        }
    }

    pub fn potential(&self, x: Complex64) -> f64 {
        self.weight.potential(x)
    }

    pub fn curvature_eigenvalue(&self, x: Complex64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.weight.curvature_eigenvalue(x))
    }

    /// `Ψ_x(u, u2)² = κ(x)·|u − u2|²`.
    pub fn weighted_distance_sq(&self, x: Complex64, u: Complex64, u2: Complex64) -> Result<f64> {
        self.check_domain(x)?;
        self.check_domain(u)?;
        self.check_domain(u2)?;
        Ok(self.weight.curvature_eigenvalue(x) * (u - u2).norm_sqr())
    }

    /// `D₁` with `D₁·|u − u2| ≥ Ψ_x(u, u2) ≥ |u − u2|/D₁` on the disk.
    pub fn distance_comparison_constant(&self) -> f64 {
        self.curvature_max.sqrt().max(1.0 / self.curvature_min.sqrt())
    }

    /// Smallest and largest curvature eigenvalue seen on the check grid.
    pub fn curvature_range(&self) -> (f64, f64) {
        (self.curvature_min, self.curvature_max)
    }

    pub fn chern_density(&self, x: Complex64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.weight.chern_density(x))
    }
}

#[derive(Clone)]
enum FormShape {
    /// `(1 − |z|²/a²)⁴` inside the disk of radius `a`.
    PolyBump,
    /// Equal to one on `|z| ≤ inner`, a degree-7 smoothstep down to zero at
    /// `|z| = support`.
    PlateauBump { inner: f64 },
    Custom {
        name: String,
        value: ScalarField,
        laplacian: ScalarField,
    },
}

/// A real test function with compact support in a disk centred at the
/// origin, together with its Laplacian.
#[derive(Clone)]
pub struct TestForm {
    shape: FormShape,
    support_radius: f64,
}

impl fmt::Debug for TestForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestForm")
            .field("kind", &self.label())
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

/// Smootherstep with three vanishing derivatives at both ends.
fn smoothstep7(t: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = t3 * t * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t3);
    let ds = 140.0 * t3 * (1.0 - t).powi(3);
    let d2s = 420.0 * t2 * (1.0 - t).powi(2) * (1.0 - 2.0 * t);
    (s, ds, d2s)
}

impl TestForm {
    pub fn poly_bump(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidForm(format!("bump radius must be positive, got {radius}")));
        }
        Ok(Self {
            shape: FormShape::PolyBump,
            support_radius: radius,
        })
    }

    pub fn plateau_bump(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::InvalidForm(format!(
                "plateau radii must satisfy 0 < inner < outer, got {inner}, {outer}"
            )));
        }
        Ok(Self {
            shape: FormShape::PlateauBump { inner },
            support_radius: outer,
        })
    }

    /// A code-level test form. `value` is evaluated only inside the support
    /// disk and the form is zero outside it. Rejects forms whose Laplacian
    /// vanishes on a sampling grid of the support.
    pub fn custom<V, L>(name: impl Into<String>, value: V, laplacian: L, support_radius: f64) -> Result<Self>
    where
        V: Fn(Complex64) -> f64 + Send + Sync + 'static,
        L: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(Error::InvalidForm(format!(
                "support radius must be positive, got {support_radius}"
            )));
        }
        let form = Self {
            shape: FormShape::Custom {
                name: name.into(),
                value: Arc::new(value),
                laplacian: Arc::new(laplacian),
            },
            support_radius,
        };
        let nontrivial = (0..64).any(|i| {
            let r = support_radius * (i as f64 + 0.5) / 64.0;
            (0..16).any(|j| {
                let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / 16.0);
                form.laplacian(z) != 0.0
            })
        });
        if !nontrivial {
            return Err(Error::InvalidForm("dd^c of the test form vanishes identically".into()));
        }
        Ok(form)
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn label(&self) -> String {
        match &self.shape {
            FormShape::PolyBump => format!("poly_bump(radius={})", self.support_radius),
            FormShape::PlateauBump { inner } => {
                format!("plateau_bump(inner={inner}, outer={})", self.support_radius)
            }
            FormShape::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    /// Radii where the form is only finitely smooth; quadrature panels are
    /// aligned with them.
    pub fn radial_breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            FormShape::PlateauBump { inner } => vec![*inner],
            _ => Vec::new(),
        }
    }

    pub fn value(&self, z: Complex64) -> f64 {
        let r = z.norm();
        if r >= self.support_radius {
            return 0.0;
        }
        match &self.shape {
            FormShape::PolyBump => {
                let t = r * r / (self.support_radius * self.support_radius);
                (1.0 - t).powi(4)
            }
            FormShape::PlateauBump { inner } => {
                if r <= *inner {
                    1.0
                } else {
                    let t = (r - inner) / (self.support_radius - inner);
                    1.0 - smoothstep7(t).0
                }
            }
            FormShape::Custom { value, .. } => value(z),
        }
    }

    /// Euclidean Laplacian of the form.
    pub fn laplacian(&self, z: Complex64) -> f64 {
        let r = z.norm();
        if r >= self.support_radius {
            return 0.0;
        }
        match &self.shape {
            FormShape::PolyBump => {
                let a2 = self.support_radius * self.support_radius;
                let t = r * r / a2;
                16.0 / a2 * (1.0 - t).powi(2) * (4.0 * t - 1.0)
            }
            FormShape::PlateauBump { inner } => {
                if r <= *inner {
                    0.0
                } else {
                    let w = self.support_radius - inner;
                    let (_, ds, d2s) = smoothstep7((r - inner) / w);
                    -(d2s / (w * w) + ds / (w * r))
                }
            }
            FormShape::Custom { laplacian, .. } => laplacian(z),
        }
    }

    /// `ψ = Δφ/(4π)`, the density of `dd^c φ` against Lebesgue measure.
    pub fn density(&self, z: Complex64) -> f64 {
        self.laplacian(z) / (4.0 * PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bargmann_fock_curvature_is_two() {
        let m = WeightModel::bargmann_fock(2.0).unwrap();
        assert_eq!(m.curvature_eigenvalue(c(0.0, 0.0)).unwrap(), 2.0);
        assert_eq!(m.curvature_eigenvalue(c(1.0, 1.0)).unwrap(), 2.0);
    }

    #[test]
    fn quartic_curvature_at_one() {
        // Δ|z|⁴ = 16|z|², so κ(1) = 8
        let w = Weight::RadialPolynomial(vec![0.0, 0.0, 1.0]);
        assert!((w.curvature_eigenvalue(c(1.0, 0.0)) - 8.0).abs() < 1e-14);
        assert!((w.curvature_eigenvalue(c(0.0, 0.5)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quartic_weight_is_rejected_by_curvature_floor() {
        let err = WeightModel::new(Weight::RadialPolynomial(vec![0.0, 0.0, 1.0]), 0.1, 1.0);
        assert!(matches!(err, Err(Error::DegenerateCurvature { .. })));
        assert!(WeightModel::new(Weight::BargmannFock, 0.0, 1.0).is_err());
        assert!(WeightModel::new(Weight::BargmannFock, 2.5, 1.0).is_err());
    }

    #[test]
    fn point_outside_disk_is_domain_error() {
        let m = WeightModel::bargmann_fock(1.0).unwrap();
        assert!(matches!(
            m.curvature_eigenvalue(c(1.0, 1.0)),
            Err(Error::Domain { .. })
        ));
        assert!(m.chern_density(c(2.0, 0.0)).is_err());
    }

    #[test]
    fn weighted_distance_examples() {
        let m = WeightModel::bargmann_fock(2.0).unwrap();
        let zero = c(0.0, 0.0);
        let d = m.weighted_distance_sq(zero, zero, c(0.3, 0.0)).unwrap();
        assert!((d - 0.18).abs() < 1e-15);
        let u = c(0.2, -0.7);
        assert_eq!(m.weighted_distance_sq(c(0.5, 0.5), u, u).unwrap(), 0.0);
        let v = c(-0.4, 0.1);
        assert_eq!(
            m.weighted_distance_sq(zero, u, v).unwrap(),
            m.weighted_distance_sq(zero, v, u).unwrap()
        );
    }

    #[test]
    fn comparison_constant_examples() {
        let m = WeightModel::bargmann_fock(2.0).unwrap();
        assert!((m.distance_comparison_constant() - 2f64.sqrt()).abs() < 1e-15);
        // κ ≡ 1
        let unit = WeightModel::new(Weight::RadialPolynomial(vec![0.0, 0.5]), 1.0, 1.0).unwrap();
        assert!((unit.distance_comparison_constant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chern_density_examples() {
        let m = WeightModel::bargmann_fock(2.0).unwrap();
        assert!((m.chern_density(c(0.3, -1.2)).unwrap() - 1.0 / PI).abs() < 1e-16);
        assert_eq!(Weight::RadialPolynomial(vec![0.0]).chern_density(c(0.5, 0.5)), 0.0);
        // n·∫_{|z|<1} c₁ = n
        let n = 50.0;
        let integral = n * m.chern_density(c(0.0, 0.0)).unwrap() * PI;
        assert!((integral - 50.0).abs() < 1e-12);
    }

    #[test]
    fn test_form_density_of_quadratic_is_one_over_pi() {
        let form = TestForm::custom("quadratic", |z| z.norm_sqr(), |_| 4.0, 1.0).unwrap();
        assert!((form.density(c(0.2, 0.3)) - 1.0 / PI).abs() < 1e-16);
        assert_eq!(form.density(c(1.5, 0.0)), 0.0);
        assert_eq!(form.value(c(0.0, 1.2)), 0.0);
    }

    #[test]
    fn unit_bump_density_matches_extrapolated_laplacian() {
        // the unit bump has fourth derivatives near 300, so the plain
        // five-point stencil at h = 1e-3 is only good to ~2e-6; one
        // Richardson step removes the h² term
        let form = TestForm::poly_bump(1.0).unwrap();
        let lap = |z: Complex64, h: f64| {
            let f = |w: Complex64| form.value(w) / (4.0 * PI);
            (f(z + h) + f(z - h) + f(z + c(0.0, h)) + f(z - c(0.0, h)) - 4.0 * f(z)) / (h * h)
        };
        for i in -9..=9 {
            for j in -9..=9 {
                let z = c(0.1 * i as f64, 0.1 * j as f64);
                if z.norm() > 0.99 {
                    continue;
                }
                let rich = (4.0 * lap(z, 1e-3) - lap(z, 2e-3)) / 3.0;
                assert!((rich - form.density(z)).abs() < 1e-6, "at {z}");
            }
        }
    }

    #[test]
    fn trivial_custom_form_rejected() {
        assert!(TestForm::custom("flat", |_| 1.0, |_| 0.0, 1.0).is_err());
    }

    #[test]
    fn builtin_forms_vanish_outside_support() {
        let a = TestForm::poly_bump(0.8).unwrap();
        let b = TestForm::plateau_bump(0.4, 0.9).unwrap();
        for z in [c(0.9, 0.0), c(0.0, -0.95), c(3.0, 3.0)] {
            assert_eq!(a.value(z), 0.0);
            assert_eq!(a.density(z), 0.0);
            assert_eq!(b.value(z), 0.0);
            assert_eq!(b.density(z), 0.0);
        }
        assert_eq!(b.value(c(0.1, 0.1)), 1.0);
        assert_eq!(a.value(c(0.0, 0.0)), 1.0);
    }

    #[test]
    fn density_matches_five_point_laplacian() {
        let h = 1e-3;
        let forms = [
            TestForm::poly_bump(2.0).unwrap(),
            TestForm::plateau_bump(0.5, 2.5).unwrap(),
        ];
        for form in &forms {
            for i in -12..=12 {
                for j in -12..=12 {
                    let z = c(0.2 * i as f64, 0.2 * j as f64);
                    if z.norm() > form.support_radius() - 2.0 * h {
                        continue;
                    }
                    let f = |w: Complex64| form.value(w) / (4.0 * PI);
                    let fd = (f(z + h) + f(z - h) + f(z + c(0.0, h)) + f(z - c(0.0, h)) - 4.0 * f(z))
                        / (h * h);
                    assert!(
                        (fd - form.density(z)).abs() < 1e-6,
                        "{}: at {z} fd {fd} vs {}",
                        form.label(),
                        form.density(z)
                    );
                }
            }
        }
    }
}
