//! Bergman kernel of a truncated section space, its normalized form and the
//! near/off-diagonal asymptotics checks.
//!
//! Everything is computed in the unitary frame: `v_j(x) = f_j(x) e^{-nφ(x)/2}`,
//! so `K_n(x,y)` in weighted norm is `Σ_j v_j(x) conj(v_j(y))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::SectionBasis;
use crate::geometry::WeightModel;
use crate::quadrature::CompensatedSum;
use crate::{Error, Result};

/// Values of all basis elements at one point, with the diagonal kernel.
#[derive(Clone, Debug)]
pub struct KernelPoint {
    pub x: Complex64,
    pub values: Vec<Complex64>,
    pub diag: f64,
}

#[derive(Clone, Debug)]
pub struct KernelEvaluator {
    basis: SectionBasis,
}

impl KernelEvaluator {
    pub fn new(basis: SectionBasis) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &SectionBasis {
        &self.basis
    }

    pub fn model(&self) -> &WeightModel {
        self.basis.model()
    }

    pub fn tensor_power(&self) -> u32 {
        self.basis.tensor_power()
    }

    fn check_domain(&self, x: Complex64) -> Result<()> {
        self.model().curvature_eigenvalue(x).map(|_| ())
    }

    pub fn point(&self, x: Complex64) -> Result<KernelPoint> {
        self.check_domain(x)?;
        let values = self.basis.weighted_values(x);
        let diag = values.iter().map(|v| v.norm_sqr()).sum();
        Ok(KernelPoint { x, values, diag })
    }

    /// `Σ_j v_j(x) conj(v_j(y))`.
    pub fn kernel_at(&self, a: &KernelPoint, b: &KernelPoint) -> Complex64 {
        a.values.iter().zip(&b.values).map(|(u, v)| u * v.conj()).sum()
    }

    /// `|K_n(x,y)|` in the weighted norm.
    pub fn kernel_weighted_magnitude(&self, x: Complex64, y: Complex64) -> Result<f64> {
        Ok(self.kernel_at(&self.point(x)?, &self.point(y)?).norm())
    }

    /// `K_n(x,x) = Σ_j |f_j(x)|² e^{-nφ(x)}`.
    pub fn bergman_diag(&self, x: Complex64) -> Result<f64> {
        Ok(self.point(x)?.diag)
    }

    /// `Γ_n` from precomputed points.
    pub fn gamma(&self, a: &KernelPoint, b: &KernelPoint) -> Result<f64> {
        let g = self.kernel_at(a, b).norm() / (a.diag * b.diag).sqrt();
        if g > 1.0 + 1e-9 {
            return Err(Error::InvariantViolation(format!(
                "normalized kernel {g} exceeds 1 at ({}, {})",
                a.x, b.x
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("normalized kernel at ({}, {})", a.x, b.x)));
        }
        Ok(g.min(1.0))
    }

    /// `Γ_n(x,y) = |K_n(x,y)|/√(K_n(x,x) K_n(y,y))`.
    pub fn normalized_kernel(&self, x: Complex64, y: Complex64) -> Result<f64> {
        self.gamma(&self.point(x)?, &self.point(y)?)
    }

    /// Covariance `β_n(x,y)` of the normalized process.
    pub fn covariance(&self, x: Complex64, y: Complex64) -> Result<Complex64> {
        let (a, b) = (self.point(x)?, self.point(y)?);
        Ok(self.kernel_at(&a, &b) / (a.diag * b.diag).sqrt())
    }

    /// `f̂_j(x) = v_j(x)/√K_n(x,x)`.
    pub fn normalized_values(&self, x: Complex64) -> Result<Vec<Complex64>> {
        let p = self.point(x)?;
        let s = p.diag.sqrt();
        Ok(p.values.into_iter().map(|v| v / s).collect())
    }
}

/// Split radius `b₀√(log n/n)` separating near- and off-diagonal regimes.
pub fn split_radius(n: u32, b0: f64) -> f64 {
    let nf = n as f64;
    b0 * (nf.ln() / nf).sqrt()
}

/// Checks `b₀ > √(16k/ε)` and `b₀√(log n/n) ≤ 2ε₀` with `ε₀ = R/4`, and
/// returns the split radius.
pub fn asymptotics_precondition(model: &WeightModel, n: u32, b0: f64, k: u32) -> Result<f64> {
    let floor = (16.0 * k as f64 / model.curvature_floor()).sqrt();
    if !(b0 > floor) {
        return Err(Error::Config(format!("asym.b0 = {b0} must exceed sqrt(16k/eps) = {floor:.6}")));
    }
    let limit = 0.5 * model.truncation_radius();
    let r = split_radius(n, b0);
    if r > limit {
        let minimal_n = (3u32..).find(|&m| split_radius(m, b0) <= limit).unwrap_or(u32::MAX);
        return Err(Error::InsufficientN { n, minimal_n });
    }
    Ok(r)
}

/// Sampling plan for [`asymptotics_report`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticsGrid {
    /// Base points `x` and off-diagonal points `y` stay in this disk.
    pub region_radius: f64,
    pub base_rings: usize,
    pub base_angles: usize,
    /// Rays and samples per ray for the near-diagonal fit.
    pub rays: usize,
    pub steps: usize,
    /// Rays and samples per ray for the off-diagonal maximum.
    pub far_rays: usize,
    pub far_steps: usize,
}

impl AsymptoticsGrid {
    pub fn new(region_radius: f64) -> Self {
        Self {
            region_radius,
            base_rings: 4,
            base_angles: 8,
            rays: 8,
            steps: 12,
            far_rays: 16,
            far_steps: 24,
        }
    }

    /// Radius the basis must be accurate on.
    pub fn reach(&self, split: f64) -> f64 {
        self.region_radius + split
    }

    fn base_points(&self) -> Vec<Complex64> {
        let mut pts = vec![Complex64::new(0.0, 0.0)];
        for i in 1..=self.base_rings {
            let r = self.region_radius * i as f64 / self.base_rings as f64;
            for j in 0..self.base_angles {
                let t = 2.0 * PI * (j as f64 + 0.25 * i as f64) / self.base_angles as f64;
                pts.push(Complex64::from_polar(r, t));
            }
        }
        pts
    }
}

/// Result of the near-diagonal fit and off-diagonal bound at one `n`.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub n: u32,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub offdiag_max_scaled: f64,
    pub b0: f64,
    pub k: u32,
    pub split_radius: f64,
    pub degree: usize,
    pub fit_points: usize,
    /// `(Ψ², −4 log Γ_n/n)` pairs used in the fit.
    #[serde(skip)]
    pub plot: Vec<(f64, f64)>,
}

/// Distance from `x` to the boundary of the disk `|z| ≤ a` along direction
/// `e^{iθ}`, for `|x| ≤ a`.
pub fn chord_length(x: Complex64, theta: f64, a: f64) -> f64 {
    let b = (x.conj() * Complex64::from_polar(1.0, theta)).re;
    let disc = b * b + a * a - x.norm_sqr();
    (-b + disc.max(0.0).sqrt()).max(0.0)
}

/// Least squares line `y = slope·x + intercept` with its `R²`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).collect::<CompensatedSum>().value() / m;
    let my = points.iter().map(|p| p.1).collect::<CompensatedSum>().value() / m;
    let sxx = points.iter().map(|p| (p.0 - mx).powi(2)).collect::<CompensatedSum>().value();
    let sxy = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).collect::<CompensatedSum>().value();
    let syy = points.iter().map(|p| (p.1 - my).powi(2)).collect::<CompensatedSum>().value();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Near-diagonal regression of `−4 log Γ_n(x, x+u)/n` against `Ψ_x(0,u)²`
/// over `|u| ≤ b₀√(log n/n)`, and the maximum of `Γ_n(x,y) n^k` over
/// `|x − y| ≥ b₀√(log n/n)` inside the region.
pub fn asymptotics_report(ev: &KernelEvaluator, b0: f64, k: u32, grid: &AsymptoticsGrid) -> Result<AsymptoticsReport> {
    let model = ev.model();
    let n = ev.tensor_power();
    let split = asymptotics_precondition(model, n, b0, k)?;
    if grid.reach(split) > model.truncation_radius() * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "region radius {} plus split radius {split:.4} exceeds the truncation radius {}",
            grid.region_radius,
            model.truncation_radius()
        )));
    }
    let nf = n as f64;
    let scale = nf.powi(k as i32);
    let bases = grid.base_points();

    let per_base: Vec<Result<(Vec<(f64, f64)>, f64)>> = bases
        .par_iter()
        .map(|&x| {
            let px = ev.point(x)?;
            let kappa = model.curvature_eigenvalue(x)?;
            let mut near = vec![(0.0, -4.0 * ev.gamma(&px, &px)?.ln() / nf)];
            for r in 0..grid.rays {
                let dir = Complex64::from_polar(1.0, 2.0 * PI * r as f64 / grid.rays as f64);
                for s in 1..=grid.steps {
                    let u = dir * (split * s as f64 / grid.steps as f64);
                    let g = ev.gamma(&px, &ev.point(x + u)?)?;
                    if g > 0.0 {
                        near.push((kappa * u.norm_sqr(), -4.0 * g.ln() / nf));
                    }
                }
            }
            let mut far = 0.0f64;
            for r in 0..grid.far_rays {
                let theta = 2.0 * PI * (r as f64 + 0.5) / grid.far_rays as f64;
                let reach = chord_length(x, theta, grid.region_radius);
                if reach < split {
                    continue;
                }
                for s in 0..grid.far_steps {
                    let d = split + (reach - split) * s as f64 / (grid.far_steps - 1).max(1) as f64;
                    let y = x + Complex64::from_polar(d, theta);
                    far = far.max(ev.gamma(&px, &ev.point(y)?)? * scale);
                }
            }
            Ok((near, far))
        })
        .collect();

    let mut plot = Vec::new();
    let mut far = 0.0f64;
    for item in per_base {
        let (near, f) = item?;
        plot.extend(near);
        far = far.max(f);
    }
    let (slope, intercept, r2) = linear_fit(&plot);
    Ok(AsymptoticsReport {
        n,
        slope,
        intercept,
        r2,
        offdiag_max_scaled: far,
        b0,
        k,
        split_radius: split,
        degree: ev.basis().degree(),
        fit_points: plot.len(),
        plot,
    })
}
