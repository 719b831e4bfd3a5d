//! Orthonormal bases of the weighted spaces of holomorphic sections.
//!
//! Sections of the n-th tensor power are polynomials `f` with norm
//! `∫ |f|² e^{-nφ} dA`. The space is infinite dimensional; a basis is
//! truncated to the monomials `1, z, …, z^D`, with `D` picked by
//! [`truncation_degree`] so that the diagonal kernel is accurate on the disk
//! where experiments run.
//!
//! A basis is stored as the log-norms `ln ‖z^k‖` together with the inverse
//! Cholesky factor `T` of the normalized monomial Gram matrix, so that
//! `f_j = Σ_k T[j][k] z^k/‖z^k‖`. For radial weights the monomials are
//! already orthogonal and `T` is the identity. Point values are produced
//! through a scaled recurrence that never forms `z^k` or `e^{-nφ}` on its
//! own, which keeps them finite for large `n` and `D`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::geometry::{Weight, WeightModel};
use crate::quadrature::{composite_nodes, CompensatedSum, GaussLegendre};
use crate::{Error, Result};

/// Hard cap on basis degrees.
pub const DEFAULT_MAX_DEGREE: usize = 4096;

/// Resolution of the weighted inner product quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    /// Total number of radial Gauss–Legendre nodes on `[0, R_quad]`.
    pub radial_nodes: usize,
    /// Gauss–Legendre order of each radial panel.
    pub radial_order: usize,
    /// Minimal number of angular trapezoid nodes; at least `4D + 8` are used.
    pub angular_nodes: usize,
    /// `R_quad` is placed where the heaviest integrand has dropped by this
    /// many e-folds below its peak.
    pub tail_log_margin: f64,
    /// Allowed relative change between the configured resolution and a
    /// doubled radial resolution.
    pub convergence_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            radial_nodes: 1024,
            radial_order: 16,
            angular_nodes: 64,
            tail_log_margin: 45.0,
            convergence_tol: 1e-10,
        }
    }
}

impl QuadratureConfig {
    fn radial_panels(&self) -> usize {
        (self.radial_nodes / self.radial_order).max(1)
    }

    fn doubled(&self) -> Self {
        Self {
            radial_nodes: 2 * self.radial_nodes,
            ..*self
        }
    }

    fn angular_for(&self, degree: usize) -> usize {
        self.angular_nodes.max(4 * degree + 8)
    }
}

pub fn ln_factorial(k: usize) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: CompensatedSum = values.map(|v| (v - max).exp()).collect();
    max + s.value().ln()
}

/// Lower envelope `min_θ φ(re^{iθ})` sampled on the angular nodes.
fn radial_floor(weight: &Weight, r: f64, angular: usize) -> f64 {
    if weight.is_radial() {
        return weight.potential(Complex64::new(r, 0.0));
    }
    (0..angular)
        .map(|j| weight.potential(Complex64::from_polar(r, 2.0 * PI * j as f64 / angular as f64)))
        .fold(f64::INFINITY, f64::min)
}

/// Radius beyond which `r^{2D+1} e^{-nφ}` (and `r e^{-nφ}`) have dropped
/// `margin` e-folds below their maxima.
pub fn quadrature_radius(weight: &Weight, n: u32, max_degree: usize, margin: f64) -> Result<f64> {
    let nf = n as f64;
    let grid: Vec<f64> = (0..).map(|i| 1e-3 * 1.004f64.powi(i)).take_while(|&r| r < 1e4).collect();
    let floors: Vec<f64> = grid.iter().map(|&r| radial_floor(weight, r, 64)).collect();
    let mut radius = 0.0f64;
    for power in [1.0, 2.0 * max_degree as f64 + 1.0] {
        let g: Vec<f64> = grid
            .iter()
            .zip(&floors)
            .map(|(&r, &phi)| power * r.ln() - nf * phi)
            .collect();
        let (imax, gmax) = g
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let cut = (imax..grid.len())
            .find(|&i| g[i] < gmax - margin)
            .ok_or_else(|| Error::Quadrature(format!("weight {} does not confine mass at n = {n}", weight.label())))?;
        radius = radius.max(grid[cut]);
    }
    Ok(radius)
}

fn radial_nodes(weight: &Weight, n: u32, degree: usize, quad: &QuadratureConfig) -> Result<Vec<(f64, f64)>> {
    let r_quad = quadrature_radius(weight, n, degree, quad.tail_log_margin)?;
    let rule = GaussLegendre::new(quad.radial_order);
    Ok(composite_nodes(0.0, r_quad, &[], quad.radial_panels(), &rule))
}

/// `⟨f, g⟩ = ∫ f conj(g) e^{-nφ} dA` for polynomials given by ascending
/// coefficients, on a polar Gauss–Legendre × trapezoid grid. The integral is
/// recomputed with doubled radial resolution; a relative change above the
/// configured tolerance is an error.
pub fn weighted_inner_product(
    f: &[Complex64],
    g: &[Complex64],
    model: &WeightModel,
    n: u32,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    let eval = |p: &[Complex64], z: Complex64| p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let degree = f.len().max(g.len()).saturating_sub(1);
    let angular = quad.angular_for(degree);
    let weight = model.weight();
    let nf = n as f64;
    let integrate = |q: &QuadratureConfig| -> Result<(Complex64, f64)> {
        let nodes = radial_nodes(weight, n, degree, q)?;
        let dtheta = 2.0 * PI / angular as f64;
        let (mut re, mut im, mut abs) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        for &(r, w) in &nodes {
            for j in 0..angular {
                let z = Complex64::from_polar(r, j as f64 * dtheta);
                let v = eval(f, z) * eval(g, z).conj() * (-nf * weight.potential(z)).exp() * (w * r * dtheta);
                re.add(v.re);
                im.add(v.im);
                abs.add(v.norm());
            }
        }
        Ok((Complex64::new(re.value(), im.value()), abs.value()))
    };
    let (coarse, _) = integrate(quad)?;
    let (fine, scale) = integrate(&quad.doubled())?;
    if (fine - coarse).norm() > quad.convergence_tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Quadrature(format!(
            "inner product changed by {:e} under radial refinement (scale {scale:e})",
            (fine - coarse).norm()
        )));
    }
    Ok(fine)
}

/// Monomial Gram matrix of degree `D`, normalized to unit diagonal.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    /// `ln ⟨z^k, z^k⟩`.
    pub log_diag: Vec<f64>,
    /// `G[j][k]/√(G[j][j]G[k][k])`; `None` when the weight is radial and the
    /// matrix is the identity.
    pub normalized: Option<Vec<Vec<Complex64>>>,
}

fn gram_at(model: &WeightModel, n: u32, degree: usize, quad: &QuadratureConfig) -> Result<GramMatrix> {
    let weight = model.weight();
    let nf = n as f64;
    let nodes = radial_nodes(weight, n, degree, quad)?;
    if weight.is_radial() {
        // ln of w·2π·r·e^{-nφ(r)} and of r², per node
        let base: Vec<(f64, f64)> = nodes
            .iter()
            .filter(|&&(r, _)| r > 0.0)
            .map(|&(r, w)| ((w * 2.0 * PI * r).ln() - nf * weight.potential(Complex64::new(r, 0.0)), 2.0 * r.ln()))
            .collect();
        let log_diag = (0..=degree)
            .map(|j| log_sum_exp(base.iter().map(move |&(a, b)| a + j as f64 * b)))
            .collect();
        return Ok(GramMatrix {
            log_diag,
            normalized: None,
        });
    }

    let angular = quad.angular_for(degree);
    let dtheta = 2.0 * PI / angular as f64;
    // per radial node: floor of φ and the angular Fourier coefficients of
    // e^{-n(φ - floor)} for m = 0..=D
    struct Ring {
        r: f64,
        w: f64,
        floor: f64,
        fourier: Vec<Complex64>,
    }
    let mut rings = Vec::with_capacity(nodes.len());
    for &(r, w) in nodes.iter().filter(|p| p.0 > 0.0) {
        let samples: Vec<f64> = (0..angular)
            .map(|j| weight.potential(Complex64::from_polar(r, j as f64 * dtheta)))
            .collect();
        let floor = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mut fourier = vec![Complex64::new(0.0, 0.0); degree + 1];
        for (j, &phi) in samples.iter().enumerate() {
            let a = (-nf * (phi - floor)).exp() * dtheta;
            let step = Complex64::from_polar(1.0, j as f64 * dtheta);
            let mut e = Complex64::new(a, 0.0);
            for slot in fourier.iter_mut() {
                *slot += e;
                e *= step;
            }
        }
        rings.push(Ring { r, w, floor, fourier });
    }
    let log_diag: Vec<f64> = (0..=degree)
        .map(|j| {
            log_sum_exp(
                rings
                    .iter()
                    .map(move |ring| ring.w.ln() + (2 * j + 1) as f64 * ring.r.ln() - nf * ring.floor + ring.fourier[0].re.ln()),
            )
        })
        .collect();
    let mut normalized = vec![vec![Complex64::new(0.0, 0.0); degree + 1]; degree + 1];
    for j in 0..=degree {
        normalized[j][j] = Complex64::new(1.0, 0.0);
        for k in 0..j {
            let shift = 0.5 * (log_diag[j] + log_diag[k]);
            let mut re = CompensatedSum::new();
            let mut im = CompensatedSum::new();
            for ring in &rings {
                let scale = (ring.w.ln() + (j + k + 1) as f64 * ring.r.ln() - nf * ring.floor - shift).exp();
                let v = ring.fourier[j - k] * scale;
                re.add(v.re);
                im.add(v.im);
            }
            // z^j conj(z^k) carries e^{i(j-k)θ}
            let v = Complex64::new(re.value(), im.value());
            normalized[j][k] = v;
            normalized[k][j] = v.conj();
        }
    }
    Ok(GramMatrix {
        log_diag,
        normalized: Some(normalized),
    })
}

/// Monomial Gram matrix `G[j][k] = ⟨z^j, z^k⟩` for `j, k ≤ D`, checked for
/// convergence under radial refinement.
pub fn gram_matrix(model: &WeightModel, n: u32, degree: usize, quad: &QuadratureConfig) -> Result<GramMatrix> {
    let coarse = gram_at(model, n, degree, quad)?;
    let fine = gram_at(model, n, degree, &quad.doubled())?;
    let mut change = coarse
        .log_diag
        .iter()
        .zip(&fine.log_diag)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if let (Some(a), Some(b)) = (&coarse.normalized, &fine.normalized) {
        for (ra, rb) in a.iter().zip(b) {
            for (x, y) in ra.iter().zip(rb) {
                change = change.max((x - y).norm());
            }
        }
    }
    if !(change <= quad.convergence_tol) {
        return Err(Error::Quadrature(format!(
            "Gram matrix changed by {change:e} under radial refinement (n = {n}, D = {degree})"
        )));
    }
    Ok(fine)
}

/// Cholesky factor `L` (lower triangular) with `G = L L^H`.
pub fn cholesky_lower(g: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let size = g.len();
    let threshold = (size as f64 + 1.0) * f64::EPSILON;
    let mut l = vec![vec![Complex64::new(0.0, 0.0); size]; size];
    for j in 0..size {
        let mut d = g[j][j].re;
        for k in 0..j {
            d -= l[j][k].norm_sqr();
        }
        if !(d > threshold * g[j][j].re.abs().max(1.0)) {
            return Err(Error::IllConditioned { minor: j + 1, pivot: d });
        }
        let djj = d.sqrt();
        l[j][j] = Complex64::new(djj, 0.0);
        for i in j + 1..size {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k].conj();
            }
            l[i][j] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a nonsingular lower-triangular matrix.
pub fn invert_lower(l: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let size = l.len();
    let mut inv = vec![vec![Complex64::new(0.0, 0.0); size]; size];
    for j in 0..size {
        inv[j][j] = l[j][j].inv();
        for i in j + 1..size {
            let mut s = Complex64::new(0.0, 0.0);
            for k in j..i {
                s += l[i][k] * inv[k][j];
            }
            inv[i][j] = -s / l[i][i];
        }
    }
    inv
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMethod {
    ClosedForm,
    Numeric,
}

/// Orthonormal basis `f_0, …, f_D` of the truncated weighted space.
#[derive(Clone, Debug)]
pub struct SectionBasis {
    model: WeightModel,
    tensor_power: u32,
    log_norms: Vec<f64>,
    /// `exp(ln‖z^{k-1}‖ − ln‖z^k‖)` for `k ≥ 1`.
    steps: Vec<f64>,
    transform: Option<Vec<Vec<Complex64>>>,
    gram_residual: f64,
    method: BasisMethod,
}

impl SectionBasis {
    fn assemble(
        model: WeightModel,
        tensor_power: u32,
        log_norms: Vec<f64>,
        transform: Option<Vec<Vec<Complex64>>>,
        gram_residual: f64,
        method: BasisMethod,
    ) -> Result<Self> {
        if log_norms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "monomial norms at n = {tensor_power}, D = {}",
                log_norms.len() - 1
            )));
        }
        let mut steps = vec![1.0; log_norms.len()];
        for k in 1..log_norms.len() {
            steps[k] = (log_norms[k - 1] - log_norms[k]).exp();
        }
        Ok(Self {
            model,
            tensor_power,
            log_norms,
            steps,
            transform,
            gram_residual,
            method,
        })
    }

    pub fn tensor_power(&self) -> u32 {
        self.tensor_power
    }

    pub fn degree(&self) -> usize {
        self.log_norms.len() - 1
    }

    pub fn dimension(&self) -> usize {
        self.log_norms.len()
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    pub fn method(&self) -> BasisMethod {
        self.method
    }

    pub fn model(&self) -> &WeightModel {
        &self.model
    }

    /// `ln ‖z^k‖` in the weighted norm.
    pub fn log_monomial_norm(&self, k: usize) -> f64 {
        self.log_norms[k]
    }

    pub fn is_diagonal(&self) -> bool {
        self.transform.is_none()
    }

    /// Coefficient `C[j][k]` of `z^k` in `f_j` (zero for `k > j`).
    pub fn coefficient(&self, j: usize, k: usize) -> Complex64 {
        let t = match &self.transform {
            None if j == k => Complex64::new(1.0, 0.0),
            None => Complex64::new(0.0, 0.0),
            Some(t) => t[j][k],
        };
        t * (-self.log_norms[k]).exp()
    }

    /// The full triangular coefficient matrix `C`.
    pub fn coeffs(&self) -> Result<Vec<Vec<Complex64>>> {
        let size = self.dimension();
        let c: Vec<Vec<Complex64>> = (0..size)
            .map(|j| (0..size).map(|k| self.coefficient(j, k)).collect())
            .collect();
        if c.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("basis coefficients overflow f64".into()));
        }
        Ok(c)
    }

    /// Writes `μ_k(x) = x^k e^{-nφ(x)/2}/‖z^k‖` for `k ≤ D` into `out`.
    pub fn weighted_monomials(&self, x: Complex64, out: &mut [Complex64]) {
        let size = self.dimension();
        debug_assert_eq!(out.len(), size);
        let half = 0.5 * self.tensor_power as f64 * self.model.potential(x);
        let lx = x.norm().ln();
        let (kmax, lmax) = (0..size)
            .map(|k| if k == 0 { -self.log_norms[0] } else { k as f64 * lx - self.log_norms[k] })
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        let start = Complex64::from_polar((lmax - half).exp(), kmax as f64 * x.arg());
        out[kmax] = start;
        for k in kmax + 1..size {
            out[k] = out[k - 1] * x * self.steps[k];
        }
        if kmax > 0 {
            let xinv = x.inv();
            for k in (0..kmax).rev() {
                out[k] = out[k + 1] * xinv / self.steps[k + 1];
            }
        }
    }

    /// `v_j(x) = f_j(x) e^{-nφ(x)/2}`, the basis values in a unitary frame.
    pub fn weighted_values(&self, x: Complex64) -> Vec<Complex64> {
        let mut mu = vec![Complex64::new(0.0, 0.0); self.dimension()];
        self.weighted_monomials(x, &mut mu);
        match &self.transform {
            None => mu,
            Some(t) => t
                .iter()
                .enumerate()
                .map(|(j, row)| row[..=j].iter().zip(&mu).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// `(Σ_j c_j v_j(x), Σ_j |v_j(x)|²)`: a section value in the unitary
    /// frame together with the diagonal Bergman kernel, in one pass.
    pub fn section_and_diagonal(&self, x: Complex64, coeffs: &[Complex64], scratch: &mut Vec<Complex64>) -> (Complex64, f64) {
        scratch.resize(self.dimension(), Complex64::new(0.0, 0.0));
        self.weighted_monomials(x, scratch);
        let mut value = Complex64::new(0.0, 0.0);
        let mut diag = 0.0;
        match &self.transform {
            None => {
                for (c, m) in coeffs.iter().zip(scratch.iter()) {
                    value += c * m;
                    diag += m.norm_sqr();
                }
            }
            Some(t) => {
                for (j, row) in t.iter().enumerate() {
                    let v: Complex64 = row[..=j].iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
                    value += coeffs[j] * v;
                    diag += v.norm_sqr();
                }
            }
        }
        (value, diag)
    }
}

/// Closed-form Bargmann–Fock basis `f_j = √(n^{j+1}/(π j!)) z^j`, followed by
/// one quadrature pass comparing the monomial norms.
pub fn build_basis_closed_form(model: &WeightModel, n: u32, degree: usize, quad: &QuadratureConfig) -> Result<SectionBasis> {
    if !model.is_bargmann_fock() {
        return Err(Error::InvalidModel(format!(
            "closed-form basis requires the Bargmann-Fock weight, got {}",
            model.weight().label()
        )));
    }
    if n == 0 {
        return Err(Error::Config("tensor power must be positive".into()));
    }
    let ln_n = (n as f64).ln();
    let log_norms: Vec<f64> = (0..=degree)
        .map(|j| 0.5 * (PI.ln() + ln_factorial(j) - (j as f64 + 1.0) * ln_n))
        .collect();
    let gram = gram_matrix(model, n, degree, quad)?;
    let residual = gram
        .log_diag
        .iter()
        .zip(&log_norms)
        .map(|(numeric, closed)| (numeric - 2.0 * closed).exp_m1().abs())
        .fold(0.0, f64::max);
    SectionBasis::assemble(model.clone(), n, log_norms, None, residual, BasisMethod::ClosedForm)
}

/// Orthonormalizes `1, z, …, z^D` in the weighted inner product by a
/// Cholesky factorization of the monomial Gram matrix.
pub fn build_basis_numeric(model: &WeightModel, n: u32, degree: usize, quad: &QuadratureConfig) -> Result<SectionBasis> {
    if n == 0 {
        return Err(Error::Config("tensor power must be positive".into()));
    }
    let gram = gram_matrix(model, n, degree, quad)?;
    let log_norms: Vec<f64> = gram.log_diag.iter().map(|v| 0.5 * v).collect();
    let (transform, residual) = match &gram.normalized {
        None => (None, 0.0),
        Some(g) => {
            let l = cholesky_lower(g)?;
            let t = invert_lower(&l);
            let residual = orthonormality_defect(&t, g);
            (Some(t), residual)
        }
    };
    SectionBasis::assemble(model.clone(), n, log_norms, transform, residual, BasisMethod::Numeric)
}

/// Closed form for Bargmann–Fock, numeric otherwise.
pub fn build_basis(model: &WeightModel, n: u32, degree: usize, quad: &QuadratureConfig) -> Result<SectionBasis> {
    if model.is_bargmann_fock() {
        build_basis_closed_form(model, n, degree, quad)
    } else {
        build_basis_numeric(model, n, degree, quad)
    }
}

/// `max_{j,k} |(T G T^H)[j][k] − δ_{jk}|`.
pub fn orthonormality_defect(t: &[Vec<Complex64>], g: &[Vec<Complex64>]) -> f64 {
    let size = t.len();
    // TG first, then (TG)T^H
    let tg: Vec<Vec<Complex64>> = (0..size)
        .map(|i| (0..size).map(|k| (0..=i).map(|l| t[i][l] * g[l][k]).sum()).collect())
        .collect();
    let mut worst = 0.0f64;
    for i in 0..size {
        for j in 0..size {
            let v: Complex64 = (0..=j).map(|k| tg[i][k] * t[j][k].conj()).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).norm());
        }
    }
    worst
}

/// Evaluation points used to certify truncation on the disk of radius `r`.
fn truncation_grid(radius: f64) -> Vec<Complex64> {
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    for i in 1..=24 {
        let r = radius * i as f64 / 24.0;
        pts.extend((0..32).map(|j| Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.5 * (i % 2) as f64) / 32.0)));
    }
    pts
}

/// Upper tail `P(N > D)` of a Poisson variable with mean `lambda`, for
/// every `D ≤ limit`, in log space.
fn poisson_log_tails(lambda: f64, limit: usize) -> Vec<f64> {
    let ll = lambda.ln();
    let log_pmf = |j: usize| j as f64 * ll - lambda - ln_factorial(j);
    // extend the sum far enough past both the mode and `limit`
    let mut top = limit + 1;
    while (top as f64) < lambda || log_pmf(top) > log_pmf(limit + 1).min(0.0) - 60.0 {
        top += 16;
    }
    let mut tails = vec![f64::NEG_INFINITY; limit + 1];
    let mut acc = f64::NEG_INFINITY;
    for j in (1..=top).rev() {
        let v = log_pmf(j);
        acc = if acc == f64::NEG_INFINITY {
            v
        } else {
            acc.max(v) + (-(acc - v).abs()).exp().ln_1p()
        };
        if j - 1 <= limit {
            tails[j - 1] = acc;
        }
    }
    tails
}

/// Smallest degree `D` such that the truncated diagonal kernel
/// `Σ_{j≤D} |f_j(x)|² e^{-nφ(x)}` is within relative error `tol` of the full
/// kernel on `|x| ≤ radius`.
///
/// Bargmann–Fock uses the exact Poisson tail at `|x| = radius`; other models
/// double `D` until the kernel on a grid has stabilized and then take the
/// smallest prefix within `tol` of the largest basis.
pub fn truncation_degree(
    model: &WeightModel,
    n: u32,
    radius: f64,
    tol: f64,
    max_degree: usize,
    quad: &QuadratureConfig,
) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("truncation tolerance must lie in (0, 1), got {tol}")));
    }
    if !(radius > 0.0) || n == 0 {
        return Err(Error::Config("truncation needs a positive radius and tensor power".into()));
    }
    let cap_error = || Error::DegreeCap {
        cap: max_degree,
        n,
        radius,
    };
    if model.is_bargmann_fock() {
        let lambda = n as f64 * radius * radius;
        let tails = poisson_log_tails(lambda, max_degree);
        let log_tol = tol.ln();
        return tails.iter().position(|&t| t <= log_tol).ok_or_else(cap_error);
    }

    let grid = truncation_grid(radius);
    let mut trial = 16usize;
    loop {
        let size = trial.min(max_degree);
        let basis = build_basis_numeric(model, n, size, quad)?;
        let mut needed = 0usize;
        for &x in &grid {
            let v = basis.weighted_values(x);
            let total: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            let mut prefix = 0.0;
            let mut first_ok = size;
            for (j, c) in v.iter().enumerate() {
                prefix += c.norm_sqr();
                if (total - prefix) <= tol * total {
                    first_ok = j;
                    break;
                }
            }
            needed = needed.max(first_ok);
        }
        if 2 * needed <= size {
            return Ok(needed);
        }
        if size >= max_degree {
            return Err(cap_error());
        }
        trial *= 2;
    }
}
