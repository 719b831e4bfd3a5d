//! Gauss–Legendre rules, polar product rules on disks, and an adaptive polar
//! integrator for integrands with integrable logarithmic singularities.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order > 0, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).collect::<CompensatedSum>().value()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre nodes on `[a, b]`: the interval is first split
/// at `breaks` (points strictly inside are used), then each piece is cut
/// into panels of roughly equal width, `panels` in total.
pub fn composite_nodes(a: f64, b: f64, breaks: &[f64], panels: usize, rule: &GaussLegendre) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(b);
    let length = b - a;
    let mut out = Vec::with_capacity(panels.max(cuts.len()) * rule.order());
    for piece in cuts.windows(2) {
        let share = ((piece[1] - piece[0]) / length * panels as f64).round().max(1.0) as usize;
        let h = (piece[1] - piece[0]) / share as f64;
        for p in 0..share {
            let lo = piece[0] + p as f64 * h;
            out.extend(rule.mapped(lo, lo + h));
        }
    }
    out
}

/// Product rule on the disk `|z| ≤ radius`: composite Gauss–Legendre in the
/// radius and the periodic trapezoid rule in the angle. Weights include the
/// Jacobian `r`.
#[derive(Clone, Debug)]
pub struct DiskRule {
    points: Vec<(Complex64, f64)>,
}

impl DiskRule {
    pub fn new(radius: f64, breaks: &[f64], radial_panels: usize, order: usize, angular: usize) -> Self {
        let rule = GaussLegendre::new(order);
        let radial = composite_nodes(0.0, radius, breaks, radial_panels, &rule);
        let dtheta = 2.0 * PI / angular as f64;
        let mut points = Vec::with_capacity(radial.len() * angular);
        for &(r, w) in &radial {
            for j in 0..angular {
                let theta = (j as f64 + 0.5) * dtheta;
                points.push((Complex64::from_polar(r, theta), w * r * dtheta));
            }
        }
        Self { points }
    }

    pub fn points(&self) -> &[(Complex64, f64)] {
        &self.points
    }

    pub fn integrate<F: FnMut(Complex64) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .map(|&(z, w)| w * f(z))
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Settings for [`integrate_disk_adaptive`].
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveConfig {
    pub radial_cells: usize,
    pub angular_cells: usize,
    /// Gauss–Legendre order per cell and direction.
    pub order: usize,
    /// Maximal number of dyadic refinements of a base cell.
    pub max_level: u32,
    /// Absolute tolerance on the change between a cell and its four children
    /// for a base cell; children inherit a quarter of their parent's.
    pub cell_tol: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            radial_cells: 24,
            angular_cells: 96,
            order: 5,
            max_level: 4,
            cell_tol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveOutcome<const K: usize> {
    pub value: [f64; K],
    pub evaluations: usize,
    pub refined_cells: usize,
    /// Cells that still exceeded their tolerance at the maximal level.
    pub unresolved_cells: usize,
}

/// Raised by the integrand sampler when a node hits a non-finite value.
#[derive(Clone, Copy, Debug)]
pub struct SingularNode(pub Complex64);

struct Adaptive<'a, const K: usize, F> {
    rule: &'a GaussLegendre,
    f: F,
    evaluations: usize,
    refined_cells: usize,
    unresolved_cells: usize,
    max_level: u32,
}

impl<const K: usize, F: FnMut(Complex64) -> [f64; K]> Adaptive<'_, K, F> {
    fn cell(&mut self, r0: f64, r1: f64, t0: f64, t1: f64) -> std::result::Result<[f64; K], SingularNode> {
        let hr = 0.5 * (r1 - r0);
        let mr = 0.5 * (r1 + r0);
        let ht = 0.5 * (t1 - t0);
        let mt = 0.5 * (t1 + t0);
        let mut acc = [CompensatedSum::new(); K];
        for (&xi, &wi) in self.rule.nodes().iter().zip(self.rule.weights()) {
            let r = mr + hr * xi;
            for (&xj, &wj) in self.rule.nodes().iter().zip(self.rule.weights()) {
                let z = Complex64::from_polar(r, mt + ht * xj);
                let v = (self.f)(z);
                self.evaluations += 1;
                let w = wi * wj * hr * ht * r;
                for k in 0..K {
                    if !v[k].is_finite() {
                        return Err(SingularNode(z));
                    }
                    acc[k].add(w * v[k]);
                }
            }
        }
        Ok(acc.map(|a| a.value()))
    }

    fn refine(
        &mut self,
        (r0, r1, t0, t1): (f64, f64, f64, f64),
        coarse: [f64; K],
        tol: f64,
        level: u32,
    ) -> std::result::Result<[f64; K], SingularNode> {
        let rm = 0.5 * (r0 + r1);
        let tm = 0.5 * (t0 + t1);
        let children = [(r0, rm, t0, tm), (r0, rm, tm, t1), (rm, r1, t0, tm), (rm, r1, tm, t1)];
        let mut values = [[0.0; K]; 4];
        for (slot, &(a, b, c, d)) in values.iter_mut().zip(&children) {
            *slot = self.cell(a, b, c, d)?;
        }
        let mut fine = [0.0; K];
        for v in &values {
            for k in 0..K {
                fine[k] += v[k];
            }
        }
        let change = (0..K).map(|k| (fine[k] - coarse[k]).abs()).fold(0.0, f64::max);
        if change <= tol {
            return Ok(fine);
        }
        if level >= self.max_level {
            self.unresolved_cells += 1;
            return Ok(fine);
        }
        self.refined_cells += 1;
        let mut total = [0.0; K];
        for (v, &child) in values.iter().zip(&children) {
            let refined = self.refine(child, *v, 0.25 * tol, level + 1)?;
            for k in 0..K {
                total[k] += refined[k];
            }
        }
        Ok(total)
    }
}

/// Integrates a vector-valued integrand over the disk `|z| ≤ radius` on a
/// polar grid of base cells, refining each cell dyadically while its value
/// changes by more than the tolerance. `angle_offset` rotates the grid.
///
/// Returns `Err(SingularNode)` when the integrand is non-finite at a node, so
/// that callers can retry with a rotated grid.
pub fn integrate_disk_adaptive<const K: usize, F>(
    radius: f64,
    radial_breaks: &[f64],
    angle_offset: f64,
    cfg: &AdaptiveConfig,
    f: F,
) -> std::result::Result<AdaptiveOutcome<K>, SingularNode>
where
    F: FnMut(Complex64) -> [f64; K],
{
    let rule = GaussLegendre::new(cfg.order);
    let mut cuts = vec![0.0];
    let mut inner: Vec<f64> = radial_breaks.iter().copied().filter(|&t| t > 0.0 && t < radius).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(radius);
    let mut radial_cells = Vec::new();
    for piece in cuts.windows(2) {
        let share = ((piece[1] - piece[0]) / radius * cfg.radial_cells as f64).round().max(1.0) as usize;
        let h = (piece[1] - piece[0]) / share as f64;
        radial_cells.extend((0..share).map(|p| (piece[0] + p as f64 * h, piece[0] + (p + 1) as f64 * h)));
    }
    let dt = 2.0 * PI / cfg.angular_cells as f64;
    let mut state = Adaptive {
        rule: &rule,
        f,
        evaluations: 0,
        refined_cells: 0,
        unresolved_cells: 0,
        max_level: cfg.max_level,
    };
    let mut total = [CompensatedSum::new(); K];
    for &(r0, r1) in &radial_cells {
        for j in 0..cfg.angular_cells {
            let t0 = angle_offset + j as f64 * dt;
            let t1 = t0 + dt;
            let coarse = state.cell(r0, r1, t0, t1)?;
            let v = state.refine((r0, r1, t0, t1), coarse, cfg.cell_tol, 1)?;
            for k in 0..K {
                total[k].add(v[k]);
            }
        }
    }
    Ok(AdaptiveOutcome {
        value: total.map(|a| a.value()),
        evaluations: state.evaluations,
        refined_cells: state.refined_cells,
        unresolved_cells: state.unresolved_cells,
    })
}

/// Retries [`integrate_disk_adaptive`] on rotated grids when a node lands on
/// a singularity of the integrand.
pub fn integrate_disk_adaptive_retrying<const K: usize, F>(
    radius: f64,
    radial_breaks: &[f64],
    cfg: &AdaptiveConfig,
    retries: usize,
    mut f: F,
) -> Result<AdaptiveOutcome<K>>
where
    F: FnMut(Complex64) -> [f64; K],
{
    let mut last = None;
    for attempt in 0..=retries {
        // irrational fractions of a cell keep rotated grids away from the old nodes
        let offset = attempt as f64 * std::f64::consts::FRAC_1_PI * 2.0 * PI / cfg.angular_cells as f64;
        match integrate_disk_adaptive(radius, radial_breaks, offset, cfg, &mut f) {
            Ok(outcome) => return Ok(outcome),
            Err(SingularNode(z)) => last = Some(z),
        }
    }
    Err(Error::Quadrature(format!(
        "integrand is singular at a quadrature node ({}) after {retries} grid rotations",
        last.unwrap_or_default()
    )))
}
