//! Covariance integrals behind the asymptotic normality criterion:
//! `sup_x ∫ Γ_n(x,y) dy` and the ratio
//! `∫∫ Γ_n² ψ(x)ψ(y) dx dy / sup_x ∫ Γ_n(x,y) dy`.
//!
//! Inner integrals use polar coordinates centred at `x`, clipped to the
//! region disk, with the radial range split at `b₀√(log n/n)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::TestForm;
use crate::kernel::{chord_length, split_radius, KernelEvaluator, KernelPoint};
use crate::quadrature::{composite_nodes, CompensatedSum, GaussLegendre};
use crate::Result;

/// Resolution of the covariance integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionGrid {
    /// Rings and angles of the base points `x` for the supremum.
    pub base_rings: usize,
    pub base_angles: usize,
    /// Inner polar rule: angles, and Gauss–Legendre panels inside and
    /// outside the split radius.
    pub angles: usize,
    pub near_panels: usize,
    pub far_panels: usize,
    pub order: usize,
    /// Outer rule of the double integral.
    pub outer_radial: usize,
    pub outer_angles: usize,
}

impl Default for ConditionGrid {
    fn default() -> Self {
        Self {
            base_rings: 3,
            base_angles: 8,
            angles: 32,
            near_panels: 4,
            far_panels: 2,
            order: 8,
            outer_radial: 24,
            outer_angles: 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionII {
    /// `sup_x ∫_region Γ_n(x,y) dy` over the base points.
    pub value: f64,
    /// The two parts of the maximizing integral, inside and outside the
    /// split radius.
    pub near: f64,
    pub far: f64,
    pub argmax_re: f64,
    pub argmax_im: f64,
    pub split_radius: f64,
}

/// Polar nodes `(ρ, weight·ρ)` in one direction from `x`, split at `split`.
fn ray_nodes(reach: f64, split: f64, grid: &ConditionGrid, rule: &GaussLegendre) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let near_end = split.min(reach);
    let near = composite_nodes(0.0, near_end, &[], grid.near_panels, rule);
    let far = if reach > split {
        composite_nodes(split, reach, &[], grid.far_panels, rule)
    } else {
        Vec::new()
    };
    let jac = |v: Vec<(f64, f64)>| v.into_iter().map(|(r, w)| (r, w * r)).collect();
    (jac(near), jac(far))
}

/// `(∫_{near} g Γ^p dy, ∫_{far} g Γ^p dy)` over the region disk around `x`.
fn local_integral<G: Fn(Complex64) -> f64>(
    ev: &KernelEvaluator,
    px: &KernelPoint,
    region: f64,
    split: f64,
    power: i32,
    grid: &ConditionGrid,
    rule: &GaussLegendre,
    g: G,
) -> Result<(f64, f64)> {
    let dtheta = 2.0 * PI / grid.angles as f64;
    let mut near = CompensatedSum::new();
    let mut far = CompensatedSum::new();
    for a in 0..grid.angles {
        let theta = (a as f64 + 0.5) * dtheta;
        let dir = Complex64::from_polar(1.0, theta);
        let reach = chord_length(px.x, theta, region);
        let (inner, outer) = ray_nodes(reach, split, grid, rule);
        for (nodes, acc) in [(inner, &mut near), (outer, &mut far)] {
            for (rho, w) in nodes {
                let y = px.x + dir * rho;
                let gamma = ev.gamma(px, &ev.point(y)?)?;
                acc.add(w * dtheta * gamma.powi(power) * g(y));
            }
        }
    }
    Ok((near.value(), far.value()))
}

fn base_points(region: f64, grid: &ConditionGrid) -> Vec<Complex64> {
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    for i in 1..=grid.base_rings {
        let r = region * i as f64 / (grid.base_rings + 1) as f64;
        for j in 0..grid.base_angles {
            pts.push(Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.5 * i as f64) / grid.base_angles as f64));
        }
    }
    pts
}

/// `sup_x ∫_{|y|≤region} Γ_n(x,y) dy` over base points of the region, with
/// the near/far split of the maximizing integral.
pub fn st_condition_ii(ev: &KernelEvaluator, region: f64, b0: f64, grid: &ConditionGrid) -> Result<ConditionII> {
    let split = split_radius(ev.tensor_power(), b0);
    let rule = GaussLegendre::new(grid.order);
    let parts: Vec<Result<(Complex64, f64, f64)>> = base_points(region, grid)
        .par_iter()
        .map(|&x| {
            let px = ev.point(x)?;
            let (near, far) = local_integral(ev, &px, region, split, 1, grid, &rule, |_| 1.0)?;
            Ok((x, near, far))
        })
        .collect();
    let mut best = ConditionII {
        value: f64::NEG_INFINITY,
        near: 0.0,
        far: 0.0,
        argmax_re: 0.0,
        argmax_im: 0.0,
        split_radius: split,
    };
    for part in parts {
        let (x, near, far) = part?;
        if near + far > best.value {
            best = ConditionII {
                value: near + far,
                near,
                far,
                argmax_re: x.re,
                argmax_im: x.im,
                split_radius: split,
            };
        }
    }
    Ok(best)
}

/// `∫∫ Γ_n(x,y)² ψ(x) ψ(y) dx dy` over the support of the form.
pub fn covariance_energy(ev: &KernelEvaluator, form: &TestForm, b0: f64, grid: &ConditionGrid) -> Result<f64> {
    let region = form.support_radius();
    let split = split_radius(ev.tensor_power(), b0);
    let rule = GaussLegendre::new(grid.order);
    let outer_rule = GaussLegendre::new(8);
    let radial = composite_nodes(0.0, region, &form.radial_breakpoints(), (grid.outer_radial / 8).max(1), &outer_rule);
    let dtheta = 2.0 * PI / grid.outer_angles as f64;
    let outer: Vec<(Complex64, f64)> = radial
        .iter()
        .flat_map(|&(r, w)| {
            (0..grid.outer_angles).map(move |j| (Complex64::from_polar(r, (j as f64 + 0.5) * dtheta), w * r * dtheta))
        })
        .collect();
    let parts: Vec<Result<f64>> = outer
        .par_iter()
        .map(|&(x, w)| {
            let psi = form.density(x);
            if psi == 0.0 {
                return Ok(0.0);
            }
            let px = ev.point(x)?;
            let (near, far) = local_integral(ev, &px, region, split, 2, grid, &rule, |y| form.density(y))?;
            Ok(w * psi * (near + far))
        })
        .collect();
    let mut total = CompensatedSum::new();
    for p in parts {
        total.add(p?);
    }
    Ok(total.value())
}

/// Numerator, denominator and their ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionI {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

/// `∫∫ Γ_n² ψψ / sup_x ∫ Γ_n`, both over the support of the form.
pub fn st_condition_i_ratio(ev: &KernelEvaluator, form: &TestForm, b0: f64, grid: &ConditionGrid) -> Result<ConditionI> {
    let numerator = covariance_energy(ev, form, b0, grid)?;
    let denominator = st_condition_ii(ev, form.support_radius(), b0, grid)?.value;
    Ok(ConditionI {
        numerator,
        denominator,
        ratio: numerator / denominator,
    })
}
