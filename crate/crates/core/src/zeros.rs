//! Zero divisors of sampled sections.
//!
//! Roots of the polynomial part are found with the Aberth–Ehrlich
//! simultaneous iteration started from the Newton polygon, then polished
//! with Newton steps and clustered into points with multiplicity.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::geometry::TestForm;
use crate::sampling::RandomSection;
use crate::{Error, Result};

/// Leading coefficients below this fraction of `‖p‖` are dropped.
pub const TRIM_RATIO: f64 = 1e-14;
pub const DEFAULT_POLISH_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 500;

/// `p[k] = Σ_j ξ_j C[j][k]`, the coefficients of the holomorphic part.
pub fn polynomial_part(sec: &RandomSection<'_>) -> Vec<Complex64> {
    let basis = sec.basis();
    let xi = sec.coeffs();
    (0..basis.dimension())
        .map(|k| (k..basis.dimension()).map(|j| xi[j] * basis.coefficient(j, k)).sum())
        .collect()
}

/// Zeros with multiplicities.
#[derive(Clone, Debug, Default)]
pub struct Divisor {
    pub points: Vec<(Complex64, u32)>,
    /// Largest `|p(z)|/Σ_k |a_k||z|^k` over the returned roots.
    pub backward_error: f64,
}

impl Divisor {
    pub fn degree(&self) -> u32 {
        self.points.iter().map(|p| p.1).sum()
    }

    /// Number of zeros, with multiplicity, in `|z| < radius`.
    pub fn count_in_disk(&self, radius: f64) -> u32 {
        self.points.iter().filter(|p| p.0.norm() < radius).map(|p| p.1).sum()
    }
}

/// `⟨[Div], φ⟩ = Σ_k m_k φ(z_k)`.
pub fn divisor_pairing(div: &Divisor, form: &TestForm) -> f64 {
    div.points.iter().map(|&(z, m)| m as f64 * form.value(z)).sum()
}

/// Evaluation of `p/p'` and of the componentwise backward error at `z`.
struct Eval {
    newton: Complex64,
    backward: f64,
}

fn evaluate(a: &[Complex64], z: Complex64) -> Eval {
    let d = a.len() - 1;
    if z.norm() <= 1.0 {
        let mut p = a[d];
        let mut dp = Complex64::new(0.0, 0.0);
        let mut s = a[d].norm();
        let az = z.norm();
        for k in (0..d).rev() {
            dp = dp * z + p;
            p = p * z + a[k];
            s = s * az + a[k].norm();
        }
        Eval {
            newton: p / dp,
            backward: p.norm() / s,
        }
    } else {
        // reversed polynomial r(w) = w^d p(1/w)
        let w = z.inv();
        let mut r = a[0];
        let mut dr = Complex64::new(0.0, 0.0);
        let mut s = a[0].norm();
        let aw = w.norm();
        for k in 1..=d {
            dr = dr * w + r;
            r = r * w + a[k];
            s = s * aw + a[k].norm();
        }
        Eval {
            newton: z * r / (d as f64 * r - w * dr),
            backward: r.norm() / s,
        }
    }
}

/// Starting points on circles given by the upper convex hull of
/// `(k, ln|a_k|)`.
fn initial_guesses(a: &[Complex64]) -> Vec<Complex64> {
    let d = a.len() - 1;
    let pts: Vec<(usize, f64)> = a
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| (k, c.norm().ln()))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (o, q) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (q.0 as f64 - o.0 as f64) * (p.1 - o.1) - (q.1 - o.1) * (p.0 as f64 - o.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut guesses = Vec::with_capacity(d);
    for seg in hull.windows(2) {
        let (i, li) = seg[0];
        let (j, lj) = seg[1];
        let m = j - i;
        let radius = ((li - lj) / m as f64).exp();
        for l in 0..m {
            let theta = 2.0 * PI * l as f64 / m as f64 + 2.0 * PI * i as f64 / d as f64 + 0.4;
            guesses.push(Complex64::from_polar(radius, theta));
        }
    }
    guesses
}

/// Simple roots of a polynomial with `a[0] ≠ 0` and `a[d] ≠ 0`.
fn aberth(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = a.len() - 1;
    let mut z = initial_guesses(a);
    let mut done = vec![false; d];
    let stop = 4.0 * f64::EPSILON * d as f64;
    for _ in 0..MAX_ITERATIONS {
        let mut active = false;
        for i in 0..d {
            if done[i] {
                continue;
            }
            let e = evaluate(a, z[i]);
            if e.backward <= stop {
                done[i] = true;
                continue;
            }
            active = true;
            let zi = z[i];
            let repulsion: Complex64 = (0..d).filter(|&j| j != i).map(|j| (zi - z[j]).inv()).sum();
            let step = e.newton / (1.0 - e.newton * repulsion);
            if !(step.re.is_finite() && step.im.is_finite()) {
                // coincident iterate; nudge it
                z[i] = zi * Complex64::from_polar(1.0 + 1e-8, 1e-6) + 1e-12;
                continue;
            }
            z[i] = zi - step;
            if step.norm() <= 2.0 * f64::EPSILON * z[i].norm() {
                done[i] = true;
            }
        }
        if !active {
            return Ok(z);
        }
    }
    let worst = z.iter().map(|&r| evaluate(a, r).backward).fold(0.0, f64::max);
    if worst <= stop.max(1e-13) {
        return Ok(z);
    }
    Err(Error::RootFinder {
        iterations: MAX_ITERATIONS,
        unconverged: done.iter().filter(|d| !**d).count(),
        worst,
    })
}

/// All roots of `p` (ascending coefficients) with multiplicities.
///
/// Leading coefficients `|a_k| ≤ 1e-14‖p‖` are trimmed first; exact zeros of
/// the low coefficients become a root at 0. Every root is polished until
/// its backward error is at most `polish_tol`, and roots closer than
/// `10√polish_tol` are merged.
pub fn find_zeros(p: &[Complex64], polish_tol: f64) -> Result<Divisor> {
    let norm = p.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite("polynomial coefficients".into()));
    }
    if norm == 0.0 {
        return Err(Error::DegenerateSection);
    }
    let top = p.iter().rposition(|c| c.norm() > TRIM_RATIO * norm).unwrap_or(0);
    let low = p.iter().position(|c| c.norm() != 0.0).unwrap_or(0);
    let a = &p[low..=top];
    let mut roots = if a.len() > 1 { aberth(a)? } else { Vec::new() };

    let mut worst = 0.0f64;
    for z in roots.iter_mut() {
        let mut e = evaluate(a, *z);
        for _ in 0..8 {
            if e.backward <= 0.25 * f64::EPSILON {
                break;
            }
            let candidate = *z - e.newton;
            let ec = evaluate(a, candidate);
            if !(ec.backward < e.backward) {
                break;
            }
            *z = candidate;
            e = ec;
        }
        if !(e.backward <= polish_tol) {
            return Err(Error::RootFinder {
                iterations: MAX_ITERATIONS,
                unconverged: 1,
                worst: e.backward,
            });
        }
        worst = worst.max(e.backward);
    }

    let radius = 10.0 * polish_tol.sqrt();
    let mut points: Vec<(Complex64, u32)> = Vec::new();
    if low > 0 {
        points.push((Complex64::new(0.0, 0.0), low as u32));
    }
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![roots[i]];
        let mut frontier = vec![i];
        while let Some(c) = frontier.pop() {
            for j in 0..roots.len() {
                if !used[j] && (roots[j] - roots[c]).norm() <= radius {
                    used[j] = true;
                    members.push(roots[j]);
                    frontier.push(j);
                }
            }
        }
        let center = members.iter().sum::<Complex64>() / members.len() as f64;
        match points.iter_mut().find(|(z, _)| (*z - center).norm() <= radius) {
            Some(existing) => existing.1 += members.len() as u32,
            None => points.push((center, members.len() as u32)),
        }
    }
    Ok(Divisor {
        points,
        backward_error: worst,
    })
}

/// Divisor of a section: `find_zeros ∘ polynomial_part`.
pub fn section_divisor(sec: &RandomSection<'_>, polish_tol: f64) -> Result<Divisor> {
    find_zeros(&polynomial_part(sec), polish_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn monomial_root_at_origin() {
        let div = find_zeros(&[c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)], DEFAULT_POLISH_TOL).unwrap();
        assert_eq!(div.points, vec![(c(0.0, 0.0), 2)]);
    }

    #[test]
    fn factored_quadratic() {
        let div = find_zeros(&[c(-0.25, 0.0), c(0.0, 0.0), c(1.0, 0.0)], DEFAULT_POLISH_TOL).unwrap();
        let mut roots: Vec<f64> = div.points.iter().map(|p| p.0.re).collect();
        roots.sort_by(f64::total_cmp);
        assert!((roots[0] + 0.5).abs() < 1e-14 && (roots[1] - 0.5).abs() < 1e-14);
        assert!(div.points.iter().all(|p| p.1 == 1 && p.0.im.abs() < 1e-14));
    }

    #[test]
    fn double_root_is_clustered() {
        // (z - 0.3)² (z + 2i)
        let r1 = c(0.3, 0.0);
        let r2 = c(0.0, -2.0);
        let p = [-(r1 * r1 * r2), r1 * r1 + 2.0 * r1 * r2, -(2.0 * r1 + r2), c(1.0, 0.0)];
        let div = find_zeros(&p, DEFAULT_POLISH_TOL).unwrap();
        assert_eq!(div.degree(), 3);
        let double = div.points.iter().find(|p| p.1 == 2).expect("double root");
        assert!((double.0 - r1).norm() < 1e-6);
    }

    #[test]
    fn zero_polynomial_is_degenerate() {
        assert!(matches!(find_zeros(&[c(0.0, 0.0); 4], 1e-12), Err(Error::DegenerateSection)));
    }

    #[test]
    fn tiny_leading_terms_are_trimmed() {
        let div = find_zeros(&[c(-1.0, 0.0), c(1.0, 0.0), c(1e-16, 0.0)], DEFAULT_POLISH_TOL).unwrap();
        assert_eq!(div.degree(), 1);
        assert!((div.points[0].0 - 1.0).norm() < 1e-14);
    }

    #[test]
    fn wilkinson_like_spread() {
        // roots 0.1·k for k = 1..=12
        let mut p = vec![c(1.0, 0.0)];
        for k in 1..=12 {
            let r = 0.1 * k as f64;
            let mut q = vec![c(0.0, 0.0); p.len() + 1];
            for (i, a) in p.iter().enumerate() {
                q[i + 1] += a;
                q[i] -= a * r;
            }
            p = q;
        }
        let div = find_zeros(&p, DEFAULT_POLISH_TOL).unwrap();
        assert_eq!(div.degree(), 12);
        for k in 1..=12 {
            let r = 0.1 * k as f64;
            assert!(div.points.iter().any(|p| (p.0 - r).norm() < 1e-6), "missing {r}");
        }
    }

    #[test]
    fn pairing_weights_multiplicity() {
        let form = TestForm::poly_bump(1.0).unwrap();
        let single = Divisor { points: vec![(c(0.0, 0.0), 1)], backward_error: 0.0 };
        let double = Divisor { points: vec![(c(0.0, 0.0), 2)], backward_error: 0.0 };
        let outside = Divisor { points: vec![(c(1.5, 0.0), 3), (c(0.0, -2.0), 1)], backward_error: 0.0 };
        assert_eq!(divisor_pairing(&single, &form), 1.0);
        assert_eq!(divisor_pairing(&double, &form), 2.0);
        assert_eq!(divisor_pairing(&outside, &form), 0.0);
    }
}
