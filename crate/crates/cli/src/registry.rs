//! Weights registered in code and selectable with `model.kind = custom`.

use holozero::geometry::{CustomWeight, Weight};

pub const CUSTOM_WEIGHTS: &[&str] = &["steep_quartic", "tilted_quartic", "mismatched_laplacian"];

/// `steep_quartic`: `|z|² + 0.1|z|⁴`. Its curvature varies fast enough that
/// the near-diagonal fit is visibly curved at small `n`.
///
/// `tilted_quartic`: `|z|² + 0.1 Re(z)⁴`, not rotation invariant.
///
/// `mismatched_laplacian`: potential `|z|² + 0.05|z|⁴` declared with the
/// flat Laplacian 4. Bases are orthonormal for the true potential while the
/// curvature term uses the declared one, so the two statistic routes
/// disagree.
pub fn custom_weight(name: &str) -> Option<Weight> {
    let w = match name {
        "steep_quartic" => CustomWeight::new(
            name,
            |z| {
                let s = z.norm_sqr();
                s + 0.1 * s * s
            },
            |z| 4.0 + 1.6 * z.norm_sqr(),
            true,
        ),
        "tilted_quartic" => CustomWeight::new(name, |z| z.norm_sqr() + 0.1 * z.re.powi(4), |z| 4.0 + 1.2 * z.re * z.re, false),
        "mismatched_laplacian" => CustomWeight::new(
            name,
            |z| {
                let s = z.norm_sqr();
                s + 0.05 * s * s
            },
            |_| 4.0,
            true,
        ),
        _ => return None,
    };
    Some(Weight::Custom(w))
}
