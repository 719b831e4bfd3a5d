//! Moment estimators and Kolmogorov–Smirnov statistics.

use serde::Serialize;

use crate::quadrature::CompensatedSum;
use crate::{Error, Result};

pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalityMetrics {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_statistic: f64,
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic Kolmogorov critical value `√(−ln(α/2)/2)/√N`.
pub fn ks_critical(alpha: f64, samples: usize) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / (samples as f64).sqrt()
}

/// Two-sample critical value at level `alpha`.
pub fn ks_critical_two_sample(alpha: f64, n: usize, m: usize) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// `sup_x |F_N(x) − F(x)|` for the empirical distribution of `samples`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value() / xs.len() as f64
}

/// Unbiased variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).collect::<CompensatedSum>().value() / (xs.len() as f64 - 1.0)
}

/// Mean, unbiased variance, adjusted skewness `G₁`, adjusted excess
/// kurtosis `G₂` and the KS distance of the standardized sample from the
/// standard normal.
pub fn normality_metrics(samples: &[f64]) -> Result<NormalityMetrics> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    let n = samples.len() as f64;
    let m = mean(samples);
    let central = |p: i32| samples.iter().map(|x| (x - m).powi(p)).collect::<CompensatedSum>().value() / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let variance = m2 * n / (n - 1.0);
    if !(variance > 1e-12 * m * m) || variance == 0.0 {
        return Err(Error::DegenerateVariance { variance, mean: m });
    }
    let g1 = m3 / m2.powf(1.5);
    let skewness = (n * (n - 1.0)).sqrt() / (n - 2.0) * g1;
    let g2 = m4 / (m2 * m2) - 3.0;
    let excess_kurtosis = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0);
    let sd = variance.sqrt();
    let standardized: Vec<f64> = samples.iter().map(|x| (x - m) / sd).collect();
    Ok(NormalityMetrics {
        mean: m,
        variance,
        skewness,
        excess_kurtosis,
        ks_statistic: ks_statistic(&standardized, normal_cdf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_std_complex_gaussians, GaussianStream};

    fn normals(count: usize, seed: u64) -> Vec<f64> {
        // real parts of standard complex Gaussians scaled to unit variance
        sample_std_complex_gaussians(GaussianStream::new(seed, 0), count)
            .into_iter()
            .map(|w| w.re * std::f64::consts::SQRT_2)
            .collect()
    }

    #[test]
    fn critical_values() {
        assert!((ks_critical(0.01, 1) - 1.6276).abs() < 1e-4);
        assert!((ks_critical(0.05, 1) - 1.3581).abs() < 1e-4);
        assert!((ks_critical(0.01, 2000) - 0.0364).abs() < 1e-4);
    }

    #[test]
    fn rejects_small_and_constant_samples() {
        assert!(matches!(normality_metrics(&[1.0; 50]), Err(Error::InsufficientData { .. })));
        assert!(matches!(normality_metrics(&[2.5; 200]), Err(Error::DegenerateVariance { .. })));
    }

    #[test]
    fn standard_normal_sample() {
        let m = normality_metrics(&normals(100_000, 1)).unwrap();
        assert!(m.skewness.abs() <= 0.03, "{m:?}");
        assert!(m.excess_kurtosis.abs() <= 0.06, "{m:?}");
        assert!((m.variance - 1.0).abs() < 0.02);
        let small = normality_metrics(&normals(2000, 2)).unwrap();
        assert!(small.ks_statistic <= ks_critical(0.01, 2000));
    }

    #[test]
    fn exponential_sample_skewness() {
        // |W|² is Exp(1)
        let xs: Vec<f64> = sample_std_complex_gaussians(GaussianStream::new(3, 9), 100_000)
            .into_iter()
            .map(|w| w.norm_sqr())
            .collect();
        let m = normality_metrics(&xs).unwrap();
        assert!((m.skewness - 2.0).abs() <= 0.1, "{m:?}");
    }

    #[test]
    fn ks_against_exact_cdf() {
        let xs = [0.1, 0.4, 0.7];
        // uniform cdf on [0,1]: gaps at 1/3 - 0.1, 0.4 - 1/3, 2/3 - 0.4, 0.7 - 2/3, 1 - 0.7
        assert!((ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) - 0.3).abs() < 1e-15);
        assert!((ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    }
}
