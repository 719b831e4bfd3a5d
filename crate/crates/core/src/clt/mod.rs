//! Linear statistics of zero divisors and the normality experiment.

pub mod conditions;
pub mod normality;
pub mod statistic;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::basis::{build_basis, truncation_degree, QuadratureConfig, DEFAULT_MAX_DEGREE};
use crate::geometry::{TestForm, WeightModel};
use crate::kernel::KernelEvaluator;
use crate::sampling::{draw_section, GaussianStream};
use crate::zeros::{divisor_pairing, section_divisor, DEFAULT_POLISH_TOL};
use crate::{Error, Result};

use conditions::{covariance_energy, st_condition_ii, ConditionGrid};
use normality::{ks_critical, normality_metrics, sample_variance, MIN_SAMPLES};
use statistic::{curvature_term, expectation_from_basis, linear_statistics_pl, PlConfig};

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: WeightModel,
    pub form: TestForm,
    pub n_ladder: Vec<u32>,
    pub samples_per_n: usize,
    /// Samples `0..audit_samples` also get the log-integral routes.
    pub audit_samples: usize,
    pub master_seed: u64,
    pub quad: QuadratureConfig,
    pub truncation_tol: f64,
    pub max_degree: usize,
    pub polish_tol: f64,
    pub b0: f64,
    pub k: u32,
    pub pl: PlConfig,
    pub conditions: ConditionGrid,
    /// Skip the covariance integrals.
    pub skip_conditions: bool,
}

impl ExperimentConfig {
    pub fn new(model: WeightModel, form: TestForm, n_ladder: Vec<u32>, samples_per_n: usize, master_seed: u64) -> Self {
        Self {
            model,
            form,
            n_ladder,
            samples_per_n,
            audit_samples: 100,
            master_seed,
            quad: QuadratureConfig::default(),
            truncation_tol: 1e-12,
            max_degree: DEFAULT_MAX_DEGREE,
            polish_tol: DEFAULT_POLISH_TOL,
            b0: 3.0,
            k: 1,
            pl: PlConfig::default(),
            conditions: ConditionGrid::default(),
            skip_conditions: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_n < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "at least {MIN_SAMPLES} samples per n are required, got {}",
                self.samples_per_n
            )));
        }
        if self.form.support_radius() > self.model.truncation_radius() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "test form support {} exceeds truncation radius {}",
                self.form.support_radius(),
                self.model.truncation_radius()
            )));
        }
        if self.n_ladder.is_empty() || self.n_ladder.contains(&0) {
            return Err(Error::Config("n ladder must be a nonempty list of positive integers".into()));
        }
        if self.n_ladder.iter().any(|&n| n as u64 > u32::MAX as u64 >> 1) || self.samples_per_n > u32::MAX as usize {
            return Err(Error::Config("n or sample count out of range".into()));
        }
        Ok(())
    }
}

/// Per-sample values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleRecord {
    pub n: u32,
    pub sample_index: u32,
    pub stat_zero_route: f64,
    pub stat_pl_route: Option<f64>,
    pub zpsi: Option<f64>,
    pub zeros_in_support: u32,
}

/// Summary at one tensor power.
#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub n: u32,
    pub degree: usize,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_statistic: f64,
    pub ks_critical_1pct: f64,
    pub condition_ii_value: Option<f64>,
    pub condition_ii_near: Option<f64>,
    pub condition_ii_far: Option<f64>,
    pub condition_i_numerator: Option<f64>,
    pub condition_i_ratio: Option<f64>,
    pub pl_vs_zeros_max_rel_diff: f64,
    pub zpsi_shift_sd_ratio: f64,
    pub zpsi_shift_mean: f64,
    pub expectation_kernel_route: Option<f64>,
    pub standard_error: f64,
    pub mean_zeros_in_support: f64,
    pub zeros_in_support_standard_error: f64,
    pub audit_count: usize,
    pub pl_unresolved_cells: usize,
    pub gram_residual: f64,
    pub truncation_tol: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub checksum: String,
}

#[derive(Clone, Debug)]
pub struct CltRun {
    pub reports: Vec<CltReport>,
    pub samples: Vec<SampleRecord>,
}

/// SHA-256 over the sorted sample values, independent of evaluation order.
pub fn sample_checksum(values: &[f64]) -> String {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut hasher = Sha256::new();
    for v in sorted {
        hasher.update(v.to_bits().to_be_bytes());
    }
    hex::encode(hasher.finalize())
}

fn run_one(cfg: &ExperimentConfig, n: u32) -> Result<(CltReport, Vec<SampleRecord>)> {
    let form = &cfg.form;
    let radius = form.support_radius();
    let degree = truncation_degree(&cfg.model, n, radius, cfg.truncation_tol, cfg.max_degree, &cfg.quad)?;
    let basis = build_basis(&cfg.model, n, degree, &cfg.quad)?;
    let curvature = curvature_term(&cfg.model, form, n)?;

    let records: Vec<Result<(SampleRecord, usize)>> = (0..cfg.samples_per_n as u32)
        .into_par_iter()
        .map(|s| {
            let sec = draw_section(&basis, GaussianStream::for_sample(cfg.master_seed, n, s));
            let div = section_divisor(&sec, cfg.polish_tol)?;
            let mut record = SampleRecord {
                n,
                sample_index: s,
                stat_zero_route: divisor_pairing(&div, form),
                stat_pl_route: None,
                zpsi: None,
                zeros_in_support: div.count_in_disk(radius),
            };
            let mut unresolved = 0;
            if (s as usize) < cfg.audit_samples {
                let out = linear_statistics_pl(&sec, form, curvature, &cfg.pl)?;
                record.stat_pl_route = Some(out.pl);
                record.zpsi = Some(out.zpsi);
                unresolved = out.unresolved_cells;
            }
            Ok((record, unresolved))
        })
        .collect();
    let mut samples = Vec::with_capacity(records.len());
    let mut unresolved = 0;
    for r in records {
        let (rec, u) = r?;
        samples.push(rec);
        unresolved += u;
    }

    let stats: Vec<f64> = samples.iter().map(|r| r.stat_zero_route).collect();
    let metrics = normality_metrics(&stats)?;
    let audited: Vec<&SampleRecord> = samples.iter().filter(|r| r.stat_pl_route.is_some()).collect();
    let pl_vs_zeros_max_rel_diff = audited
        .iter()
        .map(|r| (r.stat_pl_route.unwrap() - r.stat_zero_route).abs() / (1.0 + r.stat_zero_route.abs()))
        .fold(0.0, f64::max);
    let shifts: Vec<f64> = audited.iter().map(|r| r.zpsi.unwrap() - r.stat_pl_route.unwrap()).collect();
    let (zpsi_shift_sd_ratio, zpsi_shift_mean) = if shifts.len() >= 2 {
        (
            sample_variance(&shifts).sqrt() / metrics.variance.sqrt(),
            shifts.iter().sum::<f64>() / shifts.len() as f64,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    let expectation = match expectation_from_basis(&basis, form) {
        Ok(v) => Some(v),
        Err(Error::InvalidForm(_)) => None,
        Err(e) => return Err(e),
    };

    let ev = KernelEvaluator::new(basis);
    let (ii, numerator) = if cfg.skip_conditions {
        (None, None)
    } else {
        let ii = st_condition_ii(&ev, radius, cfg.b0, &cfg.conditions)?;
        (Some(ii), Some(covariance_energy(&ev, form, cfg.b0, &cfg.conditions)?))
    };
    let counts: Vec<f64> = samples.iter().map(|r| r.zeros_in_support as f64).collect();
    let zeros_mean = counts.iter().sum::<f64>() / counts.len() as f64;

    let report = CltReport {
        n,
        degree,
        empirical_mean: metrics.mean,
        empirical_variance: metrics.variance,
        skewness: metrics.skewness,
        excess_kurtosis: metrics.excess_kurtosis,
        ks_statistic: metrics.ks_statistic,
        ks_critical_1pct: ks_critical(0.01, stats.len()),
        condition_ii_value: ii.map(|c| c.value),
        condition_ii_near: ii.map(|c| c.near),
        condition_ii_far: ii.map(|c| c.far),
        condition_i_numerator: numerator,
        condition_i_ratio: ii.zip(numerator).map(|(c, num)| num / c.value),
        pl_vs_zeros_max_rel_diff,
        zpsi_shift_sd_ratio,
        zpsi_shift_mean,
        expectation_kernel_route: expectation,
        standard_error: (metrics.variance / stats.len() as f64).sqrt(),
        mean_zeros_in_support: zeros_mean,
        zeros_in_support_standard_error: (sample_variance(&counts) / counts.len() as f64).sqrt(),
        audit_count: audited.len(),
        pl_unresolved_cells: unresolved,
        gram_residual: ev.basis().gram_residual(),
        truncation_tol: cfg.truncation_tol,
        sample_count: stats.len(),
        seed: cfg.master_seed,
        checksum: sample_checksum(&stats),
    };
    Ok((report, samples))
}

/// Runs the experiment at every `n` of the ladder. Results depend only on
/// the configuration, not on the number of worker threads.
pub fn run_clt_experiment(cfg: &ExperimentConfig) -> Result<CltRun> {
    cfg.validate()?;
    let mut reports = Vec::new();
    let mut samples = Vec::new();
    for &n in &cfg.n_ladder {
        let (report, mut recs) = run_one(cfg, n)?;
        reports.push(report);
        samples.append(&mut recs);
    }
    Ok(CltRun { reports, samples })
}
