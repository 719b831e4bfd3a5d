//! The four subcommands. Each writes its reports into the output directory
//! and returns a [`Failure`] carrying the exit code when a check fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use holozero::basis::{build_basis, truncation_degree, BasisMethod, SectionBasis};
use holozero::clt::conditions::{covariance_energy, st_condition_ii, ConditionGrid};
use holozero::clt::normality::ks_critical;
use holozero::clt::statistic::density_square_integral;
use holozero::clt::{run_clt_experiment, CltReport, ExperimentConfig};
use holozero::geometry::{TestForm, WeightModel};
use holozero::kernel::{asymptotics_precondition, asymptotics_report, AsymptoticsGrid, AsymptoticsReport, KernelEvaluator};
use holozero::sampling::{draw_section, GaussianStream};
use holozero::zeros::section_divisor;

use crate::config::RunConfig;
use crate::output::{normal_density_curve, standardized_histogram, OutputDir};
use crate::{exit, Failure};

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a mut OutputDir,
    pub workers: usize,
    pub dump_coeffs: bool,
    pub dump_divisors: bool,
    pub durations_ms: BTreeMap<String, u64>,
}

impl Context<'_> {
    fn timed<T>(&mut self, label: String, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let value = f();
        self.durations_ms.insert(label, start.elapsed().as_millis() as u64);
        value
    }
}

fn setup(cfg: &RunConfig) -> Result<(WeightModel, TestForm), Failure> {
    Ok((cfg.model()?, cfg.form()?))
}

fn basis_at(cfg: &RunConfig, model: &WeightModel, n: u32, radius: f64, tol: f64) -> Result<SectionBasis, Failure> {
    let degree = truncation_degree(model, n, radius, tol, cfg.max_degree, &cfg.quad)?;
    Ok(build_basis(model, n, degree, &cfg.quad)?)
}

#[derive(Serialize)]
struct BasisEntry {
    n: u32,
    degree: usize,
    dimension: usize,
    method: BasisMethod,
    gram_residual: f64,
    passed: bool,
}

#[derive(Serialize)]
struct BasisReport {
    model: String,
    radius: f64,
    truncation_tol: f64,
    residual_threshold: f64,
    workers: usize,
    entries: Vec<BasisEntry>,
    passed: bool,
}

pub fn basis(ctx: &mut Context<'_>) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (model, form) = setup(cfg)?;
    let radius = form.support_radius();
    let mut entries = Vec::new();
    for &n in &cfg.n_ladder {
        let basis = ctx.timed(format!("basis_n{n}"), || basis_at(cfg, &model, n, radius, cfg.basis_tol))?;
        eprintln!("n = {n}: degree {}, residual {:e}", basis.degree(), basis.gram_residual());
        if ctx.dump_coeffs {
            let mut text = String::from("j,k,re,im\n");
            for j in 0..basis.dimension() {
                for k in 0..=j {
                    let c = basis.coefficient(j, k);
                    if c.re != 0.0 || c.im != 0.0 {
                        let _ = writeln!(text, "{j},{k},{},{}", c.re, c.im);
                    }
                }
            }
            ctx.out.write_text(&format!("basis_coeffs_n{n}.csv"), &text)?;
        }
        entries.push(BasisEntry {
            n,
            degree: basis.degree(),
            dimension: basis.dimension(),
            method: basis.method(),
            gram_residual: basis.gram_residual(),
            passed: basis.gram_residual() <= cfg.residual_threshold,
        });
    }
    let report = BasisReport {
        model: model.weight().label(),
        radius,
        truncation_tol: cfg.basis_tol,
        residual_threshold: cfg.residual_threshold,
        workers: ctx.workers,
        passed: entries.iter().all(|e| e.passed),
        entries,
    };
    ctx.out.write_json("basis_report.json", &report)?;
    if let Some(bad) = report.entries.iter().find(|e| !e.passed) {
        return Err(Failure::new(
            exit::BASIS,
            format!("Gram residual {:e} at n = {} exceeds {:e}", bad.gram_residual, bad.n, cfg.residual_threshold),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelCheckReport {
    model: String,
    region_radius: f64,
    b0: f64,
    k: u32,
    truncation_tol: f64,
    slope_min: f64,
    slope_max: f64,
    min_r2: f64,
    max_growth: f64,
    workers: usize,
    reports: Vec<AsymptoticsReport>,
    growth_ratios: Vec<f64>,
    failures: Vec<String>,
    passed: bool,
}

pub fn kernel_check(ctx: &mut Context<'_>) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (model, _) = setup(cfg)?;
    let grid = AsymptoticsGrid::new(cfg.asym_region);
    let mut splits = Vec::new();
    for &n in &cfg.n_ladder {
        splits.push(asymptotics_precondition(&model, n, cfg.b0, cfg.k)?);
    }
    let mut reports = Vec::new();
    for (&n, split) in cfg.n_ladder.iter().zip(splits) {
        let report = ctx.timed(format!("kernel_n{n}"), || -> Result<AsymptoticsReport, Failure> {
            let ev = KernelEvaluator::new(basis_at(cfg, &model, n, grid.reach(split), cfg.asym_tol)?);
            Ok(asymptotics_report(&ev, cfg.b0, cfg.k, &grid)?)
        })?;
        eprintln!(
            "n = {n}: slope {:.6}, R² {:.6}, off-diagonal max {:.4e}",
            report.slope, report.r2, report.offdiag_max_scaled
        );
        ctx.out.write_columns(
            &format!("kernel_fit_n{n}.dat"),
            "Psi^2  -4 log Gamma_n / n",
            &report.plot,
        )?;
        reports.push(report);
    }

    let mut failures = Vec::new();
    for r in &reports {
        if !(r.slope >= cfg.slope_min && r.slope <= cfg.slope_max) {
            failures.push(format!("n = {}: slope {} outside [{}, {}]", r.n, r.slope, cfg.slope_min, cfg.slope_max));
        }
        if !(r.r2 >= cfg.min_r2) {
            failures.push(format!("n = {}: R² {} below {}", r.n, r.r2, cfg.min_r2));
        }
    }
    let growth_ratios: Vec<f64> = reports
        .windows(2)
        .map(|w| w[1].offdiag_max_scaled / w[0].offdiag_max_scaled)
        .collect();
    for (w, g) in reports.windows(2).zip(&growth_ratios) {
        if !(*g <= cfg.max_growth) {
            failures.push(format!(
                "off-diagonal bound grows by {g} from n = {} to n = {}",
                w[0].n, w[1].n
            ));
        }
    }
    let report = KernelCheckReport {
        model: model.weight().label(),
        region_radius: cfg.asym_region,
        b0: cfg.b0,
        k: cfg.k,
        truncation_tol: cfg.asym_tol,
        slope_min: cfg.slope_min,
        slope_max: cfg.slope_max,
        min_r2: cfg.min_r2,
        max_growth: cfg.max_growth,
        workers: ctx.workers,
        reports,
        growth_ratios,
        passed: failures.is_empty(),
        failures,
    };
    ctx.out.write_json("kernel_report.json", &report)?;
    if !report.passed {
        return Err(Failure::new(exit::FIT, report.failures.join("; ")));
    }
    Ok(())
}

#[derive(Serialize)]
struct CltThresholds {
    audit_tol: f64,
    shift_ratio_tol: f64,
    ks_alpha: f64,
    ks_critical: f64,
    max_abs_skewness: f64,
    max_abs_excess_kurtosis: f64,
}

#[derive(Serialize)]
struct CltSummary {
    model: String,
    form: String,
    n_ladder: Vec<u32>,
    samples_per_n: usize,
    audit_samples: usize,
    seed: u64,
    /// Region of the covariance conditions: the support disk of the form.
    condition_region_radius: f64,
    thresholds: CltThresholds,
    ks_trend_inversions: usize,
    workers: usize,
    reports: Vec<CltReport>,
    audit_passed: bool,
    normality_passed: bool,
    failures: Vec<String>,
}

fn audit_failures(r: &CltReport, cfg: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    if r.audit_count > 0 && !(r.pl_vs_zeros_max_rel_diff <= cfg.audit_tol) {
        out.push(format!(
            "n = {}: log-integral and zero-sum routes differ by {:e} (relative)",
            r.n, r.pl_vs_zeros_max_rel_diff
        ));
    }
    if r.audit_count > 1 && !(r.zpsi_shift_sd_ratio <= cfg.shift_ratio_tol) {
        out.push(format!(
            "n = {}: shift between normalized and section routes varies, sd ratio {:e}",
            r.n, r.zpsi_shift_sd_ratio
        ));
    }
    out
}

fn normality_failures(r: &CltReport, cfg: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    let critical = ks_critical(cfg.ks_alpha, r.sample_count);
    if !(r.ks_statistic <= critical) {
        out.push(format!("n = {}: KS statistic {} exceeds {}", r.n, r.ks_statistic, critical));
    }
    if !(r.skewness.abs() <= cfg.max_abs_skewness) {
        out.push(format!("n = {}: skewness {}", r.n, r.skewness));
    }
    if !(r.excess_kurtosis.abs() <= cfg.max_abs_excess_kurtosis) {
        out.push(format!("n = {}: excess kurtosis {}", r.n, r.excess_kurtosis));
    }
    out
}

pub fn clt(ctx: &mut Context<'_>) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (model, form) = setup(cfg)?;
    let mut exp = ExperimentConfig::new(model.clone(), form.clone(), cfg.n_ladder.clone(), cfg.samples, cfg.seed);
    exp.audit_samples = cfg.audit_samples;
    exp.quad = cfg.quad;
    exp.truncation_tol = cfg.basis_tol;
    exp.max_degree = cfg.max_degree;
    exp.polish_tol = cfg.polish_tol;
    exp.b0 = cfg.b0;
    exp.k = cfg.k;
    exp.skip_conditions = !cfg.clt_conditions;
    exp.validate()?;

    let run = ctx.timed("clt".into(), || run_clt_experiment(&exp))?;

    let mut csv = String::from("n,sample_index,stat_zero_route,stat_pl_route_or_empty\n");
    for s in &run.samples {
        let pl = s.stat_pl_route.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{}", s.n, s.sample_index, s.stat_zero_route, pl);
    }
    ctx.out.write_text("samples.csv", &csv)?;
    for r in &run.reports {
        let values: Vec<f64> = run.samples.iter().filter(|s| s.n == r.n).map(|s| s.stat_zero_route).collect();
        let hist = standardized_histogram(&values, r.empirical_mean, r.empirical_variance.sqrt(), 40);
        ctx.out.write_columns(&format!("histogram_n{}.dat", r.n), "standardized statistic  density", &hist)?;
        eprintln!(
            "n = {}: degree {}, mean {:.5}, var {:.5}, KS {:.5}, skew {:.4}, kurt {:.4}",
            r.n, r.degree, r.empirical_mean, r.empirical_variance, r.ks_statistic, r.skewness, r.excess_kurtosis
        );
    }
    ctx.out
        .write_columns("normal_density.dat", "x  standard normal density", &normal_density_curve(161))?;

    if ctx.dump_coeffs || ctx.dump_divisors {
        let start = Instant::now();
        dump_samples(cfg, &model, &form, ctx.dump_coeffs, ctx.dump_divisors, ctx.out)?;
        ctx.durations_ms.insert("dumps".into(), start.elapsed().as_millis() as u64);
    }

    let ks: Vec<f64> = run.reports.iter().map(|r| r.ks_statistic).collect();
    let audit: Vec<String> = run.reports.iter().flat_map(|r| audit_failures(r, cfg)).collect();
    let last = run.reports.last().expect("ladder is nonempty");
    let normality = normality_failures(last, cfg);
    let summary = CltSummary {
        model: model.weight().label(),
        form: form.label(),
        n_ladder: cfg.n_ladder.clone(),
        samples_per_n: cfg.samples,
        audit_samples: cfg.audit_samples,
        seed: cfg.seed,
        condition_region_radius: form.support_radius(),
        thresholds: CltThresholds {
            audit_tol: cfg.audit_tol,
            shift_ratio_tol: cfg.shift_ratio_tol,
            ks_alpha: cfg.ks_alpha,
            ks_critical: ks_critical(cfg.ks_alpha, cfg.samples),
            max_abs_skewness: cfg.max_abs_skewness,
            max_abs_excess_kurtosis: cfg.max_abs_excess_kurtosis,
        },
        ks_trend_inversions: ks.windows(2).filter(|w| w[1] > w[0]).count(),
        workers: ctx.workers,
        audit_passed: audit.is_empty(),
        normality_passed: normality.is_empty(),
        failures: audit.iter().chain(&normality).cloned().collect(),
        reports: run.reports.clone(),
    };
    ctx.out.write_json("clt_report.json", &summary)?;
    if !audit.is_empty() {
        return Err(Failure::new(exit::AUDIT, audit.join("; ")));
    }
    if !normality.is_empty() {
        return Err(Failure::new(exit::STATISTICS, normality.join("; ")));
    }
    Ok(())
}

fn dump_samples(
    cfg: &RunConfig,
    model: &WeightModel,
    form: &TestForm,
    coeffs: bool,
    divisors: bool,
    out: &mut OutputDir,
) -> Result<(), Failure> {
    for &n in &cfg.n_ladder {
        let basis = basis_at(cfg, model, n, form.support_radius(), cfg.basis_tol)?;
        if coeffs {
            let mut text = String::from("n,sample_index");
            for j in 0..basis.dimension() {
                let _ = write!(text, ",re_{j},im_{j}");
            }
            text.push('\n');
            for s in 0..cfg.samples as u32 {
                let sec = draw_section(&basis, GaussianStream::for_sample(cfg.seed, n, s));
                let _ = write!(text, "{n},{s}");
                for c in sec.coeffs() {
                    let _ = write!(text, ",{},{}", c.re, c.im);
                }
                text.push('\n');
            }
            out.write_text(&format!("sample_coeffs_n{n}.csv"), &text)?;
        }
        if divisors {
            let rows: Vec<holozero::Result<String>> = (0..cfg.samples as u32)
                .into_par_iter()
                .map(|s| {
                    let sec = draw_section(&basis, GaussianStream::for_sample(cfg.seed, n, s));
                    let div = section_divisor(&sec, cfg.polish_tol)?;
                    let mut rows = String::new();
                    for (z, m) in &div.points {
                        let _ = writeln!(rows, "{n},{s},{},{},{m}", z.re, z.im);
                    }
                    Ok(rows)
                })
                .collect();
            let mut text = String::from("n,sample_index,re,im,multiplicity\n");
            for r in rows {
                text.push_str(&r?);
            }
            out.write_text(&format!("divisors_n{n}.csv"), &text)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ConditionsEntry {
    n: u32,
    degree: usize,
    ii_value: f64,
    ii_near: f64,
    ii_far: f64,
    ii_times_n: f64,
    ii_argmax: [f64; 2],
    split_radius: f64,
    i_numerator: f64,
    i_ratio: f64,
}

#[derive(Serialize)]
struct ConditionsReport {
    model: String,
    form: String,
    /// Both conditions are integrated over the support disk of the form.
    region_radius: f64,
    b0: f64,
    grid: ConditionGrid,
    half_psi_square_integral: f64,
    i_floor: f64,
    trend_checked: bool,
    trend_note: Option<String>,
    workers: usize,
    entries: Vec<ConditionsEntry>,
    failures: Vec<String>,
    passed: bool,
}

pub fn conditions(ctx: &mut Context<'_>) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (model, form) = setup(cfg)?;
    let region = form.support_radius();
    let grid = ConditionGrid::default();
    let mut ladder = cfg.n_ladder.clone();
    ladder.sort_unstable();
    ladder.dedup();

    let mut entries = Vec::new();
    for &n in &ladder {
        let entry = ctx.timed(format!("conditions_n{n}"), || -> Result<ConditionsEntry, Failure> {
            let ev = KernelEvaluator::new(basis_at(cfg, &model, n, region, cfg.basis_tol)?);
            let ii = st_condition_ii(&ev, region, cfg.b0, &grid)?;
            let numerator = covariance_energy(&ev, &form, cfg.b0, &grid)?;
            Ok(ConditionsEntry {
                n,
                degree: ev.basis().degree(),
                ii_value: ii.value,
                ii_near: ii.near,
                ii_far: ii.far,
                ii_times_n: ii.value * n as f64,
                ii_argmax: [ii.argmax_re, ii.argmax_im],
                split_radius: ii.split_radius,
                i_numerator: numerator,
                i_ratio: numerator / ii.value,
            })
        })?;
        eprintln!(
            "n = {n}: sup integral {:.6e} (times n {:.5}), ratio {:.5}",
            entry.ii_value, entry.ii_times_n, entry.i_ratio
        );
        entries.push(entry);
    }

    let mut failures = Vec::new();
    for e in &entries {
        if !(e.i_ratio > 0.0 && e.i_ratio >= cfg.i_floor) {
            failures.push(format!("n = {}: ratio {} below floor {}", e.n, e.i_ratio, cfg.i_floor));
        }
    }
    let trend_checked = entries.len() >= 2;
    for w in entries.windows(2) {
        if !(w[1].ii_value < w[0].ii_value) {
            failures.push(format!(
                "sup integral does not decrease from n = {} to n = {}",
                w[0].n, w[1].n
            ));
        }
    }
    let series = |f: fn(&ConditionsEntry) -> f64| -> Vec<(f64, f64)> { entries.iter().map(|e| (e.n as f64, f(e))).collect() };
    ctx.out
        .write_columns("conditions_ii.dat", "n  sup integral (log-log)", &series(|e| e.ii_value))?;
    ctx.out
        .write_columns("conditions_i.dat", "n  covariance ratio (log-log)", &series(|e| e.i_ratio))?;
    let report = ConditionsReport {
        model: model.weight().label(),
        form: form.label(),
        region_radius: region,
        b0: cfg.b0,
        grid,
        half_psi_square_integral: 0.5 * density_square_integral(&form),
        i_floor: cfg.i_floor,
        trend_checked,
        trend_note: (!trend_checked).then(|| "single n: decrease of the sup integral not checked".to_string()),
        workers: ctx.workers,
        entries,
        passed: failures.is_empty(),
        failures,
    };
    ctx.out.write_json("conditions_report.json", &report)?;
    if !report.passed {
        return Err(Failure::new(exit::STATISTICS, report.failures.join("; ")));
    }
    Ok(())
}
