//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde_json::Value;

use holozero::basis::{
    build_basis_closed_form, build_basis_numeric, truncation_degree, weighted_inner_product, QuadratureConfig,
    DEFAULT_MAX_DEGREE,
};
use holozero::clt::normality::ks_critical;
use holozero::geometry::WeightModel;
use holozero::kernel::KernelEvaluator;
use holozero::Complex64;

type Check = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

struct Run {
    code: i32,
    out: PathBuf,
    elapsed: Duration,
}

impl Run {
    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.out.join(name)).unwrap()).unwrap()
    }
}

fn cli(command: &str, config: &Path, tag: &str) -> Run {
    let out = scratch().join(tag);
    let start = Instant::now();
    let code = holozero_cli::run_from_args([
        "holozero".as_ref(),
        command.as_ref(),
        "--config".as_ref(),
        config.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
        "--no-timestamp".as_ref(),
    ]);
    Run {
        code,
        out,
        elapsed: start.elapsed(),
    }
}

fn full_clt() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| cli("clt", &configs().join("bargmann_fock.cfg"), "clt"))
}

fn clt_report(n: u64) -> Value {
    let r = full_clt().json("clt_report.json");
    r["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["n"] == n)
        .cloned()
        .unwrap_or_else(|| panic!("no report for n = {n}"))
}

fn conditions() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| cli("conditions", &configs().join("bargmann_fock.cfg"), "conditions"))
}

fn kernel_checks() -> &'static [(String, Run)] {
    static RUNS: OnceLock<Vec<(String, Run)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        ["bargmann_fock", "radial_quartic"]
            .iter()
            .map(|m| (m.to_string(), cli("kernel-check", &configs().join(format!("{m}.cfg")), &format!("kernel_{m}"))))
            .collect()
    })
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

fn basis_fidelity() -> Check {
    let model = WeightModel::bargmann_fock(1.0).unwrap();
    let quad = QuadratureConfig::default();
    let (n, degree) = (20u32, 40usize);
    let start = Instant::now();
    let numeric = build_basis_numeric(&model, n, degree, &quad).unwrap();
    let elapsed = start.elapsed();
    let closed = build_basis_closed_form(&model, n, degree, &quad).unwrap();
    // ‖z^k‖² = π k!/n^{k+1}
    let mut norm_err = 0.0f64;
    for k in 0..=degree as u32 {
        let exact = PI.ln() + ln_factorial(k) - (k + 1) as f64 * (n as f64).ln();
        norm_err = norm_err.max(((2.0 * numeric.log_monomial_norm(k as usize) - exact).exp() - 1.0).abs());
    }
    let mut coeff_err = 0.0f64;
    for j in 0..=degree {
        let scale = closed.coefficient(j, j).norm();
        for k in 0..=j {
            coeff_err = coeff_err.max((numeric.coefficient(j, k) - closed.coefficient(j, k)).norm() / scale);
        }
    }
    let c = numeric.coeffs().unwrap();
    let mut gram_err = 0.0f64;
    for (j, k) in [(0, 0), (1, 0), (7, 3), (20, 20), (33, 32), (40, 0), (40, 40)] {
        let v = weighted_inner_product(&c[j][..=j], &c[k][..=k], &model, n, &quad).unwrap();
        let target = if j == k { 1.0 } else { 0.0 };
        gram_err = gram_err.max((v - target).norm());
    }
    let residual = numeric.gram_residual().max(gram_err);
    ensure(
        norm_err <= 1e-8 && coeff_err <= 1e-8 && residual <= 1e-8 && elapsed < Duration::from_secs(5),
        format!(
            "norm rel err {norm_err:.2e}, coefficient rel err {coeff_err:.2e}, Gram residual {residual:.2e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn sunflower(count: usize, twist: f64) -> Vec<Complex64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| Complex64::from_polar(((i as f64 + 0.5) / count as f64).sqrt(), i as f64 * golden + twist))
        .collect()
}

fn kernel_closed_form() -> Check {
    let start = Instant::now();
    let model = WeightModel::bargmann_fock(1.0).unwrap();
    let quad = QuadratureConfig::default();
    let mut parts = Vec::new();
    let mut worst_all = 0.0f64;
    for n in [50u32, 100, 200] {
        let d = truncation_degree(&model, n, 1.0, 1e-14, DEFAULT_MAX_DEGREE, &quad).unwrap();
        let ev = KernelEvaluator::new(build_basis_closed_form(&model, n, d, &quad).unwrap());
        let xs: Vec<_> = sunflower(50, 0.0).into_iter().map(|x| ev.point(x).unwrap()).collect();
        let ys: Vec<_> = sunflower(50, 1.3).into_iter().map(|y| ev.point(y).unwrap()).collect();
        let mut worst = 0.0f64;
        for a in &xs {
            for b in &ys {
                let exact = (-(n as f64) * (a.x - b.x).norm_sqr() / 2.0).exp();
                worst = worst.max((ev.gamma(a, b).unwrap() - exact).abs());
            }
        }
        worst_all = worst_all.max(worst);
        parts.push(format!("n={n}: {worst:.1e}"));
    }
    let elapsed = start.elapsed();
    ensure(
        worst_all <= 1e-6 && elapsed < Duration::from_secs(10),
        format!("max |error| {}, {:.2} s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn near_diagonal_fit() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (model, run) in kernel_checks() {
        let report = run.json("kernel_report.json");
        for r in report["reports"].as_array().unwrap() {
            let (slope, r2) = (f(&r["slope"]), f(&r["r2"]));
            let slope_ok = if model == "bargmann_fock" {
                (slope - 1.0).abs() <= 1e-6
            } else {
                (0.9..=1.1).contains(&slope)
            };
            ok &= slope_ok && r2 >= 0.99;
            parts.push(format!("{model} n={}: slope {slope:.6}, R² {r2:.4}", r["n"]));
        }
    }
    ensure(ok, parts.join("; "))
}

fn off_diagonal_bound() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (model, run) in kernel_checks() {
        let report = run.json("kernel_report.json");
        // k = 1 and b₀ = 3 > √(16/ε) = √8
        ok &= report["k"] == 1 && f(&report["b0"]) > (16.0 / 2.0f64).sqrt();
        let growth: Vec<f64> = report["growth_ratios"].as_array().unwrap().iter().map(f).collect();
        ok &= growth.len() == 2 && growth.iter().all(|g| *g <= 1.3);
        parts.push(format!("{model} growth {growth:.3?}"));
    }
    ensure(ok, parts.join("; "))
}

fn poincare_lelong() -> Check {
    let csv = fs::read_to_string(full_clt().out.join("samples.csv")).unwrap();
    let mut audited = 0;
    let mut worst = 0.0f64;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] != "100" || cols[3].is_empty() {
            continue;
        }
        let zero: f64 = cols[2].parse().unwrap();
        let pl: f64 = cols[3].parse().unwrap();
        audited += 1;
        worst = worst.max((pl - zero).abs() / (1.0 + zero.abs()));
    }
    ensure(
        audited == 100 && worst <= 1e-3,
        format!("{audited} audited samples at n=100, max relative difference {worst:.2e}"),
    )
}

fn expectation() -> Check {
    let r = clt_report(50);
    let (mean, se) = (f(&r["empirical_mean"]), f(&r["standard_error"]));
    let expected = f(&r["expectation_kernel_route"]);
    let (count, count_se) = (f(&r["mean_zeros_in_support"]), f(&r["zeros_in_support_standard_error"]));
    let stat_z = (mean - expected) / se;
    let count_z = (count - 50.0) / count_se;
    ensure(
        r["sample_count"] == 2000 && stat_z.abs() <= 3.0 && count_z.abs() <= 3.0,
        format!(
            "mean {mean:.5} vs kernel route {expected:.5} ({stat_z:+.2} SE); zero count {count:.3} vs 50 ({count_z:+.2} SE)"
        ),
    )
}

fn condition_ii() -> Check {
    let run = conditions();
    let report = run.json("conditions_report.json");
    let entries = report["entries"].as_array().unwrap();
    let mut ok = run.code == 0 && report["trend_checked"] == true;
    let mut parts = Vec::new();
    for w in entries.windows(2) {
        ok &= f(&w[1]["ii_value"]) < f(&w[0]["ii_value"]);
    }
    for e in entries {
        let ratio = f(&e["ii_value"]) / (2.0 * PI / f(&e["n"]));
        if e["n"] == 100 || e["n"] == 200 {
            ok &= (ratio - 1.0).abs() <= 0.2;
        }
        parts.push(format!("n={}: value·n/2π {ratio:.4}", e["n"]));
    }
    ensure(ok, format!("{}; strictly decreasing", parts.join(", ")))
}

fn condition_i() -> Check {
    let report = conditions().json("conditions_report.json");
    // ½∫ψ² for ψ = Δ(1 − |z|²)⁴/4π
    let limit = 24.0 / (35.0 * PI);
    let mut ok = (f(&report["half_psi_square_integral"]) / limit - 1.0).abs() < 1e-10;
    let mut parts = Vec::new();
    for e in report["entries"].as_array().unwrap() {
        let ratio = f(&e["i_ratio"]);
        ok &= ratio > 0.0;
        if e["n"] == 200 {
            ok &= (ratio / limit - 1.0).abs() <= 0.2;
        }
        parts.push(format!("n={}: {ratio:.4}", e["n"]));
    }
    ensure(ok, format!("ratios {} vs limit {limit:.5}", parts.join(", ")))
}

fn main_clt() -> Check {
    let run = full_clt();
    let report = run.json("clt_report.json");
    let r = clt_report(200);
    let critical = ks_critical(0.01, 2000);
    let (ks, skew, kurt) = (f(&r["ks_statistic"]), f(&r["skewness"]), f(&r["excess_kurtosis"]));
    let inversions = report["ks_trend_inversions"].as_u64().unwrap();
    let trend: Vec<f64> = report["reports"].as_array().unwrap().iter().map(|e| f(&e["ks_statistic"])).collect();
    let minutes = run.elapsed.as_secs_f64() / 60.0;
    ensure(
        (critical - 0.0364).abs() < 1e-4
            && ks <= critical
            && skew.abs() <= 0.15
            && kurt.abs() <= 0.3
            && inversions <= 1
            && minutes < 10.0,
        format!(
            "n=200: KS {ks:.4} (limit {critical:.4}), skewness {skew:.3}, excess kurtosis {kurt:.3}; \
             KS trend {trend:.4?} with {inversions} inversions; run {minutes:.1} min, exit {}",
            run.code
        ),
    )
}

fn same_variance() -> Check {
    let report = full_clt().json("clt_report.json");
    let mut ok = true;
    let mut parts = Vec::new();
    for r in report["reports"].as_array().unwrap() {
        let ratio = f(&r["zpsi_shift_sd_ratio"]);
        ok &= r["audit_count"] == 100 && ratio <= 1e-3;
        parts.push(format!("n={}: {ratio:.1e} (shift {:.4})", r["n"], f(&r["zpsi_shift_mean"])));
    }
    ensure(ok, format!("sd(difference)/sd(statistic) {}", parts.join(", ")))
}

fn reproducibility() -> Check {
    let config = scratch().join("repro.cfg");
    fs::write(
        &config,
        "model.n_ladder = 30, 60\nclt.samples = 150\nclt.seed = 31\nclt.audit_samples = 5\n",
    )
    .unwrap();
    let a = cli("clt", &config, "repro_a");
    let b = cli("clt", &config, "repro_b");
    let mut files = Vec::new();
    for entry in fs::read_dir(&a.out).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name != "manifest.json" {
            files.push(name);
        }
    }
    files.sort();
    let differing: Vec<&String> = files
        .iter()
        .filter(|name| fs::read(a.out.join(name)).ok() != fs::read(b.out.join(name)).ok())
        .collect();
    ensure(
        a.code == b.code && files.len() >= 4 && differing.is_empty(),
        format!("{} report files compared, {} differ", files.len(), differing.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("basis fidelity", basis_fidelity),
        ("kernel closed form", kernel_closed_form),
        ("near-diagonal fit", near_diagonal_fit),
        ("off-diagonal bound", off_diagonal_bound),
        ("log-integral identity", poincare_lelong),
        ("expectation and zero count", expectation),
        ("covariance condition (ii)", condition_ii),
        ("covariance condition (i)", condition_i),
        ("normality at n = 200", main_clt),
        ("deterministic shift", same_variance),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
