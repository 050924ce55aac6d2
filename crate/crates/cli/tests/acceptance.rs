//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! A failure marked as known is expected with the documented data; the
//! process exits nonzero only on other failures.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::ChaCha20Rng;
use rand::{RngExt, SeedableRng};
use svcert::experiments::{empirical_risk, gen_sinc, monte_carlo_validation, ValidationParams};
use svcert::qp::{kkt_residuals, solve_qp};
use svcert::risk_bounds::*;
use svcert::sv_models::*;
use svcert::{KernelSpec, QpProblem, SincConfig, SolveStatus, SolverSettings};

const ENDPOINT_TOL: f64 = 0.002;
const ORACLE_TOL: f64 = 1e-9;
const QP_TOL: f64 = 1e-6;
const KKT_TOL: f64 = 1e-6;

struct Check {
    pass: bool,
    known: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, known: false, detail: detail.into() }
    }
}

fn gaussian() -> KernelSpec {
    KernelSpec::Gaussian { width: 1.0 }
}

fn query(n: usize, k: usize, beta: f64) -> BoundQuery {
    BoundQuery::new(n, k, beta).unwrap()
}

fn bound_reproduction() -> Check {
    let start = Instant::now();
    let r = epsilon_bounds(&query(2000, 105, 1e-4)).unwrap();
    let elapsed = start.elapsed();
    let pass = (r.lower - 0.032).abs() <= ENDPOINT_TOL
        && (r.upper - 0.08).abs() <= ENDPOINT_TOL
        && elapsed < Duration::from_secs(1);
    Check::new(pass, format!("[{:.5}, {:.5}] in {elapsed:.2?}", r.lower, r.upper))
}

fn table_check() -> Check {
    let start = Instant::now();
    let tables: Vec<Vec<RiskInterval>> = [1e-4, 1e-6, 1e-8]
        .iter()
        .map(|&beta| epsilon_table(2000, beta).unwrap())
        .collect();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    for (b, table) in tables.iter().enumerate() {
        if table.len() != 2001 {
            problems.push(format!("table {b} has {} rows", table.len()));
        }
        if table[2000].upper != 1.0 {
            problems.push(format!("eps_upper(2000) = {}", table[2000].upper));
        }
        for r in table {
            if r.lower > r.upper {
                problems.push(format!("k={} lower above upper", r.query.complexity()));
            }
        }
    }
    for pair in tables.windows(2) {
        for (wide, narrow) in pair[1].iter().zip(&pair[0]) {
            if wide.lower > narrow.lower || wide.upper < narrow.upper {
                problems.push(format!("k={} not nested", wide.query.complexity()));
            }
        }
    }
    let pass = problems.is_empty() && elapsed < Duration::from_secs(60);
    Check::new(pass, format!("3 tables in {elapsed:.1?}; {}", summarize(&problems)))
}

fn summarize(problems: &[String]) -> String {
    match problems {
        [] => "no violations".into(),
        [first, ..] => format!("{} violations, first: {first}", problems.len()),
    }
}

fn oracle_check() -> Check {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=20u64 {
        for k in 0..=n {
            for beta in [0.05, 0.2] {
                let (lo, hi) = common::exact_root_oracle(n, k, beta).unwrap();
                let r = epsilon_bounds(&query(n as usize, k as usize, beta)).unwrap();
                worst = worst.max((r.lower - lo).abs()).max((r.upper - hi).abs());
                cases += 1;
            }
        }
    }
    Check::new(worst <= ORACLE_TOL, format!("{cases} cases, max deviation {worst:.2e}"))
}

fn sandwich_check() -> Check {
    let mut problems = Vec::new();
    let mut fixed_k_holds_to = 0;
    for beta in [1e-2, 1e-4] {
        let mut tables = Vec::new();
        for n in [50, 200, 2000] {
            let table = epsilon_table(n, beta).unwrap();
            for r in &table[1..] {
                let e = explicit_bounds(&r.query);
                if e.lower_floor > r.lower || r.upper > e.upper_cap {
                    problems.push(format!("N={n} k={} beta={beta}", r.query.complexity()));
                }
            }
            tables.push(table);
        }
        let (small, big) = (&tables[1], &tables[2]);
        // same ratio k/N at both sample sizes; k = N has a zero gap on both
        for k in 1..200usize {
            let ratio = k as f64 / 200.0;
            let (s, b) = (&small[k], &big[10 * k]);
            if !((b.upper - ratio) < (s.upper - ratio) && (ratio - b.lower) < (ratio - s.lower)) {
                problems.push(format!("trend at k/N={ratio} beta={beta}"));
            }
        }
        // the same k at both sizes, reported only
        let holds = (1..=200usize)
            .take_while(|&k| {
                let (s, b) = (&small[k], &big[k]);
                (b.upper - k as f64 / 2000.0).abs() < (s.upper - k as f64 / 200.0).abs()
                    && (k as f64 / 2000.0 - b.lower).abs() < (k as f64 / 200.0 - s.lower).abs()
            })
            .count();
        fixed_k_holds_to = if fixed_k_holds_to == 0 { holds } else { fixed_k_holds_to.min(holds) };
    }
    Check::new(
        problems.is_empty(),
        format!(
            "explicit bounds and ratio trend: {}; equal-k trend holds for k <= {fixed_k_holds_to}",
            summarize(&problems)
        ),
    )
}

fn coverage_check() -> Check {
    let start = Instant::now();
    let config = SincConfig {
        n_train: 200,
        noise_scale: 1.0,
        seed: 1,
        ..SincConfig::default()
    };
    let params = ValidationParams {
        rho: 10.0 * 0.6f64.powi(9),
        tau: 0.01,
        kernel: gaussian(),
        beta: 1e-2,
        n_trials: 100,
        n_test: 20_000,
    };
    let report = monte_carlo_validation(&config, &params, &SolverSettings::default()).unwrap();
    let elapsed = start.elapsed();
    let pass = report.coverage_count >= 97 && elapsed < Duration::from_secs(600);
    Check::new(pass, format!("{}/{} covered in {elapsed:.1?}", report.coverage_count, report.n_trials))
}

fn spot_check() -> Check {
    let start = Instant::now();
    let train = gen_sinc(&SincConfig { n_train: 2000, seed: 1, ..SincConfig::default() }).unwrap();
    let test = gen_sinc(&SincConfig { n_train: 10_000, seed: 99, ..SincConfig::default() }).unwrap();
    let model = fit_svr(&train, 0.01, 0.6f64.powi(9), &gaussian(), &SolverSettings::default()).unwrap();
    let cert = certify(CertificateKind::Svr, model.s_star, train.len(), 1e-4).unwrap();
    let cost = model.cost();
    let s_star = model.s_star;
    let risk = empirical_risk(&TrainedModel::Svr(model), &test).unwrap();
    let elapsed = start.elapsed();
    let s_ok = (80..=135).contains(&s_star);
    let cost_ok = (0.2..=0.45).contains(&cost);
    let risk_ok = cert.interval.contains(risk);
    let pass = s_ok && cost_ok && risk_ok && elapsed < Duration::from_secs(900);
    let mut detail = format!(
        "s*={s_star} cost={cost:.4} risk={risk:.4} in [{:.5}, {:.5}], {elapsed:.1?}",
        cert.interval.lower, cert.interval.upper
    );
    let mut check = Check::new(pass, String::new());
    if !cost_ok {
        detail += "; cost outside [0.2, 0.45] with unit-scale Laplace noise";
        check.known = s_ok && risk_ok && elapsed < Duration::from_secs(900);
    }
    check.detail = detail;
    check
}

fn qp_check() -> Check {
    let settings = SolverSettings::default();
    let mut worst: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..100 {
        let (p, q, a, l, u) = common::random_qp(seed);
        let expected = common::enumerate_qp(&p, &q, &a, &l, &u).unwrap();
        let problem = QpProblem::new(p, q, a, l, u).unwrap();
        let sol = solve_qp(&problem, &settings).unwrap();
        if sol.status != SolveStatus::Optimal {
            failures += 1;
        }
        worst = worst.max((&sol.primal - &expected).amax());
        worst_kkt = worst_kkt.max(kkt_residuals(&problem, &sol).max());
    }
    let data = gen_sinc(&SincConfig { n_train: 80, noise_scale: 0.3, seed: 4, ..SincConfig::default() }).unwrap();
    let labels = labelled(60, 5);
    let models = [
        fit_svr(&data, 0.01, 0.6f64.powi(3), &gaussian(), &settings).unwrap().kkt_residual,
        fit_svdd(&data, 0.1, &gaussian(), &settings).unwrap().kkt_residual,
        fit_svm(&labels, 0.5, &gaussian(), &settings).unwrap().kkt_residual,
    ];
    let model_kkt = models.iter().copied().fold(0.0, f64::max);
    let pass = failures == 0 && worst <= QP_TOL && worst_kkt <= KKT_TOL && model_kkt <= KKT_TOL;
    Check::new(
        pass,
        format!("100 QPs, max error {worst:.1e}, max KKT {worst_kkt:.1e}; model KKT {model_kkt:.1e}"),
    )
}

fn fixture_check() -> Check {
    let settings = SolverSettings::default();
    let mut failed = Vec::new();
    let mut expect = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };

    let one = Dataset::from_scalars(&[0.4], &[1.7]).unwrap();
    let m = fit_svr(&one, 0.01, 2.0, &gaussian(), &settings).unwrap();
    expect("svr one point", m.tube == 0.0 && (m.offset - 1.7).abs() < 1e-8 && m.cost().abs() < 1e-8 && m.s_star == 1);

    let pair = Dataset::from_scalars(&[0.5, 0.5], &[1.0, -1.0]).unwrap();
    let m = fit_svr(&pair, 0.01, 100.0, &gaussian(), &settings).unwrap();
    expect(
        "svr identical pair",
        (m.tube - 1.0).abs() < 1e-6 && m.offset.abs() < 1e-6 && m.w_norm_sq < 1e-10 && m.s_star == 2,
    );

    let line = Dataset::new(vec![vec![0.0], vec![1.0], vec![4.0]], None).unwrap();
    let m = fit_svdd(&line, 1e3, &KernelSpec::Linear, &settings).unwrap();
    let center: f64 = m.dual_coeffs.iter().zip(line.inputs()).map(|(b, u)| b * u[0]).sum();
    expect("svdd collinear", (center - 2.0).abs() < 1e-6 && (m.radius_sq - 4.0).abs() < 1e-6 && m.s_star == 2);

    let pts = Dataset::new(vec![vec![0.3], vec![-1.0], vec![2.2], vec![0.9]], None).unwrap();
    let m = fit_svdd(&pts, 0.2, &KernelSpec::Linear, &settings).unwrap();
    expect(
        "svdd small weight",
        m.radius_sq == 0.0 && m.dual_coeffs.iter().all(|&b| (b - 0.25).abs() < 1e-15) && m.s_star == 4,
    );

    let positive = Dataset::from_scalars(&[0.1, 0.7, -1.2, 2.0], &[1.0; 4]).unwrap();
    let m = fit_svm(&positive, 1.0, &gaussian(), &settings).unwrap();
    expect("svm one label", m.w_is_zero && m.offset == -1.0 && m.s_star == 0);

    let separable = Dataset::from_scalars(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
    let m = fit_svm(&separable, 1e6, &KernelSpec::Linear, &settings).unwrap();
    let w: f64 = m.dual_coeffs.iter().zip(separable.inputs()).map(|(a, u)| a * u[0]).sum();
    expect("svm separable", (w - 1.0).abs() < 1e-6 && m.offset.abs() < 1e-6 && m.s_star == 2);

    let labels: Vec<f64> = (0..1000).map(|i| if i < 960 { 1.0 } else { -1.0 }).collect();
    let minority = Dataset::new(vec![vec![0.0]; 1000], Some(labels)).unwrap();
    let m = fit_svm(&minority, 1.0, &KernelSpec::Linear, &settings).unwrap();
    expect("svm 960/40", m.w_is_zero && m.s_star == 40);

    let pass = failed.is_empty();
    let detail = if pass { "7 fixtures".to_string() } else { format!("failed: {}", failed.join(", ")) };
    Check::new(pass, detail)
}

fn labelled(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let u = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let side = if u[0] * u[0] + u[1] < 1.0 { 1.0 } else { -1.0 };
        labels.push(if rng.random_bool(0.15) { -side } else { side });
        inputs.push(u);
    }
    Dataset::new(inputs, Some(labels)).unwrap()
}

fn implication_check() -> Check {
    let settings = SolverSettings::default();
    let (mut checked, mut misclassified, mut bad) = (0usize, 0usize, 0usize);
    for seed in 0..20u64 {
        let rho = [0.05, 0.5, 5.0][seed as usize % 3];
        let model = TrainedModel::Svm(fit_svm(&labelled(25, 100 + seed), rho, &gaussian(), &settings).unwrap());
        let eval = labelled(5000, 1000 + seed);
        let violated = model.violations(&eval).unwrap();
        let preds = model.predict_many(eval.inputs()).unwrap();
        for ((p, y), v) in preds.iter().zip(eval.outputs().unwrap()).zip(&violated) {
            let Prediction::Class { score, .. } = *p else { unreachable!() };
            if y * score < 0.0 {
                misclassified += 1;
                if !v {
                    bad += 1;
                }
            }
            checked += 1;
        }
    }
    Check::new(
        bad == 0 && checked == 100_000,
        format!("{checked} points, {misclassified} misclassified, {bad} misclassified without violation"),
    )
}

fn determinism_check() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = support::run_pipeline(a.path());
    let second = support::run_pipeline(b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|((_, x), (_, y))| x != y || x.is_empty())
        .map(|((name, _), _)| name.as_str())
        .collect();
    let detail = if differing.is_empty() {
        format!("{} output files identical", first.len())
    } else {
        format!("differ: {}", differing.join(", "))
    };
    Check::new(differing.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("bound reproduction", bound_reproduction),
        ("bounds tables", table_check),
        ("oracle equivalence", oracle_check),
        ("explicit sandwich and trend", sandwich_check),
        ("coverage at desk scale", coverage_check),
        ("full-scale spot check", spot_check),
        ("qp correctness", qp_check),
        ("method fixtures", fixture_check),
        ("svm implication", implication_check),
        ("cli determinism", determinism_check),
    ];
    let mut unexpected = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let check = run();
        let verdict = match (check.pass, check.known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("{verdict} {name}: {} [{:.1?}]", check.detail, start.elapsed());
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
