//! SVG renderings of the CSV artifacts.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use svcert::experiments::{read_bounds_csv, read_dataset_csv, read_sweep_csv, read_validation_csv};
use svcert::sv_models::{ModelDocument, TrainedModel};

use crate::output::read_to_string;
use crate::svg::{document, Axis, Chart, BLUE, GREEN, GREY, RED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Bounds table: both endpoints against the complexity.
    Bounds,
    /// Sweep table: cost and risk interval against the relaxation weight.
    #[value(name = "cost_risk")]
    CostRisk,
    /// Validation report: per-trial risk against the complexity.
    Scatter,
    /// Dataset and an SVR model: points, center curve and tube.
    Tube,
}

const SCHEMAS: [(Kind, &str); 4] = [
    (Kind::Bounds, "k,eps_lower,eps_upper"),
    (Kind::CostRisk, "rho,cost,tube,s_star,eps_lower,eps_upper"),
    (Kind::Scatter, "trial,s_star,empirical_risk,eps_lower,eps_upper,covered"),
    (Kind::Tube, "m,y"),
];

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

pub fn render(kind: Kind, input: &Path, model: Option<&Path>, bounds: Option<&Path>) -> Result<String> {
    let schema = SCHEMAS.iter().find(|(k, _)| *k == kind).map(|(_, s)| *s).unwrap_or_default();
    let context = || format!("{} does not match the {kind:?} schema ({schema})", input.display());
    let charts = match kind {
        Kind::Bounds => vec![bounds_chart(input).with_context(context)?],
        Kind::CostRisk => cost_risk_charts(input).with_context(context)?,
        Kind::Scatter => vec![scatter_chart(input, bounds).with_context(context)?],
        Kind::Tube => {
            let Some(model) = model else {
                bail!("plot tube needs --model");
            };
            vec![tube_chart(input, model).with_context(context)?]
        }
    };
    Ok(document(&charts))
}

fn bounds_chart(input: &Path) -> Result<Chart> {
    let rows = read_bounds_csv(open(input)?)?;
    let lower: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.eps_lower)).collect();
    let upper: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.eps_upper)).collect();
    let mut c = Chart::new(
        "Certified risk interval",
        "complexity k",
        "risk",
        Axis::fit(rows.iter().map(|r| r.k as f64)),
        Axis { lo: 0.0, hi: 1.0, log: false },
    );
    c.band(&lower, &upper, BLUE);
    c.line(&lower, BLUE);
    c.line(&upper, RED);
    c.legend("eps_lower(k)", BLUE);
    c.legend("eps_upper(k)", RED);
    Ok(c)
}

fn cost_risk_charts(input: &Path) -> Result<Vec<Chart>> {
    let rows = read_sweep_csv(open(input)?)?;
    if rows.is_empty() {
        bail!("sweep table has no successful rows");
    }
    let x = Axis::fit_log(rows.iter().map(|r| r.rho));
    let cost: Vec<(f64, f64)> = rows.iter().map(|r| (r.rho, r.cost)).collect();
    let mut top = Chart::new("Cost", "relaxation weight rho", "cost", x, Axis::fit(cost.iter().map(|p| p.1)));
    top.line(&cost, BLUE);
    top.dots(&cost, BLUE, 2.5);
    let mut bottom = Chart::new(
        "Certified risk",
        "relaxation weight rho",
        "risk",
        x,
        Axis::fit(rows.iter().flat_map(|r| [r.eps_lower, r.eps_upper])),
    );
    for r in &rows {
        bottom.interval(r.rho, r.eps_lower, r.eps_upper, RED);
    }
    bottom.legend("[eps_lower, eps_upper]", RED);
    Ok(vec![top, bottom])
}

fn scatter_chart(input: &Path, bounds: Option<&Path>) -> Result<Chart> {
    let report = read_validation_csv(open(input)?)?;
    let table = match bounds {
        Some(b) => Some(read_bounds_csv(open(b)?)?),
        None => None,
    };
    let ks = report.trials.iter().map(|t| t.complexity as f64);
    let x = Axis::fit(ks);
    let y = Axis::fit(report.trials.iter().flat_map(|t| [t.empirical_risk, t.eps_lower, t.eps_upper]));
    let title = format!("Risk of {} trials, {} covered", report.n_trials, report.coverage_count);
    let mut c = Chart::new(&title, "complexity s*", "risk", x, y);
    let mut curves: Vec<(f64, f64, f64)> = match &table {
        Some(rows) => rows.iter().map(|r| (r.k as f64, r.eps_lower, r.eps_upper)).collect(),
        None => report
            .trials
            .iter()
            .map(|t| (t.complexity as f64, t.eps_lower, t.eps_upper))
            .collect(),
    };
    curves.sort_by(|a, b| a.0.total_cmp(&b.0));
    curves.dedup_by(|a, b| a.0 == b.0);
    c.line(&curves.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(), GREY);
    c.line(&curves.iter().map(|p| (p.0, p.2)).collect::<Vec<_>>(), GREY);
    let (inside, outside): (Vec<_>, Vec<_>) = report.trials.iter().partition(|t| t.covered);
    let pts = |v: &[&svcert::experiments::TrialResult]| {
        v.iter().map(|t| (t.complexity as f64, t.empirical_risk)).collect::<Vec<_>>()
    };
    c.dots(&pts(&inside), BLUE, 2.5);
    c.dots(&pts(&outside), RED, 3.0);
    c.legend("covered", BLUE);
    c.legend("not covered", RED);
    c.legend("bounds", GREY);
    Ok(c)
}

fn tube_chart(input: &Path, model: &Path) -> Result<Chart> {
    let data = read_dataset_csv(open(input)?)?;
    let doc = ModelDocument::from_json(&read_to_string(model)?)?;
    let TrainedModel::Svr(svr) = doc.to_model()? else {
        bail!("plot tube needs an svr model, got {}", doc.method);
    };
    if data.input_dim() != Some(1) || svr.support_inputs.first().map(Vec::len) != Some(1) {
        bail!("plot tube needs scalar inputs");
    }
    let y = data.outputs().context("dataset has no y column")?;
    let pts: Vec<(f64, f64)> = data.inputs().iter().zip(y).map(|(m, y)| (m[0], *y)).collect();
    let x = Axis::fit(pts.iter().map(|p| p.0));
    let grid: Vec<Vec<f64>> = (0..=400).map(|i| vec![x.lo + (x.hi - x.lo) * i as f64 / 400.0]).collect();
    let centers = svr.centers(&grid)?;
    let center: Vec<(f64, f64)> = grid.iter().zip(&centers).map(|(g, c)| (g[0], *c)).collect();
    let lower: Vec<(f64, f64)> = center.iter().map(|&(g, c)| (g, c - svr.tube)).collect();
    let upper: Vec<(f64, f64)> = center.iter().map(|&(g, c)| (g, c + svr.tube)).collect();
    let yaxis = Axis::fit(pts.iter().map(|p| p.1).chain(lower.iter().chain(&upper).map(|p| p.1)));
    let title = format!("SVR tube, s* = {} of {}", doc.s_star, doc.n_train);
    let mut c = Chart::new(&title, "m", "y", x, yaxis);
    c.band(&lower, &upper, GREEN);
    c.dots(&pts, GREY, 1.5);
    c.line(&center, BLUE);
    c.line(&lower, GREEN);
    c.line(&upper, GREEN);
    c.legend("data", GREY);
    c.legend("center", BLUE);
    c.legend("tube", GREEN);
    Ok(c)
}
