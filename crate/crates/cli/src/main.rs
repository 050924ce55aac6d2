mod output;
mod parse;
mod plot;
mod svg;

use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use svcert::experiments::{
    gen_sinc, monte_carlo_validation, read_dataset_csv, rho_sweep, write_bounds_csv, write_dataset_csv,
    write_sweep_csv, write_validation_csv, ValidationParams,
};
use svcert::risk_bounds::{epsilon_bounds, epsilon_table, BoundQuery};
use svcert::sv_models::{fit_svdd, fit_svm, fit_svr, Dataset, ModelDocument, TrainedModel};
use svcert::{KernelSpec, SincConfig, SolverSettings};

use output::{check_input, check_output, sig, write_atomic};

#[derive(Parser)]
#[command(name = "svcert", version, about = "Risk certificates for support-vector scenario programs")]
struct Cli {
    /// Worker threads for Gram matrices and Monte Carlo trials.
    #[arg(long, global = true, env = "SVCERT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certified risk interval for one complexity, or the full table.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        k: Option<usize>,
        /// CSV destination for the table (standard output if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes a noisy sinc dataset.
    Gendata {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Laplace noise scale.
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fits a model and writes it as JSON with its certificate.
    Fit {
        method: Method,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ModelArgs,
    },
    /// Prints the summary of a saved model.
    Show {
        #[arg(long)]
        model: PathBuf,
    },
    /// SVR cost and risk interval over a list of relaxation weights.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// `pow(base,lo..hi)` or a comma-separated list.
        #[arg(long, default_value = "pow(3/5,0..14)")]
        rhos: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ModelArgs,
    },
    /// Monte Carlo check of the SVR certificate on fresh sinc samples.
    Validate {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise_scale: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ModelArgs,
    },
    /// Renders a CSV artifact as SVG.
    Plot {
        kind: plot::Kind,
        #[arg(long)]
        input: PathBuf,
        /// Model JSON, required for `tube`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Bounds table drawn under a `scatter` plot.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Svr,
    Svdd,
    Svm,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// `linear`, `gaussian[:width]` or `poly:degree[:offset]`.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// JSON file with defaults for any of the parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Parameters accepted in a `--config` file. Flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    rho: Option<f64>,
    tau: Option<f64>,
    beta: Option<f64>,
    kernel: Option<KernelSpec>,
    solver: Option<SolverSettings>,
    trials: Option<usize>,
    n: Option<usize>,
    test_size: Option<usize>,
    seed: Option<u64>,
    noise_scale: Option<f64>,
}

struct Resolved {
    rho: f64,
    tau: f64,
    beta: f64,
    kernel: KernelSpec,
    solver: SolverSettings,
    config: RunConfig,
}

impl ModelArgs {
    fn resolve(&self) -> Result<Resolved> {
        let config: RunConfig = match &self.config {
            Some(path) => {
                check_input(path)?;
                serde_json::from_str(&output::read_to_string(path)?)
                    .with_context(|| format!("invalid config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let kernel = match &self.kernel {
            Some(text) => parse::kernel(text)?,
            None => config.kernel.unwrap_or_default(),
        };
        kernel.validate()?;
        Ok(Resolved {
            rho: self.rho.or(config.rho).unwrap_or(0.6f64.powi(9)),
            tau: self.tau.or(config.tau).unwrap_or(0.01),
            beta: self.beta.or(config.beta).unwrap_or(1e-4),
            kernel,
            solver: config.solver.clone().unwrap_or_default(),
            config,
        })
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Bounds { n, beta, k, out } => cmd_bounds(n, beta, k, out.as_deref()),
        Command::Gendata {
            n,
            seed,
            noise_scale,
            out,
        } => cmd_gendata(n, seed, noise_scale, &out),
        Command::Fit {
            method,
            data,
            out,
            params,
        } => cmd_fit(method, &data, &out, &params),
        Command::Show { model } => {
            check_input(&model)?;
            let doc = ModelDocument::from_json(&output::read_to_string(&model)?)?;
            println!("{}", summary(&doc));
            Ok(())
        }
        Command::Sweep {
            data,
            rhos,
            out,
            params,
        } => cmd_sweep(&data, &rhos, &out, &params),
        Command::Validate {
            trials,
            n,
            test_size,
            seed,
            noise_scale,
            out,
            params,
        } => {
            let p = params.resolve()?;
            let trials = trials.or(p.config.trials).unwrap_or(200);
            let n = n.or(p.config.n).unwrap_or(2000);
            let test_size = test_size.or(p.config.test_size).unwrap_or(10_000);
            let seed = seed.or(p.config.seed).unwrap_or(1);
            let noise_scale = noise_scale.or(p.config.noise_scale).unwrap_or(1.0);
            cmd_validate(&p, trials, n, test_size, seed, noise_scale, &out)
        }
        Command::Plot {
            kind,
            input,
            model,
            bounds,
            out,
        } => {
            check_input(&input)?;
            for extra in model.iter().chain(bounds.iter()) {
                check_input(extra)?;
            }
            check_output(&out)?;
            let svg = plot::render(kind, &input, model.as_deref(), bounds.as_deref())?;
            write_atomic(&out, |w| Ok(w.write_all(svg.as_bytes())?))
        }
    }
}

/// Two significant digits without trailing zeros.
fn short(x: f64) -> String {
    trim(sig(x, 2))
}

/// Three significant digits without trailing zeros.
fn brief(x: f64) -> String {
    trim(sig(x, 3))
}

fn trim(s: String) -> String {
    match s.split_once('e') {
        Some((m, e)) if m.contains('.') => format!("{}e{e}", m.trim_end_matches('0').trim_end_matches('.')),
        None if s.contains('.') => s.trim_end_matches('0').trim_end_matches('.').to_string(),
        _ => s,
    }
}

fn cmd_bounds(n: usize, beta: f64, k: Option<usize>, out: Option<&Path>) -> Result<()> {
    if let Some(k) = k {
        let r = epsilon_bounds(&BoundQuery::new(n, k, beta)?)?;
        println!("{}, {}", short(r.lower), short(r.upper));
        println!("eps_lower = {:.11e}, eps_upper = {:.11e}", r.lower, r.upper);
        return Ok(());
    }
    let table = epsilon_table(n, beta)?;
    match out {
        Some(path) => {
            check_output(path)?;
            write_atomic(path, |w| Ok(write_bounds_csv(w, &table)?))
        }
        None => Ok(write_bounds_csv(io::stdout().lock(), &table)?),
    }
}

fn cmd_gendata(n: usize, seed: u64, noise_scale: f64, out: &Path) -> Result<()> {
    check_output(out)?;
    let data = gen_sinc(&SincConfig {
        n_train: n,
        noise_scale,
        seed,
        ..SincConfig::default()
    })?;
    write_atomic(out, |w| Ok(write_dataset_csv(w, &data)?))?;
    println!("wrote {n} points to {}", out.display());
    Ok(())
}

fn load_data(path: &Path) -> Result<Dataset> {
    check_input(path)?;
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_dataset_csv(BufReader::new(file)).with_context(|| format!("in {}", path.display()))
}

fn cmd_fit(method: Method, data_path: &Path, out: &Path, params: &ModelArgs) -> Result<()> {
    let p = params.resolve()?;
    check_output(out)?;
    let data = load_data(data_path)?;
    let model = match method {
        Method::Svr => TrainedModel::Svr(fit_svr(&data, p.tau, p.rho, &p.kernel, &p.solver)?),
        Method::Svdd => TrainedModel::Svdd(fit_svdd(&data, p.rho, &p.kernel, &p.solver)?),
        Method::Svm => TrainedModel::Svm(fit_svm(&data, p.rho, &p.kernel, &p.solver)?),
    };
    let doc = ModelDocument::new(&model, p.beta)?;
    let json = doc.to_json()?;
    write_atomic(out, |w| Ok(writeln!(w, "{json}")?))?;
    println!("{}", summary(&doc));
    Ok(())
}

/// One-line description computed from the stored document only, so a saved
/// model reproduces it exactly.
fn summary(doc: &ModelDocument) -> String {
    let cert = &doc.certificate;
    let confidence = (cert.confidence * 1e12).round() / 1e12;
    let interval = format!("[{}, {}]", brief(cert.lower), brief(cert.upper));
    let counts = format!("s*={} of {}", doc.s_star, doc.n_train);
    match doc.method.as_str() {
        "svr" => {
            let cost = doc.tube_or_radius + doc.ridge_weight.unwrap_or(0.0) * doc.norm_sq;
            format!(
                "svr: cost={}, tube={}, b*={}, {counts}, risk in {interval} with confidence {confidence}",
                brief(cost),
                brief(doc.tube_or_radius),
                brief(doc.offset)
            )
        }
        "svdd" => format!(
            "svdd: radius_sq={}, {counts}, risk in {interval} with confidence {confidence}",
            brief(doc.tube_or_radius)
        ),
        _ => {
            let w = if doc.w_is_zero == Some(true) {
                "w*=0".to_string()
            } else {
                format!("|w*|^2={}", brief(doc.norm_sq))
            };
            format!(
                "svm: {w}, b*={}, {counts}, violation risk in {interval}, misclassification risk <= {} with confidence {confidence}",
                brief(doc.offset),
                brief(cert.upper)
            )
        }
    }
}

fn cmd_sweep(data_path: &Path, rhos: &str, out: &Path, params: &ModelArgs) -> Result<()> {
    let p = params.resolve()?;
    let rhos = parse::rhos(rhos)?;
    check_output(out)?;
    let data = load_data(data_path)?;
    let rows = rho_sweep(&data, &rhos, p.tau, &p.kernel, p.beta, &p.solver)?;
    write_atomic(out, |w| Ok(write_sweep_csv(w, &rows)?))?;
    let failed: Vec<_> = rows.iter().filter_map(|r| r.as_ref().err()).collect();
    for f in &failed {
        eprintln!("rho = {}: {}", f.rho, f.message);
    }
    println!("wrote {} rows to {} ({} failed)", rows.len(), out.display(), failed.len());
    if !failed.is_empty() {
        bail!("{} of {} fits failed", failed.len(), rows.len());
    }
    Ok(())
}

fn cmd_validate(
    p: &Resolved,
    trials: usize,
    n: usize,
    test_size: usize,
    seed: u64,
    noise_scale: f64,
    out: &Path,
) -> Result<()> {
    check_output(out)?;
    let config = SincConfig {
        n_train: n,
        noise_scale,
        seed,
        ..SincConfig::default()
    };
    let params = ValidationParams {
        rho: p.rho,
        tau: p.tau,
        kernel: p.kernel,
        beta: p.beta,
        n_trials: trials,
        n_test: test_size,
    };
    let report = monte_carlo_validation(&config, &params, &p.solver)?;
    write_atomic(out, |w| Ok(write_validation_csv(w, &report)?))?;
    println!("coverage {}/{}", report.coverage_count, report.n_trials);
    Ok(())
}
