use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kzmps::analysis::Observable;
use kzmps::evolution::CoolingSchedule;
use kzmps::oracle::OracleMethod;
use kzmps::{ModelKind, ModelSpec};

mod analyze;
mod commands;
mod plan;
mod results;
mod svg;
mod sweep;

use analyze::AnalyzeError;
use commands::{OracleArgs, OracleError};
use plan::ExperimentPlan;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;
const EXIT_UNSUPPORTED: u8 = 4;

#[derive(Parser)]
#[command(name = "kzmps", version, about = "Kibble-Zurek sweeps of infinite MPS at fixed bond dimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Tfim,
    Potts3,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Tfim => ModelKind::Tfim,
            ModelArg::Potts3 => ModelKind::Potts3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObservableArg {
    F,
    Eps,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ff,
    Ed,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (chi, v) cell of a plan, skipping cells already computed.
    Sweep {
        plan: PathBuf,
        /// Worker threads; overrides the plan.
        #[arg(long, env = "KZMPS_WORKERS")]
        workers: Option<usize>,
    },
    /// Fit the bond-dimension exponent by collapsing a results table.
    Analyze {
        results: PathBuf,
        #[arg(long, value_enum)]
        observable: ObservableArg,
        /// Scan range `lo:hi:step`.
        #[arg(long, default_value = "1:3:0.01")]
        kappa_scan: String,
        /// Model to select when the table holds several.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Output directory; defaults to the directory of the results file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact reference sweeps.
    Oracle {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Sweep rates.
        #[arg(long = "v", value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Ring length; the free-fermion default is the infinite chain.
        #[arg(long)]
        sites: Option<usize>,
        /// Combine steps dt and dt/2 into an extrapolated reference.
        #[arg(long)]
        richardson: bool,
        #[arg(long, default_value = "oracle.csv")]
        out: PathBuf,
    },
    /// Ground state at fixed couplings by imaginary-time evolution.
    Gs {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        chi: usize,
        #[arg(long, default_value_t = 1.0)]
        j: f64,
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        #[arg(long, default_value_t = 1e-12)]
        cutoff: f64,
        /// Energy convergence of the cooling schedule.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the state as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sweep(plan_path: PathBuf, workers: Option<usize>) -> ExitCode {
    let plan = match ExperimentPlan::load(&plan_path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let workers = workers.unwrap_or(plan.workers);
    if workers == 0 {
        eprintln!("error: worker count must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    match sweep::run_plan(&plan, workers) {
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
        Ok(out) => {
            println!("{} computed, {} cached, {} failed", out.computed, out.cached, out.failed.len());
            for (key, e) in &out.failed {
                eprintln!("failed {key}: {e}");
            }
            if out.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
    }
}

fn analyze(results: PathBuf, observable: ObservableArg, scan: &str, model: Option<ModelArg>, out: Option<PathBuf>) -> ExitCode {
    let opts = match analyze::parse_scan(scan) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let observable = match observable {
        ObservableArg::F => Observable::F,
        ObservableArg::Eps => Observable::Eps,
    };
    let out = out.unwrap_or_else(|| results.parent().map(PathBuf::from).unwrap_or_default());
    match analyze::analyze(&results, observable, opts, model.map(Into::into), &out) {
        Ok(r) => {
            println!("model: {}", r.model);
            println!("kappa_hat: {:.4}", r.fit.kappa_hat);
            println!("kappa_theory: {:.4}", r.kappa_theory);
            if r.fit.degenerate {
                println!("warning: collapse cost is flat over the scan");
            }
            for (a, b, rms) in &r.pair_rms {
                match rms {
                    Some(x) => println!("chi {a} vs {b}: relative rms {x:.4}"),
                    None => println!("chi {a} vs {b}: no overlap"),
                }
            }
            println!("wrote kappa_fit.csv, collapse.csv, extrapolated.csv, collapse.svg to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(AnalyzeError::Precondition(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_PRECONDITION)
        }
        Err(AnalyzeError::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep { plan, workers } => sweep(plan, workers),
        Command::Analyze { results, observable, kappa_scan, model, out } => analyze(results, observable, &kappa_scan, model, out),
        Command::Oracle { model, mode, rates, dt, sites, richardson, out } => {
            let args = OracleArgs {
                model: model.into(),
                method: match mode {
                    ModeArg::Ff => OracleMethod::FreeFermion,
                    ModeArg::Ed => OracleMethod::ExactDiagonalization,
                },
                rates: &rates,
                dt,
                sites,
                richardson,
                out: &out,
            };
            match commands::run_oracle(&args) {
                Ok(rows) => {
                    println!("wrote {} rows to {}", rows.len(), out.display());
                    ExitCode::SUCCESS
                }
                Err(OracleError::Unsupported(e)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_UNSUPPORTED)
                }
                Err(OracleError::Other(e)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILED)
                }
            }
        }
        Command::Gs { model, chi, j, g, cutoff, tol, out } => {
            let spec = ModelSpec::new(model.into(), j, g);
            let mut schedule = CoolingSchedule::default();
            if let Some(t) = tol {
                schedule.tol = t;
            }
            match commands::run_gs(&spec, chi, cutoff, &schedule, out.as_deref()) {
                Ok(r) => {
                    println!("energy per site: {:.12}", r.energy);
                    if let Some(e0) = r.exact {
                        println!("exact:           {e0:.12} (difference {:.3e})", r.energy - e0);
                    }
                    println!("entropy: {:.6}", r.entropy);
                    println!("correlation length: {:.4}", r.xi);
                    println!("imaginary-time steps: {} (last sweep change {:.2e})", r.steps, r.last_change);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILED)
                }
            }
        }
    }
}
