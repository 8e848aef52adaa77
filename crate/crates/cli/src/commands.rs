//! The `oracle` and `gs` subcommands.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use kzmps::evolution::{cool_ground_state, CoolingSchedule};
use kzmps::imps::{correlation_length, entanglement_entropy};
use kzmps::oracle::{ed_sweep, free_fermion_sweep_with, ground_energy_density_exact, richardson_reference, write_golden, FreeFermionOptions, GoldenRow, ModeSet, OracleMethod};
use kzmps::{Bond, ModelKind, ModelSpec, Truncation};

pub struct OracleArgs<'a> {
    pub model: ModelKind,
    pub method: OracleMethod,
    pub rates: &'a [f64],
    pub dt: f64,
    /// Ring length; `None` means the thermodynamic limit for free fermions.
    pub sites: Option<usize>,
    pub richardson: bool,
    pub out: &'a Path,
}

/// Failures of the `oracle` command; `Unsupported` marks a model/method
/// pair with no exact solution.
#[derive(Debug)]
pub enum OracleError {
    Unsupported(String),
    Other(String),
}

pub fn run_oracle(a: &OracleArgs) -> Result<Vec<GoldenRow>, OracleError> {
    let other = |e: kzmps::Error| OracleError::Other(e.to_string());
    let model = ModelSpec::new(a.model, 1.0, 1.0);
    let mut rows = Vec::with_capacity(a.rates.len());
    for &v in a.rates {
        let row = match a.method {
            OracleMethod::FreeFermion => {
                if a.model != ModelKind::Tfim {
                    return Err(OracleError::Unsupported(format!("no free-fermion solution for {}", a.model)));
                }
                if a.richardson {
                    if a.sites.is_some() {
                        return Err(OracleError::Other("--richardson applies to the infinite chain only".into()));
                    }
                    let (fine, f, eps_ex) = richardson_reference(v, a.dt).map_err(other)?;
                    GoldenRow { f, eps_ex, dt: a.dt, ..GoldenRow::from(&fine) }
                } else {
                    let modes = a.sites.map_or(ModeSet::Continuum, ModeSet::FiniteN);
                    let opts = FreeFermionOptions { dt: a.dt, ..Default::default() };
                    GoldenRow::from(&free_fermion_sweep_with(v, modes, &opts).map_err(other)?)
                }
            }
            OracleMethod::ExactDiagonalization => {
                let sites = a.sites.ok_or_else(|| OracleError::Other("exact diagonalization needs --sites".into()))?;
                GoldenRow::from(&ed_sweep(&model, sites, v, a.dt).map_err(other)?)
            }
        };
        eprintln!("v = {v:e}: f = {:.10e}, eps_ex = {:.10e}", row.f, row.eps_ex);
        rows.push(row);
    }
    let mut meta = vec![("model", a.model.to_string()), ("method", a.method.tag().to_string())];
    meta.push(("sites", a.sites.map_or("infinite".to_string(), |n| n.to_string())));
    if a.richardson {
        meta.push(("extrapolation", format!("richardson from dt = {:e} and {:e}", a.dt, a.dt / 2.0)));
    }
    meta.push(("generator", format!("kzmps {}", env!("CARGO_PKG_VERSION"))));
    let file = File::create(a.out).map_err(|e| OracleError::Other(format!("{}: {e}", a.out.display())))?;
    write_golden(BufWriter::new(file), &rows, &meta).map_err(other)?;
    Ok(rows)
}

pub struct GroundReport {
    pub energy: f64,
    pub exact: Option<f64>,
    pub entropy: f64,
    pub xi: f64,
    pub steps: usize,
    pub last_change: f64,
}

pub fn run_gs(model: &ModelSpec, chi: usize, cutoff: f64, schedule: &CoolingSchedule, out: Option<&Path>) -> Result<GroundReport, String> {
    let gs = cool_ground_state::<f64>(model, Truncation::new(chi, cutoff), schedule).map_err(|e| e.to_string())?;
    let entropy = entanglement_entropy(&gs.mps, Bond::AB).map_err(|e| e.to_string())?;
    let xi = correlation_length(&gs.mps).map_err(|e| e.to_string())?;
    let exact = match model.kind {
        ModelKind::Tfim => Some(ground_energy_density_exact(model.j, model.g).map_err(|e| e.to_string())?),
        ModelKind::Potts3 => None,
    };
    if let Some(path) = out {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        kzmps::imps::write_state(&gs.mps, BufWriter::new(file)).map_err(|e| e.to_string())?;
    }
    Ok(GroundReport { energy: gs.energy, exact, entropy, xi, steps: gs.steps, last_change: gs.last_change })
}
