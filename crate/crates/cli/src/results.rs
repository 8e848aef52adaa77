use std::fs;
use std::io;
use std::path::Path;

use kzmps::evolution::RunRecord;
use serde::{Deserialize, Serialize};

pub const RESULTS_HEADER: &str = "model,chi,v,dt,trotter_order,cutoff,f,eps_ex,entropy_final,xi_kz,steps,wall_seconds";

/// One line of `results.csv`; field order is the file's column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub chi: usize,
    pub v: f64,
    pub dt: f64,
    pub trotter_order: u8,
    pub cutoff: f64,
    pub f: f64,
    pub eps_ex: f64,
    pub entropy_final: f64,
    pub xi_kz: f64,
    pub steps: usize,
    pub wall_seconds: f64,
}

impl From<&RunRecord> for ResultRow {
    fn from(r: &RunRecord) -> Self {
        Self {
            model: r.config.model.kind.name().to_string(),
            chi: r.config.chi_max,
            v: r.config.v,
            dt: r.config.dt,
            trotter_order: r.config.trotter_order,
            cutoff: r.config.cutoff,
            f: r.f,
            eps_ex: r.eps_ex,
            entropy_final: r.entropy_final,
            xi_kz: r.xi_kz,
            steps: r.steps,
            wall_seconds: r.wall_seconds,
        }
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    let mut bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    if rows.is_empty() {
        bytes = format!("{RESULTS_HEADER}\n").into_bytes();
    }
    atomic_write(path, &bytes)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(format!("{}: unexpected header '{}'", path.display(), header.join(",")));
    }
    r.deserialize().map(|row| row.map_err(|e| format!("{}: {e}", path.display()))).collect()
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
