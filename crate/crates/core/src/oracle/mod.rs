//! Exact reference solutions: the Ising sweep as independent fermion
//! modes, and exact diagonalization of small rings.

mod ed;
mod free_fermion;

pub use ed::{bipartite_entropy, ed_sweep, max_sites, Ring};
pub use free_fermion::{
    free_fermion_sweep, free_fermion_sweep_with, mode_excitation, richardson_reference, FreeFermionOptions, ModeSet,
};

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMethod {
    #[serde(rename = "ff")]
    FreeFermion,
    #[serde(rename = "ed")]
    ExactDiagonalization,
}

impl OracleMethod {
    pub fn tag(self) -> &'static str {
        match self {
            OracleMethod::FreeFermion => "ff",
            OracleMethod::ExactDiagonalization => "ed",
        }
    }
}

/// Outcome of an exact sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub v: f64,
    /// Mode momenta; empty for exact diagonalization.
    pub k: Vec<f64>,
    /// Pair excitation probability of each mode in `k`.
    pub p: Vec<f64>,
    /// Quasiparticle density, defined only for the fermion solution.
    pub n_ex: Option<f64>,
    pub eps_ex: f64,
    pub f: f64,
    pub method: OracleMethod,
    /// Integrator step.
    pub dt: f64,
    pub tol: f64,
}

/// Composite Simpson rule on an odd number of equally spaced samples.
pub(crate) fn simpson(y: &[f64], h: f64) -> Result<f64> {
    if y.len() < 3 || y.len() % 2 == 0 {
        return Err(Error::InvalidArgument(format!("Simpson rule needs an odd sample count, got {}", y.len())));
    }
    let n = y.len() - 1;
    let mut s = y[0] + y[n];
    for (i, v) in y.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(s * h / 3.0)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Ground-state energy per site of the infinite Ising chain
/// `-J sum Z Z - g sum X`, by adaptive quadrature of the fermion
/// dispersion: `-(1/2 pi) int_0^{2 pi} sqrt((g - J cos k)^2 + (J sin k)^2) dk`.
pub fn ground_energy_density_exact(j: f64, g: f64) -> Result<f64> {
    if !(j >= 0.0 && g >= 0.0) || (j == 0.0 && g == 0.0) {
        return Err(Error::InvalidArgument(format!("couplings must be non-negative and not both zero, got ({j}, {g})")));
    }
    let eps = |k: f64| ((g - j * k.cos()).powi(2) + (j * k.sin()).powi(2)).sqrt();
    // Split at k = pi where the integrand may have a kink at criticality.
    let total = adaptive_simpson(&eps, 0.0, PI, 1e-12) + adaptive_simpson(&eps, PI, 2.0 * PI, 1e-12);
    Ok(-total / (2.0 * PI))
}

pub const GOLDEN_VERSION: u32 = 1;

/// Reference densities for one sweep rate, with the integrator settings
/// that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldenRow {
    pub v: f64,
    pub n_ex: Option<f64>,
    pub eps_ex: f64,
    pub f: f64,
    pub method: OracleMethod,
    pub dt: f64,
    pub tol: f64,
}

impl From<&OracleResult> for GoldenRow {
    fn from(r: &OracleResult) -> Self {
        Self { v: r.v, n_ex: r.n_ex, eps_ex: r.eps_ex, f: r.f, method: r.method, dt: r.dt, tol: r.tol }
    }
}

pub const GOLDEN_HEADER: &str = "v,n_ex,eps_ex,f,method,dt,tol";

/// Writes `# kzmps-oracle v1` and free-form `# key: value` metadata lines,
/// then the CSV table. Floats are printed with round-trip precision.
pub fn write_golden<W: Write>(mut w: W, rows: &[GoldenRow], metadata: &[(&str, String)]) -> Result<()> {
    writeln!(w, "# kzmps-oracle v{GOLDEN_VERSION}")?;
    for (k, v) in metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "{GOLDEN_HEADER}")?;
    for r in rows {
        let n = r.n_ex.map(|x| format!("{x:e}")).unwrap_or_default();
        writeln!(w, "{:e},{n},{:e},{:e},{},{:e},{:e}", r.v, r.eps_ex, r.f, r.method.tag(), r.dt, r.tol)?;
    }
    Ok(())
}

pub fn read_golden<Rd: BufRead>(r: Rd) -> Result<Vec<GoldenRow>> {
    let bad = |m: String| Error::InvalidArgument(format!("oracle file: {m}"));
    let mut lines = r.lines();
    let first = lines.next().transpose()?.ok_or_else(|| bad("empty".into()))?;
    let version: u32 = first
        .strip_prefix("# kzmps-oracle v")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(format!("missing version line, found '{first}'")))?;
    if version != GOLDEN_VERSION {
        return Err(Error::Version(version));
    }
    let mut rows = Vec::new();
    let mut header = false;
    for line in lines {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header {
            if line.trim() != GOLDEN_HEADER {
                return Err(bad(format!("unexpected header '{line}'")));
            }
            header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(bad(format!("expected 7 columns in '{line}'")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
        let method = match cols[4].trim() {
            "ff" => OracleMethod::FreeFermion,
            "ed" => OracleMethod::ExactDiagonalization,
            other => return Err(bad(format!("unknown method '{other}'"))),
        };
        let n_ex = if cols[1].trim().is_empty() { None } else { Some(num(cols[1])?) };
        rows.push(GoldenRow { v: num(cols[0])?, n_ex, eps_ex: num(cols[2])?, f: num(cols[3])?, method, dt: num(cols[5])?, tol: num(cols[6])? });
    }
    if !header {
        return Err(bad("missing header".into()));
    }
    Ok(rows)
}
