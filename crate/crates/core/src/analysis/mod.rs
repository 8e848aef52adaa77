//! Kibble-Zurek scales, finite-entanglement scaling collapse and
//! power-law fits.

mod collapse;

pub use collapse::{
    collapse_fit, collapse_points, extrapolate_chi_infinity, pairwise_relative_rms, CollapseOptions, CollapsePoint,
    PowerLawProxy, ScalingFit,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bond-dimension exponent `kappa = 6 / (c (sqrt(12 / c) + 1))`.
pub fn kappa_theory(c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("central charge must be positive, got {c}")));
    }
    Ok(6.0 / (c * ((12.0 / c).sqrt() + 1.0)))
}

/// Kibble-Zurek length `v^(-nu / (1 + nu z))` with unit prefactor.
pub fn xi_kz(v: f64, nu: f64, z: f64) -> f64 {
    v.powf(-nu / (1.0 + nu * z))
}

/// Observable used in a scaling collapse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    /// Fidelity density.
    F,
    /// Excitation energy density.
    Eps,
}

impl Observable {
    /// Kibble-Zurek exponent of the observable in one dimension:
    /// `nu / (1 + z nu)` for densities, `(1 + z) nu / (1 + z nu)` for the
    /// energy density.
    pub fn kz_exponent(self, nu: f64, z: f64) -> f64 {
        match self {
            Observable::F => nu / (1.0 + z * nu),
            Observable::Eps => (1.0 + z) * nu / (1.0 + z * nu),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::F => "f",
            Observable::Eps => "eps",
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(Observable::F),
            "eps" | "eps_ex" => Ok(Observable::Eps),
            other => Err(Error::InvalidArgument(format!("unknown observable '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub chi: usize,
    pub v: f64,
    pub value: f64,
}

/// Observable values over a `(chi, v)` grid plus the critical data.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseDataset {
    pub observable: Observable,
    pub rows: Vec<CollapseRow>,
    pub nu: f64,
    pub z: f64,
    pub c: f64,
}

impl CollapseDataset {
    /// Distinct bond dimensions, ascending.
    pub fn chis(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.rows.iter().map(|r| r.chi).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Rows of one bond dimension sorted by `v`.
    pub fn curve(&self, chi: usize) -> Vec<CollapseRow> {
        let mut rows: Vec<CollapseRow> = self.rows.iter().filter(|r| r.chi == chi).copied().collect();
        rows.sort_by(|a, b| a.v.total_cmp(&b.v));
        rows
    }

    /// Positivity, uniqueness per `(chi, v)`, and at least two curves with
    /// four or more points.
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rows.iter().find(|r| !(r.value > 0.0) || !(r.v > 0.0)) {
            return Err(Error::Precondition(format!("non-positive entry at chi {}, v {}", r.chi, r.v)));
        }
        let mut keys: Vec<(usize, u64)> = self.rows.iter().map(|r| (r.chi, r.v.to_bits())).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition("duplicate (chi, v) rows".into()));
        }
        let usable = self.chis().into_iter().filter(|&c| self.curve(c).len() >= 4).count();
        if usable < 2 {
            return Err(Error::Precondition(format!(
                "collapse needs at least two bond dimensions with four or more rates, found {usable}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Largest absolute residual of the fit in `log(value)`.
    pub residual: f64,
}

/// Least-squares line through `(log v, log value)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::Precondition(format!("power-law fit needs three points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::InvalidArgument("power-law fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("power-law fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Ok(PowerLawFit { exponent: slope, prefactor: intercept.exp(), residual })
}
