use std::path::{Path, PathBuf};

use kzmps::evolution::{CoolingSchedule, SweepConfig};
use kzmps::{ModelKind, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const PLAN_VERSION: u32 = 1;

/// Log-spaced sweep rates, given either as a point count or a density.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: Option<usize>,
    pub per_decade: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RateGrid {
    List(Vec<f64>),
    Log(LogGrid),
}

/// Contents of a plan file (TOML).
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub version: u32,
    pub model: String,
    pub v: Option<RateGrid>,
    pub chi: Vec<usize>,
    pub dt: f64,
    #[serde(default = "default_order")]
    pub trotter_order: u8,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Relative paths are resolved against the plan file's directory.
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_resume")]
    pub resume: bool,
    pub record_every: Option<usize>,
    pub cooling: Option<CoolingSchedule>,
}

fn default_order() -> u8 {
    4
}
fn default_cutoff() -> f64 {
    1e-12
}
fn default_workers() -> usize {
    1
}
fn default_resume() -> bool {
    true
}

/// A validated plan with the rate grid expanded.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    pub rates: Vec<f64>,
    pub chis: Vec<usize>,
    pub dt: f64,
    pub trotter_order: u8,
    pub cutoff: f64,
    pub output: PathBuf,
    pub workers: usize,
    pub resume: bool,
    pub record_every: usize,
    pub cooling: CoolingSchedule,
}

/// Physics-relevant plan content, hashed to key cached results.
#[derive(Serialize)]
struct HashedContent<'a> {
    version: u32,
    model: &'a ModelSpec,
    dt: f64,
    trotter_order: u8,
    cutoff: f64,
    record_every: usize,
    cooling: &'a CoolingSchedule,
}

#[derive(Serialize)]
struct GroundContent<'a> {
    version: u32,
    model: &'a ModelSpec,
    chi: usize,
    cutoff: f64,
    cooling: &'a CoolingSchedule,
}

fn sha(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

pub fn default_rates(kind: ModelKind) -> Vec<f64> {
    let lo = match kind {
        ModelKind::Tfim => 0.005,
        ModelKind::Potts3 => 0.01,
    };
    log_spaced(lo, 1.0, per_decade_points(lo, 1.0, 12))
}

fn per_decade_points(lo: f64, hi: f64, per_decade: usize) -> usize {
    ((hi / lo).log10() * per_decade as f64).round() as usize + 1
}

impl ExperimentPlan {
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let file: PlanFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Self::from_file(file, base)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn from_file(f: PlanFile, base: &Path) -> Result<Self, String> {
        if f.version != PLAN_VERSION {
            return Err(format!("unsupported plan version {} (expected {PLAN_VERSION})", f.version));
        }
        let kind: ModelKind = f.model.parse().map_err(|e: kzmps::Error| e.to_string())?;
        let model = match kind {
            ModelKind::Tfim => ModelSpec::tfim(1.0, 1.0),
            ModelKind::Potts3 => ModelSpec::potts3(1.0, 1.0),
        };
        let mut rates = match &f.v {
            None => default_rates(kind),
            Some(RateGrid::List(v)) => v.clone(),
            Some(RateGrid::Log(g)) => {
                if !(g.lo > 0.0 && g.hi >= g.lo) {
                    return Err(format!("log grid needs 0 < lo <= hi, got [{}, {}]", g.lo, g.hi));
                }
                let n = match (g.points, g.per_decade) {
                    (Some(n), None) => n,
                    (None, Some(d)) => per_decade_points(g.lo, g.hi, d),
                    (None, None) => per_decade_points(g.lo, g.hi, 12),
                    (Some(_), Some(_)) => return Err("log grid takes either points or per_decade, not both".into()),
                };
                if n == 0 {
                    return Err("log grid has no points".into());
                }
                log_spaced(g.lo, g.hi, n)
            }
        };
        if rates.is_empty() || f.chi.is_empty() {
            return Err("rate and bond-dimension grids must be non-empty".into());
        }
        if let Some(v) = rates.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(format!("sweep rates must be positive, got {v}"));
        }
        rates.sort_by(f64::total_cmp);
        rates.dedup();
        let mut chis = f.chi.clone();
        if chis.contains(&0) {
            return Err("bond dimensions must be positive".into());
        }
        chis.sort_unstable();
        chis.dedup();
        if f.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        let cooling = f.cooling.clone().unwrap_or_default();
        let plan = Self {
            model,
            rates,
            chis,
            dt: f.dt,
            trotter_order: f.trotter_order,
            cutoff: f.cutoff,
            output: if f.output.is_absolute() { f.output.clone() } else { base.join(&f.output) },
            workers: f.workers,
            resume: f.resume,
            record_every: f.record_every.unwrap_or(50),
            cooling,
        };
        // Validate every cell configuration up front.
        for &chi in &plan.chis {
            for &v in &plan.rates {
                plan.config(chi, v).validate().map_err(|e| e.to_string())?;
            }
        }
        Ok(plan)
    }

    pub fn config(&self, chi: usize, v: f64) -> SweepConfig {
        let mut c = SweepConfig::new(self.model, v, chi, self.dt);
        c.cutoff = self.cutoff;
        c.trotter_order = self.trotter_order;
        c.record_every = self.record_every;
        c.cooling = self.cooling.clone();
        c
    }

    /// Deterministic digest of everything that affects a cell's result.
    pub fn hash(&self) -> String {
        let content = HashedContent {
            version: PLAN_VERSION,
            model: &self.model,
            dt: self.dt,
            trotter_order: self.trotter_order,
            cutoff: self.cutoff,
            record_every: self.record_every,
            cooling: &self.cooling,
        };
        sha(serde_json::to_string(&content).expect("serializable").as_bytes())
    }

    /// Digest identifying the reference ground state of one bond dimension.
    pub fn ground_hash(&self, chi: usize) -> String {
        let content = GroundContent { version: PLAN_VERSION, model: &self.model, chi, cutoff: self.cutoff, cooling: &self.cooling };
        sha(serde_json::to_string(&content).expect("serializable").as_bytes())
    }
}

/// File-name key of a grid cell.
pub fn cell_key(chi: usize, v: f64) -> String {
    format!("chi{chi}_v{v:.6e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "version = 1\nmodel = \"tfim\"\nchi = [8]\ndt = 0.01\noutput = \"out\"\nv = [0.5]\n";

    #[test]
    fn minimal_plan() {
        let p = ExperimentPlan::parse(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(p.rates, vec![0.5]);
        assert_eq!(p.output, PathBuf::from("/base/out"));
        assert_eq!(p.trotter_order, 4);
        assert!(p.resume);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}chi_max = 3\n");
        assert!(ExperimentPlan::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn log_grid_forms() {
        let text = MINIMAL.replace("v = [0.5]", "v = { lo = 0.01, hi = 1.0, points = 5 }");
        let p = ExperimentPlan::parse(&text, Path::new(".")).unwrap();
        assert_eq!(p.rates.len(), 5);
        assert!((p.rates[2] - 0.1).abs() < 1e-12);
        let text = MINIMAL.replace("v = [0.5]", "v = { lo = 0.01, hi = 1.0, per_decade = 3 }");
        assert_eq!(ExperimentPlan::parse(&text, Path::new(".")).unwrap().rates.len(), 7);
    }

    #[test]
    fn default_grid_density() {
        let text = MINIMAL.replace("v = [0.5]\n", "");
        let p = ExperimentPlan::parse(&text, Path::new(".")).unwrap();
        // log10(200) * 12 = 27.6 -> 29 points
        assert_eq!(p.rates.len(), 29);
        assert!((p.rates[0] - 0.005).abs() < 1e-15 && (p.rates[28] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_values() {
        for bad in ["version = 2", "chi = []", "dt = -1.0", "model = \"heisenberg\"", "v = [0.0]"] {
            let key = bad.split(' ').next().unwrap();
            let text: String = MINIMAL.lines().filter(|l| !l.starts_with(key)).chain([bad]).collect::<Vec<_>>().join("\n");
            assert!(ExperimentPlan::parse(&text, Path::new(".")).is_err(), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_bookkeeping() {
        let a = ExperimentPlan::parse(MINIMAL, Path::new(".")).unwrap();
        let b = ExperimentPlan::parse(&MINIMAL.replace("\"out\"", "\"elsewhere\""), Path::new(".")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentPlan::parse(&MINIMAL.replace("dt = 0.01", "dt = 0.02"), Path::new(".")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
