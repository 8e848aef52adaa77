use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{cool_ground_state, tebd_step, CoolingSchedule, GroundState};
use crate::analysis::xi_kz;
use crate::error::{Error, Result};
use crate::imps::{bond_expectation, entanglement_entropy, fidelity_density, read_state, write_state, Bond, UniformMPS};
use crate::models::{bond_hamiltonian, charge_table, trotter_gates, Direction, ModelSpec};
use crate::tensor::Truncation;

pub const RECORD_VERSION: u32 = 1;

/// One Kibble-Zurek run: `J = 1 + v t`, `g = 1 - v t` for `t` from `-1/v`
/// to `0`, starting in the product ground state at `(J, g) = (0, 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Model kind and critical data; couplings are overridden by the schedule.
    pub model: ModelSpec,
    pub v: f64,
    pub chi_max: usize,
    /// Relative Schmidt value floor.
    pub cutoff: f64,
    pub dt: f64,
    pub trotter_order: u8,
    pub record_every: usize,
    pub cooling: CoolingSchedule,
    /// Upper bound on the number of time steps.
    pub max_steps: usize,
}

impl SweepConfig {
    pub fn new(model: ModelSpec, v: f64, chi_max: usize, dt: f64) -> Self {
        Self {
            model,
            v,
            chi_max,
            cutoff: 1e-12,
            dt,
            trotter_order: 4,
            record_every: 50,
            cooling: CoolingSchedule::default(),
            max_steps: 5_000_000,
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.chi_max, self.cutoff)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(Error::InvalidArgument(format!("sweep rate must be positive, got {}", self.v)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.dt)));
        }
        if self.chi_max < 1 {
            return Err(Error::InvalidArgument("chi_max must be at least 1".into()));
        }
        if !(self.cutoff >= 0.0) {
            return Err(Error::InvalidArgument("cutoff must be non-negative".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be positive".into()));
        }
        crate::models::trotter_layers(self.trotter_order)?;
        self.cooling.validate()?;
        let n = step_count(self.v, self.dt);
        if n > self.max_steps {
            return Err(Error::Budget(format!("{n} steps exceed the budget of {}", self.max_steps)));
        }
        Ok(())
    }
}

/// `ceil(1 / (v dt))`, ignoring roundoff in the quotient.
pub fn step_count(v: f64, dt: f64) -> usize {
    let x = 1.0 / (v * dt);
    (x - 1e-9 * x.max(1.0)).ceil().max(1.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    /// Energy per site with the couplings at time `t`.
    pub energy: f64,
    /// Entropy of the A|B bond.
    pub entropy: f64,
    pub max_bond: usize,
    /// Discarded weight accumulated since the previous point.
    pub truncation_weight: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: SweepConfig,
    pub series: Vec<SeriesPoint>,
    pub final_state: UniformMPS<f64>,
    /// Energy per site of the final state at `(J, g) = (1, 1)`.
    pub e_final: f64,
    /// Cooled reference energy at the same bond dimension.
    pub e_ground: f64,
    pub f: f64,
    pub eps_ex: f64,
    /// `eps_ex` was slightly negative and set to zero.
    pub eps_clamped: bool,
    pub entropy_final: f64,
    pub xi_kz: f64,
    pub steps: usize,
    pub recanonicalizations: usize,
    pub multiplet_split: bool,
    pub wall_seconds: f64,
}

/// Periodic snapshots of a running sweep.
#[derive(Clone, Debug)]
pub struct CheckpointPolicy {
    pub path: PathBuf,
    pub interval: Duration,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: SweepConfig,
    step: usize,
    series: Vec<SeriesPoint>,
    pending_weight: f64,
    recanonicalizations: usize,
    multiplet_split: bool,
    state: serde_json::Value,
}

fn state_value(mps: &UniformMPS<f64>) -> Result<serde_json::Value> {
    let mut buf = Vec::new();
    write_state(mps, &mut buf)?;
    Ok(serde_json::from_slice(&buf)?)
}

fn state_from_value(v: serde_json::Value) -> Result<UniformMPS<f64>> {
    read_state(serde_json::to_vec(&v)?.as_slice())
}

fn write_atomic(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

/// Run a sweep, cooling the reference ground state first.
pub fn run_sweep(config: &SweepConfig) -> Result<RunRecord> {
    config.validate()?;
    let ground = cool_ground_state::<f64>(&config.model.with_couplings(1.0, 1.0), config.truncation(), &config.cooling)?;
    run_sweep_with_reference(config, &ground, None)
}

/// Run a sweep against a precomputed reference ground state, which must
/// be the critical point of the same model at the same truncation.
pub fn run_sweep_with_reference(
    config: &SweepConfig,
    ground: &GroundState<f64>,
    checkpoint: Option<&CheckpointPolicy>,
) -> Result<RunRecord> {
    config.validate()?;
    let critical = config.model.with_couplings(1.0, 1.0);
    if ground.model != critical || ground.trunc != config.truncation() {
        return Err(Error::Precondition("reference ground state does not match the sweep configuration".into()));
    }
    let started = Instant::now();
    let trunc = config.truncation();
    let model = config.model;
    let n = step_count(config.v, config.dt);
    let t0 = -1.0 / config.v;
    let dt = -t0 / n as f64;
    let time = |k: usize| if k == n { 0.0 } else { t0 + k as f64 * dt };
    let at = |t: f64| model.with_couplings(1.0 + config.v * t, 1.0 - config.v * t);

    let mut mps = UniformMPS::product_state(&model.field_ground_state::<f64>(), Some(&charge_table(&model)), model.q)?;
    let mut step = 0usize;
    let mut series: Vec<SeriesPoint> = Vec::new();
    let mut pending = 0.0f64;
    let mut recanonicalizations = 0usize;
    let mut multiplet_split = false;

    if let Some(cp) = checkpoint.filter(|cp| cp.path.exists()) {
        let mut text = String::new();
        fs::File::open(&cp.path)?.read_to_string(&mut text)?;
        let saved: Checkpoint = serde_json::from_str(&text)?;
        if saved.version != RECORD_VERSION {
            return Err(Error::Version(saved.version));
        }
        if saved.config == *config {
            step = saved.step;
            series = saved.series;
            pending = saved.pending_weight;
            recanonicalizations = saved.recanonicalizations;
            multiplet_split = saved.multiplet_split;
            mps = state_from_value(saved.state)?;
        }
    }

    let record = |mps: &UniformMPS<f64>, k: usize, pending: f64| -> Result<SeriesPoint> {
        let t = time(k);
        Ok(SeriesPoint {
            t,
            energy: bond_expectation(mps, &bond_hamiltonian(&at(t)))?,
            entropy: entanglement_entropy(mps, Bond::AB)?,
            max_bond: mps.max_bond_dim(),
            truncation_weight: pending,
        })
    };
    if step == 0 && series.is_empty() {
        series.push(record(&mps, 0, 0.0)?);
    }
    let mut last_checkpoint = Instant::now();
    while step < n {
        let mid = time(step) + 0.5 * dt;
        let gates = trotter_gates::<f64>(&at(mid), dt, config.trotter_order, Direction::RealTime)?;
        let (next, stats) = tebd_step(&mps, &gates, trunc)?;
        mps = next;
        step += 1;
        pending += stats.discarded_weight;
        recanonicalizations += usize::from(stats.recanonicalized);
        multiplet_split |= stats.multiplet_split;
        if step % config.record_every == 0 || step == n {
            series.push(record(&mps, step, pending)?);
            pending = 0.0;
        }
        if let Some(cp) = checkpoint {
            if last_checkpoint.elapsed() >= cp.interval && step < n {
                let snap = Checkpoint {
                    version: RECORD_VERSION,
                    config: config.clone(),
                    step,
                    series: series.clone(),
                    pending_weight: pending,
                    recanonicalizations,
                    multiplet_split,
                    state: state_value(&mps)?,
                };
                write_atomic(&cp.path, &serde_json::to_vec(&snap)?)?;
                last_checkpoint = Instant::now();
            }
        }
    }

    let e_final = bond_expectation(&mps, &bond_hamiltonian(&critical))?;
    let mut eps_ex = e_final - ground.energy;
    let mut eps_clamped = false;
    if (-1e-8..0.0).contains(&eps_ex) {
        eps_ex = 0.0;
        eps_clamped = true;
    }
    let f = fidelity_density(&mps, &ground.mps)?;
    let entropy_final = entanglement_entropy(&mps, Bond::AB)?;
    if let Some(cp) = checkpoint {
        if cp.path.exists() {
            fs::remove_file(&cp.path)?;
        }
    }
    Ok(RunRecord {
        config: config.clone(),
        series,
        final_state: mps,
        e_final,
        e_ground: ground.energy,
        f,
        eps_ex,
        eps_clamped,
        entropy_final,
        xi_kz: xi_kz(config.v, model.nu, model.z),
        steps: n,
        recanonicalizations,
        multiplet_split,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize, Deserialize)]
struct RecordFile {
    version: u32,
    config: SweepConfig,
    series: Vec<SeriesPoint>,
    e_final: f64,
    e_ground: f64,
    f: f64,
    eps_ex: f64,
    eps_clamped: bool,
    entropy_final: f64,
    xi_kz: f64,
    steps: usize,
    recanonicalizations: usize,
    multiplet_split: bool,
    wall_seconds: f64,
    final_state: serde_json::Value,
}

/// Serialize a record (including the final state) as JSON.
pub fn write_record<W: Write>(rec: &RunRecord, mut w: W) -> Result<()> {
    let file = RecordFile {
        version: RECORD_VERSION,
        config: rec.config.clone(),
        series: rec.series.clone(),
        e_final: rec.e_final,
        e_ground: rec.e_ground,
        f: rec.f,
        eps_ex: rec.eps_ex,
        eps_clamped: rec.eps_clamped,
        entropy_final: rec.entropy_final,
        xi_kz: rec.xi_kz,
        steps: rec.steps,
        recanonicalizations: rec.recanonicalizations,
        multiplet_split: rec.multiplet_split,
        wall_seconds: rec.wall_seconds,
        final_state: state_value(&rec.final_state)?,
    };
    serde_json::to_writer(&mut w, &file)?;
    w.flush()?;
    Ok(())
}

pub fn read_record<Rd: Read>(r: Rd) -> Result<RunRecord> {
    let file: RecordFile = serde_json::from_reader(r)?;
    if file.version != RECORD_VERSION {
        return Err(Error::Version(file.version));
    }
    Ok(RunRecord {
        config: file.config,
        series: file.series,
        final_state: state_from_value(file.final_state)?,
        e_final: file.e_final,
        e_ground: file.e_ground,
        f: file.f,
        eps_ex: file.eps_ex,
        eps_clamped: file.eps_clamped,
        entropy_final: file.entropy_final,
        xi_kz: file.xi_kz,
        steps: file.steps,
        recanonicalizations: file.recanonicalizations,
        multiplet_split: file.multiplet_split,
        wall_seconds: file.wall_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_arithmetic() {
        assert_eq!(step_count(0.1, 0.005), 2000);
        assert_eq!(step_count(0.5, 0.005), 400);
        assert_eq!(step_count(0.3, 0.01), 334);
    }

    #[test]
    fn invalid_configs() {
        let base = SweepConfig::new(ModelSpec::tfim(1.0, 1.0), 0.5, 4, 0.01);
        assert!(base.validate().is_ok());
        for bad in [
            SweepConfig { v: 0.0, ..base.clone() },
            SweepConfig { dt: -1.0, ..base.clone() },
            SweepConfig { chi_max: 0, ..base.clone() },
            SweepConfig { trotter_order: 3, ..base.clone() },
            SweepConfig { max_steps: 10, ..base.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
