use serde::{Deserialize, Serialize};

use super::tebd_step;
use crate::error::{Error, Result};
use crate::imps::{bond_expectation, UniformMPS};
use crate::models::{bond_hamiltonian, charge_table, fused_trotter_steps, Direction, ModelSpec};
use crate::scalar::Real;
use crate::tensor::Truncation;

/// Imaginary-time schedule for [`cool_ground_state`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingSchedule {
    /// Decreasing imaginary time steps.
    pub dtaus: Vec<f64>,
    /// Stage convergence: energy change between consecutive sweeps.
    pub tol: f64,
    pub steps_per_sweep: usize,
    /// Sweep budget of each stage.
    pub max_sweeps_per_stage: usize,
    pub trotter_order: u8,
}

impl Default for CoolingSchedule {
    fn default() -> Self {
        Self {
            dtaus: vec![0.1, 0.05, 0.01, 0.005, 0.001],
            tol: 1e-12,
            steps_per_sweep: 100,
            max_sweeps_per_stage: 1000,
            trotter_order: 2,
        }
    }
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.dtaus.is_empty() {
            return Err(Error::InvalidArgument("cooling schedule is empty".into()));
        }
        if self.dtaus.iter().any(|&d| !(d > 0.0)) || self.dtaus.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("cooling steps must be positive and non-increasing".into()));
        }
        if self.steps_per_sweep == 0 || self.max_sweeps_per_stage == 0 {
            return Err(Error::InvalidArgument("cooling budget must be positive".into()));
        }
        Ok(())
    }
}

/// Result of [`cool_ground_state`].
#[derive(Clone, Debug)]
pub struct GroundState<R: Real> {
    pub mps: UniformMPS<R>,
    /// Energy per site.
    pub energy: f64,
    pub model: ModelSpec,
    pub trunc: Truncation,
    /// Total imaginary-time steps taken.
    pub steps: usize,
    /// Energy change over the last sweep.
    pub last_change: f64,
}

/// Symmetric ground state at fixed couplings by imaginary-time TEBD from
/// the charge-0 product state.
///
/// Each stage runs sweeps of `steps_per_sweep` steps, restoring the
/// canonical form and measuring the energy after every sweep, until the
/// energy changes by less than `tol`. Stages that exhaust their budget hand
/// over to the next one; only the last stage must converge.
pub fn cool_ground_state<R: Real>(model: &ModelSpec, trunc: Truncation, schedule: &CoolingSchedule) -> Result<GroundState<R>> {
    schedule.validate()?;
    let q = model.q;
    let local = model.field_ground_state::<R>();
    let mut mps = UniformMPS::product_state(&local, Some(&charge_table(model)), q)?;
    let h = bond_hamiltonian::<R>(model);
    let mut energy = bond_expectation(&mps, &h)?.as_f64();
    let mut steps = 0usize;
    let mut change = f64::INFINITY;
    let last = schedule.dtaus.len() - 1;
    for (stage, &dtau) in schedule.dtaus.iter().enumerate() {
        let gates = fused_trotter_steps::<R>(model, dtau, schedule.trotter_order, Direction::ImaginaryTime)?;
        let mut converged = false;
        for _ in 0..schedule.max_sweeps_per_stage {
            mps = tebd_step(&mps, &gates.head, trunc)?.0;
            for _ in 1..schedule.steps_per_sweep {
                mps = tebd_step(&mps, &gates.body, trunc)?.0;
            }
            mps = tebd_step(&mps, &gates.tail, trunc)?.0;
            steps += schedule.steps_per_sweep;
            mps = mps.canonicalize(trunc)?;
            let e = bond_expectation(&mps, &h)?.as_f64();
            change = (e - energy).abs();
            energy = e;
            if change < schedule.tol {
                converged = true;
                break;
            }
        }
        if !converged && stage == last {
            return Err(Error::CoolingNotConverged(format!(
                "{} at chi {}: energy still moving by {change:e} after {steps} steps",
                model.kind, trunc.chi_max
            )));
        }
    }
    Ok(GroundState { mps, energy, model: *model, trunc, steps, last_change: change })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> CoolingSchedule {
        CoolingSchedule { dtaus: vec![0.1, 0.01], tol: 1e-10, steps_per_sweep: 20, max_sweeps_per_stage: 50, trotter_order: 2 }
    }

    #[test]
    fn decoupled_tfim_is_product() {
        let gs = cool_ground_state::<f64>(&ModelSpec::tfim(0.0, 2.0), Truncation::new(8, 1e-12), &quick()).unwrap();
        assert!((gs.energy + 2.0).abs() < 1e-14);
        assert_eq!(gs.mps.max_bond_dim(), 1);
    }

    #[test]
    fn decoupled_potts() {
        let gs = cool_ground_state::<f64>(&ModelSpec::potts3(0.0, 1.0), Truncation::new(8, 1e-12), &quick()).unwrap();
        assert!((gs.energy + 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_schedule() {
        let mut s = quick();
        s.dtaus = vec![0.01, 0.1];
        assert!(cool_ground_state::<f64>(&ModelSpec::tfim(1.0, 1.0), Truncation::new(4, 1e-12), &s).is_err());
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let s = CoolingSchedule { dtaus: vec![0.1], tol: 1e-30, steps_per_sweep: 2, max_sweeps_per_stage: 2, trotter_order: 2 };
        let r = cool_ground_state::<f64>(&ModelSpec::tfim(1.0, 1.0), Truncation::new(4, 1e-12), &s);
        assert!(matches!(r, Err(Error::CoolingNotConverged(_))));
    }
}
