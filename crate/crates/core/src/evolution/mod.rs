//! TEBD time stepping, imaginary-time cooling and the Kibble-Zurek sweep
//! driver.

mod cooling;
mod sweep;

pub use cooling::{cool_ground_state, CoolingSchedule, GroundState};
pub use sweep::{
    read_record, run_sweep, run_sweep_with_reference, step_count, write_record, CheckpointPolicy, RunRecord, SeriesPoint,
    SweepConfig, RECORD_VERSION,
};

use crate::error::{Error, Result};
use crate::imps::{weighted_canonical_residual, UniformMPS};
use crate::models::{Direction, GateSequence, Parity};
use crate::scalar::{Real, C};
use crate::tensor::{contract, svd_truncate, Tensor, Truncation};

/// Residual above which a real-time step re-canonicalizes the state.
pub const CANONICAL_THRESHOLD: f64 = 1e-6;

/// Bookkeeping from one [`tebd_step`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    /// Sum of discarded squared Schmidt weights over all gates of the step.
    pub discarded_weight: f64,
    pub max_bond: usize,
    /// Canonical-form residual at the end of the step (real time only).
    pub residual: f64,
    pub recanonicalized: bool,
    /// Some truncation had to keep a degenerate group it would have split.
    pub multiplet_split: bool,
}

/// Apply a two-site gate with legs `(out1, out2, in1, in2)` on the bond
/// starting at site `x` and truncate.
///
/// With `B_x B_y` right-canonical and `lambda_L` the spectrum left of `x`,
/// the updated tensors are `B_y' = V` and `B_x' = (G B_x B_y) V^dag`, which
/// avoids dividing by Schmidt values.
pub fn apply_bond_gate<R: Real>(
    mps: &mut UniformMPS<R>,
    x: usize,
    gate: &Tensor<R>,
    trunc: Truncation,
) -> Result<(R, bool)> {
    let y = 1 - x;
    let d = mps.physical_dim();
    if gate.shape() != [d, d, d, d] {
        return Err(Error::DimensionMismatch(format!("gate shape {:?} for d = {d}", gate.shape())));
    }
    let cell = contract(&mps.sites[x], &mps.sites[y], &[(2, 0)])?;
    let evolved = contract(gate, &cell, &[(2, 1), (3, 2)])?.permute(&[2, 0, 1, 3]);
    let lam = &mps.lambdas[y].values;
    let mut theta = evolved.clone();
    let stride = theta.len() / lam.len();
    for (i, chunk) in theta.data_mut().chunks_mut(stride).enumerate() {
        let s = C::new(lam[i], R::zero());
        chunk.iter_mut().for_each(|z| *z *= s);
    }
    let split = svd_truncate(&theta, 2, trunc)?;
    let left = contract(&evolved, &split.v.conj(), &[(2, 1), (3, 2)])?;
    mps.sites[x] = left.scale(C::new(R::one() / split.kept_norm, R::zero()));
    mps.sites[y] = split.v;
    let weight = split.s.discarded_weight;
    mps.lambdas[x] = split.s;
    Ok((weight, split.multiplet_split))
}

/// One full Trotter step: every layer of `gates` in order.
///
/// Real-time steps verify the canonical form afterwards and restore it when
/// the Schmidt-weighted residual exceeds [`CANONICAL_THRESHOLD`]; a failure to restore it is
/// an error. Imaginary-time steps leave gauge restoration to the caller.
pub fn tebd_step<R: Real>(mps: &UniformMPS<R>, gates: &GateSequence<R>, trunc: Truncation) -> Result<(UniformMPS<R>, StepStats)> {
    let mut out = mps.clone();
    let mut stats = StepStats::default();
    for (parity, gate) in &gates.layers {
        let x = match parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        let (w, split) = apply_bond_gate(&mut out, x, gate, trunc)?;
        stats.discarded_weight += w.as_f64();
        stats.multiplet_split |= split;
    }
    if gates.direction == Direction::RealTime {
        let mut res = weighted_canonical_residual(&out).as_f64();
        if !(res <= CANONICAL_THRESHOLD) {
            out = out.canonicalize(trunc)?;
            res = weighted_canonical_residual(&out).as_f64();
            stats.recanonicalized = true;
            if !(res <= CANONICAL_THRESHOLD) {
                return Err(Error::CanonicalForm(res));
            }
        }
        stats.residual = res;
    }
    stats.max_bond = out.max_bond_dim();
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imps::{bond_expectation, Bond};
    use crate::models::{bond_hamiltonian, charge_table, trotter_gates, ModelSpec};
    use crate::tensor::hermitian_exponential;

    fn x_state() -> UniformMPS<f64> {
        let m = ModelSpec::tfim(1.0, 1.0);
        UniformMPS::product_state(&m.field_ground_state::<f64>(), Some(&charge_table(&m)), 2).unwrap()
    }

    #[test]
    fn identity_gates_leave_state_unchanged() {
        let m = ModelSpec::tfim(1.0, 1.0);
        let mut gates = trotter_gates::<f64>(&m, 0.1, 2, Direction::RealTime).unwrap();
        let trunc = Truncation::new(8, 1e-12);
        // Build an entangled state first.
        let mut s = x_state();
        for _ in 0..5 {
            s = tebd_step(&s, &gates, trunc).unwrap().0;
        }
        let id = bond_hamiltonian::<f64>(&m.with_couplings(0.0, 0.0));
        for layer in gates.layers.iter_mut() {
            layer.1 = hermitian_exponential(&id, C::new(0.0, -1.0)).unwrap();
        }
        let (t, _) = tebd_step(&s, &gates, trunc).unwrap();
        for b in [Bond::AB, Bond::BA] {
            for (a, c) in s.lambda(b).values.iter().zip(&t.lambda(b).values) {
                assert!((a - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fused_boundaries_match_plain_steps() {
        let m = ModelSpec::tfim(1.0, 0.8);
        let trunc = Truncation::new(64, 1e-14);
        for order in [2, 4] {
            let plain = trotter_gates::<f64>(&m, 0.05, order, Direction::ImaginaryTime).unwrap();
            let fused = crate::models::fused_trotter_steps::<f64>(&m, 0.05, order, Direction::ImaginaryTime).unwrap();
            let (mut a, mut b) = (x_state(), x_state());
            for _ in 0..4 {
                a = tebd_step(&a, &plain, trunc).unwrap().0;
            }
            b = tebd_step(&b, &fused.head, trunc).unwrap().0;
            for _ in 1..4 {
                b = tebd_step(&b, &fused.body, trunc).unwrap().0;
            }
            b = tebd_step(&b, &fused.tail, trunc).unwrap().0;
            for bond in [Bond::AB, Bond::BA] {
                let (x, y) = (&a.lambda(bond).values, &b.lambda(bond).values);
                assert_eq!(x.len(), y.len());
                assert!(x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-10), "order {order}");
            }
        }
    }

    #[test]
    fn single_gate_matches_dense_two_site_state() {
        let m = ModelSpec::tfim(1.0, 1.0);
        let dt = 0.3;
        let h = bond_hamiltonian::<f64>(&m);
        let gate = hermitian_exponential(&h, C::new(0.0, -dt)).unwrap();
        let mut s = x_state();
        apply_bond_gate(&mut s, 0, &gate, Truncation::new(4, 0.0)).unwrap();
        // Dense oracle: exp(-i h dt)|00> reshaped 2x2 and decomposed.
        let psi = nalgebra::DMatrix::from_fn(2, 2, |a, b| gate.get(&[a, b, 0, 0]));
        let mut sv: Vec<f64> = psi.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let ours = &s.lambda(Bond::AB).values;
        assert_eq!(ours.len(), 2);
        for (a, b) in ours.iter().zip(&sv) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn imaginary_step_lowers_energy() {
        let m = ModelSpec::tfim(1.0, 1.0);
        let h = bond_hamiltonian::<f64>(&m);
        let gates = trotter_gates::<f64>(&m, 0.05, 2, Direction::ImaginaryTime).unwrap();
        let trunc = Truncation::new(4, 1e-12);
        let mut s = x_state();
        for _ in 0..3 {
            let e0 = bond_expectation(&s, &h).unwrap();
            let (t, _) = tebd_step(&s, &gates, trunc).unwrap();
            s = t.canonicalize(trunc).unwrap();
            assert!(bond_expectation(&s, &h).unwrap() < e0);
        }
    }
}
