use serde::{Deserialize, Serialize};

use super::{bond_hamiltonian, ModelSpec};
use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use crate::tensor::{hermitian_exponential, Tensor};

/// Which bonds of the two-site cell a layer acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// A|B bonds.
    Even,
    /// B|A bonds.
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    RealTime,
    ImaginaryTime,
}

/// Gates of one Trotter step, in application order.
#[derive(Clone, Debug)]
pub struct GateSequence<R: Real> {
    pub layers: Vec<(Parity, Tensor<R>)>,
    pub dt: f64,
    pub order: u8,
    pub direction: Direction,
}

/// Layer pattern of one step as `(parity, fraction of dt)`.
///
/// Order 2 is the symmetric even/odd/even splitting. Order 4 is the triple
/// jump `S2(w1 dt) S2(w2 dt) S2(w1 dt)` with `w1 = 1 / (2 - 2^(1/3))`, where
/// the adjacent even half-steps at block boundaries are fused.
pub fn trotter_layers(order: u8) -> Result<Vec<(Parity, f64)>> {
    use Parity::{Even, Odd};
    match order {
        2 => Ok(vec![(Even, 0.5), (Odd, 1.0), (Even, 0.5)]),
        4 => {
            let w1 = 1.0 / (2.0 - 2f64.cbrt());
            let w2 = 1.0 - 2.0 * w1;
            let joint = 0.5 * (w1 + w2);
            Ok(vec![(Even, 0.5 * w1), (Odd, w1), (Even, joint), (Odd, w2), (Even, joint), (Odd, w1), (Even, 0.5 * w1)])
        }
        other => Err(Error::InvalidArgument(format!("unsupported Trotter order {other}"))),
    }
}

fn exponent_scale<R: Real>(direction: Direction, step: f64) -> C<R> {
    let step = R::of(step);
    match direction {
        Direction::RealTime => C::new(R::zero(), -step),
        Direction::ImaginaryTime => C::new(-step, R::zero()),
    }
}

/// Gates `exp(-i h w dt)` (real time) or `exp(-h w dt)` (imaginary time)
/// for every layer of [`trotter_layers`].
pub fn trotter_gates<R: Real>(model: &ModelSpec, dt: f64, order: u8, direction: Direction) -> Result<GateSequence<R>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let h = bond_hamiltonian::<R>(model);
    let layers = trotter_layers(order)?;
    let mut cache: Vec<(f64, Tensor<R>)> = Vec::new();
    let mut out = Vec::with_capacity(layers.len());
    for (parity, w) in layers {
        let gate = match cache.iter().find(|(x, _)| *x == w) {
            Some((_, g)) => g.clone(),
            None => {
                let g = hermitian_exponential(&h, exponent_scale(direction, w * dt))?;
                cache.push((w, g.clone()));
                g
            }
        };
        out.push((parity, gate));
    }
    Ok(GateSequence { layers: out, dt, order, direction })
}

/// `n` consecutive Trotter steps with the even half-steps at step
/// boundaries merged into one gate.
///
/// Applying `head`, then `body` `n - 1` times, then `tail` gives the same
/// product as `n` copies of [`trotter_gates`] with one gate fewer per step.
/// Only valid while the couplings stay fixed.
#[derive(Clone, Debug)]
pub struct FusedSteps<R: Real> {
    pub head: GateSequence<R>,
    pub body: GateSequence<R>,
    pub tail: GateSequence<R>,
}

pub fn fused_trotter_steps<R: Real>(model: &ModelSpec, dt: f64, order: u8, direction: Direction) -> Result<FusedSteps<R>> {
    let seq = trotter_gates::<R>(model, dt, order, direction)?;
    let (parity, w) = trotter_layers(order)?[0];
    let merged = hermitian_exponential(&bond_hamiltonian::<R>(model), exponent_scale(direction, 2.0 * w * dt))?;
    let n = seq.layers.len();
    let part = |layers: Vec<(Parity, Tensor<R>)>| GateSequence { layers, ..seq.clone() };
    let mut body = seq.layers[1..n - 1].to_vec();
    body.push((parity, merged));
    Ok(FusedSteps { head: part(seq.layers[..1].to_vec()), body: part(body), tail: part(seq.layers[1..].to_vec()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_weights_sum_to_one_per_parity() {
        for order in [2, 4] {
            let l = trotter_layers(order).unwrap();
            let even: f64 = l.iter().filter(|x| x.0 == Parity::Even).map(|x| x.1).sum();
            let odd: f64 = l.iter().filter(|x| x.0 == Parity::Odd).map(|x| x.1).sum();
            assert!((even - 1.0).abs() < 1e-14 && (odd - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(trotter_layers(3).is_err());
    }

    #[test]
    fn small_step_gates_approach_identity() {
        let dt = 1e-4;
        let seq = trotter_gates::<f64>(&ModelSpec::tfim(1.0, 1.0), dt, 4, Direction::RealTime).unwrap();
        for (_, g) in &seq.layers {
            let id = Tensor::<f64>::from_fn(vec![2, 2, 2, 2], |i| if i[0] == i[2] && i[1] == i[3] { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) });
            assert!(g.clone().without_charges().max_abs_diff(&id) <= 10.0 * dt);
        }
    }

    #[test]
    fn real_time_gates_are_unitary() {
        let seq = trotter_gates::<f64>(&ModelSpec::potts3(0.7, 1.3), 0.05, 4, Direction::RealTime).unwrap();
        for (_, g) in &seq.layers {
            let m = g.to_matrix(2);
            let p = m.adjoint() * &m;
            let dev = (p - nalgebra::DMatrix::identity(9, 9)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            assert!(dev < 1e-10);
        }
    }

    #[test]
    fn imaginary_gates_are_positive_hermitian() {
        let seq = trotter_gates::<f64>(&ModelSpec::tfim(1.0, 0.5), 0.1, 2, Direction::ImaginaryTime).unwrap();
        for (_, g) in &seq.layers {
            let m = g.to_matrix(2);
            assert!((&m - m.adjoint()).iter().all(|z| z.norm() < 1e-10));
            let e = nalgebra::SymmetricEigen::new(m).eigenvalues;
            assert!(e.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn gates_stay_covariant() {
        let seq = trotter_gates::<f64>(&ModelSpec::potts3(1.0, 1.0), 0.1, 2, Direction::RealTime).unwrap();
        for (_, g) in &seq.layers {
            assert!(g.covariance_violation() < 1e-15);
        }
    }
}
