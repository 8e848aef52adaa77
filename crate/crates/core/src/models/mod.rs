//! Transverse-field Ising and three-state Potts chains.
//!
//! Operators are expressed in a *working basis* that diagonalizes the
//! global symmetry generator, so physical basis states carry definite
//! `Z_q` charges: the `sigma^x` eigenbasis for Ising and the eigenbasis of
//! the Potts shift `tau`.

mod trotter;

pub use trotter::{fused_trotter_steps, trotter_gates, trotter_layers, Direction, FusedSteps, GateSequence, Parity};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};
use crate::tensor::{Charges, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfim,
    Potts3,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tfim => "tfim",
            ModelKind::Potts3 => "potts3",
        }
    }

    pub fn physical_dim(self) -> usize {
        match self {
            ModelKind::Tfim => 2,
            ModelKind::Potts3 => 3,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfim" | "ising" => Ok(ModelKind::Tfim),
            "potts" | "potts3" => Ok(ModelKind::Potts3),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A model at fixed couplings together with its critical data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub j: f64,
    pub g: f64,
    /// Correlation-length exponent.
    pub nu: f64,
    /// Dynamical exponent.
    pub z: f64,
    /// Central charge.
    pub c: f64,
    /// Symmetry modulus.
    pub q: u32,
}

impl ModelSpec {
    pub fn tfim(j: f64, g: f64) -> Self {
        Self { kind: ModelKind::Tfim, j, g, nu: 1.0, z: 1.0, c: 0.5, q: 2 }
    }

    pub fn potts3(j: f64, g: f64) -> Self {
        Self { kind: ModelKind::Potts3, j, g, nu: 5.0 / 6.0, z: 1.0, c: 0.8, q: 3 }
    }

    pub fn new(kind: ModelKind, j: f64, g: f64) -> Self {
        match kind {
            ModelKind::Tfim => Self::tfim(j, g),
            ModelKind::Potts3 => Self::potts3(j, g),
        }
    }

    pub fn with_couplings(&self, j: f64, g: f64) -> Self {
        Self { j, g, ..*self }
    }

    pub fn physical_dim(&self) -> usize {
        self.kind.physical_dim()
    }

    /// Checks that the critical data match the model kind.
    pub fn validate(&self) -> Result<()> {
        let reference = Self::new(self.kind, self.j, self.g);
        if *self != reference {
            return Err(Error::InvalidArgument(format!("critical data of {} are fixed", self.kind)));
        }
        if !self.j.is_finite() || !self.g.is_finite() {
            return Err(Error::InvalidArgument("couplings must be finite".into()));
        }
        Ok(())
    }

    /// Local state of the symmetric product ground state at `J = 0`,
    /// `g > 0`, in the working basis.
    pub fn field_ground_state<R: Real>(&self) -> Vec<C<R>> {
        let mut v = vec![czero(); self.physical_dim()];
        v[0] = C::new(R::one(), R::zero());
        v
    }
}

/// Charge of each working-basis state.
pub fn charge_table(model: &ModelSpec) -> Vec<u32> {
    (0..model.physical_dim() as u32).collect()
}

type M = DMatrix<C<f64>>;

fn kron(a: &M, b: &M) -> M {
    a.kronecker(b)
}

fn omega() -> C<f64> {
    C::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Single-site operators `(interaction, field)` in the raw basis, where the
/// interaction operator is diagonal.
fn raw_operators(kind: ModelKind) -> (M, M) {
    let r = |x: f64| C::new(x, 0.0);
    match kind {
        ModelKind::Tfim => (
            M::from_row_slice(2, 2, &[r(1.0), r(0.0), r(0.0), r(-1.0)]),
            M::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)]),
        ),
        ModelKind::Potts3 => {
            let w = omega();
            let eta = M::from_diagonal(&nalgebra::DVector::from_vec(vec![r(1.0), w, w * w]));
            // tau |j> = |j + 1 mod 3>
            let tau = M::from_fn(3, 3, |i, j| if i == (j + 1) % 3 { r(1.0) } else { r(0.0) });
            (eta, tau)
        }
    }
}

/// Columns are the working-basis vectors written in the raw basis.
fn working_basis(kind: ModelKind) -> M {
    match kind {
        ModelKind::Tfim => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            M::from_row_slice(2, 2, &[C::new(h, 0.0), C::new(h, 0.0), C::new(h, 0.0), C::new(-h, 0.0)])
        }
        ModelKind::Potts3 => {
            // v_k = sum_j omega^{-kj} |j> / sqrt 3 has tau v_k = omega^k v_k.
            let s = 1.0 / 3f64.sqrt();
            M::from_fn(3, 3, |j, k| omega().powi(-((k * j) as i32)) * s)
        }
    }
}

fn bond_matrix_raw(model: &ModelSpec) -> M {
    let d = model.physical_dim();
    let (a, x) = raw_operators(model.kind);
    let id = M::identity(d, d);
    let interaction = match model.kind {
        ModelKind::Tfim => kron(&a, &a),
        ModelKind::Potts3 => kron(&a.adjoint(), &a) + kron(&a, &a.adjoint()),
    };
    let field = match model.kind {
        ModelKind::Tfim => x.clone(),
        ModelKind::Potts3 => &x + x.adjoint(),
    };
    let onsite = kron(&field, &id) + kron(&id, &field);
    interaction * C::new(-model.j, 0.0) + onsite * C::new(-model.g / 2.0, 0.0)
}

fn to_tensor<R: Real>(m: &M, d: usize) -> Tensor<R> {
    Tensor::<f64>::from_fn(vec![d, d, d, d], |i| m[(i[0] * d + i[1], i[2] * d + i[3])]).cast()
}

/// Two-site Hamiltonian in the raw basis (interaction diagonal), legs
/// `(out1, out2, in1, in2)`, no charge labels.
pub fn bond_hamiltonian_raw<R: Real>(model: &ModelSpec) -> Tensor<R> {
    to_tensor(&bond_matrix_raw(model), model.physical_dim())
}

/// Two-site Hamiltonian in the charge-diagonal working basis: the
/// interaction plus half of each single-site field term. Legs are
/// `(out1, out2, in1, in2)` with out legs labelled by [`charge_table`] and
/// in legs by its dual.
pub fn bond_hamiltonian<R: Real>(model: &ModelSpec) -> Tensor<R> {
    let d = model.physical_dim();
    let w = working_basis(model.kind);
    let w2 = kron(&w, &w);
    let h = w2.adjoint() * bond_matrix_raw(model) * &w2;
    let mut t = to_tensor::<R>(&h, d);
    let q = model.q;
    let labels = charge_table(model);
    let dual: Vec<u32> = labels.iter().map(|&l| (q - l) % q).collect();
    // Basis-change roundoff leaves ~1e-17 entries between sectors.
    t = t.with_charges(Charges::new(q, vec![labels.clone(), labels, dual.clone(), dual]).expect("valid labels")).expect("shape");
    t.project_covariant();
    t
}

/// Single-site operator in the working basis, as a `d x d` tensor: the
/// field operator (`sigma^x` or `tau`) when `field` is set, otherwise the
/// interaction operator (`sigma^z` or `eta`).
pub fn site_operator<R: Real>(kind: ModelKind, field: bool) -> Tensor<R> {
    let (a, x) = raw_operators(kind);
    let w = working_basis(kind);
    let m = if field { x } else { a };
    Tensor::from_matrix(&(w.adjoint() * m * &w)).cast()
}
