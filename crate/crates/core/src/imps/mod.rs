//! Translation-invariant infinite MPS with a two-site unit cell.
//!
//! The state is stored in right-canonical form: site tensors
//! `B_X = Gamma_X lambda_X` with legs `(left, physical, right)` together
//! with the Schmidt spectra of both bonds. `lambdas[0]` lives on the bond
//! between A and B, `lambdas[1]` on the bond between B and the next A.
//! Keeping `B` rather than `Gamma` means no Schmidt value is ever inverted
//! during time evolution; [`UniformMPS::gamma`] recovers the Vidal tensors.
//!
//! Bond charge labels follow the convention of [`crate::tensor`]: the left
//! leg of a site tensor stores the total charge of everything to its left,
//! the right leg stores the dual of the same quantity one site further.

mod canonical;
mod io;
mod observables;
mod transfer;

pub use canonical::{canonical_residual, weighted_canonical_residual};
pub use io::{read_state, write_state, STATE_VERSION};
pub use observables::{bond_expectation, entanglement_entropy};
pub use transfer::{correlation_length, fidelity_density, transfer_spectrum, TransferSpectrum};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{cabs, czero, Real, C};
use crate::tensor::{Charges, SchmidtSpectrum, Tensor};

/// One of the two bonds of the unit cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bond {
    /// Between site A and site B.
    AB,
    /// Between site B and the next cell's site A.
    BA,
}

impl Bond {
    pub fn index(self) -> usize {
        match self {
            Bond::AB => 0,
            Bond::BA => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformMPS<R: Real> {
    pub(crate) sites: [Tensor<R>; 2],
    pub(crate) lambdas: [SchmidtSpectrum<R>; 2],
    physical_dim: usize,
    charge_modulus: u32,
}

impl<R: Real> UniformMPS<R> {
    /// Assemble a state from right-canonical site tensors and bond spectra.
    ///
    /// Only shapes and charge consistency are checked here; use
    /// [`canonical_residual`] to verify the gauge.
    pub fn from_parts(sites: [Tensor<R>; 2], lambdas: [SchmidtSpectrum<R>; 2], charge_modulus: u32) -> Result<Self> {
        for t in &sites {
            if t.rank() != 3 {
                return Err(Error::InvalidArgument(format!("site tensor has rank {}", t.rank())));
            }
        }
        let d = sites[0].shape()[1];
        if sites[1].shape()[1] != d {
            return Err(Error::DimensionMismatch("sites have different physical dimensions".into()));
        }
        let (a, b) = (sites[0].shape(), sites[1].shape());
        if a[2] != b[0] || b[2] != a[0] {
            return Err(Error::DimensionMismatch(format!("bond dimensions {a:?} and {b:?} do not chain")));
        }
        if lambdas[0].len() != a[2] || lambdas[1].len() != a[0] {
            return Err(Error::DimensionMismatch("Schmidt spectra do not match bond dimensions".into()));
        }
        if charge_modulus > 1 {
            for t in &sites {
                let ch = t.charges().ok_or_else(|| Error::ChargeMismatch("charged state needs labelled tensors".into()))?;
                if ch.modulus != charge_modulus {
                    return Err(Error::ChargeMismatch(format!("tensor modulus {} vs state {charge_modulus}", ch.modulus)));
                }
            }
        }
        Ok(Self { sites, lambdas, physical_dim: d, charge_modulus: charge_modulus.max(1) })
    }

    /// Translation-invariant product state `|v> |v> |v> ...` at bond dimension 1.
    ///
    /// With `charge_modulus > 1` the vector must lie in one charge sector `c`
    /// of the physical basis (labels from `phys_charges`) with `2c = 0 mod q`.
    pub fn product_state(local: &[C<R>], phys_charges: Option<&[u32]>, charge_modulus: u32) -> Result<Self> {
        let d = local.len();
        let nrm = local.iter().fold(R::zero(), |a, &z| a + crate::scalar::abs2(z)).sqrt();
        if d == 0 || nrm == R::zero() {
            return Err(Error::InvalidArgument("local vector is zero".into()));
        }
        let inv = C::new(R::one() / nrm, R::zero());
        let mut site = Tensor::new(vec![1, d, 1], local.iter().map(|&z| z * inv).collect())?;
        let q = charge_modulus.max(1);
        if q > 1 {
            let labels = phys_charges.ok_or_else(|| Error::ChargeMismatch("charged product state needs physical labels".into()))?;
            if labels.len() != d {
                return Err(Error::ChargeMismatch(format!("{} labels for dimension {d}", labels.len())));
            }
            let mut sector = None;
            for (z, &l) in local.iter().zip(labels) {
                if cabs(*z) > R::zero() {
                    if sector.is_some_and(|s| s != l) {
                        return Err(Error::ChargeMismatch("local vector mixes charge sectors".into()));
                    }
                    sector = Some(l);
                }
            }
            let c = sector.unwrap_or(0);
            if (2 * c) % q != 0 {
                return Err(Error::ChargeMismatch(format!("per-site charge {c} is incompatible with a two-site cell mod {q}")));
            }
            site = site.with_charges(Charges::new(q, vec![vec![0], labels.to_vec(), vec![(q - c) % q]])?)?;
            let spectrum = |label: u32| SchmidtSpectrum { values: vec![R::one()], sector: Some(vec![label]), discarded_weight: R::zero() };
            // Site B sees the charge `c` on its left.
            let site_b = site.clone().with_charges(Charges::new(q, vec![vec![c], labels.to_vec(), vec![0]])?)?;
            return Self::from_parts([site, site_b], [spectrum(c), spectrum(0)], q);
        }
        Self::from_parts([site.clone(), site], [SchmidtSpectrum::trivial(), SchmidtSpectrum::trivial()], 1)
    }

    pub fn physical_dim(&self) -> usize {
        self.physical_dim
    }

    pub fn charge_modulus(&self) -> u32 {
        self.charge_modulus
    }

    /// Right-canonical tensor of site 0 (A) or 1 (B).
    pub fn site(&self, i: usize) -> &Tensor<R> {
        &self.sites[i]
    }

    pub fn lambda(&self, bond: Bond) -> &SchmidtSpectrum<R> {
        &self.lambdas[bond.index()]
    }

    /// Vidal tensor `Gamma = B lambda^-1` of site 0 (A) or 1 (B).
    pub fn gamma(&self, i: usize) -> Tensor<R> {
        let lam = &self.lambdas[i].values;
        let mut g = self.sites[i].clone();
        let r = g.shape()[2];
        for (k, z) in g.data_mut().iter_mut().enumerate() {
            *z = *z / C::new(lam[k % r], R::zero());
        }
        g
    }

    /// Bond dimensions `(A|B, B|A)`.
    pub fn bond_dims(&self) -> (usize, usize) {
        (self.lambdas[0].len(), self.lambdas[1].len())
    }

    pub fn max_bond_dim(&self) -> usize {
        let (a, b) = self.bond_dims();
        a.max(b)
    }

    /// Largest covariance violation over both site tensors.
    pub fn covariance_violation(&self) -> R {
        self.sites[0].covariance_violation().max(self.sites[1].covariance_violation())
    }

    /// Insert `u` and `u^-1` on the B|A bond. The physical state is
    /// unchanged but the tensors leave canonical form unless `u` is unitary.
    pub fn with_bond_gauge(&self, u: &DMatrix<C<R>>) -> Result<Self> {
        let n = self.lambdas[1].len();
        if u.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("gauge is {:?}, bond has {n}", u.shape())));
        }
        let inv = u.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("gauge matrix is singular".into()))?;
        let mut out = self.clone();
        let a = site_slices(&self.sites[0]).into_iter().map(|m| &inv * m).collect::<Vec<_>>();
        let b = site_slices(&self.sites[1]).into_iter().map(|m| m * u).collect::<Vec<_>>();
        out.sites[0] = from_slices(&a, self.sites[0].charges().cloned());
        out.sites[1] = from_slices(&b, self.sites[1].charges().cloned());
        Ok(out)
    }
}

/// The `d` matrices `B[:, s, :]` of a rank-3 site tensor.
pub(crate) fn site_slices<R: Real>(t: &Tensor<R>) -> Vec<DMatrix<C<R>>> {
    let s = t.shape();
    let (l, d, r) = (s[0], s[1], s[2]);
    let data = t.data();
    (0..d)
        .map(|p| DMatrix::from_fn(l, r, |i, j| data[(i * d + p) * r + j]))
        .collect()
}

/// Inverse of [`site_slices`].
pub(crate) fn from_slices<R: Real>(slices: &[DMatrix<C<R>>], charges: Option<Charges>) -> Tensor<R> {
    let d = slices.len();
    let (l, r) = slices[0].shape();
    let mut data = vec![czero(); l * d * r];
    for (p, m) in slices.iter().enumerate() {
        for i in 0..l {
            for j in 0..r {
                data[(i * d + p) * r + j] = m[(i, j)];
            }
        }
    }
    let t = Tensor::new(vec![l, d, r], data).expect("consistent slice shapes");
    match charges {
        Some(c) => t.with_charges(c).expect("charges match slice shapes"),
        None => t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cr;

    #[test]
    fn product_state_shapes() {
        let s = UniformMPS::<f64>::product_state(&[cr(1.0), cr(0.0)], Some(&[0, 1]), 2).unwrap();
        assert_eq!(s.bond_dims(), (1, 1));
        assert_eq!(s.physical_dim(), 2);
        assert!(s.covariance_violation() == 0.0);
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert!(UniformMPS::<f64>::product_state(&[cr(0.0), cr(0.0)], None, 1).is_err());
    }

    #[test]
    fn mixed_sector_vector_is_rejected_when_charged() {
        let r = UniformMPS::<f64>::product_state(&[cr(1.0), cr(1.0)], Some(&[0, 1]), 2);
        assert!(matches!(r, Err(Error::ChargeMismatch(_))));
    }

    #[test]
    fn odd_charge_density_needs_even_modulus() {
        let v = [cr(0.0), cr(1.0), cr(0.0)];
        assert!(UniformMPS::<f64>::product_state(&v, Some(&[0, 1, 2]), 3).is_err());
        let w = [cr(0.0), cr(1.0)];
        assert!(UniformMPS::<f64>::product_state(&w, Some(&[0, 1]), 2).is_ok());
    }

    #[test]
    fn slices_round_trip() {
        let t = Tensor::<f64>::from_fn(vec![2, 3, 4], |i| cr((i[0] * 12 + i[1] * 4 + i[2]) as f64));
        let back = from_slices(&site_slices(&t), None);
        assert_eq!(back, t);
    }
}
