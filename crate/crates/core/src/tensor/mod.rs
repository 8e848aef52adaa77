//! Dense complex tensors with optional Z_q charge labels.
//!
//! Data is stored row-major: the last leg varies fastest. A charged tensor
//! carries one label in `[0, q)` per index of every leg and is *covariant*
//! when all its nonzero entries sit at index tuples whose labels sum to
//! `0 mod q`. Outgoing legs therefore store the negated (dual) label.

mod eigen;
mod expm;
mod svd;

pub use eigen::{dense_eigenvalues, dominant_eigenvalue, leading_eigenpairs, DominantEigen, EigenOptions};
pub use expm::hermitian_exponential;
pub use svd::{svd_truncate, SchmidtSpectrum, SvdTruncation, Truncation};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{abs2, cabs, czero, Real, C};

/// Per-leg Z_q charge labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Charges {
    pub modulus: u32,
    pub legs: Vec<Vec<u32>>,
}

impl Charges {
    pub fn new(modulus: u32, legs: Vec<Vec<u32>>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidArgument("charge modulus must be positive".into()));
        }
        if legs.iter().flatten().any(|&c| c >= modulus) {
            return Err(Error::InvalidArgument(format!("charge label outside [0, {modulus})")));
        }
        Ok(Self { modulus, legs })
    }

    /// Labels of the dual (conjugated) legs.
    pub fn dual(&self) -> Self {
        let q = self.modulus;
        Self {
            modulus: q,
            legs: self
                .legs
                .iter()
                .map(|l| l.iter().map(|&c| (q - c) % q).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<R: Real> {
    shape: Vec<usize>,
    data: Vec<C<R>>,
    charges: Option<Charges>,
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl<R: Real> Tensor<R> {
    pub fn new(shape: Vec<usize>, data: Vec<C<R>>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} holds {n} entries, data has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data, charges: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![czero(); n], charges: None }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C<R>) -> Self {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data, charges: None }
    }

    /// Square identity matrix.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(vec![n, n], |i| if i[0] == i[1] { C::new(R::one(), R::zero()) } else { czero() })
    }

    /// Interpret a (square or rectangular) nalgebra matrix as a rank-2 tensor.
    pub fn from_matrix(m: &DMatrix<C<R>>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self { shape: vec![r, c], data, charges: None }
    }

    pub fn with_charges(mut self, charges: Charges) -> Result<Self> {
        if charges.legs.len() != self.shape.len() {
            return Err(Error::ChargeMismatch(format!(
                "{} charge lists for a rank-{} tensor",
                charges.legs.len(),
                self.shape.len()
            )));
        }
        for (ax, (l, &d)) in charges.legs.iter().zip(&self.shape).enumerate() {
            if l.len() != d {
                return Err(Error::ChargeMismatch(format!(
                    "leg {ax} has dimension {d} but {} labels",
                    l.len()
                )));
            }
        }
        self.charges = Some(charges);
        Ok(self)
    }

    pub fn without_charges(mut self) -> Self {
        self.charges = None;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C<R>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C<R>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C<R>> {
        self.data
    }

    pub fn charges(&self) -> Option<&Charges> {
        self.charges.as_ref()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(strides(&self.shape)).map(|(i, s)| i * s).sum()
    }

    pub fn get(&self, idx: &[usize]) -> C<R> {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C<R>) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    /// Complex conjugate with dual charge labels.
    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
            charges: self.charges.as_ref().map(Charges::dual),
        }
    }

    pub fn scale(&self, alpha: C<R>) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&z| z * alpha).collect(),
            charges: self.charges.clone(),
        }
    }

    pub fn norm(&self) -> R {
        self.data.iter().fold(R::zero(), |acc, &z| acc + abs2(z)).sqrt()
    }

    pub fn max_abs(&self) -> R {
        self.data.iter().fold(R::zero(), |acc, &z| acc.max(cabs(z)))
    }

    pub fn max_abs_diff(&self, other: &Self) -> R {
        self.data
            .iter()
            .zip(&other.data)
            .fold(R::zero(), |acc, (&a, &b)| acc.max(cabs(a - b)))
    }

    /// New leg order: leg `i` of the result is leg `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank(), "permutation length");
        let old_strides = strides(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; new_shape.len()];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for ax in (0..new_shape.len()).rev() {
                idx[ax] += 1;
                off += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                off -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        let charges = self.charges.as_ref().map(|c| Charges {
            modulus: c.modulus,
            legs: perm.iter().map(|&p| c.legs[p].clone()).collect(),
        });
        Self { shape: new_shape, data, charges }
    }

    /// Reshape without moving data. Charge labels are fused when legs are
    /// grouped contiguously; any other reshape drops them.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::DimensionMismatch(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        let charges = self.charges.as_ref().and_then(|c| fuse_charges(c, &self.shape, &shape));
        Ok(Self { shape, data: self.data.clone(), charges })
    }

    /// View as a matrix whose rows run over the first `row_legs` legs.
    pub fn to_matrix(&self, row_legs: usize) -> DMatrix<C<R>> {
        let rows: usize = self.shape[..row_legs].iter().product();
        let cols: usize = self.shape[row_legs..].iter().product();
        DMatrix::from_row_slice(rows, cols, &self.data)
    }

    pub(crate) fn from_matrix_shaped(m: &DMatrix<C<R>>, shape: Vec<usize>, charges: Option<Charges>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        debug_assert_eq!(shape.iter().product::<usize>(), r * c);
        Self { shape, data, charges }
    }

    /// Total charge label of every multi-index over the legs `legs`
    /// (row-major over those legs), or `None` for uncharged tensors.
    pub fn fused_labels(&self, legs: std::ops::Range<usize>) -> Option<Vec<u32>> {
        let ch = self.charges.as_ref()?;
        let q = ch.modulus;
        let mut labels = vec![0u32];
        for ax in legs {
            let leg = &ch.legs[ax];
            let mut next = Vec::with_capacity(labels.len() * leg.len());
            for &l in &labels {
                for &c in leg {
                    next.push((l + c) % q);
                }
            }
            labels = next;
        }
        Some(labels)
    }

    /// Largest magnitude of any entry that violates charge covariance.
    /// Zero for uncharged tensors.
    pub fn covariance_violation(&self) -> R {
        let Some(labels) = self.fused_labels(0..self.rank()) else {
            return R::zero();
        };
        self.data
            .iter()
            .zip(labels)
            .filter(|(_, l)| *l != 0)
            .fold(R::zero(), |acc, (&z, _)| acc.max(cabs(z)))
    }

    pub fn is_covariant(&self) -> bool {
        self.covariance_violation() == R::zero()
    }

    /// Zero every entry that violates covariance.
    pub fn project_covariant(&mut self) {
        if let Some(labels) = self.fused_labels(0..self.rank()) {
            for (z, l) in self.data.iter_mut().zip(labels) {
                if l != 0 {
                    *z = czero();
                }
            }
        }
    }

    /// Converts scalar type; used for mixed-precision checks.
    pub fn cast<S: Real>(&self) -> Tensor<S> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| C::new(S::of(z.re.as_f64()), S::of(z.im.as_f64()))).collect(),
            charges: self.charges.clone(),
        }
    }
}

fn fuse_charges(c: &Charges, old: &[usize], new: &[usize]) -> Option<Charges> {
    if old == new {
        return Some(c.clone());
    }
    // Only groupings of consecutive old legs keep their labels.
    let mut legs = Vec::with_capacity(new.len());
    let mut ax = 0;
    for &d in new {
        let mut labels = vec![0u32];
        let mut acc = 1usize;
        while ax < old.len() && (acc < d || (d == 1 && old[ax] == 1 && labels.len() == 1 && acc == 1)) {
            acc *= old[ax];
            labels = labels
                .iter()
                .flat_map(|&l| c.legs[ax].iter().map(move |&x| (l + x) % c.modulus))
                .collect();
            ax += 1;
            if d == 1 {
                break;
            }
        }
        if acc != d {
            return None;
        }
        legs.push(labels);
    }
    (ax == old.len()).then_some(Charges { modulus: c.modulus, legs })
}

/// Contract `a` and `b` over the listed `(leg of a, leg of b)` pairs.
///
/// The result carries the unpaired legs of `a` followed by those of `b`,
/// each in original order. Paired charged legs must carry complementary
/// labels (summing to zero mod q).
pub fn contract<R: Real>(a: &Tensor<R>, b: &Tensor<R>, pairs: &[(usize, usize)]) -> Result<Tensor<R>> {
    for &(i, j) in pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::InvalidArgument(format!("leg pair ({i}, {j}) out of range")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::DimensionMismatch(format!(
                "leg {i} of a has dimension {}, leg {j} of b has {}",
                a.shape[i], b.shape[j]
            )));
        }
    }
    let charges = match (&a.charges, &b.charges) {
        (Some(ca), Some(cb)) => {
            if ca.modulus != cb.modulus {
                return Err(Error::ChargeMismatch(format!("moduli {} and {}", ca.modulus, cb.modulus)));
            }
            let q = ca.modulus;
            for &(i, j) in pairs {
                if ca.legs[i].iter().zip(&cb.legs[j]).any(|(x, y)| (x + y) % q != 0) {
                    return Err(Error::ChargeMismatch(format!("legs ({i}, {j}) are not complementary")));
                }
            }
            true
        }
        _ => false,
    };
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect();
    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let ap = a.permute(&perm_a);
    let bp = b.permute(&perm_b);
    let ma = ap.to_matrix(free_a.len());
    let mb = bp.to_matrix(pairs.len());
    let prod = ma * mb;
    let shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&j| b.shape[j]))
        .collect();
    let charges = if charges {
        let (ca, cb) = (a.charges.as_ref().unwrap(), b.charges.as_ref().unwrap());
        Some(Charges {
            modulus: ca.modulus,
            legs: free_a
                .iter()
                .map(|&i| ca.legs[i].clone())
                .chain(free_b.iter().map(|&j| cb.legs[j].clone()))
                .collect(),
        })
    } else {
        None
    };
    Ok(Tensor::from_matrix_shaped(&prod, shape, charges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cr;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![rows, cols], v.iter().map(|&x| cr::<f64>(x)).collect()).unwrap()
    }

    #[test]
    fn identity_contracts_to_vector() {
        let v = Tensor::new(vec![2], vec![cr::<f64>(1.0), cr::<f64>(0.0)]).unwrap();
        let out = contract(&Tensor::<f64>::identity(2), &v, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert_eq!(out.data(), &[cr::<f64>(1.0), cr::<f64>(0.0)]);
    }

    #[test]
    fn hand_matrix_product() {
        let a = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let out = contract(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(out.data(), mat(2, 2, &[2.0, 1.0, 4.0, 3.0]).data());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = mat(2, 3, &[0.0; 6]);
        let b = mat(2, 2, &[0.0; 4]);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn charge_mismatch_is_rejected() {
        let a = mat(2, 2, &[1.0, 0.0, 0.0, 1.0])
            .with_charges(Charges::new(2, vec![vec![0, 1], vec![0, 1]]).unwrap())
            .unwrap();
        let b = mat(2, 2, &[1.0, 0.0, 0.0, 1.0])
            .with_charges(Charges::new(2, vec![vec![1, 0], vec![0, 1]]).unwrap())
            .unwrap();
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::ChargeMismatch(_))));
        // Z2 labels are self-dual, so matching labels are complementary.
        let b_ok = b.clone().without_charges().with_charges(Charges::new(2, vec![vec![0, 1], vec![0, 1]]).unwrap()).unwrap();
        assert!(contract(&a, &b_ok, &[(1, 0)]).is_ok());
    }

    #[test]
    fn permute_round_trip() {
        let t = Tensor::<f64>::from_fn(vec![2, 3, 4], |i| cr::<f64>((i[0] * 100 + i[1] * 10 + i[2]) as f64));
        let p = t.permute(&[2, 0, 1]);
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), t.get(&[1, 2, 3]));
        assert_eq!(p.permute(&[1, 2, 0]), t);
    }

    #[test]
    fn reshape_fuses_consecutive_charges() {
        let t = Tensor::<f64>::zeros(vec![2, 2, 3])
            .with_charges(Charges::new(3, vec![vec![0, 1], vec![0, 2], vec![0, 1, 2]]).unwrap())
            .unwrap();
        let r = t.reshape(vec![4, 3]).unwrap();
        assert_eq!(r.charges().unwrap().legs[0], vec![0, 2, 1, 0]);
        assert_eq!(r.charges().unwrap().legs[1], vec![0, 1, 2]);
        let bad = t.reshape(vec![3, 4]).unwrap();
        assert!(bad.charges().is_none());
    }
}
