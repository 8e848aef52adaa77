//! Unit-cell transfer operators: overlaps, fidelity density and
//! correlation length.

use nalgebra::DMatrix;

use super::{site_slices, UniformMPS};
use crate::error::{Error, Result};
use crate::scalar::{cabs, Real, C};
use crate::tensor::{leading_eigenpairs, EigenOptions};

/// Leading eigenvalues of a mixed unit-cell transfer operator.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferSpectrum<R: Real> {
    /// Sorted by magnitude, largest first.
    pub eigenvalues: Vec<C<R>>,
    pub unit_cell_sites: usize,
}

const UNIT_CELL: usize = 2;

/// The map `X -> sum_s K_s X Bra_s^dag` over one unit cell, acting on
/// `X` of shape `chi_ket x chi_bra` stored row-major.
struct MixedTransfer<R: Real> {
    ket: [Vec<DMatrix<C<R>>>; 2],
    bra: [Vec<DMatrix<C<R>>>; 2],
    rows: usize,
    cols: usize,
}

impl<R: Real> MixedTransfer<R> {
    fn new(bra: &UniformMPS<R>, ket: &UniformMPS<R>) -> Result<Self> {
        if bra.physical_dim() != ket.physical_dim() {
            return Err(Error::DimensionMismatch(format!(
                "physical dimensions {} and {}",
                bra.physical_dim(),
                ket.physical_dim()
            )));
        }
        let k = [site_slices(&ket.sites[0]), site_slices(&ket.sites[1])];
        let b = [site_slices(&bra.sites[0]), site_slices(&bra.sites[1])];
        let rows = k[0][0].nrows();
        let cols = b[0][0].nrows();
        Ok(Self { ket: k, bra: b, rows, cols })
    }

    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn apply(&self, v: &[C<R>]) -> Vec<C<R>> {
        let x = DMatrix::from_row_slice(self.rows, self.cols, v);
        let mut y = x;
        for site in [1, 0] {
            let (ks, bs) = (&self.ket[site], &self.bra[site]);
            let (kr, br) = (ks[0].nrows(), bs[0].nrows());
            y = ks.iter().zip(bs).fold(DMatrix::zeros(kr, br), |acc, (k, b)| acc + k * &y * b.adjoint());
        }
        // Row-major flattening to match the input layout.
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                out.push(y[(i, j)]);
            }
        }
        out
    }

    fn leading(&self, n: usize) -> Result<Vec<C<R>>> {
        let dim = self.dim();
        let opts = EigenOptions { tol: 1e-12, max_iter: 1000, ..EigenOptions::default() };
        let pairs = leading_eigenpairs(|v: &[C<R>]| self.apply(v), dim, n.min(dim), None, opts)?;
        Ok(pairs.into_iter().map(|p| p.0).collect())
    }
}

/// Top `n_values` eigenvalues of the mixed transfer operator of one unit
/// cell, ket tensors against conjugated bra tensors.
pub fn transfer_spectrum<R: Real>(bra: &UniformMPS<R>, ket: &UniformMPS<R>, n_values: usize) -> Result<TransferSpectrum<R>> {
    let t = MixedTransfer::new(bra, ket)?;
    Ok(TransferSpectrum { eigenvalues: t.leading(n_values.max(1))?, unit_cell_sites: UNIT_CELL })
}

/// Per-site fidelity density `-(2 / cell) log |lambda_1|` between two
/// normalized states. Orthogonal states give `+inf`.
pub fn fidelity_density<R: Real>(psi_t: &UniformMPS<R>, psi_0: &UniformMPS<R>) -> Result<R> {
    let spec = transfer_spectrum(psi_0, psi_t, 1)?;
    let top = cabs(spec.eigenvalues[0]);
    if top == R::zero() {
        return Ok(R::of(f64::INFINITY));
    }
    let f = -(R::of(2.0) / R::of(UNIT_CELL as f64)) * top.ln();
    // An overlap cannot exceed one; tiny negative values are eigensolver noise.
    Ok(if f < R::zero() && f > -R::of(1e-10) { R::zero() } else { f })
}

/// Correlation length `-cell / log |lambda_2 / lambda_1|` of the self
/// transfer operator, in sites. Zero when the cell transfer matrix has rank
/// one (product states), `+inf` for degenerate leading magnitudes.
pub fn correlation_length<R: Real>(mps: &UniformMPS<R>) -> Result<R> {
    let t = MixedTransfer::new(mps, mps)?;
    if t.dim() == 1 {
        return Ok(R::zero());
    }
    let ev = t.leading(2)?;
    if ev.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two transfer eigenvalues".into()));
    }
    let (l1, l2) = (cabs(ev[0]), cabs(ev[1]));
    let scale = l1.max(R::eps());
    if l2 <= R::of(1e-14) * scale {
        return Ok(R::zero());
    }
    if (l1 - l2).abs() <= R::of(1e-12) * scale {
        return Ok(R::of(f64::INFINITY));
    }
    Ok(-R::of(UNIT_CELL as f64) / (l2 / l1).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imps::canonical::tests::random_state;
    use crate::scalar::cr;

    fn product(v: [f64; 2]) -> UniformMPS<f64> {
        UniformMPS::product_state(&[cr(v[0]), cr(v[1])], None, 1).unwrap()
    }

    #[test]
    fn self_overlap_of_product_is_one() {
        let s = product([1.0, 1.0]);
        let spec = transfer_spectrum(&s, &s, 1).unwrap();
        assert!((cabs(spec.eigenvalues[0]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_overlap_per_cell() {
        let up = product([1.0, 0.0]);
        let right = product([1.0, 1.0]);
        let spec = transfer_spectrum(&up, &right, 1).unwrap();
        assert!((cabs(spec.eigenvalues[0]) - 0.5).abs() < 1e-14);
        assert!((fidelity_density(&right, &up).unwrap() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn identical_states_have_zero_fidelity_density() {
        let s = random_state(4, 2, 3);
        assert!(fidelity_density(&s, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn product_correlation_length_is_zero() {
        assert_eq!(correlation_length(&product([0.3, 0.7])).unwrap(), 0.0);
    }

    #[test]
    fn mixed_transfer_matches_materialized_matrix() {
        let a = random_state(3, 2, 5);
        let b = random_state(3, 2, 6);
        let t = MixedTransfer::new(&b, &a).unwrap();
        // Explicit (chi^2 x chi^2) matrix from element-wise loops.
        let (ka, kb) = (&t.ket, &t.bra);
        let n = 3;
        let mut big = DMatrix::<C<f64>>::zeros(n * n, n * n);
        for s1 in 0..2 {
            for s2 in 0..2 {
                let k = &ka[0][s1] * &ka[1][s2];
                let br = &kb[0][s1] * &kb[1][s2];
                for (i, j, p, q) in itertools(n) {
                    big[(i * n + j, p * n + q)] += k[(i, p)] * br[(j, q)].conj();
                }
            }
        }
        let mut dense = crate::tensor::dense_eigenvalues(&big).unwrap();
        dense.truncate(2);
        let spec = transfer_spectrum(&b, &a, 2).unwrap();
        for (x, y) in spec.eigenvalues.iter().zip(&dense) {
            assert!((cabs(*x) - cabs(*y)).abs() < 1e-10);
        }
    }

    fn itertools(n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
        (0..n).flat_map(move |i| (0..n).flat_map(move |j| (0..n).flat_map(move |p| (0..n).map(move |q| (i, j, p, q)))))
    }
}
