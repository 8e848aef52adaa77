use nalgebra::{DMatrix, SymmetricEigen};

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{cabs, czero, Real, C};

/// `exp(scale * h)` for Hermitian `h`, via eigendecomposition.
///
/// `h` may have any even rank `2k`; it is read as a matrix from its first
/// `k` legs to its last `k` legs. Shape and charge labels are preserved.
pub fn hermitian_exponential<R: Real>(h: &Tensor<R>, scale: C<R>) -> Result<Tensor<R>> {
    if h.rank() % 2 != 0 || h.rank() == 0 {
        return Err(Error::InvalidArgument(format!("rank-{} tensor is not an operator", h.rank())));
    }
    let half = h.rank() / 2;
    let m = h.to_matrix(half);
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("operator is {}x{}", m.nrows(), m.ncols())));
    }
    let dev = hermiticity_deviation(&m);
    let tol = R::of(1e-12).max(R::eps() * R::of(64.0)) * (R::one() + h.max_abs());
    if dev > tol {
        return Err(Error::NotHermitian(dev.as_f64()));
    }
    let herm = (&m + m.adjoint()) * C::new(R::of(0.5), R::zero());
    let eig = SymmetricEigen::new(herm);
    let n = m.nrows();
    let phases: Vec<C<R>> = eig.eigenvalues.iter().map(|&l| crate::scalar::cexp(scale * C::new(l, R::zero()))).collect();
    let u = &eig.eigenvectors;
    let mut out = DMatrix::<C<R>>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = (0..n).fold(czero(), |acc, k| acc + u[(i, k)] * phases[k] * u[(j, k)].conj());
        }
    }
    let mut t = Tensor::from_matrix_shaped(&out, h.shape().to_vec(), h.charges().cloned());
    // A covariant generator has a covariant exponential; anything outside
    // the allowed sectors is eigensolver roundoff.
    t.project_covariant();
    Ok(t)
}

pub(crate) fn hermiticity_deviation<R: Real>(m: &DMatrix<C<R>>) -> R {
    let n = m.nrows();
    let mut dev = R::zero();
    for i in 0..n {
        for j in 0..n {
            dev = dev.max(cabs(m[(i, j)] - m[(j, i)].conj()));
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        Tensor::from_matrix(&((&a + a.adjoint()) * cr::<f64>(0.5)))
    }

    /// Truncated Taylor series, independent of the eigendecomposition route.
    fn taylor(h: &Tensor<f64>, scale: C<f64>, terms: usize) -> Tensor<f64> {
        let m = h.to_matrix(1) * scale;
        let n = m.nrows();
        let mut acc = DMatrix::<C<f64>>::identity(n, n);
        let mut term = DMatrix::<C<f64>>::identity(n, n);
        for k in 1..terms {
            term = &term * &m * cr::<f64>(1.0 / k as f64);
            acc += &term;
        }
        Tensor::from_matrix(&acc)
    }

    #[test]
    fn zero_generator_gives_identity() {
        let z = Tensor::<f64>::zeros(vec![3, 3]);
        let e = hermitian_exponential(&z, C::new(0.0, -1.0)).unwrap();
        assert!(e.max_abs_diff(&Tensor::identity(3)) < 1e-15);
    }

    #[test]
    fn pauli_rotation() {
        let sx = Tensor::new(vec![2, 2], vec![cr::<f64>(0.0), cr::<f64>(1.0), cr::<f64>(1.0), cr::<f64>(0.0)]).unwrap();
        let e = hermitian_exponential(&sx, C::new(0.0, -std::f64::consts::FRAC_PI_2)).unwrap();
        let expected = sx.scale(C::new(0.0, -1.0));
        assert!(e.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn matches_taylor_series() {
        let h = random_hermitian(9, 4);
        let scale = C::new(0.0, -0.3);
        let e = hermitian_exponential(&h, scale).unwrap();
        assert!(e.max_abs_diff(&taylor(&h, scale, 40)) < 1e-10);
    }

    #[test]
    fn forward_backward_is_identity() {
        let h = random_hermitian(6, 8);
        let f = hermitian_exponential(&h, C::new(0.0, -0.7)).unwrap();
        let b = hermitian_exponential(&h, C::new(0.0, 0.7)).unwrap();
        let prod = crate::tensor::contract(&f, &b, &[(1, 0)]).unwrap();
        assert!(prod.max_abs_diff(&Tensor::identity(6)) < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = Tensor::new(vec![2, 2], vec![cr::<f64>(0.0), cr::<f64>(1.0), cr::<f64>(0.0), cr::<f64>(0.0)]).unwrap();
        assert!(matches!(hermitian_exponential(&a, cr::<f64>(1.0)), Err(Error::NotHermitian(_))));
    }
}
