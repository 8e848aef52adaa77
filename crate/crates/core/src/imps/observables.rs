use super::{Bond, UniformMPS};
use crate::error::{Error, Result};
use crate::scalar::{abs2, czero, Real, C};
use crate::tensor::{contract, Tensor};

/// Von Neumann entropy of the Schmidt spectrum on `bond`.
pub fn entanglement_entropy<R: Real>(mps: &UniformMPS<R>, bond: Bond) -> Result<R> {
    let lam = mps.lambda(bond);
    let n = lam.norm_sqr();
    if (n - R::one()).abs() > R::of(1e-8) {
        return Err(Error::Precondition(format!("Schmidt spectrum has norm^2 {n}")));
    }
    Ok(lam.entropy())
}

/// `<op2>` on a two-site window `(left_site, left_site + 1)` in the
/// canonical gauge: `theta = lambda_L B_X B_Y`.
fn window_expectation<R: Real>(mps: &UniformMPS<R>, left_site: usize, op2: &Tensor<R>) -> Result<C<R>> {
    let lam = &mps.lambdas[(left_site + 1) % 2].values;
    let c = contract(&mps.sites[left_site], &mps.sites[(left_site + 1) % 2], &[(2, 0)])?;
    let mut theta = c.without_charges();
    let stride = theta.len() / lam.len();
    for (i, chunk) in theta.data_mut().chunks_mut(stride).enumerate() {
        let s = C::new(lam[i], R::zero());
        chunk.iter_mut().for_each(|z| *z *= s);
    }
    // (s1', s2', l, r) after applying the operator, back to (l, s1', s2', r).
    let applied = contract(&op2.clone().without_charges(), &theta, &[(2, 1), (3, 2)])?.permute(&[2, 0, 1, 3]);
    let num = theta.data().iter().zip(applied.data()).fold(czero::<R>(), |a, (x, y)| a + x.conj() * y);
    let den = theta.data().iter().fold(R::zero(), |a, &x| a + abs2(x));
    Ok(num / C::new(den, R::zero()))
}

/// Average of `<op2>` over the A|B and B|A bonds. `op2` has legs
/// `(out1, out2, in1, in2)` and must be Hermitian.
pub fn bond_expectation<R: Real>(mps: &UniformMPS<R>, op2: &Tensor<R>) -> Result<R> {
    let d = mps.physical_dim();
    if op2.shape() != [d, d, d, d] {
        return Err(Error::DimensionMismatch(format!("operator shape {:?} for d = {d}", op2.shape())));
    }
    let m = op2.to_matrix(2);
    let dev = (0..d * d)
        .flat_map(|i| (0..d * d).map(move |j| (i, j)))
        .fold(R::zero(), |a, (i, j)| a.max(crate::scalar::cabs(m[(i, j)] - m[(j, i)].conj())));
    if dev > R::of(1e-10) * (R::one() + op2.max_abs()) {
        return Err(Error::NotHermitian(dev.as_f64()));
    }
    let ab = window_expectation(mps, 0, op2)?;
    let ba = window_expectation(mps, 1, op2)?;
    Ok((ab.re + ba.re) * R::of(0.5))
}
