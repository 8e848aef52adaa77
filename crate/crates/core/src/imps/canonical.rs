//! Restoring and checking the canonical gauge of a [`UniformMPS`].

use nalgebra::{DMatrix, SymmetricEigen};

use super::{from_slices, site_slices, UniformMPS};
use crate::error::{Error, Result};
use crate::scalar::{cabs, cone, Real, C};
use crate::tensor::{contract, leading_eigenpairs, svd_truncate, Charges, EigenOptions, SchmidtSpectrum, Tensor, Truncation};

/// Index sets of equal bond charge; bond operators that commute with the
/// symmetry are block diagonal over them.
pub(crate) struct BondBlocks {
    groups: Vec<(u32, Vec<usize>)>,
    dim: usize,
}

impl BondBlocks {
    pub(crate) fn new(labels: &[u32]) -> Self {
        let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match groups.iter_mut().find(|g| g.0 == l) {
                Some(g) => g.1.push(i),
                None => groups.push((l, vec![i])),
            }
        }
        groups.sort_by_key(|g| g.0);
        Self { groups, dim: labels.len() }
    }

    /// Number of free entries of a block-diagonal matrix.
    pub(crate) fn packed_len(&self) -> usize {
        self.groups.iter().map(|g| g.1.len() * g.1.len()).sum()
    }

    pub(crate) fn pack<R: Real>(&self, m: &DMatrix<C<R>>) -> Vec<C<R>> {
        let mut out = Vec::with_capacity(self.packed_len());
        for (_, idx) in &self.groups {
            for &i in idx {
                for &j in idx {
                    out.push(m[(i, j)]);
                }
            }
        }
        out
    }

    pub(crate) fn unpack<R: Real>(&self, v: &[C<R>]) -> DMatrix<C<R>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut k = 0;
        for (_, idx) in &self.groups {
            for &i in idx {
                for &j in idx {
                    m[(i, j)] = v[k];
                    k += 1;
                }
            }
        }
        m
    }

    /// Factor a Hermitian positive semi-definite block-diagonal matrix as
    /// `U diag(w) U^dag` block by block. Negative eigenvalues from roundoff
    /// are clipped to zero.
    fn eigen<R: Real>(&self, m: &DMatrix<C<R>>) -> (DMatrix<C<R>>, Vec<R>) {
        let mut u = DMatrix::zeros(self.dim, self.dim);
        let mut w = vec![R::zero(); self.dim];
        for (_, idx) in &self.groups {
            let n = idx.len();
            let sub = DMatrix::from_fn(n, n, |a, b| (m[(idx[a], idx[b])] + m[(idx[b], idx[a])].conj()) * C::new(R::of(0.5), R::zero()));
            let eig = SymmetricEigen::new(sub);
            for (a, &i) in idx.iter().enumerate() {
                w[i] = eig.eigenvalues[a].max(R::zero());
                for (b, &j) in idx.iter().enumerate() {
                    u[(j, i)] = eig.eigenvectors[(b, a)];
                }
            }
        }
        (u, w)
    }
}

/// Bond charge labels of the left leg of `t`, or zeros when uncharged.
pub(crate) fn left_labels<R: Real>(t: &Tensor<R>) -> Vec<u32> {
    t.charges().map(|c| c.legs[0].clone()).unwrap_or_else(|| vec![0; t.shape()[0]])
}

/// Dominant fixed point of a completely positive bond map, restricted to
/// charge-diagonal operators. Returned Hermitian with unit trace, along
/// with the (positive) eigenvalue.
fn fixed_point<R: Real, F>(blocks: &BondBlocks, map: F, start: &DMatrix<C<R>>) -> Result<(DMatrix<C<R>>, R)>
where
    F: Fn(&DMatrix<C<R>>) -> DMatrix<C<R>>,
{
    let dim = blocks.packed_len();
    let start = blocks.pack(start);
    let opts = EigenOptions { tol: 1e-13, dense_threshold: 16, ..EigenOptions::default() };
    let mut pairs = leading_eigenpairs(|v: &[C<R>]| blocks.pack(&map(&blocks.unpack(v))), dim, 1, Some(&start), opts)?;
    let (value, vec) = pairs.swap_remove(0);
    let mut x = blocks.unpack(&vec);
    let tr = x.trace();
    if cabs(tr) == R::zero() {
        return Err(Error::CanonicalForm(f64::INFINITY));
    }
    x *= C::new(cabs(tr), R::zero()) / tr;
    let x = (&x + x.adjoint()) * C::new(R::of(0.5) / cabs(tr), R::zero());
    Ok((x, cabs(value)))
}

/// Bring `mps` to canonical form, truncating the A|B bond with `trunc`.
pub(crate) fn canonicalize<R: Real>(mps: &UniformMPS<R>, trunc: Truncation) -> Result<UniformMPS<R>> {
    let d = mps.physical_dim();
    let q = mps.charge_modulus();
    let cell = contract(&mps.sites[0], &mps.sites[1], &[(2, 0)])?;
    let (chi, chi_r) = (cell.shape()[0], cell.shape()[3]);
    debug_assert_eq!(chi, chi_r);
    let m_t = cell.reshape(vec![chi, d * d, chi])?;
    let ms = site_slices(&m_t);
    let labels = left_labels(&mps.sites[0]);
    let blocks = BondBlocks::new(&labels);

    let (r, _) = fixed_point(&blocks, |x| ms.iter().fold(DMatrix::zeros(chi, chi), |acc, m| acc + m * x * m.adjoint()), &DMatrix::identity(chi, chi))?;
    let lam2 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        chi,
        mps.lambdas[1].values.iter().map(|&v| C::new(v * v, R::zero())),
    ));
    let (l, _) = fixed_point(&blocks, |x| ms.iter().fold(DMatrix::zeros(chi, chi), |acc, m| acc + m.adjoint() * x * m), &lam2)?;

    let (ur, wr) = blocks.eigen(&r);
    let (ul, wl) = blocks.eigen(&l);
    let w = DMatrix::from_fn(chi, chi, |i, j| ur[(i, j)] * C::new(wr[j].sqrt(), R::zero()));
    let y = DMatrix::from_fn(chi, chi, |i, j| C::new(wl[i].sqrt(), R::zero()) * ul[(j, i)].conj());
    let yw = &y * &w;

    let mut yw_t = Tensor::from_matrix(&yw);
    if q > 1 {
        let dual: Vec<u32> = labels.iter().map(|&l| (q - l) % q).collect();
        yw_t = yw_t.with_charges(Charges::new(q, vec![labels.clone(), dual])?)?;
        yw_t.project_covariant();
    }
    let floor = Truncation::new(usize::MAX, trunc.cutoff);
    let split = svd_truncate(&yw_t, 1, floor)?;
    let k = split.s.len();
    let p = split.u.to_matrix(1);
    let qh = split.v.to_matrix(1);
    let sigma = &split.s.values;

    // New cell tensor sigma^-1 P^dag Y M W Q, then rescale to right-isometry.
    let mut left = p.adjoint() * &y;
    for (i, mut row) in left.row_iter_mut().enumerate() {
        row *= C::new(R::one() / sigma[i], R::zero());
    }
    let right = &w * qh.adjoint();
    let mut new_ms: Vec<DMatrix<C<R>>> = ms.iter().map(|m| &left * m * &right).collect();
    let norm = new_ms.iter().fold(DMatrix::<C<R>>::zeros(k, k), |acc, m| acc + m * m.adjoint()).trace().re / R::of(k as f64);
    let inv = C::new(R::one() / norm.sqrt(), R::zero());
    new_ms.iter_mut().for_each(|m| *m *= inv);

    let new_labels = split.s.labels();
    let cell_charges = if q > 1 {
        let phys = mps.sites[0].charges().expect("charged state").legs[1].clone();
        let dual: Vec<u32> = new_labels.iter().map(|&l| (q - l) % q).collect();
        Some(Charges::new(q, vec![new_labels.clone(), phys.clone(), phys, dual])?)
    } else {
        None
    };
    let m_new = from_slices(&new_ms, None).reshape(vec![k, d, d, k])?;
    let mut m_new = match cell_charges {
        Some(c) => m_new.with_charges(c)?,
        None => m_new,
    };
    m_new.project_covariant();

    let mut theta = m_new.clone();
    {
        let data = theta.data_mut();
        let stride = d * d * k;
        for (i, chunk) in data.chunks_mut(stride).enumerate() {
            let s = C::new(sigma[i], R::zero());
            chunk.iter_mut().for_each(|z| *z *= s);
        }
    }
    let mid = svd_truncate(&theta, 2, trunc)?;
    let b_site = mid.v.clone();
    let a_site = contract(&m_new, &mid.v.conj(), &[(2, 1), (3, 2)])?.scale(C::new(R::one() / mid.kept_norm, R::zero()));

    let outer = SchmidtSpectrum {
        values: sigma.clone(),
        sector: if q > 1 { Some(new_labels) } else { None },
        discarded_weight: split.s.discarded_weight,
    };
    UniformMPS::from_parts([a_site, b_site], [mid.s, outer], q)
}

const MAX_PASSES: usize = 4;

/// Largest deviation from the right-canonical and Schmidt conditions
/// `sum_s B_s B_s^dag = 1` and `sum_s B_s^dag lambda_L^2 B_s = lambda_R^2`
/// over both sites, together with the normalization of both spectra.
pub fn canonical_residual<R: Real>(mps: &UniformMPS<R>) -> R {
    residual(mps, false)
}

/// [`canonical_residual`] with the isometry condition weighted by the
/// Schmidt values on both row indices, i.e. measured on the reduced density
/// matrix rather than on the bare tensor.
///
/// TEBD updates keep the isometry only up to the truncation floor, so rows
/// whose Schmidt weight is near the cutoff drift by far more than the state
/// does. This is the quantity that decides when a step re-canonicalizes.
pub fn weighted_canonical_residual<R: Real>(mps: &UniformMPS<R>) -> R {
    residual(mps, true)
}

fn residual<R: Real>(mps: &UniformMPS<R>, weighted: bool) -> R {
    let mut worst = R::zero();
    for i in 0..2 {
        let slices = site_slices(&mps.sites[i]);
        let (l, r) = slices[0].shape();
        let lam_l = &mps.lambdas[(i + 1) % 2].values;
        let lam_r = &mps.lambdas[i].values;
        let mut right = DMatrix::<C<R>>::zeros(l, l);
        let mut left = DMatrix::<C<R>>::zeros(r, r);
        for b in &slices {
            right += b * b.adjoint();
            let weighted = DMatrix::from_fn(l, r, |a, c| b[(a, c)] * C::new(lam_l[a] * lam_l[a], R::zero()));
            left += b.adjoint() * weighted;
        }
        for a in 0..l {
            right[(a, a)] -= cone::<R>();
        }
        if weighted {
            for a in 0..l {
                for c in 0..l {
                    right[(a, c)] *= C::new(lam_l[a] * lam_l[c], R::zero());
                }
            }
        }
        for a in 0..r {
            left[(a, a)] -= C::new(lam_r[a] * lam_r[a], R::zero());
        }
        worst = right.iter().chain(left.iter()).fold(worst, |acc, &z| acc.max(cabs(z)));
        worst = worst.max((mps.lambdas[i].norm_sqr() - R::one()).abs());
    }
    worst
}

impl<R: Real> UniformMPS<R> {
    /// Canonical form of the same state, with the A|B bond truncated by
    /// `trunc` (the B|A bond only drops Schmidt values below the cutoff).
    ///
    /// One pass leaves an error of order the input's distance from canonical
    /// form times the conditioning of the smallest Schmidt values, so passes
    /// repeat while the residual keeps shrinking.
    pub fn canonicalize(&self, trunc: Truncation) -> Result<Self> {
        let target = R::default_epsilon() * R::of(1e4);
        let mut out = canonicalize(self, trunc)?;
        let mut res = canonical_residual(&out);
        for _ in 1..MAX_PASSES {
            if res <= target {
                break;
            }
            let next = canonicalize(&out, trunc)?;
            let r = canonical_residual(&next);
            if !(r < res) {
                break;
            }
            (out, res) = (next, r);
        }
        Ok(out)
    }
}
