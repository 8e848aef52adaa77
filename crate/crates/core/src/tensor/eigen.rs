//! Largest-magnitude eigenpairs of (possibly non-Hermitian) linear maps.
//!
//! Small problems are materialized and solved densely through a complex
//! Schur decomposition. Larger ones use a restarted Krylov-Schur iteration
//! from a fixed deterministic start vector, so repeated calls are
//! bit-reproducible.

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::scalar::{abs2, cabs, cone, czero, Real, C};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Relative residual tolerance `|A x - l x| <= tol |l|`.
    pub tol: f64,
    /// Maximum number of Krylov restarts.
    pub max_iter: usize,
    /// Problems up to this dimension are solved densely.
    pub dense_threshold: usize,
    /// Krylov basis size; 0 picks one from the number of wanted pairs.
    pub krylov_dim: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 400, dense_threshold: 256, krylov_dim: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct DominantEigen<R: Real> {
    pub value: C<R>,
    /// Unit 2-norm eigenvector.
    pub vector: Vec<C<R>>,
    /// Magnitude of the runner-up eigenvalue, when the problem has one.
    pub second_magnitude: Option<R>,
    /// Leading magnitudes closer than 1e-10 (relative).
    pub degenerate: bool,
}

/// Dominant eigenpair of `map` acting on vectors of length `dim`.
pub fn dominant_eigenvalue<R: Real, F>(map: F, dim: usize, tol: f64, max_iter: usize) -> Result<DominantEigen<R>>
where
    F: FnMut(&[C<R>]) -> Vec<C<R>>,
{
    let opts = EigenOptions { tol, max_iter, ..EigenOptions::default() };
    let nev = if dim >= 2 { 2 } else { 1 };
    let mut pairs = leading_eigenpairs(map, dim, nev, None, opts)?;
    let second_magnitude = pairs.get(1).map(|p| cabs(p.0));
    let (value, vector) = pairs.swap_remove(0);
    let top = cabs(value);
    let degenerate = second_magnitude.is_some_and(|s| (top - s).abs() <= R::of(1e-10) * top);
    Ok(DominantEigen { value, vector, second_magnitude, degenerate })
}

/// The `nev` largest-magnitude eigenpairs, sorted by magnitude descending.
pub fn leading_eigenpairs<R: Real, F>(
    mut map: F,
    dim: usize,
    nev: usize,
    start: Option<&[C<R>]>,
    opts: EigenOptions,
) -> Result<Vec<(C<R>, Vec<C<R>>)>>
where
    F: FnMut(&[C<R>]) -> Vec<C<R>>,
{
    if dim == 0 {
        return Err(Error::InvalidArgument("eigenproblem of dimension 0".into()));
    }
    let nev = nev.clamp(1, dim);
    if dim <= opts.dense_threshold.max(1) {
        return dense_pairs(&mut map, dim, nev);
    }
    krylov_schur(&mut map, dim, nev, start, opts)
}

/// Eigenvalues of a dense square matrix, sorted by magnitude descending.
pub fn dense_eigenvalues<R: Real>(a: &DMatrix<C<R>>) -> Result<Vec<C<R>>> {
    let (_, t) = complex_schur(a.clone())?;
    let mut ev: Vec<C<R>> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    ev.sort_by(|a, b| cabs(*b).partial_cmp(&cabs(*a)).unwrap_or(std::cmp::Ordering::Equal));
    Ok(ev)
}

fn dense_pairs<R: Real, F>(map: &mut F, dim: usize, nev: usize) -> Result<Vec<(C<R>, Vec<C<R>>)>>
where
    F: FnMut(&[C<R>]) -> Vec<C<R>>,
{
    let mut a = DMatrix::<C<R>>::zeros(dim, dim);
    let mut e = vec![czero::<R>(); dim];
    for j in 0..dim {
        e[j] = cone();
        let col = map(&e);
        e[j] = czero();
        for (i, z) in col.into_iter().enumerate() {
            a[(i, j)] = z;
        }
    }
    let (mut q, mut t) = complex_schur(a)?;
    sort_schur(&mut q, &mut t, dim);
    Ok((0..nev)
        .map(|i| {
            let y = triangular_eigvec(&t, i);
            let mut x: Vec<C<R>> = (0..dim).map(|r| (0..=i).fold(czero(), |acc, l| acc + q[(r, l)] * y[l])).collect();
            normalize(&mut x);
            (t[(i, i)], x)
        })
        .collect())
}

pub(crate) fn complex_schur<R: Real>(a: DMatrix<C<R>>) -> Result<(DMatrix<C<R>>, DMatrix<C<R>>)> {
    let n = a.nrows();
    if n == 1 {
        return Ok((DMatrix::identity(1, 1), a));
    }
    let schur = Schur::try_new(a, R::eps(), 10_000).ok_or(Error::NotConverged(10_000))?;
    let (q, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = czero();
        }
    }
    Ok((q, t))
}

/// Givens rotation `(c, s)` with `[c s; -conj(s) c] [f; g] = [r; 0]`.
fn givens<R: Real>(f: C<R>, g: C<R>) -> (R, C<R>) {
    let af = cabs(f);
    let ag = cabs(g);
    if ag == R::zero() {
        return (R::one(), czero());
    }
    if af == R::zero() {
        return (R::zero(), g.conj() / C::new(ag, R::zero()));
    }
    let nrm = af.hypot(ag);
    let phase = f / C::new(af, R::zero());
    (af / nrm, phase * g.conj() / C::new(nrm, R::zero()))
}

/// Swap diagonal entries `i` and `i + 1` of the triangular factor while
/// keeping `q t q^dag` fixed.
fn swap_adjacent<R: Real>(q: &mut DMatrix<C<R>>, t: &mut DMatrix<C<R>>, i: usize) {
    let n = t.nrows();
    let (t11, t22) = (t[(i, i)], t[(i + 1, i + 1)]);
    let (cs, sn) = givens(t[(i, i + 1)], t22 - t11);
    let csc = C::new(cs, R::zero());
    for k in (i + 2)..n {
        let (x, y) = (t[(i, k)], t[(i + 1, k)]);
        t[(i, k)] = csc * x + sn * y;
        t[(i + 1, k)] = csc * y - sn.conj() * x;
    }
    let snc = sn.conj();
    for k in 0..i {
        let (x, y) = (t[(k, i)], t[(k, i + 1)]);
        t[(k, i)] = csc * x + snc * y;
        t[(k, i + 1)] = csc * y - sn * x;
    }
    t[(i, i)] = t22;
    t[(i + 1, i + 1)] = t11;
    for k in 0..q.nrows() {
        let (x, y) = (q[(k, i)], q[(k, i + 1)]);
        q[(k, i)] = csc * x + snc * y;
        q[(k, i + 1)] = csc * y - sn * x;
    }
}

/// Reorder so the first `count` diagonal entries are the largest in
/// magnitude, in descending order.
fn sort_schur<R: Real>(q: &mut DMatrix<C<R>>, t: &mut DMatrix<C<R>>, count: usize) {
    let n = t.nrows();
    for p in 0..count.min(n) {
        let mut best = p;
        for j in (p + 1)..n {
            if cabs(t[(j, j)]) > cabs(t[(best, best)]) {
                best = j;
            }
        }
        for j in (p..best).rev() {
            swap_adjacent(q, t, j);
        }
    }
}

/// Eigenvector of the upper-triangular `t` for its `i`-th diagonal entry,
/// expressed in the triangular basis (entries past `i` are zero).
fn triangular_eigvec<R: Real>(t: &DMatrix<C<R>>, i: usize) -> Vec<C<R>> {
    let n = t.nrows();
    let lam = t[(i, i)];
    let scale = (0..n).fold(R::zero(), |a, k| a.max(cabs(t[(k, k)]))).max(R::eps());
    let mut y = vec![czero::<R>(); n];
    y[i] = cone();
    for j in (0..i).rev() {
        let acc = ((j + 1)..=i).fold(czero::<R>(), |a, l| a + t[(j, l)] * y[l]);
        let mut d = t[(j, j)] - lam;
        if cabs(d) < R::eps() * scale {
            d = C::new(R::eps() * scale, R::zero());
        }
        y[j] = -acc / d;
    }
    y
}

fn dot<R: Real>(a: &[C<R>], b: &[C<R>]) -> C<R> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

fn norm<R: Real>(a: &[C<R>]) -> R {
    a.iter().fold(R::zero(), |acc, &z| acc + abs2(z)).sqrt()
}

fn normalize<R: Real>(a: &mut [C<R>]) -> R {
    let n = norm(a);
    if n > R::zero() {
        let inv = C::new(R::one() / n, R::zero());
        a.iter_mut().for_each(|z| *z *= inv);
    }
    n
}

/// Deterministic pseudo-random fill (SplitMix64).
pub(crate) fn fill_deterministic<R: Real>(v: &mut [C<R>], seed: u64) {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x2545_F491_4F6C_DD1D);
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for z in v.iter_mut() {
        *z = C::new(R::of(next()), R::of(next()));
    }
}

/// Orthogonalize `w` against `basis` (two Gram-Schmidt passes); returns the
/// accumulated projection coefficients.
fn orthogonalize<R: Real>(basis: &[Vec<C<R>>], w: &mut [C<R>]) -> Vec<C<R>> {
    let mut coef = vec![czero::<R>(); basis.len()];
    for _ in 0..2 {
        for (i, b) in basis.iter().enumerate() {
            let c = dot(b, w);
            coef[i] += c;
            for (x, y) in w.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    coef
}

fn krylov_schur<R: Real, F>(
    map: &mut F,
    dim: usize,
    nev: usize,
    start: Option<&[C<R>]>,
    opts: EigenOptions,
) -> Result<Vec<(C<R>, Vec<C<R>>)>>
where
    F: FnMut(&[C<R>]) -> Vec<C<R>>,
{
    let m = if opts.krylov_dim > 0 { opts.krylov_dim } else { (2 * nev + 20).max(32) }.min(dim);
    let keep = (nev + (m - nev) / 2).clamp(nev, m - 1).max(1);
    let tol = R::of(opts.tol);

    let mut v0 = match start {
        Some(s) if s.len() == dim && norm(s) > R::zero() => s.to_vec(),
        _ => {
            let mut v = vec![czero(); dim];
            fill_deterministic(&mut v, 1);
            v
        }
    };
    normalize(&mut v0);
    let mut basis: Vec<Vec<C<R>>> = vec![v0];
    let mut h = DMatrix::<C<R>>::zeros(m + 1, m);
    let mut k = 0usize;
    let mut reseed = 2u64;

    for _ in 0..opts.max_iter.max(1) {
        for j in k..m {
            let mut w = map(&basis[j]);
            let coef = orthogonalize(&basis[..=j], &mut w);
            for (i, c) in coef.into_iter().enumerate() {
                h[(i, j)] += c;
            }
            let beta = norm(&w);
            let col_scale = (0..=j).fold(R::zero(), |a, i| a.max(cabs(h[(i, j)])));
            if beta <= R::eps() * R::of(16.0) * col_scale.max(R::eps()) {
                // Invariant subspace: continue from a fresh orthogonal direction.
                h[(j + 1, j)] = czero();
                let mut fresh = vec![czero(); dim];
                fill_deterministic(&mut fresh, reseed);
                reseed += 1;
                orthogonalize(&basis[..=j], &mut fresh);
                normalize(&mut fresh);
                basis.push(fresh);
            } else {
                h[(j + 1, j)] = C::new(beta, R::zero());
                let inv = C::new(R::one() / beta, R::zero());
                w.iter_mut().for_each(|z| *z *= inv);
                basis.push(w);
            }
        }
        let hm = h.view((0, 0), (m, m)).clone_owned();
        let (mut q, mut t) = complex_schur(hm)?;
        sort_schur(&mut q, &mut t, keep.max(nev));
        let b: Vec<C<R>> = (0..m).map(|c| (0..m).fold(czero(), |acc, l| acc + h[(m, l)] * q[(l, c)])).collect();

        let mut converged = true;
        for i in 0..nev {
            let y = triangular_eigvec(&t, i);
            let res = cabs(b.iter().zip(&y).fold(czero::<R>(), |a, (x, z)| a + *x * *z)) / norm(&y);
            if res > tol * cabs(t[(i, i)]).max(R::eps()) {
                converged = false;
                break;
            }
        }
        if converged {
            return Ok((0..nev)
                .map(|i| {
                    let y = triangular_eigvec(&t, i);
                    let s: Vec<C<R>> = (0..m).map(|r| (0..=i).fold(czero(), |a, l| a + q[(r, l)] * y[l])).collect();
                    let mut x = vec![czero::<R>(); dim];
                    for (bv, &sv) in basis.iter().zip(&s) {
                        for (xe, &be) in x.iter_mut().zip(bv) {
                            *xe += be * sv;
                        }
                    }
                    normalize(&mut x);
                    (t[(i, i)], x)
                })
                .collect());
        }

        // Thick restart on the leading Schur vectors.
        let mut next: Vec<Vec<C<R>>> = Vec::with_capacity(m + 1);
        for c in 0..keep {
            let mut x = vec![czero::<R>(); dim];
            for (l, bv) in basis.iter().take(m).enumerate() {
                let coef = q[(l, c)];
                for (xe, &be) in x.iter_mut().zip(bv) {
                    *xe += be * coef;
                }
            }
            next.push(x);
        }
        next.push(basis.swap_remove(m));
        basis = next;
        let mut hn = DMatrix::<C<R>>::zeros(m + 1, m);
        for r in 0..keep {
            for c in r..keep {
                hn[(r, c)] = t[(r, c)];
            }
        }
        for c in 0..keep {
            hn[(keep, c)] = b[c];
        }
        h = hn;
        k = keep;
    }
    Err(Error::NotConverged(opts.max_iter))
}
