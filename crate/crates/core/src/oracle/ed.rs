use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{OracleMethod, OracleResult};
use crate::error::{Error, Result};
use crate::evolution::step_count;
use crate::models::{bond_hamiltonian, charge_table, ModelKind, ModelSpec};

type Vector = DVector<Complex64>;

/// Largest rings handled by [`ed_sweep`].
pub fn max_sites(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Tfim => 10,
        ModelKind::Potts3 => 8,
    }
}

/// Sparse operator on the charge-0 sector as per-row `(column, value)` lists.
#[derive(Clone, Debug)]
struct Sparse {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl Sparse {
    fn apply(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.rows.len(), self.rows.iter().map(|row| row.iter().map(|&(j, h)| h * x[j]).sum()))
    }
}

/// Periodic ring restricted to total charge 0, with the Hamiltonian split
/// as `J H_J + g H_g`.
#[derive(Clone, Debug)]
pub struct Ring {
    model: ModelSpec,
    sites: usize,
    /// Full-basis index (site 0 most significant) of every sector state.
    states: Vec<usize>,
    hj: Sparse,
    hg: Sparse,
}

impl Ring {
    pub fn new(model: &ModelSpec, sites: usize) -> Result<Self> {
        model.validate()?;
        if sites < 2 {
            return Err(Error::InvalidArgument(format!("ring needs at least two sites, got {sites}")));
        }
        if sites > max_sites(model.kind) {
            return Err(Error::Budget(format!("{} ring of {sites} sites exceeds {}", model.kind, max_sites(model.kind))));
        }
        let d = model.physical_dim();
        let q = model.q as usize;
        let labels = charge_table(model);
        let full = d.pow(sites as u32);
        let digits = |mut idx: usize| -> Vec<usize> {
            let mut out = vec![0; sites];
            for s in (0..sites).rev() {
                out[s] = idx % d;
                idx /= d;
            }
            out
        };
        let states: Vec<usize> =
            (0..full).filter(|&i| digits(i).iter().map(|&s| labels[s] as usize).sum::<usize>() % q == 0).collect();
        let lookup: HashMap<usize, usize> = states.iter().enumerate().map(|(a, &s)| (s, a)).collect();
        let build = |j: f64, g: f64| -> Sparse {
            let h = bond_hamiltonian::<f64>(&model.with_couplings(j, g));
            let mut rows = Vec::with_capacity(states.len());
            for &s in &states {
                let dg = digits(s);
                let mut acc: HashMap<usize, Complex64> = HashMap::new();
                for i in 0..sites {
                    let k = (i + 1) % sites;
                    for a in 0..d {
                        for b in 0..d {
                            let amp = h.get(&[a, b, dg[i], dg[k]]);
                            if amp.norm() == 0.0 {
                                continue;
                            }
                            let mut t = dg.clone();
                            t[i] = a;
                            t[k] = b;
                            let idx = t.iter().fold(0, |acc, &x| acc * d + x);
                            *acc.entry(lookup[&idx]).or_default() += amp;
                        }
                    }
                }
                let mut row: Vec<(usize, Complex64)> = acc.into_iter().filter(|(_, z)| z.norm() > 1e-15).collect();
                row.sort_by_key(|e| e.0);
                rows.push(row);
            }
            Sparse { rows }
        };
        let hj = build(1.0, 0.0);
        let hg = build(0.0, 1.0);
        Ok(Self { model: *model, sites, states, hj, hg })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    fn apply(&self, j: f64, g: f64, x: &Vector) -> Vector {
        self.hj.apply(x) * Complex64::new(j, 0.0) + self.hg.apply(x) * Complex64::new(g, 0.0)
    }

    pub fn energy(&self, j: f64, g: f64, x: &Vector) -> f64 {
        x.dotc(&self.apply(j, g, x)).re / x.norm_squared()
    }

    /// Product of single-site field ground states, the sweep's initial state.
    pub fn field_product_state(&self) -> Vector {
        let local = self.model.field_ground_state::<f64>();
        let d = self.model.physical_dim();
        Vector::from_iterator(
            self.dim(),
            self.states.iter().map(|&s| {
                let mut idx = s;
                let mut amp = Complex64::new(1.0, 0.0);
                for _ in 0..self.sites {
                    amp *= local[idx % d];
                    idx /= d;
                }
                amp
            }),
        )
    }

    /// Sector vector embedded in the full `d^N` basis.
    pub fn embed(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.model.physical_dim().pow(self.sites as u32));
        for (a, &s) in self.states.iter().enumerate() {
            out[s] = x[a];
        }
        out
    }

    /// Lowest eigenpair at couplings `(j, g)` by restarted Lanczos.
    pub fn ground_state(&self, j: f64, g: f64) -> Result<(f64, Vector)> {
        let n = self.dim();
        // Deterministic start with weight on every state.
        let mut x = Vector::from_iterator(n, (0..n).map(|i| Complex64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0)));
        x /= Complex64::new(x.norm(), 0.0);
        let krylov = n.min(120);
        for _ in 0..50 {
            let basis = self.lanczos_basis(j, g, &x, krylov);
            let t = tridiagonal(&basis.alpha, &basis.beta);
            let eig = SymmetricEigen::new(t);
            let low = (0..eig.eigenvalues.len()).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
            let mut y = Vector::zeros(n);
            for (c, v) in basis.vectors.iter().enumerate() {
                y += v * Complex64::new(eig.eigenvectors[(c, low)], 0.0);
            }
            y /= Complex64::new(y.norm(), 0.0);
            let e = eig.eigenvalues[low];
            let residual = (self.apply(j, g, &y) - &y * Complex64::new(e, 0.0)).norm();
            x = y;
            if residual < 1e-10 {
                return Ok((e, x));
            }
        }
        Err(Error::NotConverged(50))
    }

    fn lanczos_basis(&self, j: f64, g: f64, start: &Vector, m: usize) -> Lanczos {
        let mut vectors: Vec<Vector> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        loop {
            let v = vectors.last().unwrap();
            let mut w = self.apply(j, g, v);
            alpha.push(v.dotc(&w).re);
            // Full reorthogonalization, twice.
            for _ in 0..2 {
                for u in &vectors {
                    let c = u.dotc(&w);
                    w -= u * c;
                }
            }
            let b = w.norm();
            if vectors.len() == m || b < 1e-12 {
                return Lanczos { vectors, alpha, beta, last: b };
            }
            beta.push(b);
            vectors.push(w / Complex64::new(b, 0.0));
        }
    }

    /// `exp(-i H(j, g) dt) x` from a Krylov subspace grown until the
    /// truncation estimate falls below `1e-14`.
    pub fn propagate(&self, j: f64, g: f64, dt: f64, x: &Vector) -> Vector {
        let norm = x.norm();
        let start = x / Complex64::new(norm, 0.0);
        let cap = self.dim();
        let mut m = 12.min(cap);
        loop {
            let basis = self.lanczos_basis(j, g, &start, m);
            let k = basis.vectors.len();
            let t = tridiagonal(&basis.alpha, &basis.beta);
            let eig = SymmetricEigen::new(t);
            // c = exp(-i T dt) e_1
            let c: Vec<Complex64> = (0..k)
                .map(|r| {
                    (0..k)
                        .map(|s| {
                            eig.eigenvectors[(r, s)]
                                * eig.eigenvectors[(0, s)]
                                * Complex64::new(0.0, -eig.eigenvalues[s] * dt).exp()
                        })
                        .sum()
                })
                .collect();
            let error = basis.last * c[k - 1].norm();
            if error < 1e-14 || k < m || m >= cap {
                let mut y = Vector::zeros(self.dim());
                for (v, ci) in basis.vectors.iter().zip(&c) {
                    y += v * *ci;
                }
                return y * Complex64::new(norm, 0.0);
            }
            m = (2 * m).min(cap);
        }
    }
}

struct Lanczos {
    vectors: Vec<Vector>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last vector.
    last: f64,
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Exact Kibble-Zurek sweep of a small periodic ring.
///
/// The wavefunction is propagated with the same piecewise-constant
/// schedule as the MPS sweep: a uniform step `(1/v) / n` and couplings
/// sampled at step midpoints. The fidelity density is taken against the
/// sector ground state at `(J, g) = (1, 1)`. No excitation density is
/// defined for interacting rings, so `n_ex` is left empty.
pub fn ed_sweep(model: &ModelSpec, sites: usize, v: f64, dt: f64) -> Result<OracleResult> {
    if !(v > 0.0) || !v.is_finite() || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need v, dt > 0 (got v = {v}, dt = {dt})")));
    }
    let ring = Ring::new(model, sites)?;
    let n = step_count(v, dt);
    let h = (1.0 / v) / n as f64;
    let mut psi = ring.field_product_state();
    for step in 0..n {
        let t = -1.0 / v + (step as f64 + 0.5) * h;
        psi = ring.propagate(1.0 + v * t, 1.0 - v * t, h, &psi);
    }
    let (e0, gs) = ring.ground_state(1.0, 1.0)?;
    let nf = sites as f64;
    let overlap = gs.dotc(&psi).norm_sqr() / psi.norm_squared();
    let f = -overlap.ln() / nf;
    let eps_ex = (ring.energy(1.0, 1.0, &psi) - e0) / nf;
    Ok(OracleResult { v, k: vec![], p: vec![], n_ex: None, eps_ex, f, method: OracleMethod::ExactDiagonalization, dt: h, tol: 1e-14 })
}

/// Von Neumann entropy of the first `cut` sites of a full-basis state.
pub fn bipartite_entropy(x: &Vector, d: usize, sites: usize, cut: usize) -> f64 {
    let rows = d.pow(cut as u32);
    let cols = d.pow((sites - cut) as u32);
    let m = DMatrix::from_fn(rows, cols, |r, c| x[r * cols + c]);
    let norm = x.norm_squared();
    m.singular_values()
        .iter()
        .map(|s| s * s / norm)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{hermitian_exponential, Tensor};

    #[test]
    fn budget_enforced() {
        assert!(matches!(Ring::new(&ModelSpec::tfim(1.0, 1.0), 12), Err(Error::Budget(_))));
        assert!(matches!(Ring::new(&ModelSpec::potts3(1.0, 1.0), 9), Err(Error::Budget(_))));
    }

    #[test]
    fn sector_sizes() {
        assert_eq!(Ring::new(&ModelSpec::tfim(1.0, 1.0), 8).unwrap().dim(), 128);
        assert_eq!(Ring::new(&ModelSpec::potts3(1.0, 1.0), 4).unwrap().dim(), 27);
    }

    #[test]
    fn ground_state_matches_dense_diagonalization() {
        for model in [ModelSpec::tfim(1.0, 1.0), ModelSpec::potts3(1.0, 1.0)] {
            let ring = Ring::new(&model, 4).unwrap();
            let n = ring.dim();
            let dense = DMatrix::from_fn(n, n, |r, c| {
                let mut e = Vector::zeros(n);
                e[c] = Complex64::new(1.0, 0.0);
                ring.apply(0.7, 1.3, &e)[r]
            });
            let lowest = SymmetricEigen::new(dense).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            let (e, _) = ring.ground_state(0.7, 1.3).unwrap();
            assert!((e - lowest).abs() < 1e-10, "{e} vs {lowest}");
        }
    }

    #[test]
    fn krylov_step_matches_dense_exponential() {
        let ring = Ring::new(&ModelSpec::potts3(1.0, 1.0), 4).unwrap();
        let n = ring.dim();
        let dense = Tensor::<f64>::from_fn(vec![n, n], |i| {
            let mut e = Vector::zeros(n);
            e[i[1]] = Complex64::new(1.0, 0.0);
            ring.apply(0.4, 1.1, &e)[i[0]]
        });
        let u = hermitian_exponential(&dense, Complex64::new(0.0, -0.3)).unwrap();
        let x = ring.field_product_state();
        let y = ring.propagate(0.4, 1.1, 0.3, &x);
        for r in 0..n {
            let expect: Complex64 = (0..n).map(|c| u.get(&[r, c]) * x[c]).sum();
            assert!((expect - y[r]).norm() < 1e-12);
        }
    }

    /// Two-site ring written directly with Pauli matrices in the `sigma^z`
    /// basis: both bonds couple the same pair, so `H = -2J ZZ - g (XI + IX)`.
    fn two_site_dense(v: f64, dt: f64) -> (f64, f64) {
        let x = nalgebra::Matrix2::new(0.0, 1.0, 1.0, 0.0);
        let z = nalgebra::Matrix2::new(1.0, 0.0, 0.0, -1.0);
        let id = nalgebra::Matrix2::<f64>::identity();
        let zz = z.kronecker(&z);
        let xf = x.kronecker(&id) + id.kronecker(&x);
        let ham = |j: f64, g: f64| -> Tensor<f64> {
            let m = zz * (-2.0 * j) + xf * (-g);
            Tensor::from_fn(vec![4, 4], |i| Complex64::new(m[(i[0], i[1])], 0.0))
        };
        let n = step_count(v, dt);
        let h = (1.0 / v) / n as f64;
        let mut psi = DVector::from_element(4, Complex64::new(0.5, 0.0));
        for s in 0..n {
            let t = -1.0 / v + (s as f64 + 0.5) * h;
            let u = hermitian_exponential(&ham(1.0 + v * t, 1.0 - v * t), Complex64::new(0.0, -h)).unwrap();
            psi = DMatrix::from_fn(4, 4, |r, c| u.get(&[r, c])) * psi;
        }
        let hm = ham(1.0, 1.0).to_matrix(1);
        let eig = SymmetricEigen::new(hm.clone());
        let low = (0..4).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let gs = eig.eigenvectors.column(low).into_owned();
        let f = -gs.dotc(&psi).norm_sqr().ln() / 2.0;
        let e = psi.dotc(&(&hm * &psi)).re;
        (f, (e - eig.eigenvalues[low]) / 2.0)
    }

    #[test]
    fn two_site_ring_against_refined_dense_propagator() {
        for &v in &[0.5, 2.0] {
            let r = ed_sweep(&ModelSpec::tfim(1.0, 1.0), 2, v, 5e-5).unwrap();
            let (f, e) = two_site_dense(v, 5e-6);
            assert!((r.f - f).abs() < 1e-8, "v {v}: f {} vs {f}", r.f);
            assert!((r.eps_ex - e).abs() < 1e-8, "v {v}: eps {} vs {e}", r.eps_ex);
        }
    }

    #[test]
    fn sudden_limit_is_static_overlap() {
        let model = ModelSpec::tfim(1.0, 1.0);
        let ring = Ring::new(&model, 8).unwrap();
        let (_, gs) = ring.ground_state(1.0, 1.0).unwrap();
        let x = ring.field_product_state();
        let f_static = -gs.dotc(&x).norm_sqr().ln() / 8.0;
        let r = ed_sweep(&model, 8, 1000.0, 1e-5).unwrap();
        assert!((r.f - f_static).abs() <= 0.01 * f_static);
    }

    #[test]
    fn entropy_of_product_and_bell_states() {
        let mut x = Vector::zeros(4);
        x[0] = Complex64::new(1.0, 0.0);
        assert!(bipartite_entropy(&x, 2, 2, 1).abs() < 1e-14);
        x[3] = Complex64::new(1.0, 0.0);
        assert!((bipartite_entropy(&x, 2, 2, 1) - 2f64.ln()).abs() < 1e-14);
    }
}
