use kzmps::models::{bond_hamiltonian, bond_hamiltonian_raw, charge_table, trotter_gates, Direction, Parity};
use kzmps::tensor::hermitian_exponential;
use kzmps::{ModelSpec, Tensor64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SITES: usize = 4;

fn sorted_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Apply a two-site operator with legs (out1, out2, in1, in2) to sites
/// `(i, j)` of a ring wavefunction stored with site 0 most significant.
fn apply_pair(psi: &DVector<Complex64>, op: &Tensor64, i: usize, j: usize, d: usize) -> DVector<Complex64> {
    let dim = psi.len();
    let stride = |s: usize| d.pow((SITES - 1 - s) as u32);
    let digit = |x: usize, s: usize| (x / stride(s)) % d;
    DVector::from_fn(dim, |x, _| {
        let (a, b) = (digit(x, i), digit(x, j));
        let base = x - a * stride(i) - b * stride(j);
        let mut s = Complex64::new(0.0, 0.0);
        for c in 0..d {
            for e in 0..d {
                s += op.get(&[a, b, c, e]) * psi[base + c * stride(i) + e * stride(j)];
            }
        }
        s
    })
}

fn ring_hamiltonian(model: &ModelSpec) -> DMatrix<Complex64> {
    let d = model.physical_dim();
    let dim = d.pow(SITES as u32);
    let h = bond_hamiltonian::<f64>(model);
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let e = DVector::from_fn(dim, |x, _| Complex64::new(if x == col { 1.0 } else { 0.0 }, 0.0));
        let mut out = DVector::zeros(dim);
        for b in 0..SITES {
            out += apply_pair(&e, &h, b, (b + 1) % SITES, d);
        }
        m.set_column(col, &out);
    }
    m
}

fn trotter_step(model: &ModelSpec, dt: f64, order: u8, psi: &DVector<Complex64>) -> DVector<Complex64> {
    let d = model.physical_dim();
    let seq = trotter_gates::<f64>(model, dt, order, Direction::RealTime).unwrap();
    let mut x = psi.clone();
    for (parity, gate) in &seq.layers {
        let bonds: &[(usize, usize)] = match parity {
            Parity::Even => &[(0, 1), (2, 3)],
            Parity::Odd => &[(1, 2), (3, 0)],
        };
        for &(i, j) in bonds {
            x = apply_pair(&x, gate, i, j, d);
        }
    }
    x
}

fn local_error_slope(model: &ModelSpec, order: u8) -> f64 {
    let d = model.physical_dim();
    let dim = d.pow(SITES as u32);
    let h = Tensor64::from_matrix(&ring_hamiltonian(model));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let psi = DVector::from_fn(dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let psi = &psi / Complex64::new(psi.norm(), 0.0);
    let dts = [0.1, 0.05, 0.025];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let u = hermitian_exponential(&h, Complex64::new(0.0, -dt)).unwrap().to_matrix(1);
            (trotter_step(model, dt, order, &psi) - u * &psi).norm()
        })
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = dts.iter().zip(&errs).map(|(t, e)| (t.ln(), e.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / 3.0;
    let my = ly.iter().sum::<f64>() / 3.0;
    lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

#[test]
fn second_order_local_error_is_cubic() {
    for model in [ModelSpec::tfim(1.0, 0.7), ModelSpec::potts3(0.8, 1.1)] {
        let slope = local_error_slope(&model, 2);
        assert!((slope - 3.0).abs() <= 0.2, "{}: slope {slope}", model.kind);
    }
}

#[test]
fn fourth_order_local_error_is_quintic() {
    for model in [ModelSpec::tfim(1.0, 0.7), ModelSpec::potts3(0.8, 1.1)] {
        let slope = local_error_slope(&model, 4);
        assert!((slope - 5.0).abs() <= 0.3, "{}: slope {slope}", model.kind);
    }
}

#[test]
fn spectrum_is_basis_independent() {
    for model in [ModelSpec::tfim(1.0, 0.6), ModelSpec::potts3(1.0, 1.0), ModelSpec::potts3(0.3, 2.0)] {
        let a = sorted_eigenvalues(bond_hamiltonian::<f64>(&model).to_matrix(2));
        let b = sorted_eigenvalues(bond_hamiltonian_raw::<f64>(&model).to_matrix(2));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn bond_hamiltonian_conserves_charge() {
    for model in [ModelSpec::tfim(1.3, 0.4), ModelSpec::potts3(0.9, 1.7)] {
        let d = model.physical_dim();
        let q = model.q;
        let labels = charge_table(&model);
        let h = bond_hamiltonian::<f64>(&model).without_charges();
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        if (labels[a] + labels[b]) % q != (labels[c] + labels[e]) % q {
                            assert_eq!(h.get(&[a, b, c, e]).norm(), 0.0);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn coupling_exchange_preserves_second_moment() {
    // Tr H^2 = dim * sites * (J^2 + g^2) on the ring, symmetric under J <-> g.
    let sum = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
    let a = sum(sorted_eigenvalues(ring_hamiltonian(&ModelSpec::tfim(1.2, 0.5))));
    let b = sum(sorted_eigenvalues(ring_hamiltonian(&ModelSpec::tfim(0.5, 1.2))));
    assert!((a - b).abs() < 1e-9);
    assert!((a - 16.0 * 4.0 * (1.44 + 0.25)).abs() < 1e-9);
}
