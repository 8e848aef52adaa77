use kzmps::tensor::{contract, dominant_eigenvalue, hermitian_exponential, svd_truncate};
use kzmps::{Charges, Tensor, Tensor32, Tensor64, Truncation};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: Vec<usize>, seed: u64) -> Tensor64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_hermitian(n: usize, seed: u64) -> Tensor64 {
    let a = random(vec![n, n], seed).to_matrix(1);
    Tensor::from_matrix(&((&a + a.adjoint()) * Complex64::new(0.5, 0.0)))
}

#[test]
fn contraction_matches_nested_loops() {
    let a = random(vec![3, 4, 2], 1);
    let b = random(vec![2, 4, 3], 2);
    // a legs (1, 2) against b legs (1, 0): result (i, l) = sum_jk a[i,j,k] b[k,j,l]
    let c = contract(&a, &b, &[(1, 1), (2, 0)]).unwrap();
    assert_eq!(c.shape(), &[3, 3]);
    for i in 0..3 {
        for l in 0..3 {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..4 {
                for k in 0..2 {
                    s += a.get(&[i, j, k]) * b.get(&[k, j, l]);
                }
            }
            assert!((c.get(&[i, l]) - s).norm() < 1e-13);
        }
    }
}

#[test]
fn single_precision_contraction() {
    let a: Tensor32 = random(vec![3, 5], 3).cast();
    let b: Tensor32 = random(vec![5, 2], 4).cast();
    let c = contract(&a, &b, &[(1, 0)]).unwrap();
    let exact = contract(&random(vec![3, 5], 3), &random(vec![5, 2], 4), &[(1, 0)]).unwrap();
    assert!(c.cast::<f64>().max_abs_diff(&exact) < 1e-5);
}

/// Materialized mixed transfer matrix of one random site pair.
fn transfer_matrix(chi: usize, d: usize, seed: u64) -> DMatrix<Complex64> {
    let a = random(vec![chi, d, chi], seed);
    let b = random(vec![chi, d, chi], seed + 1);
    DMatrix::from_fn(chi * chi, chi * chi, |r, c| {
        let (i, j) = (r / chi, r % chi);
        let (k, l) = (c / chi, c % chi);
        (0..d).map(|s| a.get(&[i, s, k]) * b.get(&[j, s, l]).conj()).sum()
    })
}

#[test]
fn dominant_eigenvalue_of_transfer_maps() {
    for (chi, seed) in [(2, 10), (3, 20), (5, 30), (8, 40)] {
        let t = transfer_matrix(chi, 2, seed);
        let dense = t.clone().eigenvalues();
        // complex eigenvalues: fall back to Schur of the complex matrix
        let top = match dense {
            Some(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
            None => t.clone().schur().eigenvalues().unwrap().iter().map(|z| z.norm()).fold(0.0, f64::max),
        };
        let n = chi * chi;
        let got = dominant_eigenvalue::<f64, _>(
            |x| {
                let v = DMatrix::from_column_slice(n, 1, x);
                (&t * v).as_slice().to_vec()
            },
            n,
            1e-12,
            1000,
        )
        .unwrap();
        assert!((got.value.norm() - top).abs() <= 1e-8 * top, "chi {chi}: {} vs {top}", got.value.norm());
    }
}

#[test]
fn truncation_is_frobenius_optimal() {
    // The truncated reconstruction error equals the discarded weight, which
    // is the Eckart-Young bound from the full dense spectrum.
    let t = random(vec![8, 8], 5);
    let dense = t.to_matrix(1).singular_values();
    let mut s: Vec<f64> = dense.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let out = svd_truncate(&t, 1, Truncation::new(4, 0.0)).unwrap();
    let k = out.s.len();
    let diag = Tensor::from_fn(vec![k, k], |i| if i[0] == i[1] { Complex64::new(out.s.values[i[0]] * out.kept_norm, 0.0) } else { Complex64::new(0.0, 0.0) });
    let approx = contract(&contract(&out.u, &diag, &[(1, 0)]).unwrap(), &out.v, &[(1, 0)]).unwrap();
    let err: f64 = t.data().iter().zip(approx.data()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let bound: f64 = s[k..].iter().map(|x| x * x).sum();
    assert!((err - bound).abs() < 1e-10, "{err} vs {bound}");
    assert!((out.s.discarded_weight - bound).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn contraction_is_bilinear(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let alpha = Complex64::new(re, im);
        let a = random(vec![2, 3, 4], seed);
        let b = random(vec![4, 3], seed ^ 0x9e37);
        let lhs = contract(&a.scale(alpha), &b, &[(2, 0)]).unwrap();
        let rhs = contract(&a, &b, &[(2, 0)]).unwrap().scale(alpha);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn untruncated_svd_reconstructs(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6) {
        let t = random(vec![rows, cols], seed);
        let out = svd_truncate(&t, 1, Truncation::new(64, 0.0)).unwrap();
        let k = out.s.len();
        let diag = Tensor::from_fn(vec![k, k], |i| if i[0] == i[1] { Complex64::new(out.s.values[i[0]] * out.kept_norm, 0.0) } else { Complex64::new(0.0, 0.0) });
        let back = contract(&contract(&out.u, &diag, &[(1, 0)]).unwrap(), &out.v, &[(1, 0)]).unwrap();
        prop_assert!(back.max_abs_diff(&t) < 1e-10);
        let norm: f64 = out.s.values.iter().map(|x| x * x).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        prop_assert!(out.s.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn charged_svd_blocks_stay_covariant(seed in any::<u64>(), chi in 1usize..9) {
        let legs = vec![vec![0, 1, 0], vec![0, 1], vec![0, 1], vec![0, 1, 1]];
        let mut t = random(vec![3, 2, 2, 3], seed).with_charges(Charges::new(2, legs).unwrap()).unwrap();
        t.project_covariant();
        let out = svd_truncate(&t, 2, Truncation::new(chi, 0.0)).unwrap();
        prop_assert!(out.u.is_covariant());
        prop_assert!(out.v.is_covariant());
        prop_assert_eq!(out.u.covariance_violation(), 0.0);
    }

    #[test]
    fn exponential_inverse(seed in any::<u64>(), n in 1usize..7, delta in 0.0f64..2.0) {
        let h = random_hermitian(n, seed);
        let fwd = hermitian_exponential(&h, Complex64::new(0.0, -delta)).unwrap();
        let bwd = hermitian_exponential(&h, Complex64::new(0.0, delta)).unwrap();
        let id = contract(&fwd, &bwd, &[(1, 0)]).unwrap();
        prop_assert!(id.max_abs_diff(&Tensor::identity(n)) < 1e-10);
    }
}
