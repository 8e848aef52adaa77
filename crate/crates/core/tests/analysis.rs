use kzmps::analysis::{
    collapse_fit, extrapolate_chi_infinity, fit_power_law, xi_kz, CollapseDataset, CollapseOptions, CollapseRow, Observable, PowerLawProxy,
};
use proptest::prelude::*;

/// `O = v^(1/2) exp(-alpha xi_KZ / chi^2)` with TFIM exponents.
fn synthetic(alpha: f64) -> CollapseDataset {
    let vs: Vec<f64> = (0..16).map(|i| 0.005 * 200f64.powf(i as f64 / 15.0)).collect();
    let rows = [8usize, 16, 32]
        .iter()
        .flat_map(|&chi| vs.iter().map(move |&v| CollapseRow { chi, v, value: v.sqrt() * (-alpha * xi_kz(v, 1.0, 1.0) / (chi * chi) as f64).exp() }))
        .collect();
    CollapseDataset { observable: Observable::F, rows, nu: 1.0, z: 1.0, c: 0.5 }
}

fn fit(data: &CollapseDataset) -> (PowerLawProxy, kzmps::analysis::ScalingFit) {
    let proxy = PowerLawProxy::fit(data).unwrap();
    let fit = collapse_fit(data, &|v| proxy.value(v), CollapseOptions::default()).unwrap();
    (proxy, fit)
}

#[test]
fn kappa_is_invariant_under_kz_length_prefactor() {
    for alpha in [0.5, 1.0, 3.0] {
        let (_, f) = fit(&synthetic(alpha));
        assert!((f.kappa_hat - 2.0).abs() <= 0.02, "alpha {alpha}: {}", f.kappa_hat);
        assert!(f.cost_curve.iter().all(|(_, c)| c.is_finite() && *c >= 0.0));
    }
}

#[test]
fn extrapolation_recovers_the_infinite_chi_law() {
    let data = synthetic(1.0);
    let (proxy, f) = fit(&data);
    let rows = extrapolate_chi_infinity(&data, f.kappa_hat, &|v| proxy.value(v)).unwrap();
    for r in &rows {
        let exact = r.v.sqrt();
        assert!((r.value - exact).abs() <= 0.01 * exact, "chi {} v {}: {} vs {exact}", r.chi, r.v, r.value);
    }
}

#[test]
fn extrapolation_inverts_the_reference_curve() {
    let data = synthetic(1.0);
    let (proxy, f) = fit(&data);
    let rows = extrapolate_chi_infinity(&data, f.kappa_hat, &|v| proxy.value(v)).unwrap();
    for (r, orig) in rows.iter().zip(data.chis().iter().flat_map(|&c| data.curve(c))) {
        let x = xi_kz(r.v, 1.0, 1.0) / (r.chi as f64).powf(f.kappa_hat);
        let fbar = f
            .reference_curve
            .iter()
            .min_by(|a, b| (a.0 / x).ln().abs().total_cmp(&(b.0 / x).ln().abs()))
            .unwrap()
            .1;
        assert!((r.value * fbar - orig.value).abs() <= 1e-12 * orig.value);
    }
}

proptest! {
    #[test]
    fn power_law_fit_is_scale_covariant(alpha in 0.01f64..100.0, b in -2.0f64..2.0, a in 0.1f64..10.0) {
        let pts: Vec<(f64, f64)> = (1..8).map(|i| {
            let v = 0.1 * i as f64;
            (v, a * v.powf(b) * (1.0 + 0.05 * (3.0 * v).sin()))
        }).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(v, y)| (v, alpha * y)).collect();
        let p = fit_power_law(&pts).unwrap();
        let q = fit_power_law(&scaled).unwrap();
        prop_assert!((p.exponent - q.exponent).abs() < 1e-10);
        prop_assert!((q.prefactor / p.prefactor - alpha).abs() < 1e-9 * alpha);
    }
}
