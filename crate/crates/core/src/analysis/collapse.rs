//! Data collapse `O(v, chi) / O(v, inf) = F(xi_KZ / chi^kappa)`.
//!
//! Each bond dimension contributes a curve `y_chi(x)` with
//! `x = xi_KZ(v) / chi^kappa`. Curves are interpolated piecewise linearly
//! in `(log x, log y)`; the cost of a trial `kappa` is the sum over curve
//! pairs of the mean squared difference on a uniform log grid spanning
//! their overlap.

use super::{xi_kz, CollapseDataset, CollapseRow};
use crate::error::{Error, Result};

/// `O(v, inf) ~ prefactor * v^exponent` with the exponent fixed by the
/// critical data and the prefactor fitted on the fast half of the
/// largest-chi curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawProxy {
    pub prefactor: f64,
    pub exponent: f64,
}

impl PowerLawProxy {
    pub fn fit(data: &CollapseDataset) -> Result<Self> {
        let exponent = data.observable.kz_exponent(data.nu, data.z);
        let chi = *data.chis().last().ok_or_else(|| Error::Precondition("empty dataset".into()))?;
        let curve = data.curve(chi);
        let fast = &curve[curve.len() / 2..];
        if fast.is_empty() {
            return Err(Error::Precondition("largest-chi curve is empty".into()));
        }
        let log_a = fast.iter().map(|r| r.value.ln() - exponent * r.v.ln()).sum::<f64>() / fast.len() as f64;
        Ok(Self { prefactor: log_a.exp(), exponent })
    }

    pub fn value(&self, v: f64) -> f64 {
        self.prefactor * v.powf(self.exponent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseOptions {
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub kappa_step: f64,
    /// Golden-section stopping width.
    pub refine_tol: f64,
    /// Points of the comparison grid on each pair overlap.
    pub overlap_points: usize,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self { kappa_lo: 1.0, kappa_hi: 3.0, kappa_step: 0.01, refine_tol: 1e-4, overlap_points: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapsePoint {
    pub chi: usize,
    pub v: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub kappa_hat: f64,
    /// `(kappa, cost)` on the scan grid.
    pub cost_curve: Vec<(f64, f64)>,
    /// Averaged collapsed curve `(x, y)` at `kappa_hat`.
    pub reference_curve: Vec<(f64, f64)>,
    pub chi_infinity_estimates: Vec<CollapseRow>,
    /// Cost vanishes identically over the scan.
    pub degenerate: bool,
    /// Curve pairs without overlap at `kappa_hat`.
    pub empty_pairs: usize,
}

/// One curve as `(log x, log y)` sorted by `log x`.
struct Curve {
    chi: usize,
    pts: Vec<(f64, f64)>,
}

impl Curve {
    fn range(&self) -> (f64, f64) {
        (self.pts[0].0, self.pts[self.pts.len() - 1].0)
    }

    /// Interpolated `y` (not its log) at `lx`, if inside the range.
    fn at(&self, lx: f64) -> Option<f64> {
        let (lo, hi) = self.range();
        if lx < lo || lx > hi {
            return None;
        }
        let i = self.pts.partition_point(|p| p.0 < lx);
        if i == 0 {
            return Some(self.pts[0].1.exp());
        }
        let (a, b) = (self.pts[i - 1], self.pts[i.min(self.pts.len() - 1)]);
        if b.0 == a.0 {
            return Some(a.1.exp());
        }
        let w = (lx - a.0) / (b.0 - a.0);
        Some((a.1 + w * (b.1 - a.1)).exp())
    }
}

fn build_curves(data: &CollapseDataset, proxy: &dyn Fn(f64) -> f64, kappa: f64) -> Vec<Curve> {
    data.chis()
        .into_iter()
        .map(|chi| {
            let mut pts: Vec<(f64, f64)> = data
                .curve(chi)
                .iter()
                .map(|r| {
                    let x = xi_kz(r.v, data.nu, data.z).ln() - kappa * (chi as f64).ln();
                    (x, (r.value / proxy(r.v)).ln())
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Curve { chi, pts }
        })
        .filter(|c| !c.pts.is_empty())
        .collect()
}

/// Uniform grid of `n` points on the overlap of two curves.
fn overlap_grid(a: &Curve, b: &Curve, n: usize) -> Option<Vec<f64>> {
    let (alo, ahi) = a.range();
    let (blo, bhi) = b.range();
    let (lo, hi) = (alo.max(blo), ahi.min(bhi));
    if !(hi > lo) {
        return None;
    }
    let n = n.max(2);
    Some((0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).clamp(lo, hi)).collect())
}

/// Cost of one `kappa` and the number of pairs without overlap.
fn cost(curves: &[Curve], n: usize) -> (f64, usize) {
    let mut total = 0.0;
    let mut empty = 0;
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            match overlap_grid(&curves[i], &curves[j], n) {
                Some(grid) => {
                    let msd = grid
                        .iter()
                        .map(|&lx| {
                            let d = curves[i].at(lx).unwrap_or(0.0) - curves[j].at(lx).unwrap_or(0.0);
                            d * d
                        })
                        .sum::<f64>()
                        / grid.len() as f64;
                    total += msd;
                }
                None => empty += 1,
            }
        }
    }
    (total, empty)
}

/// Collapsed points `(x, y)` of every row at `kappa`.
pub fn collapse_points(data: &CollapseDataset, proxy: &dyn Fn(f64) -> f64, kappa: f64) -> Vec<CollapsePoint> {
    let mut out = Vec::with_capacity(data.rows.len());
    for chi in data.chis() {
        for r in data.curve(chi) {
            out.push(CollapsePoint {
                chi,
                v: r.v,
                x: xi_kz(r.v, data.nu, data.z) / (chi as f64).powf(kappa),
                y: r.value / proxy(r.v),
            });
        }
    }
    out
}

/// Best-fit `kappa` by grid scan plus golden-section refinement.
pub fn collapse_fit(data: &CollapseDataset, proxy: &dyn Fn(f64) -> f64, opts: CollapseOptions) -> Result<ScalingFit> {
    data.validate()?;
    if !(opts.kappa_step > 0.0) || !(opts.kappa_hi > opts.kappa_lo) {
        return Err(Error::InvalidArgument("kappa scan needs lo < hi and a positive step".into()));
    }
    let count = ((opts.kappa_hi - opts.kappa_lo) / opts.kappa_step + 1e-9).floor() as usize + 1;
    if count < 10 {
        return Err(Error::InvalidArgument(format!("kappa scan has {count} points, at least 10 are needed")));
    }
    let n = opts.overlap_points;
    let eval = |k: f64| cost(&build_curves(data, proxy, k), n);
    let scan: Vec<(f64, f64, usize)> = (0..count)
        .map(|i| {
            let k = opts.kappa_lo + i as f64 * opts.kappa_step;
            let (c, e) = eval(k);
            (k, c, e)
        })
        .collect();
    let pairs = {
        let m = data.chis().len();
        m * (m - 1) / 2
    };
    if scan.iter().all(|s| s.2 == pairs) {
        return Err(Error::FitImpossible("no pair of curves overlaps anywhere in the kappa scan; widen the v grid".into()));
    }
    let degenerate = scan.iter().all(|s| s.1 <= 1e-24);
    let best = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let mut kappa_hat = scan[best].0;
    if !degenerate {
        let lo = scan[best.saturating_sub(1)].0;
        let hi = scan[(best + 1).min(count - 1)].0;
        let refined = golden_section(|k| eval(k).0, lo, hi, opts.refine_tol);
        if eval(refined).0 <= scan[best].1 {
            kappa_hat = refined;
        }
    }
    let estimates = extrapolate_chi_infinity(data, kappa_hat, proxy)?;
    let curves = build_curves(data, proxy, kappa_hat);
    Ok(ScalingFit {
        kappa_hat,
        cost_curve: scan.iter().map(|s| (s.0, s.1)).collect(),
        reference_curve: mean_curve(&curves),
        chi_infinity_estimates: estimates,
        degenerate,
        empty_pairs: cost(&curves, n).1,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Pointwise average of all curves defined at `lx`.
fn mean_at(curves: &[Curve], lx: f64) -> Option<f64> {
    let vals: Vec<f64> = curves.iter().filter_map(|c| c.at(lx)).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Averaged curve on the union of all curves' abscissae.
fn mean_curve(curves: &[Curve]) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = curves.iter().flat_map(|c| c.pts.iter().map(|p| p.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter().filter_map(|lx| mean_at(curves, lx).map(|y| (lx.exp(), y))).collect()
}

/// `O(v, chi) / fbar(x_kappa)`, where `fbar` averages the collapsed curves
/// of all bond dimensions defined at that `x`.
pub fn extrapolate_chi_infinity(data: &CollapseDataset, kappa: f64, proxy: &dyn Fn(f64) -> f64) -> Result<Vec<CollapseRow>> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    let curves = build_curves(data, proxy, kappa);
    let mut out = Vec::with_capacity(data.rows.len());
    for chi in data.chis() {
        for r in data.curve(chi) {
            let lx = xi_kz(r.v, data.nu, data.z).ln() - kappa * (chi as f64).ln();
            let fbar = mean_at(&curves, lx).ok_or_else(|| Error::Precondition(format!("x = {} lies outside every curve", lx.exp())))?;
            out.push(CollapseRow { chi, v: r.v, value: r.value / fbar });
        }
    }
    Ok(out)
}

/// Relative RMS difference `(y_a - y_b) / mean(y_a, y_b)` of every pair of
/// collapsed curves on their overlap; `None` for disjoint pairs.
pub fn pairwise_relative_rms(
    data: &CollapseDataset,
    proxy: &dyn Fn(f64) -> f64,
    kappa: f64,
    points: usize,
) -> Vec<(usize, usize, Option<f64>)> {
    let curves = build_curves(data, proxy, kappa);
    let mut out = Vec::new();
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            let rms = overlap_grid(&curves[i], &curves[j], points).map(|grid| {
                let s = grid
                    .iter()
                    .map(|&lx| {
                        let (a, b) = (curves[i].at(lx).unwrap_or(0.0), curves[j].at(lx).unwrap_or(0.0));
                        let d = 2.0 * (a - b) / (a + b);
                        d * d
                    })
                    .sum::<f64>();
                (s / grid.len() as f64).sqrt()
            });
            out.push((curves[i].chi, curves[j].chi, rms));
        }
    }
    out
}
