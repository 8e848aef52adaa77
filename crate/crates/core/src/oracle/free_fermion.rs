use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{simpson, OracleMethod, OracleResult};
use crate::error::{Error, Result};
use crate::evolution::step_count;

/// Momenta at which the Bogoliubov modes are integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeSet {
    /// Thermodynamic limit: Simpson quadrature over `[0, pi]` with grid
    /// doubling until the densities are stable.
    Continuum,
    /// Ring of `N` sites (even) in the even-parity sector,
    /// `k = pi (2m + 1) / N` for `m = 0 .. N/2`.
    FiniteN(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeFermionOptions {
    pub dt: f64,
    /// Self-convergence and quadrature-stability tolerance.
    pub tol: f64,
    /// Initial quadrature points (odd).
    pub base_points: usize,
    /// Refinement gives up beyond this many points.
    pub max_points: usize,
    /// Modes re-integrated at `dt / 2` for the self-convergence check.
    pub check_modes: usize,
}

impl Default for FreeFermionOptions {
    fn default() -> Self {
        Self { dt: 1e-3, tol: 1e-8, base_points: 2001, max_points: 64001, check_modes: 101 }
    }
}

/// Quasiparticle energy at the final couplings `(J, g) = (1, 1)`.
fn final_dispersion(k: f64) -> f64 {
    let a = 1.0 - k.cos();
    let b = k.sin();
    2.0 * (a * a + b * b).sqrt()
}

/// Probability that the pair `(k, -k)` is excited at the end of the sweep.
///
/// The mode Hamiltonian `h_k(t) = 2[(g - J cos k) s_z + J sin k s_x]` is
/// linear in `t`, and each step applies the fourth-order Magnus
/// propagator built on the two Gauss points, exponentiated exactly as an
/// SU(2) rotation. The mode starts in the `s_z = -1` ground state of
/// `(J, g) = (0, 2)`.
pub fn mode_excitation(k: f64, v: f64, dt: f64) -> f64 {
    if k == 0.0 {
        // The gap at k -> 0 closes only at t = 0, so this mode is sudden
        // and ends in an equal superposition of the final eigenstates.
        return 0.5;
    }
    let n = step_count(v, dt);
    let h = (1.0 / v) / n as f64;
    let (ck, sk) = (k.cos(), k.sin());
    let r3 = 3f64.sqrt() / 6.0;
    let coeffs = |t: f64| {
        let (j, g) = (1.0 + v * t, 1.0 - v * t);
        (2.0 * (g - j * ck), 2.0 * j * sk)
    };
    let mut p0 = Complex64::new(0.0, 0.0);
    let mut p1 = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    for step in 0..n {
        let t0 = -1.0 / v + step as f64 * h;
        let (a1, b1) = coeffs(t0 + (0.5 - r3) * h);
        let (a2, b2) = coeffs(t0 + (0.5 + r3) * h);
        let nx = 0.5 * h * (b1 + b2);
        let nz = 0.5 * h * (a1 + a2);
        let ny = -r3 * h * h * (a1 * b2 - a2 * b1);
        let r = (nx * nx + ny * ny + nz * nz).sqrt();
        let (c, s) = if r > 0.0 { (r.cos(), r.sin() / r) } else { (1.0, 1.0) };
        // exp(-i n.sigma) = cos|n| - i sin|n| n.sigma / |n|
        let q0 = c * p0 - i * s * (nz * p0 + Complex64::new(nx, -ny) * p1);
        let q1 = c * p1 - i * s * (Complex64::new(nx, ny) * p0 - nz * p1);
        p0 = q0;
        p1 = q1;
    }
    // Upper eigenvector of a s_z + b s_x is (cos th/2, sin th/2), th = atan2(b, a).
    let th = (2.0 * sk).atan2(2.0 * (1.0 - ck));
    (p0 * (th / 2.0).cos() + p1 * (th / 2.0).sin()).norm_sqr()
}

fn excitations(ks: &[f64], v: f64, dt: f64) -> Vec<f64> {
    ks.par_iter().map(|&k| mode_excitation(k, v, dt)).collect()
}

fn check_probabilities(ks: &[f64], p: &mut [f64]) -> Result<()> {
    for (k, x) in ks.iter().zip(p.iter_mut()) {
        if !(*x >= -1e-10 && *x <= 1.0 + 1e-10) {
            return Err(Error::Integrator(format!("excitation probability {x} at k = {k} is outside [0, 1]")));
        }
        *x = x.clamp(0.0, 1.0);
    }
    Ok(())
}

fn self_convergence(ks: &[f64], p: &[f64], v: f64, opts: &FreeFermionOptions) -> Result<()> {
    let stride = (ks.len() / opts.check_modes.max(1)).max(1);
    let idx: Vec<usize> = (0..ks.len()).step_by(stride).collect();
    let worst = idx
        .par_iter()
        .map(|&i| (mode_excitation(ks[i], v, opts.dt / 2.0) - p[i]).abs())
        .reduce(|| 0.0, f64::max);
    if worst > opts.tol {
        return Err(Error::Integrator(format!(
            "mode integration at dt = {} differs from dt / 2 by {worst:e} (tolerance {:e})",
            opts.dt, opts.tol
        )));
    }
    Ok(())
}

/// Densities `(n_ex, eps_ex, f)` from excitation probabilities on a
/// uniform grid over `[0, pi]`.
fn continuum_densities(ks: &[f64], p: &[f64]) -> Result<(f64, f64, f64)> {
    let h = PI / (ks.len() - 1) as f64;
    let n = simpson(p, h)? / PI;
    let e: Vec<f64> = ks.iter().zip(p).map(|(&k, &x)| final_dispersion(k) * x).collect();
    let l: Vec<f64> = p.iter().map(|&x| -(1.0 - x).ln()).collect();
    Ok((n, simpson(&e, h)? / PI, simpson(&l, h)? / (2.0 * PI)))
}

/// Exact Kibble-Zurek sweep of the Ising chain mapped to free fermions.
pub fn free_fermion_sweep(v: f64, dt: f64, modes: ModeSet) -> Result<OracleResult> {
    free_fermion_sweep_with(v, modes, &FreeFermionOptions { dt, ..Default::default() })
}

pub fn free_fermion_sweep_with(v: f64, modes: ModeSet, opts: &FreeFermionOptions) -> Result<OracleResult> {
    if !(v > 0.0) || !v.is_finite() || !(opts.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need v, dt > 0 (got v = {v}, dt = {})", opts.dt)));
    }
    match modes {
        ModeSet::FiniteN(sites) => {
            if sites < 2 || sites % 2 != 0 {
                return Err(Error::InvalidArgument(format!("ring length must be even and positive, got {sites}")));
            }
            let ks: Vec<f64> = (0..sites / 2).map(|m| PI * (2 * m + 1) as f64 / sites as f64).collect();
            let mut p = excitations(&ks, v, opts.dt);
            check_probabilities(&ks, &mut p)?;
            self_convergence(&ks, &p, v, opts)?;
            let nf = sites as f64;
            let n_ex = p.iter().map(|x| 2.0 * x).sum::<f64>() / nf;
            let eps_ex = ks.iter().zip(&p).map(|(&k, &x)| 2.0 * final_dispersion(k) * x).sum::<f64>() / nf;
            let f = -p.iter().map(|x| (1.0 - x).ln()).sum::<f64>() / nf;
            Ok(OracleResult { v, k: ks, p, n_ex: Some(n_ex), eps_ex, f, method: OracleMethod::FreeFermion, dt: opts.dt, tol: opts.tol })
        }
        ModeSet::Continuum => {
            if opts.base_points < 3 || opts.base_points % 2 == 0 {
                return Err(Error::InvalidArgument(format!("quadrature needs an odd point count, got {}", opts.base_points)));
            }
            let grid = |m: usize| -> Vec<f64> { (0..m).map(|i| PI * i as f64 / (m - 1) as f64).collect() };
            let mut ks = grid(opts.base_points);
            let mut p = excitations(&ks, v, opts.dt);
            check_probabilities(&ks, &mut p)?;
            self_convergence(&ks, &p, v, opts)?;
            let mut dens = continuum_densities(&ks, &p)?;
            loop {
                let m = 2 * ks.len() - 1;
                if m > opts.max_points {
                    return Err(Error::Integrator(format!("quadrature not stable to {:e} with {} points", opts.tol, ks.len())));
                }
                let fine = grid(m);
                let mids: Vec<f64> = fine.iter().skip(1).step_by(2).copied().collect();
                let mut pm = excitations(&mids, v, opts.dt);
                check_probabilities(&mids, &mut pm)?;
                let mut pf = Vec::with_capacity(m);
                for (i, x) in p.iter().enumerate() {
                    pf.push(*x);
                    if i < pm.len() {
                        pf.push(pm[i]);
                    }
                }
                let next = continuum_densities(&fine, &pf)?;
                let change = (next.0 - dens.0).abs().max((next.1 - dens.1).abs()).max((next.2 - dens.2).abs());
                ks = fine;
                p = pf;
                dens = next;
                if change <= opts.tol {
                    break;
                }
            }
            let (n_ex, eps_ex, f) = dens;
            Ok(OracleResult { v, k: ks, p, n_ex: Some(n_ex), eps_ex, f, method: OracleMethod::FreeFermion, dt: opts.dt, tol: opts.tol })
        }
    }
}

/// Thermodynamic-limit `(f, eps_ex)` Richardson-extrapolated in the
/// integrator step: the fourth-order estimates at `dt` and `dt / 2` are
/// combined as `(16 x(dt/2) - x(dt)) / 15`.
pub fn richardson_reference(v: f64, dt: f64) -> Result<(OracleResult, f64, f64)> {
    let opts = FreeFermionOptions { dt, tol: 1e-10, ..Default::default() };
    let coarse = free_fermion_sweep_with(v, ModeSet::Continuum, &opts)?;
    let fine = free_fermion_sweep_with(v, ModeSet::Continuum, &FreeFermionOptions { dt: dt / 2.0, ..opts })?;
    let f = (16.0 * fine.f - coarse.f) / 15.0;
    let eps = (16.0 * fine.eps_ex - coarse.eps_ex) / 15.0;
    Ok((fine, f, eps))
}
