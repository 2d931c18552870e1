//! Characteristic roots of linearized DDEs.
//!
//! Roots of `det(lambda I - A - sum_j B_j exp(-lambda tau_j)) = 0` are
//! seeded from a Chebyshev collocation of the infinitesimal generator on
//! `[-tau_max, 0]` and then polished by Newton's method on the
//! characteristic function itself.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{steady_jacobians, DdeSystem, Jacobians, ParameterSet};

/// Knobs of [`compute_roots`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    /// Roots with real part below this are discarded.
    pub minimal_real_part: f64,
    /// Minimum number of Chebyshev intervals on the history segment.
    pub nodes: usize,
    /// Upper cap on the adaptive node count.
    pub max_nodes: usize,
    /// Bound on the scaled residual of an accepted root.
    pub root_tol: f64,
    /// Roots closer than this are treated as one (also used for conjugate pairing).
    pub pair_tol: f64,
    pub max_newton_iter: usize,
    /// Roots with `|Re| <` this count as unstable but are flagged.
    pub axis_tol: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            minimal_real_part: -2.0,
            nodes: 40,
            max_nodes: 160,
            root_tol: 1e-9,
            pair_tol: 1e-7,
            max_newton_iter: 40,
            axis_tol: 1e-8,
        }
    }
}

/// Characteristic roots right of a cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRootSet {
    /// Sorted by decreasing real part.
    pub roots: Vec<Complex64>,
    pub cutoff: f64,
    /// Roots with positive real part (axis roots included).
    pub nunst: usize,
    /// Roots with `|Re| < axis_tol`.
    pub on_axis: usize,
    /// Discretization seeds whose Newton polish failed.
    pub dropped_seeds: usize,
    /// Chebyshev intervals used (0 when all delays vanish).
    pub nodes: usize,
}

impl CharacteristicRootSet {
    /// Root with `Im > 0` closest to the imaginary axis, skipping those whose
    /// frequency is within `exclude_tol` of any entry in `exclude`.
    pub fn closest_to_axis(&self, exclude: &[f64], exclude_tol: f64) -> Option<Complex64> {
        self.roots
            .iter()
            .filter(|z| z.im > 0.0)
            .filter(|z| exclude.iter().all(|w| (z.im - w).abs() > exclude_tol))
            .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
            .copied()
    }
}

/// The characteristic matrix `lambda I - A - sum_j B_j exp(-lambda tau_j)`.
pub fn characteristic_matrix(lambda: Complex64, jac: &Jacobians, delays: &[f64]) -> DMatrix<Complex64> {
    let n = jac.dimension();
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        diag - jac.a[(i, j)]
    });
    for (bj, &tau) in jac.b.iter().zip(delays) {
        let e = (-lambda * tau).exp();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= bj[(i, j)] * e;
            }
        }
    }
    m
}

/// `d/dlambda` of the characteristic matrix: `I + sum_j tau_j B_j exp(-lambda tau_j)`.
pub fn characteristic_matrix_derivative(
    lambda: Complex64,
    jac: &Jacobians,
    delays: &[f64],
) -> DMatrix<Complex64> {
    let n = jac.dimension();
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    for (bj, &tau) in jac.b.iter().zip(delays) {
        let e = (-lambda * tau).exp() * tau;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += bj[(i, j)] * e;
            }
        }
    }
    m
}

/// `det(lambda I - A - sum_j B_j exp(-lambda tau_j))`.
pub fn characteristic_residual(lambda: Complex64, jac: &Jacobians, delays: &[f64]) -> Complex64 {
    characteristic_matrix(lambda, jac, delays).determinant()
}

/// Right null vector of a (nearly) singular complex matrix, unit 2-norm.
pub(crate) fn null_vector(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    let n = m.ncols();
    if n == 1 {
        return DVector::from_element(1, Complex64::new(1.0, 0.0));
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let row = v_t.row(k);
    DVector::from_iterator(n, row.iter().map(|z| z.conj()))
}

/// Chebyshev points `cos(i pi / N)` and the differentiation matrix on them.
pub(crate) fn chebyshev(n_intervals: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = n_intervals;
    let x: Vec<f64> = (0..=n)
        .map(|i| (std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let c = |i: usize| {
        let end = if i == 0 || i == n { 2.0 } else { 1.0 };
        if i % 2 == 0 {
            end
        } else {
            -end
        }
    };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Barycentric interpolation weights on Chebyshev points evaluated at `t`.
fn chebyshev_interpolation_weights(x: &[f64], t: f64) -> Vec<f64> {
    let n = x.len() - 1;
    if let Some(k) = x.iter().position(|&xi| (xi - t).abs() < 1e-14) {
        let mut w = vec![0.0; n + 1];
        w[k] = 1.0;
        return w;
    }
    let raw: Vec<f64> = (0..=n)
        .map(|i| {
            let half = if i == 0 || i == n { 0.5 } else { 1.0 };
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * half / (t - x[i])
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

fn spectral_scale(jac: &Jacobians) -> f64 {
    let combined = jac.combined();
    let eig_a = jac
        .a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let eig_c = combined
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let b_norm: f64 = jac.b.iter().map(|b| b.norm()).sum();
    eig_a.max(eig_c) + b_norm
}

/// Eigenvalues of the Chebyshev collocation of the solution operator's generator.
/// Returns the seeds and the number of intervals used.
pub fn discretized_spectrum(
    jac: &Jacobians,
    delays: &[f64],
    nodes: usize,
) -> (Vec<Complex64>, usize) {
    let n = jac.dimension();
    let tau_max = delays.iter().copied().fold(0.0, f64::max);
    if tau_max == 0.0 {
        return (jac.combined().complex_eigenvalues().iter().copied().collect(), 0);
    }
    let (x, d) = chebyshev(nodes);
    let size = n * (nodes + 1);
    let mut g = DMatrix::zeros(size, size);
    // theta = tau_max (x - 1) / 2, so d/dtheta = (2 / tau_max) d/dx
    let scale = 2.0 / tau_max;
    for i in 1..=nodes {
        for k in 0..=nodes {
            let v = scale * d[(i, k)];
            if v != 0.0 {
                for c in 0..n {
                    g[(i * n + c, k * n + c)] = v;
                }
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            g[(r, c)] += jac.a[(r, c)];
        }
    }
    for (bj, &tau) in jac.b.iter().zip(delays) {
        let t = 1.0 - 2.0 * tau / tau_max;
        let w = chebyshev_interpolation_weights(&x, t);
        for (k, wk) in w.iter().enumerate() {
            if *wk == 0.0 {
                continue;
            }
            for r in 0..n {
                for c in 0..n {
                    g[(r, k * n + c)] += wk * bj[(r, c)];
                }
            }
        }
    }
    (g.complex_eigenvalues().iter().copied().collect(), nodes)
}

fn det_and_derivative(lambda: Complex64, jac: &Jacobians, delays: &[f64]) -> (Complex64, Complex64) {
    let m = characteristic_matrix(lambda, jac, delays);
    let dm = characteristic_matrix_derivative(lambda, jac, delays);
    match m.nrows() {
        1 => (m[(0, 0)], dm[(0, 0)]),
        2 => {
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let ddet = dm[(0, 0)] * m[(1, 1)] + m[(0, 0)] * dm[(1, 1)]
                - dm[(0, 1)] * m[(1, 0)]
                - m[(0, 1)] * dm[(1, 0)];
            (det, ddet)
        }
        _ => unreachable!("direct determinant Newton is only used for n <= 2"),
    }
}

/// Scaled residual used to accept a polished root.
fn scaled_residual(lambda: Complex64, jac: &Jacobians, delays: &[f64]) -> f64 {
    let n = jac.dimension() as i32;
    let scale = lambda.norm().max(1.0).powi(n);
    characteristic_residual(lambda, jac, delays).norm() / scale
}

/// Newton polish of a characteristic root. Uses the determinant directly for
/// `n <= 2` and a bordered eigenvector system otherwise.
pub fn polish_root(
    seed: Complex64,
    jac: &Jacobians,
    delays: &[f64],
    settings: &SpectrumSettings,
) -> Option<Complex64> {
    let n = jac.dimension();
    let mut lambda = seed;
    if n <= 2 {
        for _ in 0..settings.max_newton_iter {
            let (f, df) = det_and_derivative(lambda, jac, delays);
            if df.norm() == 0.0 {
                return None;
            }
            let step = f / df;
            lambda -= step;
            if !lambda.is_finite() {
                return None;
            }
            if step.norm() <= 1e-14 * (1.0 + lambda.norm()) {
                break;
            }
        }
    } else {
        let mut v = null_vector(&characteristic_matrix(lambda, jac, delays));
        let c: DVector<Complex64> = v.map(|z| z.conj());
        for _ in 0..settings.max_newton_iter {
            let m = characteristic_matrix(lambda, jac, delays);
            let dm = characteristic_matrix_derivative(lambda, jac, delays);
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(&m);
            big.view_mut((0, n), (n, 1)).copy_from(&(&dm * &v));
            big.view_mut((n, 0), (1, n)).copy_from(&c.transpose());
            let mut rhs = DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-(&m * &v)));
            rhs[n] = -(c.dot(&v) - Complex64::new(1.0, 0.0));
            let delta = big.lu().solve(&rhs)?;
            v += delta.rows(0, n);
            lambda += delta[n];
            if !lambda.is_finite() {
                return None;
            }
            if delta[n].norm() <= 1e-14 * (1.0 + lambda.norm()) {
                break;
            }
        }
    }
    (scaled_residual(lambda, jac, delays) <= settings.root_tol).then_some(lambda)
}

fn dedup_and_close(mut roots: Vec<Complex64>, tol: f64) -> Vec<Complex64> {
    for z in roots.iter_mut() {
        if z.im.abs() <= tol * z.norm().max(1.0) {
            z.im = 0.0;
        }
    }
    let mut out: Vec<Complex64> = Vec::new();
    let close = |a: &Complex64, b: &Complex64| (a - b).norm() <= tol * a.norm().max(1.0);
    for z in roots {
        if !out.iter().any(|w| close(w, &z)) {
            out.push(z);
        }
        let c = z.conj();
        if z.im != 0.0 && !out.iter().any(|w| close(w, &c)) {
            out.push(c);
        }
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    out
}

/// Characteristic roots with `Re >= minimal_real_part`.
pub fn compute_roots(jac: &Jacobians, delays: &[f64], settings: &SpectrumSettings) -> CharacteristicRootSet {
    let cutoff = settings.minimal_real_part;
    let tau_max = delays.iter().copied().fold(0.0, f64::max);
    let (seeds, nodes) = if tau_max == 0.0 {
        discretized_spectrum(jac, delays, 0)
    } else {
        let wanted = (3.0 * tau_max * spectral_scale(jac)).ceil() as usize;
        discretized_spectrum(jac, delays, wanted.clamp(settings.nodes, settings.max_nodes.max(settings.nodes)))
    };
    // Seeds slightly left of the cutoff may polish onto roots right of it.
    let margin = 0.1 * cutoff.abs().max(1.0);
    let mut polished = Vec::new();
    let mut dropped = 0;
    for seed in seeds.into_iter().filter(|z| z.re >= cutoff - margin && z.im >= -settings.pair_tol) {
        if tau_max == 0.0 {
            polished.push(seed);
            continue;
        }
        match polish_root(seed, jac, delays, settings) {
            Some(z) => polished.push(z),
            None => dropped += 1,
        }
    }
    let roots: Vec<Complex64> = dedup_and_close(polished, settings.pair_tol)
        .into_iter()
        .filter(|z| z.re >= cutoff)
        .collect();
    let on_axis = roots.iter().filter(|z| z.re.abs() < settings.axis_tol).count();
    let nunst = roots
        .iter()
        .filter(|z| z.re > 0.0 || z.re.abs() < settings.axis_tol)
        .count();
    CharacteristicRootSet {
        roots,
        cutoff,
        nunst,
        on_axis,
        dropped_seeds: dropped,
        nodes,
    }
}

/// Roots of the linearization of `sys` at the steady state `x`.
pub fn equilibrium_roots(
    sys: &dyn DdeSystem,
    x: &[f64],
    p: &ParameterSet,
    settings: &SpectrumSettings,
) -> Result<CharacteristicRootSet> {
    let jac = steady_jacobians(sys, x, p)?;
    Ok(compute_roots(&jac, &sys.delays(p), settings))
}

/// Result of scanning an annotated branch for stability changes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchScan {
    /// `i` such that `|nunst[i+1] - nunst[i]| == 2`.
    pub hopf_candidates: Vec<usize>,
    /// `i` such that `|nunst[i+1] - nunst[i]| == 1` (real-root crossing).
    pub anomalies: Vec<usize>,
}

/// Locates changes of the unstable-root count along a branch.
pub fn detect_stability_switches(nunst: &[usize]) -> SwitchScan {
    let mut scan = SwitchScan::default();
    for (i, pair) in nunst.windows(2).enumerate() {
        match pair[0].abs_diff(pair[1]) {
            2 => scan.hopf_candidates.push(i),
            1 => scan.anomalies.push(i),
            _ => {}
        }
    }
    scan
}

/// Roots at a fixed equilibrium state for each delay value on a grid.
/// The delay is parameter `ParameterSet::TAU`; sweeps run in parallel.
pub fn spectrum_sweep(
    sys: &dyn DdeSystem,
    x: &[f64],
    p: &ParameterSet,
    taus: &[f64],
    settings: &SpectrumSettings,
) -> Result<Vec<(f64, CharacteristicRootSet)>> {
    taus.par_iter()
        .map(|&tau| {
            let q = p.with_tau(tau);
            equilibrium_roots(sys, x, &q, settings).map(|set| (tau, set))
        })
        .collect()
}
