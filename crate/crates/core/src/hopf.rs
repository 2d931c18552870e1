//! Hopf points: correction of detected stability switches with the
//! extended system `f(x) = 0`, `Delta(i omega) v = 0`, `c . v = 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charpoly::{critical_delays, Crossing, QuarticReduction};
use crate::error::{Error, Result};
use crate::io::{fmt_num, Table};
use crate::model::{steady_jacobians, steady_rhs, DdeSystem, ParameterSet};
use crate::spectrum::{
    characteristic_matrix, characteristic_matrix_derivative, equilibrium_roots, null_vector,
    SpectrumSettings,
};
use crate::steady::{Branch, EquilibriumPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfSettings {
    /// Candidate roots whose frequency is this close to an excluded one are skipped.
    pub exclude_tol: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub spectrum: SpectrumSettings,
}

impl Default for HopfSettings {
    fn default() -> Self {
        HopfSettings {
            exclude_tol: 1e-2,
            tol: 1e-12,
            max_iter: 20,
            spectrum: SpectrumSettings::default(),
        }
    }
}

/// A corrected Hopf point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub x: Vec<f64>,
    pub omega: f64,
    pub params: ParameterSet,
    /// Index of the free parameter.
    pub parameter: usize,
    /// Critical eigenvector, `c . v = 1`.
    pub v: Vec<Complex64>,
    /// Normalization functional `c`.
    pub normalization: Vec<Complex64>,
    /// Max-norm of the defining system at the returned point.
    pub residual: f64,
}

impl HopfPoint {
    pub fn parameter_value(&self) -> f64 {
        self.params.get(self.parameter)
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

struct DefiningSystem<'a> {
    sys: &'a dyn DdeSystem,
    template: ParameterSet,
    parameter: usize,
    c: DVector<Complex64>,
}

impl DefiningSystem<'_> {
    fn n(&self) -> usize {
        self.sys.dimension()
    }

    fn unpack(&self, z: &DVector<f64>) -> (Vec<f64>, DVector<Complex64>, f64, ParameterSet) {
        let n = self.n();
        let x = z.rows(0, n).iter().copied().collect();
        let v = DVector::from_fn(n, |i, _| Complex64::new(z[n + i], z[2 * n + i]));
        let omega = z[3 * n];
        let p = self.template.with(self.parameter, z[3 * n + 1]);
        (x, v, omega, p)
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        let (x, v, omega, p) = self.unpack(z);
        let mut out = DVector::zeros(3 * n + 2);
        out.rows_mut(0, n).copy_from(&steady_rhs(self.sys, &x, &p)?);
        let jac = steady_jacobians(self.sys, &x, &p)?;
        let dv = characteristic_matrix(Complex64::new(0.0, omega), &jac, &self.sys.delays(&p)) * &v;
        for i in 0..n {
            out[n + i] = dv[i].re;
            out[2 * n + i] = dv[i].im;
        }
        let cv = self.c.dot(&v) - Complex64::new(1.0, 0.0);
        out[3 * n] = cv.re;
        out[3 * n + 1] = cv.im;
        Ok(out)
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.n();
        let size = 3 * n + 2;
        let mut jac = DMatrix::zeros(size, size);
        let (x, v, omega, p) = self.unpack(z);
        let lin = steady_jacobians(self.sys, &x, &p)?;
        let delays = self.sys.delays(&p);
        let lambda = Complex64::new(0.0, omega);
        let m = characteristic_matrix(lambda, &lin, &delays);
        // v columns are exact: the system is linear in v
        for col in 0..n {
            for row in 0..n {
                jac[(n + row, n + col)] = m[(row, col)].re;
                jac[(2 * n + row, n + col)] = m[(row, col)].im;
                let iz = m[(row, col)] * Complex64::new(0.0, 1.0);
                jac[(n + row, 2 * n + col)] = iz.re;
                jac[(2 * n + row, 2 * n + col)] = iz.im;
            }
            let c = self.c[col];
            jac[(3 * n, n + col)] = c.re;
            jac[(3 * n + 1, n + col)] = c.im;
            let ic = c * Complex64::new(0.0, 1.0);
            jac[(3 * n, 2 * n + col)] = ic.re;
            jac[(3 * n + 1, 2 * n + col)] = ic.im;
        }
        // d/domega of Delta(i omega) v = i Delta'(i omega) v
        let dw = characteristic_matrix_derivative(lambda, &lin, &delays) * &v * Complex64::new(0.0, 1.0);
        for row in 0..n {
            jac[(n + row, 3 * n)] = dw[row].re;
            jac[(2 * n + row, 3 * n)] = dw[row].im;
        }
        // state and parameter columns by central differences
        let fd_cols: Vec<usize> = (0..n).chain(std::iter::once(3 * n + 1)).collect();
        for col in fd_cols {
            let h = 1e-7 * z[col].abs().max(1.0);
            let mut zp = z.clone();
            zp[col] += h;
            let mut zm = z.clone();
            zm[col] -= h;
            let d = (self.residual(&zp)? - self.residual(&zm)?) / (2.0 * h);
            jac.column_mut(col).copy_from(&d);
        }
        Ok(jac)
    }
}

/// Corrects a Hopf point from an initial equilibrium, root and parameter.
pub fn correct_hopf(
    sys: &dyn DdeSystem,
    point: &EquilibriumPoint,
    parameter: usize,
    root: Complex64,
    settings: &HopfSettings,
) -> Result<HopfPoint> {
    let n = sys.dimension();
    let lin = steady_jacobians(sys, &point.x, &point.params)?;
    let v0 = null_vector(&characteristic_matrix(root, &lin, &sys.delays(&point.params)));
    let scale = v0.norm_squared();
    let c: DVector<Complex64> = v0.map(|z| z.conj() / scale);
    let problem = DefiningSystem {
        sys,
        template: point.params,
        parameter,
        c: c.clone(),
    };
    let mut z = DVector::zeros(3 * n + 2);
    z.rows_mut(0, n).copy_from_slice(&point.x);
    for i in 0..n {
        z[n + i] = v0[i].re;
        z[2 * n + i] = v0[i].im;
    }
    z[3 * n] = root.im;
    z[3 * n + 1] = point.params.get(parameter);

    let mut residual = problem.residual(&z)?.amax();
    let mut iterations = 0;
    while residual > settings.tol {
        if iterations == settings.max_iter || !residual.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
        let jac = problem.jacobian(&z)?;
        let f = problem.residual(&z)?;
        let dz = jac
            .lu()
            .solve(&(-f))
            .ok_or(Error::SingularJacobian("Hopf defining system"))?;
        z += &dz;
        residual = problem.residual(&z)?.amax();
        iterations += 1;
        // stop once the update is at rounding level even if the residual floor is above tol
        if dz.amax() <= 1e-15 * z.amax() && residual < 1e-10 {
            break;
        }
    }
    let (x, mut v, mut omega, params) = problem.unpack(&z);
    let mut normalization: Vec<Complex64> = c.iter().copied().collect();
    if omega < 0.0 {
        // the conjugate pair member with positive frequency
        omega = -omega;
        v = v.map(|z| z.conj());
        normalization = normalization.iter().map(|z| z.conj()).collect();
    }
    Ok(HopfPoint {
        x,
        omega,
        params,
        parameter,
        v: v.iter().copied().collect(),
        normalization,
        residual,
    })
}

/// Refines the stability switch at `switch_index` (between branch points
/// `switch_index` and `switch_index + 1`) into a Hopf point. Roots whose
/// frequency lies within `exclude_tol` of `exclude_freqs` are not used as
/// initial guesses, and a result landing on such a frequency is rejected.
pub fn refine_hopf(
    sys: &dyn DdeSystem,
    branch: &Branch<EquilibriumPoint>,
    switch_index: usize,
    exclude_freqs: &[f64],
    settings: &HopfSettings,
) -> Result<HopfPoint> {
    let point = branch.points.get(switch_index).ok_or(Error::DimensionMismatch {
        context: "switch index",
        expected: branch.points.len(),
        got: switch_index,
    })?;
    let roots = match &point.stability {
        Some(set) => set.clone(),
        None => equilibrium_roots(sys, &point.x, &point.params, &settings.spectrum)?,
    };
    let root = roots
        .closest_to_axis(exclude_freqs, settings.exclude_tol)
        .ok_or_else(|| Error::NoCandidate(format!("no complex root at branch point {switch_index}")))?;
    let hopf = correct_hopf(sys, point, branch.settings.parameter, root, settings)?;
    if exclude_freqs
        .iter()
        .any(|w| (hopf.omega - w).abs() <= settings.exclude_tol)
    {
        return Err(Error::ExcludedFrequency { omega: hopf.omega });
    }
    Ok(hopf)
}

/// Refines every switch in order. When a refinement reproduces an earlier Hopf
/// point (same delay within `duplicate_tol`), it is redone with that point's
/// frequency excluded.
pub fn refine_all(
    sys: &dyn DdeSystem,
    branch: &Branch<EquilibriumPoint>,
    switches: &[usize],
    settings: &HopfSettings,
    duplicate_tol: f64,
) -> Result<Vec<HopfPoint>> {
    let mut found: Vec<HopfPoint> = Vec::new();
    for &index in switches {
        let mut excluded: Vec<f64> = Vec::new();
        loop {
            let hopf = refine_hopf(sys, branch, index, &excluded, settings)?;
            let duplicate = found
                .iter()
                .find(|h| (h.parameter_value() - hopf.parameter_value()).abs() < duplicate_tol);
            match duplicate {
                Some(prev) if !excluded.contains(&prev.omega) => excluded.push(prev.omega),
                Some(_) => {
                    return Err(Error::NoCandidate(format!(
                        "switch {index} only reproduces known Hopf points"
                    )))
                }
                None => {
                    found.push(hopf);
                    break;
                }
            }
        }
    }
    Ok(found)
}

/// One line of a Hopf-vs-analytic comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub tau: f64,
    pub omega: f64,
    pub nearest: f64,
    pub which: Crossing,
    pub k: usize,
    pub difference: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub tolerance: f64,
    pub rows: Vec<AgreementRow>,
}

impl AgreementReport {
    pub fn all_within(&self) -> bool {
        self.rows.iter().all(|r| r.within_tolerance)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["index", "tau", "omega", "analytic_tau", "error"]);
        for (i, r) in self.rows.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                fmt_num(r.tau),
                fmt_num(r.omega),
                fmt_num(r.nearest),
                fmt_num(r.difference),
            ]);
        }
        t
    }
}

/// Pairs each refined delay with the nearest analytic critical delay.
pub fn hopf_agreement_report(
    taus_and_omegas: &[(f64, f64)],
    reduction: &QuarticReduction,
    tolerance: f64,
) -> AgreementReport {
    let mut candidates: Vec<(f64, Crossing, usize)> = Vec::new();
    let max_tau = taus_and_omegas.iter().map(|t| t.0).fold(0.0, f64::max);
    for which in [Crossing::Minus, Crossing::Plus] {
        if let Ok(w) = reduction.omega(which) {
            let k_max = (max_tau * w / (2.0 * std::f64::consts::PI)).ceil() as usize + 2;
            if let Ok(seq) = critical_delays(reduction, which, k_max) {
                candidates.extend(seq.all.iter().enumerate().map(|(k, t)| (*t, which, k)));
            }
        }
    }
    let rows = taus_and_omegas
        .iter()
        .filter_map(|&(tau, omega)| {
            candidates
                .iter()
                .min_by(|a, b| (a.0 - tau).abs().total_cmp(&(b.0 - tau).abs()))
                .map(|&(nearest, which, k)| {
                    let difference = (nearest - tau).abs();
                    AgreementRow {
                        tau,
                        omega,
                        nearest,
                        which,
                        k,
                        difference,
                        within_tolerance: difference < tolerance,
                    }
                })
        })
        .collect();
    AgreementReport { tolerance, rows }
}
