//! Periodic orbits by piecewise-polynomial collocation in scaled time
//! `s = t / T`, with continuation from Hopf points.

mod basis;
pub mod doubling;
pub mod floquet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::continuation::{self, correct, BranchSettings, Constraint, Continuable};
use crate::error::{Error, Result};
use crate::hopf::HopfPoint;
use crate::io::{fmt_num, Table};
use crate::model::{eval_rhs, jacobians, DdeSystem, ParameterSet};
use crate::steady::Branch;

pub(crate) use basis::Basis;
pub use doubling::{double_psol, doubled_orbit, locate_period_doubling, PeriodDoubling};
pub use floquet::{annotate_floquet, detect_period_doubling, floquet, FloquetSet};

/// Discretization and corrector settings for periodic orbits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsolSettings {
    pub intervals: usize,
    pub degree: usize,
    /// Corrector tolerance on the collocation residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Corrector iterations still counted as easy convergence on orbit branches.
    pub easy_iterations: usize,
    /// Amplitude of the first nontrivial orbit next to a Hopf point.
    pub hopf_amplitude: f64,
    /// Allowed distance of the trivial Floquet multiplier from 1.
    pub trivial_tol: f64,
    /// Multipliers with modulus above `1 + unstable_tol` count as unstable.
    pub unstable_tol: f64,
}

impl Default for PsolSettings {
    fn default() -> Self {
        PsolSettings {
            intervals: 20,
            degree: 4,
            tol: 1e-9,
            max_iter: 20,
            easy_iterations: 5,
            hopf_amplitude: 1e-2,
            trivial_tol: 5e-3,
            unstable_tol: 1e-6,
        }
    }
}

/// A periodic solution on a mesh of `[0, 1]`, represented by its values at
/// `intervals * degree + 1` equispaced nodes per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub mesh: Vec<f64>,
    pub degree: usize,
    pub profile: Vec<Vec<f64>>,
    pub period: f64,
    pub params: ParameterSet,
    pub stability: Option<FloquetSet>,
}

/// Interval index and local coordinate of `s` in `[0, 1]`.
pub(crate) fn locate(mesh: &[f64], s: f64) -> (usize, f64) {
    let last = mesh.len() - 2;
    let i = mesh[1..=last].partition_point(|m| *m <= s).min(last);
    let theta = (s - mesh[i]) / (mesh[i + 1] - mesh[i]);
    (i, theta)
}

impl PeriodicOrbit {
    pub fn intervals(&self) -> usize {
        self.mesh.len() - 1
    }

    pub fn dimension(&self) -> usize {
        self.profile.first().map_or(0, Vec::len)
    }

    /// Scaled times of the representation nodes.
    pub fn node_times(&self) -> Vec<f64> {
        node_times(&self.mesh, self.degree)
    }

    /// State at scaled time `s`, taken modulo 1.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        self.eval_with_derivative(s).0
    }

    /// State and its derivative with respect to scaled time.
    pub fn eval_with_derivative(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let basis = Basis::new(self.degree);
        let (i, theta) = locate(&self.mesh, s.rem_euclid(1.0));
        let h = self.mesh[i + 1] - self.mesh[i];
        let (lv, ld) = basis.lagrange(theta);
        let n = self.dimension();
        let mut u = vec![0.0; n];
        let mut du = vec![0.0; n];
        for j in 0..=self.degree {
            let node = &self.profile[i * self.degree + j];
            for k in 0..n {
                u[k] += lv[j] * node[k];
                du[k] += ld[j] * node[k] / h;
            }
        }
        (u, du)
    }

    /// The same curve represented on another mesh and degree by interpolation.
    pub fn remesh(&self, mesh: &[f64], degree: usize) -> PeriodicOrbit {
        let mut profile: Vec<Vec<f64>> = node_times(mesh, degree).iter().map(|s| self.eval(*s)).collect();
        // keep the endpoints identical
        if let Some(first) = profile.first().cloned() {
            *profile.last_mut().unwrap() = first;
        }
        PeriodicOrbit {
            mesh: mesh.to_vec(),
            degree,
            profile,
            period: self.period,
            params: self.params,
            stability: None,
        }
    }

    /// Largest nodal value of component `component`.
    pub fn max_component(&self, component: usize) -> f64 {
        self.profile
            .iter()
            .map(|x| x[component])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_component(&self, component: usize) -> f64 {
        self.profile
            .iter()
            .map(|x| x[component])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nunst(&self) -> Option<usize> {
        self.stability.as_ref().map(|f| f.nunst_psol)
    }

    /// Node table: index, scaled time, state components; period and delay in
    /// the preamble.
    pub fn to_table(&self) -> Table {
        let n = self.dimension();
        let mut header = vec!["node".to_string(), "s".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        let mut t = Table::new(header);
        t.annotate("period", self.period);
        t.annotate("tau", self.params.tau);
        for (m, (s, x)) in self.node_times().iter().zip(&self.profile).enumerate() {
            let mut row = vec![m.to_string(), fmt_num(*s)];
            row.extend(x.iter().map(|v| fmt_num(*v)));
            t.push(row);
        }
        t
    }

    /// Largest collocation residual `|u'(s) - T f(...)|` over all collocation points.
    pub fn collocation_residual(&self, sys: &dyn DdeSystem) -> Result<f64> {
        let coll = Collocation::new(sys, &self.mesh, self.degree, self.params, ParameterSet::TAU);
        let y = coll.pack(self);
        let r = coll.collocation_rows(&y, &self.params, self.period, None)?;
        Ok(r.amax())
    }
}

pub fn uniform_mesh(intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| i as f64 / intervals as f64).collect()
}

pub(crate) fn node_times(mesh: &[f64], degree: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity((mesh.len() - 1) * degree + 1);
    for w in mesh.windows(2) {
        for j in 0..degree {
            t.push(w[0] + (w[1] - w[0]) * j as f64 / degree as f64);
        }
    }
    t.push(*mesh.last().unwrap_or(&1.0));
    t
}

/// Collocation equations for a fixed mesh. The unknown vector holds the node
/// values (node-major), then the period, then the free parameter.
pub(crate) struct Collocation<'a> {
    pub sys: &'a dyn DdeSystem,
    pub basis: Basis,
    pub mesh: Vec<f64>,
    pub template: ParameterSet,
    pub parameter: usize,
    colloc_lagrange: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Collocation<'a> {
    pub fn new(
        sys: &'a dyn DdeSystem,
        mesh: &[f64],
        degree: usize,
        template: ParameterSet,
        parameter: usize,
    ) -> Self {
        let basis = Basis::new(degree);
        let colloc_lagrange = basis.points.iter().map(|&c| basis.lagrange(c)).collect();
        Collocation {
            sys,
            basis,
            mesh: mesh.to_vec(),
            template,
            parameter,
            colloc_lagrange,
        }
    }

    pub fn n(&self) -> usize {
        self.sys.dimension()
    }

    pub fn intervals(&self) -> usize {
        self.mesh.len() - 1
    }

    pub fn nodes(&self) -> usize {
        self.intervals() * self.basis.degree + 1
    }

    pub fn period_slot(&self) -> usize {
        self.nodes() * self.n()
    }

    pub fn size(&self) -> usize {
        self.period_slot() + 2
    }

    pub fn pack(&self, orbit: &PeriodicOrbit) -> DVector<f64> {
        let n = self.n();
        let mut y = DVector::zeros(self.size());
        for (m, x) in orbit.profile.iter().enumerate() {
            y.rows_mut(m * n, n).copy_from_slice(x);
        }
        y[self.period_slot()] = orbit.period;
        y[self.period_slot() + 1] = orbit.params.get(self.parameter);
        y
    }

    pub fn unpack(&self, y: &DVector<f64>) -> PeriodicOrbit {
        let n = self.n();
        PeriodicOrbit {
            mesh: self.mesh.clone(),
            degree: self.basis.degree,
            profile: (0..self.nodes())
                .map(|m| y.rows(m * n, n).iter().copied().collect())
                .collect(),
            period: y[self.period_slot()],
            params: self.params(y),
            stability: None,
        }
    }

    pub fn params(&self, y: &DVector<f64>) -> ParameterSet {
        self.template.with(self.parameter, y[self.period_slot() + 1])
    }

    /// Value and scaled-time derivative of the profile in `y` at `s` in `[0, 1)`,
    /// with the interval index and Lagrange values used.
    fn eval(&self, y: &DVector<f64>, s: f64) -> (Vec<f64>, Vec<f64>, usize, Vec<f64>) {
        let n = self.n();
        let d = self.basis.degree;
        let (i, theta) = locate(&self.mesh, s);
        let h = self.mesh[i + 1] - self.mesh[i];
        let (lv, ld) = self.basis.lagrange(theta);
        let mut u = vec![0.0; n];
        let mut du = vec![0.0; n];
        for j in 0..=d {
            let base = (i * d + j) * n;
            for k in 0..n {
                u[k] += lv[j] * y[base + k];
                du[k] += ld[j] * y[base + k] / h;
            }
        }
        (u, du, i, lv)
    }

    /// Collocation residuals `u'(s_c) - T f(u(s_c), u(s_c - tau_j / T))`. When
    /// `jac` is given, fills the node and period columns of those rows.
    pub fn collocation_rows(
        &self,
        y: &DVector<f64>,
        p: &ParameterSet,
        period: f64,
        mut jac: Option<&mut DMatrix<f64>>,
    ) -> Result<DVector<f64>> {
        let n = self.n();
        let d = self.basis.degree;
        let delays = self.sys.delays(p);
        let mut out = DVector::zeros(self.intervals() * d * n);
        let tcol = self.period_slot();
        for i in 0..self.intervals() {
            let h = self.mesh[i + 1] - self.mesh[i];
            for (g, (lv, ld)) in self.colloc_lagrange.iter().enumerate() {
                let row = (i * d + g) * n;
                let s = self.mesh[i] + self.basis.points[g] * h;
                let mut u = vec![0.0; n];
                let mut du = vec![0.0; n];
                for j in 0..=d {
                    let base = (i * d + j) * n;
                    for k in 0..n {
                        u[k] += lv[j] * y[base + k];
                        du[k] += ld[j] * y[base + k] / h;
                    }
                }
                let lagged: Vec<_> = delays
                    .iter()
                    .map(|tau| self.eval(y, (s - tau / period).rem_euclid(1.0)))
                    .collect();
                let xdel: Vec<&[f64]> = lagged.iter().map(|l| l.0.as_slice()).collect();
                let f = eval_rhs(self.sys, &u, &xdel, p)?;
                for k in 0..n {
                    out[row + k] = du[k] - period * f[k];
                }
                let Some(jac) = jac.as_deref_mut() else {
                    continue;
                };
                let lin = jacobians(self.sys, &u, &xdel, p)?;
                for j in 0..=d {
                    let col = (i * d + j) * n;
                    for r in 0..n {
                        jac[(row + r, col + r)] += ld[j] / h;
                        for c in 0..n {
                            jac[(row + r, col + c)] -= period * lv[j] * lin.a[(r, c)];
                        }
                    }
                }
                for (q, (_, dul, il, lvl)) in lagged.iter().enumerate() {
                    let b = &lin.b[q];
                    for j in 0..=d {
                        let col = (il * d + j) * n;
                        for r in 0..n {
                            for c in 0..n {
                                jac[(row + r, col + c)] -= period * lvl[j] * b[(r, c)];
                            }
                        }
                    }
                    // the lag position s - tau / T moves with T
                    let bdu = b * DVector::from_column_slice(dul);
                    for r in 0..n {
                        jac[(row + r, tcol)] -= bdu[r] * delays[q] / period;
                    }
                }
                for r in 0..n {
                    jac[(row + r, tcol)] -= f[r];
                }
            }
        }
        Ok(out)
    }

    /// Full system: collocation, periodicity and the integral phase condition
    /// against `reference`. Returns `size() - 1` rows.
    pub fn system(
        &self,
        y: &DVector<f64>,
        reference: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n();
        let d = self.basis.degree;
        let rows = self.size() - 1;
        let ncoll = self.intervals() * d * n;
        let mut f = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, self.size());
        let p = self.params(y);
        let period = y[self.period_slot()];
        if !(period > 0.0) {
            return Err(Error::InvalidParameters(format!("period {period} is not positive")));
        }
        {
            let mut block = jac.rows_mut(0, ncoll).into_owned();
            let coll = self.collocation_rows(y, &p, period, Some(&mut block))?;
            jac.rows_mut(0, ncoll).copy_from(&block);
            f.rows_mut(0, ncoll).copy_from(&coll);
        }
        // parameter column by central differences
        let pcol = self.period_slot() + 1;
        let base = y[pcol];
        let step = 1e-7 * base.abs().max(1.0);
        let up = self.collocation_rows(y, &p.with(self.parameter, base + step), period, None)?;
        let down = self.collocation_rows(y, &p.with(self.parameter, base - step), period, None)?;
        jac.view_mut((0, pcol), (ncoll, 1))
            .copy_from(&((up - down) / (2.0 * step)));

        let last = (self.nodes() - 1) * n;
        for k in 0..n {
            f[ncoll + k] = y[last + k] - y[k];
            jac[(ncoll + k, last + k)] = 1.0;
            jac[(ncoll + k, k)] = -1.0;
        }

        let prow = ncoll + n;
        for i in 0..self.intervals() {
            let h = self.mesh[i + 1] - self.mesh[i];
            for (g, (lv, _)) in self.colloc_lagrange.iter().enumerate() {
                let s = self.mesh[i] + self.basis.points[g] * h;
                let w = self.basis.weights[g] * h;
                let (r, dr, _, _) = self.eval(reference, s);
                let (u, _, _, _) = self.eval(y, s);
                for k in 0..n {
                    f[prow] += w * dr[k] * (u[k] - r[k]);
                    for j in 0..=d {
                        jac[(prow, (i * d + j) * n + k)] += w * dr[k] * lv[j];
                    }
                }
            }
        }
        Ok((f, jac))
    }
}

struct PsolProblem<'a> {
    coll: Collocation<'a>,
}

impl Continuable for PsolProblem<'_> {
    fn parameter_slot(&self) -> usize {
        self.coll.period_slot() + 1
    }

    fn weights(&self) -> DVector<f64> {
        let mut w = DVector::from_element(self.coll.size(), 1.0 / (self.coll.nodes() - 1) as f64);
        w[self.coll.period_slot()] = 1.0;
        w[self.coll.period_slot() + 1] = 1.0;
        w
    }

    fn residual(
        &self,
        y: &DVector<f64>,
        previous: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.coll.system(y, previous)
    }
}

/// Initial orbit `x* + amplitude Re(v exp(2 pi i s))` with period `2 pi / omega`
/// on a uniform mesh.
pub fn orbit_from_hopf(hopf: &HopfPoint, amplitude: f64, intervals: usize, degree: usize) -> PeriodicOrbit {
    let mesh = uniform_mesh(intervals);
    let profile = node_times(&mesh, degree)
        .iter()
        .map(|s| {
            let phase = num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s);
            hopf.x
                .iter()
                .zip(&hopf.v)
                .map(|(x, v)| x + amplitude * (v * phase).re)
                .collect()
        })
        .collect();
    PeriodicOrbit {
        mesh,
        degree,
        profile,
        period: hopf.period(),
        params: hopf.params,
        stability: None,
    }
}

/// Corrects an orbit at fixed parameters. The phase condition anchors it to
/// `reference`, which must use the same mesh.
pub fn correct_orbit(
    sys: &dyn DdeSystem,
    orbit: &PeriodicOrbit,
    reference: &PeriodicOrbit,
    settings: &PsolSettings,
) -> Result<PeriodicOrbit> {
    if reference.mesh != orbit.mesh || reference.degree != orbit.degree {
        return Err(Error::DimensionMismatch {
            context: "phase reference mesh",
            expected: orbit.mesh.len(),
            got: reference.mesh.len(),
        });
    }
    let coll = Collocation::new(sys, &orbit.mesh, orbit.degree, orbit.params, ParameterSet::TAU);
    let problem = PsolProblem { coll };
    let y = problem.coll.pack(orbit);
    let constraint = Constraint::Fixed {
        slot: problem.parameter_slot(),
        value: orbit.params.tau,
    };
    let (y, _) = correct(
        &problem,
        &y,
        &problem.coll.pack(reference),
        &constraint,
        settings.tol,
        settings.max_iter,
    )?;
    Ok(problem.coll.unpack(&y))
}

/// Two-point seed of the orbit branch at a Hopf point: the zero-amplitude
/// orbit, then a corrected orbit of amplitude `hopf_amplitude` with the free
/// parameter adjusted.
pub fn setup_psol_branch(
    sys: &dyn DdeSystem,
    hopf: &HopfPoint,
    psol: &PsolSettings,
    settings: BranchSettings,
) -> Result<Branch<PeriodicOrbit>> {
    settings.validate()?;
    let zero = orbit_from_hopf(hopf, 0.0, psol.intervals, psol.degree);
    let guess = orbit_from_hopf(hopf, psol.hopf_amplitude, psol.intervals, psol.degree);
    let coll = Collocation::new(sys, &zero.mesh, psol.degree, hopf.params, settings.parameter);
    let problem = PsolProblem { coll };
    let y0 = problem.coll.pack(&zero);
    let yg = problem.coll.pack(&guess);
    let constraint = Constraint::Hyperplane {
        anchor: yg.clone(),
        direction: &yg - &y0,
    };
    let (y1, _) = correct(&problem, &yg, &yg, &constraint, psol.tol, psol.max_iter)?;
    let mut branch = Branch::new(settings);
    branch.points = vec![zero, problem.coll.unpack(&y1)];
    Ok(branch)
}

/// Appends up to `max_new_points` orbits to a branch of at least two points.
pub fn continue_psol(
    sys: &dyn DdeSystem,
    mut branch: Branch<PeriodicOrbit>,
    max_new_points: usize,
    psol: &PsolSettings,
) -> Result<Branch<PeriodicOrbit>> {
    let len = branch.points.len();
    if len < 2 {
        return Err(Error::DimensionMismatch {
            context: "seed branch points",
            expected: 2,
            got: len,
        });
    }
    let last = &branch.points[len - 1];
    let coll = Collocation::new(sys, &last.mesh, last.degree, last.params, branch.settings.parameter);
    let problem = PsolProblem { coll };
    let a = problem.coll.pack(&branch.points[len - 2]);
    let b = problem.coll.pack(last);
    let mut settings = branch.settings;
    settings.newton_tol = psol.tol;
    settings.max_newton_iter = psol.max_iter;
    settings.easy_iterations = psol.easy_iterations;
    let ext = continuation::extend(&problem, (&a, &b), &settings, max_new_points);
    branch
        .points
        .extend(ext.points.iter().map(|y| problem.coll.unpack(y)));
    branch.stop = Some(ext.stop);
    Ok(branch)
}

/// Corrected orbit at parameter `value`, started from the secant between the
/// two branch points that bracket it.
pub fn orbit_at(
    sys: &dyn DdeSystem,
    branch: &Branch<PeriodicOrbit>,
    value: f64,
    psol: &PsolSettings,
) -> Result<PeriodicOrbit> {
    let idx = branch.settings.parameter;
    let j = branch
        .points
        .windows(2)
        .position(|w| {
            let (a, b) = (w[0].params.get(idx), w[1].params.get(idx));
            a.min(b) <= value && value <= a.max(b) && w[0].mesh == w[1].mesh
        })
        .ok_or_else(|| Error::NoCandidate(format!("no branch segment contains {value}")))?;
    let (a, b) = (&branch.points[j], &branch.points[j + 1]);
    let coll = Collocation::new(sys, &a.mesh, a.degree, a.params, idx);
    let problem = PsolProblem { coll };
    let (ya, yb) = (problem.coll.pack(a), problem.coll.pack(b));
    let span = b.params.get(idx) - a.params.get(idx);
    let theta = if span == 0.0 { 0.0 } else { (value - a.params.get(idx)) / span };
    let guess = &ya + (&yb - &ya) * theta;
    let constraint = Constraint::Fixed {
        slot: problem.parameter_slot(),
        value,
    };
    let (y, _) = correct(&problem, &guess, &ya, &constraint, psol.tol, psol.max_iter)?;
    Ok(problem.coll.unpack(&y))
}

impl Branch<PeriodicOrbit> {
    pub fn parameter_values(&self) -> Vec<f64> {
        let idx = self.settings.parameter;
        self.points.iter().map(|o| o.params.get(idx)).collect()
    }

    /// Maximum of the first state component on each orbit.
    pub fn measure(&self) -> Vec<f64> {
        self.points.iter().map(|o| o.max_component(0)).collect()
    }

    pub fn nunst(&self) -> Option<Vec<usize>> {
        self.points.iter().map(PeriodicOrbit::nunst).collect()
    }

    pub fn to_table(&self) -> Table {
        let annotated = !self.points.is_empty() && self.points.iter().all(|o| o.stability.is_some());
        let mut header = vec![
            ParameterSet::NAMES[self.settings.parameter].to_string(),
            "period".to_string(),
            "max_x1".to_string(),
        ];
        if annotated {
            header.push("nunst".into());
        }
        let mut t = Table::new(header);
        for o in &self.points {
            let mut row = vec![
                fmt_num(o.params.get(self.settings.parameter)),
                fmt_num(o.period),
                fmt_num(o.max_component(0)),
            ];
            if annotated {
                row.push(o.nunst().unwrap_or(0).to_string());
            }
            t.push(row);
        }
        t
    }
}
