//! Equilibria: Newton solves and one-parameter branch continuation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{self, BranchSettings, Continuable, StopReason};
use crate::error::{Error, Result};
use crate::io::{fmt_num, Table};
use crate::model::{parameter_derivative, steady_jacobians, steady_rhs, DdeSystem, ParameterSet};
use crate::spectrum::{equilibrium_roots, CharacteristicRootSet, SpectrumSettings};

/// A steady state with optional spectrum annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub x: Vec<f64>,
    pub params: ParameterSet,
    pub stability: Option<CharacteristicRootSet>,
}

impl EquilibriumPoint {
    pub fn nunst(&self) -> Option<usize> {
        self.stability.as_ref().map(|s| s.nunst)
    }
}

/// An ordered continuation branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch<P> {
    pub points: Vec<P>,
    pub settings: BranchSettings,
    /// Why the last continuation run stopped, if one was run.
    pub stop: Option<StopReason>,
}

impl<P> Branch<P> {
    pub fn new(settings: BranchSettings) -> Self {
        Branch {
            points: Vec::new(),
            settings,
            stop: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when the last continuation stopped because the corrector failed.
    pub fn failed(&self) -> bool {
        self.stop == Some(StopReason::CorrectorFailure)
    }
}

impl Branch<EquilibriumPoint> {
    pub fn parameter_values(&self) -> Vec<f64> {
        let idx = self.settings.parameter;
        self.points.iter().map(|pt| pt.params.get(idx)).collect()
    }

    /// Unstable-root counts, `None` if any point lacks an annotation.
    pub fn nunst(&self) -> Option<Vec<usize>> {
        self.points.iter().map(EquilibriumPoint::nunst).collect()
    }

    /// One row per point: parameter, state components, and nunst when annotated.
    pub fn to_table(&self) -> Table {
        let n = self.points.first().map_or(0, |p| p.x.len());
        let annotated = self.points.iter().all(|p| p.stability.is_some()) && !self.points.is_empty();
        let mut header = vec![ParameterSet::NAMES[self.settings.parameter].to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        if annotated {
            header.push("nunst".into());
        }
        let mut table = Table::new(header);
        for pt in &self.points {
            let mut row = vec![fmt_num(pt.params.get(self.settings.parameter))];
            row.extend(pt.x.iter().map(|v| fmt_num(*v)));
            if annotated {
                row.push(pt.nunst().unwrap_or(0).to_string());
            }
            table.push(row);
        }
        table
    }
}

/// Newton solve of `f(x, x, ..., x; p) = 0` starting from `x0`.
pub fn solve_equilibrium(
    sys: &dyn DdeSystem,
    p: &ParameterSet,
    x0: &[f64],
    tol: f64,
) -> Result<EquilibriumPoint> {
    solve_equilibrium_with(sys, p, x0, tol, 20)
}

pub fn solve_equilibrium_with(
    sys: &dyn DdeSystem,
    p: &ParameterSet,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumPoint> {
    let mut x = DVector::from_column_slice(x0);
    let mut residual = f64::INFINITY;
    for _ in 0..=max_iter {
        let f = steady_rhs(sys, x.as_slice(), p)?;
        residual = f.amax();
        if residual <= tol {
            return Ok(EquilibriumPoint {
                x: x.as_slice().to_vec(),
                params: *p,
                stability: None,
            });
        }
        if !residual.is_finite() {
            break;
        }
        let jac = steady_jacobians(sys, x.as_slice(), p)?.combined();
        let dx = jac
            .lu()
            .solve(&(-f))
            .ok_or(Error::SingularJacobian("equilibrium Newton"))?;
        x += dx;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

struct EquilibriumProblem<'a> {
    sys: &'a dyn DdeSystem,
    template: ParameterSet,
    parameter: usize,
}

impl EquilibriumProblem<'_> {
    fn n(&self) -> usize {
        self.sys.dimension()
    }

    fn params(&self, y: &DVector<f64>) -> ParameterSet {
        self.template.with(self.parameter, y[self.n()])
    }

    fn to_vector(&self, pt: &EquilibriumPoint) -> DVector<f64> {
        let mut y = DVector::zeros(self.n() + 1);
        y.rows_mut(0, self.n()).copy_from_slice(&pt.x);
        y[self.n()] = pt.params.get(self.parameter);
        y
    }

    fn to_point(&self, y: &DVector<f64>) -> EquilibriumPoint {
        EquilibriumPoint {
            x: y.rows(0, self.n()).iter().copied().collect(),
            params: self.params(y),
            stability: None,
        }
    }
}

impl Continuable for EquilibriumProblem<'_> {
    fn parameter_slot(&self) -> usize {
        self.n()
    }

    fn weights(&self) -> DVector<f64> {
        DVector::from_element(self.n() + 1, 1.0)
    }

    fn residual(
        &self,
        y: &DVector<f64>,
        _previous: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n();
        let p = self.params(y);
        let x: Vec<f64> = y.rows(0, n).iter().copied().collect();
        let f = steady_rhs(self.sys, &x, &p)?;
        let mut jac = DMatrix::zeros(n, n + 1);
        jac.view_mut((0, 0), (n, n))
            .copy_from(&steady_jacobians(self.sys, &x, &p)?.combined());
        let xdel = vec![x.as_slice(); self.sys.delay_count()];
        let dp = parameter_derivative(self.sys, &x, &xdel, &p, self.parameter)?;
        jac.column_mut(n).copy_from(&dp);
        Ok((f, jac))
    }
}

/// Two-point seed: the corrected equilibrium at `p` and at `p + step` in the
/// continuation parameter.
pub fn setup_equilibrium_branch(
    sys: &dyn DdeSystem,
    p: &ParameterSet,
    x0: &[f64],
    settings: BranchSettings,
) -> Result<Branch<EquilibriumPoint>> {
    settings.validate()?;
    let first = solve_equilibrium_with(sys, p, x0, settings.newton_tol, settings.max_newton_iter)?;
    let idx = settings.parameter;
    let q = p.with(idx, p.get(idx) + settings.step);
    let second = solve_equilibrium_with(sys, &q, &first.x, settings.newton_tol, settings.max_newton_iter)?;
    let mut branch = Branch::new(settings);
    branch.points = vec![first, second];
    Ok(branch)
}

/// Appends up to `max_new_points` points to a branch with at least two points.
pub fn continue_equilibria(
    sys: &dyn DdeSystem,
    mut branch: Branch<EquilibriumPoint>,
    max_new_points: usize,
) -> Result<Branch<EquilibriumPoint>> {
    let len = branch.points.len();
    if len < 2 {
        return Err(Error::DimensionMismatch {
            context: "seed branch points",
            expected: 2,
            got: len,
        });
    }
    let problem = EquilibriumProblem {
        sys,
        template: branch.points[len - 1].params,
        parameter: branch.settings.parameter,
    };
    let a = problem.to_vector(&branch.points[len - 2]);
    let b = problem.to_vector(&branch.points[len - 1]);
    let ext = continuation::extend(&problem, (&a, &b), &branch.settings, max_new_points);
    branch
        .points
        .extend(ext.points.iter().map(|y| problem.to_point(y)));
    branch.stop = Some(ext.stop);
    Ok(branch)
}

/// Attaches characteristic roots to every point (in parallel).
pub fn annotate_stability(
    sys: &dyn DdeSystem,
    branch: &mut Branch<EquilibriumPoint>,
    settings: &SpectrumSettings,
) -> Result<()> {
    let sets: Result<Vec<CharacteristicRootSet>> = branch
        .points
        .par_iter()
        .map(|pt| equilibrium_roots(sys, &pt.x, &pt.params, settings))
        .collect();
    for (pt, set) in branch.points.iter_mut().zip(sets?) {
        pt.stability = Some(set);
    }
    Ok(())
}
