//! Secant-predictor / orthogonal-hyperplane-corrector continuation shared by
//! the equilibrium and periodic-orbit branches.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step control and corrector settings of a one-parameter branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSettings {
    /// Index into [`crate::ParameterSet`] of the continuation parameter.
    pub parameter: usize,
    pub min_bound: f64,
    pub max_bound: f64,
    /// Largest allowed change of the continuation parameter between points.
    pub max_step: f64,
    /// Initial step, also the parameter offset of the second seed point.
    pub step: f64,
    pub min_step: f64,
    /// Upper cap on the secant step in the weighted norm.
    pub max_arclength: f64,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Step growth after an easy corrector convergence.
    pub grow_factor: f64,
    /// Corrector iterations counted as "easy".
    pub easy_iterations: usize,
}

impl BranchSettings {
    pub fn new(parameter: usize, min_bound: f64, max_bound: f64, max_step: f64, step: f64) -> Self {
        BranchSettings {
            parameter,
            min_bound,
            max_bound,
            max_step,
            step,
            min_step: 1e-8,
            max_arclength: f64::MAX,
            newton_tol: 1e-10,
            max_newton_iter: 20,
            grow_factor: 2.0,
            easy_iterations: 3,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min_bound - 1e-12 && value <= self.max_bound + 1e-12
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| {
            Err(Error::Config {
                path: path.to_string(),
                message,
            })
        };
        if !(self.max_bound >= self.min_bound) {
            return bad(
                "max_bound",
                format!(
                    "max_bound {} is smaller than min_bound {}",
                    self.max_bound, self.min_bound
                ),
            );
        }
        if !(self.max_step > 0.0) {
            return bad("max_step", format!("must be positive, got {}", self.max_step));
        }
        if !(self.step > 0.0) {
            return bad("step", format!("must be positive, got {}", self.step));
        }
        if self.parameter >= crate::ParameterSet::COUNT {
            return bad(
                "parameter",
                format!("index {} out of range", self.parameter),
            );
        }
        Ok(())
    }
}

/// Why a continuation run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxPoints,
    BoundReached,
    CorrectorFailure,
}

/// A problem `F(y) = 0` with one more unknown than equations; the
/// continuation parameter is component `parameter_slot()` of `y`.
pub trait Continuable {
    fn parameter_slot(&self) -> usize;

    /// Weights of the inner product used for secants and step lengths.
    fn weights(&self) -> DVector<f64>;

    /// Residual and Jacobian at `y`. `previous` is the last accepted point,
    /// available for phase conditions.
    fn residual(&self, y: &DVector<f64>, previous: &DVector<f64>)
        -> Result<(DVector<f64>, DMatrix<f64>)>;
}

/// Extra scalar equation appended to the corrector.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `<W (y - anchor), direction> = 0`
    Hyperplane {
        anchor: DVector<f64>,
        direction: DVector<f64>,
    },
    /// `y[slot] = value`
    Fixed { slot: usize, value: f64 },
}

impl Constraint {
    fn eval(&self, y: &DVector<f64>, weights: &DVector<f64>) -> (f64, DVector<f64>) {
        match self {
            Constraint::Hyperplane { anchor, direction } => {
                let row = direction.component_mul(weights);
                ((y - anchor).dot(&row), row)
            }
            Constraint::Fixed { slot, value } => {
                let mut row = DVector::zeros(y.len());
                row[*slot] = 1.0;
                (y[*slot] - value, row)
            }
        }
    }
}

/// Newton iteration on `F(y) = 0` augmented by `constraint`.
/// Returns the converged vector and the number of iterations used.
pub fn correct<P: Continuable + ?Sized>(
    problem: &P,
    start: &DVector<f64>,
    previous: &DVector<f64>,
    constraint: &Constraint,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize)> {
    let weights = problem.weights();
    let mut y = start.clone();
    let n = y.len();
    let mut last_norm = f64::INFINITY;
    for iter in 0..=max_iter {
        let (f, jac) = problem.residual(&y, previous)?;
        let (g, row) = constraint.eval(&y, &weights);
        let norm = f.amax().max(g.abs());
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: norm,
            });
        }
        if norm <= tol {
            return Ok((y, iter));
        }
        if iter == max_iter {
            last_norm = norm;
            break;
        }
        let mut mat = DMatrix::zeros(n, n);
        mat.rows_mut(0, n - 1).copy_from(&jac);
        mat.row_mut(n - 1).copy_from(&row.transpose());
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, n - 1).copy_from(&(-&f));
        rhs[n - 1] = -g;
        let delta = mat
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularJacobian("continuation corrector"))?;
        y += delta;
        last_norm = norm;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last_norm,
    })
}

fn weighted_norm(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    v.component_mul(v).dot(w).sqrt()
}

/// Outcome of [`extend`].
#[derive(Debug, Clone)]
pub struct Extension {
    pub points: Vec<DVector<f64>>,
    pub stop: StopReason,
    /// Secant step length in use when the run stopped.
    pub final_step: f64,
}

/// Extends a branch given by its last two points by up to `max_new` points.
pub fn extend<P: Continuable + ?Sized>(
    problem: &P,
    last_two: (&DVector<f64>, &DVector<f64>),
    settings: &BranchSettings,
    max_new: usize,
) -> Extension {
    let slot = problem.parameter_slot();
    let weights = problem.weights();
    let (mut prev, mut curr) = (last_two.0.clone(), last_two.1.clone());
    // the seed pair counts as an easy step
    let mut step = (weighted_norm(&(&curr - &prev), &weights) * settings.grow_factor)
        .min(settings.max_arclength)
        .max(settings.min_step);
    let mut points = Vec::new();
    let mut stop = StopReason::MaxPoints;

    'outer: while points.len() < max_new {
        let secant = &curr - &prev;
        let len = weighted_norm(&secant, &weights);
        if len == 0.0 {
            stop = StopReason::CorrectorFailure;
            break;
        }
        let dir = secant / len;
        let param_rate = dir[slot];
        let at_bound = |value: f64| {
            (param_rate > 0.0 && value >= settings.max_bound - 1e-12)
                || (param_rate < 0.0 && value <= settings.min_bound + 1e-12)
        };
        if at_bound(curr[slot]) {
            stop = StopReason::BoundReached;
            break;
        }

        loop {
            if param_rate.abs() * step > settings.max_step {
                step = settings.max_step / param_rate.abs();
            }
            let predicted = &curr + &dir * step;
            let target = predicted[slot];
            let (constraint, hits_bound) = if target > settings.max_bound {
                (
                    Constraint::Fixed {
                        slot,
                        value: settings.max_bound,
                    },
                    true,
                )
            } else if target < settings.min_bound {
                (
                    Constraint::Fixed {
                        slot,
                        value: settings.min_bound,
                    },
                    true,
                )
            } else {
                (
                    Constraint::Hyperplane {
                        anchor: predicted.clone(),
                        direction: dir.clone(),
                    },
                    false,
                )
            };
            let start = if hits_bound {
                let frac = match constraint {
                    Constraint::Fixed { value, .. } => (value - curr[slot]) / (target - curr[slot]),
                    _ => 1.0,
                };
                &curr + &dir * (step * frac)
            } else {
                predicted
            };
            let result = correct(
                problem,
                &start,
                &curr,
                &constraint,
                settings.newton_tol,
                settings.max_newton_iter,
            );
            match result {
                Ok((y, iters))
                    if (y[slot] - curr[slot]).abs() <= settings.max_step * (1.0 + 1e-9)
                        && settings.contains(y[slot])
                        && (&y - &curr).dot(&dir.component_mul(&weights)) > 0.0 =>
                {
                    prev = std::mem::replace(&mut curr, y.clone());
                    points.push(y);
                    if iters <= settings.easy_iterations {
                        step = (step * settings.grow_factor).min(settings.max_arclength);
                    }
                    continue 'outer;
                }
                Ok((y, _)) if (y[slot] - curr[slot]).abs() > settings.max_step => {
                    // overshoot of the parameter cap: shrink just enough
                    step *= 0.98 * settings.max_step / (y[slot] - curr[slot]).abs();
                }
                _ => {
                    step *= 0.5;
                    if step < settings.min_step {
                        stop = StopReason::CorrectorFailure;
                        break 'outer;
                    }
                }
            }
        }
    }
    Extension {
        points,
        stop,
        final_step: step,
    }
}
