//! System abstraction for DDEs with discrete delays, and the built-in
//! harvested predator-prey model.
//!
//! A system maps the current state and a list of delayed states to the
//! time derivative. Jacobians can be supplied analytically; when a system
//! does not provide them, central finite differences are used instead.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model rates plus the delay.
///
/// Indices follow the order `r, a, b, c, d, h, k, tau`, so the delay is
/// parameter 7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterSet {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub h: f64,
    pub k: f64,
    pub tau: f64,
}

impl ParameterSet {
    pub const COUNT: usize = 8;
    pub const TAU: usize = 7;
    pub const NAMES: [&'static str; 8] = ["r", "a", "b", "c", "d", "h", "k", "tau"];

    /// Reference rates of the harvested predator-prey study, delay zero.
    pub fn reference() -> Self {
        ParameterSet {
            r: 3.5,
            a: 0.04,
            b: 1.0,
            c: 0.05,
            d: 0.3,
            h: 0.02,
            k: 0.01,
            tau: 0.0,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn get(&self, index: usize) -> f64 {
        match index {
            0 => self.r,
            1 => self.a,
            2 => self.b,
            3 => self.c,
            4 => self.d,
            5 => self.h,
            6 => self.k,
            7 => self.tau,
            _ => panic!("parameter index {index} out of range"),
        }
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let slot = match index {
            0 => &mut self.r,
            1 => &mut self.a,
            2 => &mut self.b,
            3 => &mut self.c,
            4 => &mut self.d,
            5 => &mut self.h,
            6 => &mut self.k,
            7 => &mut self.tau,
            _ => panic!("parameter index {index} out of range"),
        };
        *slot = value;
    }

    pub fn with(mut self, index: usize, value: f64) -> Self {
        self.set(index, value);
        self
    }

    pub fn index_of(name: &str) -> Result<usize> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Checks positivity of the rates and non-negativity of the delay.
    pub fn validate(&self) -> Result<()> {
        for (i, name) in Self::NAMES.iter().enumerate().take(7) {
            let v = self.get(i);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be a positive finite rate, got {v}"
                )));
            }
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "tau must be a non-negative finite delay, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::reference()
    }
}

/// A delay differential equation `x'(t) = f(x(t), x(t - tau_1), ..., x(t - tau_m); p)`.
///
/// Implementations must be immutable after construction; every method is a
/// pure function of its arguments.
pub trait DdeSystem: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    fn delay_count(&self) -> usize;

    /// Writes `f(x, xdel, p)` into `out`. Slice lengths are checked by callers.
    fn rhs(&self, x: &[f64], xdel: &[&[f64]], p: &ParameterSet, out: &mut [f64]);

    /// Delay values `tau_j(p)`, all non-negative.
    fn delays(&self, p: &ParameterSet) -> Vec<f64>;

    /// Analytic `df/dx`, if available.
    fn state_jacobian(
        &self,
        _x: &[f64],
        _xdel: &[&[f64]],
        _p: &ParameterSet,
    ) -> Option<DMatrix<f64>> {
        None
    }

    /// Analytic `df/dx(t - tau_j)`, if available.
    fn delayed_jacobian(
        &self,
        _x: &[f64],
        _xdel: &[&[f64]],
        _p: &ParameterSet,
        _j: usize,
    ) -> Option<DMatrix<f64>> {
        None
    }
}

/// Linearization of a system at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobians {
    /// Derivative with respect to the current state.
    pub a: DMatrix<f64>,
    /// Derivatives with respect to each delayed state.
    pub b: Vec<DMatrix<f64>>,
}

impl Jacobians {
    pub fn dimension(&self) -> usize {
        self.a.nrows()
    }

    /// `A + sum_j B_j`, the Jacobian of the steady-state equations.
    pub fn combined(&self) -> DMatrix<f64> {
        self.b.iter().fold(self.a.clone(), |acc, bj| acc + bj)
    }
}

fn check_args(sys: &dyn DdeSystem, x: &[f64], xdel: &[&[f64]]) -> Result<()> {
    let n = sys.dimension();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: n,
            got: x.len(),
        });
    }
    if xdel.len() != sys.delay_count() {
        return Err(Error::DimensionMismatch {
            context: "delayed state count",
            expected: sys.delay_count(),
            got: xdel.len(),
        });
    }
    if let Some(bad) = xdel.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            context: "delayed state",
            expected: n,
            got: bad.len(),
        });
    }
    Ok(())
}

/// Evaluates the right-hand side with dimension checks.
pub fn eval_rhs(
    sys: &dyn DdeSystem,
    x: &[f64],
    xdel: &[&[f64]],
    p: &ParameterSet,
) -> Result<DVector<f64>> {
    check_args(sys, x, xdel)?;
    let mut out = DVector::zeros(sys.dimension());
    sys.rhs(x, xdel, p, out.as_mut_slice());
    Ok(out)
}

/// Evaluates the right-hand side at a steady state (all delayed states equal `x`).
pub fn steady_rhs(sys: &dyn DdeSystem, x: &[f64], p: &ParameterSet) -> Result<DVector<f64>> {
    let xdel = vec![x; sys.delay_count()];
    eval_rhs(sys, x, &xdel, p)
}

fn fd_step(v: f64) -> f64 {
    (1e-8 * v.abs()).max(1e-6)
}

/// Central-difference Jacobians, ignoring any analytic providers.
pub fn fd_jacobians(
    sys: &dyn DdeSystem,
    x: &[f64],
    xdel: &[&[f64]],
    p: &ParameterSet,
) -> Result<Jacobians> {
    check_args(sys, x, xdel)?;
    let n = sys.dimension();
    let m = sys.delay_count();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];

    let mut a = DMatrix::zeros(n, n);
    let mut xs = x.to_vec();
    for col in 0..n {
        let h = fd_step(x[col]);
        xs[col] = x[col] + h;
        sys.rhs(&xs, xdel, p, &mut fp);
        xs[col] = x[col] - h;
        sys.rhs(&xs, xdel, p, &mut fm);
        xs[col] = x[col];
        for row in 0..n {
            a[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }

    let mut b = Vec::with_capacity(m);
    let mut owned: Vec<Vec<f64>> = xdel.iter().map(|v| v.to_vec()).collect();
    for j in 0..m {
        let mut bj = DMatrix::zeros(n, n);
        for col in 0..n {
            let base = owned[j][col];
            let h = fd_step(base);
            owned[j][col] = base + h;
            {
                let refs: Vec<&[f64]> = owned.iter().map(|v| v.as_slice()).collect();
                sys.rhs(x, &refs, p, &mut fp);
            }
            owned[j][col] = base - h;
            {
                let refs: Vec<&[f64]> = owned.iter().map(|v| v.as_slice()).collect();
                sys.rhs(x, &refs, p, &mut fm);
            }
            owned[j][col] = base;
            for row in 0..n {
                bj[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        b.push(bj);
    }
    Ok(Jacobians { a, b })
}

/// Jacobians with respect to the current and each delayed state. Analytic
/// providers are used when the system has them.
pub fn jacobians(
    sys: &dyn DdeSystem,
    x: &[f64],
    xdel: &[&[f64]],
    p: &ParameterSet,
) -> Result<Jacobians> {
    check_args(sys, x, xdel)?;
    let analytic_a = sys.state_jacobian(x, xdel, p);
    let analytic_b: Option<Vec<DMatrix<f64>>> = (0..sys.delay_count())
        .map(|j| sys.delayed_jacobian(x, xdel, p, j))
        .collect();
    match (analytic_a, analytic_b) {
        (Some(a), Some(b)) => Ok(Jacobians { a, b }),
        (a, b) => {
            let fd = fd_jacobians(sys, x, xdel, p)?;
            Ok(Jacobians {
                a: a.unwrap_or(fd.a),
                b: b.unwrap_or(fd.b),
            })
        }
    }
}

/// Jacobians at a steady state `x` (all delayed arguments equal to `x`).
pub fn steady_jacobians(sys: &dyn DdeSystem, x: &[f64], p: &ParameterSet) -> Result<Jacobians> {
    let xdel = vec![x; sys.delay_count()];
    jacobians(sys, x, &xdel, p)
}

/// Central-difference derivative of the right-hand side with respect to
/// parameter `index`, holding all state arguments fixed.
pub fn parameter_derivative(
    sys: &dyn DdeSystem,
    x: &[f64],
    xdel: &[&[f64]],
    p: &ParameterSet,
    index: usize,
) -> Result<DVector<f64>> {
    check_args(sys, x, xdel)?;
    let n = sys.dimension();
    let base = p.get(index);
    let h = fd_step(base);
    let mut fp = DVector::zeros(n);
    let mut fm = DVector::zeros(n);
    sys.rhs(x, xdel, &p.with(index, base + h), fp.as_mut_slice());
    sys.rhs(x, xdel, &p.with(index, base - h), fm.as_mut_slice());
    Ok((fp - fm) / (2.0 * h))
}

/// Derivative of each delay with respect to parameter `index`.
pub fn delay_derivative(sys: &dyn DdeSystem, p: &ParameterSet, index: usize) -> Vec<f64> {
    let base = p.get(index);
    let h = fd_step(base);
    let up = sys.delays(&p.with(index, base + h));
    let down = sys.delays(&p.with(index, base - h));
    up.iter()
        .zip(&down)
        .map(|(u, d)| (u - d) / (2.0 * h))
        .collect()
}

/// Harvested predator-prey model with a delayed self-limitation term:
///
/// ```text
/// x' = r x - a x x(t - tau) - b x y - h
/// y' = c x y - d y - k
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct HarvestedPredatorPrey;

impl HarvestedPredatorPrey {
    pub const NAME: &'static str = "harvested-predator-prey";
}

impl DdeSystem for HarvestedPredatorPrey {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dimension(&self) -> usize {
        2
    }

    fn delay_count(&self) -> usize {
        1
    }

    fn rhs(&self, x: &[f64], xdel: &[&[f64]], p: &ParameterSet, out: &mut [f64]) {
        let (prey, pred) = (x[0], x[1]);
        let prey_lag = xdel[0][0];
        out[0] = p.r * prey - p.a * prey * prey_lag - p.b * prey * pred - p.h;
        out[1] = p.c * prey * pred - p.d * pred - p.k;
    }

    fn delays(&self, p: &ParameterSet) -> Vec<f64> {
        vec![p.tau]
    }

    fn state_jacobian(
        &self,
        x: &[f64],
        xdel: &[&[f64]],
        p: &ParameterSet,
    ) -> Option<DMatrix<f64>> {
        let (prey, pred) = (x[0], x[1]);
        let prey_lag = xdel[0][0];
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[
                p.r - p.a * prey_lag - p.b * pred,
                -p.b * prey,
                p.c * pred,
                p.c * prey - p.d,
            ],
        ))
    }

    fn delayed_jacobian(
        &self,
        x: &[f64],
        _xdel: &[&[f64]],
        p: &ParameterSet,
        _j: usize,
    ) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(2, 2, &[-p.a * x[0], 0.0, 0.0, 0.0]))
    }
}

/// Names accepted by [`lookup_model`].
pub const MODEL_NAMES: &[&str] = &[HarvestedPredatorPrey::NAME];

/// Looks up a built-in system by name.
pub fn lookup_model(name: &str) -> Result<Arc<dyn DdeSystem>> {
    match name {
        HarvestedPredatorPrey::NAME => Ok(Arc::new(HarvestedPredatorPrey)),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}
