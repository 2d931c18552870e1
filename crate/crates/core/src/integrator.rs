//! Fixed-step RK4 integration of delay equations with cubic Hermite
//! interpolation of the computed solution for delayed arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_num, Table};
use crate::model::{DdeSystem, ParameterSet};

/// Norm above which a run is declared divergent.
pub const OVERFLOW: f64 = 1e10;

/// Default step: `min(tau_min / 40, 0.01)`, or 0.01 without positive delays.
pub fn default_step(delays: &[f64]) -> f64 {
    delays
        .iter()
        .copied()
        .filter(|t| *t > 0.0)
        .fold(0.01, |acc, t| acc.min(t / 40.0))
}

/// Solution on a uniform grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    derivatives: Vec<Vec<f64>>,
    /// Constant state assumed for `t <= 0`.
    pub history: Vec<f64>,
}

impl Trajectory {
    /// State at `t`, from the history for `t <= 0` and by Hermite
    /// interpolation on the grid otherwise.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            return self.history.clone();
        }
        let k = ((t / self.dt).floor() as usize).min(self.times.len() - 1);
        let s = (t - self.times[k]) / self.dt;
        if s <= 1e-12 || k + 1 >= self.derivatives.len() {
            // grid point, possibly the newest one whose derivative is pending
            return self.states[k].clone();
        }
        hermite(
            self.dt,
            s,
            &self.states[k],
            &self.derivatives[k],
            &self.states[k + 1],
            &self.derivatives[k + 1],
        )
    }

    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[index]).collect()
    }

    /// Table of every `stride`-th sample.
    pub fn to_table(&self, stride: usize) -> Table {
        let n = self.history.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        let mut table = Table::new(header);
        for (t, x) in self.times.iter().zip(&self.states).step_by(stride.max(1)) {
            let mut row = vec![fmt_num(*t)];
            row.extend(x.iter().map(|v| fmt_num(*v)));
            table.push(row);
        }
        table
    }
}

fn hermite(dt: f64, s: f64, x0: &[f64], d0: &[f64], x1: &[f64], d1: &[f64]) -> Vec<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..x0.len())
        .map(|i| h00 * x0[i] + h10 * dt * d0[i] + h01 * x1[i] + h11 * dt * d1[i])
        .collect()
}

/// Integrates from a constant history `history` up to `t_end` with step `dt`.
/// Positive delays must be at least `dt`; zero delays use the current state.
pub fn integrate(
    sys: &dyn DdeSystem,
    p: &ParameterSet,
    history: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = sys.dimension();
    if history.len() != n {
        return Err(Error::DimensionMismatch {
            context: "history state",
            expected: n,
            got: history.len(),
        });
    }
    let delays = sys.delays(p);
    if !(dt > 0.0) || delays.iter().any(|&tau| tau > 0.0 && tau < dt) || delays.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidParameters(format!(
            "step {dt} must be positive and not exceed any positive delay {delays:?}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        derivatives: Vec::with_capacity(steps + 1),
        history: history.to_vec(),
    };
    traj.times.push(0.0);
    traj.states.push(history.to_vec());

    let rhs = |traj: &Trajectory, t: f64, x: &[f64]| -> Vec<f64> {
        let lagged: Vec<Vec<f64>> = delays
            .iter()
            .map(|&tau| if tau == 0.0 { x.to_vec() } else { traj.state_at(t - tau) })
            .collect();
        let refs: Vec<&[f64]> = lagged.iter().map(Vec::as_slice).collect();
        let mut out = vec![0.0; n];
        sys.rhs(x, &refs, p, &mut out);
        out
    };
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };

    for step in 0..steps {
        let t = step as f64 * dt;
        let x = traj.states[step].clone();
        // lookups into the newest interval need this derivative
        let k1 = rhs(&traj, t, &x);
        traj.derivatives.push(k1.clone());
        let k2 = rhs(&traj, t + 0.5 * dt, &axpy(&x, 0.5 * dt, &k1));
        let k3 = rhs(&traj, t + 0.5 * dt, &axpy(&x, 0.5 * dt, &k2));
        let k4 = rhs(&traj, t + dt, &axpy(&x, dt, &k3));
        let next: Vec<f64> = (0..n)
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let norm = next.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if !(norm < OVERFLOW) {
            return Err(Error::Divergence { time: t + dt, norm });
        }
        traj.times.push((step + 1) as f64 * dt);
        traj.states.push(next);
    }
    let t = steps as f64 * dt;
    let x = traj.states[steps].clone();
    let last = rhs(&traj, t, &x);
    traj.derivatives.push(last);
    Ok(traj)
}

/// Peaks of the first component after a transient and their classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorSummary {
    /// `(time, height)` of each local maximum after the transient.
    pub peaks: Vec<(f64, f64)>,
    /// Representative heights of the distinct peak clusters, in order of first appearance.
    pub levels: Vec<f64>,
    /// Number of distinct peak heights; 0 for a trajectory without peaks.
    pub multiplicity: usize,
    /// Time for the peak pattern to repeat.
    pub period: Option<f64>,
}

impl AttractorSummary {
    pub fn to_text(&self) -> String {
        let mut s = format!("multiplicity {}\n", self.multiplicity);
        match self.period {
            Some(t) => s.push_str(&format!("period {}\n", fmt_num(t))),
            None => s.push_str("period none\n"),
        }
        for level in &self.levels {
            s.push_str(&format!("peak {}\n", fmt_num(*level)));
        }
        s
    }
}

/// Local maxima of component 0 on the last `1 - transient_cut` fraction of
/// the run, clustered by relative height tolerance `cluster_tol`.
pub fn attractor_summary(traj: &Trajectory, transient_cut: f64, cluster_tol: f64) -> AttractorSummary {
    let x = traj.component(0);
    let start = ((x.len() as f64 * transient_cut) as usize).max(1);
    let mut peaks = Vec::new();
    for i in start..x.len().saturating_sub(1) {
        if x[i - 1] < x[i] && x[i] >= x[i + 1] {
            // parabola through the three samples
            let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let height = b - 0.25 * (a - c) * shift;
            peaks.push((traj.times[i] + shift * traj.dt, height));
        }
    }
    let mut levels: Vec<f64> = Vec::new();
    for &(_, h) in &peaks {
        if !levels
            .iter()
            .any(|l| (h - l).abs() <= cluster_tol * l.abs().max(f64::MIN_POSITIVE))
        {
            levels.push(h);
        }
    }
    let multiplicity = levels.len();
    let period = (multiplicity > 0 && peaks.len() > multiplicity).then(|| {
        let spans: Vec<f64> = peaks
            .windows(multiplicity + 1)
            .map(|w| w[multiplicity].0 - w[0].0)
            .collect();
        spans.iter().sum::<f64>() / spans.len() as f64
    });
    AttractorSummary {
        peaks,
        levels,
        multiplicity,
        period,
    }
}
