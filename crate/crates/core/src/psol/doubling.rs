//! Period-doubling points and switching to the doubled-period branch.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::floquet::{floquet, monodromy};
use super::{correct, Collocation, Constraint, PeriodicOrbit, PsolProblem, PsolSettings};
use crate::continuation::Continuable;
use crate::error::{Error, Result};
use crate::model::DdeSystem;
use crate::steady::Branch;

/// A located period-doubling point on a branch of orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodDoubling {
    pub orbit: PeriodicOrbit,
    /// Real multiplier at the located point, close to -1.
    pub multiplier: f64,
    /// Critical Floquet mode at the orbit's nodes, max-norm 1.
    pub mode: Vec<Vec<f64>>,
}

impl PeriodDoubling {
    pub fn parameter_value(&self, index: usize) -> f64 {
        self.orbit.params.get(index)
    }
}

/// Real part of the flip candidate multiplier.
fn flip_multiplier(sys: &dyn DdeSystem, orbit: &PeriodicOrbit, settings: &PsolSettings) -> Result<f64> {
    floquet(sys, orbit, settings)?
        .flip_candidate()
        .map(|z| z.re)
        .ok_or(Error::NotAPeriodDoubling { closest: None })
}

/// Refines the doubling between orbits `index` and `index + 1` by regula
/// falsi on `mu + 1` along the secant, until the parameter is known to 1e-8.
pub fn locate_period_doubling(
    sys: &dyn DdeSystem,
    branch: &Branch<PeriodicOrbit>,
    index: usize,
    settings: &PsolSettings,
) -> Result<PeriodDoubling> {
    let (a, b) = match (branch.points.get(index), branch.points.get(index + 1)) {
        (Some(a), Some(b)) if a.mesh == b.mesh => (a, b),
        _ => {
            return Err(Error::NoCandidate(format!(
                "no pair of orbits with a common mesh at index {index}"
            )))
        }
    };
    let coll = Collocation::new(sys, &a.mesh, a.degree, a.params, branch.settings.parameter);
    let problem = PsolProblem { coll };
    let slot = problem.parameter_slot();
    let ya = problem.coll.pack(a);
    let yb = problem.coll.pack(b);
    let secant = &yb - &ya;
    let orbit_at = |theta: f64| -> Result<PeriodicOrbit> {
        let guess = &ya + &secant * theta;
        let constraint = Constraint::Hyperplane {
            anchor: guess.clone(),
            direction: secant.clone(),
        };
        let (y, _) = correct(&problem, &guess, &ya, &constraint, settings.tol, settings.max_iter)?;
        Ok(problem.coll.unpack(&y))
    };

    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut glo, mut ghi) = (
        flip_multiplier(sys, a, settings)? + 1.0,
        flip_multiplier(sys, b, settings)? + 1.0,
    );
    if glo * ghi > 0.0 {
        return Err(Error::NotAPeriodDoubling {
            closest: Some(if glo.abs() < ghi.abs() { glo } else { ghi } - 1.0),
        });
    }
    let (mut best, mut gbest) = if glo.abs() < ghi.abs() {
        (a.clone(), glo)
    } else {
        (b.clone(), ghi)
    };
    let mut side = 0i8;
    let mut plo = ya[slot];
    let mut phi = yb[slot];
    for _ in 0..60 {
        if (phi - plo).abs() < 1e-8 || gbest.abs() < 1e-13 {
            break;
        }
        // Illinois variant of regula falsi
        let theta = (lo * ghi - hi * glo) / (ghi - glo);
        let orbit = orbit_at(theta)?;
        let g = flip_multiplier(sys, &orbit, settings)? + 1.0;
        let p = orbit.params.get(branch.settings.parameter);
        if g.abs() < gbest.abs() {
            best = orbit;
            gbest = g;
        }
        if g * ghi < 0.0 {
            lo = theta;
            glo = g;
            plo = p;
            if side == -1 {
                ghi /= 2.0;
            }
            side = -1;
        } else {
            hi = theta;
            ghi = g;
            phi = p;
            if side == 1 {
                glo /= 2.0;
            }
            side = 1;
        }
    }
    let critical = floquet(sys, &best, settings)?.flip_candidate();
    let multiplier = match critical {
        Some(z) if z.im.abs() <= 1e-6 && (z.re + 1.0).abs() <= 1e-4 => z.re,
        other => {
            return Err(Error::NotAPeriodDoubling {
                closest: other.map(|z| z.re),
            })
        }
    };
    let mode = critical_mode(sys, &best, multiplier)?;
    Ok(PeriodDoubling {
        orbit: best,
        multiplier,
        mode,
    })
}

/// Real Floquet mode for the multiplier `mu`, sampled at the orbit nodes of
/// the last period of the history segment.
fn critical_mode(sys: &dyn DdeSystem, orbit: &PeriodicOrbit, mu: f64) -> Result<Vec<Vec<f64>>> {
    let (m, hist) = monodromy(sys, orbit)?;
    let size = m.nrows();
    let shifted = &m - DMatrix::identity(size, size) * (mu * (1.0 + 1e-10));
    let lu = shifted.lu();
    let mut x = DVector::from_element(size, 1.0);
    for _ in 0..4 {
        x = lu
            .solve(&x)
            .ok_or(Error::SingularJacobian("inverse iteration"))?;
        x /= x.amax();
    }
    let n = orbit.dimension();
    let nd = orbit.intervals() * orbit.degree;
    let first = hist - 1 - nd;
    let mut mode: Vec<Vec<f64>> = (0..=nd)
        .map(|j| x.rows((first + j) * n, n).iter().copied().collect())
        .collect();
    let scale = mode.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for v in mode.iter_mut().flatten() {
        *v /= scale;
    }
    Ok(mode)
}

/// The orbit traversed twice: mesh halved onto `[0, 1/2]` and `[1/2, 1]`,
/// period doubled.
pub fn doubled_orbit(orbit: &PeriodicOrbit) -> PeriodicOrbit {
    let mut mesh: Vec<f64> = orbit.mesh.iter().map(|s| 0.5 * s).collect();
    mesh.extend(orbit.mesh[1..].iter().map(|s| 0.5 + 0.5 * s));
    let mut profile = orbit.profile.clone();
    profile.extend(orbit.profile[1..].iter().cloned());
    PeriodicOrbit {
        mesh,
        degree: orbit.degree,
        profile,
        period: 2.0 * orbit.period,
        params: orbit.params,
        stability: None,
    }
}

/// Seed of the doubled-period branch at the doubling between orbits `index`
/// and `index + 1`: the located doubling orbit traversed twice, then a
/// corrected orbit displaced by `amplitude` along the critical mode.
pub fn double_psol(
    sys: &dyn DdeSystem,
    branch: &Branch<PeriodicOrbit>,
    index: usize,
    amplitude: f64,
    settings: &PsolSettings,
) -> Result<(PeriodDoubling, Branch<PeriodicOrbit>)> {
    let pd = locate_period_doubling(sys, branch, index, settings)?;
    let first = doubled_orbit(&pd.orbit);
    let n = first.dimension();
    let coll = Collocation::new(sys, &first.mesh, first.degree, first.params, branch.settings.parameter);
    let problem = PsolProblem { coll };
    let y0 = problem.coll.pack(&first);
    let mut mode = DVector::zeros(y0.len());
    let nd = pd.mode.len() - 1;
    for (j, v) in pd.mode.iter().enumerate() {
        mode.rows_mut(j * n, n).copy_from_slice(v);
    }
    for (j, v) in pd.mode.iter().enumerate().skip(1) {
        for k in 0..n {
            mode[(nd + j) * n + k] = pd.multiplier * v[k];
        }
    }
    let guess = &y0 + &mode * amplitude;
    let constraint = Constraint::Hyperplane {
        anchor: guess.clone(),
        direction: mode,
    };
    let (y1, _) = correct(&problem, &guess, &y0, &constraint, settings.tol, settings.max_iter)?;
    let mut seed = Branch::new(branch.settings);
    seed.points = vec![first, problem.coll.unpack(&y1)];
    Ok((pd, seed))
}
