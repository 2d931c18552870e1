//! Floquet multipliers from the collocation discretization of the monodromy
//! operator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{locate, Basis, PeriodicOrbit, PsolSettings};
use crate::error::Result;
use crate::model::{jacobians, DdeSystem};
use crate::steady::Branch;

/// Multipliers smaller than this are not stored.
const NEGLIGIBLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSet {
    /// Sorted by decreasing modulus.
    pub multipliers: Vec<Complex64>,
    pub trivial_index: usize,
    pub nunst_psol: usize,
}

impl FloquetSet {
    pub fn trivial(&self) -> Complex64 {
        self.multipliers[self.trivial_index]
    }

    /// Distance of the trivial multiplier from 1; large values indicate that
    /// the mesh is too coarse.
    pub fn trivial_error(&self) -> f64 {
        (self.trivial() - 1.0).norm()
    }

    pub fn nontrivial(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.multipliers
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.trivial_index)
            .map(|(_, m)| *m)
    }

    /// The nontrivial multiplier nearest -1.
    pub fn nearest_minus_one(&self) -> Option<Complex64> {
        self.nontrivial()
            .min_by(|a, b| (a + 1.0).norm().total_cmp(&(b + 1.0).norm()))
    }

    /// Nontrivial multiplier with negative real part and largest modulus. It
    /// moves continuously through a collision of a complex pair on the
    /// negative axis, so it can be tracked to a crossing of -1.
    pub fn flip_candidate(&self) -> Option<Complex64> {
        self.nontrivial().find(|z| z.re < 0.0)
    }

    /// Nontrivial multiplier of largest modulus.
    pub fn dominant(&self) -> Option<Complex64> {
        self.nontrivial().next()
    }
}

/// Monodromy matrix acting on the node values of the history segment
/// `[-K, 0]` (in periods), together with the number of history nodes.
pub(crate) fn monodromy(sys: &dyn DdeSystem, orbit: &PeriodicOrbit) -> Result<(DMatrix<f64>, usize)> {
    let n = orbit.dimension();
    let d = orbit.degree;
    let l = orbit.intervals();
    let nd = l * d;
    let period = orbit.period;
    let p = &orbit.params;
    let lags: Vec<f64> = sys.delays(p).iter().map(|tau| tau / period).collect();
    let k = lags.iter().fold(1.0_f64, |acc, &x| acc.max(x.ceil())) as usize;
    let hist = k * nd + 1;
    let basis = Basis::new(d);
    let mut c = DMatrix::zeros(nd * n, (hist + nd) * n);

    for i in 0..l {
        let h = orbit.mesh[i + 1] - orbit.mesh[i];
        for (g, point) in basis.points.iter().enumerate() {
            let row = (i * d + g) * n;
            let s = orbit.mesh[i] + point * h;
            let u = orbit.eval(s);
            let lagged: Vec<Vec<f64>> = lags.iter().map(|x| orbit.eval(s - x)).collect();
            let refs: Vec<&[f64]> = lagged.iter().map(Vec::as_slice).collect();
            let lin = jacobians(sys, &u, &refs, p)?;
            let (lv, ld) = basis.lagrange(*point);
            let first = (k * l + i) * d;
            for j in 0..=d {
                let col = (first + j) * n;
                for r in 0..n {
                    c[(row + r, col + r)] += ld[j] / h;
                    for q in 0..n {
                        c[(row + r, col + q)] -= period * lv[j] * lin.a[(r, q)];
                    }
                }
            }
            for (lag, b) in lags.iter().zip(&lin.b) {
                let x = s - lag + k as f64;
                let whole = (x.floor().max(0.0) as usize).min(k);
                let (il, theta) = locate(&orbit.mesh, (x - whole as f64).min(1.0));
                let (lvl, _) = basis.lagrange(theta);
                let first = (whole * l + il) * d;
                for j in 0..=d {
                    let col = (first + j) * n;
                    for r in 0..n {
                        for q in 0..n {
                            c[(row + r, col + q)] -= period * lvl[j] * b[(r, q)];
                        }
                    }
                }
            }
        }
    }

    let past = c.columns(0, hist * n).into_owned();
    let step = c
        .columns(hist * n, nd * n)
        .into_owned()
        .lu()
        .solve(&(-past))
        .ok_or(crate::Error::SingularJacobian("monodromy collocation"))?;
    let size = hist * n;
    let mut m = DMatrix::zeros(size, size);
    let kept = (hist - nd) * n;
    for q in 0..kept {
        m[(q, q + nd * n)] = 1.0;
    }
    m.rows_mut(kept, nd * n).copy_from(&step);
    Ok((m, hist))
}

/// Floquet multipliers of a corrected orbit.
pub fn floquet(sys: &dyn DdeSystem, orbit: &PeriodicOrbit, settings: &PsolSettings) -> Result<FloquetSet> {
    let (m, _) = monodromy(sys, orbit)?;
    let mut multipliers: Vec<Complex64> = m
        .complex_eigenvalues()
        .iter()
        .copied()
        .filter(|z| z.norm() > NEGLIGIBLE)
        .collect();
    multipliers.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    let trivial_index = multipliers
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .map_or(0, |(i, _)| i);
    let nunst_psol = multipliers
        .iter()
        .enumerate()
        .filter(|(i, z)| *i != trivial_index && z.norm() > 1.0 + settings.unstable_tol)
        .count();
    Ok(FloquetSet {
        multipliers,
        trivial_index,
        nunst_psol,
    })
}

/// Attaches Floquet multipliers to every orbit (in parallel).
pub fn annotate_floquet(
    sys: &dyn DdeSystem,
    branch: &mut Branch<PeriodicOrbit>,
    settings: &PsolSettings,
) -> Result<()> {
    let sets: Result<Vec<FloquetSet>> = branch
        .points
        .par_iter()
        .map(|o| floquet(sys, o, settings))
        .collect();
    for (o, set) in branch.points.iter_mut().zip(sets?) {
        o.stability = Some(set);
    }
    Ok(())
}

fn is_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-6 * z.norm().max(1.0)
}

/// First index `j` where the unstable count changes by one between orbits
/// `j` and `j + 1` and the multiplier outside the unit circle on the unstable
/// side is real and below -1.
pub fn detect_period_doubling(branch: &Branch<PeriodicOrbit>) -> Option<usize> {
    let sets: Vec<&FloquetSet> = branch
        .points
        .iter()
        .map(|o| o.stability.as_ref())
        .collect::<Option<Vec<_>>>()?;
    sets.windows(2).position(|w| {
        if w[0].nunst_psol.abs_diff(w[1].nunst_psol) != 1 {
            return false;
        }
        let (stable, unstable) = if w[0].nunst_psol < w[1].nunst_psol {
            (w[0], w[1])
        } else {
            (w[1], w[0])
        };
        let crossed = unstable
            .flip_candidate()
            .is_some_and(|z| is_real(z) && z.re < -1.0);
        let inside = stable.flip_candidate().is_some_and(|z| z.norm() <= 1.0);
        crossed && inside
    })
}
