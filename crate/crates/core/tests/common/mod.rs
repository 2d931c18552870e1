//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use delaybif::model::steady_jacobians;
use delaybif::{HarvestedPredatorPrey, Jacobians, ParameterSet};
use num_complex::Complex64;

pub const E1: [f64; 2] = [6.061458241811056, 3.254242134274988];

pub fn jacobians_at_e1() -> Jacobians {
    steady_jacobians(&HarvestedPredatorPrey, &E1, &ParameterSet::reference()).unwrap()
}

/// `det(lambda I - A - B exp(-lambda tau))` for a 2x2 single-delay system,
/// written out by hand.
pub fn det2(jac: &Jacobians, tau: f64, z: Complex64) -> Complex64 {
    let (a, b) = (&jac.a, &jac.b[0]);
    let e = (-z * tau).exp();
    let m = |i: usize, j: usize| -> Complex64 {
        let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
        diag - a[(i, j)] - b[(i, j)] * e
    };
    m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)
}

/// Bound on the modulus of any root with non-negative real part.
pub fn root_radius(jac: &Jacobians) -> f64 {
    jac.a.norm() + jac.b.iter().map(|b| b.norm()).sum::<f64>() + 1.0
}

fn arg_change(f: &dyn Fn(Complex64) -> Complex64, z0: Complex64, z1: Complex64, f0: Complex64, f1: Complex64, depth: u32) -> f64 {
    let d = (f1 / f0).arg();
    if d.abs() < 0.2 || depth == 0 {
        return d;
    }
    let zm = 0.5 * (z0 + z1);
    let fm = f(zm);
    arg_change(f, z0, zm, f0, fm, depth - 1) + arg_change(f, zm, z1, fm, f1, depth - 1)
}

/// Number of zeros of `f` inside the rectangle `[x0, x1] x [y0, y1]`, from the
/// total change of the argument along its boundary.
pub fn winding_count(f: &dyn Fn(Complex64) -> Complex64, x0: f64, x1: f64, y0: f64, y1: f64) -> i64 {
    let corners = [
        Complex64::new(x0, y0),
        Complex64::new(x1, y0),
        Complex64::new(x1, y1),
        Complex64::new(x0, y1),
        Complex64::new(x0, y0),
    ];
    let mut total = 0.0;
    for w in corners.windows(2) {
        let pieces = 400;
        let mut prev = w[0];
        let mut fprev = f(prev);
        for k in 1..=pieces {
            let z = w[0] + (w[1] - w[0]) * (k as f64 / pieces as f64);
            let fz = f(z);
            total += arg_change(f, prev, z, fprev, fz, 30);
            prev = z;
            fprev = fz;
        }
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

/// Characteristic roots of the built-in model at E1 in the open right half
/// plane, counted by the argument principle.
pub fn unstable_by_winding(tau: f64) -> i64 {
    let jac = jacobians_at_e1();
    let r = root_radius(&jac);
    winding_count(&|z| det2(&jac, tau, z), 0.0, r, -r, r)
}

/// Positive roots of `u^2 + alpha u + beta`, ascending, from the quadratic
/// formula with every candidate checked separately.
pub fn brute_positive_roots(alpha: f64, beta: f64) -> Vec<f64> {
    let disc = alpha * alpha - 4.0 * beta;
    if disc < 0.0 {
        return vec![];
    }
    let s = disc.sqrt();
    let mut roots: Vec<f64> = [(-alpha - s) / 2.0, (-alpha + s) / 2.0]
        .into_iter()
        .filter(|u| *u > 0.0)
        .collect();
    roots.dedup();
    roots
}

/// Positive analytic crossing delays of the built-in model up to `limit`, ascending.
pub fn positive_critical_delays(limit: f64) -> Vec<f64> {
    use delaybif::charpoly::{crossing_delays, reduce, Crossing};
    let red = reduce(&jacobians_at_e1()).unwrap();
    let mut taus: Vec<f64> = [Crossing::Minus, Crossing::Plus]
        .into_iter()
        .flat_map(|w| crossing_delays(&red, w, 6).unwrap())
        .filter(|t| *t > 0.0 && *t <= limit)
        .collect();
    taus.sort_by(f64::total_cmp);
    taus
}
