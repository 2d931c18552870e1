//! Analytic treatment of two-dimensional, single-delay characteristic equations
//!
//! ```text
//! (lambda^2 + a1 lambda + a2) + (a3 lambda + a4) exp(-lambda tau) = 0
//! ```
//!
//! Purely imaginary roots `i omega` satisfy `omega^4 + alpha omega^2 + beta = 0`;
//! with `u = omega^2` this is the quadratic `h(u) = u^2 + alpha u + beta`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_num, Table};
use crate::model::Jacobians;

/// Which positive root of `h` a crossing sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Crossing {
    /// Smaller root `u_-`.
    Minus,
    /// Larger root `u_+` (or the only root).
    Plus,
}

/// Positive roots of `h(u)` in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveRoots {
    pub count: usize,
    pub roots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticReduction {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `(u_bar, h(u_bar))`.
    pub vertex: (f64, f64),
    pub positive_roots: Vec<f64>,
    /// `sqrt(u)` for each positive root.
    pub omegas: Vec<f64>,
}

fn h(alpha: f64, beta: f64, u: f64) -> f64 {
    u * u + alpha * u + beta
}

/// Counts and computes the positive roots of `u^2 + alpha u + beta` by the
/// sign table on `alpha`, `beta` and the vertex value.
pub fn classify_positive_roots(alpha: f64, beta: f64) -> PositiveRoots {
    let vertex_u = -alpha / 2.0;
    let vertex_h = beta - alpha * alpha / 4.0;
    let larger = || {
        // -alpha/2 + sqrt(alpha^2/4 - beta), evaluated without cancellation
        let q = -0.5 * (alpha - (alpha * alpha - 4.0 * beta).sqrt());
        if alpha <= 0.0 {
            q
        } else {
            beta / (-0.5 * (alpha + (alpha * alpha - 4.0 * beta).sqrt()))
        }
    };
    let roots = if alpha >= 0.0 && beta >= 0.0 {
        vec![]
    } else if alpha >= 0.0 {
        // beta < 0: one root of each sign
        vec![larger()]
    } else if beta <= 0.0 {
        vec![larger()]
    } else if vertex_h > 0.0 {
        vec![]
    } else if vertex_h == 0.0 {
        vec![vertex_u]
    } else {
        let big = larger();
        vec![beta / big, big]
    };
    PositiveRoots {
        count: roots.len(),
        roots,
    }
}

impl QuarticReduction {
    /// Builds the reduction from coefficients `a1..a4`.
    pub fn from_coefficients(a1: f64, a2: f64, a3: f64, a4: f64) -> Self {
        let alpha = a1 * a1 - 2.0 * a2 - a3 * a3;
        let beta = a2 * a2 - a4 * a4;
        let classified = classify_positive_roots(alpha, beta);
        let omegas = classified.roots.iter().map(|u| u.sqrt()).collect();
        QuarticReduction {
            a1,
            a2,
            a3,
            a4,
            alpha,
            beta,
            vertex: (-alpha / 2.0, beta - alpha * alpha / 4.0),
            positive_roots: classified.roots,
            omegas,
        }
    }

    pub fn h(&self, u: f64) -> f64 {
        h(self.alpha, self.beta, u)
    }

    fn root_index(&self, which: Crossing) -> Result<usize> {
        match (self.positive_roots.len(), which) {
            (2, Crossing::Minus) => Ok(0),
            (2, Crossing::Plus) => Ok(1),
            (1, Crossing::Plus) => Ok(0),
            (count, w) => Err(Error::NoCandidate(format!(
                "h(u) has {count} positive roots; no {w:?} crossing"
            ))),
        }
    }

    pub fn u(&self, which: Crossing) -> Result<f64> {
        Ok(self.positive_roots[self.root_index(which)?])
    }

    pub fn omega(&self, which: Crossing) -> Result<f64> {
        Ok(self.omegas[self.root_index(which)?])
    }

    /// Characteristic function of the reduced equation.
    pub fn characteristic(&self, lambda: Complex64, tau: f64) -> Complex64 {
        lambda * lambda + self.a1 * lambda + self.a2 + (self.a3 * lambda + self.a4) * (-lambda * tau).exp()
    }
}

/// Reduces a 2x2, single-delay linearization to `a1..a4`.
///
/// Requires `det B = 0` so that no `exp(-2 lambda tau)` term appears.
pub fn reduce(jac: &Jacobians) -> Result<QuarticReduction> {
    if jac.dimension() != 2 {
        return Err(Error::DimensionMismatch {
            context: "quartic reduction state dimension",
            expected: 2,
            got: jac.dimension(),
        });
    }
    if jac.b.len() != 1 {
        return Err(Error::DimensionMismatch {
            context: "quartic reduction delay count",
            expected: 1,
            got: jac.b.len(),
        });
    }
    let a = &jac.a;
    let b = &jac.b[0];
    let det_b = b.determinant();
    let scale = b.norm().powi(2).max(f64::MIN_POSITIVE);
    if det_b.abs() > 1e-12 * scale {
        return Err(Error::InvalidParameters(format!(
            "delayed Jacobian must be singular for the quartic reduction (det B = {det_b:e})"
        )));
    }
    let det_a = a.determinant();
    let cross = (a + b).determinant() - det_a - det_b;
    Ok(QuarticReduction::from_coefficients(
        -a.trace(),
        det_a,
        -b.trace(),
        cross,
    ))
}

/// Conditions for both roots of `lambda^2 + (a1 + a3) lambda + (a2 + a4)` to lie
/// in the open left half-plane.
pub fn stable_at_zero_delay(red: &QuarticReduction) -> bool {
    red.a1 + red.a3 > 0.0 && red.a2 + red.a4 > 0.0
}

/// Delay-independent stability: stable at zero delay and `alpha, beta > 0`.
pub fn absolutely_stable(red: &QuarticReduction) -> bool {
    stable_at_zero_delay(red) && red.alpha > 0.0 && red.beta > 0.0
}

/// Critical delays of one crossing family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalDelays {
    pub which: Crossing,
    pub omega: f64,
    /// `tau_0 .. tau_kmax`, possibly starting negative.
    pub all: Vec<f64>,
    /// The non-negative entries of `all`.
    pub nonnegative: Vec<f64>,
}

fn tan_ratio(red: &QuarticReduction, w: f64) -> (f64, f64) {
    let num = w * (red.a3 * w * w + red.a1 * red.a4 - red.a2 * red.a3);
    let den = (red.a4 - red.a1 * red.a3) * w * w - red.a2 * red.a4;
    (num, den)
}

/// `tau_k = (atan(num/den) + 2 pi k) / omega` with the principal-value arctangent,
/// `k = 0..=k_max`.
pub fn critical_delays(red: &QuarticReduction, which: Crossing, k_max: usize) -> Result<CriticalDelays> {
    let w = red.omega(which)?;
    let (num, den) = tan_ratio(red, w);
    let angle = if den == 0.0 {
        PI / 2.0 * num.signum()
    } else {
        (num / den).atan()
    };
    let all: Vec<f64> = (0..=k_max)
        .map(|k| (angle + 2.0 * PI * k as f64) / w)
        .collect();
    let nonnegative = all.iter().copied().filter(|t| *t >= 0.0).collect();
    Ok(CriticalDelays {
        which,
        omega: w,
        all,
        nonnegative,
    })
}

/// Delays at which `i omega` is a root, from the quadrant-resolved angle
/// `omega tau mod 2 pi` in `[0, 2 pi)`. All entries are positive.
pub fn crossing_delays(red: &QuarticReduction, which: Crossing, count: usize) -> Result<Vec<f64>> {
    let w = red.omega(which)?;
    // cos and sin of omega tau from the real and imaginary parts at lambda = i omega
    let denom = red.a4 * red.a4 + red.a3 * red.a3 * w * w;
    let cos = (red.a4 * (w * w - red.a2) - red.a1 * red.a3 * w * w) / denom;
    let sin = (red.a3 * w * (w * w - red.a2) + red.a1 * red.a4 * w) / denom;
    let mut angle = sin.atan2(cos);
    if angle <= 0.0 {
        angle += 2.0 * PI;
    }
    Ok((0..count).map(|k| (angle + 2.0 * PI * k as f64) / w).collect())
}

/// `sign(h'(u))` at the selected positive root: the direction in which the
/// root pair crosses the imaginary axis as the delay increases.
pub fn transversality_sign(red: &QuarticReduction, which: Crossing) -> Result<i32> {
    let u = red.u(which)?;
    Ok(sign_of_slope(red.alpha, u))
}

fn sign_of_slope(alpha: f64, u: f64) -> i32 {
    let slope = 2.0 * u + alpha;
    if slope > 0.0 {
        1
    } else if slope < 0.0 {
        -1
    } else {
        0
    }
}

/// Unstable-root count at delay `tau` implied by the crossing sequences and
/// their transversality signs, assuming stability at zero delay.
pub fn predicted_nunst(red: &QuarticReduction, tau: f64) -> i64 {
    let mut total = 0_i64;
    for (i, &u) in red.positive_roots.iter().enumerate() {
        let which = if red.positive_roots.len() == 2 && i == 0 {
            Crossing::Minus
        } else {
            Crossing::Plus
        };
        let sign = sign_of_slope(red.alpha, u) as i64;
        let w = red.omegas[i];
        let needed = ((tau * w) / (2.0 * PI)).ceil().max(0.0) as usize + 2;
        let delays = crossing_delays(red, which, needed).expect("root exists");
        let crossed = delays.iter().filter(|&&t| t > 0.0 && t <= tau).count() as i64;
        total += 2 * sign * crossed;
    }
    total
}

/// Two-column table `k, tau_minus, tau_plus` of the literal delay sequences.
pub fn critical_delay_table(red: &QuarticReduction, k_max: usize) -> Result<Table> {
    let minus = critical_delays(red, Crossing::Minus, k_max)?;
    let plus = critical_delays(red, Crossing::Plus, k_max)?;
    let mut table = Table::new(["k", "tau_minus", "tau_plus"]);
    for k in 0..=k_max {
        table.push(vec![k.to_string(), fmt_num(minus.all[k]), fmt_num(plus.all[k])]);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{steady_jacobians, HarvestedPredatorPrey, ParameterSet};

    const E1: [f64; 2] = [6.061458241811056, 3.254242134274988];

    fn reference() -> QuarticReduction {
        let jac = steady_jacobians(&HarvestedPredatorPrey, &E1, &ParameterSet::reference()).unwrap();
        reduce(&jac).unwrap()
    }

    #[test]
    fn matches_explicit_coefficients() {
        let p = ParameterSet::reference();
        let (x, y) = (E1[0], E1[1]);
        let red = reference();
        let a11 = p.r - p.a * x - p.b * y;
        let a22 = p.c * x - p.d;
        assert!((red.a1 - (-a11 - a22)).abs() < 1e-14);
        assert!((red.a2 - (a11 * a22 + p.b * p.c * x * y)).abs() < 1e-14);
        assert!((red.a3 - p.a * x).abs() < 1e-14);
        assert!((red.a4 - (-p.a * x * a22)).abs() < 1e-14);
    }

    #[test]
    fn reference_quartic_values() {
        let red = reference();
        assert!((red.alpha + 2.031311).abs() < 1e-5);
        assert!((red.beta - 0.972753).abs() < 1e-5);
        assert!((red.vertex.0 - 1.015655).abs() < 1e-5);
        assert!((red.vertex.1 + 0.058803).abs() < 1e-5);
        assert!((red.positive_roots[0] - 0.773162).abs() < 1e-5);
        assert!((red.positive_roots[1] - 1.258149).abs() < 1e-5);
        assert!((red.omegas[0] - 0.879297).abs() < 1e-5);
        assert!((red.omegas[1] - 1.121672).abs() < 1e-5);
        for u in &red.positive_roots {
            assert!(red.h(*u).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_delay_conditions() {
        let red = reference();
        assert!(stable_at_zero_delay(&red));
        assert!(!absolutely_stable(&red));
        // a1 + a3 = 0 boundary
        assert!(!stable_at_zero_delay(&QuarticReduction::from_coefficients(1.0, 1.0, -1.0, 0.5)));
        // a2 + a4 < 0
        assert!(!stable_at_zero_delay(&QuarticReduction::from_coefficients(1.0, 1.0, 0.5, -2.0)));
    }

    #[test]
    fn absolute_stability() {
        // a1 = 2, a2 = 1, a3 = 0, a4 = 0 gives alpha = 2, beta = 1
        let red = QuarticReduction::from_coefficients(2.0, 1.0, 0.0, 0.0);
        assert_eq!((red.alpha, red.beta), (2.0, 1.0));
        assert!(absolutely_stable(&red));
        // alpha > 0, beta < 0: a2 = 0.5, a4 = 1 gives beta = -0.75, alpha = 3
        let red = QuarticReduction::from_coefficients(2.0, 0.5, 0.0, 1.0);
        assert!(red.alpha > 0.0 && red.beta < 0.0);
        assert!(!absolutely_stable(&red));
    }

    #[test]
    fn classification_rows() {
        assert_eq!(classify_positive_roots(1.0, 2.0).count, 0);
        assert_eq!(classify_positive_roots(0.0, 0.0).count, 0);
        assert_eq!(classify_positive_roots(1.0, -2.0).count, 1);
        assert_eq!(classify_positive_roots(-1.0, 0.0).roots, vec![1.0]);
        assert_eq!(classify_positive_roots(-1.0, 1.0).count, 0);
        assert_eq!(classify_positive_roots(-2.0, 1.0).roots, vec![1.0]);
        assert_eq!(classify_positive_roots(-2.031311, 0.972753).count, 2);
    }

    #[test]
    fn reference_delay_sequences() {
        let red = reference();
        let plus = critical_delays(&red, Crossing::Plus, 4).unwrap();
        let minus = critical_delays(&red, Crossing::Minus, 4).unwrap();
        let table_plus = [1.3794139, 6.9810371, 12.582660, 18.184284, 23.785907];
        let table_minus = [-1.752556, 5.393140, 12.538836, 19.684531, 26.830227];
        for (got, want) in plus.all.iter().zip(table_plus) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
        for (got, want) in minus.all.iter().zip(table_minus) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
        assert_eq!(minus.nonnegative.len(), 4);
        for seq in [&plus, &minus] {
            for pair in seq.all.windows(2) {
                assert!((pair[1] - pair[0] - 2.0 * PI / seq.omega).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn literal_and_quadrant_resolved_delays_agree_here() {
        let red = reference();
        for which in [Crossing::Minus, Crossing::Plus] {
            let lit = critical_delays(&red, which, 6).unwrap().nonnegative;
            let res = crossing_delays(&red, which, lit.len()).unwrap();
            for (a, b) in lit.iter().zip(&res) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn substitution_residual() {
        let red = reference();
        for which in [Crossing::Minus, Crossing::Plus] {
            let seq = critical_delays(&red, which, 4).unwrap();
            let w = seq.omega;
            assert!((w.powi(4) + red.alpha * w * w + red.beta).abs() < 1e-10);
            for tau in &seq.all {
                let r = red.characteristic(Complex64::new(0.0, w), *tau);
                assert!(r.norm() < 1e-8, "{which:?} {tau} {r}");
            }
        }
    }

    #[test]
    fn vanishing_denominator_uses_half_pi() {
        // a1 = a4 = 0 makes the denominator vanish; num = w a3 (w^2 - a2) = 6 at w = 2.
        let red = QuarticReduction {
            positive_roots: vec![4.0],
            omegas: vec![2.0],
            ..QuarticReduction::from_coefficients(0.0, 1.0, 1.0, 0.0)
        };
        let seq = critical_delays(&red, Crossing::Plus, 1).unwrap();
        assert!((seq.all[0] - PI / 4.0).abs() < 1e-15);
        assert!((seq.all[1] - (PI / 2.0 + 2.0 * PI) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn transversality() {
        let red = reference();
        assert_eq!(transversality_sign(&red, Crossing::Minus).unwrap(), -1);
        assert_eq!(transversality_sign(&red, Crossing::Plus).unwrap(), 1);
        // double root at the vertex
        let red = QuarticReduction::from_coefficients(0.0, 1.0, 0.0, 0.0);
        assert_eq!(red.positive_roots.len(), 1);
        assert_eq!(transversality_sign(&red, Crossing::Plus).unwrap(), 0);
        // single root with beta < 0
        let red = QuarticReduction::from_coefficients(1.0, 0.5, 0.5, 1.0);
        assert!(red.beta < 0.0);
        assert_eq!(transversality_sign(&red, Crossing::Plus).unwrap(), 1);
        assert!(transversality_sign(&red, Crossing::Minus).is_err());
    }

    #[test]
    fn predicted_counts() {
        let red = reference();
        assert_eq!(predicted_nunst(&red, 0.0), 0);
        assert_eq!(predicted_nunst(&red, 3.0), 2);
        assert_eq!(predicted_nunst(&red, 6.0), 0);
        assert_eq!(predicted_nunst(&red, 7.0), 2);
        assert_eq!(predicted_nunst(&red, 12.56), 0);
        assert_eq!(predicted_nunst(&red, 13.0), 2);
        assert_eq!(predicted_nunst(&red, 12.582661), 2);
    }

    #[test]
    fn delay_table_layout() {
        let table = critical_delay_table(&reference(), 4).unwrap();
        assert_eq!(table.len(), 5);
        assert!(table.to_csv().starts_with("k,tau_minus,tau_plus\n0,-1.75255"));
    }
}
