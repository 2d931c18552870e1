use nalgebra::{DMatrix, SymmetricEigen};

/// Lagrange basis on equispaced nodes `j / d` of `[0, 1]` with Gauss-Legendre
/// collocation points.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Basis {
    pub fn new(degree: usize) -> Self {
        let nodes = (0..=degree).map(|j| j as f64 / degree as f64).collect();
        let (points, weights) = gauss_legendre(degree);
        Basis {
            degree,
            nodes,
            points,
            weights,
        }
    }

    /// Values and derivatives of all basis polynomials at `theta`.
    pub fn lagrange(&self, theta: f64) -> (Vec<f64>, Vec<f64>) {
        let t = &self.nodes;
        let m = t.len();
        let mut values = vec![0.0; m];
        let mut derivs = vec![0.0; m];
        for j in 0..m {
            let mut v = 1.0;
            for l in (0..m).filter(|&l| l != j) {
                v *= (theta - t[l]) / (t[j] - t[l]);
            }
            values[j] = v;
            let mut d = 0.0;
            for q in (0..m).filter(|&q| q != j) {
                let mut term = 1.0 / (t[j] - t[q]);
                for l in (0..m).filter(|&l| l != j && l != q) {
                    term *= (theta - t[l]) / (t[j] - t[l]);
                }
                d += term;
            }
            derivs[j] = d;
        }
        (values, derivs)
    }
}

/// Gauss-Legendre points and weights on `[0, 1]` (Golub-Welsch).
pub(crate) fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(count, count);
    for k in 1..count {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..count)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (eig.eigenvalues[i] + 1.0), v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_to_degree_2d_minus_1() {
        for d in 1..7 {
            let (x, w) = gauss_legendre(d);
            for p in 0..2 * d {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "d={d} p={p}");
            }
        }
    }

    #[test]
    fn lagrange_partition_of_unity() {
        let b = Basis::new(4);
        for theta in [0.0, 0.13, 0.5, 0.99] {
            let (v, d) = b.lagrange(theta);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            assert!(d.iter().sum::<f64>().abs() < 1e-11);
        }
        let (v, _) = b.lagrange(0.75);
        assert!((v[3] - 1.0).abs() < 1e-14);
    }
}
