//! Gauss-Legendre quadrature on the unit interval.

use crate::error::{Error, Result};

/// A Gauss-Legendre rule mapped from (-1, 1) to (0, 1).
///
/// Nodes are strictly increasing in (0, 1) and the weights sum to one, so the
/// rule integrates against the uniform measure on the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Approximates the integral of `f` over (0, 1).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }
}

/// Legendre polynomial P_n and its derivative at `x`, by the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Builds the Gauss-Legendre rule of the given order on (0, 1).
///
/// Nodes are found by Newton iteration on the Legendre polynomial with the
/// usual cosine initial guesses; this gives node accuracy near machine
/// precision without table lookups.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order < 1 || order > 200 {
        return Err(Error::invalid_argument(format!(
            "quadrature order must be in 1..=200, got {order}"
        )));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // i-th root counted from x = +1 downwards
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        // map (-1,1) -> (0,1): u = (1+x)/2, w = w_std/2 with w_std = 2/((1-x^2) dp^2)
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(QuadratureRule {
        order,
        nodes,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn order_one_is_midpoint() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes(), &[0.5]);
        assert_eq!(r.weights(), &[1.0]);
    }

    #[test]
    fn order_two_matches_legendre_roots() {
        let r = gauss_legendre(2).unwrap();
        let d = 1.0 / (2.0 * 3.0_f64.sqrt());
        assert_abs_diff_eq!(r.nodes()[0], 0.5 - d, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes()[1], 0.5 + d, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn weights_sum_to_one() {
        for order in [1, 2, 5, 15, 50, 200] {
            let r = gauss_legendre(order).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nodes_strictly_increasing_interior() {
        let r = gauss_legendre(31).unwrap();
        for w in r.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(r.nodes()[0] > 0.0 && *r.nodes().last().unwrap() < 1.0);
    }

    #[test]
    fn polynomial_exactness() {
        // exact up to degree 2m-1; over (0,1) the monomial u^d integrates to 1/(d+1)
        for m in 1..=30usize {
            let r = gauss_legendre(m).unwrap();
            for d in 0..=(2 * m - 1) {
                let approx = r.integrate(|u| u.powi(d as i32));
                let exact = 1.0 / (d as f64 + 1.0);
                assert!(
                    (approx - exact).abs() < 1e-11,
                    "order {m} degree {d}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn order_fifteen_degree_nine() {
        let r = gauss_legendre(15).unwrap();
        assert_abs_diff_eq!(r.integrate(|u| u.powi(9)), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_range_order() {
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_legendre(201).is_err());
    }
}
