//! Univariate distributions: normal, beta in the mean/dispersion
//! parametrization, binomial and beta-binomial log-pmfs.
//!
//! The beta distribution uses (pi, gamma) with shape1 = pi(1-gamma)/gamma and
//! shape2 = (1-pi)(1-gamma)/gamma, so the mean is pi and the variance is
//! pi(1-pi)gamma; gamma in (0,1) is a unit-free dispersion.

use crate::error::{Error, Result};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Halley step on `normal_cdf`, which makes the pair mutually inverse to
/// near machine precision.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile requires p in (0,1), got {p}"
        )));
    }
    let x = acklam(p);
    // one Halley refinement
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    Ok(x - u / (1.0 + x * u / 2.0))
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

fn beta_shapes(pi: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(pi > 0.0 && pi < 1.0) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!(
            "beta(pi, gamma) requires pi, gamma in (0,1), got pi={pi}, gamma={gamma}"
        )));
    }
    let a = pi * (1.0 - gamma) / gamma;
    let b = (1.0 - pi) * (1.0 - gamma) / gamma;
    Ok((a, b))
}

/// Cdf of Beta(pi, gamma) in the mean/dispersion parametrization.
pub fn beta_cdf(x: f64, pi: f64, gamma: f64) -> Result<f64> {
    let (a, b) = beta_shapes(pi, gamma)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    Ok(beta_reg(a, b, x))
}

pub fn beta_ln_pdf(x: f64, pi: f64, gamma: f64) -> Result<f64> {
    let (a, b) = beta_shapes(pi, gamma)?;
    if x <= 0.0 || x >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b))
}

/// Quantile of Beta(pi, gamma): Newton iteration on `beta_cdf` with a
/// bisection safeguard, robust at extreme dispersion.
pub fn beta_quantile(p: f64, pi: f64, gamma: f64) -> Result<f64> {
    let (a, b) = beta_shapes(pi, gamma)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "beta quantile requires p in (0,1), got {p}"
        )));
    }
    let ln_b = ln_beta(a, b);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = pi; // start from the mean
    for _ in 0..200 {
        let f = beta_reg(a, b, x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if f.abs() < 1e-15 || hi - lo < 1e-16 {
            break;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_b;
        let step = f * (-ln_pdf).exp();
        let next = x - step;
        x = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

/// Log binomial pmf with the 0^0 = 1 convention at p = 0 or p = 1.
pub fn binomial_logpmf(y: u64, n: u64, p: f64) -> Result<f64> {
    if y > n {
        return Err(Error::invalid_argument(format!(
            "binomial logpmf requires y <= n, got y={y}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "binomial logpmf requires p in [0,1], got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(if y == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if p == 1.0 {
        return Ok(if y == n { 0.0 } else { f64::NEG_INFINITY });
    }
    let (yf, nf) = (y as f64, n as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(yf + 1.0) - ln_gamma(nf - yf + 1.0);
    Ok(ln_choose + yf * p.ln() + (nf - yf) * (-p).ln_1p())
}

/// Log pmf of Beta-Binomial(n, pi, gamma).
///
/// Uses the rising-factorial product form
/// C(n,y) prod(a+i) prod(b+j) / prod(a+b+k), which stays accurate as
/// gamma -> 0 (shapes -> infinity), where the log-beta form loses all
/// precision to cancellation.
pub fn betabinomial_logpmf(y: u64, n: u64, pi: f64, gamma: f64) -> Result<f64> {
    if y > n {
        return Err(Error::invalid_argument(format!(
            "beta-binomial logpmf requires y <= n, got y={y}, n={n}"
        )));
    }
    let (a, b) = beta_shapes(pi, gamma)?;
    let (yf, nf) = (y as f64, n as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(yf + 1.0) - ln_gamma(nf - yf + 1.0);
    let mut acc = ln_choose;
    for i in 0..y {
        acc += (a + i as f64).ln();
    }
    for j in 0..(n - y) {
        acc += (b + j as f64).ln();
    }
    for k in 0..n {
        acc -= (a + b + k as f64).ln();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::gauss_legendre;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_cdf_at_zero() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn normal_quantile_against_bisection_oracle() {
        // independent oracle: bisection on normal_cdf
        let target = 0.975;
        let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert_abs_diff_eq!(oracle, 1.959964, epsilon = 1e-6);
        assert_abs_diff_eq!(normal_quantile(target).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn normal_inverse_pair() {
        assert_abs_diff_eq!(
            normal_quantile(normal_cdf(1.7)).unwrap(),
            1.7,
            epsilon = 1e-12
        );
        // log-spaced grid towards both tails
        let mut p = 1e-15;
        while p < 0.5 {
            for q in [p, 1.0 - p] {
                let x = normal_quantile(q).unwrap();
                assert_abs_diff_eq!(normal_cdf(x), q, epsilon = 1e-12);
            }
            p *= 10.0;
        }
    }

    #[test]
    fn normal_quantile_domain() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn beta_symmetric_about_half() {
        for gamma in [0.05, 0.3, 0.8] {
            assert_abs_diff_eq!(beta_cdf(0.5, 0.5, gamma).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    /// Composite Gauss-Legendre with panels graded geometrically towards
    /// both endpoints, to resolve the algebraic endpoint behavior of
    /// quantile functions that plain quadrature converges slowly on.
    fn graded_integrate(f: impl Fn(f64) -> f64) -> f64 {
        let rule = gauss_legendre(16).unwrap();
        let mut breaks = Vec::new();
        for k in (0..=50).rev() {
            breaks.push(0.5 * 0.5_f64.powi(k));
        }
        for k in 1..=50 {
            breaks.push(1.0 - 0.5 * 0.5_f64.powi(k));
        }
        // a uniform refinement so sharp interior peaks are resolved too
        for k in 1..64 {
            breaks.push(k as f64 / 64.0);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
            .windows(2)
            .map(|w| (w[1] - w[0]) * rule.integrate(|t| f(w[0] + (w[1] - w[0]) * t)))
            .sum()
    }

    #[test]
    fn beta_mean_is_pi() {
        // mean of Beta(0.76, 0.03) as the integral of the quantile function
        let mean = graded_integrate(|u| beta_quantile(u, 0.76, 0.03).unwrap());
        assert_abs_diff_eq!(mean, 0.76, epsilon = 1e-9);
    }

    #[test]
    fn beta_inverse_pair() {
        let u = beta_cdf(0.3, 0.7, 0.2).unwrap();
        assert_abs_diff_eq!(beta_quantile(u, 0.7, 0.2).unwrap(), 0.3, epsilon = 1e-10);
    }

    #[test]
    fn beta_boundary_params_rejected() {
        assert!(beta_cdf(0.5, 0.0, 0.2).is_err());
        assert!(beta_cdf(0.5, 0.5, 1.0).is_err());
        assert!(beta_quantile(0.5, 1.0, 0.2).is_err());
    }

    #[test]
    fn binomial_degenerate_and_simple() {
        assert_eq!(binomial_logpmf(0, 5, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            binomial_logpmf(2, 4, 0.5).unwrap(),
            0.375_f64.ln(),
            epsilon = 1e-14
        );
        assert!(binomial_logpmf(5, 4, 0.5).is_err());
    }

    #[test]
    fn binomial_normalizes() {
        let total: f64 = (0..=30)
            .map(|y| binomial_logpmf(y, 30, 0.534).unwrap().exp())
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn betabinomial_single_trial_is_pi() {
        for gamma in [0.01, 0.3, 0.9] {
            assert_abs_diff_eq!(
                betabinomial_logpmf(1, 1, 0.42, gamma).unwrap(),
                0.42_f64.ln(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn betabinomial_matches_quadrature_oracle() {
        // independent oracle: graded quadrature of g(y; n, F^{-1}(u)) du
        let oracle = |y: u64, n: u64, pi: f64, gamma: f64| {
            graded_integrate(|u| {
                binomial_logpmf(y, n, beta_quantile(u, pi, gamma).unwrap())
                    .unwrap()
                    .exp()
            })
            .ln()
        };
        assert_abs_diff_eq!(
            betabinomial_logpmf(3, 10, 0.76, 0.03).unwrap(),
            oracle(3, 10, 0.76, 0.03),
            epsilon = 1e-8
        );
        for pi in [0.1, 0.5, 0.9] {
            for gamma in [0.01, 0.3, 0.9] {
                for n in [1u64, 10, 100] {
                    // a bulk outcome: deep-tail outcomes concentrate the
                    // integrand beyond the oracle's panel resolution
                    let y = ((n as f64 * pi).round() as u64).min(n);
                    let got = betabinomial_logpmf(y, n, pi, gamma).unwrap();
                    let want = oracle(y, n, pi, gamma);
                    assert!(
                        (got - want).abs() < 1e-8,
                        "pi={pi} gamma={gamma} n={n}: {got} vs {want}"
                    );
                }
            }
        }
        // a tail outcome, looser: the oracle itself limits the accuracy
        let got = betabinomial_logpmf(50, 100, 0.1, 0.01).unwrap();
        let want = oracle(50, 100, 0.1, 0.01);
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }

    #[test]
    fn betabinomial_normalizes() {
        let total: f64 = (0..=25)
            .map(|y| betabinomial_logpmf(y, 25, 0.3, 0.2).unwrap().exp())
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn betabinomial_small_gamma_limit() {
        for y in [0u64, 4, 9] {
            let bb = betabinomial_logpmf(y, 9, 0.6, 1e-8).unwrap();
            let b = binomial_logpmf(y, 9, 0.6).unwrap();
            assert!((bb - b).abs() < 1e-5, "y={y}: {bb} vs {b}");
        }
    }
}
