//! The six bivariate copula families used for the between-study model: BVN,
//! Frank, Clayton and its 90/180/270 degree rotations.
//!
//! Every family exposes its density, conditional cdf, inverse conditional
//! cdf, plain cdf, Kendall's tau maps, and conditional-method sampling. The
//! copula parameter theta is the internal parametrization; Kendall's tau is
//! the user-facing one since it is comparable across families.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::dist::{normal_cdf, normal_quantile};
use crate::numerics::quad::{gauss_legendre, QuadratureRule};

/// Treat dependence weaker than this as exact independence.
const INDEP_EPS: f64 = 1e-8;
/// Frank theta bracket; e^theta overflows usefulness beyond it.
const FRANK_THETA_MAX: f64 = 37.0;
/// BVN correlation clamp for conditional evaluation.
const BVN_RHO_MAX: f64 = 1.0 - 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Bvn,
    Frank,
    Clayton,
    Clayton90,
    Clayton180,
    Clayton270,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 6] = [
        CopulaFamily::Bvn,
        CopulaFamily::Frank,
        CopulaFamily::Clayton,
        CopulaFamily::Clayton90,
        CopulaFamily::Clayton180,
        CopulaFamily::Clayton270,
    ];

    /// Attainable Kendall's tau interval (open where the family cannot reach
    /// the endpoint with a finite theta).
    pub fn tau_range(self) -> (f64, f64) {
        match self {
            CopulaFamily::Bvn | CopulaFamily::Frank => (-1.0, 1.0),
            CopulaFamily::Clayton | CopulaFamily::Clayton180 => (0.0, 1.0),
            CopulaFamily::Clayton90 | CopulaFamily::Clayton270 => (-1.0, 0.0),
        }
    }

    /// Tau interval safe for optimization; inside `tau_range`, away from
    /// numerically unusable corners (notably the Frank theta bracket).
    pub fn fitting_tau_range(self) -> (f64, f64) {
        match self {
            CopulaFamily::Frank => {
                let t = frank_tau_from_theta(FRANK_THETA_MAX) - 1e-6;
                (-t, t)
            }
            other => other.tau_range(),
        }
    }

    pub fn is_exchangeable(self) -> bool {
        !matches!(self, CopulaFamily::Clayton90 | CopulaFamily::Clayton270)
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CopulaFamily::Bvn => "bvn",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Clayton90 => "clayton90",
            CopulaFamily::Clayton180 => "clayton180",
            CopulaFamily::Clayton270 => "clayton270",
        };
        f.write_str(name)
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bvn" | "gaussian" | "normal" => Ok(CopulaFamily::Bvn),
            "frank" => Ok(CopulaFamily::Frank),
            "clayton" | "clayton0" => Ok(CopulaFamily::Clayton),
            "clayton90" => Ok(CopulaFamily::Clayton90),
            "clayton180" => Ok(CopulaFamily::Clayton180),
            "clayton270" => Ok(CopulaFamily::Clayton270),
            other => Err(Error::invalid_argument(format!(
                "unknown copula family '{other}'"
            ))),
        }
    }
}

/// A copula family together with its natural dependence parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    family: CopulaFamily,
    theta: f64,
}

/// Converts Kendall's tau to the family's natural parameter theta.
pub fn tau_to_theta(family: CopulaFamily, tau: f64) -> Result<f64> {
    let (lo, hi) = family.tau_range();
    if !tau.is_finite() || tau < lo || tau > hi {
        return Err(Error::invalid_argument(format!(
            "tau {tau} outside attainable range [{lo}, {hi}] for {family}"
        )));
    }
    match family {
        CopulaFamily::Bvn => Ok((std::f64::consts::FRAC_PI_2 * tau).sin()),
        CopulaFamily::Frank => frank_theta_from_tau(tau),
        CopulaFamily::Clayton | CopulaFamily::Clayton180 => {
            if tau >= 1.0 {
                return Err(Error::invalid_argument(
                    "Clayton tau must be below 1".to_string(),
                ));
            }
            Ok(2.0 * tau / (1.0 - tau))
        }
        CopulaFamily::Clayton90 | CopulaFamily::Clayton270 => {
            if tau <= -1.0 {
                return Err(Error::invalid_argument(
                    "rotated Clayton tau must be above -1".to_string(),
                ));
            }
            Ok(-2.0 * tau / (1.0 + tau))
        }
    }
}

/// Converts the natural parameter theta to Kendall's tau.
pub fn theta_to_tau(family: CopulaFamily, theta: f64) -> Result<f64> {
    check_theta(family, theta)?;
    Ok(match family {
        CopulaFamily::Bvn => std::f64::consts::FRAC_2_PI * theta.asin(),
        CopulaFamily::Frank => frank_tau_from_theta(theta),
        CopulaFamily::Clayton | CopulaFamily::Clayton180 => theta / (theta + 2.0),
        CopulaFamily::Clayton90 | CopulaFamily::Clayton270 => -theta / (theta + 2.0),
    })
}

fn check_theta(family: CopulaFamily, theta: f64) -> Result<()> {
    let ok = match family {
        CopulaFamily::Bvn => (-1.0..=1.0).contains(&theta),
        CopulaFamily::Frank => theta.is_finite(),
        _ => theta >= 0.0 && theta.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::invalid_argument(format!(
            "theta {theta} invalid for {family}"
        )))
    }
}

fn debye_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(50).expect("fixed order"))
}

/// Kendall's tau of the Frank copula via the Debye-type integral
/// 1 - 4/theta + (4/theta^2) * int_0^theta t/(e^t - 1) dt (theta > 0),
/// extended to theta < 0 by oddness.
fn frank_tau_from_theta(theta: f64) -> f64 {
    if theta.abs() < 1e-6 {
        return theta / 9.0; // leading term of the series at independence
    }
    let t = theta.abs();
    let integrand = |x: f64| {
        let s = t * x;
        s / s.exp_m1()
    };
    let debye = t * debye_rule().integrate(integrand);
    let tau = 1.0 - 4.0 / t + 4.0 / (t * t) * debye;
    tau.copysign(theta)
}

fn frank_theta_from_tau(tau: f64) -> Result<f64> {
    if tau.abs() < INDEP_EPS {
        return Ok(0.0);
    }
    let tau_max = frank_tau_from_theta(FRANK_THETA_MAX);
    if tau.abs() > tau_max {
        return Err(Error::invalid_argument(format!(
            "Frank |tau| limited to {tau_max:.4} by the theta bracket [-{FRANK_THETA_MAX}, {FRANK_THETA_MAX}]"
        )));
    }
    // tau(theta) is strictly increasing; bisect on |theta|
    let target = tau.abs();
    let (mut lo, mut hi) = (0.0_f64, FRANK_THETA_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frank_tau_from_theta(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).copysign(tau))
}

impl CopulaSpec {
    pub fn from_theta(family: CopulaFamily, theta: f64) -> Result<Self> {
        check_theta(family, theta)?;
        Ok(CopulaSpec { family, theta })
    }

    pub fn from_tau(family: CopulaFamily, tau: f64) -> Result<Self> {
        Ok(CopulaSpec {
            family,
            theta: tau_to_theta(family, tau)?,
        })
    }

    pub fn independence() -> Self {
        CopulaSpec {
            family: CopulaFamily::Bvn,
            theta: 0.0,
        }
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        theta_to_tau(self.family, self.theta).expect("validated on construction")
    }

    pub fn is_independence(&self) -> bool {
        match self.family {
            CopulaFamily::Bvn | CopulaFamily::Frank => self.theta.abs() < INDEP_EPS,
            _ => self.theta < INDEP_EPS,
        }
    }

    /// Conditional cdf C(v | u) = dC(u, v)/du.
    pub fn ccdf(&self, v: f64, u: f64) -> Result<f64> {
        check_unit_open(u, v)?;
        if self.is_independence() {
            return Ok(v);
        }
        let r = match self.family {
            CopulaFamily::Bvn => bvn_ccdf(self.rho(), v, u)?,
            CopulaFamily::Frank => {
                if self.theta > 0.0 {
                    frank_ccdf(self.theta, v, u)
                } else {
                    1.0 - frank_ccdf(-self.theta, 1.0 - v, u)
                }
            }
            CopulaFamily::Clayton => clayton_ccdf(self.theta, v, u),
            CopulaFamily::Clayton90 => clayton_ccdf(self.theta, v, 1.0 - u),
            CopulaFamily::Clayton180 => 1.0 - clayton_ccdf(self.theta, 1.0 - v, 1.0 - u),
            CopulaFamily::Clayton270 => 1.0 - clayton_ccdf(self.theta, 1.0 - v, u),
        };
        Ok(clamp_unit(r))
    }

    /// Inverse conditional cdf C^{-1}(v | u).
    pub fn inv_ccdf(&self, v: f64, u: f64) -> Result<f64> {
        check_unit_open(u, v)?;
        if self.is_independence() {
            return Ok(v);
        }
        let r = match self.family {
            CopulaFamily::Bvn => bvn_inv_ccdf(self.rho(), v, u)?,
            CopulaFamily::Frank => {
                if self.theta > 0.0 {
                    frank_inv_ccdf(self.theta, v, u)
                } else {
                    1.0 - frank_inv_ccdf(-self.theta, 1.0 - v, u)
                }
            }
            CopulaFamily::Clayton => clayton_inv_ccdf(self.theta, v, u),
            CopulaFamily::Clayton90 => clayton_inv_ccdf(self.theta, v, 1.0 - u),
            CopulaFamily::Clayton180 => 1.0 - clayton_inv_ccdf(self.theta, 1.0 - v, 1.0 - u),
            CopulaFamily::Clayton270 => 1.0 - clayton_inv_ccdf(self.theta, 1.0 - v, u),
        };
        Ok(clamp_unit(r))
    }

    /// The w-quantile of U1 given U2 = v. Equals `inv_ccdf` with swapped
    /// arguments for exchangeable families; rotations go through the
    /// reflection identities.
    pub fn inv_ccdf_given_second(&self, w: f64, v: f64) -> Result<f64> {
        check_unit_open(v, w)?;
        if self.is_independence() {
            return Ok(w);
        }
        let r = match self.family {
            CopulaFamily::Clayton90 => {
                clamp_unit(1.0 - clayton_inv_ccdf(self.theta, 1.0 - w, v))
            }
            CopulaFamily::Clayton270 => {
                clamp_unit(clayton_inv_ccdf(self.theta, w, 1.0 - v))
            }
            _ => self.inv_ccdf(w, v)?,
        };
        Ok(r)
    }

    /// Log copula density log c(u, v).
    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        check_unit_open(u, v)?;
        if self.is_independence() {
            return Ok(0.0);
        }
        Ok(match self.family {
            CopulaFamily::Bvn => bvn_log_density(self.rho(), u, v)?,
            CopulaFamily::Frank => {
                if self.theta > 0.0 {
                    frank_log_density(self.theta, u, v)
                } else {
                    frank_log_density(-self.theta, u, 1.0 - v)
                }
            }
            CopulaFamily::Clayton => clayton_log_density(self.theta, u, v),
            CopulaFamily::Clayton90 => clayton_log_density(self.theta, 1.0 - u, v),
            CopulaFamily::Clayton180 => clayton_log_density(self.theta, 1.0 - u, 1.0 - v),
            CopulaFamily::Clayton270 => clayton_log_density(self.theta, u, 1.0 - v),
        })
    }

    /// Copula cdf C(u, v).
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit_open(u, v)?;
        if self.is_independence() {
            return Ok(u * v);
        }
        Ok(match self.family {
            CopulaFamily::Bvn => bvn_cdf(self.rho(), u, v)?,
            CopulaFamily::Frank => {
                if self.theta > 0.0 {
                    frank_cdf(self.theta, u, v)
                } else {
                    u - frank_cdf(-self.theta, u, 1.0 - v)
                }
            }
            CopulaFamily::Clayton => clayton_cdf(self.theta, u, v),
            CopulaFamily::Clayton90 => v - clayton_cdf(self.theta, 1.0 - u, v),
            CopulaFamily::Clayton180 => {
                u + v - 1.0 + clayton_cdf(self.theta, 1.0 - u, 1.0 - v)
            }
            CopulaFamily::Clayton270 => u - clayton_cdf(self.theta, u, 1.0 - v),
        })
    }

    /// Draws a dependent pair by the conditional method: u1 uniform, then
    /// u2 = C^{-1}(w | u1) with an independent uniform w.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u1 = clamp_unit(rng.gen::<f64>());
        let w = clamp_unit(rng.gen::<f64>());
        let u2 = self.inv_ccdf(w, u1).expect("interior inputs");
        (u1, u2)
    }

    fn rho(&self) -> f64 {
        self.theta.clamp(-BVN_RHO_MAX, BVN_RHO_MAX)
    }
}

fn check_unit_open(u: f64, v: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "copula arguments must lie in (0,1), got ({u}, {v})"
        )))
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(1e-15, 1.0 - 1e-15)
}

// ---- BVN ----------------------------------------------------------------

fn bvn_ccdf(rho: f64, v: f64, u: f64) -> Result<f64> {
    let zu = normal_quantile(u)?;
    let zv = normal_quantile(v)?;
    let s = (1.0 - rho * rho).sqrt();
    Ok(normal_cdf((zv - rho * zu) / s))
}

fn bvn_inv_ccdf(rho: f64, v: f64, u: f64) -> Result<f64> {
    let zu = normal_quantile(u)?;
    let zv = normal_quantile(v)?;
    let s = (1.0 - rho * rho).sqrt();
    Ok(normal_cdf(s * zv + rho * zu))
}

fn bvn_log_density(rho: f64, u: f64, v: f64) -> Result<f64> {
    let x = normal_quantile(u)?;
    let y = normal_quantile(v)?;
    let r2 = 1.0 - rho * rho;
    Ok(-0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2))
}

/// Bivariate normal copula cdf via the correlation-integral identity
/// Phi2(x, y; rho) = Phi(x)Phi(y) + int_0^rho phi2(x, y; r) dr.
fn bvn_cdf(rho: f64, u: f64, v: f64) -> Result<f64> {
    let x = normal_quantile(u)?;
    let y = normal_quantile(v)?;
    let rule = debye_rule();
    let phi2 = |r: f64| {
        let r2 = 1.0 - r * r;
        (-(x * x - 2.0 * r * x * y + y * y) / (2.0 * r2)).exp()
            / (2.0 * std::f64::consts::PI * r2.sqrt())
    };
    let integral = rho * rule.integrate(|t| phi2(rho * t));
    Ok(u * v + integral)
}

// ---- Frank (theta > 0) --------------------------------------------------

fn lse2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log of |e^{-tu} + e^{-tv} - e^{-t} - e^{-t(u+v)}|; the sum is positive
/// for interior (u, v).
fn frank_ln_denom(theta: f64, u: f64, v: f64) -> f64 {
    let terms = [
        (-theta * u, 1.0),
        (-theta * v, 1.0),
        (-theta, -1.0),
        (-theta * (u + v), -1.0),
    ];
    let m = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|&(l, sg)| sg * (l - m).exp()).sum();
    m + s.ln()
}

fn frank_ccdf(theta: f64, v: f64, u: f64) -> f64 {
    let ln_num = -theta * u + (-(-theta * v).exp_m1()).ln();
    (ln_num - frank_ln_denom(theta, u, v)).exp()
}

fn frank_inv_ccdf(theta: f64, w: f64, u: f64) -> f64 {
    // v = -(1/theta) [ ln((1/w - 1) e^{-theta u} + e^{-theta})
    //                  - ln((1/w - 1) e^{-theta u} + 1) ]
    let a = ((1.0 - w) / w).ln();
    let ln_num = lse2(a - theta * u, -theta);
    let ln_den = lse2(a - theta * u, 0.0);
    (ln_den - ln_num) / theta
}

fn frank_log_density(theta: f64, u: f64, v: f64) -> f64 {
    theta.ln() + (-(-theta).exp_m1()).ln() - theta * (u + v)
        - 2.0 * frank_ln_denom(theta, u, v)
}

fn frank_cdf(theta: f64, u: f64, v: f64) -> f64 {
    let x = ((-theta * u).exp_m1() * (-theta * v).exp_m1() / (-theta).exp_m1()).ln_1p();
    -x / theta
}

// ---- Clayton (theta > 0) ------------------------------------------------

/// log of s = u^{-theta} + v^{-theta} - 1, evaluated in log space so large
/// theta (tau near 1) stays finite.
fn clayton_ln_s(theta: f64, u: f64, v: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b).max(0.0);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

fn clayton_cdf(theta: f64, u: f64, v: f64) -> f64 {
    (-clayton_ln_s(theta, u, v) / theta).exp()
}

fn clayton_ccdf(theta: f64, v: f64, u: f64) -> f64 {
    let ln_s = clayton_ln_s(theta, u, v);
    (-(theta + 1.0) * u.ln() - (1.0 + 1.0 / theta) * ln_s).exp()
}

fn clayton_inv_ccdf(theta: f64, w: f64, u: f64) -> f64 {
    // {(w^{-theta/(1+theta)} - 1) u^{-theta} + 1}^{-1/theta}
    let a = -theta / (1.0 + theta) * w.ln();
    let b = -theta * u.ln();
    let inner = -(-a).exp_m1() + (-a - b).exp();
    let ln_t = a + b + inner.ln();
    (-ln_t / theta).exp()
}

fn clayton_log_density(theta: f64, u: f64, v: f64) -> f64 {
    let ln_s = clayton_ln_s(theta, u, v);
    (1.0 + theta).ln() - (theta + 1.0) * (u.ln() + v.ln()) - (2.0 + 1.0 / theta) * ln_s
}

// ---- helpers ------------------------------------------------------------

/// Sample Kendall's tau (tau-a) by direct pair counting.
pub fn empirical_kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut concordant_minus_discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (xs[i] - xs[j]) * (ys[i] - ys[j]);
            if s > 0.0 {
                concordant_minus_discordant += 1;
            } else if s < 0.0 {
                concordant_minus_discordant -= 1;
            }
        }
    }
    concordant_minus_discordant as f64 / (n as f64 * (n as f64 - 1.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bvn_tau_endpoints() {
        assert_abs_diff_eq!(theta_to_tau(CopulaFamily::Bvn, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(theta_to_tau(CopulaFamily::Bvn, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn clayton_tau_values() {
        assert_abs_diff_eq!(
            theta_to_tau(CopulaFamily::Clayton, 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            theta_to_tau(CopulaFamily::Clayton270, 2.0).unwrap(),
            -0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            theta_to_tau(CopulaFamily::Clayton180, 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            theta_to_tau(CopulaFamily::Clayton90, 2.0).unwrap(),
            -0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn frank_tau_against_quadrature_oracle() {
        // oracle: order-50 quadrature for int_0^5 t/(e^t - 1) dt
        let rule = gauss_legendre(50).unwrap();
        let theta = 5.0_f64;
        let debye = theta * rule.integrate(|x| (theta * x) / (theta * x).exp_m1());
        let oracle = 1.0 - 4.0 / theta + 4.0 / (theta * theta) * debye;
        assert_abs_diff_eq!(oracle, 0.4567, epsilon = 1e-4);
        assert_abs_diff_eq!(
            theta_to_tau(CopulaFamily::Frank, 5.0).unwrap(),
            oracle,
            epsilon = 1e-12
        );
    }

    #[test]
    fn frank_tau_is_odd() {
        let t1 = theta_to_tau(CopulaFamily::Frank, 5.0).unwrap();
        let t2 = theta_to_tau(CopulaFamily::Frank, -5.0).unwrap();
        assert_abs_diff_eq!(t1, -t2, epsilon = 1e-14);
    }

    #[test]
    fn tau_theta_inverse_pairs() {
        for family in CopulaFamily::ALL {
            let (lo, hi) = family.fitting_tau_range();
            for k in 1..20 {
                let tau = lo + (hi - lo) * k as f64 / 20.0;
                if tau.abs() < 1e-6 && !matches!(family, CopulaFamily::Bvn | CopulaFamily::Frank)
                {
                    continue;
                }
                let theta = tau_to_theta(family, tau).unwrap();
                let back = theta_to_tau(family, theta).unwrap();
                assert!(
                    (back - tau).abs() < 1e-10,
                    "{family} tau={tau}: roundtrip {back}"
                );
            }
        }
    }

    #[test]
    fn tau_out_of_range_rejected() {
        assert!(tau_to_theta(CopulaFamily::Clayton, -0.3).is_err());
        assert!(tau_to_theta(CopulaFamily::Clayton90, 0.3).is_err());
        assert!(tau_to_theta(CopulaFamily::Bvn, 1.2).is_err());
    }

    #[test]
    fn bvn_inv_ccdf_examples() {
        for theta in [-0.7, 0.0, 0.4] {
            let c = CopulaSpec::from_theta(CopulaFamily::Bvn, theta).unwrap();
            assert_abs_diff_eq!(c.inv_ccdf(0.5, 0.5).unwrap(), 0.5, epsilon = 1e-12);
        }
        let indep = CopulaSpec::from_theta(CopulaFamily::Bvn, 0.0).unwrap();
        for u in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(indep.inv_ccdf(0.3, u).unwrap(), 0.3, epsilon = 1e-14);
        }
    }

    #[test]
    fn clayton_inv_ccdf_closed_form() {
        // {(2^{2/3} - 1) * 4 + 1}^{-1/2}, cross-checked by root finding on ccdf
        let c = CopulaSpec::from_theta(CopulaFamily::Clayton, 2.0).unwrap();
        let expect = ((2.0_f64.powf(2.0 / 3.0) - 1.0) * 4.0 + 1.0).powf(-0.5);
        assert_abs_diff_eq!(expect, 0.546391, epsilon = 1e-5);
        let got = c.inv_ccdf(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        // root-finding oracle on the ccdf
        let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if c.ccdf(mid, 0.5).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(got, 0.5 * (lo + hi), epsilon = 1e-9);
    }

    #[test]
    fn clayton_density_closed_form() {
        let c = CopulaSpec::from_theta(CopulaFamily::Clayton, 2.0).unwrap();
        let expect = 3.0 * 64.0 * 7.0_f64.powf(-2.5);
        assert_abs_diff_eq!(expect, 1.481003, epsilon = 1e-5);
        assert_abs_diff_eq!(
            c.log_density(0.5, 0.5).unwrap().exp(),
            expect,
            epsilon = 1e-12
        );
    }

    #[test]
    fn independence_density_is_one() {
        let c = CopulaSpec::from_theta(CopulaFamily::Bvn, 0.0).unwrap();
        for (u, v) in [(0.2, 0.8), (0.5, 0.5), (0.9, 0.1)] {
            assert_abs_diff_eq!(c.log_density(u, v).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn exchangeable_density_symmetry() {
        for family in [
            CopulaFamily::Bvn,
            CopulaFamily::Frank,
            CopulaFamily::Clayton,
            CopulaFamily::Clayton180,
        ] {
            let tau = if family.tau_range().0 >= 0.0 { 0.4 } else { -0.4 };
            let tau = if family == CopulaFamily::Clayton || family == CopulaFamily::Clayton180 {
                0.4
            } else {
                tau
            };
            let c = CopulaSpec::from_tau(family, tau).unwrap();
            for (u, v) in [(0.2, 0.7), (0.35, 0.9)] {
                assert_abs_diff_eq!(
                    c.log_density(u, v).unwrap(),
                    c.log_density(v, u).unwrap(),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn inv_ccdf_given_second_symmetry() {
        let c = CopulaSpec::from_theta(CopulaFamily::Bvn, 0.6).unwrap();
        assert_abs_diff_eq!(
            c.inv_ccdf_given_second(0.5, 0.5).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        // exchangeable: equals inv_ccdf with swapped arguments
        for family in [CopulaFamily::Frank, CopulaFamily::Clayton, CopulaFamily::Clayton180] {
            let tau = if family == CopulaFamily::Frank { -0.4 } else { 0.4 };
            let c = CopulaSpec::from_tau(family, tau).unwrap();
            for (w, v) in [(0.3, 0.8), (0.7, 0.25)] {
                assert_abs_diff_eq!(
                    c.inv_ccdf_given_second(w, v).unwrap(),
                    c.inv_ccdf(w, v).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn boundary_inputs_rejected() {
        let c = CopulaSpec::from_theta(CopulaFamily::Frank, 2.0).unwrap();
        assert!(c.ccdf(0.0, 0.5).is_err());
        assert!(c.inv_ccdf(0.5, 1.0).is_err());
        assert!(c.log_density(0.5, 0.0).is_err());
    }
}
