//! Link functions and the margin specification for the random-effects
//! distribution: normal margins on a link scale, or beta margins on the
//! natural probability scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::dist::{
    beta_cdf, beta_ln_pdf, beta_quantile, normal_cdf, normal_pdf, normal_quantile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Logit,
    Probit,
    Cloglog,
    Identity,
}

impl Link {
    /// Maps a probability to the link scale.
    pub fn apply(self, p: f64) -> Result<f64> {
        match self {
            Link::Identity => Ok(p),
            _ => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::domain(format!(
                        "link requires p in (0,1), got {p}"
                    )));
                }
                Ok(match self {
                    Link::Logit => (p / (1.0 - p)).ln(),
                    Link::Probit => normal_quantile(p)?,
                    Link::Cloglog => (-(-p).ln_1p()).ln(),
                    Link::Identity => unreachable!(),
                })
            }
        }
    }

    /// Maps from the link scale back to a probability.
    pub fn inverse(self, x: f64) -> f64 {
        match self {
            Link::Identity => x,
            Link::Logit => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => normal_cdf(x),
            Link::Cloglog => -(-x.exp()).exp_m1(),
        }
    }

    /// Derivative d l(p)/dp; used for change of variables in densities.
    pub fn derivative(self, p: f64) -> Result<f64> {
        match self {
            Link::Identity => Ok(1.0),
            _ => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::domain(format!(
                        "link derivative requires p in (0,1), got {p}"
                    )));
                }
                Ok(match self {
                    Link::Logit => 1.0 / (p * (1.0 - p)),
                    Link::Probit => 1.0 / normal_pdf(normal_quantile(p)?),
                    Link::Cloglog => -1.0 / ((1.0 - p) * (-p).ln_1p()),
                    Link::Identity => unreachable!(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginFamily {
    Normal,
    Beta,
}

/// Which univariate random-effects family and link a model uses.
///
/// Normal margins pair with logit/probit/cloglog links; the beta margin is on
/// the natural scale and only admits the identity link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginSpec {
    family: MarginFamily,
    link: Link,
}

impl MarginSpec {
    pub fn new(family: MarginFamily, link: Link) -> Result<Self> {
        let ok = match family {
            MarginFamily::Normal => matches!(link, Link::Logit | Link::Probit | Link::Cloglog),
            MarginFamily::Beta => matches!(link, Link::Identity),
        };
        if !ok {
            return Err(Error::invalid_argument(format!(
                "margin family {family:?} does not admit link {link:?}"
            )));
        }
        Ok(MarginSpec { family, link })
    }

    pub fn normal(link: Link) -> Result<Self> {
        MarginSpec::new(MarginFamily::Normal, link)
    }

    pub fn beta() -> Self {
        MarginSpec {
            family: MarginFamily::Beta,
            link: Link::Identity,
        }
    }

    pub fn family(&self) -> MarginFamily {
        self.family
    }

    pub fn link(&self) -> Link {
        self.link
    }

    /// Validates a dispersion parameter for this margin.
    pub fn check_delta(&self, delta: f64) -> Result<()> {
        let ok = match self.family {
            MarginFamily::Normal => delta > 0.0 && delta.is_finite(),
            MarginFamily::Beta => delta > 0.0 && delta < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "invalid dispersion {delta} for margin {:?}",
                self.family
            )))
        }
    }

    /// Success probability at quantile level `u` of the random effect:
    /// l^{-1}(F^{-1}(u; l(pi), delta)).
    pub fn success_prob(&self, u: f64, pi: f64, delta: f64) -> Result<f64> {
        match self.family {
            MarginFamily::Normal => {
                let mu = self.link.apply(pi)?;
                let x = mu + delta * normal_quantile(u)?;
                Ok(self.link.inverse(x))
            }
            MarginFamily::Beta => beta_quantile(u, pi, delta),
        }
    }

    /// F(l(p); l(pi), delta): the uniform score of a success probability.
    pub fn uniform_score(&self, p: f64, pi: f64, delta: f64) -> Result<f64> {
        match self.family {
            MarginFamily::Normal => {
                let mu = self.link.apply(pi)?;
                Ok(normal_cdf((self.link.apply(p)? - mu) / delta))
            }
            MarginFamily::Beta => beta_cdf(p, pi, delta),
        }
    }

    /// Log density of the success probability on the natural scale.
    pub fn natural_log_pdf(&self, p: f64, pi: f64, delta: f64) -> Result<f64> {
        match self.family {
            MarginFamily::Normal => {
                let mu = self.link.apply(pi)?;
                let z = (self.link.apply(p)? - mu) / delta;
                const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
                Ok(-0.5 * z * z - LN_SQRT_2PI - delta.ln() + self.link.derivative(p)?.ln())
            }
            MarginFamily::Beta => beta_ln_pdf(p, pi, delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn logit_symmetry() {
        assert_abs_diff_eq!(Link::Logit.apply(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Link::Logit.inverse(0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cloglog_at_zero() {
        assert_abs_diff_eq!(
            Link::Cloglog.inverse(0.0),
            1.0 - (-1.0_f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn inverse_pairs() {
        for link in [Link::Logit, Link::Probit, Link::Cloglog] {
            for p in [0.01, 0.3, 0.5, 0.91, 0.99] {
                let x = link.apply(p).unwrap();
                assert_abs_diff_eq!(link.inverse(x), p, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn boundary_rejected() {
        assert!(Link::Logit.apply(0.0).is_err());
        assert!(Link::Probit.apply(1.0).is_err());
    }

    #[test]
    fn margin_pairing_enforced() {
        assert!(MarginSpec::new(MarginFamily::Beta, Link::Logit).is_err());
        assert!(MarginSpec::new(MarginFamily::Normal, Link::Identity).is_err());
        assert!(MarginSpec::new(MarginFamily::Normal, Link::Probit).is_ok());
    }

    #[test]
    fn score_and_quantile_are_inverse() {
        let normal = MarginSpec::normal(Link::Logit).unwrap();
        let beta = MarginSpec::beta();
        for u in [0.05, 0.4, 0.95] {
            let p = normal.success_prob(u, 0.79, 0.43).unwrap();
            assert_abs_diff_eq!(
                normal.uniform_score(p, 0.79, 0.43).unwrap(),
                u,
                epsilon = 1e-10
            );
            let p = beta.success_prob(u, 0.76, 0.03).unwrap();
            assert_abs_diff_eq!(
                beta.uniform_score(p, 0.76, 0.03).unwrap(),
                u,
                epsilon = 1e-9
            );
        }
    }
}
