//! Composite likelihood estimation: the joint likelihood is replaced by the
//! product of the two univariate mixed-model likelihoods, so the copula
//! dependence drops out of estimation entirely. Standard errors come from the
//! inverse Godambe information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{Dataset, FitOptions, FitResult, ParamVector, StudyRecord};
use crate::numerics::{betabinomial_logpmf, MarginFamily, MarginSpec, QuadratureRule};
use crate::optim::{nelder_mead, NmOptions};
use statrs::function::gamma::ln_gamma;

/// Which margin of the 2x2 tables a univariate fit addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sensitivity,
    Specificity,
}

impl Side {
    fn counts(self, r: &StudyRecord) -> (u64, u64) {
        match self {
            Side::Sensitivity => (r.y1, r.n1),
            Side::Specificity => (r.y2, r.n2),
        }
    }
}

/// Log marginal pmf of one count under the univariate mixed model. Beta
/// margins use the closed-form beta-binomial; normal margins integrate the
/// binomial kernel over the random effect by quadrature.
pub fn univariate_logpmf(
    y: u64,
    n: u64,
    pi: f64,
    delta: f64,
    margin: &MarginSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    if y > n {
        return Err(Error::invalid_argument(format!(
            "count {y} exceeds denominator {n}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    match margin.family() {
        MarginFamily::Beta => betabinomial_logpmf(y, n, pi, delta),
        MarginFamily::Normal => {
            margin.check_delta(delta)?;
            let (yf, nf) = (y as f64, n as f64);
            let ln_choose =
                ln_gamma(nf + 1.0) - ln_gamma(yf + 1.0) - ln_gamma(nf - yf + 1.0);
            let mut max = f64::NEG_INFINITY;
            let mut terms = Vec::with_capacity(rule.order());
            for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
                let p = margin.success_prob(u, pi, delta)?;
                let lp = if p <= 0.0 {
                    if yf == 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else if p >= 1.0 {
                    if yf == nf {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    yf * p.ln() + (nf - yf) * (-p).ln_1p()
                };
                let t = w.ln() + lp;
                if t > max {
                    max = t;
                }
                terms.push(t);
            }
            if max == f64::NEG_INFINITY {
                return Err(Error::numerical(format!(
                    "univariate pmf underflowed to zero for {y}/{n}"
                )));
            }
            let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
            Ok(ln_choose + max + sum.ln())
        }
    }
}

/// Negative log-likelihood of one margin over all studies.
pub fn univariate_negloglik(
    data: &Dataset,
    side: Side,
    pi: f64,
    delta: f64,
    margin: &MarginSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::domain(format!("pi {pi} outside (0,1)")));
    }
    margin.check_delta(delta)?;
    let mut total = 0.0;
    for (i, r) in data.studies().iter().enumerate() {
        let (y, n) = side.counts(r);
        total -= univariate_logpmf(y, n, pi, delta, margin, rule)
            .map_err(|e| Error::numerical(format!("study {i}: {e}")))?;
    }
    Ok(total)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn delta_from_z(margin: &MarginSpec, z: f64) -> f64 {
    match margin.family() {
        MarginFamily::Normal => z.exp(),
        MarginFamily::Beta => expit(z),
    }
}

fn delta_to_z(margin: &MarginSpec, d: f64) -> f64 {
    match margin.family() {
        MarginFamily::Normal => d.ln(),
        MarginFamily::Beta => logit(d),
    }
}

struct SideFit {
    pi: f64,
    delta: f64,
    loglik: f64,
    converged: bool,
    n_evals: usize,
}

fn fit_side(
    data: &Dataset,
    side: Side,
    margin: &MarginSpec,
    rule: &QuadratureRule,
    init: (f64, f64),
    max_evals: usize,
) -> SideFit {
    let objective = |z: &[f64]| -> f64 {
        let pi = expit(z[0]);
        let delta = delta_from_z(margin, z[1]);
        match univariate_negloglik(data, side, pi, delta, margin, rule) {
            Ok(v) => v,
            Err(_) => f64::INFINITY,
        }
    };
    let opts = NmOptions {
        max_evals,
        ..NmOptions::default()
    };
    let z0 = [logit(init.0), delta_to_z(margin, init.1)];
    let mut best = nelder_mead(objective, &z0, &opts);
    let mut total_evals = best.n_evals;
    if !best.converged && matches!(margin.family(), MarginFamily::Beta) {
        // restart from a coarse grid when the first start stalls
        let mut grid_best: Option<(f64, [f64; 2])> = None;
        for pi in [0.2, 0.5, 0.8, 0.9] {
            for gamma in [0.01, 0.1, 0.3] {
                let z = [logit(pi), delta_to_z(margin, gamma)];
                let v = objective(&z);
                total_evals += 1;
                if grid_best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                    grid_best = Some((v, z));
                }
            }
        }
        if let Some((_, z)) = grid_best {
            let retry = nelder_mead(objective, &z, &opts);
            total_evals += retry.n_evals;
            if retry.fx < best.fx || retry.converged {
                best = retry;
            }
        }
    }
    SideFit {
        pi: expit(best.x[0]),
        delta: delta_from_z(margin, best.x[1]),
        loglik: -best.fx,
        converged: best.converged && best.fx.is_finite(),
        n_evals: total_evals,
    }
}

/// The pieces of the Godambe (sandwich) information for the composite
/// likelihood estimator, in parameter order (pi1, delta1, pi2, delta2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GodambeMatrix {
    /// Observed information of the composite log-likelihood (block diagonal
    /// across the two margins).
    pub sensitivity: [[f64; 4]; 4],
    /// Sum of per-study outer products of composite scores.
    pub variability: [[f64; 4]; 4],
    /// Inverse Godambe information: the asymptotic covariance of the
    /// composite likelihood estimates.
    pub covariance: [[f64; 4]; 4],
}

/// Shrinks a finite-difference step so x +/- h stays inside the parameter
/// domain. Index parity picks between probability (even) and dispersion
/// (odd) coordinates of the (pi1, delta1, pi2, delta2) layout.
fn step_inside(margin: &MarginSpec, k: usize, x: f64, h: f64) -> f64 {
    let room = if k % 2 == 0 {
        x.min(1.0 - x)
    } else {
        match margin.family() {
            MarginFamily::Beta => x.min(1.0 - x),
            MarginFamily::Normal => x,
        }
    };
    h.min(0.49 * room)
}

/// Composite score of one study with respect to the four parameters, by
/// central differences.
fn study_score(
    r: &StudyRecord,
    x: &[f64; 4],
    margin: &MarginSpec,
    rule: &QuadratureRule,
) -> Result<[f64; 4]> {
    let eval = |x: &[f64; 4]| -> Result<f64> {
        Ok(univariate_logpmf(r.y1, r.n1, x[0], x[1], margin, rule)?
            + univariate_logpmf(r.y2, r.n2, x[2], x[3], margin, rule)?)
    };
    let mut s = [0.0; 4];
    for k in 0..4 {
        let h = step_inside(margin, k, x[k], 1e-5 * (1.0 + x[k].abs()));
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += h;
        xm[k] -= h;
        s[k] = (eval(&xp)? - eval(&xm)?) / (2.0 * h);
    }
    Ok(s)
}

/// Computes the Godambe information pieces at the composite likelihood
/// estimates. Fails when either block of the sensitivity matrix is not
/// positive definite.
pub fn godambe(
    data: &Dataset,
    estimates: &ParamVector,
    margin: &MarginSpec,
    rule: &QuadratureRule,
) -> Result<GodambeMatrix> {
    let x = [
        estimates.pi1,
        estimates.delta1,
        estimates.pi2,
        estimates.delta2,
    ];
    let sides = [Side::Sensitivity, Side::Specificity];
    let mut sens = nalgebra::DMatrix::<f64>::zeros(4, 4);
    for (b, side) in sides.iter().enumerate() {
        let (pi, delta) = (x[2 * b], x[2 * b + 1]);
        let f = |pi: f64, delta: f64| -> Result<f64> {
            univariate_negloglik(data, *side, pi, delta, margin, rule)
        };
        let hp = step_inside(margin, 0, pi, (1e-3 * pi.abs()).max(1e-4));
        let hd = step_inside(margin, 1, delta, (1e-3 * delta.abs()).max(1e-4));
        let f0 = f(pi, delta)?;
        let dpp = (f(pi + hp, delta)? - 2.0 * f0 + f(pi - hp, delta)?) / (hp * hp);
        let ddd = (f(pi, delta + hd)? - 2.0 * f0 + f(pi, delta - hd)?) / (hd * hd);
        let dpd = (f(pi + hp, delta + hd)? - f(pi + hp, delta - hd)?
            - f(pi - hp, delta + hd)?
            + f(pi - hp, delta - hd)?)
            / (4.0 * hp * hd);
        sens[(2 * b, 2 * b)] = dpp;
        sens[(2 * b + 1, 2 * b + 1)] = ddd;
        sens[(2 * b, 2 * b + 1)] = dpd;
        sens[(2 * b + 1, 2 * b)] = dpd;
    }
    let mut var = nalgebra::DMatrix::<f64>::zeros(4, 4);
    for r in data.studies() {
        let s = study_score(r, &x, margin, rule)?;
        for i in 0..4 {
            for j in 0..4 {
                var[(i, j)] += s[i] * s[j];
            }
        }
    }
    let sens_inv = nalgebra::Cholesky::new(sens.clone())
        .ok_or_else(|| {
            Error::numerical(
                "composite sensitivity matrix is not positive definite".to_string(),
            )
        })?
        .inverse();
    let cov = &sens_inv * &var * &sens_inv;
    let to_arr = |m: &nalgebra::DMatrix<f64>| -> [[f64; 4]; 4] {
        let mut a = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] = m[(i, j)];
            }
        }
        a
    };
    Ok(GodambeMatrix {
        sensitivity: to_arr(&sens),
        variability: to_arr(&var),
        covariance: to_arr(&cov),
    })
}

/// Fits the model by composite likelihood: two independent univariate fits,
/// with standard errors from the inverse Godambe information. The copula
/// parameter is not estimated; the returned tau is zero with no standard
/// error.
pub fn fit_cl(
    data: &Dataset,
    margin: &MarginSpec,
    rule: &QuadratureRule,
    options: &FitOptions,
) -> Result<FitResult> {
    if data.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "fitting requires at least 2 studies, got {}",
            data.len()
        )));
    }
    let init = options
        .init
        .unwrap_or_else(|| crate::likelihood::default_init(data, margin, crate::copulas::CopulaFamily::Bvn));
    init.validate(margin, crate::copulas::CopulaFamily::Bvn).ok();
    let max_evals = options.max_evals.unwrap_or(5000);
    let f1 = fit_side(
        data,
        Side::Sensitivity,
        margin,
        rule,
        (init.pi1, init.delta1),
        max_evals,
    );
    let f2 = fit_side(
        data,
        Side::Specificity,
        margin,
        rule,
        (init.pi2, init.delta2),
        max_evals,
    );
    let estimates = ParamVector {
        pi1: f1.pi,
        pi2: f2.pi,
        delta1: f1.delta,
        delta2: f2.delta,
        tau: 0.0,
    };
    let converged = f1.converged && f2.converged;
    let mut fit = FitResult {
        estimates,
        std_errors: [None; 5],
        covariance: None,
        loglik: f1.loglik + f2.loglik,
        converged,
        boundary_flag: false,
        n_evaluations: (f1.n_evals + f2.n_evals) as u64,
    };
    if !converged {
        return Ok(fit);
    }
    let floor = crate::likelihood::delta_floor(margin);
    let delta_at_edge = |d: f64| match margin.family() {
        MarginFamily::Normal => d < floor,
        MarginFamily::Beta => d < floor || d > 1.0 - floor,
    };
    let d1_edge = delta_at_edge(estimates.delta1);
    let d2_edge = delta_at_edge(estimates.delta2);
    fit.boundary_flag = d1_edge || d2_edge;
    match godambe(data, &estimates, margin, rule) {
        Ok(g) => {
            // map (pi1, delta1, pi2, delta2) into the fit-result ordering
            // (pi1, pi2, delta1, delta2, tau)
            let order = [0usize, 2, 1, 3];
            let mut full = [[0.0; 5]; 5];
            for i in 0..4 {
                for j in 0..4 {
                    full[i][j] = g.covariance[order[i]][order[j]];
                }
            }
            let edge = [false, false, d1_edge, d2_edge, false];
            for k in 0..4 {
                if edge[k] {
                    for j in 0..5 {
                        full[k][j] = 0.0;
                        full[j][k] = 0.0;
                    }
                    continue;
                }
                let v = full[k][k];
                if v > 0.0 {
                    fit.std_errors[k] = Some(v.sqrt());
                }
            }
            fit.covariance = Some(full);
        }
        Err(_) => {
            fit.boundary_flag = true;
        }
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gauss_legendre, Link};
    use approx::assert_abs_diff_eq;

    fn rule15() -> QuadratureRule {
        gauss_legendre(15).unwrap()
    }

    // deliberately heterogeneous proportions so the dispersion estimates
    // land in the interior of the parameter space
    fn toy_data() -> Dataset {
        Dataset::new(vec![
            StudyRecord::new(28, 30, 12, 25).unwrap(),
            StudyRecord::new(11, 21, 26, 28).unwrap(),
            StudyRecord::new(40, 55, 20, 44).unwrap(),
            StudyRecord::new(17, 18, 18, 20).unwrap(),
            StudyRecord::new(15, 33, 29, 30).unwrap(),
            StudyRecord::new(51, 62, 22, 47).unwrap(),
            StudyRecord::new(30, 41, 33, 36).unwrap(),
            StudyRecord::new(24, 26, 14, 31).unwrap(),
        ])
    }

    #[test]
    fn beta_univariate_matches_closed_form() {
        let margin = MarginSpec::beta();
        let got = univariate_logpmf(7, 12, 0.76, 0.03, &margin, &rule15()).unwrap();
        let want = betabinomial_logpmf(7, 12, 0.76, 0.03).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-14);
    }

    #[test]
    fn normal_univariate_is_a_proper_pmf() {
        let margin = MarginSpec::normal(Link::Logit).unwrap();
        let rule = gauss_legendre(40).unwrap();
        let n = 20;
        let total: f64 = (0..=n)
            .map(|y| {
                univariate_logpmf(y, n, 0.79, 0.43, &margin, &rule)
                    .unwrap()
                    .exp()
            })
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_denominator_contributes_nothing() {
        let margin = MarginSpec::beta();
        assert_eq!(
            univariate_logpmf(0, 0, 0.5, 0.1, &margin, &rule15()).unwrap(),
            0.0
        );
    }

    #[test]
    fn cl_fit_recovers_plausible_proportions() {
        let data = toy_data();
        let margin = MarginSpec::beta();
        let fit = fit_cl(&data, &margin, &rule15(), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.estimates.pi1 > 0.6 && fit.estimates.pi1 < 0.95);
        assert!(fit.estimates.pi2 > 0.6 && fit.estimates.pi2 < 0.95);
        assert_eq!(fit.estimates.tau, 0.0);
        assert!(fit.std_errors[4].is_none());
        assert!(fit.std_errors[0].is_some());
    }

    #[test]
    fn godambe_covariance_is_symmetric() {
        let data = toy_data();
        let margin = MarginSpec::beta();
        let fit = fit_cl(&data, &margin, &rule15(), &FitOptions::default()).unwrap();
        let g = godambe(&data, &fit.estimates, &margin, &rule15()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    g.covariance[i][j],
                    g.covariance[j][i],
                    epsilon = 1e-8
                );
                assert_abs_diff_eq!(
                    g.variability[i][j],
                    g.variability[j][i],
                    epsilon = 1e-10
                );
            }
            assert!(g.covariance[i][i] > 0.0);
        }
    }
}
