//! Derived summaries of a fitted model: diagnostic odds ratio, summary
//! operating point, quantile-regression SROC curves, and the random-effects
//! density surface for contour plots.

use serde::{Deserialize, Serialize};

use crate::copulas::CopulaSpec;
use crate::error::{Error, Result};
use crate::likelihood::{FitResult, ParamVector};
use crate::numerics::{MarginFamily, MarginSpec};

/// Which variable is conditioned on when tracing a quantile curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveDirection {
    /// x1 as a function of x2 (sensitivity given specificity).
    X1OnX2,
    /// x2 as a function of x1.
    X2OnX1,
}

impl std::fmt::Display for CurveDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveDirection::X1OnX2 => write!(f, "x1_on_x2"),
            CurveDirection::X2OnX1 => write!(f, "x2_on_x1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Natural,
    Logit,
}

/// A quantile-regression SROC curve: the q-quantile of one margin given the
/// other, traced over a grid of conditioning values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrocCurve {
    pub direction: CurveDirection,
    pub q: f64,
    /// (sensitivity, specificity) pairs; monotone in the conditioning
    /// coordinate.
    pub points: Vec<(f64, f64)>,
    pub scale: Scale,
}

/// The random-effects density evaluated over a rectangular grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid_x1: Vec<f64>,
    pub grid_x2: Vec<f64>,
    /// Row-major over (x1 index, x2 index).
    pub density: Vec<Vec<f64>>,
    pub scale: Scale,
}

/// Grid request for `random_effects_density`; ranges are always in natural
/// probability units even when the evaluation scale is logit.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub range1: (f64, f64),
    pub range2: (f64, f64),
    pub scale: Scale,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n1: 101,
            n2: 101,
            range1: (0.01, 0.99),
            range2: (0.01, 0.99),
            scale: Scale::Natural,
        }
    }
}

/// Ratio of the two odds, exactly as the source defines it:
/// [pi1/(1-pi1)] / [pi2/(1-pi2)].
///
/// Note this *divides* the odds, while the conventional diagnostic odds
/// ratio multiplies the sensitivity odds by the specificity odds; the
/// division form is kept deliberately to match the reference results.
pub fn diagnostic_odds_ratio(pi1: f64, pi2: f64) -> Result<f64> {
    for pi in [pi1, pi2] {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::domain(format!(
                "diagnostic odds ratio requires probabilities in (0,1), got {pi}"
            )));
        }
    }
    Ok((pi1 / (1.0 - pi1)) / (pi2 / (1.0 - pi2)))
}

/// Diagnostic odds ratio with a delta-method standard error computed on the
/// log scale from the (pi1, pi2) block of the parameter covariance, then
/// transformed back.
pub fn diagnostic_odds_ratio_with_se(
    pi1: f64,
    pi2: f64,
    covariance: &[[f64; 5]; 5],
) -> Result<(f64, Option<f64>)> {
    let dor = diagnostic_odds_ratio(pi1, pi2)?;
    // log dOR = logit(pi1) - logit(pi2)
    let g1 = 1.0 / (pi1 * (1.0 - pi1));
    let g2 = -1.0 / (pi2 * (1.0 - pi2));
    let var = g1 * g1 * covariance[0][0]
        + g2 * g2 * covariance[1][1]
        + 2.0 * g1 * g2 * covariance[0][1];
    if var > 0.0 {
        Ok((dor, Some(dor * var.sqrt())))
    } else {
        Ok((dor, None))
    }
}

/// The summary operating point (pi1-hat, pi2-hat) of a converged fit.
pub fn summary_point(fit: &FitResult) -> Result<(f64, f64)> {
    if !fit.converged {
        return Err(Error::invalid_state(
            "summary point requires a converged fit".to_string(),
        ));
    }
    Ok((fit.estimates.pi1, fit.estimates.pi2))
}

/// Whether predictive/confidence regions should be suppressed because the
/// dependence is close enough to comonotonic that they are meaningless.
pub fn regions_suppressed(tau: f64) -> bool {
    tau.abs() > 0.99
}

/// Evenly spaced conditioning grid on [0.01, 0.99].
pub fn default_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.01 + 0.98 * i as f64 / (n - 1) as f64)
        .collect()
}

/// Traces the q-quantile of one margin given the other over `grid`
/// (conditioning values, natural probabilities, strictly increasing).
pub fn quantile_curve(
    params: &ParamVector,
    margin: &MarginSpec,
    copula: &CopulaSpec,
    direction: CurveDirection,
    q: f64,
    grid: &[f64],
) -> Result<SrocCurve> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid_argument(format!(
            "quantile level must be in (0,1), got {q}"
        )));
    }
    if grid.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::domain(
            "conditioning grid values must be in (0,1)".to_string(),
        ));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &x in grid {
        let pair = match direction {
            CurveDirection::X1OnX2 => {
                let u2 = margin.uniform_score(x, params.pi2, params.delta2)?;
                let u1 = copula.inv_ccdf_given_second(q, u2)?;
                (margin.success_prob(u1, params.pi1, params.delta1)?, x)
            }
            CurveDirection::X2OnX1 => {
                let u1 = margin.uniform_score(x, params.pi1, params.delta1)?;
                let u2 = copula.inv_ccdf(q, u1)?;
                (x, margin.success_prob(u2, params.pi2, params.delta2)?)
            }
        };
        points.push(pair);
    }
    Ok(SrocCurve {
        direction,
        q,
        points,
        scale: Scale::Natural,
    })
}

/// Evaluates the random-effects density c(F1(x1), F2(x2)) f1(x1) f2(x2)
/// over the requested grid.
///
/// On the logit scale (normal margins only) the grid coordinates are the
/// link-scale values and the density is of the latent pair there.
pub fn random_effects_density(
    params: &ParamVector,
    margin: &MarginSpec,
    copula: &CopulaSpec,
    spec: &GridSpec,
) -> Result<DensityGrid> {
    margin.check_delta(params.delta1)?;
    margin.check_delta(params.delta2)?;
    if spec.n1 < 2 || spec.n2 < 2 {
        return Err(Error::invalid_argument(
            "density grid needs at least 2 points per axis".to_string(),
        ));
    }
    for (lo, hi) in [spec.range1, spec.range2] {
        if !(lo > 0.0 && hi < 1.0 && lo < hi) {
            return Err(Error::domain(format!(
                "grid range must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
            )));
        }
    }
    if matches!(spec.scale, Scale::Logit) && matches!(margin.family(), MarginFamily::Beta) {
        return Err(Error::invalid_argument(
            "logit-scale density grids require normal margins".to_string(),
        ));
    }
    let axis = |n: usize, (lo, hi): (f64, f64)| -> Result<(Vec<f64>, Vec<f64>)> {
        // natural probabilities used for evaluation, plus the emitted
        // coordinates (transformed when on the logit scale)
        let probs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let coords = match spec.scale {
            Scale::Natural => probs.clone(),
            Scale::Logit => {
                let llo = margin.link().apply(lo)?;
                let lhi = margin.link().apply(hi)?;
                (0..n)
                    .map(|i| llo + (lhi - llo) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        };
        Ok((probs, coords))
    };
    let (mut p1s, c1s) = axis(spec.n1, spec.range1)?;
    let (mut p2s, c2s) = axis(spec.n2, spec.range2)?;
    if matches!(spec.scale, Scale::Logit) {
        // evaluate at probabilities matching the evenly spaced logit grid
        p1s = c1s.iter().map(|&l| margin.link().inverse(l)).collect();
        p2s = c2s.iter().map(|&l| margin.link().inverse(l)).collect();
    }
    let mut density = Vec::with_capacity(spec.n1);
    for &p1 in &p1s {
        let u1 = margin.uniform_score(p1, params.pi1, params.delta1)?;
        let lf1 = margin.natural_log_pdf(p1, params.pi1, params.delta1)?;
        let mut row = Vec::with_capacity(spec.n2);
        for &p2 in &p2s {
            let u2 = margin.uniform_score(p2, params.pi2, params.delta2)?;
            let lf2 = margin.natural_log_pdf(p2, params.pi2, params.delta2)?;
            let lc = copula.log_density(u1.clamp(1e-15, 1.0 - 1e-15), u2.clamp(1e-15, 1.0 - 1e-15))?;
            let mut ld = lc + lf1 + lf2;
            if matches!(spec.scale, Scale::Logit) {
                // change of variables from the natural to the link scale
                ld -= margin.link().derivative(p1)?.ln() + margin.link().derivative(p2)?.ln();
            }
            row.push(ld.exp());
        }
        density.push(row);
    }
    Ok(DensityGrid {
        grid_x1: c1s,
        grid_x2: c2s,
        density,
        scale: spec.scale,
    })
}
