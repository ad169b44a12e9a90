//! Joint likelihood of the copula mixed model, evaluated by converting
//! independent Gauss-Legendre nodes into dependent ones through the inverse
//! conditional copula cdf, and maximum-likelihood fitting on a transformed
//! parameter scale.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::copulas::{empirical_kendall_tau, CopulaFamily, CopulaSpec};
use crate::error::{Error, Result};
use crate::numerics::{MarginFamily, MarginSpec, QuadratureRule};
use crate::optim::{nelder_mead, NmOptions};

/// One study's 2x2 table: true positives out of diseased, true negatives out
/// of healthy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub y1: u64,
    pub n1: u64,
    pub y2: u64,
    pub n2: u64,
}

impl StudyRecord {
    pub fn new(y1: u64, n1: u64, y2: u64, n2: u64) -> Result<Self> {
        if y1 > n1 || y2 > n2 {
            return Err(Error::invalid_argument(format!(
                "study counts must satisfy y <= n, got ({y1}/{n1}, {y2}/{n2})"
            )));
        }
        if n1 == 0 && n2 == 0 {
            return Err(Error::invalid_argument(
                "study must have at least one subject in one group".to_string(),
            ));
        }
        Ok(StudyRecord { y1, n1, y2, n2 })
    }
}

/// An ordered collection of studies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    studies: Vec<StudyRecord>,
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(studies: Vec<StudyRecord>) -> Self {
        Dataset {
            studies,
            labels: None,
        }
    }

    pub fn with_labels(studies: Vec<StudyRecord>, labels: Vec<String>) -> Result<Self> {
        if studies.len() != labels.len() {
            return Err(Error::invalid_argument(
                "label count must match study count".to_string(),
            ));
        }
        Ok(Dataset {
            studies,
            labels: Some(labels),
        })
    }

    pub fn studies(&self) -> &[StudyRecord] {
        &self.studies
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }
}

/// The five model parameters on the natural scale. `delta1`/`delta2` are
/// sigma for normal margins and gamma for beta margins; `tau` is Kendall's
/// tau of the between-study copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub pi1: f64,
    pub pi2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub tau: f64,
}

impl ParamVector {
    pub fn as_array(&self) -> [f64; 5] {
        [self.pi1, self.pi2, self.delta1, self.delta2, self.tau]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        ParamVector {
            pi1: a[0],
            pi2: a[1],
            delta1: a[2],
            delta2: a[3],
            tau: a[4],
        }
    }

    pub fn validate(&self, margin: &MarginSpec, family: CopulaFamily) -> Result<()> {
        for pi in [self.pi1, self.pi2] {
            if !(pi > 0.0 && pi < 1.0) {
                return Err(Error::domain(format!("pi {pi} outside (0,1)")));
            }
        }
        margin.check_delta(self.delta1)?;
        margin.check_delta(self.delta2)?;
        let (lo, hi) = family.tau_range();
        if !self.tau.is_finite() || self.tau < lo || self.tau > hi {
            return Err(Error::domain(format!(
                "tau {} outside [{lo}, {hi}] for {family}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Estimates, standard errors and diagnostics of a fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub estimates: ParamVector,
    /// Per-parameter standard errors in the order (pi1, pi2, delta1, delta2,
    /// tau); entries are withheld at boundary solutions or when the Hessian
    /// is not positive definite.
    pub std_errors: [Option<f64>; 5],
    /// Covariance of the natural-scale parameters matching `std_errors`
    /// (zero rows/columns for withheld parameters).
    pub covariance: Option<[[f64; 5]; 5]>,
    pub loglik: f64,
    pub converged: bool,
    /// Set when tau or a dispersion estimate sits at the edge of the
    /// parameter space; standard errors there are unreliable.
    pub boundary_flag: bool,
    pub n_evaluations: u64,
}

struct BinomialTerm {
    y: f64,
    n: f64,
    ln_choose: f64,
}

impl BinomialTerm {
    fn new(y: u64, n: u64) -> Self {
        let (yf, nf) = (y as f64, n as f64);
        BinomialTerm {
            y: yf,
            n: nf,
            ln_choose: ln_gamma(nf + 1.0) - ln_gamma(yf + 1.0) - ln_gamma(nf - yf + 1.0),
        }
    }

    fn logpmf(&self, p: f64) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        if p <= 0.0 {
            return if self.y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if p >= 1.0 {
            return if self.y == self.n { 0.0 } else { f64::NEG_INFINITY };
        }
        self.ln_choose + self.y * p.ln() + (self.n - self.y) * (-p).ln_1p()
    }
}

/// Precomputed per-parameter state for evaluating the double quadrature sum:
/// success probabilities at every (dependent) node pair.
pub(crate) struct JointEvaluator {
    nq: usize,
    log_w: Vec<f64>,
    p1: Vec<f64>,
    /// row-major over (q1, q2): success probability of the second margin at
    /// C^{-1}(u_{q2} | u_{q1}).
    p2: Vec<f64>,
}

impl JointEvaluator {
    pub(crate) fn build(
        params: &ParamVector,
        margin: &MarginSpec,
        copula: &CopulaSpec,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        if rule.order() < 2 {
            return Err(Error::invalid_argument(
                "joint evaluation needs a rule of order >= 2".to_string(),
            ));
        }
        params.validate(margin, copula.family())?;
        let nq = rule.order();
        let nodes = rule.nodes();
        let log_w: Vec<f64> = rule.weights().iter().map(|w| w.ln()).collect();
        let p1: Vec<f64> = nodes
            .iter()
            .map(|&u| margin.success_prob(u, params.pi1, params.delta1))
            .collect::<Result<_>>()?;
        let mut p2 = Vec::with_capacity(nq * nq);
        if copula.is_independence() {
            let row: Vec<f64> = nodes
                .iter()
                .map(|&u| margin.success_prob(u, params.pi2, params.delta2))
                .collect::<Result<_>>()?;
            for _ in 0..nq {
                p2.extend_from_slice(&row);
            }
        } else {
            for &u1 in nodes {
                for &u2 in nodes {
                    let v = copula.inv_ccdf(u2, u1)?;
                    p2.push(margin.success_prob(v, params.pi2, params.delta2)?);
                }
            }
        }
        Ok(JointEvaluator { nq, log_w, p1, p2 })
    }

    pub(crate) fn record_logpmf(&self, record: &StudyRecord) -> Result<f64> {
        let side1 = BinomialTerm::new(record.y1, record.n1);
        let side2 = BinomialTerm::new(record.y2, record.n2);
        let a1: Vec<f64> = self.p1.iter().map(|&p| side1.logpmf(p)).collect();
        let mut terms = Vec::with_capacity(self.nq * self.nq);
        let mut max = f64::NEG_INFINITY;
        for q1 in 0..self.nq {
            let base = self.log_w[q1] + a1[q1];
            for q2 in 0..self.nq {
                let t = base + self.log_w[q2] + side2.logpmf(self.p2[q1 * self.nq + q2]);
                if t > max {
                    max = t;
                }
                terms.push(t);
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::numerical(format!(
                "joint pmf underflowed to zero for study ({}/{}, {}/{})",
                record.y1, record.n1, record.y2, record.n2
            )));
        }
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        let out = max + sum.ln();
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::numerical(format!(
                "non-finite joint log-pmf for study ({}/{}, {}/{})",
                record.y1, record.n1, record.y2, record.n2
            )))
        }
    }
}

/// Log of the joint pmf of one study under the copula mixed model.
pub fn joint_logpmf(
    record: &StudyRecord,
    params: &ParamVector,
    margin: &MarginSpec,
    copula: &CopulaSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    JointEvaluator::build(params, margin, copula, rule)?.record_logpmf(record)
}

/// Negative joint log-likelihood over all studies.
pub fn negative_loglik(
    data: &Dataset,
    params: &ParamVector,
    margin: &MarginSpec,
    copula: &CopulaSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    let eval = JointEvaluator::build(params, margin, copula, rule)?;
    let mut total = 0.0;
    for (i, record) in data.studies().iter().enumerate() {
        total -= eval.record_logpmf(record).map_err(|e| {
            Error::numerical(format!("study {i}: {e}"))
        })?;
    }
    Ok(total)
}

// ---- parameter transforms -----------------------------------------------

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

/// Bijections between the natural parameters and an unconstrained scale:
/// logit for probabilities, log sigma or logit gamma for dispersions, and a
/// logistic map of tau onto the family's attainable interval.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamTransform {
    margin_family: MarginFamily,
    tau_lo: f64,
    tau_hi: f64,
    pub fix_tau: Option<f64>,
}

impl ParamTransform {
    pub(crate) fn new(margin: &MarginSpec, family: CopulaFamily, fix_tau: Option<f64>) -> Self {
        let (tau_lo, tau_hi) = family.fitting_tau_range();
        ParamTransform {
            margin_family: margin.family(),
            tau_lo,
            tau_hi,
            fix_tau,
        }
    }

    fn delta_to_z(&self, delta: f64) -> f64 {
        match self.margin_family {
            MarginFamily::Normal => delta.ln(),
            MarginFamily::Beta => logit(delta),
        }
    }

    fn delta_from_z(&self, z: f64) -> f64 {
        match self.margin_family {
            MarginFamily::Normal => z.exp(),
            MarginFamily::Beta => expit(z),
        }
    }

    fn tau_to_z(&self, tau: f64) -> f64 {
        logit((tau - self.tau_lo) / (self.tau_hi - self.tau_lo))
    }

    fn tau_from_z(&self, z: f64) -> f64 {
        self.tau_lo + (self.tau_hi - self.tau_lo) * expit(z)
    }

    pub(crate) fn to_z(&self, p: &ParamVector) -> Vec<f64> {
        let mut z = vec![
            logit(p.pi1),
            logit(p.pi2),
            self.delta_to_z(p.delta1),
            self.delta_to_z(p.delta2),
        ];
        if self.fix_tau.is_none() {
            z.push(self.tau_to_z(p.tau));
        }
        z
    }

    pub(crate) fn from_z(&self, z: &[f64]) -> ParamVector {
        ParamVector {
            pi1: expit(z[0]),
            pi2: expit(z[1]),
            delta1: self.delta_from_z(z[2]),
            delta2: self.delta_from_z(z[3]),
            tau: match self.fix_tau {
                Some(t) => t,
                None => self.tau_from_z(z[4]),
            },
        }
    }
}

// ---- ML fitting ---------------------------------------------------------

/// Options controlling `fit_ml`.
#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Starting values; the pooled-proportion initializer is used when None.
    pub init: Option<ParamVector>,
    /// Fixes tau at the given value and profiles the remaining parameters.
    pub fix_tau: Option<f64>,
    /// Overrides the 5000-evaluation cap.
    pub max_evals: Option<usize>,
}

/// Dispersion floors below which an estimate counts as a boundary solution.
pub(crate) fn delta_floor(margin: &MarginSpec) -> f64 {
    match margin.family() {
        MarginFamily::Normal => 1e-3,
        MarginFamily::Beta => 1e-4,
    }
}

/// Pooled-proportion starting values; tau starts from the empirical
/// Kendall's tau of the per-study logit proportions, clamped to 90% of the
/// family's range.
pub fn default_init(data: &Dataset, margin: &MarginSpec, family: CopulaFamily) -> ParamVector {
    let (mut sy1, mut sn1, mut sy2, mut sn2) = (0u64, 0u64, 0u64, 0u64);
    for r in data.studies() {
        sy1 += r.y1;
        sn1 += r.n1;
        sy2 += r.y2;
        sn2 += r.n2;
    }
    let pool = |y: u64, n: u64| -> f64 {
        if n == 0 {
            0.5
        } else {
            (y as f64 / n as f64).clamp(0.01, 0.99)
        }
    };
    let delta0 = match margin.family() {
        MarginFamily::Normal => 0.5,
        MarginFamily::Beta => 0.1,
    };
    let xs: Vec<f64> = data
        .studies()
        .iter()
        .map(|r| logit((r.y1 as f64 + 0.5) / (r.n1 as f64 + 1.0)))
        .collect();
    let ys: Vec<f64> = data
        .studies()
        .iter()
        .map(|r| logit((r.y2 as f64 + 0.5) / (r.n2 as f64 + 1.0)))
        .collect();
    let tau_emp = empirical_kendall_tau(&xs, &ys);
    let (lo, hi) = family.fitting_tau_range();
    let width = hi - lo;
    let tau0 = tau_emp.clamp(lo + 0.05 * width, hi - 0.05 * width);
    ParamVector {
        pi1: pool(sy1, sn1),
        pi2: pool(sy2, sn2),
        delta1: delta0,
        delta2: delta0,
        tau: tau0,
    }
}

/// Maximum-likelihood fit by Nelder-Mead on the transformed scale, with
/// standard errors from the numerically differentiated Hessian on the
/// natural scale.
pub fn fit_ml(
    data: &Dataset,
    margin: &MarginSpec,
    family: CopulaFamily,
    rule: &QuadratureRule,
    options: &FitOptions,
) -> Result<FitResult> {
    if data.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "fitting requires at least 2 studies, got {}",
            data.len()
        )));
    }
    let transform = ParamTransform::new(margin, family, options.fix_tau);
    let init = options
        .init
        .unwrap_or_else(|| default_init(data, margin, family));
    let init = match options.fix_tau {
        Some(t) => ParamVector { tau: t, ..init },
        None => init,
    };
    init.validate(margin, family)?;

    let objective = |z: &[f64]| -> f64 {
        let p = transform.from_z(z);
        match CopulaSpec::from_tau(family, p.tau)
            .and_then(|c| negative_loglik(data, &p, margin, &c, rule))
        {
            Ok(v) => v,
            Err(_) => f64::INFINITY,
        }
    };

    let nm_opts = NmOptions {
        max_evals: options.max_evals.unwrap_or(5000),
        ..NmOptions::default()
    };
    let z0 = transform.to_z(&init);
    let result = nelder_mead(objective, &z0, &nm_opts);
    let estimates = transform.from_z(&result.x);
    let converged = result.converged && result.fx.is_finite();

    let mut fit = FitResult {
        estimates,
        std_errors: [None; 5],
        covariance: None,
        loglik: -result.fx,
        converged,
        boundary_flag: false,
        n_evaluations: result.n_evals as u64,
    };
    if converged {
        attach_standard_errors(&mut fit, data, margin, family, rule, options.fix_tau);
    }
    Ok(fit)
}

/// Which natural-scale parameters sit at a parameter-space edge.
fn boundary_mask(
    p: &ParamVector,
    margin: &MarginSpec,
    family: CopulaFamily,
    fix_tau: Option<f64>,
) -> [bool; 5] {
    let floor = delta_floor(margin);
    let delta_at_edge = |d: f64| match margin.family() {
        MarginFamily::Normal => d < floor,
        MarginFamily::Beta => d < floor || d > 1.0 - floor,
    };
    let (lo, hi) = family.fitting_tau_range();
    let tau_at_edge =
        fix_tau.is_none() && ((p.tau - lo).abs() < 1e-3 || (hi - p.tau).abs() < 1e-3);
    [
        false,
        false,
        delta_at_edge(p.delta1),
        delta_at_edge(p.delta2),
        tau_at_edge,
    ]
}

/// Natural-scale central-difference Hessian of the negative log-likelihood,
/// inverted for the covariance. Boundary parameters are excluded and their
/// standard errors withheld.
fn attach_standard_errors(
    fit: &mut FitResult,
    data: &Dataset,
    margin: &MarginSpec,
    family: CopulaFamily,
    rule: &QuadratureRule,
    fix_tau: Option<f64>,
) {
    let p = fit.estimates;
    let mask = boundary_mask(&p, margin, family, fix_tau);
    fit.boundary_flag = mask.iter().any(|&b| b);
    let mut active: Vec<usize> = (0..5)
        .filter(|&k| !mask[k] && !(k == 4 && fix_tau.is_some()))
        .collect();
    // a tau estimate cannot carry an SE if the whole family collapsed
    if active.is_empty() {
        return;
    }
    let f = |a: &[f64; 5]| -> Option<f64> {
        let params = ParamVector::from_array(*a);
        let copula = CopulaSpec::from_tau(family, params.tau).ok()?;
        negative_loglik(data, &params, margin, &copula, rule).ok()
    };
    let x = p.as_array();
    let h: Vec<f64> = active
        .iter()
        .map(|&k| (1e-3 * x[k].abs()).max(1e-4))
        .collect();
    // keep perturbed probabilities and taus inside their domains
    for (pos, &k) in active.clone().iter().enumerate() {
        let (lo, hi) = match k {
            0 | 1 => (0.0, 1.0),
            4 => family.fitting_tau_range(),
            _ => match margin.family() {
                MarginFamily::Beta => (0.0, 1.0),
                MarginFamily::Normal => (0.0, f64::INFINITY),
            },
        };
        if x[k] - h[pos] <= lo || x[k] + h[pos] >= hi {
            active.retain(|&a| a != k);
        }
    }
    if active.is_empty() {
        return;
    }
    let h: Vec<f64> = active
        .iter()
        .map(|&k| (1e-3 * x[k].abs()).max(1e-4))
        .collect();
    let m = active.len();
    let f0 = match f(&x) {
        Some(v) => v,
        None => return,
    };
    let mut hess = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let ki = active[i];
        let mut xp = x;
        let mut xm = x;
        xp[ki] += h[i];
        xm[ki] -= h[i];
        let (fp, fm) = match (f(&xp), f(&xm)) {
            (Some(a), Some(b)) => (a, b),
            _ => return,
        };
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..m {
            let kj = active[j];
            let mut xpp = x;
            let mut xpm = x;
            let mut xmp = x;
            let mut xmm = x;
            xpp[ki] += h[i];
            xpp[kj] += h[j];
            xpm[ki] += h[i];
            xpm[kj] -= h[j];
            xmp[ki] -= h[i];
            xmp[kj] += h[j];
            xmm[ki] -= h[i];
            xmm[kj] -= h[j];
            let vals = match (f(&xpp), f(&xpm), f(&xmp), f(&xmm)) {
                (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                _ => return,
            };
            let v = (vals.0 - vals.1 - vals.2 + vals.3) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    // positive definiteness check doubles as the invertibility check
    let chol = match nalgebra::Cholesky::new(hess.clone()) {
        Some(c) => c,
        None => {
            fit.boundary_flag = true;
            return;
        }
    };
    let cov = chol.inverse();
    let mut full = [[0.0; 5]; 5];
    for i in 0..m {
        for j in 0..m {
            full[active[i]][active[j]] = cov[(i, j)];
        }
    }
    for (i, &k) in active.iter().enumerate() {
        let v = cov[(i, i)];
        if v > 0.0 {
            fit.std_errors[k] = Some(v.sqrt());
        }
    }
    fit.covariance = Some(full);
}
