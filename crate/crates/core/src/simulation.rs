//! Data-generating process and scenario engine for the simulation studies:
//! study sizes from a shifted gamma law, dependent random effects from the
//! true copula, binomial sampling within arms, repeated fitting under a set
//! of method/margin configurations, and bias/SD/RMSE summaries.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composite::fit_cl;
use crate::copulas::{CopulaFamily, CopulaSpec};
use crate::error::{Error, Result};
use crate::likelihood::{fit_ml, Dataset, FitOptions, ParamVector, StudyRecord};
use crate::numerics::{gauss_legendre, Link, MarginFamily, MarginSpec};
use crate::synthesis::{diagnostic_odds_ratio, diagnostic_odds_ratio_with_se};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Ml,
    Cl,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMethod::Ml => write!(f, "ml"),
            FitMethod::Cl => write!(f, "cl"),
        }
    }
}

/// One estimation approach to run on every replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: FitMethod,
    pub margin: MarginSpec,
}

/// Compact text label for a margin assumption, e.g. `normal-logit` or
/// `beta`.
pub fn margin_label(margin: &MarginSpec) -> String {
    match margin.family() {
        MarginFamily::Beta => "beta".to_string(),
        MarginFamily::Normal => match margin.link() {
            Link::Logit => "normal-logit".to_string(),
            Link::Probit => "normal-probit".to_string(),
            Link::Cloglog => "normal-cloglog".to_string(),
            Link::Identity => unreachable!("rejected at construction"),
        },
    }
}

/// Parses the labels produced by `margin_label`.
pub fn parse_margin(label: &str) -> Result<MarginSpec> {
    match label.trim().to_ascii_lowercase().as_str() {
        "beta" => Ok(MarginSpec::beta()),
        "normal" | "normal-logit" => MarginSpec::normal(Link::Logit),
        "normal-probit" => MarginSpec::normal(Link::Probit),
        "normal-cloglog" => MarginSpec::normal(Link::Cloglog),
        other => Err(Error::invalid_argument(format!(
            "unknown margin '{other}' (expected beta, normal-logit, normal-probit or normal-cloglog)"
        ))),
    }
}

/// A complete simulation scenario: the truth, the study-size law, and the
/// estimation approaches to compare.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimScenario {
    pub margin_truth: MarginSpec,
    pub params_truth: ParamVector,
    pub family: CopulaFamily,
    pub n_studies: usize,
    pub prevalence: f64,
    /// Shape of the gamma part of the study-size law.
    pub size_shape: f64,
    /// Rate of the gamma part (mean size = lag + shape/rate).
    pub size_rate: f64,
    /// Additive lag (minimum study size).
    pub size_lag: f64,
    pub replicates: usize,
    pub quad_points: usize,
    pub fit_configs: Vec<FitConfig>,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        self.params_truth
            .validate(&self.margin_truth, self.family)?;
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::invalid_argument(format!(
                "prevalence must be in (0,1), got {}",
                self.prevalence
            )));
        }
        if self.size_lag < 0.0 || self.size_shape <= 0.0 || self.size_rate <= 0.0 {
            return Err(Error::invalid_argument(
                "study-size law needs lag >= 0, shape > 0, rate > 0".to_string(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::invalid_argument("replicates must be >= 1".to_string()));
        }
        if self.n_studies < 2 {
            return Err(Error::invalid_argument(
                "scenario needs at least 2 studies per replicate".to_string(),
            ));
        }
        if self.fit_configs.is_empty() {
            return Err(Error::invalid_argument(
                "scenario needs at least one fit configuration".to_string(),
            ));
        }
        Ok(())
    }

    /// Parses the flat `key = value` scenario format. Unknown keys are
    /// rejected; `fit` may repeat, one `method margin` pair per line; `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut margin: Option<MarginSpec> = None;
        let mut family: Option<CopulaFamily> = None;
        let mut pi1 = None;
        let mut pi2 = None;
        let mut delta1 = None;
        let mut delta2 = None;
        let mut tau = None;
        let mut n_studies = None;
        let mut replicates = None;
        let mut prevalence = 0.534;
        let mut size_shape = 1.2;
        let mut size_rate = 0.01;
        let mut size_lag = 30.0;
        let mut quad_points = 15usize;
        let mut fits = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid_argument(format!(
                    "scenario line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::invalid_argument(format!(
                    "scenario line {}: invalid {what} '{value}'",
                    lineno + 1
                ))
            };
            let parse_f = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
            let parse_u = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
            match key {
                "margin" => margin = Some(parse_margin(value)?),
                "family" => family = Some(value.parse().map_err(|_| bad("copula family"))?),
                "pi1" => pi1 = Some(parse_f("pi1")?),
                "pi2" => pi2 = Some(parse_f("pi2")?),
                "delta1" => delta1 = Some(parse_f("delta1")?),
                "delta2" => delta2 = Some(parse_f("delta2")?),
                "tau" => tau = Some(parse_f("tau")?),
                "n_studies" => n_studies = Some(parse_u("n_studies")?),
                "replicates" => replicates = Some(parse_u("replicates")?),
                "prevalence" => prevalence = parse_f("prevalence")?,
                "size_shape" => size_shape = parse_f("size_shape")?,
                "size_rate" => size_rate = parse_f("size_rate")?,
                "size_lag" => size_lag = parse_f("size_lag")?,
                "quad_points" => quad_points = parse_u("quad_points")?,
                "fit" => {
                    let mut it = value.split_whitespace();
                    let method = match it.next() {
                        Some("ml") => FitMethod::Ml,
                        Some("cl") => FitMethod::Cl,
                        _ => return Err(bad("fit method (ml or cl)")),
                    };
                    let margin = parse_margin(it.next().ok_or_else(|| bad("fit margin"))?)?;
                    if it.next().is_some() {
                        return Err(bad("fit line (expected 'method margin')"));
                    }
                    fits.push(FitConfig { method, margin });
                }
                other => {
                    return Err(Error::invalid_argument(format!(
                        "scenario line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        let need = |what: &str| Error::invalid_argument(format!("scenario is missing '{what}'"));
        let scenario = SimScenario {
            margin_truth: margin.ok_or_else(|| need("margin"))?,
            params_truth: ParamVector {
                pi1: pi1.ok_or_else(|| need("pi1"))?,
                pi2: pi2.ok_or_else(|| need("pi2"))?,
                delta1: delta1.ok_or_else(|| need("delta1"))?,
                delta2: delta2.ok_or_else(|| need("delta2"))?,
                tau: tau.ok_or_else(|| need("tau"))?,
            },
            family: family.ok_or_else(|| need("family"))?,
            n_studies: n_studies.ok_or_else(|| need("n_studies"))?,
            prevalence,
            size_shape,
            size_rate,
            size_lag,
            replicates: replicates.ok_or_else(|| need("replicates"))?,
            quad_points,
            fit_configs: fits,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Draws one study: size from the shifted gamma law (rounded half-up),
/// diseased/healthy split from the prevalence, within-arm counts from
/// binomials at the copula-dependent success probabilities.
pub fn draw_study<R: Rng + ?Sized>(scenario: &SimScenario, rng: &mut R) -> Result<StudyRecord> {
    let copula = CopulaSpec::from_tau(scenario.family, scenario.params_truth.tau)?;
    draw_study_with(scenario, &copula, rng)
}

fn draw_study_with<R: Rng + ?Sized>(
    scenario: &SimScenario,
    copula: &CopulaSpec,
    rng: &mut R,
) -> Result<StudyRecord> {
    let gamma = Gamma::new(scenario.size_shape, 1.0 / scenario.size_rate)
        .map_err(|e| Error::invalid_argument(format!("study-size law: {e}")))?;
    let n = (scenario.size_lag + gamma.sample(rng) + 0.5).floor() as u64;
    let (u1, u2) = copula.sample_pair(rng);
    let t = &scenario.params_truth;
    let x1 = scenario.margin_truth.success_prob(u1, t.pi1, t.delta1)?;
    let x2 = scenario.margin_truth.success_prob(u2, t.pi2, t.delta2)?;
    let n1 = Binomial::new(n, scenario.prevalence)
        .map_err(|e| Error::invalid_argument(format!("prevalence: {e}")))?
        .sample(rng);
    let n2 = n - n1;
    let draw = |n: u64, p: f64, rng: &mut R| -> u64 {
        if n == 0 {
            0
        } else {
            Binomial::new(n, p.clamp(0.0, 1.0)).expect("valid p").sample(rng)
        }
    };
    let y1 = draw(n1, x1, rng);
    let y2 = draw(n2, x2, rng);
    StudyRecord::new(y1, n1, y2, n2)
}

/// Summary statistics of one parameter under one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellStats {
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    /// Square root of the average reported variance; absent when no
    /// replicate carried a standard error for the parameter.
    pub sqrt_vbar: Option<f64>,
    /// Replicates the point-estimate statistics are based on.
    pub n_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub method: FitMethod,
    pub margin: MarginSpec,
    pub non_convergence: usize,
    /// Statistics over replicates where every configuration converged.
    pub intersection: Vec<(String, CellStats)>,
    /// Statistics over this configuration's own converged replicates.
    pub per_config: Vec<(String, CellStats)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSummary {
    pub replicates: usize,
    /// Replicates where all configurations converged.
    pub n_intersection: usize,
    pub configs: Vec<ConfigSummary>,
}

struct RepFit {
    converged: bool,
    estimates: ParamVector,
    variances: [Option<f64>; 5],
    dor: Option<(f64, Option<f64>)>,
}

fn population_stats(values: &[f64], truth: f64, variances: &[f64]) -> CellStats {
    let n = values.len();
    if n == 0 {
        return CellStats {
            bias: f64::NAN,
            sd: f64::NAN,
            rmse: f64::NAN,
            sqrt_vbar: None,
            n_used: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let bias = mean - truth;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n as f64;
    let sqrt_vbar = if variances.is_empty() {
        None
    } else {
        Some((variances.iter().sum::<f64>() / variances.len() as f64).sqrt())
    };
    CellStats {
        bias,
        sd: var.sqrt(),
        rmse: mse.sqrt(),
        sqrt_vbar,
        n_used: n,
    }
}

/// Runs every replicate of the scenario, fitting all configurations, and
/// summarizes bias/SD/RMSE/sqrt-Vbar per parameter. Deterministic for a
/// given seed regardless of thread count: each replicate owns an RNG stream
/// derived from the master seed.
pub fn run_scenario(scenario: &SimScenario, seed: u64) -> Result<SimSummary> {
    scenario.validate()?;
    let rule = gauss_legendre(scenario.quad_points)?;
    let copula = CopulaSpec::from_tau(scenario.family, scenario.params_truth.tau)?;
    let results: Vec<Result<Vec<RepFit>>> = (0..scenario.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let mut studies = Vec::with_capacity(scenario.n_studies);
            for _ in 0..scenario.n_studies {
                studies.push(draw_study_with(scenario, &copula, &mut rng)?);
            }
            let data = Dataset::new(studies);
            let fits = scenario
                .fit_configs
                .iter()
                .map(|cfg| {
                    let fit = match cfg.method {
                        FitMethod::Ml => {
                            fit_ml(&data, &cfg.margin, scenario.family, &rule, &FitOptions::default())
                        }
                        FitMethod::Cl => fit_cl(&data, &cfg.margin, &rule, &FitOptions::default()),
                    };
                    match fit {
                        Ok(f) if f.converged => {
                            let dor = f.covariance.map_or_else(
                                || {
                                    diagnostic_odds_ratio(f.estimates.pi1, f.estimates.pi2)
                                        .ok()
                                        .map(|d| (d, None))
                                },
                                |cov| {
                                    diagnostic_odds_ratio_with_se(
                                        f.estimates.pi1,
                                        f.estimates.pi2,
                                        &cov,
                                    )
                                    .ok()
                                },
                            );
                            RepFit {
                                converged: true,
                                estimates: f.estimates,
                                variances: f.std_errors.map(|se| se.map(|s| s * s)),
                                dor,
                            }
                        }
                        _ => RepFit {
                            converged: false,
                            estimates: ParamVector::from_array([f64::NAN; 5]),
                            variances: [None; 5],
                            dor: None,
                        },
                    }
                })
                .collect();
            Ok(fits)
        })
        .collect();
    let results: Vec<Vec<RepFit>> = results.into_iter().collect::<Result<_>>()?;

    let intersection: Vec<usize> = (0..scenario.replicates)
        .filter(|&r| results[r].iter().all(|f| f.converged))
        .collect();
    let truth = &scenario.params_truth;
    let dor_truth = diagnostic_odds_ratio(truth.pi1, truth.pi2)?;

    let mut configs = Vec::with_capacity(scenario.fit_configs.len());
    for (c, cfg) in scenario.fit_configs.iter().enumerate() {
        let own: Vec<usize> = (0..scenario.replicates)
            .filter(|&r| results[r][c].converged)
            .collect();
        let non_convergence = scenario.replicates - own.len();
        // parameter list: dispersion cells only when the fitted margin
        // matches the truth (otherwise sigma and gamma are incomparable);
        // tau only for full likelihood fits
        let mut params: Vec<(String, usize, f64)> = vec![
            ("pi1".to_string(), 0, truth.pi1),
            ("pi2".to_string(), 1, truth.pi2),
        ];
        if cfg.margin.family() == scenario.margin_truth.family() {
            params.push(("delta1".to_string(), 2, truth.delta1));
            params.push(("delta2".to_string(), 3, truth.delta2));
        }
        if matches!(cfg.method, FitMethod::Ml) {
            params.push(("tau".to_string(), 4, truth.tau));
        }
        let summarize = |set: &[usize]| -> Vec<(String, CellStats)> {
            let mut out = Vec::with_capacity(params.len() + 1);
            for (name, idx, t) in &params {
                let values: Vec<f64> = set
                    .iter()
                    .map(|&r| results[r][c].estimates.as_array()[*idx])
                    .collect();
                let variances: Vec<f64> = set
                    .iter()
                    .filter_map(|&r| results[r][c].variances[*idx])
                    .collect();
                out.push((name.clone(), population_stats(&values, *t, &variances)));
            }
            let dors: Vec<f64> = set
                .iter()
                .filter_map(|&r| results[r][c].dor.map(|d| d.0))
                .collect();
            let dor_vars: Vec<f64> = set
                .iter()
                .filter_map(|&r| results[r][c].dor.and_then(|d| d.1).map(|s| s * s))
                .collect();
            out.push((
                "dor".to_string(),
                population_stats(&dors, dor_truth, &dor_vars),
            ));
            out
        };
        configs.push(ConfigSummary {
            method: cfg.method,
            margin: cfg.margin,
            non_convergence,
            intersection: summarize(&intersection),
            per_config: summarize(&own),
        });
    }
    Ok(SimSummary {
        replicates: scenario.replicates,
        n_intersection: intersection.len(),
        configs,
    })
}

impl SimSummary {
    /// CSV emission, one row per (parameter, configuration, replicate set).
    /// With `scale100` the bias/SD/sqrt-Vbar/RMSE columns are multiplied by
    /// 100 as in the reference tables.
    pub fn to_csv(&self, scale100: bool) -> String {
        let k = if scale100 { 100.0 } else { 1.0 };
        let mut out = String::from(
            "parameter,method,margin,set,bias,sd,sqrt_vbar,rmse,n_used,non_convergence\n",
        );
        for cfg in &self.configs {
            let label = margin_label(&cfg.margin);
            for (set_name, cells) in
                [("intersection", &cfg.intersection), ("per_config", &cfg.per_config)]
            {
                for (param, s) in cells {
                    let vbar = s
                        .sqrt_vbar
                        .map_or(String::new(), |v| format!("{:.6}", v * k));
                    out.push_str(&format!(
                        "{param},{},{label},{set_name},{:.6},{:.6},{vbar},{:.6},{},{}\n",
                        cfg.method,
                        s.bias * k,
                        s.sd * k,
                        s.rmse * k,
                        s.n_used,
                        cfg.non_convergence
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scenario_beta() -> SimScenario {
        SimScenario {
            margin_truth: MarginSpec::beta(),
            params_truth: ParamVector {
                pi1: 0.76,
                pi2: 0.81,
                delta1: 0.03,
                delta2: 0.28,
                tau: -0.5,
            },
            family: CopulaFamily::Bvn,
            n_studies: 10,
            prevalence: 0.534,
            size_shape: 1.2,
            size_rate: 0.01,
            size_lag: 30.0,
            replicates: 4,
            quad_points: 15,
            fit_configs: vec![FitConfig {
                method: FitMethod::Cl,
                margin: MarginSpec::beta(),
            }],
        }
    }

    #[test]
    fn study_sizes_have_the_right_law() {
        let sc = scenario_beta();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sum_n = 0.0;
        let mut sum_frac = 0.0;
        let m = 10_000;
        for _ in 0..m {
            let r = draw_study(&sc, &mut rng).unwrap();
            let n = r.n1 + r.n2;
            assert!(n >= 30, "n = {n}");
            sum_n += n as f64;
            sum_frac += r.n1 as f64 / n as f64;
        }
        assert_abs_diff_eq!(sum_n / m as f64, 150.0, epsilon = 4.0);
        assert_abs_diff_eq!(sum_frac / m as f64, 0.534, epsilon = 0.01);
    }

    #[test]
    fn counts_within_arms() {
        let sc = scenario_beta();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r = draw_study(&sc, &mut rng).unwrap();
            assert!(r.y1 <= r.n1 && r.y2 <= r.n2);
        }
    }

    #[test]
    fn run_is_deterministic() {
        let sc = scenario_beta();
        let a = run_scenario(&sc, 42).unwrap();
        let b = run_scenario(&sc, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = run_scenario(&sc, 43).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn rmse_identity_holds() {
        let sc = scenario_beta();
        let s = run_scenario(&sc, 7).unwrap();
        for cfg in &s.configs {
            for (_, cell) in cfg.intersection.iter().chain(&cfg.per_config) {
                if cell.n_used > 0 {
                    assert!(
                        (cell.rmse.powi(2) - cell.bias.powi(2) - cell.sd.powi(2)).abs() < 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn scenario_parser_roundtrip() {
        let text = "
            # scenario 2 style
            margin = beta
            family = clayton90
            pi1 = 0.76
            pi2 = 0.81
            delta1 = 0.03
            delta2 = 0.28
            tau = -0.5
            n_studies = 10
            replicates = 100
            fit = ml beta
            fit = cl normal-logit
        ";
        let sc = SimScenario::parse(text).unwrap();
        assert_eq!(sc.family, CopulaFamily::Clayton90);
        assert_eq!(sc.n_studies, 10);
        assert_eq!(sc.fit_configs.len(), 2);
        assert_eq!(sc.prevalence, 0.534);
        assert_eq!(sc.quad_points, 15);
        assert!(matches!(sc.fit_configs[1].method, FitMethod::Cl));
    }

    #[test]
    fn scenario_parser_rejects_bad_input() {
        assert!(SimScenario::parse("margin = beta").is_err());
        assert!(SimScenario::parse("bogus_key = 1").is_err());
        let mut text = String::from(
            "margin = beta\nfamily = bvn\npi1 = 0.7\npi2 = 0.8\ndelta1 = 0.1\ndelta2 = 0.1\ntau = -0.5\nn_studies = 10\nreplicates = 10\n",
        );
        text.push_str("fit = nope beta\n");
        assert!(SimScenario::parse(&text).is_err());
    }

    #[test]
    fn csv_shape() {
        let sc = scenario_beta();
        let s = run_scenario(&sc, 5).unwrap();
        let csv = s.to_csv(true);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "parameter,method,margin,set,bias,sd,sqrt_vbar,rmse,n_used,non_convergence"
        );
        // CL on the true margin: pi1, pi2, delta1, delta2, dor per set
        assert_eq!(lines.count(), 10);
    }
}
