//! The model sweep: fits every requested (copula, margin) combination,
//! ranks by log-likelihood, and renders the report in JSON, table, or CSV
//! form.

use copmix::composite::fit_cl;
use copmix::copulas::CopulaFamily;
use copmix::likelihood::{fit_ml, Dataset, FitOptions, FitResult};
use copmix::numerics::{gauss_legendre, MarginSpec};
use copmix::simulation::margin_label;
use copmix::synthesis::diagnostic_odds_ratio_with_se;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::input::StudyRow;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ml,
    Cl,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ml => "ml",
            Method::Cl => "cl",
        })
    }
}

/// One requested (method, copula, margin) combination.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub method: Method,
    pub family: Option<CopulaFamily>,
    pub margin: MarginSpec,
}

/// One fitted model in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFit {
    pub method: Method,
    /// None for composite fits, which do not estimate dependence.
    pub copula: Option<String>,
    pub margin: String,
    pub converged: bool,
    pub fit: Option<FitResult>,
    pub dor: Option<f64>,
    pub dor_se: Option<f64>,
    /// Present when the fit aborted with an error instead of converging.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub dataset: String,
    pub quad_points: usize,
    pub data: Vec<StudyRow>,
    pub models: Vec<ModelFit>,
    /// Index into `models` of the best-ranked converged model.
    pub best: Option<usize>,
}

/// Fits all requested models concurrently; output order follows the request
/// order, so the report is deterministic.
pub fn run_sweep(
    dataset_label: &str,
    rows: &[StudyRow],
    data: &Dataset,
    specs: &[ModelSpec],
    quad_points: usize,
) -> Result<FitReport, CliError> {
    let rule = gauss_legendre(quad_points).map_err(CliError::from_core)?;
    let fits: Vec<ModelFit> = specs
        .par_iter()
        .map(|spec| {
            let result = match spec.method {
                Method::Ml => fit_ml(
                    data,
                    &spec.margin,
                    spec.family.expect("ml spec carries a family"),
                    &rule,
                    &FitOptions::default(),
                ),
                Method::Cl => fit_cl(data, &spec.margin, &rule, &FitOptions::default()),
            };
            let copula = spec.family.map(|f| f.to_string());
            let margin = margin_label(&spec.margin);
            match result {
                Ok(fit) => {
                    let (dor, dor_se) = match fit.covariance {
                        Some(cov) => diagnostic_odds_ratio_with_se(
                            fit.estimates.pi1,
                            fit.estimates.pi2,
                            &cov,
                        )
                        .ok()
                        .map_or((None, None), |(d, se)| (Some(d), se)),
                        None => (
                            copmix::synthesis::diagnostic_odds_ratio(
                                fit.estimates.pi1,
                                fit.estimates.pi2,
                            )
                            .ok(),
                            None,
                        ),
                    };
                    ModelFit {
                        method: spec.method,
                        copula,
                        margin,
                        converged: fit.converged,
                        fit: Some(fit),
                        dor,
                        dor_se,
                        error: None,
                    }
                }
                Err(e) => ModelFit {
                    method: spec.method,
                    copula,
                    margin,
                    converged: false,
                    fit: None,
                    dor: None,
                    dor_se: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = select_best(&fits);
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        dataset: dataset_label.to_string(),
        quad_points,
        data: rows.to_vec(),
        models: fits,
        best,
    })
}

/// Best model: largest log-likelihood among converged fits; ties broken by
/// fewer boundary flags, then lexicographic family name. Independent of the
/// order models were fitted.
pub fn select_best(models: &[ModelFit]) -> Option<usize> {
    models
        .iter()
        .enumerate()
        .filter(|(_, m)| m.converged)
        .min_by(|(_, a), (_, b)| {
            let fa = a.fit.as_ref().unwrap();
            let fb = b.fit.as_ref().unwrap();
            fb.loglik
                .partial_cmp(&fa.loglik)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(fa.boundary_flag.cmp(&fb.boundary_flag))
                .then(a.copula.as_deref().unwrap_or("").cmp(b.copula.as_deref().unwrap_or("")))
        })
        .map(|(i, _)| i)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("−".to_string(), |x| format!("{x:.4}"))
}

/// Human-readable rendering: one block per model with Est./SE rows and the
/// log-likelihood, best model flagged.
pub fn render_table(report: &FitReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "dataset: {} ({} studies)\n\n",
        report.dataset,
        report.data.len()
    ));
    let names = ["pi1", "pi2", "delta1", "delta2", "tau"];
    for (i, m) in report.models.iter().enumerate() {
        let label = match &m.copula {
            Some(c) => format!("{} {} {}", m.method, c, m.margin),
            None => format!("{} {}", m.method, m.margin),
        };
        let tag = if report.best == Some(i) { "  (best)" } else { "" };
        out.push_str(&format!("model: {label}{tag}\n"));
        match &m.fit {
            Some(fit) if m.converged => {
                out.push_str("  param     Est.        SE\n");
                let est = fit.estimates.as_array();
                for (k, name) in names.iter().enumerate() {
                    if k == 4 && m.method == Method::Cl {
                        // composite fits do not estimate dependence
                        out.push_str(&format!("  {:<8}{:>9.4}{:>10}\n", name, est[k], "−"));
                        continue;
                    }
                    out.push_str(&format!(
                        "  {:<8}{:>9.4}{:>10}\n",
                        name,
                        est[k],
                        fmt_opt(fit.std_errors[k])
                    ));
                }
                out.push_str(&format!(
                    "  dOR     {:>9}{:>10}\n",
                    fmt_opt(m.dor),
                    fmt_opt(m.dor_se)
                ));
                out.push_str(&format!("  logL    {:>9.4}\n", fit.loglik));
                if fit.boundary_flag {
                    out.push_str("  note: boundary solution; SEs unreliable\n");
                }
            }
            Some(fit) => {
                out.push_str(&format!(
                    "  did not converge ({} evaluations)\n",
                    fit.n_evaluations
                ));
            }
            None => {
                out.push_str(&format!(
                    "  failed: {}\n",
                    m.error.as_deref().unwrap_or("unknown error")
                ));
            }
        }
        out.push('\n');
    }
    out
}

/// Flat CSV rendering, one row per model.
pub fn render_csv(report: &FitReport) -> String {
    let mut out = String::from(
        "method,copula,margin,converged,boundary,loglik,\
         pi1,se_pi1,pi2,se_pi2,delta1,se_delta1,delta2,se_delta2,tau,se_tau,dor,se_dor,best\n",
    );
    let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    for (i, m) in report.models.iter().enumerate() {
        let (loglik, boundary, est, se) = match &m.fit {
            Some(f) => (
                format!("{}", f.loglik),
                f.boundary_flag.to_string(),
                f.estimates.as_array().map(|x| format!("{x}")),
                f.std_errors.map(num),
            ),
            None => (
                String::new(),
                String::new(),
                std::array::from_fn(|_| String::new()),
                std::array::from_fn(|_| String::new()),
            ),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            m.method,
            m.copula.as_deref().unwrap_or(""),
            m.margin,
            m.converged,
            boundary,
            loglik,
            est[0],
            se[0],
            est[1],
            se[1],
            est[2],
            se[2],
            est[3],
            se[3],
            est[4],
            se[4],
            num(m.dor),
            num(m.dor_se),
            report.best == Some(i)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use copmix::likelihood::ParamVector;

    fn model(method: Method, copula: Option<&str>, loglik: f64, boundary: bool) -> ModelFit {
        ModelFit {
            method,
            copula: copula.map(str::to_string),
            margin: "normal-logit".to_string(),
            converged: true,
            fit: Some(FitResult {
                estimates: ParamVector {
                    pi1: 0.8,
                    pi2: 0.9,
                    delta1: 0.5,
                    delta2: 0.5,
                    tau: -0.3,
                },
                std_errors: [None; 5],
                covariance: None,
                loglik,
                converged: true,
                boundary_flag: boundary,
                n_evaluations: 100,
            }),
            dor: None,
            dor_se: None,
            error: None,
        }
    }

    #[test]
    fn best_is_invariant_to_fit_order() {
        let a = model(Method::Ml, Some("bvn"), -10.0, false);
        let b = model(Method::Ml, Some("frank"), -9.0, false);
        let c = model(Method::Cl, None, -12.0, false);
        let forward = vec![a.clone(), b.clone(), c.clone()];
        let reversed = vec![c, b, a];
        let best_f = select_best(&forward).unwrap();
        let best_r = select_best(&reversed).unwrap();
        assert_eq!(forward[best_f].copula.as_deref(), Some("frank"));
        assert_eq!(reversed[best_r].copula.as_deref(), Some("frank"));
    }

    #[test]
    fn ties_prefer_fewer_boundary_flags_then_family_name() {
        let models = vec![
            model(Method::Ml, Some("frank"), -9.0, true),
            model(Method::Ml, Some("clayton"), -9.0, false),
            model(Method::Ml, Some("bvn"), -9.0, false),
        ];
        let best = select_best(&models).unwrap();
        assert_eq!(models[best].copula.as_deref(), Some("bvn"));
    }

    #[test]
    fn unconverged_models_never_selected() {
        let mut broken = model(Method::Ml, Some("bvn"), 0.0, false);
        broken.converged = false;
        assert_eq!(select_best(&[broken]), None);
    }
}
