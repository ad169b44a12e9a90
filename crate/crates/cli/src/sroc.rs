//! SROC artifact emission from a fit report: quantile regression curves in
//! both directions, the random-effects density grid, study points, the
//! summary operating point, and an optional SVG overlay.

use std::path::Path;

use copmix::copulas::{CopulaFamily, CopulaSpec};
use copmix::numerics::MarginSpec;
use copmix::simulation::parse_margin;
use copmix::synthesis::{
    default_grid, quantile_curve, random_effects_density, regions_suppressed, CurveDirection,
    GridSpec, SrocCurve,
};
use std::str::FromStr;

use crate::report::{FitReport, Method, ModelFit};
use crate::svg::{contour_segments, mass_level, SvgPlot};
use crate::CliError;

/// Picks the model the SROC is drawn from: the report's best model, which
/// must be a converged full-likelihood fit.
fn select_model(report: &FitReport) -> Result<&ModelFit, CliError> {
    let best = report
        .best
        .ok_or_else(|| CliError::NoConvergence("no converged model in the report".to_string()))?;
    let model = &report.models[best];
    if model.method != Method::Ml {
        return Err(CliError::input(
            "the report's best model is a composite-likelihood fit, which sets the \
             dependence to independence by definition; SROC curves need a dependence \
             estimate from a full-likelihood fit"
                .to_string(),
        ));
    }
    Ok(model)
}

fn curve_csv(curve: &SrocCurve, grid: &[f64]) -> String {
    let mut out = String::from("conditioning,sensitivity,specificity\n");
    for (g, (sens, spec)) in grid.iter().zip(&curve.points) {
        out.push_str(&format!("{g},{sens},{spec}\n"));
    }
    out
}

pub struct SrocFiles {
    pub written: Vec<String>,
    pub suppressed: bool,
}

pub fn emit(
    report: &FitReport,
    out_dir: &Path,
    quantiles: &[f64],
    with_svg: bool,
) -> Result<SrocFiles, CliError> {
    let model = select_model(report)?;
    let fit = model.fit.as_ref().expect("converged model carries a fit");
    let margin: MarginSpec =
        parse_margin(&model.margin).map_err(|e| CliError::input(e.to_string()))?;
    let family = CopulaFamily::from_str(
        model
            .copula
            .as_deref()
            .expect("full-likelihood model carries a family"),
    )
    .map_err(|e| CliError::input(e.to_string()))?;
    let params = fit.estimates;
    let copula = CopulaSpec::from_tau(family, params.tau).map_err(CliError::from_core)?;
    let suppressed = regions_suppressed(params.tau);

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    let mut write = |name: &str, content: &str| -> Result<(), CliError> {
        let path = out_dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        written.push(name.to_string());
        Ok(())
    };

    let grid = default_grid(101);
    let mut median: Option<SrocCurve> = None;
    let mut others: Vec<SrocCurve> = Vec::new();
    for direction in [CurveDirection::X1OnX2, CurveDirection::X2OnX1] {
        for &q in quantiles {
            let curve = quantile_curve(&params, &margin, &copula, direction, q, &grid)
                .map_err(CliError::from_core)?;
            write(
                &format!("curve_{direction}_q{q}.csv"),
                &curve_csv(&curve, &grid),
            )?;
            if direction == CurveDirection::X1OnX2 && (q - 0.5).abs() < 1e-12 {
                median = Some(curve);
            } else if direction == CurveDirection::X1OnX2 {
                others.push(curve);
            }
        }
    }

    let spec = GridSpec::default();
    let density = random_effects_density(&params, &margin, &copula, &spec)
        .map_err(CliError::from_core)?;
    let mut density_csv = String::from("x1,x2,density\n");
    for (i, x1) in density.grid_x1.iter().enumerate() {
        for (j, x2) in density.grid_x2.iter().enumerate() {
            density_csv.push_str(&format!("{x1},{x2},{}\n", density.density[i][j]));
        }
    }
    write("density.csv", &density_csv)?;

    let mut points_csv = String::from("study,sensitivity,specificity\n");
    let mut points = Vec::new();
    for row in &report.data {
        let sens = if row.n_diseased > 0 {
            row.tp as f64 / row.n_diseased as f64
        } else {
            f64::NAN
        };
        let spec = if row.n_healthy > 0 {
            row.tn as f64 / row.n_healthy as f64
        } else {
            f64::NAN
        };
        points_csv.push_str(&format!("{},{sens},{spec}\n", row.study));
        if sens.is_finite() && spec.is_finite() {
            points.push((sens, spec));
        }
    }
    write("study_points.csv", &points_csv)?;
    write(
        "summary_point.csv",
        &format!(
            "sensitivity,specificity\n{},{}\n",
            params.pi1, params.pi2
        ),
    )?;

    if with_svg {
        let label = format!(
            "SROC — {} {} {}",
            model.method,
            model.copula.as_deref().unwrap_or(""),
            model.margin
        );
        let mut plot = SvgPlot::new(&label);
        if suppressed {
            plot.comment("predictive region suppressed: dependence at the comonotonic boundary");
        } else {
            for mass in [0.5, 0.95] {
                let level =
                    mass_level(&density.grid_x1, &density.grid_x2, &density.density, mass);
                for ((s1, p1), (s2, p2)) in
                    contour_segments(&density.grid_x1, &density.grid_x2, &density.density, level)
                {
                    plot.polyline(&[(s1, p1), (s2, p2)], "#7799cc", 1.0, None);
                }
            }
            for curve in &others {
                plot.polyline(&curve.points, "#888888", 1.0, Some("4 3"));
            }
        }
        if let Some(curve) = &median {
            plot.polyline(&curve.points, "#cc3333", 2.0, None);
        }
        for &(sens, spec) in &points {
            plot.circle(sens, spec, 3.5, "#333333");
        }
        plot.cross(params.pi1, params.pi2, 6.0, "#cc3333");
        write("sroc.svg", &plot.finish())?;
    }

    Ok(SrocFiles { written, suppressed })
}
