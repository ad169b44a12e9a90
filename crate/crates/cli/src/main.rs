//! `copmix`: fit copula mixed models to diagnostic accuracy meta-analyses,
//! run simulation studies, and emit SROC artifacts.

mod input;
mod report;
mod sroc;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use copmix::copulas::CopulaFamily;
use copmix::numerics::{Link, MarginSpec};
use copmix::simulation::{parse_margin, run_scenario, SimScenario};

use report::{FitReport, Method, ModelSpec};

/// Errors mapped onto the process exit codes: 2 input, 3 numerical,
/// 4 no model converged.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
    NoConvergence(String),
}

impl CliError {
    fn input(msg: String) -> Self {
        CliError::Input(msg)
    }

    fn from_core(e: copmix::Error) -> Self {
        match e {
            copmix::Error::NumericalFailure(m) => CliError::Numerical(m),
            other => CliError::Input(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NoConvergence(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) | CliError::NoConvergence(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Parser)]
#[command(name = "copmix", version, about = "Copula mixed models for meta-analysis of diagnostic test accuracy")]
struct Cli {
    /// Gauss-Legendre quadrature points for likelihood evaluation
    #[arg(long, global = true, default_value_t = 15)]
    quad_points: usize,

    /// RNG seed for simulation runs
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Directory emitted files are written to
    #[arg(long, global = true, default_value = ".")]
    output: PathBuf,

    /// Rendering of the fit report
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model sweep to a dataset CSV
    Fit {
        /// Input CSV: study,tp,n_diseased,tn,n_healthy
        input: PathBuf,
        /// Copula family for ML fits, or 'all'
        #[arg(long, default_value = "all")]
        copula: String,
        /// Margin (normal-logit, normal-probit, normal-cloglog, beta), or 'all'
        #[arg(long, default_value = "all")]
        margin: String,
        /// Estimation method: ml, cl, or all
        #[arg(long, default_value = "all")]
        method: String,
    },
    /// Run a simulation scenario file
    Simulate {
        /// Scenario file (key = value lines)
        scenario: PathBuf,
    },
    /// Emit SROC curves, density grid, and plot from a fit report
    Sroc {
        /// A JSON report produced by `fit`
        report: PathBuf,
        /// Quantile levels for the regression curves
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.5, 0.99])]
        quantiles: Vec<f64>,
        /// Also render a single-file SVG overlay
        #[arg(long)]
        svg: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit {
            input,
            copula,
            margin,
            method,
        } => cmd_fit(cli, input, copula, margin, method),
        Command::Simulate { scenario } => cmd_simulate(cli, scenario),
        Command::Sroc {
            report,
            quantiles,
            svg,
        } => cmd_sroc(cli, report, quantiles, *svg),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write_output(cli: &Cli, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cli.output)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", cli.output.display())))?;
    let path = cli.output.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn selected_margins(flag: &str) -> Result<Vec<MarginSpec>, CliError> {
    if flag.eq_ignore_ascii_case("all") {
        Ok(vec![
            MarginSpec::normal(Link::Logit).expect("logit link is valid for normal margins"),
            MarginSpec::beta(),
        ])
    } else {
        Ok(vec![
            parse_margin(flag).map_err(|e| CliError::input(e.to_string()))?
        ])
    }
}

fn selected_families(flag: &str) -> Result<Vec<CopulaFamily>, CliError> {
    if flag.eq_ignore_ascii_case("all") {
        Ok(CopulaFamily::ALL.to_vec())
    } else {
        Ok(vec![CopulaFamily::from_str(flag)
            .map_err(|e| CliError::input(e.to_string()))?])
    }
}

fn cmd_fit(
    cli: &Cli,
    input: &Path,
    copula_flag: &str,
    margin_flag: &str,
    method_flag: &str,
) -> Result<(), CliError> {
    let text = read_file(input)?;
    let rows = input::parse_csv(&text)?;
    let data = input::to_dataset(&rows)?;
    let margins = selected_margins(margin_flag)?;
    let families = selected_families(copula_flag)?;
    let (with_ml, with_cl) = match method_flag.to_ascii_lowercase().as_str() {
        "ml" => (true, false),
        "cl" => (false, true),
        "all" => (true, true),
        other => {
            return Err(CliError::input(format!(
                "unknown method '{other}' (expected ml, cl, or all)"
            )))
        }
    };
    let mut specs = Vec::new();
    if with_ml {
        for &family in &families {
            for margin in &margins {
                specs.push(ModelSpec {
                    method: Method::Ml,
                    family: Some(family),
                    margin: *margin,
                });
            }
        }
    }
    if with_cl {
        for margin in &margins {
            specs.push(ModelSpec {
                method: Method::Cl,
                family: None,
                margin: *margin,
            });
        }
    }
    let label = input
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    let report = report::run_sweep(&label, &rows, &data, &specs, cli.quad_points)?;
    if report.best.is_none() {
        // still emit the report so the failures can be inspected
        emit_report(cli, &report)?;
        return Err(CliError::NoConvergence(
            "no model converged; report written with per-model diagnostics".to_string(),
        ));
    }
    emit_report(cli, &report)?;
    // normalized echo of the parsed dataset; reproduces the input counts
    write_output(cli, "dataset.csv", &input::emit_csv(&rows))?;
    Ok(())
}

fn emit_report(cli: &Cli, rep: &FitReport) -> Result<(), CliError> {
    let (name, content) = match cli.format {
        Format::Json => (
            "report.json",
            serde_json::to_string_pretty(rep)
                .map_err(|e| CliError::Numerical(format!("report serialization: {e}")))?
                + "\n",
        ),
        Format::Table => ("report.txt", report::render_table(rep)),
        Format::Csv => ("report.csv", report::render_csv(rep)),
    };
    let path = write_output(cli, name, &content)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(cli: &Cli, scenario_path: &Path) -> Result<(), CliError> {
    let text = read_file(scenario_path)?;
    let scenario = SimScenario::parse(&text).map_err(|e| CliError::input(e.to_string()))?;
    let started = Instant::now();
    let summary = run_scenario(&scenario, cli.seed).map_err(CliError::from_core)?;
    let wall = started.elapsed().as_secs_f64();
    write_output(cli, "summary.csv", &summary.to_csv(true))?;
    let manifest = serde_json::json!({
        "scenario": scenario_path.display().to_string(),
        "seed": cli.seed,
        "replicates": summary.replicates,
        "intersection": summary.n_intersection,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "wall_time_s": wall,
    });
    write_output(
        cli,
        "manifest.json",
        &(serde_json::to_string_pretty(&manifest).expect("manifest is serializable") + "\n"),
    )?;
    eprintln!(
        "wrote {} and {}",
        cli.output.join("summary.csv").display(),
        cli.output.join("manifest.json").display()
    );
    Ok(())
}

fn cmd_sroc(cli: &Cli, report_path: &Path, quantiles: &[f64], with_svg: bool) -> Result<(), CliError> {
    let text = read_file(report_path)?;
    let report: FitReport = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", report_path.display())))?;
    if report.schema_version != report::SCHEMA_VERSION {
        return Err(CliError::input(format!(
            "unsupported report schema_version {} (expected {})",
            report.schema_version,
            report::SCHEMA_VERSION
        )));
    }
    for &q in quantiles {
        if !(q > 0.0 && q < 1.0) {
            return Err(CliError::input(format!(
                "quantile levels must be in (0,1), got {q}"
            )));
        }
    }
    let files = sroc::emit(&report, &cli.output, quantiles, with_svg)?;
    if files.suppressed {
        eprintln!(
            "warning: |tau| at the comonotonic boundary; predictive region suppressed, median curve only"
        );
    }
    eprintln!("wrote {} files to {}", files.written.len(), cli.output.display());
    Ok(())
}
