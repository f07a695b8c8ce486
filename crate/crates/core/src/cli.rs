//! Command implementations behind the `seir-control` binary.
//!
//! Each command reads its inputs, writes plain CSV/text into the output
//! directory and returns an [`Outcome`]. Output files:
//!
//! - `ingest`: `series.csv` (`date,Q,R,D`)
//! - `fit`: `fit.txt` (`key = value`), `fit.json`
//! - `simulate`: `trajectory.csv` (`t,S,E,I,Q,R,D,P`)
//! - `optimize`: `solution.csv` (`t,S..P,psi1..psi7,u1..u3`), `convergence.csv`, `optimize.txt`
//! - `report`: `report.txt`, `table_1.csv` .. `table_6.csv`

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, PRESET_ITALY_2020};
use crate::data::{
    aggregate_national, parse_regional_csv, read_dated_columns, DateWindow, Observable,
    ObservedSeries,
};
use crate::error::{Error, Result};
use crate::fitting::{fit, parse_fit_vector, FitProblem};
use crate::integrator::Trajectory;
use crate::metrics::{build_table, split_by_month, ComparisonTable, ModelColumns, ModelSource};
use crate::model::{InitialConditions, ModelParams, SeirModel, COMPARTMENTS};
use crate::pontryagin::{minimality_check, solve_fbsm, ControlProblem};
use crate::reference::{self, Column};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_CONVERGENCE: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) => EXIT_USAGE,
        Error::Io { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::EmptyInput
        | Error::MalformedHeader(_)
        | Error::MalformedRows { .. }
        | Error::MissingDays(_)
        | Error::DuplicateRecord { .. }
        | Error::DateOutOfRange(_) => EXIT_DATA,
        Error::NonFinite { .. }
        | Error::OutOfRange { .. }
        | Error::GridMismatch
        | Error::ProbeAtBound { .. }
        | Error::DivisionByZero => EXIT_NUMERICAL,
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// `false` only for an iterative solver that stopped without converging.
    pub converged: bool,
    pub written: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.converged {
            EXIT_OK
        } else {
            EXIT_CONVERGENCE
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "seir-control",
    version,
    about = "SEIR-type epidemic model: fit, simulate, optimal control, report"
)]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in scenario applied before the config file.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Integration step in days.
    #[arg(long, global = true, value_name = "H")]
    pub step: Option<f64>,
    /// Seed for the Hamiltonian sampling self-test run by `optimize`.
    #[arg(long, global = true, value_name = "S")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate the regional feed into a national `date,Q,R,D` series.
    Ingest {
        /// Regional CSV, or `-` for standard input.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Least-squares calibration against the national series.
    Fit {
        #[arg(long, value_name = "PATH")]
        series: Option<PathBuf>,
    },
    /// Forward simulation of the uncontrolled model.
    Simulate {
        /// Parameters from `fit.txt`; defaults to the configured values.
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
    },
    /// Forward-backward sweep for the optimal controls.
    Optimize {
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
    },
    /// Monthly comparison tables of real, uncontrolled and controlled values.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReportArgs {
    /// Observed series; defaults to `data.series`, then `<out>/series.csv`.
    #[arg(long, value_name = "PATH")]
    pub series: Option<PathBuf>,
    /// Uncontrolled model: a trajectory CSV or a `date,Q,R,D` file.
    #[arg(long, value_name = "PATH")]
    pub uncontrolled: Option<PathBuf>,
    /// Controlled model: a solution/trajectory CSV or a `date,Q,R,D` file.
    #[arg(long, value_name = "PATH")]
    pub controlled: Option<PathBuf>,
    /// Use the published Italy 2020 real and model columns as all inputs.
    #[arg(long)]
    pub reference_columns: bool,
}

impl Cli {
    /// Preset, then config file, then `SEIR_*` variables, then flags.
    pub fn resolve_config<I>(&self, env: I) -> Result<RunConfig>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = RunConfig::preset(self.preset.as_deref().unwrap_or(PRESET_ITALY_2020))?;
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        cfg.apply_env(env)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(h) = self.step {
            cfg.step = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn execute(&self, cfg: &RunConfig) -> Result<Outcome> {
        match &self.command {
            Command::Ingest { input } => cmd_ingest(cfg, input.as_deref()),
            Command::Fit { series } => cmd_fit(cfg, series.as_deref()),
            Command::Simulate { params } => cmd_simulate(cfg, params.as_deref()),
            Command::Optimize { params } => cmd_optimize(cfg, params.as_deref(), self.seed),
            Command::Report(args) => cmd_report(cfg, args),
        }
    }
}

fn create_out(cfg: &RunConfig, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let path = cfg.out.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn series_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.series_data.clone())
        .unwrap_or_else(|| cfg.out.join("series.csv"))
}

/// Aggregates the regional feed over `start ..= fit_end`.
pub fn cmd_ingest(cfg: &RunConfig, input: Option<&Path>) -> Result<Outcome> {
    let window = DateWindow::new(cfg.start, cfg.fit_end)?;
    let input = input
        .map(Path::to_path_buf)
        .or_else(|| cfg.regional_data.clone())
        .ok_or_else(|| {
            Error::Config("no regional input: pass --input or set data.regional".into())
        })?;
    let records = if input.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(&input, e))?;
        parse_regional_csv(buf.as_slice())?
    } else {
        parse_regional_csv(open(&input)?)?
    };
    let series = aggregate_national(&records, window)?;
    let (path, mut w) = create_out(cfg, "series.csv")?;
    series.write_csv(&mut w)?;
    finish(&path, w)?;
    Ok(Outcome {
        converged: true,
        summary: format!(
            "{} days {} .. {} from {} records",
            series.len(),
            series.first_date(),
            series.last_date(),
            records.len()
        ),
        written: vec![path],
    })
}

/// Fits the free parameters over `start ..= fit_end` of the national series.
pub fn cmd_fit(cfg: &RunConfig, series: Option<&Path>) -> Result<Outcome> {
    let path = series_path(cfg, series);
    let series =
        ObservedSeries::read_csv(open(&path)?)?.window(DateWindow::new(cfg.start, cfg.fit_end)?)?;
    let problem = FitProblem::from_series(
        &series,
        cfg.start,
        cfg.step,
        cfg.population()?,
        cfg.initial.p0,
        cfg.fit_bounds,
    )?;
    let result = fit(&problem, &cfg.guess, &cfg.fit_options)?;
    let (txt, mut w) = create_out(cfg, "fit.txt")?;
    w.write_all(result.to_key_values().as_bytes())
        .map_err(|e| Error::io(&txt, e))?;
    finish(&txt, w)?;
    let (json, mut w) = create_out(cfg, "fit.json")?;
    result.write_json(&mut w)?;
    finish(&json, w)?;
    Ok(Outcome {
        converged: result.converged,
        summary: format!(
            "{:?} after {} iterations, residual norm {:.6e} (from {:.6e})",
            result.termination,
            result.iterations,
            result.residual_norm,
            result.initial_residual_norm
        ),
        written: vec![txt, json],
    })
}

/// Model parameters and initial state, optionally overridden by a fit file.
pub fn scenario(
    cfg: &RunConfig,
    params: Option<&Path>,
) -> Result<(ModelParams, InitialConditions)> {
    match params {
        None => Ok((cfg.params, cfg.initial)),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let v = parse_fit_vector(&text)?;
            let initial = InitialConditions {
                e0: v.e0(),
                i0: v.i0(),
                ..cfg.initial
            };
            Ok((v.params(), initial))
        }
    }
}

/// Uncontrolled trajectory over `start ..= end`.
pub fn cmd_simulate(cfg: &RunConfig, params: Option<&Path>) -> Result<Outcome> {
    let (params, initial) = scenario(cfg, params)?;
    let model = SeirModel::new(params, cfg.population()?)?;
    let traj = model.simulate(&initial.state()?, &cfg.grid()?)?;
    let (path, mut w) = create_out(cfg, "trajectory.csv")?;
    traj.write_csv(&mut w, &COMPARTMENTS)?;
    finish(&path, w)?;
    let end = traj.last();
    Ok(Outcome {
        converged: true,
        summary: format!(
            "{} nodes; at t = {}: Q = {:.0}, R = {:.0}, D = {:.0}",
            traj.len(),
            traj.grid().tf(),
            end[3],
            end[4],
            end[5]
        ),
        written: vec![path],
    })
}

/// Forward-backward sweep over `start ..= end`. With a seed, also samples
/// the Hamiltonian at 100 nodes x 1000 random admissible controls.
pub fn cmd_optimize(cfg: &RunConfig, params: Option<&Path>, seed: Option<u64>) -> Result<Outcome> {
    let (params, initial) = scenario(cfg, params)?;
    let problem = ControlProblem {
        model: SeirModel::new(params, cfg.population()?)?,
        x0: initial.state()?,
        weights: cfg.weights,
        bounds: cfg.control_bounds,
        grid: cfg.grid()?,
        adjoint_form: cfg.adjoint_form,
    };
    let solution = solve_fbsm(&problem, &cfg.fbsm)?;

    let (sol_path, mut w) = create_out(cfg, "solution.csv")?;
    solution.write_csv(&mut w)?;
    finish(&sol_path, w)?;

    let (log_path, w) = create_out(cfg, "convergence.csv")?;
    let mut log = csv::Writer::from_writer(w);
    log.write_record([
        "iteration",
        "cost",
        "state_change",
        "adjoint_change",
        "control_residual",
        "relaxation",
    ])?;
    for r in &solution.history {
        log.write_record([
            r.iteration.to_string(),
            r.cost.to_string(),
            r.state_change.to_string(),
            r.adjoint_change.to_string(),
            r.control_residual.to_string(),
            r.relaxation.to_string(),
        ])?;
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    let mut summary = format!(
        "converged = {}\niterations = {}\ncost = {:e}\nadjoint_form = {}\n",
        solution.converged, solution.iterations, solution.cost, cfg.adjoint_form
    );
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let report = minimality_check(&problem, &solution, 100, 1000, &mut rng);
        summary.push_str(&format!(
            "minimality.seed = {seed}\nminimality.samples = {}\nminimality.worst_violation = {:e}\nminimality.worst_node = {}\n",
            report.samples, report.worst_violation, report.worst_node
        ));
    }
    let (sum_path, mut w) = create_out(cfg, "optimize.txt")?;
    w.write_all(summary.as_bytes())
        .map_err(|e| Error::io(&sum_path, e))?;
    finish(&sum_path, w)?;

    Ok(Outcome {
        converged: solution.converged,
        summary: summary.trim_end().replace('\n', "; "),
        written: vec![sol_path, log_path, sum_path],
    })
}

/// Reads model values from either a trajectory CSV (`t` first) or a
/// `date,Q,R,D` file.
pub fn load_model_columns(path: &Path, start: NaiveDate) -> Result<ModelColumns> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text
        .trim_start_matches('\u{feff}')
        .split(',')
        .next()
        .unwrap_or("")
        .trim();
    if first == "t" {
        let traj = Trajectory::<7>::read_csv(text.as_bytes())?;
        ModelColumns::from_trajectory(start, &traj)
    } else {
        Ok(ModelColumns(read_dated_columns(text.as_bytes())?))
    }
}

/// Tables for `R`, `D`, `Q` in that order, one per calendar month of the
/// sample dates.
pub fn comparison_tables(
    real: &dyn ModelSource,
    uncontrolled: &dyn ModelSource,
    controlled: &dyn ModelSource,
    dates: &[NaiveDate],
) -> Result<Vec<ComparisonTable>> {
    let mut tables = Vec::new();
    for series in [Observable::R, Observable::D, Observable::Q] {
        for month in split_by_month(dates) {
            tables.push(build_table(series, real, uncontrolled, controlled, &month)?);
        }
    }
    Ok(tables)
}

pub fn cmd_report(cfg: &RunConfig, args: &ReportArgs) -> Result<Outcome> {
    let tables = if args.reference_columns {
        comparison_tables(
            &reference::columns(Column::Real),
            &reference::columns(Column::Uncontrolled),
            &reference::columns(Column::Controlled),
            &cfg.report_dates,
        )?
    } else {
        let real = ObservedSeries::read_csv(open(&series_path(cfg, args.series.as_deref()))?)?;
        let unc_path = args
            .uncontrolled
            .clone()
            .unwrap_or_else(|| cfg.out.join("trajectory.csv"));
        let con_path = args
            .controlled
            .clone()
            .unwrap_or_else(|| cfg.out.join("solution.csv"));
        let uncontrolled = load_model_columns(&unc_path, cfg.start)?;
        let controlled = load_model_columns(&con_path, cfg.start)?;
        comparison_tables(&real, &uncontrolled, &controlled, &cfg.report_dates)?
    };

    let mut written = Vec::new();
    let mut text = String::new();
    for (k, table) in tables.iter().enumerate() {
        text.push_str(&format!("Table {}. ", k + 1));
        text.push_str(&table.render_text());
        text.push('\n');
        let (path, mut w) = create_out(cfg, &format!("table_{}.csv", k + 1))?;
        table.write_csv(&mut w)?;
        finish(&path, w)?;
        written.push(path);
    }
    let (path, mut w) = create_out(cfg, "report.txt")?;
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;
    written.insert(0, path);
    Ok(Outcome {
        converged: true,
        summary: format!("{} tables", tables.len()),
        written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            exit_code(&Error::Config("x".into())),
            exit_code(&Error::MissingDays(vec![])),
            EXIT_CONVERGENCE,
            exit_code(&Error::DivisionByZero),
        ];
        assert_eq!(
            codes,
            [EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE, EXIT_NUMERICAL]
        );
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::parse_from([
            "seir-control",
            "--step",
            "0.25",
            "--out",
            "elsewhere",
            "simulate",
        ]);
        let cfg = cli
            .resolve_config([("SEIR_STEP".into(), "0.5".into())])
            .unwrap();
        assert_eq!(cfg.step, 0.25);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
        let cfg = Cli::parse_from(["seir-control", "simulate"])
            .resolve_config([("SEIR_STEP".into(), "0.5".into())])
            .unwrap();
        assert_eq!(cfg.step, 0.5);
    }

    #[test]
    fn unknown_preset_is_usage_error() {
        let cli = Cli::parse_from(["seir-control", "--preset", "mars", "fit"]);
        let err = cli.resolve_config(std::iter::empty()).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }
}
