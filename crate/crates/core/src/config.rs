//! Run configuration: a flat `key = value` file layered over the built-in
//! Italy 2020 scenario, then environment overrides, then command-line flags.
//!
//! Keys (all optional):
//!
//! ```text
//! start, end, fit_end            dates, YYYY-MM-DD
//! step                           integration step h in days
//! population, p0, e0, i0         N and the initial P, E, I
//! q0, r0, d0                     initial Q, R, D when no series is supplied
//! alpha, beta, gamma, delta,
//! lambda1..3, kappa1..3          model parameters
//! guess.<name>                   fit starting value, name as in `fitting::PARAMETER_NAMES`
//! lower.<name>, upper.<name>     fit bounds
//! fit.free                       comma-separated free parameter names, or `all`
//! fit.max_iterations, fit.gradient_tolerance, fit.step_tolerance
//! w1..w3, v1..v3                 cost weights
//! u1_min, u1_max, ...            control bounds
//! fbsm.relaxation, fbsm.tolerance, fbsm.max_iterations, fbsm.adjoint_form
//! data.regional, data.series     input paths
//! out                            output directory
//! report.dates                   comma-separated sample dates
//! ```
//!
//! Environment variables `SEIR_<KEY>` override file values; the key is
//! lowercased and `__` stands for `.`, so `SEIR_FBSM__TOLERANCE` sets
//! `fbsm.tolerance`.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::data::{parse_feed_date, DateWindow};
use crate::error::{Error, Result};
use crate::fitting::{
    parameter_index, FitOptions, FitVector, ParameterBounds, PARAMETER_COUNT, PARAMETER_NAMES,
};
use crate::integrator::TimeGrid;
use crate::model::{ControlBounds, InitialConditions, ModelParams, Population};
use crate::pontryagin::{AdjointForm, CostWeights, FbsmOptions};
use crate::reference;

pub const ENV_PREFIX: &str = "SEIR_";

pub const PRESET_ITALY_2020: &str = "paper-italy-2020";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub fit_end: NaiveDate,
    pub step: f64,
    pub initial: InitialConditions,
    pub params: ModelParams,
    pub guess: FitVector,
    pub fit_bounds: ParameterBounds,
    pub fit_options: FitOptions,
    pub weights: CostWeights,
    pub control_bounds: ControlBounds,
    pub fbsm: FbsmOptions,
    pub adjoint_form: AdjointForm,
    pub regional_data: Option<PathBuf>,
    pub series_data: Option<PathBuf>,
    pub out: PathBuf,
    pub report_dates: Vec<NaiveDate>,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl RunConfig {
    /// Italy, 1 September to 30 November 2020, data through 31 October.
    pub fn italy_2020() -> Self {
        RunConfig {
            start: date(2020, 9, 1),
            end: date(2020, 11, 30),
            fit_end: date(2020, 10, 31),
            step: 0.1,
            initial: InitialConditions::ITALY_2020,
            params: ModelParams::ITALY_2020,
            guess: FitVector::new(
                &ModelParams::ITALY_2020_GUESS,
                InitialConditions::ITALY_2020.e0,
                InitialConditions::ITALY_2020.i0,
            ),
            fit_bounds: ParameterBounds::default(),
            fit_options: FitOptions::default(),
            weights: CostWeights::UNIT,
            control_bounds: ControlBounds::ITALY_2020,
            fbsm: FbsmOptions::default(),
            adjoint_form: AdjointForm::default(),
            regional_data: None,
            series_data: None,
            out: PathBuf::from("out"),
            report_dates: reference::sample_dates(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PRESET_ITALY_2020 => Ok(RunConfig::italy_2020()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    /// Applies `key = value` pairs in order. Unknown keys are errors.
    pub fn apply<'a, I>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        for (key, value) in pairs {
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got {value:?}")))
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{key}: expected a count, got {value:?}")))
        };
        let day = || -> Result<NaiveDate> {
            parse_feed_date(value)
                .ok_or_else(|| Error::Config(format!("{key}: expected a date, got {value:?}")))
        };
        match key {
            "start" => self.start = day()?,
            "end" => self.end = day()?,
            "fit_end" => self.fit_end = day()?,
            "step" => self.step = num()?,
            "population" => self.initial.population = num()?,
            "e0" => self.initial.e0 = num()?,
            "i0" => self.initial.i0 = num()?,
            "q0" => self.initial.q0 = num()?,
            "r0" => self.initial.r0 = num()?,
            "d0" => self.initial.d0 = num()?,
            "p0" => self.initial.p0 = num()?,
            "w1" | "w2" | "w3" => self.weights.w[index_suffix(key)] = num()?,
            "v1" | "v2" | "v3" => self.weights.v[index_suffix(key)] = num()?,
            "u1_min" | "u2_min" | "u3_min" => self.control_bounds.min[index_suffix(key)] = num()?,
            "u1_max" | "u2_max" | "u3_max" => self.control_bounds.max[index_suffix(key)] = num()?,
            "fbsm.relaxation" => self.fbsm.relaxation = num()?,
            "fbsm.tolerance" => self.fbsm.tolerance = num()?,
            "fbsm.max_iterations" => self.fbsm.max_iterations = count()?,
            "fbsm.adjoint_form" => self.adjoint_form = value.parse()?,
            "fit.max_iterations" => self.fit_options.max_iterations = count()?,
            "fit.gradient_tolerance" => self.fit_options.gradient_tolerance = num()?,
            "fit.step_tolerance" => self.fit_options.step_tolerance = num()?,
            "fit.free" => self.fit_bounds.free = parse_free(value)?,
            "data.regional" => self.regional_data = non_empty_path(value),
            "data.series" => self.series_data = non_empty_path(value),
            "out" => self.out = PathBuf::from(value),
            "report.dates" => {
                self.report_dates = value
                    .split(',')
                    .map(|s| {
                        parse_feed_date(s.trim())
                            .ok_or_else(|| Error::Config(format!("report.dates: bad date {s:?}")))
                    })
                    .collect::<Result<_>>()?
            }
            _ => {
                if let Some(k) = model_param_index(key) {
                    let mut v = FitVector::new(&self.params, 0.0, 0.0);
                    v.0[k] = num()?;
                    self.params = v.params();
                } else if let Some(name) = key.strip_prefix("guess.") {
                    self.guess.0[param_or_err(key, name)?] = num()?;
                } else if let Some(name) = key.strip_prefix("lower.") {
                    self.fit_bounds.lower[param_or_err(key, name)?] = num()?;
                } else if let Some(name) = key.strip_prefix("upper.") {
                    self.fit_bounds.upper[param_or_err(key, name)?] = num()?;
                } else {
                    return Err(Error::Config(format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    /// Overrides from `SEIR_*` variables in `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut pairs: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                k.strip_prefix(ENV_PREFIX)
                    .map(|rest| (rest.to_ascii_lowercase().replace("__", "."), v))
            })
            .collect();
        pairs.sort();
        self.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let pairs = parse_key_values(text)?;
        self.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn validate(&self) -> Result<()> {
        DateWindow::new(self.start, self.end)?;
        if self.fit_end < self.start {
            return Err(Error::Config("fit_end precedes start".into()));
        }
        self.grid()?;
        self.params.validate()?;
        self.initial.state()?;
        self.fit_bounds.validate()?;
        self.weights.validate()?;
        self.control_bounds.validate()?;
        self.fbsm.validate()?;
        Ok(())
    }

    pub fn population(&self) -> Result<Population> {
        Population::new(self.initial.population)
    }

    /// Simulation grid from `start` to `end`, `t = 0` at `start`.
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(0.0, (self.end - self.start).num_days() as f64, self.step)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("start", self.start.to_string());
        line("end", self.end.to_string());
        line("fit_end", self.fit_end.to_string());
        line("step", self.step.to_string());
        line("population", self.initial.population.to_string());
        for (k, v) in [
            ("e0", self.initial.e0),
            ("i0", self.initial.i0),
            ("q0", self.initial.q0),
            ("r0", self.initial.r0),
            ("d0", self.initial.d0),
            ("p0", self.initial.p0),
        ] {
            line(k, v.to_string());
        }
        let params = FitVector::new(&self.params, 0.0, 0.0);
        for k in 0..10 {
            line(PARAMETER_NAMES[k], params.0[k].to_string());
        }
        for k in 0..PARAMETER_COUNT {
            line(
                &format!("guess.{}", PARAMETER_NAMES[k]),
                self.guess.0[k].to_string(),
            );
            line(
                &format!("lower.{}", PARAMETER_NAMES[k]),
                self.fit_bounds.lower[k].to_string(),
            );
            line(
                &format!("upper.{}", PARAMETER_NAMES[k]),
                self.fit_bounds.upper[k].to_string(),
            );
        }
        let free: Vec<&str> = (0..PARAMETER_COUNT)
            .filter(|k| self.fit_bounds.free[*k])
            .map(|k| PARAMETER_NAMES[k])
            .collect();
        line("fit.free", free.join(","));
        line(
            "fit.max_iterations",
            self.fit_options.max_iterations.to_string(),
        );
        line(
            "fit.gradient_tolerance",
            self.fit_options.gradient_tolerance.to_string(),
        );
        line(
            "fit.step_tolerance",
            self.fit_options.step_tolerance.to_string(),
        );
        for i in 0..3 {
            line(&format!("w{}", i + 1), self.weights.w[i].to_string());
            line(&format!("v{}", i + 1), self.weights.v[i].to_string());
            line(
                &format!("u{}_min", i + 1),
                self.control_bounds.min[i].to_string(),
            );
            line(
                &format!("u{}_max", i + 1),
                self.control_bounds.max[i].to_string(),
            );
        }
        line("fbsm.relaxation", self.fbsm.relaxation.to_string());
        line("fbsm.tolerance", self.fbsm.tolerance.to_string());
        line("fbsm.max_iterations", self.fbsm.max_iterations.to_string());
        line("fbsm.adjoint_form", self.adjoint_form.to_string());
        if let Some(p) = &self.regional_data {
            line("data.regional", p.display().to_string());
        }
        if let Some(p) = &self.series_data {
            line("data.series", p.display().to_string());
        }
        line("out", self.out.display().to_string());
        let dates: Vec<String> = self.report_dates.iter().map(|d| d.to_string()).collect();
        line("report.dates", dates.join(","));
        out
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// `w2` -> 1, `u3_max` -> 2.
fn index_suffix(key: &str) -> usize {
    (key.as_bytes()[1] - b'1') as usize
}

fn model_param_index(key: &str) -> Option<usize> {
    parameter_index(key).filter(|k| *k < 10)
}

fn param_or_err(key: &str, name: &str) -> Result<usize> {
    parameter_index(name).ok_or_else(|| Error::Config(format!("{key}: unknown parameter {name:?}")))
}

fn parse_free(value: &str) -> Result<[bool; PARAMETER_COUNT]> {
    if value.trim() == "all" {
        return Ok([true; PARAMETER_COUNT]);
    }
    let mut free = [false; PARAMETER_COUNT];
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        free[param_or_err("fit.free", name)?] = true;
    }
    Ok(free)
}

fn non_empty_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}
