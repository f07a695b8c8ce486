//! Least-squares calibration of the model rates and the unobserved initial
//! exposed/infected counts against observed `Q`, `R`, `D` series.
//!
//! The solver is a projected Levenberg-Marquardt iteration with a
//! forward-difference Jacobian. Strictly positive rates are fitted in log
//! space, `lambda3`, `kappa3`, `E0` and `I0` in linear space.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Observable, ObservedSeries};
use crate::error::{Error, Result};
use crate::integrator::{TimeGrid, Trajectory};
use crate::model::{InitialConditions, ModelParams, Population, SeirModel, StateVec};

pub const PARAMETER_COUNT: usize = 12;

pub const PARAMETER_NAMES: [&str; PARAMETER_COUNT] = [
    "alpha", "beta", "gamma", "delta", "lambda1", "lambda2", "lambda3", "kappa1", "kappa2",
    "kappa3", "e0", "i0",
];

/// Whether parameter `k` is fitted through its logarithm.
pub fn is_log_scaled(k: usize) -> bool {
    !matches!(k, 6 | 9 | 10 | 11)
}

pub fn parameter_index(name: &str) -> Option<usize> {
    PARAMETER_NAMES.iter().position(|n| *n == name)
}

/// Rates plus `E0`, `I0`, in the order of [`PARAMETER_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitVector(pub [f64; PARAMETER_COUNT]);

impl FitVector {
    pub fn new(params: &ModelParams, e0: f64, i0: f64) -> Self {
        FitVector([
            params.alpha,
            params.beta,
            params.gamma,
            params.delta,
            params.lambda[0],
            params.lambda[1],
            params.lambda[2],
            params.kappa[0],
            params.kappa[1],
            params.kappa[2],
            e0,
            i0,
        ])
    }

    pub fn params(&self) -> ModelParams {
        let v = &self.0;
        ModelParams {
            alpha: v[0],
            beta: v[1],
            gamma: v[2],
            delta: v[3],
            lambda: [v[4], v[5], v[6]],
            kappa: [v[7], v[8], v[9]],
        }
    }

    pub fn e0(&self) -> f64 {
        self.0[10]
    }

    pub fn i0(&self) -> f64 {
        self.0[11]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        parameter_index(name).map(|k| self.0[k])
    }
}

/// One observation time (days since the start date) with the three counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub q: f64,
    pub r: f64,
    pub d: f64,
}

impl Observation {
    fn get(&self, which: Observable) -> f64 {
        match which {
            Observable::Q => self.q,
            Observable::R => self.r,
            Observable::D => self.d,
        }
    }
}

/// Box bounds and the free/fixed mask for each parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub lower: [f64; PARAMETER_COUNT],
    pub upper: [f64; PARAMETER_COUNT],
    pub free: [bool; PARAMETER_COUNT],
}

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds {
            lower: [
                1e-12, 1e-6, 1e-6, 1e-6, 1e-8, 1e-6, 0.0, 1e-10, 1e-6, 0.0, 0.0, 0.0,
            ],
            upper: [
                1.0, 20.0, 20.0, 20.0, 1.0, 20.0, 365.0, 1.0, 10.0, 365.0, 1e7, 1e7,
            ],
            free: [true; PARAMETER_COUNT],
        }
    }
}

impl ParameterBounds {
    pub fn validate(&self) -> Result<()> {
        for k in 0..PARAMETER_COUNT {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            let name = PARAMETER_NAMES[k];
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "bounds for {name} invalid: [{lo}, {hi}]"
                )));
            }
            if self.free[k] && is_log_scaled(k) && lo <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} is fitted in log space and needs a positive lower bound"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &FitVector) -> bool {
        (0..PARAMETER_COUNT).all(|k| theta.0[k] >= self.lower[k] && theta.0[k] <= self.upper[k])
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }
}

/// Observations, fixed initial conditions, bounds and the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub observations: Vec<Observation>,
    pub population: Population,
    pub q0: f64,
    pub r0: f64,
    pub d0: f64,
    pub p0: f64,
    pub bounds: ParameterBounds,
    pub grid: TimeGrid,
    scales: [f64; 3],
}

impl FitProblem {
    pub fn new(
        observations: Vec<Observation>,
        population: Population,
        fixed_initial: [f64; 4],
        bounds: ParameterBounds,
        grid: TimeGrid,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyInput);
        }
        bounds.validate()?;
        if bounds.free_count() == 0 {
            return Err(Error::InvalidArgument("no free parameters".into()));
        }
        for o in &observations {
            if o.t < grid.t0() - 1e-9 || o.t > grid.tf() + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "observation at t = {} outside grid [{}, {}]",
                    o.t,
                    grid.t0(),
                    grid.tf()
                )));
            }
        }
        let mut scales = [0.0; 3];
        for (k, which) in [Observable::Q, Observable::R, Observable::D]
            .into_iter()
            .enumerate()
        {
            let max = observations
                .iter()
                .map(|o| o.get(which).abs())
                .fold(0.0, f64::max);
            scales[k] = if max > 0.0 { 1.0 / max } else { 1.0 };
        }
        let [q0, r0, d0, p0] = fixed_initial;
        Ok(FitProblem {
            observations,
            population,
            q0,
            r0,
            d0,
            p0,
            bounds,
            grid,
            scales,
        })
    }

    /// Daily observations dated from `start`; `Q0`, `R0`, `D0` are the values
    /// on `start`, which must be the first date of the series.
    pub fn from_series(
        series: &ObservedSeries,
        start: NaiveDate,
        step: f64,
        population: Population,
        p0: f64,
        bounds: ParameterBounds,
    ) -> Result<Self> {
        if series.first_date() != start {
            return Err(Error::InvalidArgument(format!(
                "series starts {} but the run starts {start}",
                series.first_date()
            )));
        }
        let observations: Vec<Observation> = series
            .dates()
            .iter()
            .enumerate()
            .map(|(k, date)| Observation {
                t: (*date - start).num_days() as f64,
                q: series.series(Observable::Q)[k],
                r: series.series(Observable::R)[k],
                d: series.series(Observable::D)[k],
            })
            .collect();
        let tf = observations.last().map(|o| o.t).unwrap_or(0.0);
        let grid = TimeGrid::new(0.0, tf, step)?;
        let first = observations[0];
        FitProblem::new(
            observations,
            population,
            [first.q, first.r, first.d, p0],
            bounds,
            grid,
        )
    }

    pub fn initial_conditions(&self, theta: &FitVector) -> InitialConditions {
        InitialConditions {
            population: self.population.get(),
            e0: theta.e0(),
            i0: theta.i0(),
            q0: self.q0,
            r0: self.r0,
            d0: self.d0,
            p0: self.p0,
        }
    }

    pub fn simulate(&self, theta: &FitVector) -> Result<Trajectory<7>> {
        let model = SeirModel::new(theta.params(), self.population)?;
        let x0: StateVec = self.initial_conditions(theta).state()?;
        model.simulate(&x0, &self.grid)
    }

    pub fn residual_count(&self) -> usize {
        3 * self.observations.len()
    }

    /// Per-series weights `1 / max(observed)`, in `Q, R, D` order.
    pub fn scales(&self) -> [f64; 3] {
        self.scales
    }
}

/// `(model - observed) / max(observed)` for `Q`, then `R`, then `D`.
pub fn residuals(theta: &FitVector, problem: &FitProblem) -> Result<Vec<f64>> {
    if !problem.bounds.contains(theta) {
        return Err(Error::InvalidArgument(
            "parameter vector outside bounds".into(),
        ));
    }
    let traj = problem.simulate(theta)?;
    let mut out = Vec::with_capacity(problem.residual_count());
    for (k, which) in Observable::ALL.into_iter().enumerate() {
        for o in &problem.observations {
            let model = traj.interpolate(o.t)?[which.state_index()];
            out.push((model - o.get(which)) * problem.scales[k]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_damping: f64,
    /// Relative forward-difference step in fitting coordinates.
    pub jacobian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
            jacobian_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Gradient,
    Step,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: FitVector,
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Root-mean-square error in individuals, `Q, R, D`.
    pub rmse: [f64; 3],
}

fn to_coords(theta: &FitVector) -> [f64; PARAMETER_COUNT] {
    let mut z = theta.0;
    for (k, v) in z.iter_mut().enumerate() {
        if is_log_scaled(k) {
            *v = v.ln();
        }
    }
    z
}

fn from_coords(z: &[f64; PARAMETER_COUNT]) -> FitVector {
    let mut v = *z;
    for (k, x) in v.iter_mut().enumerate() {
        if is_log_scaled(k) {
            *x = x.exp();
        }
    }
    FitVector(v)
}

struct Driver<'a> {
    problem: &'a FitProblem,
    /// Source of the fixed components, copied through unchanged.
    start: FitVector,
    free: Vec<usize>,
    lo: [f64; PARAMETER_COUNT],
    hi: [f64; PARAMETER_COUNT],
}

impl Driver<'_> {
    fn new(problem: &FitProblem, start: FitVector) -> Driver<'_> {
        let b = &problem.bounds;
        let mut lo = b.lower;
        let mut hi = b.upper;
        for k in 0..PARAMETER_COUNT {
            if is_log_scaled(k) {
                lo[k] = if b.lower[k] > 0.0 {
                    b.lower[k].ln()
                } else {
                    f64::NEG_INFINITY
                };
                hi[k] = b.upper[k].ln();
            }
        }
        Driver {
            problem,
            start,
            free: (0..PARAMETER_COUNT).filter(|k| b.free[*k]).collect(),
            lo,
            hi,
        }
    }

    /// Maps coordinates back to parameters, clamped into the natural box so
    /// `exp(ln(x))` round-off never leaves it.
    fn theta(&self, z: &[f64; PARAMETER_COUNT]) -> FitVector {
        let mut t = from_coords(z);
        for k in 0..PARAMETER_COUNT {
            t.0[k] = if self.problem.bounds.free[k] {
                t.0[k].clamp(self.problem.bounds.lower[k], self.problem.bounds.upper[k])
            } else {
                self.start.0[k]
            };
        }
        t
    }

    fn residuals(&self, z: &[f64; PARAMETER_COUNT]) -> Option<Vec<f64>> {
        residuals(&self.theta(z), self.problem)
            .ok()
            .filter(|r| r.iter().all(|v| v.is_finite()))
    }

    fn jacobian(
        &self,
        z: &[f64; PARAMETER_COUNT],
        r0: &[f64],
        rel_step: f64,
    ) -> Option<DMatrix<f64>> {
        let columns: Vec<Option<Vec<f64>>> = self
            .free
            .par_iter()
            .map(|&k| {
                let h = rel_step * z[k].abs().max(1.0);
                let mut zp = *z;
                let forward = z[k] + h <= self.hi[k];
                zp[k] = if forward { z[k] + h } else { z[k] - h };
                let rp = self.residuals(&zp)?;
                let sign = if forward { 1.0 } else { -1.0 };
                Some(rp.iter().zip(r0).map(|(a, b)| sign * (a - b) / h).collect())
            })
            .collect();
        let m = r0.len();
        let mut jac = DMatrix::zeros(m, self.free.len());
        for (j, col) in columns.into_iter().enumerate() {
            let col = col?;
            for i in 0..m {
                jac[(i, j)] = col[i];
            }
        }
        Some(jac)
    }

    fn at_lower(&self, z: &[f64; PARAMETER_COUNT], k: usize) -> bool {
        z[k] <= self.lo[k]
    }

    fn at_upper(&self, z: &[f64; PARAMETER_COUNT], k: usize) -> bool {
        z[k] >= self.hi[k]
    }
}

fn half_sum_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Projected Levenberg-Marquardt from `guess`.
///
/// Stops when the projected gradient drops below `gradient_tolerance`
/// (infinity norm), when a trial step is shorter than
/// `step_tolerance * (|z| + step_tolerance)` in fitting coordinates, or after
/// `max_iterations` Jacobian evaluations. Parameters never leave the box.
pub fn fit(problem: &FitProblem, guess: &FitVector, opts: &FitOptions) -> Result<FitResult> {
    if !problem.bounds.contains(guess) {
        return Err(Error::InvalidArgument(
            "initial guess outside bounds".into(),
        ));
    }
    let driver = Driver::new(problem, *guess);
    let mut z = to_coords(guess);
    let mut r = residuals(guess, problem)?;
    let initial_residual_norm = (2.0 * half_sum_sq(&r)).sqrt();
    let mut cost = half_sum_sq(&r);
    let mut damping = opts.initial_damping;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let Some(jac) = driver.jacobian(&z, &r, opts.jacobian_step) else {
            termination = Termination::Stalled;
            break;
        };
        let rv = DVector::from_column_slice(&r);
        let gradient = jac.transpose() * &rv;
        let projected = driver
            .free
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                let g = gradient[j];
                if (driver.at_lower(&z, k) && g > 0.0) || (driver.at_upper(&z, k) && g < 0.0) {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max);
        if projected <= opts.gradient_tolerance {
            termination = Termination::Gradient;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let max_diag = (0..jtj.nrows()).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        let floor = if max_diag > 0.0 {
            1e-12 * max_diag
        } else {
            1.0
        };
        let z_norm = driver.free.iter().map(|&k| z[k] * z[k]).sum::<f64>().sqrt();

        loop {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += damping * jtj[(i, i)].max(floor);
            }
            let Some(chol) = a.cholesky() else {
                damping *= 10.0;
                if damping > 1e20 {
                    termination = Termination::Stalled;
                    break 'outer;
                }
                continue;
            };
            let delta = chol.solve(&(-&gradient));
            let mut trial = z;
            for (j, &k) in driver.free.iter().enumerate() {
                trial[k] = (z[k] + delta[j]).clamp(driver.lo[k], driver.hi[k]);
            }
            let step_norm = driver
                .free
                .iter()
                .map(|&k| (trial[k] - z[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let accepted = driver
                .residuals(&trial)
                .map(|rt| (half_sum_sq(&rt), rt))
                .filter(|(c, _)| *c < cost);
            match accepted {
                Some((c, rt)) => {
                    z = trial;
                    r = rt;
                    cost = c;
                    damping = (damping / 10.0).max(1e-15);
                    if step_norm <= opts.step_tolerance * (z_norm + opts.step_tolerance) {
                        termination = Termination::Step;
                        break 'outer;
                    }
                    break;
                }
                None => {
                    if step_norm <= opts.step_tolerance * (z_norm + opts.step_tolerance) {
                        termination = Termination::Step;
                        break 'outer;
                    }
                    damping *= 10.0;
                    if damping > 1e20 {
                        termination = Termination::Stalled;
                        break 'outer;
                    }
                }
            }
        }
    }

    let theta = driver.theta(&z);
    let rmse = series_rmse(&theta, problem)?;
    Ok(FitResult {
        theta,
        residual_norm: (2.0 * cost).sqrt(),
        initial_residual_norm,
        iterations,
        converged: matches!(termination, Termination::Gradient | Termination::Step),
        termination,
        rmse,
    })
}

fn series_rmse(theta: &FitVector, problem: &FitProblem) -> Result<[f64; 3]> {
    let traj = problem.simulate(theta)?;
    let mut out = [0.0; 3];
    for (k, which) in Observable::ALL.into_iter().enumerate() {
        let mut acc = 0.0;
        for o in &problem.observations {
            let m = traj.interpolate(o.t)?[which.state_index()];
            acc += (m - o.get(which)).powi(2);
        }
        out[k] = (acc / problem.observations.len() as f64).sqrt();
    }
    Ok(out)
}

impl FitResult {
    /// Flat `key = value` lines: parameters by name, then diagnostics.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (name, v) in PARAMETER_NAMES.iter().zip(self.theta.0) {
            out.push_str(&format!("{name} = {v:e}\n"));
        }
        out.push_str(&format!("residual_norm = {:e}\n", self.residual_norm));
        out.push_str(&format!(
            "initial_residual_norm = {:e}\n",
            self.initial_residual_norm
        ));
        out.push_str(&format!("iterations = {}\n", self.iterations));
        out.push_str(&format!("converged = {}\n", self.converged));
        out.push_str(&format!("termination = {:?}\n", self.termination));
        for (which, v) in Observable::ALL.iter().zip(self.rmse) {
            out.push_str(&format!("rmse_{} = {v:e}\n", which.name()));
        }
        out
    }

    /// JSON object keyed by parameter name plus diagnostics.
    pub fn to_json(&self) -> serde_json::Value {
        let params: BTreeMap<&str, f64> =
            PARAMETER_NAMES.iter().copied().zip(self.theta.0).collect();
        serde_json::json!({
            "parameters": params,
            "residual_norm": self.residual_norm,
            "initial_residual_norm": self.initial_residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "termination": format!("{:?}", self.termination),
            "rmse": { "Q": self.rmse[0], "R": self.rmse[1], "D": self.rmse[2] },
        })
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.to_json())?;
        Ok(())
    }
}

/// Reads parameter values back from [`FitResult::to_key_values`] output.
/// Unknown keys are ignored; every parameter name must be present.
pub fn parse_fit_vector(text: &str) -> Result<FitVector> {
    let mut values = [f64::NAN; PARAMETER_COUNT];
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key = value",
                line_no + 1
            )));
        };
        if let Some(k) = parameter_index(key.trim()) {
            values[k] = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad number", line_no + 1)))?;
        }
    }
    if let Some(k) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::Config(format!(
            "missing parameter {}",
            PARAMETER_NAMES[k]
        )));
    }
    Ok(FitVector(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_round_trip() {
        let theta = FitVector::new(&ModelParams::ITALY_2020, 67932.3, 3927.5);
        let back = from_coords(&to_coords(&theta));
        for k in 0..PARAMETER_COUNT {
            assert!((back.0[k] - theta.0[k]).abs() <= 1e-14 * theta.0[k].abs());
        }
    }

    #[test]
    fn log_scaled_set() {
        let linear: Vec<&str> = (0..PARAMETER_COUNT)
            .filter(|k| !is_log_scaled(*k))
            .map(|k| PARAMETER_NAMES[k])
            .collect();
        assert_eq!(linear, ["lambda3", "kappa3", "e0", "i0"]);
    }

    #[test]
    fn bounds_validation() {
        let mut b = ParameterBounds::default();
        b.lower[0] = 0.0;
        assert!(b.validate().is_err());
        b.free[0] = false;
        assert!(b.validate().is_ok());
        b.lower[3] = 5.0;
        b.upper[3] = 1.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn key_values_parse_back() {
        let theta = FitVector::new(&ModelParams::ITALY_2020, 1.5, 2.5);
        let res = FitResult {
            theta,
            residual_norm: 0.0,
            initial_residual_norm: 1.0,
            iterations: 3,
            converged: true,
            termination: Termination::Gradient,
            rmse: [0.0; 3],
        };
        assert_eq!(parse_fit_vector(&res.to_key_values()).unwrap(), theta);
        assert!(parse_fit_vector("alpha = 1\n").is_err());
        let json = res.to_json();
        assert_eq!(json["parameters"]["beta"], 3.97);
    }
}
