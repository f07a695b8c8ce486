//! Optimal control of the SEIR-type model: running cost, Hamiltonian,
//! adjoint dynamics, the projected control law and the forward-backward
//! sweep that iterates them to a Pontryagin extremal.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_backward, integrate_forward, TimeGrid, Trajectory};
use crate::model::{ControlBounds, ControlVec, SeirModel, StateVec};

/// Objective weights `w` (new infections, recovered, protected) and control
/// cost weights `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w: [f64; 3],
    pub v: [f64; 3],
}

impl CostWeights {
    pub const UNIT: CostWeights = CostWeights {
        w: [1.0; 3],
        v: [1.0; 3],
    };

    pub fn new(w: [f64; 3], v: [f64; 3]) -> Result<Self> {
        let c = CostWeights { w, v };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "objective weights must be finite".into(),
            ));
        }
        if self.v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "control cost weights must be positive, got {:?}",
                self.v
            )));
        }
        Ok(())
    }
}

/// Costate vector `psi_1..psi_7`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjointVec(pub [f64; 7]);

impl AdjointVec {
    pub const ZERO: AdjointVec = AdjointVec([0.0; 7]);
}

/// Which adjoint system drives the backward sweep.
///
/// `StateSum` differentiates the Hamiltonian with `N` read as the sum of the
/// compartments, which is the form whose first, second and fourth through
/// seventh equations are usually quoted for this model. `Printed` is the same
/// system except that the `psi_3` equation carries the factor
/// `x2 + ... + x7` instead of `x1 + x2 + x4 + ... + x7`; it is kept for
/// comparison and does not yield the gradient of `J`. `ConstantPopulation`
/// treats `N` as a constant; it differs from `StateSum` by a multiple of
/// `(1, ..., 1)`, so both produce the same controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AdjointForm {
    #[default]
    StateSum,
    Printed,
    ConstantPopulation,
}

impl std::str::FromStr for AdjointForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "state-sum" | "statesum" => Ok(AdjointForm::StateSum),
            "printed" => Ok(AdjointForm::Printed),
            "constant" | "constant-population" => Ok(AdjointForm::ConstantPopulation),
            other => Err(Error::Config(format!("unknown adjoint form '{other}'"))),
        }
    }
}

impl std::fmt::Display for AdjointForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdjointForm::StateSum => "state-sum",
            AdjointForm::Printed => "printed",
            AdjointForm::ConstantPopulation => "constant-population",
        })
    }
}

/// Sweep settings: relaxation `omega`, relative tolerance and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbsmOptions {
    pub relaxation: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FbsmOptions {
    fn default() -> Self {
        FbsmOptions {
            relaxation: 0.5,
            tolerance: 1e-4,
            max_iterations: 500,
        }
    }
}

impl FbsmOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Integrand of the cost functional.
pub fn running_cost(x: &StateVec, u: &ControlVec, model: &SeirModel, w: &CostWeights) -> f64 {
    let n = model.population.get();
    let new_infections = model.params.beta * u.u1 * x.s * x.i / n;
    w.w[0] * new_infections - w.w[1] * x.r - w.w[2] * x.p
        + 0.5 * (w.v[0] * u.u1 * u.u1 + w.v[1] * u.u2 * u.u2 + w.v[2] * u.u3 * u.u3)
}

/// `dL/du` of the running cost at one instant.
pub fn running_cost_gradient(
    x: &StateVec,
    u: &ControlVec,
    model: &SeirModel,
    w: &CostWeights,
) -> [f64; 3] {
    let n = model.population.get();
    [
        w.w[0] * model.params.beta * x.s * x.i / n + w.v[0] * u.u1,
        w.v[1] * u.u2,
        w.v[2] * u.u3,
    ]
}

/// Cost functional by composite trapezoid on the shared grid.
pub fn cost(
    states: &Trajectory<7>,
    controls: &Trajectory<3>,
    weights: &CostWeights,
    model: &SeirModel,
) -> Result<f64> {
    if states.grid() != controls.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = states.grid();
    let total = states
        .values()
        .iter()
        .zip(controls.values())
        .enumerate()
        .map(|(i, (x, u))| {
            grid.trapezoid_weight(i)
                * running_cost(
                    &StateVec::from_array(*x),
                    &ControlVec::from_array(*u),
                    model,
                    weights,
                )
        })
        .sum();
    Ok(total)
}

/// Running cost plus `psi . f(t, x, u)`.
pub fn hamiltonian(
    x: &StateVec,
    u: &ControlVec,
    psi: &AdjointVec,
    t: f64,
    model: &SeirModel,
    weights: &CostWeights,
) -> f64 {
    let f = model.rhs_controlled(t, x, u).to_array();
    let coupling: f64 = psi.0.iter().zip(f).map(|(a, b)| a * b).sum();
    running_cost(x, u, model, weights) + coupling
}

/// `dH/du` at one instant. Independent of `t`.
pub fn hamiltonian_gradient(
    x: &StateVec,
    u: &ControlVec,
    psi: &AdjointVec,
    model: &SeirModel,
    weights: &CostWeights,
) -> [f64; 3] {
    let num = control_numerators(x, psi, model, weights);
    [
        weights.v[0] * u.u1 - num[0],
        weights.v[1] * u.u2 - num[1],
        weights.v[2] * u.u3 - num[2],
    ]
}

fn control_numerators(
    x: &StateVec,
    psi: &AdjointVec,
    model: &SeirModel,
    weights: &CostWeights,
) -> [f64; 3] {
    let n = model.population.get();
    let p = &psi.0;
    [
        model.params.beta * x.s * x.i * (p[0] - p[1] - weights.w[0]) / n,
        x.s * (p[0] - p[6]),
        x.q * (p[3] - p[4]),
    ]
}

/// Stationary point of the Hamiltonian in `u`, before projection.
pub fn unclipped_controls(
    x: &StateVec,
    psi: &AdjointVec,
    model: &SeirModel,
    weights: &CostWeights,
) -> [f64; 3] {
    let num = control_numerators(x, psi, model, weights);
    [
        num[0] / weights.v[0],
        num[1] / weights.v[1],
        num[2] / weights.v[2],
    ]
}

/// Minimizer of the Hamiltonian over the control box. The Hamiltonian is a
/// separable convex quadratic in `u`, so clipping each stationary component
/// is the exact minimizer.
pub fn control_update(
    x: &StateVec,
    psi: &AdjointVec,
    model: &SeirModel,
    weights: &CostWeights,
    bounds: &ControlBounds,
) -> ControlVec {
    bounds.project(unclipped_controls(x, psi, model, weights))
}

/// Time derivative of the costate at one instant.
pub fn adjoint_derivative(
    t: f64,
    psi: &AdjointVec,
    x: &StateVec,
    u: &ControlVec,
    model: &SeirModel,
    weights: &CostWeights,
    form: AdjointForm,
) -> AdjointVec {
    let par = &model.params;
    let n = model.population.get();
    let p = &psi.0;
    let (w1, w2, w3) = (weights.w[0], weights.w[1], weights.w[2]);
    let lambda = par.lambda_rate(t);
    let kappa = par.kappa_rate(t);
    let c = w1 - p[0] + p[1];
    let protection = (par.alpha + u.u2) * (p[0] - p[6]);
    let quarantine = par.delta * (p[2] - p[3]);
    let latency = par.gamma * (p[1] - p[2]);
    let outflow_q = kappa * (p[3] - p[5]) + (lambda + u.u3) * (p[3] - p[4]);

    match form {
        AdjointForm::StateSum | AdjointForm::Printed => {
            let n2 = n * n;
            let flow = u.u1 * par.beta * x.s * x.i * c / n2;
            let others_than_s = x.e + x.i + x.q + x.r + x.d + x.p;
            let factor3 = match form {
                AdjointForm::Printed => others_than_s,
                _ => x.s + x.e + x.q + x.r + x.d + x.p,
            };
            AdjointVec([
                -u.u1 * par.beta * x.i / n2 * others_than_s * c + protection,
                flow + latency,
                -u.u1 * par.beta * x.s / n2 * factor3 * c + quarantine,
                flow + outflow_q,
                flow + w2,
                flow,
                flow + w3,
            ])
        }
        AdjointForm::ConstantPopulation => AdjointVec([
            -u.u1 * par.beta * x.i / n * c + protection,
            latency,
            -u.u1 * par.beta * x.s / n * c + quarantine,
            outflow_q,
            w2,
            0.0,
            w3,
        ]),
    }
}

/// Adjoint derivative with states and controls read off their trajectories.
#[allow(clippy::too_many_arguments)]
pub fn adjoint_rhs(
    t: f64,
    psi: &AdjointVec,
    states: &Trajectory<7>,
    controls: &Trajectory<3>,
    model: &SeirModel,
    weights: &CostWeights,
    form: AdjointForm,
) -> Result<AdjointVec> {
    let x = StateVec::from_array(states.interpolate(t)?);
    let u = ControlVec::from_array(controls.interpolate(t)?);
    Ok(adjoint_derivative(t, psi, &x, &u, model, weights, form))
}

/// Everything that defines one optimal control problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlProblem {
    pub model: SeirModel,
    pub x0: StateVec,
    pub weights: CostWeights,
    pub bounds: ControlBounds,
    pub grid: TimeGrid,
    pub adjoint_form: AdjointForm,
}

impl ControlProblem {
    pub fn validate(&self) -> Result<()> {
        self.model.params.validate()?;
        self.weights.validate()?;
        self.bounds.validate()?;
        if !self.x0.is_finite() {
            return Err(Error::InvalidArgument("initial state not finite".into()));
        }
        Ok(())
    }

    /// States under a control trajectory.
    pub fn forward(&self, controls: &Trajectory<3>) -> Result<Trajectory<7>> {
        if controls.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        integrate_forward(
            |t, y| {
                let u = ControlVec::from_array(controls.interpolate(t)?);
                Ok(self
                    .model
                    .rhs_controlled(t, &StateVec::from_array(*y), &u)
                    .to_array())
            },
            self.x0.to_array(),
            &self.grid,
        )
    }

    /// Costates from the zero terminal condition.
    pub fn backward(
        &self,
        states: &Trajectory<7>,
        controls: &Trajectory<3>,
    ) -> Result<Trajectory<7>> {
        if states.grid() != &self.grid || controls.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        integrate_backward(
            |t, y| {
                adjoint_rhs(
                    t,
                    &AdjointVec(*y),
                    states,
                    controls,
                    &self.model,
                    &self.weights,
                    self.adjoint_form,
                )
                .map(|d| d.0)
            },
            [0.0; 7],
            &self.grid,
        )
    }

    /// Cost of a control trajectory.
    pub fn cost_of(&self, controls: &Trajectory<3>) -> Result<f64> {
        let states = self.forward(controls)?;
        cost(&states, controls, &self.weights, &self.model)
    }

    /// Projected control law evaluated node by node.
    pub fn updated_controls(
        &self,
        states: &Trajectory<7>,
        adjoints: &Trajectory<7>,
    ) -> Result<Trajectory<3>> {
        let values = states
            .values()
            .iter()
            .zip(adjoints.values())
            .map(|(x, psi)| {
                control_update(
                    &StateVec::from_array(*x),
                    &AdjointVec(*psi),
                    &self.model,
                    &self.weights,
                    &self.bounds,
                )
                .to_array()
            })
            .collect();
        Trajectory::new(self.grid, values)
    }
}

/// One line of the sweep log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub state_change: f64,
    pub adjoint_change: f64,
    pub control_residual: f64,
    pub relaxation: f64,
}

/// Result of the forward-backward sweep.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub states: Trajectory<7>,
    pub adjoints: Trajectory<7>,
    pub controls: Trajectory<3>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

impl OptimalSolution {
    pub fn state_at(&self, i: usize) -> StateVec {
        StateVec::from_array(*self.states.node(i))
    }

    pub fn adjoint_at(&self, i: usize) -> AdjointVec {
        AdjointVec(*self.adjoints.node(i))
    }

    pub fn control_at(&self, i: usize) -> ControlVec {
        ControlVec::from_array(*self.controls.node(i))
    }

    /// Columns `t, S..P, psi1..psi7, u1..u3`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(crate::model::COMPARTMENTS.iter().map(|s| s.to_string()));
        header.extend((1..=7).map(|k| format!("psi{k}")));
        header.extend((1..=3).map(|k| format!("u{k}")));
        w.write_record(&header)?;
        let grid = self.states.grid();
        for i in 0..grid.len() {
            let mut row = vec![grid.time(i).to_string()];
            row.extend(self.states.node(i).iter().map(|v| v.to_string()));
            row.extend(self.adjoints.node(i).iter().map(|v| v.to_string()));
            row.extend(self.controls.node(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Largest per-component change between two trajectories, relative to the
/// component's magnitude.
fn relative_change<const D: usize>(new: &Trajectory<D>, old: &Trajectory<D>) -> f64 {
    let mut worst: f64 = 0.0;
    // Changes are measured against max(|value|, 1) so that components
    // converging to zero still settle.
    for k in 0..D {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in new.values().iter().zip(old.values()) {
            diff = diff.max((a[k] - b[k]).abs());
            scale = scale.max(a[k].abs()).max(b[k].abs());
        }
        worst = worst.max(diff / scale.max(1.0));
    }
    worst
}

fn blend(old: &Trajectory<3>, new: &Trajectory<3>, omega: f64) -> Result<Trajectory<3>> {
    let values = old
        .values()
        .iter()
        .zip(new.values())
        .map(|(a, b)| {
            let mut out = [0.0; 3];
            for k in 0..3 {
                out[k] = (1.0 - omega) * a[k] + omega * b[k];
            }
            out
        })
        .collect();
    Trajectory::new(*old.grid(), values)
}

/// Smallest relaxation the oscillation guard will halve down to.
const MIN_RELAXATION: f64 = 1.0 / 1024.0;

/// Forward-backward sweep.
///
/// Each iteration integrates the states under the current controls, the
/// costates backward from `psi(tf) = 0`, evaluates the projected control law
/// and relaxes towards it. Convergence is declared when the per-component
/// relative change of states and costates between sweeps and the relative
/// residual of the control law all drop below `opts.tolerance`. The
/// relaxation is halved after two guard violations (a cost increase larger
/// than `tolerance * |J|`, or a control residual that failed to shrink).
/// Running out of iterations is reported through `converged`, not as an
/// error.
pub fn solve_fbsm(problem: &ControlProblem, opts: &FbsmOptions) -> Result<OptimalSolution> {
    problem.validate()?;
    opts.validate()?;
    let grid = problem.grid;
    let mut controls =
        Trajectory::new(grid, vec![problem.bounds.midpoint().to_array(); grid.len()])?;
    let mut omega = opts.relaxation;
    let mut previous: Option<(Trajectory<7>, Trajectory<7>)> = None;
    let mut prev_cost = f64::INFINITY;
    let mut prev_residual = f64::INFINITY;
    let mut violations = 0;
    let mut history = Vec::new();
    let mut converged = false;
    let mut target = controls.clone();

    for iteration in 1..=opts.max_iterations {
        let states = problem.forward(&controls)?;
        let adjoints = problem.backward(&states, &controls)?;
        target = problem.updated_controls(&states, &adjoints)?;
        let j = cost(&states, &controls, &problem.weights, &problem.model)?;
        let residual = relative_change(&target, &controls);
        let (state_change, adjoint_change) = match &previous {
            Some((xs, ps)) => (relative_change(&states, xs), relative_change(&adjoints, ps)),
            None => (f64::INFINITY, f64::INFINITY),
        };
        history.push(IterationRecord {
            iteration,
            cost: j,
            state_change,
            adjoint_change,
            control_residual: residual,
            relaxation: omega,
        });

        if residual.max(state_change).max(adjoint_change) <= opts.tolerance {
            converged = true;
            break;
        }

        if iteration > 1 {
            let cost_up = j > prev_cost + opts.tolerance * prev_cost.abs();
            if cost_up || residual >= prev_residual {
                violations += 1;
                if violations >= 2 {
                    omega = (0.5 * omega).max(MIN_RELAXATION);
                    violations = 0;
                }
            }
        }
        prev_cost = j;
        prev_residual = residual;
        previous = Some((states, adjoints));
        controls = blend(&controls, &target, omega)?;
    }

    // Report states, costates and cost consistent with the returned controls.
    let controls = if converged { target } else { controls };
    let states = problem.forward(&controls)?;
    let adjoints = problem.backward(&states, &controls)?;
    let j = cost(&states, &controls, &problem.weights, &problem.model)?;
    Ok(OptimalSolution {
        states,
        adjoints,
        controls,
        cost: j,
        iterations: history.len(),
        converged,
        history,
    })
}

/// Gradient of the discretized cost [`ControlProblem::cost_of`] with respect
/// to every control node value, by reverse accumulation through the RK4 steps
/// and the trapezoid rule.
///
/// The state pullbacks `L_x + f_x^T v` and `f_u^T v` are taken from
/// [`adjoint_derivative`] and [`hamiltonian_gradient`], so this is the
/// discrete counterpart of the backward sweep: an error in the adjoint
/// equations changes the result. Components of the pullback along
/// `(1, ..., 1)`, where the adjoint forms differ, do not reach the controls
/// because the vector field conserves the total.
pub fn discrete_gradient(
    problem: &ControlProblem,
    controls: &Trajectory<3>,
) -> Result<Vec<[f64; 3]>> {
    let states = problem.forward(controls)?;
    let grid = problem.grid;
    let m = &problem.model;
    let w = &problem.weights;
    let uncoupled = CostWeights {
        w: [0.0; 3],
        v: w.v,
    };
    let form = problem.adjoint_form;
    let pull_x =
        |t: f64, x: &StateVec, u: &ControlVec, v: &[f64; 7], weights: &CostWeights| -> [f64; 7] {
            adjoint_derivative(t, &AdjointVec(*v), x, u, m, weights, form)
                .0
                .map(|d| -d)
        };
    let pull_u = |x: &StateVec, u: &ControlVec, v: &[f64; 7]| -> [f64; 3] {
        let g = hamiltonian_gradient(x, u, &AdjointVec(*v), m, &uncoupled);
        let l = running_cost_gradient(x, u, m, &uncoupled);
        [g[0] - l[0], g[1] - l[1], g[2] - l[2]]
    };
    let node = |i: usize| {
        (
            StateVec::from_array(*states.node(i)),
            ControlVec::from_array(*controls.node(i)),
        )
    };

    let n = grid.len();
    let mut grad = vec![[0.0; 3]; n];
    for (i, g) in grad.iter_mut().enumerate() {
        let (x, u) = node(i);
        let wi = grid.trapezoid_weight(i);
        for (gk, lk) in g.iter_mut().zip(running_cost_gradient(&x, &u, m, w)) {
            *gk += wi * lk;
        }
    }
    let (x_last, u_last) = node(n - 1);
    let w_last = grid.trapezoid_weight(n - 1);
    let mut lambda = pull_x(grid.time(n - 1), &x_last, &u_last, &[0.0; 7], w).map(|v| w_last * v);

    for i in (0..grid.steps()).rev() {
        let t = grid.time(i);
        let t_next = grid.time(i + 1);
        let h = t_next - t;
        let t_mid = t + 0.5 * h;
        let theta = (t_mid - t) / h;
        let (x, u0) = node(i);
        let u1 = ControlVec::from_array(*controls.node(i + 1));
        let um = ControlVec::from_array(controls.interpolate(t_mid)?);
        let xa = x.to_array();
        let stage = |y: &[f64; 7], k: &[f64; 7], c: f64| -> StateVec {
            let mut z = *y;
            for j in 0..7 {
                z[j] += c * k[j];
            }
            StateVec::from_array(z)
        };
        let x1 = x;
        let k1 = m.rhs_controlled(t, &x1, &u0).to_array();
        let x2 = stage(&xa, &k1, 0.5 * h);
        let k2 = m.rhs_controlled(t_mid, &x2, &um).to_array();
        let x3 = stage(&xa, &k2, 0.5 * h);
        let k3 = m.rhs_controlled(t_mid, &x3, &um).to_array();
        let x4 = stage(&xa, &k3, h);

        let a = lambda;
        let mut bar_x = a;
        let mut bar_k1 = a.map(|v| h / 6.0 * v);
        let mut bar_k2 = a.map(|v| h / 3.0 * v);
        let mut bar_k3 = a.map(|v| h / 3.0 * v);
        let bar_k4 = a.map(|v| h / 6.0 * v);
        let zero_w = &uncoupled;

        let g4 = pull_x(t_next, &x4, &u1, &bar_k4, zero_w);
        let gu4 = pull_u(&x4, &u1, &bar_k4);
        for j in 0..7 {
            bar_x[j] += g4[j];
            bar_k3[j] += h * g4[j];
        }
        let g3 = pull_x(t_mid, &x3, &um, &bar_k3, zero_w);
        let gu3 = pull_u(&x3, &um, &bar_k3);
        for j in 0..7 {
            bar_x[j] += g3[j];
            bar_k2[j] += 0.5 * h * g3[j];
        }
        let g2 = pull_x(t_mid, &x2, &um, &bar_k2, zero_w);
        let gu2 = pull_u(&x2, &um, &bar_k2);
        for j in 0..7 {
            bar_x[j] += g2[j];
            bar_k1[j] += 0.5 * h * g2[j];
        }
        let g1 = pull_x(t, &x1, &u0, &bar_k1, zero_w);
        let gu1 = pull_u(&x1, &u0, &bar_k1);
        for j in 0..7 {
            bar_x[j] += g1[j];
        }
        for k in 0..3 {
            let mid = gu2[k] + gu3[k];
            grad[i][k] += gu1[k] + (1.0 - theta) * mid;
            grad[i + 1][k] += gu4[k] + theta * mid;
        }
        let wi = grid.trapezoid_weight(i);
        let direct = pull_x(t, &x1, &u0, &[0.0; 7], w);
        for j in 0..7 {
            lambda[j] = bar_x[j] + wi * direct[j];
        }
    }
    Ok(grad)
}

/// Adjoint-based and finite-difference derivatives of `J` with respect to one
/// control node value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// From [`discrete_gradient`].
    pub adjoint: f64,
    /// From the continuous adjoint trajectory: `dH/du_i` integrated against
    /// the node's hat function. Differs from `adjoint` by the discretization
    /// error, which is largest next to `tf`.
    pub continuous: f64,
    pub finite_difference: f64,
    /// `dH/du_i` at the probed node.
    pub hamiltonian_slope: f64,
}

impl GradientCheck {
    pub fn relative_error(&self) -> f64 {
        let scale = self.adjoint.abs().max(self.finite_difference.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.adjoint - self.finite_difference).abs() / scale
        }
    }
}

/// Compares the adjoint derivative of `J` with respect to the value of
/// control `component` at `node` against a central difference with bump
/// `epsilon`. The probed value must stay strictly inside its bounds.
pub fn gradient_check(
    problem: &ControlProblem,
    controls: &Trajectory<3>,
    component: usize,
    node: usize,
    epsilon: f64,
) -> Result<GradientCheck> {
    if component >= 3 || node >= problem.grid.len() {
        return Err(Error::InvalidArgument(format!(
            "probe (component {component}, node {node}) out of range"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let value = controls.node(node)[component];
    let (lo, hi) = (problem.bounds.min[component], problem.bounds.max[component]);
    if !(value - epsilon > lo && value + epsilon < hi) {
        return Err(Error::ProbeAtBound { node, component });
    }
    let adjoint = discrete_gradient(problem, controls)?[node][component];

    let states = problem.forward(controls)?;
    let adjoints = problem.backward(&states, controls)?;
    let at = |t: f64| -> Result<(StateVec, ControlVec, AdjointVec)> {
        Ok((
            StateVec::from_array(states.interpolate(t)?),
            ControlVec::from_array(controls.interpolate(t)?),
            AdjointVec(adjoints.interpolate(t)?),
        ))
    };
    let (m, w) = (&problem.model, &problem.weights);
    // psi . df/du_i, the part of dH/du_i that is not the running cost.
    let coupling_at = |t: f64| -> Result<f64> {
        let (x, u, psi) = at(t)?;
        Ok(hamiltonian_gradient(&x, &u, &psi, m, w)[component]
            - running_cost_gradient(&x, &u, m, w)[component])
    };
    let grid = problem.grid;
    let t_node = grid.time(node);
    let (x, u, psi) = at(t_node)?;
    let slope = hamiltonian_gradient(&x, &u, &psi, m, w)[component];
    let direct = running_cost_gradient(&x, &u, m, w)[component];
    // Running cost through the trapezoid weight; coupling against the hat
    // function by Simpson's rule on each adjacent step.
    let h = grid.step();
    let c_node = slope - direct;
    let mut continuous = grid.trapezoid_weight(node) * direct;
    if node > 0 {
        continuous += h / 6.0 * (c_node + 2.0 * coupling_at(t_node - h / 2.0)?);
    }
    if node + 1 < grid.len() {
        continuous += h / 6.0 * (c_node + 2.0 * coupling_at(t_node + h / 2.0)?);
    }

    let bumped = |delta: f64| -> Result<f64> {
        let mut values = controls.values().to_vec();
        values[node][component] += delta;
        problem.cost_of(&Trajectory::new(problem.grid, values)?)
    };
    let finite_difference = (bumped(epsilon)? - bumped(-epsilon)?) / (2.0 * epsilon);
    Ok(GradientCheck {
        adjoint,
        continuous,
        finite_difference,
        hamiltonian_slope: slope,
    })
}

/// Worst case found by [`minimality_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalityReport {
    /// Largest `(H(u*) - H(u)) / (1 + |H(u*)|)` over all samples; `<= 0`
    /// when no sampled control beats the extremal one.
    pub worst_violation: f64,
    pub worst_node: usize,
    pub samples: usize,
}

/// Samples `nodes` random grid nodes and `per_node` random admissible
/// controls at each, comparing the Hamiltonian against the solution's
/// control there.
pub fn minimality_check<R: Rng>(
    problem: &ControlProblem,
    solution: &OptimalSolution,
    nodes: usize,
    per_node: usize,
    rng: &mut R,
) -> MinimalityReport {
    let mut report = MinimalityReport {
        worst_violation: f64::NEG_INFINITY,
        worst_node: 0,
        samples: 0,
    };
    let b = &problem.bounds;
    for _ in 0..nodes {
        let i = rng.gen_range(0..problem.grid.len());
        let t = problem.grid.time(i);
        let x = solution.state_at(i);
        let psi = solution.adjoint_at(i);
        let h_star = hamiltonian(
            &x,
            &solution.control_at(i),
            &psi,
            t,
            &problem.model,
            &problem.weights,
        );
        for _ in 0..per_node {
            let mut u = [0.0; 3];
            for k in 0..3 {
                u[k] = if b.max[k] > b.min[k] {
                    rng.gen_range(b.min[k]..=b.max[k])
                } else {
                    b.min[k]
                };
            }
            let h = hamiltonian(
                &x,
                &ControlVec::from_array(u),
                &psi,
                t,
                &problem.model,
                &problem.weights,
            );
            let violation = (h_star - h) / (1.0 + h_star.abs());
            if violation > report.worst_violation {
                report.worst_violation = violation;
                report.worst_node = i;
            }
            report.samples += 1;
        }
    }
    report
}
