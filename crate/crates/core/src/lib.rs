//! Generalized SEIR-type COVID-19 model with parameter calibration and
//! Pontryagin optimal control.
//!
//! - [`model`]: compartments, rates and the controlled / uncontrolled vector fields.
//! - [`integrator`]: fixed-step RK4 forward and backward sweeps with dense output.
//! - [`pontryagin`]: cost, Hamiltonian, adjoint system, projected control law
//!   and the forward-backward sweep.
//! - [`fitting`]: projected Levenberg-Marquardt calibration against observed series.
//! - [`data`]: regional CSV ingestion and national aggregation.
//! - [`metrics`]: relative error, improvement and comparison tables.
//! - [`reference`]: the Italy 2020 comparison tables.
//! - [`config`], [`cli`]: run configuration and the command implementations.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod fitting;
pub mod integrator;
pub mod metrics;
pub mod model;
pub mod pontryagin;
pub mod reference;

pub use data::{Observable, ObservedSeries};
pub use error::{Error, Result};
pub use fitting::{fit, FitOptions, FitProblem, FitResult, FitVector};
pub use integrator::{integrate_backward, integrate_forward, TimeGrid, Trajectory};
pub use model::{
    ControlBounds, ControlVec, InitialConditions, ModelParams, Population, SeirModel, StateVec,
};
pub use pontryagin::{
    solve_fbsm, AdjointForm, AdjointVec, ControlProblem, CostWeights, FbsmOptions, OptimalSolution,
};
