#![allow(dead_code)]

use seir_control::fitting::{FitProblem, FitVector, Observation, ParameterBounds};
use seir_control::{InitialConditions, ModelParams, Population, SeirModel, TimeGrid};

pub const SYNTHETIC_PARAMS: ModelParams = ModelParams {
    alpha: 0.01,
    beta: 0.8,
    gamma: 0.25,
    delta: 0.15,
    lambda: [0.05, 0.3, 20.0],
    kappa: [0.004, 0.05, 30.0],
};

pub const SYNTHETIC_INITIAL: InitialConditions = InitialConditions {
    population: 1.0e6,
    e0: 2000.0,
    i0: 1000.0,
    q0: 500.0,
    r0: 1000.0,
    d0: 50.0,
    p0: 0.0,
};

pub fn synthetic_truth() -> FitVector {
    FitVector::new(
        &SYNTHETIC_PARAMS,
        SYNTHETIC_INITIAL.e0,
        SYNTHETIC_INITIAL.i0,
    )
}

/// Noiseless daily `Q, R, D` over 60 days generated from [`synthetic_truth`].
pub fn synthetic_problem() -> FitProblem {
    let pop = Population::new(SYNTHETIC_INITIAL.population).unwrap();
    let grid = TimeGrid::new(0.0, 60.0, 0.1).unwrap();
    let model = SeirModel::new(SYNTHETIC_PARAMS, pop).unwrap();
    let traj = model
        .simulate(&SYNTHETIC_INITIAL.state().unwrap(), &grid)
        .unwrap();
    let observations = (0..=60)
        .map(|day| {
            let x = traj.node(day * 10);
            Observation {
                t: day as f64,
                q: x[3],
                r: x[4],
                d: x[5],
            }
        })
        .collect();
    let ic = SYNTHETIC_INITIAL;
    FitProblem::new(
        observations,
        pop,
        [ic.q0, ic.r0, ic.d0, ic.p0],
        ParameterBounds::default(),
        grid,
    )
    .unwrap()
}

/// The generating vector with alternate components scaled by 1.2 and 0.8.
pub fn perturbed_guess() -> FitVector {
    let mut g = synthetic_truth();
    for (k, v) in g.0.iter_mut().enumerate() {
        *v *= if k % 2 == 0 { 1.2 } else { 0.8 };
    }
    g
}
