//! Recovers a known parameter vector from noiseless synthetic Q, R, D data.

use seir_control::fitting::{Observation, ParameterBounds, PARAMETER_NAMES};
use seir_control::{
    fit, FitOptions, FitProblem, FitVector, InitialConditions, ModelParams, Population, SeirModel,
    TimeGrid,
};

fn main() -> anyhow::Result<()> {
    let truth_params = ModelParams {
        alpha: 0.01,
        beta: 0.8,
        gamma: 0.25,
        delta: 0.15,
        lambda: [0.05, 0.3, 20.0],
        kappa: [0.004, 0.05, 30.0],
    };
    let ic = InitialConditions {
        population: 1e6,
        e0: 2000.0,
        i0: 1000.0,
        q0: 500.0,
        r0: 1000.0,
        d0: 50.0,
        p0: 0.0,
    };
    let pop = Population::new(ic.population)?;
    let grid = TimeGrid::new(0.0, 60.0, 0.1)?;
    let traj = SeirModel::new(truth_params, pop)?.simulate(&ic.state()?, &grid)?;
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
    let problem = FitProblem::new(
        observations,
        pop,
        [ic.q0, ic.r0, ic.d0, ic.p0],
        ParameterBounds::default(),
        grid,
    )?;

    let truth = FitVector::new(&truth_params, ic.e0, ic.i0);
    let mut guess = truth;
    for (k, v) in guess.0.iter_mut().enumerate() {
        *v *= if k % 2 == 0 { 1.2 } else { 0.8 };
    }
    let res = fit(&problem, &guess, &FitOptions::default())?;
    println!(
        "{:?} after {} iterations, residual {:.3e}",
        res.termination, res.iterations, res.residual_norm
    );
    for (k, name) in PARAMETER_NAMES.iter().enumerate() {
        println!(
            "{name:>8} {:>14.6e} {:>14.6e} {:>14.6e}",
            guess.0[k], res.theta.0[k], truth.0[k]
        );
    }
    Ok(())
}
