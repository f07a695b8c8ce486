//! Optimal social distancing, protection and treatment for the Italy 2020
//! scenario by the forward-backward sweep.

use rand::SeedableRng;
use seir_control::pontryagin::minimality_check;
use seir_control::{
    solve_fbsm, AdjointForm, ControlBounds, ControlProblem, CostWeights, FbsmOptions,
    InitialConditions, ModelParams, Population, SeirModel, TimeGrid,
};

fn main() -> anyhow::Result<()> {
    let ic = InitialConditions::ITALY_2020;
    let problem = ControlProblem {
        model: SeirModel::new(ModelParams::ITALY_2020, Population::new(ic.population)?)?,
        x0: ic.state()?,
        weights: CostWeights::UNIT,
        bounds: ControlBounds::ITALY_2020,
        grid: TimeGrid::new(0.0, 90.0, 0.1)?,
        adjoint_form: AdjointForm::StateSum,
    };
    let sol = solve_fbsm(&problem, &FbsmOptions::default())?;
    println!(
        "converged {} in {} sweeps, J = {:.6e}",
        sol.converged, sol.iterations, sol.cost
    );

    let free = problem.model.simulate(&problem.x0, &problem.grid)?;
    println!(
        "{:>4} {:>6} {:>6} {:>6} {:>12} {:>12}",
        "day", "u1", "u2", "u3", "Q free", "Q control"
    );
    for day in (0..=90).step_by(6) {
        let i = day * 10;
        let u = sol.controls.node(i);
        println!(
            "{day:>4} {:>6.3} {:>6.3} {:>6.3} {:>12.0} {:>12.0}",
            u[0],
            u[1],
            u[2],
            free.node(i)[3],
            sol.states.node(i)[3]
        );
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let report = minimality_check(&problem, &sol, 100, 1000, &mut rng);
    println!(
        "worst Hamiltonian violation over {} samples: {:.2e}",
        report.samples, report.worst_violation
    );
    Ok(())
}
