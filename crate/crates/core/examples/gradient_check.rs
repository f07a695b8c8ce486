//! Adjoint gradient against central differences of the discretized cost,
//! for each adjoint form.

use seir_control::pontryagin::gradient_check;
use seir_control::{
    AdjointForm, ControlBounds, ControlProblem, CostWeights, InitialConditions, ModelParams,
    Population, SeirModel, TimeGrid, Trajectory,
};

fn main() -> anyhow::Result<()> {
    let ic = InitialConditions::ITALY_2020;
    let grid = TimeGrid::new(0.0, 10.0, 0.1)?;
    let controls = Trajectory::constant(grid, [0.55, 0.5, 0.5])?;
    for form in [
        AdjointForm::StateSum,
        AdjointForm::ConstantPopulation,
        AdjointForm::Printed,
    ] {
        let problem = ControlProblem {
            model: SeirModel::new(ModelParams::ITALY_2020, Population::new(ic.population)?)?,
            x0: ic.state()?,
            weights: CostWeights::UNIT,
            bounds: ControlBounds::ITALY_2020,
            grid,
            adjoint_form: form,
        };
        println!("{form}");
        for (node, comp) in [(0, 0), (25, 1), (50, 2), (75, 0), (99, 0)] {
            let g = gradient_check(&problem, &controls, comp, node, 1e-4)?;
            println!(
                "  node {node:>3} u{}: adjoint {:>13.6e}  fd {:>13.6e}  rel {:.1e}",
                comp + 1,
                g.adjoint,
                g.finite_difference,
                g.relative_error()
            );
        }
    }
    Ok(())
}
