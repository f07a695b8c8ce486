//! Uncontrolled run of the fitted Italy 2020 model, Sept 1 to Nov 30.

use seir_control::model::COMPARTMENTS;
use seir_control::{InitialConditions, ModelParams, Population, SeirModel, TimeGrid};

fn main() -> anyhow::Result<()> {
    let ic = InitialConditions::ITALY_2020;
    let model = SeirModel::new(ModelParams::ITALY_2020, Population::new(ic.population)?)?;
    let traj = model.simulate(&ic.state()?, &TimeGrid::new(0.0, 90.0, 0.1)?)?;

    println!(
        "{:>4} {}",
        "day",
        COMPARTMENTS.map(|c| format!("{c:>12}")).join("")
    );
    for day in (0..=90).step_by(10) {
        let x = traj.interpolate(day as f64)?;
        println!("{day:>4} {}", x.map(|v| format!("{v:>12.0}")).join(""));
    }
    let drift = (traj.last().iter().sum::<f64>() - ic.population).abs() / ic.population;
    println!("relative drift of the total: {drift:.1e}");
    Ok(())
}
