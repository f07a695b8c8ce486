//! Comparison tables for recovered, dead and quarantined counts built from
//! the published real and model columns.

use seir_control::metrics::{build_table, split_by_month};
use seir_control::reference::{columns, sample_dates, Column};
use seir_control::Observable;

fn main() -> anyhow::Result<()> {
    let real = columns(Column::Real);
    let uncontrolled = columns(Column::Uncontrolled);
    let controlled = columns(Column::Controlled);
    for series in [Observable::R, Observable::D, Observable::Q] {
        for dates in split_by_month(&sample_dates()) {
            let table = build_table(series, &real, &uncontrolled, &controlled, &dates)?;
            println!("{}", table.render_text());
        }
    }
    Ok(())
}
