//! Relative error between observed and modelled counts, improvement of the
//! controlled model over observations, and the monthly comparison tables
//! built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::data::{Observable, ObservedSeries};
use crate::error::{Error, Result};
use crate::integrator::{Trajectory, GRID_TOLERANCE};

/// A percentage, kept unrounded. [`Percent::display`] truncates to two
/// decimals, which is how the reference tables print.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Percent(pub f64);

impl Percent {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Value truncated towards zero at two decimals.
    pub fn truncated(self) -> f64 {
        // The 1e-9 guard keeps exact two-decimal values from flooring down
        // after binary rounding.
        (self.0 * 100.0 + 1e-9).floor() / 100.0
    }

    pub fn display(self) -> String {
        format!("{:.2}%", self.truncated())
    }
}

impl std::fmt::Display for Percent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.display())
    }
}

/// `100 |real - model| / real`.
pub fn relative_error(real: f64, model: f64) -> Result<Percent> {
    if real == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(Percent(100.0 * (real - model).abs() / real))
}

/// Sign of `controlled - real`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increase,
    Decrease,
    Unchanged,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Increase => "increase",
            Direction::Decrease => "decrease",
            Direction::Unchanged => "unchanged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub percent: Percent,
    pub direction: Direction,
}

/// `100 |controlled - real| / real`, with the direction of the change.
pub fn improvement(real: f64, controlled: f64) -> Result<Improvement> {
    if real == 0.0 {
        return Err(Error::DivisionByZero);
    }
    let direction = if controlled > real {
        Direction::Increase
    } else if controlled < real {
        Direction::Decrease
    } else {
        Direction::Unchanged
    };
    Ok(Improvement {
        percent: Percent(100.0 * (controlled - real).abs() / real),
        direction,
    })
}

/// Anything that yields a model value for an observable on a date.
pub trait ModelSource {
    fn value(&self, which: Observable, date: NaiveDate) -> Result<f64>;
}

/// A state trajectory whose `t = 0` is `start`.
#[derive(Debug, Clone)]
pub struct DatedTrajectory<'a> {
    pub start: NaiveDate,
    pub states: &'a Trajectory<7>,
}

impl ModelSource for DatedTrajectory<'_> {
    fn value(&self, which: Observable, date: NaiveDate) -> Result<f64> {
        let t = (date - self.start).num_days() as f64;
        let x = self
            .states
            .interpolate(t)
            .map_err(|_| Error::DateOutOfRange(format!("{date} in trajectory")))?;
        Ok(x[which.state_index()])
    }
}

/// Model values given directly per date, e.g. columns copied from a table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelColumns(pub BTreeMap<NaiveDate, [f64; 3]>);

impl ModelColumns {
    /// Samples `states` at every whole day of its grid, `t = 0` at `start`.
    pub fn from_trajectory(start: NaiveDate, states: &Trajectory<7>) -> Result<Self> {
        let grid = states.grid();
        let mut out = BTreeMap::new();
        let first = grid.t0().ceil() as i64;
        let last = (grid.tf() + GRID_TOLERANCE).floor() as i64;
        for day in first..=last {
            let x = states.interpolate(day as f64)?;
            out.insert(start + Duration::days(day), [x[3], x[4], x[5]]);
        }
        Ok(ModelColumns(out))
    }
}

impl ModelSource for ModelColumns {
    fn value(&self, which: Observable, date: NaiveDate) -> Result<f64> {
        let row = self
            .0
            .get(&date)
            .ok_or_else(|| Error::DateOutOfRange(format!("{date} in model columns")))?;
        Ok(match which {
            Observable::Q => row[0],
            Observable::R => row[1],
            Observable::D => row[2],
        })
    }
}

impl ModelSource for ObservedSeries {
    fn value(&self, which: Observable, date: NaiveDate) -> Result<f64> {
        ObservedSeries::value(self, which, date)
            .ok_or_else(|| Error::DateOutOfRange(format!("{date} in observed series")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub date: NaiveDate,
    pub real: f64,
    pub uncontrolled: f64,
    pub controlled: f64,
    pub relative_error: Percent,
    pub improvement: Improvement,
}

/// Real versus uncontrolled versus controlled values of one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub series: Observable,
    pub title: String,
    pub rows: Vec<TableRow>,
}

/// One row per sample date; dates are sorted and must be covered by every
/// input.
pub fn build_table(
    series: Observable,
    real: &dyn ModelSource,
    uncontrolled: &dyn ModelSource,
    controlled: &dyn ModelSource,
    sample_dates: &[NaiveDate],
) -> Result<ComparisonTable> {
    let mut dates = sample_dates.to_vec();
    dates.sort();
    dates.dedup();
    let mut rows = Vec::with_capacity(dates.len());
    for date in dates {
        let r = real.value(series, date)?;
        let m1 = uncontrolled.value(series, date)?;
        let m5 = controlled.value(series, date)?;
        rows.push(TableRow {
            date,
            real: r,
            uncontrolled: m1,
            controlled: m5,
            relative_error: relative_error(r, m1)?,
            improvement: improvement(r, m5)?,
        });
    }
    let title = match rows.first() {
        Some(row) => format!("{} {}", series_label(series), row.date.format("%b %Y")),
        None => series_label(series).to_string(),
    };
    Ok(ComparisonTable {
        series,
        title,
        rows,
    })
}

fn series_label(series: Observable) -> &'static str {
    match series {
        Observable::R => "Recovered individuals R(t),",
        Observable::D => "Death individuals D(t),",
        Observable::Q => "Quarantined individuals Q(t),",
    }
}

/// Groups sample dates by calendar month, in order.
pub fn split_by_month(dates: &[NaiveDate]) -> Vec<Vec<NaiveDate>> {
    let mut groups: BTreeMap<(i32, u32), Vec<NaiveDate>> = BTreeMap::new();
    for d in dates {
        groups.entry((d.year(), d.month())).or_default().push(*d);
    }
    groups.into_values().collect()
}

impl ComparisonTable {
    /// Aligned text mirroring the layout `Day | Real | (1) | (5) | eta | I`.
    pub fn render_text(&self) -> String {
        let s = self.series.name();
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(
            out,
            "{:>3}  {:>10}  {:>10}  {:>10}  {:>8}  {:>8}",
            "Day",
            "Real",
            "(1)",
            "(5)",
            format!("eta_{s}"),
            format!("I_{s}")
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:>3}  {:>10.0}  {:>10.0}  {:>10.0}  {:>8}  {:>8}",
                format!("{:02}", row.date.day()),
                row.real,
                row.uncontrolled,
                row.controlled,
                row.relative_error.display(),
                row.improvement.percent.display()
            );
        }
        out
    }

    /// CSV rows; percentages are written unrounded.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "series",
            "date",
            "real",
            "uncontrolled",
            "controlled",
            "relative_error_percent",
            "improvement_percent",
            "direction",
        ])?;
        for row in &self.rows {
            w.write_record([
                self.series.name().to_string(),
                row.date.to_string(),
                row.real.to_string(),
                row.uncontrolled.to_string(),
                row.controlled.to_string(),
                row.relative_error.value().to_string(),
                row.improvement.percent.value().to_string(),
                row.improvement.direction.as_str().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        assert_eq!(
            relative_error(209610.0, 207996.0).unwrap().display(),
            "0.77%"
        );
        assert_eq!(relative_error(35541.0, 35510.0).unwrap().display(), "0.08%");
        assert_eq!(relative_error(5.0, 5.0).unwrap().value(), 0.0);
        assert!(matches!(
            relative_error(0.0, 1.0),
            Err(Error::DivisionByZero)
        ));
    }

    #[test]
    fn improvement_examples() {
        let a = improvement(209610.0, 236134.0).unwrap();
        assert_eq!(a.percent.display(), "12.65%");
        assert_eq!(a.direction, Direction::Increase);
        let b = improvement(38321.0, 35498.0).unwrap();
        assert_eq!(b.percent.display(), "7.36%");
        assert_eq!(b.direction, Direction::Decrease);
        let c = improvement(299191.0, 107.0).unwrap();
        assert_eq!(c.percent.display(), "99.96%");
        assert!(matches!(improvement(0.0, 3.0), Err(Error::DivisionByZero)));
    }

    #[test]
    fn truncation_not_rounding() {
        // 100 * 2709 / 211885 = 1.2785...
        assert_eq!(
            relative_error(211885.0, 209176.0).unwrap().display(),
            "1.27%"
        );
        assert_eq!(Percent(0.25).display(), "0.25%");
        assert_eq!(Percent(0.0).display(), "0.00%");
    }

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn identical_inputs_give_zero_table() {
        let real = ObservedSeries::new(
            vec![d("2020-09-01"), d("2020-09-02")],
            vec![10.0, 12.0],
            vec![20.0, 21.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        for s in Observable::ALL {
            let t =
                build_table(s, &real, &real, &real, &[d("2020-09-02"), d("2020-09-01")]).unwrap();
            assert_eq!(t.rows.len(), 2);
            assert_eq!(t.rows[0].date, d("2020-09-01"));
            for row in &t.rows {
                assert_eq!(row.relative_error.value(), 0.0);
                assert_eq!(row.improvement.percent.value(), 0.0);
                assert_eq!(row.improvement.direction, Direction::Unchanged);
            }
        }
        assert!(matches!(
            build_table(Observable::Q, &real, &real, &real, &[d("2020-09-03")]),
            Err(Error::DateOutOfRange(_))
        ));
    }

    #[test]
    fn month_grouping() {
        let g = split_by_month(&[d("2020-10-01"), d("2020-09-05"), d("2020-09-01")]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0], vec![d("2020-09-05"), d("2020-09-01")]);
    }
}
