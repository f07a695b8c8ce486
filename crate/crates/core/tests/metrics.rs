use chrono::NaiveDate;
use proptest::prelude::*;
use seir_control::metrics::{
    build_table, improvement, relative_error, split_by_month, Direction, ModelColumns,
};
use seir_control::reference::{columns, sample_dates, Column, TABLES};
use seir_control::{Error, Observable};

#[test]
fn published_examples() {
    assert_eq!(
        relative_error(209610.0, 207996.0).unwrap().display(),
        "0.77%"
    );
    assert_eq!(relative_error(35541.0, 35510.0).unwrap().display(), "0.08%");
    assert_eq!(relative_error(5.0, 5.0).unwrap().value(), 0.0);

    let up = improvement(209610.0, 236134.0).unwrap();
    assert_eq!(
        (up.percent.display(), up.direction),
        ("12.65%".to_string(), Direction::Increase)
    );
    let down = improvement(38321.0, 35498.0).unwrap();
    assert_eq!(
        (down.percent.display(), down.direction),
        ("7.36%".to_string(), Direction::Decrease)
    );
    let q = improvement(299191.0, 107.0).unwrap();
    assert_eq!(
        (q.percent.display(), q.direction),
        ("99.96%".to_string(), Direction::Decrease)
    );
}

#[test]
fn zero_reference_is_an_error() {
    assert!(matches!(
        relative_error(0.0, 1.0),
        Err(Error::DivisionByZero)
    ));
    assert!(matches!(improvement(0.0, 1.0), Err(Error::DivisionByZero)));
}

proptest! {
    #[test]
    fn metrics_are_scale_invariant(real in 1.0f64..1e7, model in 0.0f64..1e7, c in 1e-3f64..1e3) {
        let a = relative_error(real, model).unwrap().value();
        let b = relative_error(c * real, c * model).unwrap().value();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        let a = improvement(real, model).unwrap();
        let b = improvement(c * real, c * model).unwrap();
        prop_assert!((a.percent.value() - b.percent.value()).abs() <= 1e-10 * a.percent.value().max(1.0));
    }

    #[test]
    fn relative_error_vanishes_only_on_equality(real in 1.0f64..1e7, model in 0.0f64..1e7) {
        let e = relative_error(real, model).unwrap().value();
        prop_assert_eq!(e == 0.0, real == model);
        prop_assert_eq!(relative_error(real, real).unwrap().value(), 0.0);
    }
}

#[test]
fn identical_inputs_give_zero_tables() {
    let real = columns(Column::Real);
    for (series, dates) in [Observable::R, Observable::D, Observable::Q]
        .into_iter()
        .flat_map(|s| {
            split_by_month(&sample_dates())
                .into_iter()
                .map(move |d| (s, d))
        })
    {
        let table = build_table(series, &real, &real, &real, &dates).unwrap();
        assert!(!table.rows.is_empty());
        for row in &table.rows {
            assert_eq!(row.relative_error.value(), 0.0);
            assert_eq!(row.improvement.percent.value(), 0.0);
            assert_eq!(row.improvement.direction, Direction::Unchanged);
        }
    }
}

#[test]
fn first_day_rows_are_zero() {
    let (real, m1, m5) = (
        columns(Column::Real),
        columns(Column::Uncontrolled),
        columns(Column::Controlled),
    );
    let d1 = NaiveDate::from_ymd_opt(2020, 9, 1).unwrap();
    for series in Observable::ALL {
        let t = build_table(series, &real, &m1, &m5, &[d1]).unwrap();
        assert_eq!(t.rows[0].relative_error.display(), "0.00%");
        assert_eq!(t.rows[0].improvement.percent.display(), "0.00%");
    }
}

#[test]
fn first_recovered_table_reproduces_printed_percentages() {
    let table = &TABLES[0];
    assert_eq!((table.series, table.month), (Observable::R, 9));
    let (real, m1, m5) = (
        columns(Column::Real),
        columns(Column::Uncontrolled),
        columns(Column::Controlled),
    );
    let built = build_table(table.series, &real, &m1, &m5, &table.dates()).unwrap();
    for (row, printed) in built.rows.iter().zip(table.rows) {
        assert!(
            (row.relative_error.truncated() - printed.4).abs() <= 0.01 + 1e-9,
            "{:?}",
            row
        );
        assert!(
            (row.improvement.percent.truncated() - printed.5).abs() <= 0.01 + 1e-9,
            "{:?}",
            row
        );
    }
}

#[test]
fn sampling_outside_inputs_is_a_range_error() {
    let real = columns(Column::Real);
    let empty = ModelColumns::default();
    let d = NaiveDate::from_ymd_opt(2020, 9, 5).unwrap();
    assert!(matches!(
        build_table(Observable::Q, &real, &empty, &real, &[d]),
        Err(Error::DateOutOfRange(_))
    ));
}

#[test]
fn rendered_table_has_one_line_per_row() {
    let (real, m1, m5) = (
        columns(Column::Real),
        columns(Column::Uncontrolled),
        columns(Column::Controlled),
    );
    let table = &TABLES[5];
    let built = build_table(table.series, &real, &m1, &m5, &table.dates()).unwrap();
    let text = built.render_text();
    assert!(text.contains("99.96%"));
    let mut csv = Vec::new();
    built.write_csv(&mut csv).unwrap();
    assert_eq!(
        String::from_utf8(csv).unwrap().lines().count(),
        table.rows.len() + 1
    );
}
