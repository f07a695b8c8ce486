//! Reference comparison tables for Italy, September and October 2020:
//! observed counts, the uncontrolled and controlled model values, and the
//! percentages as printed (truncated to two decimals).

use chrono::NaiveDate;

use crate::data::Observable;
use crate::metrics::ModelColumns;

/// `(day of month, real, uncontrolled, controlled, relative error %, improvement %)`.
pub type Row = (u32, f64, f64, f64, f64, f64);

#[derive(Debug, Clone, Copy)]
pub struct ReferenceTable {
    pub number: usize,
    pub series: Observable,
    pub year: i32,
    pub month: u32,
    pub rows: &'static [Row],
}

impl ReferenceTable {
    pub fn date(&self, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, day).expect("valid table date")
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| self.date(r.0)).collect()
    }
}

pub const RECOVERED_SEP: &[Row] = &[
    (1, 207944.0, 207944.0, 207944.0, 0.0, 0.0),
    (5, 209610.0, 207996.0, 236134.0, 0.77, 12.65),
    (10, 211885.0, 209176.0, 238769.0, 1.27, 12.68),
    (15, 214645.0, 211897.0, 240170.0, 1.28, 11.89),
    (20, 218351.0, 214873.0, 241363.0, 1.59, 10.53),
    (25, 222716.0, 218150.0, 242306.0, 2.05, 8.79),
    (30, 227704.0, 221973.0, 243000.0, 2.51, 6.71),
];

pub const RECOVERED_OCT: &[Row] = &[
    (1, 222832.0, 224334.0, 243132.0, 0.67, 9.11),
    (5, 232681.0, 226703.0, 243647.0, 2.56, 4.71),
    (10, 238525.0, 232871.0, 244263.0, 2.37, 2.40),
    (15, 245964.0, 241255.0, 244857.0, 1.91, 0.45),
    (20, 255005.0, 252990.0, 245433.0, 0.79, 3.75),
    (25, 266203.0, 269718.0, 245994.0, 1.32, 7.59),
    (29, 279282.0, 288247.0, 246401.0, 3.21, 11.77),
];

pub const DEATHS_SEP: &[Row] = &[
    (1, 35491.0, 35491.0, 35491.0, 0.0, 0.0),
    (5, 35541.0, 35510.0, 35495.0, 0.08, 0.12),
    (10, 35597.0, 35538.0, 35496.0, 0.16, 0.28),
    (15, 35645.0, 35570.0, 35496.0, 0.21, 0.41),
    (20, 35724.0, 35606.0, 35496.0, 0.33, 0.63),
    (25, 35818.0, 35648.0, 35496.0, 0.47, 0.89),
    (30, 35918.0, 35702.0, 35497.0, 0.60, 1.17),
];

pub const DEATHS_OCT: &[Row] = &[
    (1, 35941.0, 35715.0, 35497.0, 0.0, 0.0),
    (5, 36030.0, 35773.0, 35497.0, 0.71, 1.47),
    (10, 36166.0, 35870.0, 35497.0, 0.81, 1.84),
    (15, 36427.0, 36008.0, 35497.0, 1.15, 2.55),
    (20, 36832.0, 36206.0, 35497.0, 1.69, 3.62),
    (25, 37479.0, 36491.0, 35497.0, 2.63, 5.28),
    (29, 38321.0, 37003.0, 35498.0, 3.43, 7.36),
];

pub const QUARANTINED_SEP: &[Row] = &[
    (1, 26754.0, 26754.0, 26754.0, 0.0, 0.0),
    (5, 31194.0, 29264.0, 1023.0, 6.18, 96.69),
    (10, 35708.0, 31105.0, 337.0, 12.89, 99.05),
    (15, 39712.0, 32183.0, 228.0, 18.95, 99.42),
    (20, 44098.0, 34808.0, 176.0, 21.06, 99.60),
    (25, 47718.0, 39848.0, 149.0, 16.49, 99.68),
    (30, 51263.0, 48428.0, 134.0, 5.53, 99.73),
];

pub const QUARANTINED_OCT: &[Row] = &[
    (1, 52647.0, 50023.0, 130.0, 4.98, 99.75),
    (5, 58903.0, 62193.0, 124.0, 5.58, 99.78),
    (10, 74829.0, 83557.0, 119.0, 11.63, 99.84),
    (15, 99266.0, 116035.0, 116.0, 16.89, 99.88),
    (20, 142739.0, 164668.0, 112.0, 15.36, 99.92),
    (25, 222241.0, 236520.0, 109.0, 6.42, 99.95),
    (29, 299191.0, 317055.0, 107.0, 5.97, 99.96),
];

/// All six tables in their customary order (R, D, Q; September then October).
pub const TABLES: [ReferenceTable; 6] = [
    ReferenceTable {
        number: 1,
        series: Observable::R,
        year: 2020,
        month: 9,
        rows: RECOVERED_SEP,
    },
    ReferenceTable {
        number: 2,
        series: Observable::R,
        year: 2020,
        month: 10,
        rows: RECOVERED_OCT,
    },
    ReferenceTable {
        number: 3,
        series: Observable::D,
        year: 2020,
        month: 9,
        rows: DEATHS_SEP,
    },
    ReferenceTable {
        number: 4,
        series: Observable::D,
        year: 2020,
        month: 10,
        rows: DEATHS_OCT,
    },
    ReferenceTable {
        number: 5,
        series: Observable::Q,
        year: 2020,
        month: 9,
        rows: QUARANTINED_SEP,
    },
    ReferenceTable {
        number: 6,
        series: Observable::Q,
        year: 2020,
        month: 10,
        rows: QUARANTINED_OCT,
    },
];

/// Which column of the tables to collect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Real,
    Uncontrolled,
    Controlled,
}

/// One column of all six tables as `date -> (Q, R, D)`.
pub fn columns(column: Column) -> ModelColumns {
    let mut out = ModelColumns::default();
    for table in &TABLES {
        for row in table.rows {
            let v = match column {
                Column::Real => row.1,
                Column::Uncontrolled => row.2,
                Column::Controlled => row.3,
            };
            let entry = out.0.entry(table.date(row.0)).or_insert([f64::NAN; 3]);
            let k = match table.series {
                Observable::Q => 0,
                Observable::R => 1,
                Observable::D => 2,
            };
            entry[k] = v;
        }
    }
    out
}

/// Every sample date in the tables.
pub fn sample_dates() -> Vec<NaiveDate> {
    columns(Column::Real).0.keys().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_are_complete() {
        for col in [Column::Real, Column::Uncontrolled, Column::Controlled] {
            let c = columns(col);
            assert_eq!(c.0.len(), 14);
            assert!(c.0.values().all(|v| v.iter().all(|x| x.is_finite())));
        }
    }
}
