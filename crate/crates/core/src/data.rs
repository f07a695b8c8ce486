//! Ingestion of the Italian Civil Protection regional feed
//! (`dpc-covid19-ita-regioni.csv`) and aggregation into national daily
//! series of quarantined (`totale_positivi`), recovered (`dimessi_guariti`)
//! and dead (`deceduti`) counts.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COL_DATE: &str = "data";
pub const COL_REGION_CODE: &str = "codice_regione";
pub const COL_REGION_NAME: &str = "denominazione_regione";
pub const COL_HOSPITALIZED: &str = "ricoverati_con_sintomi";
pub const COL_POSITIVE: &str = "totale_positivi";
pub const COL_RECOVERED: &str = "dimessi_guariti";
pub const COL_DECEASED: &str = "deceduti";

const MANDATORY: [&str; 6] = [
    COL_DATE,
    COL_REGION_CODE,
    COL_HOSPITALIZED,
    COL_POSITIVE,
    COL_RECOVERED,
    COL_DECEASED,
];

/// The observed compartments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observable {
    Q,
    R,
    D,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::Q, Observable::R, Observable::D];

    /// Index into the seven-component state.
    pub fn state_index(self) -> usize {
        match self {
            Observable::Q => 3,
            Observable::R => 4,
            Observable::D => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::Q => "Q",
            Observable::R => "R",
            Observable::D => "D",
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Q" | "q" => Ok(Observable::Q),
            "R" | "r" => Ok(Observable::R),
            "D" | "d" => Ok(Observable::D),
            other => Err(Error::InvalidArgument(format!("unknown series '{other}'"))),
        }
    }
}

/// One region on one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionalRecord {
    pub date: NaiveDate,
    pub region_code: String,
    pub region_name: Option<String>,
    pub hospitalized_with_symptoms: u64,
    pub total_positives: u64,
    pub recovered: u64,
    pub deceased: u64,
}

/// Calendar date portion of an ISO-8601 timestamp such as
/// `2020-09-01T17:00:00`.
pub fn parse_feed_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let day = raw.get(..10)?;
    let rest = &raw[10..];
    if !(rest.is_empty() || rest.starts_with('T') || rest.starts_with(' ')) {
        return None;
    }
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

fn parse_count(raw: &str) -> Option<u64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<u64>() {
        return Some(v);
    }
    let v = raw.parse::<f64>().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64).then_some(v as u64)
}

/// Parses the regional feed. Unknown columns are ignored; every row with an
/// unparseable mandatory field is collected into one
/// [`Error::MalformedRows`] (row numbers count the header as row 1).
pub fn parse_regional_csv<R: Read>(reader: R) -> Result<Vec<RegionalRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyInput);
    }
    let column = |name: &str| -> Option<usize> {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
    };
    let missing: Vec<&str> = MANDATORY
        .iter()
        .copied()
        .filter(|c| column(c).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MalformedHeader(format!(
            "missing column(s) {}",
            missing.join(", ")
        )));
    }
    let idx = |name: &str| column(name).expect("checked above");
    let (i_date, i_code, i_hosp, i_pos, i_rec, i_dec) = (
        idx(COL_DATE),
        idx(COL_REGION_CODE),
        idx(COL_HOSPITALIZED),
        idx(COL_POSITIVE),
        idx(COL_RECOVERED),
        idx(COL_DECEASED),
    );
    let i_name = column(COL_REGION_NAME);

    let mut records = Vec::new();
    let mut bad = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                bad.push((row, e.to_string()));
                continue;
            }
        };
        let field = |i: usize| rec.get(i).unwrap_or("");
        let mut problems = Vec::new();
        let date = parse_feed_date(field(i_date));
        if date.is_none() {
            problems.push(format!("bad date '{}'", field(i_date)));
        }
        let code = field(i_code).trim().to_string();
        if code.is_empty() {
            problems.push("empty region code".to_string());
        }
        let mut count = |i: usize, name: &str| -> u64 {
            parse_count(field(i)).unwrap_or_else(|| {
                problems.push(format!("bad {name} '{}'", field(i)));
                0
            })
        };
        let hospitalized = count(i_hosp, COL_HOSPITALIZED);
        let positives = count(i_pos, COL_POSITIVE);
        let recovered = count(i_rec, COL_RECOVERED);
        let deceased = count(i_dec, COL_DECEASED);
        if !problems.is_empty() {
            bad.push((row, problems.join(", ")));
            continue;
        }
        records.push(RegionalRecord {
            date: date.expect("checked"),
            region_code: code,
            region_name: i_name
                .map(|i| field(i).trim().to_string())
                .filter(|s| !s.is_empty()),
            hospitalized_with_symptoms: hospitalized,
            total_positives: positives,
            recovered,
            deceased,
        });
    }
    if !bad.is_empty() {
        return Err(Error::MalformedRows {
            count: bad.len(),
            rows: bad,
        });
    }
    Ok(records)
}

/// Writes records back in the feed's column names (mandatory columns plus
/// the region name).
pub fn write_regional_csv<W: Write>(records: &[RegionalRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        COL_DATE,
        COL_REGION_CODE,
        COL_REGION_NAME,
        COL_HOSPITALIZED,
        COL_POSITIVE,
        COL_RECOVERED,
        COL_DECEASED,
    ])?;
    for r in records {
        w.write_record([
            format!("{}T17:00:00", r.date.format("%Y-%m-%d")),
            r.region_code.clone(),
            r.region_name.clone().unwrap_or_default(),
            r.hospitalized_with_symptoms.to_string(),
            r.total_positives.to_string(),
            r.recovered.to_string(),
            r.deceased.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Inclusive calendar window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidArgument(format!(
                "empty window {start} .. {end}"
            )));
        }
        Ok(DateWindow { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        let n = (self.end - self.start).num_days();
        (0..=n).map(move |k| start + Duration::days(k))
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Gap-free national daily series of `Q`, `R`, `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    dates: Vec<NaiveDate>,
    q: Vec<f64>,
    r: Vec<f64>,
    d: Vec<f64>,
}

impl ObservedSeries {
    pub fn new(dates: Vec<NaiveDate>, q: Vec<f64>, r: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::EmptyInput);
        }
        if q.len() != dates.len() || r.len() != dates.len() || d.len() != dates.len() {
            return Err(Error::InvalidArgument("series lengths differ".into()));
        }
        let mut gaps = Vec::new();
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidArgument(format!(
                    "dates not strictly increasing at {}",
                    w[1]
                )));
            }
            let mut day = w[0] + Duration::days(1);
            while day < w[1] {
                gaps.push(day.to_string());
                day += Duration::days(1);
            }
        }
        if !gaps.is_empty() {
            return Err(Error::MissingDays(gaps));
        }
        if q.iter()
            .chain(&r)
            .chain(&d)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::InvalidArgument(
                "counts must be finite and >= 0".into(),
            ));
        }
        Ok(ObservedSeries { dates, q, r, d })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        self.dates[self.dates.len() - 1]
    }

    pub fn series(&self, which: Observable) -> &[f64] {
        match which {
            Observable::Q => &self.q,
            Observable::R => &self.r,
            Observable::D => &self.d,
        }
    }

    pub fn value(&self, which: Observable, date: NaiveDate) -> Option<f64> {
        let k = (date - self.first_date()).num_days();
        if k < 0 || k as usize >= self.len() {
            return None;
        }
        Some(self.series(which)[k as usize])
    }

    /// Restricts to a sub-window, which must lie inside the series.
    pub fn window(&self, window: DateWindow) -> Result<ObservedSeries> {
        if window.start < self.first_date() || window.end > self.last_date() {
            return Err(Error::InvalidArgument(format!(
                "window {} .. {} outside series {} .. {}",
                window.start,
                window.end,
                self.first_date(),
                self.last_date()
            )));
        }
        let a = (window.start - self.first_date()).num_days() as usize;
        let b = a + window.len();
        ObservedSeries::new(
            self.dates[a..b].to_vec(),
            self.q[a..b].to_vec(),
            self.r[a..b].to_vec(),
            self.d[a..b].to_vec(),
        )
    }

    /// Columns `date,Q,R,D`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "Q", "R", "D"])?;
        for k in 0..self.len() {
            w.write_record([
                self.dates[k].to_string(),
                self.q[k].to_string(),
                self.r[k].to_string(),
                self.d[k].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<ObservedSeries> {
        let table = read_dated_columns(reader)?;
        let (dates, rows): (Vec<_>, Vec<_>) = table.into_iter().unzip();
        let q = rows.iter().map(|r: &[f64; 3]| r[0]).collect();
        let r = rows.iter().map(|r| r[1]).collect();
        let d = rows.iter().map(|r| r[2]).collect();
        ObservedSeries::new(dates, q, r, d)
    }
}

/// Reads a `date,Q,R,D` file without requiring consecutive dates.
pub fn read_dated_columns<R: Read>(reader: R) -> Result<BTreeMap<NaiveDate, [f64; 3]>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers != ["date", "Q", "R", "D"] {
        return Err(Error::MalformedHeader(format!(
            "expected date,Q,R,D, got {}",
            headers.join(",")
        )));
    }
    let mut out = BTreeMap::new();
    let mut bad = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec?;
        let date = rec.get(0).and_then(parse_feed_date);
        let nums: Option<Vec<f64>> = (1..4)
            .map(|i| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok()))
            .collect();
        match (date, nums) {
            (Some(date), Some(v)) => {
                if out.insert(date, [v[0], v[1], v[2]]).is_some() {
                    bad.push((row, format!("duplicate date {date}")));
                }
            }
            _ => bad.push((row, "unparseable row".to_string())),
        }
    }
    if !bad.is_empty() {
        return Err(Error::MalformedRows {
            count: bad.len(),
            rows: bad,
        });
    }
    Ok(out)
}

/// Sums records over regions for each day of `window`. Fails on duplicate
/// `(day, region)` pairs and on days without any record.
pub fn aggregate_national(
    records: &[RegionalRecord],
    window: DateWindow,
) -> Result<ObservedSeries> {
    let mut seen = HashSet::new();
    let mut totals: BTreeMap<NaiveDate, [u64; 3]> = BTreeMap::new();
    for r in records.iter().filter(|r| window.contains(r.date)) {
        let key = (r.date, r.region_code.as_str(), r.region_name.as_deref());
        if !seen.insert(key) {
            return Err(Error::DuplicateRecord {
                date: r.date.to_string(),
                region: match &r.region_name {
                    Some(name) => format!("{} ({name})", r.region_code),
                    None => r.region_code.clone(),
                },
            });
        }
        let t = totals.entry(r.date).or_default();
        t[0] += r.total_positives;
        t[1] += r.recovered;
        t[2] += r.deceased;
    }
    let missing: Vec<String> = window
        .days()
        .filter(|d| !totals.contains_key(d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingDays(missing));
    }
    let dates: Vec<NaiveDate> = totals.keys().copied().collect();
    let col = |k: usize| totals.values().map(|t| t[k] as f64).collect::<Vec<_>>();
    ObservedSeries::new(dates, col(0), col(1), col(2))
}
