//! Aggregates a small regional feed extract into a national series.

use chrono::NaiveDate;
use seir_control::data::{aggregate_national, parse_regional_csv, DateWindow};

const FEED: &str = "\
data,stato,codice_regione,denominazione_regione,ricoverati_con_sintomi,terapia_intensiva,totale_positivi,dimessi_guariti,deceduti
2020-09-01T17:00:00,ITA,03,Lombardia,156,16,6598,77883,16847
2020-09-01T17:00:00,ITA,05,Veneto,107,7,2466,20075,2109
2020-09-01T17:00:00,ITA,12,Lazio,222,11,2924,7717,871
2020-09-02T17:00:00,ITA,03,Lombardia,164,18,6685,77925,16851
2020-09-02T17:00:00,ITA,05,Veneto,110,9,2441,20148,2110
2020-09-02T17:00:00,ITA,12,Lazio,228,13,3015,7747,872
";

fn main() -> anyhow::Result<()> {
    let records = parse_regional_csv(FEED.as_bytes())?;
    let window = DateWindow::new(
        NaiveDate::from_ymd_opt(2020, 9, 1).unwrap(),
        NaiveDate::from_ymd_opt(2020, 9, 2).unwrap(),
    )?;
    let series = aggregate_national(&records, window)?;
    series.write_csv(std::io::stdout())?;
    Ok(())
}
