//! Flow series (DTN1 plus sidecar header) and externals CSV.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

use super::features::ExternalRecord;
use super::FlowSeries;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, format_timestamp, parse_timestamp, write_atomic};
use crate::numkit::dtn::{load_dtn, save_dtn};

/// `flows.dtn` → `flows.header.csv`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("header.csv")
}

pub fn write_flow_series(path: &Path, s: &FlowSeries) -> Result<()> {
    save_dtn(path, &s.to_tensor())?;
    let header = format!(
        "start_ts,interval_secs,n,c\n{},{},{},{}\n",
        format_timestamp(s.start),
        s.interval_secs,
        s.n,
        s.c
    );
    write_atomic(&sidecar_path(path), header.as_bytes())
}

pub fn read_flow_series(path: &Path) -> Result<FlowSeries> {
    let side = sidecar_path(path);
    let bad = |msg: String| Error::Parse { path: side.clone(), msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&side)?;
    let row: (String, i64, usize, usize) = rdr
        .deserialize()
        .next()
        .ok_or_else(|| bad("sidecar header has no data row".into()))??;
    let start = parse_timestamp(&row.0).ok_or_else(|| bad(format!("bad start_ts `{}`", row.0)))?;
    let series = FlowSeries::from_tensor(&load_dtn(path)?, start, row.1)?;
    if series.n != row.2 || series.c != row.3 {
        return Err(bad(format!(
            "header says N={}, C={} but tensor holds N={}, C={}",
            row.2, row.3, series.n, series.c
        )));
    }
    Ok(series)
}

fn opt<T: std::str::FromStr>(s: &str, path: &Path, line: u64, what: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        msg: format!("line {line}: bad {what} `{s}`"),
    })
}

/// Reads `ts, weather_code, holiday, temperature, wind_speed`; blank fields are
/// missing values. Holiday accepts `0/1/true/false`.
pub fn read_externals(path: &Path) -> Result<Vec<(NaiveDateTime, ExternalRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| rec.get(i).unwrap_or("");
        let ts = parse_timestamp(f(0)).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            msg: format!("line {line}: bad timestamp `{}`", f(0)),
        })?;
        let holiday = match f(2) {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    msg: format!("line {line}: bad holiday `{other}`"),
                })
            }
        };
        out.push((
            ts,
            ExternalRecord {
                weather: opt(f(1), path, line, "weather_code")?,
                holiday,
                temperature: opt(f(3), path, line, "temperature")?,
                wind: opt(f(4), path, line, "wind_speed")?,
            },
        ));
    }
    Ok(out)
}

pub fn write_externals(path: &Path, rows: &[(NaiveDateTime, ExternalRecord)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ts", "weather_code", "holiday", "temperature", "wind_speed"])?;
    for (ts, r) in rows {
        w.write_record([
            format_timestamp(*ts),
            r.weather.map_or(String::new(), |v| v.to_string()),
            r.holiday.map_or(String::new(), |v| u8::from(v).to_string()),
            r.temperature.map_or(String::new(), fmt_f64),
            r.wind.map_or(String::new(), fmt_f64),
        ])?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

/// One record per series timestep, matched on exact timestamp; timesteps
/// without a row get an all-missing record.
pub fn align_externals(rows: &[(NaiveDateTime, ExternalRecord)], series: &FlowSeries) -> Vec<ExternalRecord> {
    let by_ts: HashMap<NaiveDateTime, ExternalRecord> = rows.iter().copied().collect();
    (0..series.len)
        .map(|t| by_ts.get(&series.timestamp(t)).copied().unwrap_or_default())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn series_roundtrip() {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut s = FlowSeries::zeros(5, 3, 2, start, 1800);
        s.set(4, 2, 1, 7.25);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("flows.dtn");
        write_flow_series(&p, &s).unwrap();
        assert!(dir.path().join("flows.header.csv").exists());
        assert_eq!(read_flow_series(&p).unwrap(), s);
    }

    #[test]
    fn externals_roundtrip_with_blanks() {
        let ts = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(5, 0, 0).unwrap();
        let rows = vec![
            (ts, ExternalRecord { weather: Some(2), holiday: Some(true), temperature: Some(-1.5), wind: None }),
            (ts + chrono::Duration::hours(1), ExternalRecord::default()),
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ext.csv");
        write_externals(&p, &rows).unwrap();
        assert_eq!(read_externals(&p).unwrap(), rows);
    }
}
