use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::error::{Error, Result};

/// Slots per day for the time-of-day one-hot: 24 for hourly data.
fn slots_per_day(interval_secs: i64) -> usize {
    if interval_secs <= 0 || interval_secs >= 86_400 {
        1
    } else {
        (86_400 / interval_secs) as usize
    }
}

pub fn meta_width(interval_secs: i64) -> usize {
    slots_per_day(interval_secs) + 7 + 1
}

/// One-hot time-of-day slot, one-hot day-of-week (Monday = 0), weekend flag.
pub fn encode_meta(ts: NaiveDateTime, interval_secs: i64) -> Vec<f64> {
    let slots = slots_per_day(interval_secs);
    let mut v = vec![0.0; slots + 8];
    let secs = ts.num_seconds_from_midnight() as usize;
    let slot = if slots == 1 { 0 } else { (secs / interval_secs as usize).min(slots - 1) };
    v[slot] = 1.0;
    let dow = ts.weekday().num_days_from_monday() as usize;
    v[slots + dow] = 1.0;
    if dow >= 5 {
        v[slots + 7] = 1.0;
    }
    v
}

/// One row of the externals file; `None` marks a blank field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExternalRecord {
    pub weather: Option<usize>,
    pub holiday: Option<bool>,
    pub temperature: Option<f64>,
    pub wind: Option<f64>,
}

/// Encodes external factors as one-hot weather ++ holiday bit ++ scaled
/// temperature ++ scaled wind speed. The temperature and wind blocks exist only
/// when the fitting records observed them; blank fields encode as zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEncoder {
    pub vocab: usize,
    pub temperature: Option<(f64, f64)>,
    pub wind: Option<(f64, f64)>,
}

fn observed_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn unit_scale(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi == lo {
        0.0
    } else {
        (x - lo) / (hi - lo)
    }
}

impl ExternalEncoder {
    pub fn fit(records: &[ExternalRecord], vocab: usize) -> Self {
        ExternalEncoder {
            vocab,
            temperature: observed_range(records.iter().filter_map(|r| r.temperature)),
            wind: observed_range(records.iter().filter_map(|r| r.wind)),
        }
    }

    pub fn width(&self) -> usize {
        self.vocab + 1 + usize::from(self.temperature.is_some()) + usize::from(self.wind.is_some())
    }

    pub fn encode(&self, r: &ExternalRecord) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.width()];
        if let Some(code) = r.weather {
            if code >= self.vocab {
                return Err(Error::UnknownWeather { code, vocab: self.vocab });
            }
            v[code] = 1.0;
        }
        let mut k = self.vocab;
        v[k] = f64::from(u8::from(r.holiday.unwrap_or(false)));
        k += 1;
        if let Some(range) = self.temperature {
            v[k] = r.temperature.map_or(0.0, |x| unit_scale(x, range));
            k += 1;
        }
        if let Some(range) = self.wind {
            v[k] = r.wind.map_or(0.0, |x| unit_scale(x, range));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
    }

    #[test]
    fn tuesday_afternoon() {
        let v = encode_meta(at(2024, 3, 5, 13), 3600);
        assert_eq!(v.len(), 32);
        let hot: Vec<usize> = (0..32).filter(|&k| v[k] != 0.0).collect();
        assert_eq!(hot, vec![13, 25]);
    }

    #[test]
    fn sunday_midnight() {
        let v = encode_meta(at(2024, 3, 10, 0), 3600);
        let hot: Vec<usize> = (0..32).filter(|&k| v[k] != 0.0).collect();
        assert_eq!(hot, vec![0, 30, 31]);
    }

    #[test]
    fn external_full_record() {
        let fit = [
            ExternalRecord { temperature: Some(-5.0), wind: Some(1.0), ..Default::default() },
            ExternalRecord { temperature: Some(30.0), wind: Some(9.0), ..Default::default() },
        ];
        let enc = ExternalEncoder::fit(&fit, 16);
        let v = enc
            .encode(&ExternalRecord { weather: Some(3), holiday: Some(true), temperature: Some(30.0), wind: Some(1.0) })
            .unwrap();
        assert_eq!(v.len(), 19);
        assert_eq!(v[3], 1.0);
        assert_eq!(v.iter().take(16).sum::<f64>(), 1.0);
        assert_eq!(&v[16..], &[1.0, 1.0, 0.0]);
        assert!(matches!(
            enc.encode(&ExternalRecord { weather: Some(16), ..Default::default() }),
            Err(Error::UnknownWeather { code: 16, vocab: 16 })
        ));
        assert_eq!(enc.encode(&ExternalRecord::default()).unwrap(), vec![0.0; 19]);
    }

    #[test]
    fn holiday_only_dataset() {
        let enc = ExternalEncoder::fit(&[ExternalRecord { holiday: Some(true), ..Default::default() }], 0);
        assert_eq!(enc.width(), 1);
        assert_eq!(enc.encode(&ExternalRecord { holiday: Some(true), ..Default::default() }).unwrap(), vec![1.0]);
    }
}
