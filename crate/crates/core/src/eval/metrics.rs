use crate::dataprep::FlowSeries;
use crate::error::{Error, Result};
use crate::numkit::Tensor;

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape("metric", format!("{} predictions for {} truths", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("metric over empty input".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let sq: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let abs: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(abs / pred.len() as f64)
}

/// Historical average: the mean of every earlier frame sharing `t`'s phase
/// modulo `period`.
pub fn ha_predict(series: &FlowSeries, t: usize, period: usize) -> Result<Tensor> {
    if t >= series.len {
        return Err(Error::OutOfRange { t, len: series.len });
    }
    if period == 0 || t < period {
        return Err(Error::NoHistory(t));
    }
    let w = series.n * series.c;
    let mut acc = vec![0.0; w];
    let mut count = 0usize;
    let mut s = t % period;
    while s < t {
        for (a, v) in acc.iter_mut().zip(series.frame(s)) {
            *a += v;
        }
        count += 1;
        s += period;
    }
    let k = count as f64;
    Tensor::new(vec![series.n, series.c], acc.into_iter().map(|a| a / k).collect())
}

/// Per-timestep score `mean |X_t − X_{t−1}|` for `t ≥ 1`; the top
/// `⌈fraction·(T−1)⌉` scores (ties to the earlier `t`) are sudden. Returns
/// `(sudden, normal)`, each ascending.
pub fn sudden_change_split(series: &FlowSeries, fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if series.len < 2 {
        return Err(Error::SpanTooShort { have: series.len, need: 1 });
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    let w = (series.n * series.c) as f64;
    let mut scored: Vec<(usize, f64)> = (1..series.len)
        .map(|t| {
            let d: f64 = series.frame(t).iter().zip(series.frame(t - 1)).map(|(a, b)| (a - b).abs()).sum();
            (t, d / w)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let k = (fraction * (series.len - 1) as f64).ceil() as usize;
    let mut sudden: Vec<usize> = scored[..k].iter().map(|s| s.0).collect();
    let mut normal: Vec<usize> = scored[k..].iter().map(|s| s.0).collect();
    sudden.sort_unstable();
    normal.sort_unstable();
    Ok((sudden, normal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn series(values: &[f64]) -> FlowSeries {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        FlowSeries {
            n: 1,
            c: 1,
            len: values.len(),
            values: values.to_vec(),
            start,
            interval_secs: 3600,
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mae(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[5.0], &[2.0]).unwrap(), 3.0);
        assert_eq!(mae(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn ha_mean_of_matching_phase() {
        // period 3: phase of t=7 is 1 → s = 1, 4 with values 2, 4
        let s = series(&[0.0, 2.0, 9.0, 9.0, 4.0, 9.0, 9.0, 9.0]);
        assert_eq!(ha_predict(&s, 7, 3).unwrap().data(), &[3.0]);
        assert!(matches!(ha_predict(&s, 2, 3), Err(Error::NoHistory(2))));
    }

    #[test]
    fn sudden_split_sizes() {
        let mut v = vec![1.0; 101];
        v[40] = 50.0;
        let (sudden, normal) = sudden_change_split(&series(&v), 0.05).unwrap();
        assert_eq!(sudden.len(), 5);
        assert_eq!(normal.len(), 95);
        assert!(sudden.contains(&40) && sudden.contains(&41));
        let (sudden, _) = sudden_change_split(&series(&[2.0; 101]), 0.05).unwrap();
        assert_eq!(sudden, vec![1, 2, 3, 4, 5]);
    }
}
