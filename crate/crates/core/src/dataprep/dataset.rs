use super::features::{encode_meta, ExternalEncoder, ExternalRecord};
use super::scaler::{ScaleRange, Scaler};
use super::views::{required_history, sample_views, ViewConfig};
use super::FlowSeries;
use crate::error::{Error, Result};
use crate::numkit::Tensor;

/// One supervised example for target timestep `t` (scaled units).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub t: usize,
    /// `N × (C·l_v)` per view; zero-length views are `N × 0`.
    pub views: [Tensor; 5],
    pub ext: Vec<f64>,
    pub meta: Vec<f64>,
    /// `X_t`, `N × C`.
    pub target: Tensor,
}

/// Chronological split.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<TrainingInstance>,
    pub val: Vec<TrainingInstance>,
    pub test: Vec<TrainingInstance>,
}

/// Start of the validation and test spans: the last four weeks are test, the
/// four before them validation.
pub fn split_bounds(len: usize, steps_per_week: usize) -> Result<(usize, usize)> {
    let four = 4 * steps_per_week;
    if len <= 2 * four {
        return Err(Error::SpanTooShort { have: len, need: 2 * four });
    }
    Ok((len - 2 * four, len - four))
}

/// One instance per target `t` in `required_history..len`.
pub fn make_dataset(
    scaled: &FlowSeries,
    ext: &[Vec<f64>],
    meta: &[Vec<f64>],
    cfg: &ViewConfig,
    horizon: usize,
) -> Result<Vec<TrainingInstance>> {
    if ext.len() != scaled.len || meta.len() != scaled.len {
        return Err(Error::shape(
            "make_dataset",
            format!("series length {} with {} external and {} meta rows", scaled.len, ext.len(), meta.len()),
        ));
    }
    let first = required_history(cfg, horizon);
    (first..scaled.len)
        .map(|t| {
            Ok(TrainingInstance {
                t,
                views: sample_views(scaled, t, cfg, horizon)?,
                ext: ext[t].clone(),
                meta: meta[t].clone(),
                target: scaled.frame_tensor(t),
            })
        })
        .collect()
}

/// Everything needed to train on, and to map predictions back from, a series.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scaler: Scaler,
    pub encoder: ExternalEncoder,
    pub views: ViewConfig,
    pub horizon: usize,
    pub scaled: FlowSeries,
    pub data: Dataset,
    pub val_start: usize,
    pub test_start: usize,
}

impl Prepared {
    /// Scales the series and externals with statistics from the training span
    /// only, then cuts instances and splits them by target time. `externals`
    /// is either empty or aligned one-to-one with the series.
    pub fn new(
        series: &FlowSeries,
        externals: &[ExternalRecord],
        weather_vocab: usize,
        views: ViewConfig,
        range: ScaleRange,
        horizon: usize,
    ) -> Result<Self> {
        views.validate()?;
        let blank;
        let externals = if externals.is_empty() {
            blank = vec![ExternalRecord::default(); series.len];
            &blank[..]
        } else {
            externals
        };
        if externals.len() != series.len {
            return Err(Error::shape(
                "Prepared::new",
                format!("{} external rows for a series of length {}", externals.len(), series.len),
            ));
        }
        let (val_start, test_start) = split_bounds(series.len, series.steps_per_week())?;
        let hist = required_history(&views, horizon);
        if hist >= val_start {
            return Err(Error::SpanTooShort {
                have: series.len,
                need: hist + series.len - val_start,
            });
        }
        let scaler = Scaler::fit(series, val_start, range)?;
        let encoder = ExternalEncoder::fit(&externals[..val_start], weather_vocab);
        let ext = externals.iter().map(|r| encoder.encode(r)).collect::<Result<Vec<_>>>()?;
        let meta: Vec<_> = (0..series.len)
            .map(|t| encode_meta(series.timestamp(t), series.interval_secs))
            .collect();
        let scaled = scaler.transform_series(series);
        let mut data = Dataset::default();
        for inst in make_dataset(&scaled, &ext, &meta, &views, horizon)? {
            if inst.t >= test_start {
                data.test.push(inst);
            } else if inst.t >= val_start {
                data.val.push(inst);
            } else {
                data.train.push(inst);
            }
        }
        Ok(Prepared {
            scaler,
            encoder,
            views,
            horizon,
            scaled,
            data,
            val_start,
            test_start,
        })
    }

    pub fn ext_width(&self) -> usize {
        self.encoder.width()
    }

    pub fn meta_width(&self) -> usize {
        super::meta_width(self.scaled.interval_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::View;
    use chrono::NaiveDate;

    fn series(len: usize) -> FlowSeries {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut s = FlowSeries::zeros(len, 3, 2, start, 3600);
        for (k, v) in s.values.iter_mut().enumerate() {
            *v = (k % 17) as f64;
        }
        s
    }

    #[test]
    fn twelve_weeks_split_sizes() {
        let views = ViewConfig::default().with_length(View::Monthly, 0).with_length(View::Quarterly, 0);
        let p = Prepared::new(&series(2016), &[], 0, views, ScaleRange::Symmetric, 1).unwrap();
        assert_eq!(p.data.test.len(), 672);
        assert_eq!(p.data.val.len(), 672);
        assert_eq!(p.data.train.len(), 672 - 504);
        let max_train = p.data.train.iter().map(|i| i.t).max().unwrap();
        let min_val = p.data.val.iter().map(|i| i.t).min().unwrap();
        let max_val = p.data.val.iter().map(|i| i.t).max().unwrap();
        let min_test = p.data.test.iter().map(|i| i.t).min().unwrap();
        assert!(max_train < min_val && max_val < min_test);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(matches!(
            Prepared::new(&series(1300), &[], 0, ViewConfig::default(), ScaleRange::Symmetric, 1),
            Err(Error::SpanTooShort { .. })
        ));
    }
}
