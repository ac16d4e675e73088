//! Model-ready data: flow aggregation, min-max scaling, multi-view sampling,
//! global-view encoders, and chronological splits.

mod dataset;
mod features;
pub mod io;
mod scaler;
mod views;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::numkit::Tensor;
use crate::stg::{slice_of, RegionLookup, Trip};

pub use dataset::{make_dataset, split_bounds, Dataset, Prepared, TrainingInstance};
pub use features::{encode_meta, meta_width, ExternalEncoder, ExternalRecord};
pub use scaler::{ScaleRange, Scaler};
pub use views::{required_history, sample_views, view_indices, View, ViewConfig, VIEWS};

/// Channels per region: inflow and outflow.
pub const CHANNELS: usize = 2;
pub const INFLOW: usize = 0;
pub const OUTFLOW: usize = 1;

/// Flow values `X_t[i, c]` laid out time-major as `(T, N, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    pub n: usize,
    pub c: usize,
    pub len: usize,
    pub values: Vec<f64>,
    pub start: NaiveDateTime,
    pub interval_secs: i64,
}

impl FlowSeries {
    pub fn zeros(len: usize, n: usize, c: usize, start: NaiveDateTime, interval_secs: i64) -> Self {
        FlowSeries {
            n,
            c,
            len,
            values: vec![0.0; len * n * c],
            start,
            interval_secs,
        }
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize, c: usize) -> f64 {
        self.values[(t * self.n + i) * self.c + c]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, c: usize, v: f64) {
        self.values[(t * self.n + i) * self.c + c] = v;
    }

    /// `X_t` as an `N × C` slice of the backing buffer.
    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.n * self.c;
        &self.values[t * w..(t + 1) * w]
    }

    pub fn frame_tensor(&self, t: usize) -> Tensor {
        Tensor::new(vec![self.n, self.c], self.frame(t).to_vec()).expect("frame dims")
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + chrono::Duration::seconds(self.interval_secs * t as i64)
    }

    /// Timesteps per week at this interval.
    pub fn steps_per_week(&self) -> usize {
        (7 * 86_400 / self.interval_secs) as usize
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.len, self.n, self.c], self.values.clone()).expect("series dims")
    }

    pub fn from_tensor(t: &Tensor, start: NaiveDateTime, interval_secs: i64) -> Result<Self> {
        let &[len, n, c] = t.dims() else {
            return Err(Error::shape("FlowSeries::from_tensor", format!("expected (T, N, C), got {:?}", t.dims())));
        };
        if interval_secs <= 0 {
            return Err(Error::InvalidArgument(format!("interval must be positive, got {interval_secs}s")));
        }
        Ok(FlowSeries {
            n,
            c,
            len,
            values: t.data().to_vec(),
            start,
            interval_secs,
        })
    }
}

/// Trip tallies from [`aggregate_flows`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AggregateStats {
    pub counted: usize,
    pub intra: usize,
    pub rejected: usize,
}

/// Builds inflow/outflow: a trip `a → b` with `a ≠ b` adds one outflow to `a`
/// in its start slice and one inflow to `b` in its end slice. Trips whose
/// endpoints resolve to no region, or whose start or end falls outside the
/// span, are rejected.
pub fn aggregate_flows(
    trips: &[Trip],
    lookup: &RegionLookup,
    start: NaiveDateTime,
    interval_secs: i64,
    len: usize,
) -> Result<(FlowSeries, AggregateStats)> {
    if interval_secs <= 0 {
        return Err(Error::InvalidArgument(format!("interval must be positive, got {interval_secs}s")));
    }
    let mut series = FlowSeries::zeros(len, lookup.len(), CHANNELS, start, interval_secs);
    let mut stats = AggregateStats::default();
    for trip in trips {
        let resolved = (
            lookup.resolve(trip.origin),
            lookup.resolve(trip.dest),
            slice_of(trip.start, start, interval_secs, len),
            slice_of(trip.end, start, interval_secs, len),
        );
        let (Some(a), Some(b), Some(t1), Some(t2)) = resolved else {
            stats.rejected += 1;
            continue;
        };
        if a == b {
            stats.intra += 1;
            continue;
        }
        stats.counted += 1;
        let out = series.get(t1, a, OUTFLOW) + 1.0;
        series.set(t1, a, OUTFLOW, out);
        let inn = series.get(t2, b, INFLOW) + 1.0;
        series.set(t2, b, INFLOW, inn);
    }
    if stats.rejected > 0 {
        log::warn!("aggregate_flows: rejected {} of {} trips", stats.rejected, trips.len());
    }
    Ok((series, stats))
}
