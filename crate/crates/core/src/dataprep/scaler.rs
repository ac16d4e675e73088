use super::FlowSeries;
use crate::error::{Error, Result};

/// Target interval of the min-max map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleRange {
    /// `[−1, 1]`, paired with a tanh output.
    Symmetric,
    /// `[0, 1]`, paired with a sigmoid output.
    Unit,
}

impl ScaleRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ScaleRange::Symmetric => (-1.0, 1.0),
            ScaleRange::Unit => (0.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScaleRange::Symmetric => "-1,1",
            ScaleRange::Unit => "0,1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.replace(' ', "").as_str() {
            "-1,1" | "[-1,1]" | "symmetric" => Some(ScaleRange::Symmetric),
            "0,1" | "[0,1]" | "unit" => Some(ScaleRange::Unit),
            _ => None,
        }
    }
}

/// Per-channel affine min-max scaler. A channel with `max == min` maps to the
/// constant 0 and inverts back to `min`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub range: ScaleRange,
}

impl Scaler {
    /// Fits on timesteps `0..end` only.
    pub fn fit(series: &FlowSeries, end: usize, range: ScaleRange) -> Result<Self> {
        if end == 0 || end > series.len {
            return Err(Error::InvalidArgument(format!("scaler fit span 0..{end} invalid for length {}", series.len)));
        }
        let mut min = vec![f64::INFINITY; series.c];
        let mut max = vec![f64::NEG_INFINITY; series.c];
        for t in 0..end {
            for i in 0..series.n {
                for c in 0..series.c {
                    let v = series.get(t, i, c);
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        Ok(Scaler { min, max, range })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    #[inline]
    pub fn transform(&self, x: f64, c: usize) -> f64 {
        let (lo, hi) = self.range.bounds();
        let w = self.max[c] - self.min[c];
        if w == 0.0 {
            return 0.0;
        }
        lo + (x - self.min[c]) / w * (hi - lo)
    }

    #[inline]
    pub fn inverse(&self, y: f64, c: usize) -> f64 {
        let (lo, hi) = self.range.bounds();
        let w = self.max[c] - self.min[c];
        if w == 0.0 {
            return self.min[c];
        }
        self.min[c] + (y - lo) / (hi - lo) * w
    }

    pub fn transform_series(&self, series: &FlowSeries) -> FlowSeries {
        let mut out = series.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            *v = self.transform(*v, k % series.c);
        }
        out
    }

    /// Inverts a row-major buffer whose last axis is the channel.
    pub fn inverse_frame(&self, data: &[f64]) -> Vec<f64> {
        let c = self.channels();
        data.iter().enumerate().map(|(k, &y)| self.inverse(y, k % c)).collect()
    }
}
