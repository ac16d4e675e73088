use super::FlowSeries;
use crate::error::{Error, Result};
use crate::numkit::Tensor;

/// The five temporal views, nearest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum View {
    Recent,
    Daily,
    Weekly,
    Monthly,
    Quarterly,
}

pub const VIEWS: [View; 5] = [View::Recent, View::Daily, View::Weekly, View::Monthly, View::Quarterly];

impl View {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            View::Recent => "recent",
            View::Daily => "daily",
            View::Weekly => "weekly",
            View::Monthly => "monthly",
            View::Quarterly => "quarterly",
        }
    }

    pub fn parse(s: &str) -> Option<View> {
        VIEWS.into_iter().find(|v| v.name() == s)
    }
}

/// View lengths `l_r, l_d, l_w, l_m, l_q` and period spans `p_d < p_w < p_m < p_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewConfig {
    pub lengths: [usize; 5],
    pub periods: [usize; 4],
}

pub const MAX_VIEW_LENGTH: usize = 6;

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig {
            lengths: [3; 5],
            periods: [24, 168, 720, 2160],
        }
    }
}

impl ViewConfig {
    pub fn new(lengths: [usize; 5], periods: [usize; 4]) -> Result<Self> {
        let cfg = ViewConfig { lengths, periods };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lengths.iter().find(|&&l| l > MAX_VIEW_LENGTH) {
            return Err(Error::InvalidArgument(format!("view length {l} exceeds {MAX_VIEW_LENGTH}")));
        }
        let p = self.periods;
        if p[0] == 0 || !(p[0] < p[1] && p[1] < p[2] && p[2] < p[3]) {
            return Err(Error::InvalidArgument(format!("view periods must be strictly increasing and positive, got {p:?}")));
        }
        if self.lengths.iter().all(|&l| l == 0) {
            return Err(Error::InvalidArgument("every temporal view has length 0".into()));
        }
        Ok(())
    }

    pub fn length(&self, v: View) -> usize {
        self.lengths[v.index()]
    }

    /// Offset between consecutive picks of a view: 1 for the recent view.
    pub fn span(&self, v: View) -> usize {
        match v {
            View::Recent => 1,
            _ => self.periods[v.index() - 1],
        }
    }

    pub fn active_views(&self) -> Vec<View> {
        VIEWS.into_iter().filter(|&v| self.length(v) > 0).collect()
    }

    pub fn with_length(mut self, v: View, len: usize) -> Self {
        self.lengths[v.index()] = len;
        self
    }

    /// Offset of the deepest timestep a view reaches back to.
    fn depth(&self, v: View, horizon: usize) -> usize {
        let l = self.length(v);
        match (v, l) {
            (_, 0) => 0,
            (View::Recent, l) => l + horizon - 1,
            (v, l) => l * self.span(v),
        }
    }
}

/// Smallest target index for which every active view has history.
pub fn required_history(cfg: &ViewConfig, horizon: usize) -> usize {
    VIEWS.iter().map(|&v| cfg.depth(v, horizon)).max().unwrap_or(0)
}

/// Source timesteps of each view for target `t`. For horizon `k` the recent
/// view ends at `t − k`; periodic views keep their phase alignment with `t`.
pub fn view_indices(t: usize, cfg: &ViewConfig, horizon: usize) -> Result<[Vec<usize>; 5]> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    for v in VIEWS[1..].iter().copied() {
        if cfg.length(v) > 0 && cfg.span(v) < horizon {
            return Err(Error::InvalidArgument(format!(
                "{} span {} is shorter than horizon {horizon}",
                v.name(),
                cfg.span(v)
            )));
        }
    }
    for v in VIEWS.iter().rev().copied() {
        if cfg.depth(v, horizon) > t {
            return Err(Error::InsufficientHistory(v.name()));
        }
    }
    let mut out: [Vec<usize>; 5] = Default::default();
    for v in VIEWS {
        let l = cfg.length(v);
        out[v.index()] = match v {
            View::Recent => (1..=l).map(|i| t - (horizon - 1) - i).collect(),
            _ => (1..=l).map(|j| t - j * cfg.span(v)).collect(),
        };
    }
    Ok(out)
}

/// Per-view inputs `N × (C·l_v)`: the frames at [`view_indices`] concatenated
/// along columns, nearest first. Zero-length views give `N × 0` tensors.
pub fn sample_views(series: &FlowSeries, t: usize, cfg: &ViewConfig, horizon: usize) -> Result<[Tensor; 5]> {
    if t >= series.len {
        return Err(Error::OutOfRange { t, len: series.len });
    }
    let idx = view_indices(t, cfg, horizon)?;
    let (n, c) = (series.n, series.c);
    Ok(idx.map(|steps| {
        let w = c * steps.len();
        let mut data = vec![0.0; n * w];
        for (k, &s) in steps.iter().enumerate() {
            let frame = series.frame(s);
            for i in 0..n {
                data[i * w + k * c..i * w + (k + 1) * c].copy_from_slice(&frame[i * c..(i + 1) * c]);
            }
        }
        Tensor::new(vec![n, w], data).expect("view dims")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only(v: View, len: usize) -> ViewConfig {
        ViewConfig {
            lengths: [0; 5],
            ..Default::default()
        }
        .with_length(v, len)
    }

    #[test]
    fn recent_indices() {
        let idx = view_indices(1000, &only(View::Recent, 3), 1).unwrap();
        assert_eq!(idx[0], vec![999, 998, 997]);
    }

    #[test]
    fn daily_indices() {
        let idx = view_indices(1000, &only(View::Daily, 2), 1).unwrap();
        assert_eq!(idx[1], vec![976, 952]);
        assert!(idx[0].is_empty());
    }

    #[test]
    fn quarterly_needs_history() {
        let err = view_indices(10, &only(View::Quarterly, 1), 1).unwrap_err();
        assert_eq!(err.to_string(), "insufficient history: quarterly view");
    }

    #[test]
    fn horizon_shifts_recent_only() {
        let cfg = only(View::Recent, 2).with_length(View::Daily, 1);
        let idx = view_indices(100, &cfg, 3).unwrap();
        assert_eq!(idx[0], vec![97, 96]);
        assert_eq!(idx[1], vec![76]);
        assert_eq!(required_history(&cfg, 3), 24);
    }

    #[test]
    fn config_validation() {
        assert!(ViewConfig::new([7, 0, 0, 0, 0], [24, 168, 720, 2160]).is_err());
        assert!(ViewConfig::new([1, 0, 0, 0, 0], [24, 24, 720, 2160]).is_err());
        assert!(ViewConfig::new([0; 5], [24, 168, 720, 2160]).is_err());
        assert_eq!(ViewConfig::default().active_views().len(), 5);
    }
}
