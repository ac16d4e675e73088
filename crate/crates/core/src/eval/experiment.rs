use std::collections::BTreeMap;
use std::sync::Arc;

use super::metrics::{ha_predict, mae, rmse};
use super::MetricReport;
use crate::dataprep::{ExternalRecord, FlowSeries, Prepared, ScaleRange, ViewConfig};
use crate::error::{Error, Result};
use crate::model::{predict, train, ModelConfig, ModelParams, ModelSpec, PropCache, TrainReport};
use crate::numkit::{CsrMatrix, Tensor};
use crate::stg::STGraph;

/// Which components a run keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub views: ViewConfig,
    pub geospatial: bool,
    pub external: bool,
    pub meta: bool,
}

impl ExperimentSpec {
    pub fn full(name: &str, views: ViewConfig) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            views,
            geospatial: true,
            external: true,
            meta: true,
        }
    }
}

/// Shared inputs of every run on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub series: &'a FlowSeries,
    pub externals: &'a [ExternalRecord],
    pub weather_vocab: usize,
    pub graph: &'a STGraph,
    pub range: ScaleRange,
}

/// A trained model together with its test-split predictions (unscaled).
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub prepared: Prepared,
    pub prop: Arc<CsrMatrix>,
    pub params: ModelParams,
    pub report: TrainReport,
    pub predictions: Vec<(usize, Tensor)>,
    pub metrics: MetricReport,
}

/// Inverse-scaled predictions paired with their target index.
pub fn unscaled_predictions(
    params: &ModelParams,
    prepared: &Prepared,
    props: &mut PropCache,
    cfg: &ModelConfig,
) -> Result<Vec<(usize, Tensor)>> {
    let test = &prepared.data.test;
    let preds = predict(params, test, props, cfg)?;
    preds
        .into_iter()
        .zip(test)
        .map(|(p, inst)| Ok((inst.t, Tensor::new(p.dims().to_vec(), prepared.scaler.inverse_frame(p.data()))?)))
        .collect()
}

/// Scores predictions against the unscaled series, optionally restricted to
/// the timesteps in `only`.
pub fn score(
    experiment: &str,
    partition: &str,
    predictions: &[(usize, Tensor)],
    series: &FlowSeries,
    only: Option<&[usize]>,
) -> Result<MetricReport> {
    let mut p = Vec::new();
    let mut y = Vec::new();
    for (t, pred) in predictions {
        if only.is_some_and(|set| set.binary_search(t).is_err()) {
            continue;
        }
        p.extend_from_slice(pred.data());
        y.extend_from_slice(series.frame(*t));
    }
    Ok(MetricReport {
        experiment: experiment.to_string(),
        partition: partition.to_string(),
        rmse: rmse(&p, &y)?,
        mae: mae(&p, &y)?,
        count: p.len(),
    })
}

/// Weekly historical-average predictions for the given targets.
pub fn ha_predictions(series: &FlowSeries, targets: &[usize]) -> Result<Vec<(usize, Tensor)>> {
    let period = series.steps_per_week();
    targets.iter().map(|&t| Ok((t, ha_predict(series, t, period)?))).collect()
}

/// Trains and evaluates one configuration. Disabled geoposition swaps ω for
/// an all-ones mask; disabled global views drop their embeddings.
pub fn run_experiment(
    data: ExperimentData<'_>,
    spec: &ExperimentSpec,
    cfg: &ModelConfig,
    horizon: usize,
) -> Result<Experiment> {
    if spec.views.lengths.iter().all(|&l| l == 0) {
        return Err(Error::InvalidArgument(format!("experiment `{}` disables every temporal view", spec.name)));
    }
    let prepared = Prepared::new(data.series, data.externals, data.weather_vocab, spec.views, data.range, horizon)?;
    let prop = if spec.geospatial {
        Arc::clone(&data.graph.prop)
    } else {
        Arc::clone(&data.graph.without_geospatial()?.prop)
    };
    let cfg = ModelConfig {
        use_external: cfg.use_external && spec.external,
        use_meta: cfg.use_meta && spec.meta,
        ..cfg.clone()
    };
    let model_spec = ModelSpec::new(
        data.series.n,
        data.series.c,
        spec.views.lengths,
        prepared.ext_width(),
        prepared.meta_width(),
        &cfg,
    );
    let (params, report) = train(&prepared.data.train, &prepared.data.val, &model_spec, Arc::clone(&prop), &cfg)?;
    let predictions = unscaled_predictions(&params, &prepared, &mut PropCache::new(Arc::clone(&prop)), &cfg)?;
    let metrics = score(&spec.name, "test", &predictions, data.series, None)?;
    Ok(Experiment {
        spec: spec.clone(),
        prepared,
        prop,
        params,
        report,
        predictions,
        metrics,
    })
}

/// Single-step run with the named component switched off.
pub fn ablation_run(data: ExperimentData<'_>, spec: &ExperimentSpec, cfg: &ModelConfig) -> Result<Experiment> {
    run_experiment(data, spec, cfg, 1)
}

/// Per-horizon test metrics for models trained at horizons `1..=k`.
pub fn multistep_eval(
    models: &BTreeMap<usize, Experiment>,
    k: usize,
    series: &FlowSeries,
    cfg: &ModelConfig,
) -> Result<Vec<MetricReport>> {
    (1..=k)
        .map(|h| {
            let exp = models.get(&h).ok_or(Error::MissingHorizon(h))?;
            let cfg = ModelConfig {
                use_external: cfg.use_external && exp.spec.external,
                use_meta: cfg.use_meta && exp.spec.meta,
                ..cfg.clone()
            };
            let preds = unscaled_predictions(&exp.params, &exp.prepared, &mut PropCache::new(Arc::clone(&exp.prop)), &cfg)?;
            score(&exp.spec.name, &format!("step{h}"), &preds, series, None)
        })
        .collect()
}
