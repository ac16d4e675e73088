//! File-to-file steps behind each CLI command. Every step records what it
//! wrote in the working directory's manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDateTime;

use super::config::RunConfig;
use super::export::{export_heatmap, update_manifest, write_heatmap};
use super::synth::{synth_generate, SynthConfig, WEATHER_VOCAB};
use crate::dataprep::io::{align_externals, read_externals, read_flow_series, sidecar_path, write_externals, write_flow_series};
use crate::dataprep::{aggregate_flows, ExternalRecord, FlowSeries, Prepared};
use crate::error::{Error, Result};
use crate::eval::{
    ha_predictions, run_experiment, score, summary_table, sudden_change_split, unscaled_predictions, write_report_csv,
    ExperimentData, ExperimentSpec, MetricReport,
};
use crate::io::{fmt_f64, sha256_hex, write_atomic};
use crate::mapseg::io::{read_membership, read_region_table, region_rows, write_membership, write_region_table, RegionRow};
use crate::mapseg::{cluster_regions, segment, BBox, GeoPoint};
use crate::model::{
    load_checkpoint, save_checkpoint, train, write_predictions, Checkpoint, ModelConfig, ModelSpec, PredictionRow,
    PropCache, TrainReport,
};
use crate::numkit::dtn::{load_dtn, save_dtn};
use crate::numkit::Tensor;
use crate::stg::io::{read_graph, read_trips, write_graph};
use crate::stg::{count_transitions, RegionLookup, STGraph, TransitionCube, Trip};

fn missing(key: &str) -> Error {
    Error::Config(format!("`{key}` is not set"))
}

fn record(dir: &Path, written: &[PathBuf]) -> Result<()> {
    let refs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    update_manifest(dir, &refs)
}

/// Writes a synthetic city into `out`: flows, externals, transitions, the
/// region table, and a `run.conf` pointing at them.
pub fn synth_to_dir(cfg: &SynthConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let s = synth_generate(cfg)?;
    std::fs::create_dir_all(out)?;
    let flows = out.join("flows.dtn");
    write_flow_series(&flows, &s.series)?;
    let externals = out.join("externals.csv");
    write_externals(&externals, &s.externals)?;
    let transitions = out.join("transitions.dtn");
    save_dtn(&transitions, &s.cube.to_tensor())?;
    let regions = out.join("regions.csv");
    let rows: Vec<RegionRow> = s
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| RegionRow {
            region_id: i,
            centroid_lat: p.lat,
            centroid_lon: p.lon,
            cell_count: 1,
        })
        .collect();
    write_region_table(&regions, &rows)?;
    let conf = out.join("run.conf");
    let text = format!(
        "# synthetic city: n={} weeks={} seed={} clamped={}\nflows = flows.dtn\nexternals = externals.csv\ntransitions = transitions.dtn\nregions = regions.csv\nweather_vocab = {WEATHER_VOCAB}\n",
        cfg.n, cfg.weeks, cfg.seed, s.clamped
    );
    write_atomic(&conf, text.as_bytes())?;
    let written = vec![flows.clone(), sidecar_path(&flows), externals, transitions, regions, conf];
    record(out, &written)?;
    Ok(written)
}

fn positions(run: &RunConfig) -> Result<Vec<GeoPoint>> {
    let path = run.regions.as_ref().ok_or_else(|| missing("regions"))?;
    let mut rows = read_region_table(&run.resolve(path))?;
    rows.sort_by_key(|r| r.region_id);
    if rows.iter().enumerate().any(|(i, r)| r.region_id != i) {
        return Err(Error::Parse {
            path: run.resolve(path),
            msg: "region ids must be 0..N without gaps".into(),
        });
    }
    Ok(rows.iter().map(|r| GeoPoint::new(r.centroid_lat, r.centroid_lon)).collect())
}

fn lookup(run: &RunConfig, n: usize) -> Result<RegionLookup> {
    match &run.membership {
        Some(m) => Ok(RegionLookup::from_regions(&read_membership(&run.resolve(m))?)),
        None => Ok(RegionLookup::ids_only(n)),
    }
}

/// Start, interval and slice count used to bin trips.
fn trip_grid(run: &RunConfig, trips: &[Trip]) -> Result<(NaiveDateTime, i64, usize)> {
    let start = match run.start {
        Some(s) => s,
        None => trips.iter().map(|t| t.start).min().ok_or_else(|| missing("start"))?,
    };
    let slices = match run.slices {
        Some(s) => s,
        None => {
            let last = trips.iter().map(|t| t.end).max().ok_or_else(|| missing("slices"))?;
            ((last - start).num_seconds() / run.interval_secs + 1).max(1) as usize
        }
    };
    Ok((start, run.interval_secs, slices))
}

fn load_trips(run: &RunConfig) -> Result<Option<Vec<Trip>>> {
    run.trips.as_ref().map(|p| read_trips(&run.resolve(p))).transpose()
}

/// Builds the graph from the transition cube, or from trips when no cube is
/// configured.
pub fn build_graph(run: &RunConfig) -> Result<(STGraph, Vec<PathBuf>)> {
    let pos = positions(run)?;
    let cube = if let Some(t) = &run.transitions {
        TransitionCube::from_tensor(&load_dtn(&run.resolve(t))?)?
    } else if let Some(trips) = load_trips(run)? {
        let (start, interval, slices) = trip_grid(run, &trips)?;
        count_transitions(&trips, &lookup(run, pos.len())?, start, interval, slices)?.0
    } else {
        return Err(missing("transitions` or `trips"));
    };
    let graph = STGraph::from_cube(&cube, &pos, run.graph_options)?;
    let out = run.resolve(&run.graph);
    write_graph(&out, &graph)?;
    log::info!("graph: {} edges over {} regions", graph.edge_count(), graph.n);
    let written = vec![out];
    record(&run.work_dir, &written)?;
    Ok((graph, written))
}

fn load_series(run: &RunConfig) -> Result<FlowSeries> {
    read_flow_series(&run.resolve(&run.flows))
}

fn load_externals(run: &RunConfig, series: &FlowSeries) -> Result<Vec<ExternalRecord>> {
    match &run.externals {
        Some(p) => Ok(align_externals(&read_externals(&run.resolve(p))?, series)),
        None => Ok(Vec::new()),
    }
}

fn load_graph(run: &RunConfig) -> Result<STGraph> {
    read_graph(&run.resolve(&run.graph), &positions(run)?)
}

fn prepared(run: &RunConfig, series: &FlowSeries, externals: &[ExternalRecord]) -> Result<Prepared> {
    Prepared::new(series, externals, run.weather_vocab, run.views, run.scaler_range, run.horizon)
}

/// Aggregates trips into flows when trips are configured, then checks that
/// the series supports the configured views and writes a dataset summary.
pub fn prepare(run: &RunConfig) -> Result<(Prepared, Vec<PathBuf>)> {
    let mut written = Vec::new();
    let series = match load_trips(run)? {
        Some(trips) => {
            let n = positions(run)?.len();
            let (start, interval, slices) = trip_grid(run, &trips)?;
            let (series, stats) = aggregate_flows(&trips, &lookup(run, n)?, start, interval, slices)?;
            log::info!(
                "prepare: {} trips counted, {} intra-region, {} rejected",
                stats.counted,
                stats.intra,
                stats.rejected
            );
            let flows = run.resolve(&run.flows);
            write_flow_series(&flows, &series)?;
            written.push(sidecar_path(&flows));
            written.push(flows);
            series
        }
        None => load_series(run)?,
    };
    let externals = load_externals(run, &series)?;
    let p = prepared(run, &series, &externals)?;
    let summary = format!(
        "regions={}\nchannels={}\ntimesteps={}\ninterval_secs={}\nhorizon={}\nviews={:?}\ntrain={}\nval={}\ntest={}\nval_start={}\ntest_start={}\next_width={}\nmeta_width={}\nscaler_range={}\nscaler_min={}\nscaler_max={}\n",
        series.n,
        series.c,
        series.len,
        series.interval_secs,
        run.horizon,
        run.views.lengths,
        p.data.train.len(),
        p.data.val.len(),
        p.data.test.len(),
        p.val_start,
        p.test_start,
        p.ext_width(),
        p.meta_width(),
        p.scaler.range.name(),
        p.scaler.min.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"),
        p.scaler.max.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"),
    );
    let out = run.resolve(&run.report_dir).join("dataset.txt");
    write_atomic(&out, summary.as_bytes())?;
    written.push(out);
    record(&run.work_dir, &written)?;
    Ok((p, written))
}

fn model_spec(run: &RunConfig, series: &FlowSeries, p: &Prepared) -> ModelSpec {
    ModelSpec::new(series.n, series.c, run.views.lengths, p.ext_width(), p.meta_width(), &run.model)
}

/// Hash of everything that shapes training.
pub fn config_hash(run: &RunConfig) -> String {
    let text = format!(
        "{};views={:?};periods={:?};horizon={};range={}",
        run.model.canonical(),
        run.views.lengths,
        run.views.periods,
        run.horizon,
        run.scaler_range.name()
    );
    sha256_hex(text.as_bytes())
}

pub fn write_train_report(path: &Path, report: &TrainReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_loss", "val_rmse"])?;
    for (e, (l, v)) in report.train_loss.iter().zip(&report.val_rmse).enumerate() {
        w.write_record([e.to_string(), fmt_f64(*l), fmt_f64(*v)])?;
    }
    let mut bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    bytes.extend(format!("# best_epoch={} stop={}\n", report.best_epoch, report.stop.name()).as_bytes());
    write_atomic(path, &bytes)
}

/// Trains on the configured data and saves the best-validation checkpoint.
pub fn train_model(run: &RunConfig) -> Result<(TrainReport, Vec<PathBuf>)> {
    let series = load_series(run)?;
    let externals = load_externals(run, &series)?;
    let graph = load_graph(run)?;
    let p = prepared(run, &series, &externals)?;
    let spec = model_spec(run, &series, &p);
    let (params, report) = train(&p.data.train, &p.data.val, &spec, Arc::clone(&graph.prop), &run.model)?;
    let ck = Checkpoint {
        config_hash: config_hash(run),
        seed: run.model.seed,
        scaler: p.scaler.clone(),
        params,
    };
    let ckpt = run.resolve(&run.checkpoint);
    save_checkpoint(&ckpt, &ck)?;
    let rep = run.resolve(&run.report_dir).join("train_report.csv");
    write_train_report(&rep, &report)?;
    let written = vec![ckpt, rep];
    record(&run.work_dir, &written)?;
    Ok((report, written))
}

/// Test-split predictions of the saved checkpoint, unscaled, one row per
/// timestep and region.
pub fn predict(run: &RunConfig) -> Result<(Vec<PredictionRow>, Vec<PathBuf>)> {
    let series = load_series(run)?;
    let externals = load_externals(run, &series)?;
    let graph = load_graph(run)?;
    let mut p = prepared(run, &series, &externals)?;
    let spec = model_spec(run, &series, &p);
    let ck = load_checkpoint(&run.resolve(&run.checkpoint), Some(&spec))?;
    if ck.config_hash != config_hash(run) {
        log::warn!("predict: checkpoint was trained under a different configuration");
    }
    p.scaler = ck.scaler;
    let preds = unscaled_predictions(&ck.params, &p, &mut PropCache::new(Arc::clone(&graph.prop)), &run.model)?;
    let mut rows = Vec::with_capacity(preds.len() * series.n);
    for (t, pred) in &preds {
        for i in 0..series.n {
            rows.push(PredictionRow {
                t: *t,
                region_id: i,
                pred: [pred.get2(i, 0), pred.get2(i, 1)],
                truth: [series.get(*t, i, 0), series.get(*t, i, 1)],
            });
        }
    }
    let out = run.resolve(&run.predictions);
    write_predictions(&out, &rows)?;
    let written = vec![out];
    record(&run.work_dir, &written)?;
    Ok((rows, written))
}

/// Groups prediction rows into per-timestep `N × C` tensors.
pub fn predictions_by_t(rows: &[PredictionRow], n: usize) -> Result<Vec<(usize, Tensor)>> {
    let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.region_id >= n {
            return Err(Error::UnknownNode(r.region_id));
        }
        let frame = by_t.entry(r.t).or_insert_with(|| vec![f64::NAN; n * 2]);
        frame[r.region_id * 2] = r.pred[0];
        frame[r.region_id * 2 + 1] = r.pred[1];
    }
    by_t.into_iter()
        .map(|(t, v)| {
            if v.iter().any(|x| x.is_nan()) {
                return Err(Error::InvalidArgument(format!("predictions for t={t} miss some regions")));
            }
            Ok((t, Tensor::new(vec![n, 2], v)?))
        })
        .collect()
}

/// Model and HA scores on the whole test split and on its sudden and normal
/// timesteps. HA rows are left out when some target has less than a week of
/// history.
pub fn evaluate_predictions(
    name: &str,
    preds: &[(usize, Tensor)],
    series: &FlowSeries,
    fraction: f64,
) -> Result<Vec<MetricReport>> {
    let targets: Vec<usize> = preds.iter().map(|p| p.0).collect();
    let (sudden, normal) = sudden_change_split(series, fraction)?;
    let ha = match ha_predictions(series, &targets) {
        Ok(ha) => Some(ha),
        Err(Error::NoHistory(t)) => {
            log::warn!("no HA baseline: target {t} has no earlier week");
            None
        }
        Err(e) => return Err(e),
    };
    let mut runs = vec![(name, preds)];
    if let Some(ha) = &ha {
        runs.push(("HA", &ha[..]));
    }
    let mut out = Vec::new();
    for (label, p) in runs {
        out.push(score(label, "test", p, series, None)?);
        for (part, set) in [("sudden", &sudden), ("normal", &normal)] {
            if targets.iter().any(|t| set.binary_search(t).is_ok()) {
                out.push(score(label, part, p, series, Some(set))?);
            }
        }
    }
    Ok(out)
}

/// Scores the predictions file and writes `report.csv` and `summary.txt`.
pub fn evaluate(run: &RunConfig) -> Result<(Vec<MetricReport>, Vec<PathBuf>)> {
    let series = load_series(run)?;
    let rows = crate::model::read_predictions(&run.resolve(&run.predictions))?;
    let preds = predictions_by_t(&rows, series.n)?;
    for (t, _) in &preds {
        if *t >= series.len {
            return Err(Error::OutOfRange { t: *t, len: series.len });
        }
    }
    let reports = evaluate_predictions("MVGCN", &preds, &series, run.sudden_fraction)?;
    let dir = run.resolve(&run.report_dir);
    let csv = dir.join("report.csv");
    write_report_csv(&csv, &reports)?;
    let txt = dir.join("summary.txt");
    write_atomic(&txt, summary_table(&reports).as_bytes())?;
    let written = vec![csv, txt];
    record(&run.work_dir, &written)?;
    Ok((reports, written))
}

/// Named ablation variants: each switches one component off.
pub fn ablation_variants(run: &RunConfig) -> Vec<(ExperimentSpec, ModelConfig)> {
    let v = run.views;
    let full = ExperimentSpec::full("MVGCN", v);
    let mut out = vec![
        (full.clone(), run.model.clone()),
        (
            ExperimentSpec {
                name: "w/o geospatial".into(),
                geospatial: false,
                ..full.clone()
            },
            run.model.clone(),
        ),
        (
            ExperimentSpec {
                name: "w/o external".into(),
                external: false,
                ..full.clone()
            },
            run.model.clone(),
        ),
        (
            ExperimentSpec {
                name: "w/o meta".into(),
                meta: false,
                ..full.clone()
            },
            run.model.clone(),
        ),
        (
            ExperimentSpec {
                name: "plain".into(),
                ..full.clone()
            },
            ModelConfig {
                residual: false,
                ..run.model.clone()
            },
        ),
    ];
    let mut recent = v;
    recent.lengths = [v.lengths[0], 0, 0, 0, 0];
    if recent.lengths[0] > 0 && recent != v {
        out.push((ExperimentSpec::full("recent only", recent), run.model.clone()));
    }
    out
}

/// Trains every ablation variant (or only those named in `only`) with the
/// master seed and writes `ablation.csv` and `ablation.txt`.
pub fn ablate(run: &RunConfig, only: &[String]) -> Result<(Vec<MetricReport>, Vec<PathBuf>)> {
    let series = load_series(run)?;
    let externals = load_externals(run, &series)?;
    let graph = load_graph(run)?;
    let data = ExperimentData {
        series: &series,
        externals: &externals,
        weather_vocab: run.weather_vocab,
        graph: &graph,
        range: run.scaler_range,
    };
    let mut reports = Vec::new();
    let mut ha_done = false;
    for (spec, cfg) in ablation_variants(run) {
        if !only.is_empty() && !only.contains(&spec.name) {
            continue;
        }
        log::info!("ablate: training `{}`", spec.name);
        let exp = run_experiment(data, &spec, &cfg, run.horizon)?;
        if !ha_done {
            let targets: Vec<usize> = exp.predictions.iter().map(|p| p.0).collect();
            reports.push(score("HA", "test", &ha_predictions(&series, &targets)?, &series, None)?);
            ha_done = true;
        }
        reports.push(exp.metrics);
    }
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no ablation variant matched".into()));
    }
    let dir = run.resolve(&run.report_dir);
    let csv = dir.join("ablation.csv");
    write_report_csv(&csv, &reports)?;
    let txt = dir.join("ablation.txt");
    write_atomic(&txt, summary_table(&reports).as_bytes())?;
    let written = vec![csv, txt];
    record(&run.work_dir, &written)?;
    Ok((reports, written))
}

/// Heatmap of the predictions at `t`, joined with the region table.
pub fn heatmap(run: &RunConfig, t: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let rows = crate::model::read_predictions(&run.resolve(&run.predictions))?;
    let regions_path = run.regions.as_ref().ok_or_else(|| missing("regions"))?;
    let regions = read_region_table(&run.resolve(regions_path))?;
    let heat = export_heatmap(&rows, &regions, t)?;
    let out = run.resolve(out);
    write_heatmap(&out, &heat)?;
    let written = vec![out];
    record(&run.work_dir, &written)?;
    Ok(written)
}

/// Road CSV to irregular regions: writes `membership.csv` and `regions.csv`.
pub fn segment_roads(
    roads_csv: &Path,
    bbox: BBox,
    height: usize,
    width: usize,
    dilate_iterations: usize,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let roads = crate::mapseg::io::read_roads(roads_csv)?;
    let rs = segment(&roads, bbox, height, width, dilate_iterations)?;
    log::info!("segment: {} regions", rs.len());
    let membership = out.join("membership.csv");
    write_membership(&membership, &rs)?;
    let regions = out.join("regions.csv");
    write_region_table(&regions, &region_rows(&rs))?;
    let written = vec![membership, regions];
    record(out, &written)?;
    Ok(written)
}

/// Merges fine regions into `target` clusters by flow-profile correlation.
/// Profiles are each region's inflow then outflow series.
pub fn cluster_membership(membership: &Path, flows: &Path, target: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let rs = read_membership(membership)?;
    let series = read_flow_series(flows)?;
    if series.n != rs.len() {
        return Err(Error::shape(
            "cluster",
            format!("{} regions but flows cover {}", rs.len(), series.n),
        ));
    }
    let profiles: Vec<Vec<f64>> = (0..series.n)
        .map(|i| (0..series.c).flat_map(|c| (0..series.len).map(move |t| (t, c))).map(|(t, c)| series.get(t, i, c)).collect())
        .collect();
    let (clustered, _) = cluster_regions(&rs, &profiles, target)?;
    std::fs::create_dir_all(out)?;
    let m = out.join("membership.csv");
    write_membership(&m, &clustered)?;
    let r = out.join("regions.csv");
    write_region_table(&r, &region_rows(&clustered))?;
    let written = vec![m, r];
    record(out, &written)?;
    Ok(written)
}
