use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, sha256_hex, write_atomic};
use crate::mapseg::io::RegionRow;
use crate::model::PredictionRow;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub region_id: usize,
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    pub inflow: f64,
    pub outflow: f64,
}

/// Predicted flows at `t` joined with region centroids on `region_id`.
pub fn export_heatmap(predictions: &[PredictionRow], regions: &[RegionRow], t: usize) -> Result<Vec<HeatmapRow>> {
    let at_t: BTreeMap<usize, &PredictionRow> = predictions.iter().filter(|r| r.t == t).map(|r| (r.region_id, r)).collect();
    if at_t.is_empty() {
        let len = predictions.iter().map(|r| r.t + 1).max().unwrap_or(0);
        return Err(Error::OutOfRange { t, len });
    }
    regions
        .iter()
        .map(|reg| {
            let p = at_t.get(&reg.region_id).ok_or(Error::UnknownNode(reg.region_id))?;
            Ok(HeatmapRow {
                region_id: reg.region_id,
                centroid_lat: reg.centroid_lat,
                centroid_lon: reg.centroid_lon,
                inflow: p.pred[0],
                outflow: p.pred[1],
            })
        })
        .collect()
}

pub fn write_heatmap(path: &Path, rows: &[HeatmapRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["region_id", "centroid_lat", "centroid_lon", "inflow", "outflow"])?;
    for r in rows {
        w.write_record([
            r.region_id.to_string(),
            fmt_f64(r.centroid_lat),
            fmt_f64(r.centroid_lon),
            fmt_f64(r.inflow),
            fmt_f64(r.outflow),
        ])?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

pub const MANIFEST: &str = "manifest.csv";

/// Adds or refreshes the `path, sha256, bytes` lines of `artifacts` in
/// `dir/manifest.csv`. Paths are stored relative to `dir` when possible.
pub fn update_manifest(dir: &Path, artifacts: &[&Path]) -> Result<()> {
    let manifest = dir.join(MANIFEST);
    let mut entries: BTreeMap<String, (String, u64)> = BTreeMap::new();
    if manifest.exists() {
        let mut rdr = csv::Reader::from_path(&manifest)?;
        for rec in rdr.deserialize() {
            let (p, h, b): (String, String, u64) = rec?;
            entries.insert(p, (h, b));
        }
    }
    for a in artifacts {
        let bytes = std::fs::read(a)?;
        let key = a.strip_prefix(dir).unwrap_or(a).to_string_lossy().replace('\\', "/");
        entries.insert(key, (sha256_hex(&bytes), bytes.len() as u64));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "sha256", "bytes"])?;
    for (p, (h, b)) in &entries {
        w.write_record([p.as_str(), h.as_str(), &b.to_string()])?;
    }
    write_atomic(&manifest, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}
