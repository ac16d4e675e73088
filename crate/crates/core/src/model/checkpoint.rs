//! Checkpoint container and prediction export.
//!
//! A checkpoint is a text header of `key=value` lines ending in a blank line,
//! followed by `K` records of `u32` name length, UTF-8 name, and a DTN1 tensor.

use std::io::Read;
use std::path::Path;

use super::{ModelParams, ModelSpec, PostNet};
use crate::dataprep::{ScaleRange, Scaler};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};
use crate::numkit::dtn::{read_dtn, write_dtn};
use crate::numkit::Tensor;

const HEADER: &str = "MVGCN-CKPT v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub seed: u64,
    pub scaler: Scaler,
    pub params: ModelParams,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let s = &ck.params.spec;
    let lengths: Vec<String> = s.view_lengths.iter().map(usize::to_string).collect();
    let mut buf = format!(
        "{HEADER}\nconfig_hash={}\nn={}\nc={}\nviews={}\nseed={}\next_width={}\nmeta_width={}\nhidden={}\nresidual_units={}\nembed_width={}\npostnet={}\nscaler_range={}\nscaler_min={}\nscaler_max={}\ntensors={}\n\n",
        ck.config_hash,
        s.n,
        s.c,
        lengths.join(","),
        ck.seed,
        s.ext_width,
        s.meta_width,
        s.hidden,
        s.residual_units,
        s.embed_width,
        s.postnet.name(),
        ck.scaler.range.name(),
        join(&ck.scaler.min),
        join(&ck.scaler.max),
        ck.params.tensors.len()
    )
    .into_bytes();
    for (name, t) in ck.params.names.iter().zip(&ck.params.tensors) {
        buf.extend((name.len() as u32).to_le_bytes());
        buf.extend(name.as_bytes());
        write_dtn(&mut buf, t)?;
    }
    write_atomic(path, &buf)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

/// Loads a checkpoint; with `expected`, every tensor must match that spec's
/// layout and a mismatch names the offending tensor.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelSpec>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| corrupt("header is not terminated"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| corrupt("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some(HEADER) {
        return Err(corrupt("unknown checkpoint version"));
    }
    let kv: std::collections::HashMap<&str, &str> = lines.filter_map(|l| l.split_once('=')).collect();
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| corrupt(format!("header lacks `{k}`")));
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| corrupt(format!("bad `{k}`"))) };
    let floats = |k: &str| -> Result<Vec<f64>> {
        get(k)?
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| corrupt(format!("bad `{k}`"))))
            .collect()
    };
    let lengths: Vec<usize> = get("views")?
        .split(',')
        .map(|s| s.parse().map_err(|_| corrupt("bad `views`")))
        .collect::<Result<_>>()?;
    let view_lengths: [usize; 5] = lengths.try_into().map_err(|_| corrupt("`views` needs five lengths"))?;
    let spec = ModelSpec {
        n: num("n")?,
        c: num("c")?,
        view_lengths,
        ext_width: num("ext_width")?,
        meta_width: num("meta_width")?,
        hidden: num("hidden")?,
        residual_units: num("residual_units")?,
        embed_width: num("embed_width")?,
        postnet: PostNet::parse(get("postnet")?).ok_or_else(|| corrupt("bad `postnet`"))?,
    };
    let scaler = Scaler {
        min: floats("scaler_min")?,
        max: floats("scaler_max")?,
        range: ScaleRange::parse(get("scaler_range")?).ok_or_else(|| corrupt("bad `scaler_range`"))?,
    };
    let seed = get("seed")?.parse().map_err(|_| corrupt("bad `seed`"))?;
    let count = num("tensors")?;

    let layout = expected.unwrap_or(&spec).layout();
    if layout.len() != count {
        return Err(corrupt(format!("checkpoint holds {count} tensors, layout expects {}", layout.len())));
    }
    let mut cursor = &bytes[end + 2..];
    let mut names = Vec::with_capacity(count);
    let mut tensors = Vec::with_capacity(count);
    for (want_name, want_dims) in &layout {
        let mut len = [0u8; 4];
        cursor.read_exact(&mut len).map_err(|_| corrupt("truncated tensor name"))?;
        let len = u32::from_le_bytes(len) as usize;
        if cursor.len() < len {
            return Err(corrupt("truncated tensor name"));
        }
        let name = std::str::from_utf8(&cursor[..len]).map_err(|_| corrupt("tensor name is not UTF-8"))?.to_string();
        cursor = &cursor[len..];
        let t: Tensor = read_dtn(&mut cursor)?;
        if &name != want_name {
            return Err(corrupt(format!("found tensor `{name}` where `{want_name}` was expected")));
        }
        if t.dims() != want_dims.as_slice() {
            return Err(Error::CheckpointDims {
                name,
                found: t.dims().to_vec(),
                expected: want_dims.clone(),
            });
        }
        names.push(name);
        tensors.push(t);
    }
    if !cursor.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", cursor.len())));
    }
    Ok(Checkpoint {
        config_hash: get("config_hash")?.to_string(),
        seed,
        scaler,
        params: ModelParams {
            spec: expected.cloned().unwrap_or(spec),
            names,
            tensors,
        },
    })
}

/// One row of the prediction export, in unscaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub t: usize,
    pub region_id: usize,
    pub pred: [f64; 2],
    pub truth: [f64; 2],
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "region_id", "inflow_pred", "outflow_pred", "inflow_true", "outflow_true"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.region_id.to_string(),
            fmt_f64(r.pred[0]),
            fmt_f64(r.pred[1]),
            fmt_f64(r.truth[0]),
            fmt_f64(r.truth[1]),
        ])?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let (t, region_id, p0, p1, t0, t1): (usize, usize, f64, f64, f64, f64) = rec?;
        rows.push(PredictionRow {
            t,
            region_id,
            pred: [p0, p1],
            truth: [t0, t1],
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ModelParams};

    fn checkpoint(n: usize) -> Checkpoint {
        let spec = ModelSpec::new(n, 2, [2, 1, 0, 0, 0], 3, 32, &ModelConfig::default());
        Checkpoint {
            config_hash: "abc".into(),
            seed: 7,
            scaler: Scaler {
                min: vec![0.0, 1.5],
                max: vec![10.0, 99.25],
                range: ScaleRange::Symmetric,
            },
            params: ModelParams::init(&spec, 3),
        }
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.ckpt");
        let ck = checkpoint(4);
        save_checkpoint(&p, &ck).unwrap();
        assert_eq!(load_checkpoint(&p, None).unwrap(), ck);
        assert_eq!(load_checkpoint(&p, Some(&ck.params.spec)).unwrap(), ck);
    }

    #[test]
    fn truncated_and_mismatched() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.ckpt");
        save_checkpoint(&p, &checkpoint(4)).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_checkpoint(&p, None), Err(Error::CorruptCheckpoint(_))));

        save_checkpoint(&p, &checkpoint(4)).unwrap();
        let other = checkpoint(5).params.spec;
        match load_checkpoint(&p, Some(&other)) {
            Err(Error::CheckpointDims { name, .. }) => assert_eq!(name, "fusion.recent"),
            other => panic!("expected dims error, got {other:?}"),
        }
    }
}
