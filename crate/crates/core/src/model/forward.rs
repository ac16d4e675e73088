use std::collections::HashMap;
use std::sync::Arc;

use super::ops::{t_embed, t_fuse_global, t_fuse_temporal, t_view_net};
use super::{ModelConfig, ModelParams, Slots};
use crate::dataprep::TrainingInstance;
use crate::error::{Error, Result};
use crate::numkit::{CsrMatrix, NodeId, Tape, Tensor};

/// Instances stacked for one forward pass: node-level tensors have `B·N`
/// rows (instance-major), global-view tensors have `B` rows.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub views: [Option<Tensor>; 5],
    pub ext: Option<Tensor>,
    pub meta: Option<Tensor>,
    pub target: Arc<Tensor>,
    pub t: Vec<usize>,
}

fn stack_rows(parts: impl Iterator<Item = Vec<f64>>, rows_each: usize, cols: usize, count: usize) -> Tensor {
    let mut data = Vec::with_capacity(count * rows_each * cols);
    for p in parts {
        data.extend(p);
    }
    Tensor::new(vec![count * rows_each, cols], data).expect("stacked dims")
}

impl Batch {
    pub fn new(instances: &[&TrainingInstance], params: &ModelParams) -> Result<Self> {
        let spec = &params.spec;
        let b = instances.len();
        if b == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (n, c) = (spec.n, spec.c);
        for inst in instances {
            if inst.target.dims() != [n, c] {
                return Err(Error::shape("Batch::new", format!("target {:?}, model expects [{n}, {c}]", inst.target.dims())));
            }
            for v in spec.active_views() {
                let want = [n, c * spec.view_lengths[v.index()]];
                if inst.views[v.index()].dims() != want {
                    return Err(Error::shape(
                        "Batch::new",
                        format!("{} view {:?}, model expects {want:?}", v.name(), inst.views[v.index()].dims()),
                    ));
                }
            }
        }
        let mut views: [Option<Tensor>; 5] = Default::default();
        for v in spec.active_views() {
            let w = c * spec.view_lengths[v.index()];
            views[v.index()] = Some(stack_rows(instances.iter().map(|i| i.views[v.index()].data().to_vec()), n, w, b));
        }
        let global = |width: usize, pick: fn(&TrainingInstance) -> &Vec<f64>| -> Result<Option<Tensor>> {
            if width == 0 {
                return Ok(None);
            }
            if let Some(bad) = instances.iter().find(|i| pick(i).len() != width) {
                return Err(Error::shape("Batch::new", format!("global feature width {}, expected {width}", pick(bad).len())));
            }
            Ok(Some(stack_rows(instances.iter().map(|i| pick(i).clone()), 1, width, b)))
        };
        Ok(Batch {
            size: b,
            views,
            ext: global(spec.ext_width, |i| &i.ext)?,
            meta: global(spec.meta_width, |i| &i.meta)?,
            target: Arc::new(stack_rows(instances.iter().map(|i| i.target.data().to_vec()), n, c, b)),
            t: instances.iter().map(|i| i.t).collect(),
        })
    }
}

/// Block-diagonal copies of the propagation matrix, one per batch size seen.
#[derive(Debug, Clone)]
pub struct PropCache {
    base: Arc<CsrMatrix>,
    blocks: HashMap<usize, Arc<CsrMatrix>>,
}

impl PropCache {
    pub fn new(base: Arc<CsrMatrix>) -> Self {
        PropCache {
            base,
            blocks: HashMap::new(),
        }
    }

    pub fn base(&self) -> &Arc<CsrMatrix> {
        &self.base
    }

    pub fn get(&mut self, batch: usize) -> Arc<CsrMatrix> {
        if batch == 1 {
            return Arc::clone(&self.base);
        }
        let base = &self.base;
        Arc::clone(self.blocks.entry(batch).or_insert_with(|| Arc::new(base.block_diagonal(batch))))
    }
}

/// Records the full network on `tape`; returns the prediction node and the
/// parameter leaf for each tensor in `params`.
pub(crate) fn record(
    tape: &mut Tape,
    params: &ModelParams,
    slots: &Slots,
    batch: &Batch,
    prop: &Arc<CsrMatrix>,
    cfg: &ModelConfig,
) -> Result<NodeId> {
    let spec = &params.spec;
    if prop.rows() != batch.size * spec.n {
        return Err(Error::shape(
            "forward",
            format!("propagation matrix has {} rows for {}×{} nodes", prop.rows(), batch.size, spec.n),
        ));
    }
    let leaves: Vec<NodeId> = params.tensors.iter().enumerate().map(|(i, t)| tape.param(i, t.clone())).collect();

    let mut outputs = Vec::new();
    for v in spec.active_views() {
        let s = slots.views[v.index()].as_ref().expect("active view has slots");
        let x = tape.constant(batch.views[v.index()].clone().expect("active view has input"));
        let res: Vec<_> = s.res.iter().map(|&i| leaves[i]).collect();
        let o = t_view_net(tape, x, prop, leaves[s.input], &res, leaves[s.out], cfg.hidden_act, cfg.residual)?;
        outputs.push((o, leaves[slots.fusion[v.index()].expect("fusion slot")]));
    }
    let o = t_fuse_temporal(tape, &outputs, batch.size)?;

    let ext = match (&batch.ext, slots.ext) {
        (Some(x), Some(w)) => Some((tape.constant(x.clone()), leaves[w])),
        _ => None,
    };
    let meta = match (&batch.meta, slots.meta) {
        (Some(x), Some(w)) => Some((tape.constant(x.clone()), leaves[w])),
        _ => None,
    };
    let o_con = t_embed(tape, ext, meta, slots.concat.map(|i| leaves[i]), cfg.hidden_act, spec.n, spec.c)?;
    t_fuse_global(tape, o, o_con, slots.postnet.map(|i| leaves[i]), cfg.output_act)
}

/// Predictions for a batch, `(B·N) × C`.
pub fn forward_batch(params: &ModelParams, batch: &Batch, props: &mut PropCache, cfg: &ModelConfig) -> Result<Tensor> {
    let mut tape = Tape::new();
    let prop = props.get(batch.size);
    let out = record(&mut tape, params, &params.slots(), batch, &prop, cfg)?;
    Ok(tape.value(out).clone())
}

/// Summed Huber loss of a batch and its gradient for every parameter tensor,
/// in storage order.
pub fn loss_and_gradients(
    params: &ModelParams,
    batch: &Batch,
    props: &mut PropCache,
    cfg: &ModelConfig,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let prop = props.get(batch.size);
    let pred = record(&mut tape, params, &params.slots(), batch, &prop, cfg)?;
    let loss = tape.huber_sum(pred, Arc::clone(&batch.target), cfg.delta)?;
    let dims: Vec<&[usize]> = params.tensors.iter().map(Tensor::dims).collect();
    let value = tape.value(loss).data()[0];
    Ok((value, tape.backward(loss)?.into_dense(&dims)))
}

/// Prediction `N × C` for a single instance.
pub fn forward(instance: &TrainingInstance, prop: &Arc<CsrMatrix>, params: &ModelParams, cfg: &ModelConfig) -> Result<Tensor> {
    let batch = Batch::new(&[instance], params)?;
    forward_batch(params, &batch, &mut PropCache::new(Arc::clone(prop)), cfg)
}

/// Scaled predictions for every instance, each `N × C`, evaluated in chunks
/// of the configured batch size.
pub fn predict(
    params: &ModelParams,
    instances: &[TrainingInstance],
    props: &mut PropCache,
    cfg: &ModelConfig,
) -> Result<Vec<Tensor>> {
    let (n, c) = (params.spec.n, params.spec.c);
    let mut out = Vec::with_capacity(instances.len());
    let refs: Vec<&TrainingInstance> = instances.iter().collect();
    for chunk in refs.chunks(cfg.batch_size.max(1)) {
        let pred = forward_batch(params, &Batch::new(chunk, params)?, props, cfg)?;
        for k in 0..chunk.len() {
            let rows = pred.data()[k * n * c..(k + 1) * n * c].to_vec();
            out.push(Tensor::new(vec![n, c], rows)?);
        }
    }
    Ok(out)
}
