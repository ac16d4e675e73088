//! Network building blocks. Each block has a tape form used by training and
//! an eager wrapper that evaluates the same tape code on constants.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numkit::{Activation, CsrMatrix, NodeId, Tape, Tensor};

/// `f(P · h · W)`, evaluated as `P · (h · W)`.
pub(crate) fn t_sgc(tape: &mut Tape, h: NodeId, prop: &Arc<CsrMatrix>, w: NodeId, f: Activation) -> Result<NodeId> {
    let hw = tape.matmul(h, w)?;
    let phw = tape.spmm(prop, hw)?;
    tape.activation(phw, f)
}

/// `h + f(P · h · W)`, or the plain layer when `skip` is false.
pub(crate) fn t_residual(
    tape: &mut Tape,
    h: NodeId,
    prop: &Arc<CsrMatrix>,
    w: NodeId,
    f: Activation,
    skip: bool,
) -> Result<NodeId> {
    let z = t_sgc(tape, h, prop, w, f)?;
    if skip {
        tape.add(h, z)
    } else {
        Ok(z)
    }
}

/// Input projection, residual units, then a linear output projection to `C`.
pub(crate) fn t_view_net(
    tape: &mut Tape,
    x: NodeId,
    prop: &Arc<CsrMatrix>,
    w_in: NodeId,
    w_res: &[NodeId],
    w_out: NodeId,
    f: Activation,
    skip: bool,
) -> Result<NodeId> {
    let mut h = t_sgc(tape, x, prop, w_in, f)?;
    for &w in w_res {
        h = t_residual(tape, h, prop, w, f, skip)?;
    }
    t_sgc(tape, h, prop, w_out, Activation::Identity)
}

/// `reshape(concat(f(I_ext W_e), f(I_meta W_m)) · W_c)` to `(B·N) × C`.
/// Returns `None` when both embeddings are disabled.
pub(crate) fn t_embed(
    tape: &mut Tape,
    ext: Option<(NodeId, NodeId)>,
    meta: Option<(NodeId, NodeId)>,
    concat: Option<NodeId>,
    f: Activation,
    n: usize,
    c: usize,
) -> Result<Option<NodeId>> {
    let mut parts = Vec::new();
    for (x, w) in ext.into_iter().chain(meta) {
        let z = tape.matmul(x, w)?;
        parts.push(tape.activation(z, f)?);
    }
    let Some(&first) = parts.first() else {
        return Ok(None);
    };
    let joined = parts[1..].iter().try_fold(first, |acc, &p| tape.concat_cols(acc, p))?;
    let w_c = concat.ok_or_else(|| Error::InvalidArgument("global embedding lacks its concat projection".into()))?;
    let flat = tape.matmul(joined, w_c)?;
    let batch = tape.value(flat).dims()[0];
    if tape.value(flat).dims()[1] != n * c {
        return Err(Error::shape(
            "embed_global",
            format!("projection width {} is not N·C = {}", tape.value(flat).dims()[1], n * c),
        ));
    }
    tape.reshape(flat, &[batch * n, c]).map(Some)
}

/// `Σ_v W_v ⊙ O_v` with each `N × C` weight tiled over the batch.
pub(crate) fn t_fuse_temporal(tape: &mut Tape, outputs: &[(NodeId, NodeId)], batch: usize) -> Result<NodeId> {
    let mut acc: Option<NodeId> = None;
    for &(o, w) in outputs {
        let wt = tape.tile_rows(w, batch)?;
        let term = tape.mul(wt, o)?;
        acc = Some(match acc {
            None => term,
            Some(a) => tape.add(a, term)?,
        });
    }
    acc.ok_or_else(|| Error::InvalidArgument("no active temporal view to fuse".into()))
}

/// `f_o(post(O + O_con + σ(O_con) ⊙ O))`; without `O_con` this is `f_o(post(O))`.
pub(crate) fn t_fuse_global(
    tape: &mut Tape,
    o: NodeId,
    o_con: Option<NodeId>,
    postnet: Option<NodeId>,
    f_o: Activation,
) -> Result<NodeId> {
    let mut z = match o_con {
        Some(oc) => {
            let gate = tape.activation(oc, Activation::Sigmoid)?;
            let gated = tape.mul(gate, o)?;
            let s = tape.add(o, oc)?;
            tape.add(s, gated)?
        }
        None => o,
    };
    if let Some(w) = postnet {
        z = tape.matmul(z, w)?;
    }
    tape.activation(z, f_o)
}

pub fn sgc_layer(h: &Tensor, prop: &Arc<CsrMatrix>, w: &Tensor, f: Activation) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (h, w) = (tape.constant(h.clone()), tape.constant(w.clone()));
    let out = t_sgc(&mut tape, h, prop, w, f)?;
    Ok(tape.value(out).clone())
}

pub fn residual_unit(h: &Tensor, prop: &Arc<CsrMatrix>, w: &Tensor, f: Activation) -> Result<Tensor> {
    let (r, c) = w.shape2()?;
    if r != c {
        return Err(Error::shape("residual_unit", format!("weight {r}×{c} is not square")));
    }
    let mut tape = Tape::new();
    let (h, w) = (tape.constant(h.clone()), tape.constant(w.clone()));
    let out = t_residual(&mut tape, h, prop, w, f, true)?;
    Ok(tape.value(out).clone())
}

/// Weights of one view network.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewWeights {
    pub input: Tensor,
    pub res: Vec<Tensor>,
    pub out: Tensor,
}

/// `input` is `N × (C·l_v)`, the view's frames concatenated along columns.
pub fn view_net(input: &Tensor, prop: &Arc<CsrMatrix>, w: &ViewWeights, f: Activation, skip: bool) -> Result<Tensor> {
    if input.dims().get(1) == Some(&0) {
        return Err(Error::InvalidArgument("zero-length view has no network".into()));
    }
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let w_in = tape.constant(w.input.clone());
    let w_res: Vec<_> = w.res.iter().map(|t| tape.constant(t.clone())).collect();
    let w_out = tape.constant(w.out.clone());
    let out = t_view_net(&mut tape, x, prop, w_in, &w_res, w_out, f, skip)?;
    Ok(tape.value(out).clone())
}

/// Global-view embedding for a single instance: `ext` and `meta` are
/// `(1 × E, E × D)` input/weight pairs. Output is `N × C`.
pub fn embed_global(
    ext: Option<(&Tensor, &Tensor)>,
    meta: Option<(&Tensor, &Tensor)>,
    concat: &Tensor,
    f: Activation,
    n: usize,
    c: usize,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mut pair = |p: Option<(&Tensor, &Tensor)>| p.map(|(x, w)| (tape.constant(x.clone()), tape.constant(w.clone())));
    let (e, m) = (pair(ext), pair(meta));
    let wc = tape.constant(concat.clone());
    match t_embed(&mut tape, e, m, Some(wc), f, n, c)? {
        Some(out) => Ok(tape.value(out).clone()),
        None => Ok(Tensor::zeros(&[n, c])),
    }
}

pub fn fuse_temporal(outputs: &[&Tensor], weights: &[&Tensor]) -> Result<Tensor> {
    if outputs.len() != weights.len() {
        return Err(Error::shape(
            "fuse_temporal",
            format!("{} outputs with {} weights", outputs.len(), weights.len()),
        ));
    }
    let mut tape = Tape::new();
    let pairs: Vec<_> = outputs
        .iter()
        .zip(weights)
        .map(|(o, w)| (tape.constant((*o).clone()), tape.constant((*w).clone())))
        .collect();
    let out = t_fuse_temporal(&mut tape, &pairs, 1)?;
    Ok(tape.value(out).clone())
}

pub fn fuse_global(o: &Tensor, o_con: &Tensor, f_o: Activation) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (a, b) = (tape.constant(o.clone()), tape.constant(o_con.clone()));
    let out = t_fuse_global(&mut tape, a, Some(b), None, f_o)?;
    Ok(tape.value(out).clone())
}
