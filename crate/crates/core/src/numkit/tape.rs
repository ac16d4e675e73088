//! Reverse-mode differentiation over a recorded list of tensor primitives.
//!
//! A [`Tape`] is built fresh for every forward pass. Each primitive stores its
//! output, and nodes are appended in evaluation order, so node `k` only ever
//! references nodes `< k`. [`Tape::backward`] walks the list in reverse.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numkit::loss::{huber, huber_grad};
use crate::numkit::sparse::{spmm, spmm_t, CsrMatrix};
use crate::numkit::tensor::{self, matmul, matmul_nt, matmul_tn, Activation, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    /// Trainable leaf, keyed by the caller's parameter index.
    Param(usize),
    Constant,
    MatMul(NodeId, NodeId),
    SpMM(Arc<CsrMatrix>, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Act(NodeId, Activation),
    TileRows(NodeId, usize),
    Reshape(NodeId),
    ConcatCols(NodeId, NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    HuberSum {
        pred: NodeId,
        target: Arc<Tensor>,
        delta: f64,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by parameter index.
#[derive(Debug, Clone)]
pub struct Gradients {
    params: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for parameter `index`; `None` when the loss does not reach it.
    pub fn param(&self, index: usize) -> Option<&Tensor> {
        self.params.get(index).and_then(|g| g.as_ref())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Dense gradient list for `dims`, zero-filling parameters the loss did not touch.
    pub fn into_dense(self, dims: &[&[usize]]) -> Vec<Tensor> {
        let mut params = self.params;
        dims.iter()
            .enumerate()
            .map(|(i, d)| {
                params
                    .get_mut(i)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(d))
            })
            .collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(id.0))
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let needs_grad = match &op {
            Op::Param(_) => true,
            Op::Constant => false,
            other => inputs(other).iter().any(|i| self.nodes[i.0].needs_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn param(&mut self, index: usize, value: Tensor) -> NodeId {
        self.push(Op::Param(index), value)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    fn record(&mut self, op: Op) -> Result<NodeId> {
        for i in inputs(&op) {
            self.check(i)?;
        }
        let value = evaluate(&op, |id| &self.nodes[id.0].value)?;
        Ok(self.push(op, value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::MatMul(a, b))
    }

    pub fn spmm(&mut self, s: &Arc<CsrMatrix>, x: NodeId) -> Result<NodeId> {
        self.record(Op::SpMM(Arc::clone(s), x))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Mul(a, b))
    }

    pub fn activation(&mut self, x: NodeId, kind: Activation) -> Result<NodeId> {
        if kind == Activation::Identity {
            self.check(x)?;
            return Ok(x);
        }
        self.record(Op::Act(x, kind))
    }

    pub fn tile_rows(&mut self, x: NodeId, times: usize) -> Result<NodeId> {
        if times == 1 {
            self.check(x)?;
            return Ok(x);
        }
        self.record(Op::TileRows(x, times))
    }

    pub fn reshape(&mut self, x: NodeId, dims: &[usize]) -> Result<NodeId> {
        self.check(x)?;
        let value = self.nodes[x.0].value.reshape(dims)?;
        Ok(self.push(Op::Reshape(x), value))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::ConcatCols(a, b))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.record(Op::Scale(x, factor))
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::Sum(x))
    }

    /// Scalar `Σ huber(target − pred)` over every element.
    pub fn huber_sum(&mut self, pred: NodeId, target: Arc<Tensor>, delta: f64) -> Result<NodeId> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("huber delta must be positive, got {delta}")));
        }
        self.record(Op::HuberSum {
            pred,
            target,
            delta,
        })
    }

    /// Recomputes every node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        self.replay_inner(|_| None)
    }

    /// Recomputes every node with parameter leaves replaced by `params[index]`.
    pub fn replay_with(&self, params: &[Tensor]) -> Result<Vec<Tensor>> {
        self.replay_inner(|i| params.get(i))
    }

    fn replay_inner<'p>(&self, lookup: impl Fn(usize) -> Option<&'p Tensor>) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.op {
                Op::Constant => node.value.clone(),
                Op::Param(i) => match lookup(*i) {
                    Some(p) => {
                        p.check_same_dims(&node.value, "replay_with")?;
                        p.clone()
                    }
                    None => node.value.clone(),
                },
                Op::Reshape(x) => values[x.0].reshape(node.value.dims())?,
                op => evaluate(op, |id| &values[id.0])?,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse pass from a scalar node. The tape itself is not modified.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        self.check(loss)?;
        let seed = &self.nodes[loss.0].value;
        if !seed.is_scalar() {
            return Err(Error::NonScalarSeed(seed.dims().to_vec()));
        }
        let n_params = self
            .nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Param(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let mut params: Vec<Option<Tensor>> = vec![None; n_params];
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(seed.dims(), 1.0));

        for k in (0..=loss.0).rev() {
            let Some(g) = grads[k].take() else { continue };
            let node = &self.nodes[k];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Param(i) => accumulate(&mut params[*i], g),
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        let ga = matmul_nt(&g, &self.nodes[b.0].value)?;
                        accumulate(&mut grads[a.0], ga);
                    }
                    if self.nodes[b.0].needs_grad {
                        let gb = matmul_tn(&self.nodes[a.0].value, &g)?;
                        accumulate(&mut grads[b.0], gb);
                    }
                }
                Op::SpMM(s, x) => {
                    if self.nodes[x.0].needs_grad {
                        accumulate(&mut grads[x.0], spmm_t(s, &g)?);
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[b.0].needs_grad {
                        accumulate(&mut grads[b.0], g.clone());
                    }
                    if self.nodes[a.0].needs_grad {
                        accumulate(&mut grads[a.0], g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        let ga = tensor::hadamard(&g, &self.nodes[b.0].value)?;
                        accumulate(&mut grads[a.0], ga);
                    }
                    if self.nodes[b.0].needs_grad {
                        let gb = tensor::hadamard(&g, &self.nodes[a.0].value)?;
                        accumulate(&mut grads[b.0], gb);
                    }
                }
                Op::Act(x, kind) => {
                    let mut gx = g;
                    for (gv, &y) in gx.data_mut().iter_mut().zip(node.value.data()) {
                        *gv *= kind.grad_from_output(y);
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::TileRows(x, times) => {
                    let src = &self.nodes[x.0].value;
                    let block = src.len();
                    let mut gx = Tensor::zeros(src.dims());
                    for b in 0..*times {
                        for (o, v) in gx
                            .data_mut()
                            .iter_mut()
                            .zip(&g.data()[b * block..(b + 1) * block])
                        {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Reshape(x) => {
                    let gx = g.reshape(self.nodes[x.0].value.dims())?;
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ConcatCols(a, b) => {
                    let (rows, ca) = self.nodes[a.0].value.shape2()?;
                    let (_, cb) = self.nodes[b.0].value.shape2()?;
                    let w = ca + cb;
                    if self.nodes[a.0].needs_grad {
                        let mut ga = Vec::with_capacity(rows * ca);
                        for r in 0..rows {
                            ga.extend_from_slice(&g.data()[r * w..r * w + ca]);
                        }
                        accumulate(&mut grads[a.0], Tensor::new(vec![rows, ca], ga)?);
                    }
                    if self.nodes[b.0].needs_grad {
                        let mut gb = Vec::with_capacity(rows * cb);
                        for r in 0..rows {
                            gb.extend_from_slice(&g.data()[r * w + ca..(r + 1) * w]);
                        }
                        accumulate(&mut grads[b.0], Tensor::new(vec![rows, cb], gb)?);
                    }
                }
                Op::Scale(x, f) => accumulate(&mut grads[x.0], g.map(|v| v * f)),
                Op::Sum(x) => {
                    let gx = Tensor::filled(self.nodes[x.0].value.dims(), g.data()[0]);
                    accumulate(&mut grads[x.0], gx);
                }
                Op::HuberSum {
                    pred,
                    target,
                    delta,
                } => {
                    let seed = g.data()[0];
                    let p = &self.nodes[pred.0].value;
                    let gp = Tensor::new(
                        p.dims().to_vec(),
                        p.data()
                            .iter()
                            .zip(target.data())
                            .map(|(&xh, &x)| seed * huber_grad(x, xh, *delta))
                            .collect(),
                    )?;
                    accumulate(&mut grads[pred.0], gp);
                }
            }
        }
        Ok(Gradients { params })
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn inputs(op: &Op) -> Vec<NodeId> {
    match op {
        Op::Param(_) | Op::Constant => vec![],
        Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::ConcatCols(a, b) => vec![*a, *b],
        Op::SpMM(_, x)
        | Op::Act(x, _)
        | Op::TileRows(x, _)
        | Op::Reshape(x)
        | Op::Scale(x, _)
        | Op::Sum(x) => vec![*x],
        Op::HuberSum { pred, .. } => vec![*pred],
    }
}

/// Forward kernel for every non-leaf op except `Reshape`, which needs target dims.
fn evaluate<'a>(op: &Op, value: impl Fn(NodeId) -> &'a Tensor) -> Result<Tensor> {
    Ok(match op {
        Op::MatMul(a, b) => matmul(value(*a), value(*b))?,
        Op::SpMM(s, x) => spmm(s, value(*x))?,
        Op::Add(a, b) => tensor::add(value(*a), value(*b))?,
        Op::Mul(a, b) => tensor::hadamard(value(*a), value(*b))?,
        Op::Act(x, kind) => tensor::apply_activation(value(*x), *kind),
        Op::TileRows(x, times) => tensor::tile_rows(value(*x), *times)?,
        Op::ConcatCols(a, b) => tensor::concat_cols(value(*a), value(*b))?,
        Op::Scale(x, f) => value(*x).map(|v| v * f),
        Op::Sum(x) => Tensor::scalar(value(*x).sum()),
        Op::HuberSum {
            pred,
            target,
            delta,
        } => {
            let p = value(*pred);
            p.check_same_dims(target, "huber_sum")?;
            let total: f64 = p
                .data()
                .iter()
                .zip(target.data())
                .map(|(&xh, &x)| huber(x, xh, *delta))
                .sum();
            if !total.is_finite() {
                return Err(Error::NonFinite("huber_sum"));
            }
            Tensor::scalar(total)
        }
        Op::Param(_) | Op::Constant | Op::Reshape(_) => {
            unreachable!("leaves and reshape are not evaluated here")
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::finite_diff_grad;

    #[test]
    fn square_has_gradient_six_at_three() {
        let mut tape = Tape::new();
        let x = tape.param(0, Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.param(0).unwrap().data(), &[6.0]);
        let fd = finite_diff_grad(|t| t.data()[0] * t.data()[0], &Tensor::scalar(3.0), 1e-5);
        assert!((fd.data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_subgraph_has_zero_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(0, Tensor::filled(&[2, 2], 0.7));
        let c = tape.constant(Tensor::filled(&[2, 2], 2.0));
        let cc = tape.mul(c, c).unwrap();
        let s = tape.sum(cc).unwrap();
        let ps = tape.sum(p).unwrap();
        let zero = tape.scale(ps, 0.0).unwrap();
        let total = tape.add(s, zero).unwrap();
        let g = tape.backward(total).unwrap();
        assert!(g.param(0).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_non_scalar_and_unknown_nodes() {
        let mut tape = Tape::new();
        let p = tape.param(0, Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.backward(p), Err(Error::NonScalarSeed(_))));
        assert!(matches!(tape.backward(NodeId(99)), Err(Error::UnknownNode(99))));
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let mut tape = Tape::new();
        let w = tape.param(0, Tensor::from_rows(&[&[0.3, -0.2], &[0.1, 0.9]]));
        let x = tape.constant(Tensor::from_rows(&[&[1.0, 2.0], &[-1.0, 0.5]]));
        let h = tape.matmul(x, w).unwrap();
        let a = tape.activation(h, Activation::Tanh).unwrap();
        let r = tape.reshape(a, &[4, 1]).unwrap();
        let s = tape.sum(r).unwrap();
        let replayed = tape.replay().unwrap();
        assert_eq!(replayed.len(), tape.len());
        for (i, v) in replayed.iter().enumerate() {
            assert_eq!(v, &tape.nodes[i].value);
        }
        assert_eq!(replayed[s.0].data(), tape.value(s).data());
    }

    #[test]
    fn shared_parameter_accumulates() {
        let mut tape = Tape::new();
        let a = tape.param(0, Tensor::scalar(2.0));
        let b = tape.param(0, Tensor::scalar(2.0));
        let y = tape.add(a, b).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.param(0).unwrap().data(), &[2.0]);
    }
}
