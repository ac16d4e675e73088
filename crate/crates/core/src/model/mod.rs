//! The multi-view graph convolutional network: per-view GCN stacks with
//! residual units, global-view embeddings, parametric-matrix fusion with a
//! sigmoid gate, Huber training with Adam and early stopping.

mod checkpoint;
mod forward;
mod ops;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataprep::{View, VIEWS};
use crate::error::{Error, Result};
use crate::numkit::{Activation, Tensor};

pub use checkpoint::{load_checkpoint, read_predictions, save_checkpoint, write_predictions, Checkpoint, PredictionRow};
pub use forward::{forward, forward_batch, loss_and_gradients, predict, Batch, PropCache};
pub use ops::{embed_global, fuse_global, fuse_temporal, residual_unit, sgc_layer, view_net, ViewWeights};
pub use train::{train, train_from, EarlyStopping, StopReason, TrainReport};

pub use crate::numkit::loss::huber;

/// Optional trainable layer between fusion and the output activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostNet {
    None,
    Linear,
}

impl PostNet {
    pub fn name(self) -> &'static str {
        match self {
            PostNet::None => "none",
            PostNet::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(PostNet::None),
            "linear" => Some(PostNet::Linear),
            _ => None,
        }
    }
}

/// Hyperparameters of the network and its training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub residual_units: usize,
    /// Skip connections in the middle layers; `false` gives a plain stack of
    /// the same depth.
    pub residual: bool,
    pub hidden_act: Activation,
    pub output_act: Activation,
    pub embed_width: usize,
    pub use_external: bool,
    pub use_meta: bool,
    pub postnet: PostNet,
    pub delta: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 32,
            residual_units: 3,
            residual: true,
            hidden_act: Activation::Relu,
            output_act: Activation::Tanh,
            embed_width: 10,
            use_external: true,
            use_meta: true,
            postnet: PostNet::None,
            delta: 1.0,
            lr: 3e-4,
            batch_size: 32,
            max_epochs: 500,
            patience: 50,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.hidden == 0 || self.embed_width == 0 {
            return bad("layer widths must be at least 1".into());
        }
        if self.residual_units == 0 {
            return bad("at least one residual unit is required".into());
        }
        if !(self.delta > 0.0) {
            return bad(format!("huber delta must be positive, got {}", self.delta));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch size and epoch budget must be at least 1".into());
        }
        Ok(())
    }

    /// Stable text form, hashed into checkpoint headers.
    pub fn canonical(&self) -> String {
        format!(
            "hidden={};residual_units={};residual={};hidden_act={};output_act={};embed_width={};use_external={};use_meta={};postnet={};delta={:?};lr={:?};batch_size={};max_epochs={};patience={};seed={}",
            self.hidden,
            self.residual_units,
            self.residual,
            self.hidden_act.name(),
            self.output_act.name(),
            self.embed_width,
            self.use_external,
            self.use_meta,
            self.postnet.name(),
            self.delta,
            self.lr,
            self.batch_size,
            self.max_epochs,
            self.patience,
            self.seed
        )
    }
}

/// Tensor shapes of a model instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub n: usize,
    pub c: usize,
    pub view_lengths: [usize; 5],
    /// 0 disables the external embedding.
    pub ext_width: usize,
    /// 0 disables the meta embedding.
    pub meta_width: usize,
    pub hidden: usize,
    pub residual_units: usize,
    pub embed_width: usize,
    pub postnet: PostNet,
}

impl ModelSpec {
    pub fn new(n: usize, c: usize, view_lengths: [usize; 5], ext_width: usize, meta_width: usize, cfg: &ModelConfig) -> Self {
        ModelSpec {
            n,
            c,
            view_lengths,
            ext_width: if cfg.use_external { ext_width } else { 0 },
            meta_width: if cfg.use_meta { meta_width } else { 0 },
            hidden: cfg.hidden,
            residual_units: cfg.residual_units,
            embed_width: cfg.embed_width,
            postnet: cfg.postnet,
        }
    }

    pub fn active_views(&self) -> Vec<View> {
        VIEWS.into_iter().filter(|v| self.view_lengths[v.index()] > 0).collect()
    }

    pub fn embed_count(&self) -> usize {
        usize::from(self.ext_width > 0) + usize::from(self.meta_width > 0)
    }

    /// Parameter names and dims in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let (f, c) = (self.hidden, self.c);
        let mut out = Vec::new();
        for v in self.active_views() {
            let name = v.name();
            out.push((format!("view.{name}.in"), vec![c * self.view_lengths[v.index()], f]));
            for m in 0..self.residual_units {
                out.push((format!("view.{name}.res{m}"), vec![f, f]));
            }
            out.push((format!("view.{name}.out"), vec![f, c]));
        }
        for v in self.active_views() {
            out.push((format!("fusion.{}", v.name()), vec![self.n, c]));
        }
        if self.ext_width > 0 {
            out.push(("embed.ext".into(), vec![self.ext_width, self.embed_width]));
        }
        if self.meta_width > 0 {
            out.push(("embed.meta".into(), vec![self.meta_width, self.embed_width]));
        }
        if self.embed_count() > 0 {
            out.push(("embed.concat".into(), vec![self.embed_width * self.embed_count(), self.n * c]));
        }
        if self.postnet == PostNet::Linear {
            out.push(("postnet".into(), vec![c, c]));
        }
        out
    }
}

/// Parameter indices of one view network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ViewSlots {
    pub input: usize,
    pub res: Vec<usize>,
    pub out: usize,
}

/// Where each logical weight lives in [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Slots {
    pub views: [Option<ViewSlots>; 5],
    pub fusion: [Option<usize>; 5],
    pub ext: Option<usize>,
    pub meta: Option<usize>,
    pub concat: Option<usize>,
    pub postnet: Option<usize>,
}

/// Trainable tensors Θ with their names, in [`ModelSpec::layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let (names, tensors) = spec.layout().into_iter().map(|(n, d)| (n, Tensor::zeros(&d))).unzip();
        ModelParams {
            spec: spec.clone(),
            names,
            tensors,
        }
    }

    /// Glorot-uniform weights; fusion matrices start at `1 / #views` and the
    /// post-net at identity.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fusion_value = 1.0 / spec.active_views().len().max(1) as f64;
        let mut p = Self::zeros(spec);
        for (name, t) in p.names.iter().zip(p.tensors.iter_mut()) {
            if name.starts_with("fusion.") {
                *t = Tensor::filled(t.dims(), fusion_value);
            } else if name == "postnet" {
                *t = Tensor::eye(spec.c);
            } else {
                let (fan_in, fan_out) = (t.dims()[0], t.dims()[1]);
                let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
                for v in t.data_mut() {
                    *v = rng.gen_range(-limit..=limit);
                }
            }
        }
        p
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index_of(name).map(|i| &mut self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub(crate) fn slots(&self) -> Slots {
        let idx = |n: String| self.index_of(&n);
        let mut views: [Option<ViewSlots>; 5] = Default::default();
        let mut fusion = [None; 5];
        for v in self.spec.active_views() {
            let name = v.name();
            views[v.index()] = Some(ViewSlots {
                input: idx(format!("view.{name}.in")).expect("layout"),
                res: (0..self.spec.residual_units)
                    .map(|m| idx(format!("view.{name}.res{m}")).expect("layout"))
                    .collect(),
                out: idx(format!("view.{name}.out")).expect("layout"),
            });
            fusion[v.index()] = idx(format!("fusion.{name}"));
        }
        Slots {
            views,
            fusion,
            ext: idx("embed.ext".into()),
            meta: idx("embed.meta".into()),
            concat: idx("embed.concat".into()),
            postnet: idx("postnet".into()),
        }
    }
}
