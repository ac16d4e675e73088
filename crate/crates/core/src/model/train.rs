use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::forward::{predict, record, Batch, PropCache};
use super::{ModelConfig, ModelParams, ModelSpec};
use crate::dataprep::TrainingInstance;
use crate::error::{Error, Result};
use crate::numkit::{adam_step, AdamState, CsrMatrix, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::Patience => "patience",
        }
    }
}

/// Per-epoch history of a training run. Losses are mean Huber per element,
/// validation RMSE is in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_rmse: Vec<f64>,
    pub best_epoch: usize,
    pub stop: StopReason,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    pub fn final_train_loss(&self) -> f64 {
        *self.train_loss.last().expect("at least one epoch")
    }

    pub fn best_val_rmse(&self) -> f64 {
        self.val_rmse[self.best_epoch]
    }
}

/// Patience counter: a strictly lower metric resets it.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
        }
    }

    /// Records the metric of the next epoch; returns true if it is a new best.
    pub fn update(&mut self, metric: f64) -> bool {
        let improved = metric < self.best;
        if improved {
            self.best = metric;
            self.best_epoch = self.epoch;
        }
        self.epoch += 1;
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.epoch > 0 && self.epoch - 1 - self.best_epoch >= self.patience
    }
}

fn scaled_rmse(preds: &[crate::numkit::Tensor], data: &[TrainingInstance]) -> f64 {
    let mut sq = 0.0;
    let mut count = 0usize;
    for (p, inst) in preds.iter().zip(data) {
        for (a, b) in p.data().iter().zip(inst.target.data()) {
            sq += (a - b) * (a - b);
            count += 1;
        }
    }
    (sq / count as f64).sqrt()
}

/// Mini-batch Adam on the summed Huber loss with early stopping on validation
/// RMSE. Returns the parameters from the best validation epoch.
pub fn train(
    train_set: &[TrainingInstance],
    val_set: &[TrainingInstance],
    spec: &ModelSpec,
    prop: Arc<CsrMatrix>,
    cfg: &ModelConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_from(ModelParams::init(spec, cfg.seed), train_set, val_set, prop, cfg)
}

/// [`train`] starting from given parameters.
pub fn train_from(
    mut params: ModelParams,
    train_set: &[TrainingInstance],
    val_set: &[TrainingInstance],
    prop: Arc<CsrMatrix>,
    cfg: &ModelConfig,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("training and validation splits must be non-empty".into()));
    }
    let slots = params.slots();
    let dims: Vec<Vec<usize>> = params.tensors.iter().map(|t| t.dims().to_vec()).collect();
    let dim_refs: Vec<&[usize]> = dims.iter().map(Vec::as_slice).collect();
    let mut props = PropCache::new(prop);
    let mut adam = AdamState::new(&params.tensors);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let per_instance = (params.spec.n * params.spec.c) as f64;

    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_rmse: Vec::new(),
        best_epoch: 0,
        stop: StopReason::MaxEpochs,
    };
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let members: Vec<&TrainingInstance> = chunk.iter().map(|&k| &train_set[k]).collect();
            let batch = Batch::new(&members, &params)?;
            let mut tape = Tape::new();
            let prop_b = props.get(batch.size);
            let pred = record(&mut tape, &params, &slots, &batch, &prop_b, cfg)?;
            let loss = match tape.huber_sum(pred, Arc::clone(&batch.target), cfg.delta) {
                Ok(l) => l,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            total += tape.value(loss).data()[0];
            let grads = tape.backward(loss)?.into_dense(&dim_refs);
            adam_step(&mut params.tensors, &grads, &mut adam, cfg.lr)?;
        }
        let mean_loss = total / (train_set.len() as f64 * per_instance);
        if !mean_loss.is_finite() || params.tensors.iter().any(|t| !t.all_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let val = scaled_rmse(&predict(&params, val_set, &mut props, cfg)?, val_set);
        if !val.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.train_loss.push(mean_loss);
        report.val_rmse.push(val);
        if stopper.update(val) {
            best.tensors.clone_from(&params.tensors);
        }
        log::debug!("epoch {epoch}: train loss {mean_loss:.6}, val rmse {val:.6}");
        if stopper.should_stop() {
            report.stop = StopReason::Patience;
            break;
        }
    }
    report.best_epoch = stopper.best_epoch;
    log::info!(
        "trained {} epochs ({}), best epoch {} with val rmse {:.6}",
        report.epochs(),
        report.stop.name(),
        report.best_epoch,
        report.best_val_rmse()
    );
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_metric_stops_exactly_patience_after_best() {
        let mut s = EarlyStopping::new(50);
        let mut epochs = 0;
        loop {
            s.update(1.0);
            epochs += 1;
            if s.should_stop() {
                break;
            }
        }
        assert_eq!(s.best_epoch, 0);
        assert_eq!(epochs - 1, 50);
    }

    #[test]
    fn improvement_resets_counter() {
        let mut s = EarlyStopping::new(2);
        for m in [3.0, 2.0, 2.0, 1.5, 1.5] {
            s.update(m);
            assert!(!s.should_stop());
        }
        s.update(1.5);
        assert!(s.should_stop());
        assert_eq!(s.best_epoch, 3);
    }
}
