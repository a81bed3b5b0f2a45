//! Minibatch SGD-with-momentum loop shared by the language model and the
//! tagger, with per-epoch dev selection.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{make_batches, Replacement};
use crate::error::{Error, Result};
use crate::nncore::{
    finite_difference_check, sgd_momentum_step, GradCheckOptions, GradCheckReport, LossMode, NodeId,
    ParamStore, Tape,
};
use crate::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch_sentences: usize,
    pub singleton_unk_prob: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub grad_scale: GradScale,
    /// Joint gradient-norm ceiling applied after scaling.
    pub clip_norm: Option<f64>,
}

/// Factor applied to the gradient of the summed batch loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradScale {
    Sum,
    PerSentence,
    PerPrediction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.2,
            momentum: 0.95,
            batch_sentences: 100,
            singleton_unk_prob: 0.5,
            max_epochs: 30,
            seed: 1,
            grad_scale: GradScale::Sum,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a nonnegative number");
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.singleton_unk_prob) {
            return bad("singleton_unk_prob must be in [0, 1]");
        }
        if self.clip_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return bad("clip_norm must be positive");
        }
        if self.batch_sentences == 0 || self.max_epochs == 0 {
            return bad("batch_sentences and max_epochs must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training-mode loss per prediction over the epoch.
    pub train_loss: f64,
    pub dev_metric: f64,
    pub seconds: f64,
    pub words_per_sec: f64,
}

impl EpochRecord {
    pub fn train_perplexity(&self) -> f64 {
        self.train_loss.exp()
    }

    /// `epoch  train-loss  dev-metric  seconds  words/sec`, tab-separated.
    pub fn tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.3}\t{:.1}",
            self.epoch, self.train_loss, self.dev_metric, self.seconds, self.words_per_sec
        )
    }
}

/// Selected epoch and its dev metric, stored with the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub best_epoch: usize,
    pub dev_metric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_metric: f64,
}

/// Direction of a dev metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Lower,
    Higher,
}

/// One minibatch worth of recorded computation.
pub struct BatchGraph {
    pub tape: Tape,
    pub loss: NodeId,
    pub predictions: usize,
    pub tokens: usize,
    pub compositions: usize,
}

pub(crate) trait Trainable {
    type Example;

    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    fn batch_graph(&self, batch: &[&Self::Example], replace: Option<&mut Replacement<'_>>, memoize: bool) -> Result<BatchGraph>;
    fn dev_metric(&self, dev: &[Self::Example]) -> Result<f64>;
    fn selection(&self) -> Selection;
}

/// Runs `cfg.max_epochs` epochs and leaves the model at the best dev epoch
/// (ties keep the earlier one). Gradients of the summed batch loss are
/// divided by the number of predictions in the batch before each update.
pub(crate) fn train<M: Trainable>(
    model: &mut M,
    cfg: &TrainConfig,
    train: &[M::Example],
    dev: &[M::Example],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::EmptyInput("training or dev corpus"));
    }
    // Distinct stream from the initializer, which consumed `seed` itself.
    let mut rng = seeded_rng(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut best: Option<(usize, f64, Vec<crate::nncore::Tensor>)> = None;
    let mut epochs = Vec::with_capacity(cfg.max_epochs);

    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        let batches = make_batches(train, cfg.batch_sentences, &mut rng);
        let (mut loss_sum, mut predictions, mut tokens) = (0.0, 0usize, 0usize);
        for (bi, batch) in batches.iter().enumerate() {
            let mut replace = Replacement {
                rng: &mut rng,
                prob: cfg.singleton_unk_prob,
            };
            let graph = model
                .batch_graph(batch, Some(&mut replace), true)
                .map_err(|e| diverged(e, epoch, bi + 1))?;
            let loss = graph.tape.value(graph.loss).data()[0];
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi + 1,
                    loss,
                });
            }
            loss_sum += loss;
            predictions += graph.predictions;
            tokens += graph.tokens;
            let store = model.store_mut();
            graph.tape.backward(graph.loss, store)?;
            match cfg.grad_scale {
                GradScale::Sum => {}
                GradScale::PerSentence => store.scale_grads(1.0 / batch.len() as f64),
                GradScale::PerPrediction => store.scale_grads(1.0 / graph.predictions as f64),
            }
            if let Some(c) = cfg.clip_norm {
                store.clip_grad_norm(c);
            }
            sgd_momentum_step(store, cfg.lr, cfg.momentum);
        }
        let dev_metric = model.dev_metric(dev).map_err(|e| diverged(e, epoch, batches.len()))?;
        let seconds = start.elapsed().as_secs_f64();
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / predictions as f64,
            dev_metric,
            seconds,
            words_per_sec: tokens as f64 / seconds.max(1e-9),
        };
        log::info!("epoch {}", record.tsv());
        on_epoch(&record);
        epochs.push(record);

        let improved = match (&best, model.selection()) {
            (None, _) => true,
            (Some((_, b, _)), Selection::Lower) => dev_metric < *b,
            (Some((_, b, _)), Selection::Higher) => dev_metric > *b,
        };
        if improved {
            best = Some((epoch, dev_metric, model.store().snapshot()));
        }
    }

    let (best_epoch, best_dev_metric, values) = best.expect("at least one epoch");
    model.store_mut().restore(&values);
    Ok(TrainLog {
        epochs,
        best_epoch,
        best_dev_metric,
    })
}

/// A non-finite value anywhere in the forward pass means the parameters
/// have blown up; report it against the batch that produced it.
fn diverged(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::Divergence {
            epoch,
            batch,
            loss: f64::NAN,
        },
        e => e,
    }
}

/// Finite-difference check of the full evaluation-mode batch loss of
/// `model`. `tamper` runs on the store right after the analytic backward
/// pass (a hook for testing the checker itself).
pub(crate) fn check_gradients<M: Trainable>(
    model: &mut M,
    batch: &[&M::Example],
    opts: &GradCheckOptions,
    mut tamper: impl FnMut(&mut ParamStore),
) -> Result<GradCheckReport> {
    let mut store = std::mem::take(model.store_mut());
    let result = finite_difference_check(
        &mut store,
        |s, mode| {
            std::mem::swap(model.store_mut(), s);
            let out = (|| {
                let g = model.batch_graph(batch, None, true)?;
                if mode == LossMode::WithGradients {
                    g.tape.backward(g.loss, model.store_mut())?;
                    tamper(model.store_mut());
                }
                Ok(g.tape.value(g.loss).data()[0])
            })();
            std::mem::swap(model.store_mut(), s);
            out
        },
        opts,
    );
    *model.store_mut() = store;
    result
}
