//! Loss, optimizers, schedules, two-phase fitting and cross-validation.

pub mod cv;
pub mod optim;
pub mod schedule;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, stratified_folds, CvResult, Resources, RunRecord};
pub use optim::{Optimizer, OptimizerKind};
pub use schedule::{EarlyStopping, PlateauScheduler};

use crate::autodiff::graph::weighted_bce_value;
use crate::autodiff::{Graph, ParamStore};
use crate::error::{Error, Result};
use crate::model::{Architecture, Model, ModelInput};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_initial: f64,
    /// `None` picks Adam for `coatt_liwc` and SGD for everything else.
    pub optimizer: Option<OptimizerKind>,
    pub es_patience_phase1: usize,
    pub es_patience_phase2: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub folds: usize,
    pub repetitions: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub batch_size: usize,
    /// Safety cap on epochs per phase.
    pub max_epochs: usize,
    /// Run the second, unfrozen phase.
    pub fine_tune: bool,
    /// Minimum token frequency for the vocabulary.
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_initial: 0.001,
            optimizer: None,
            es_patience_phase1: 10,
            es_patience_phase2: 2,
            plateau_patience: 3,
            plateau_factor: 0.1,
            folds: 5,
            repetitions: 5,
            val_fraction: 0.2,
            seed: 0,
            batch_size: 16,
            max_epochs: 200,
            fine_tune: true,
            min_count: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m.to_string()));
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return fail("val_fraction must lie in (0, 1)");
        }
        if self.es_patience_phase1 == 0 || self.es_patience_phase2 == 0 || self.plateau_patience == 0 {
            return fail("patiences must be at least 1");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return fail("plateau_factor must lie in (0, 1)");
        }
        if !(self.lr_initial > 0.0 && self.lr_initial.is_finite()) {
            return fail("lr_initial must be positive");
        }
        if self.folds < 2 || self.repetitions == 0 {
            return fail("need at least 2 folds and 1 repetition");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return fail("batch_size and max_epochs must be positive");
        }
        Ok(())
    }

    pub fn optimizer_for(&self, arch: Architecture) -> OptimizerKind {
        self.optimizer.unwrap_or(match arch {
            Architecture::CoattLiwc => OptimizerKind::Adam,
            _ => OptimizerKind::Sgd,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weight_truthful: f64,
    pub weight_deceptive: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights {
        weight_truthful: 1.0,
        weight_deceptive: 1.0,
    };

    pub fn for_label(&self, label: u8) -> f64 {
        if label == 1 {
            self.weight_deceptive
        } else {
            self.weight_truthful
        }
    }
}

/// Balanced weights `w_c = (n_t + n_d) / (2·n_c)`.
pub fn class_weights(n_truthful: usize, n_deceptive: usize) -> Result<ClassWeights> {
    if n_truthful == 0 || n_deceptive == 0 {
        return Err(Error::domain("class weights need examples of both classes"));
    }
    let total = (n_truthful + n_deceptive) as f64;
    Ok(ClassWeights {
        weight_truthful: total / (2.0 * n_truthful as f64),
        weight_deceptive: total / (2.0 * n_deceptive as f64),
    })
}

/// Binary cross-entropy with the class weight of `label`; `prob` is
/// clamped to [1e-7, 1 − 1e-7].
pub fn weighted_bce(prob: f64, label: u8, weights: &ClassWeights) -> f64 {
    weighted_bce_value(prob, label as f64, weights.for_label(label))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: ModelInput,
    pub label: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Encoder frozen.
    Frozen,
    /// Everything trainable.
    FineTune,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseHistory {
    pub phase: Phase,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Learning rate after the last scheduler update.
    pub final_lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub phases: Vec<PhaseHistory>,
}

impl History {
    pub fn epochs_run(&self) -> usize {
        self.phases.iter().map(|p| p.epochs.len()).sum()
    }

    pub fn final_lr(&self) -> f64 {
        self.phases.last().map_or(0.0, |p| p.final_lr)
    }

    pub fn best_val_loss(&self) -> f64 {
        self.phases.last().map_or(f64::INFINITY, |p| p.best_val_loss)
    }
}

/// Mean unweighted loss over a set.
pub fn mean_loss(model: &Model, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let p = model.predict(&ex.input)?;
        total += weighted_bce(p, ex.label, &ClassWeights::UNIT);
    }
    Ok(total / examples.len() as f64)
}

pub fn predict_all(model: &Model, examples: &[Example]) -> Result<Vec<f64>> {
    examples.iter().map(|ex| model.predict(&ex.input)).collect()
}

/// One optimizer step on the mean weighted loss of `batch`. Returns the
/// mean weighted loss before the update.
pub fn train_step(
    model: &mut Model,
    batch: &[&Example],
    weights: &ClassWeights,
    optimizer: &mut Optimizer,
    lr: f64,
) -> Result<f64> {
    let mut g = Graph::new();
    let mut losses = Vec::with_capacity(batch.len());
    for ex in batch {
        let vars = model.forward_graph(&mut g, model.params(), &ex.input)?;
        losses.push(g.bce(vars.probability, ex.label as f64, weights.for_label(ex.label))?);
    }
    let total = g.sum(&losses)?;
    let loss = g.scale(total, 1.0 / batch.len() as f64);
    let value = g.scalar(loss);
    let grads = g.backward(loss)?;
    let store = model.params_mut();
    store.zero_grad();
    grads.accumulate_into(store)?;
    optimizer.step(store, lr)?;
    Ok(value)
}

/// Trains until early stopping (or the epoch cap) and restores the
/// weights with the lowest validation loss.
#[allow(clippy::too_many_arguments)]
pub fn fit_phase(
    model: &mut Model,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    weights: &ClassWeights,
    phase: Phase,
    rng: &mut ChaCha8Rng,
) -> Result<PhaseHistory> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::config("training and validation splits must be non-empty"));
    }
    model.set_encoder_frozen(phase == Phase::Frozen);
    let patience = match phase {
        Phase::Frozen => cfg.es_patience_phase1,
        Phase::FineTune => cfg.es_patience_phase2,
    };
    let mut optimizer = Optimizer::new(cfg.optimizer_for(model.architecture()));
    let mut stopper = EarlyStopping::new(patience);
    let mut plateau = PlateauScheduler::new(cfg.plateau_patience, cfg.plateau_factor);
    let mut lr = cfg.lr_initial;
    let mut best: Option<ParamStore> = None;
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            train_loss += train_step(model, &batch, weights, &mut optimizer, lr)? * batch.len() as f64;
        }
        train_loss /= train.len() as f64;
        let val_loss = mean_loss(model, val)?;
        log::debug!("{phase:?} epoch {epoch}: train {train_loss:.5} val {val_loss:.5} lr {lr:e}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        let decision = stopper.update(val_loss);
        if decision.improved {
            best = Some(model.params().clone());
        }
        lr = plateau.update(val_loss, lr);
        if decision.stop {
            stopped_early = true;
            break;
        }
    }
    if let Some(best) = best {
        model.params_mut().copy_values_from(&best)?;
    }
    model.set_encoder_frozen(false);
    Ok(PhaseHistory {
        phase,
        epochs,
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best(),
        stopped_early,
        final_lr: lr,
    })
}

/// Frozen-encoder phase, then (if enabled) the fine-tuning phase. Each
/// phase starts from `lr_initial` with a fresh optimizer.
pub fn fit(
    model: &mut Model,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    weights: &ClassWeights,
    seed: u64,
) -> Result<History> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phases = vec![fit_phase(model, train, val, cfg, weights, Phase::Frozen, &mut rng)?];
    if cfg.fine_tune {
        phases.push(fit_phase(model, train, val, cfg, weights, Phase::FineTune, &mut rng)?);
    }
    model.mark_trained();
    Ok(History { phases })
}

/// Mixes a base seed with a tag (splitmix64 finalizer).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
