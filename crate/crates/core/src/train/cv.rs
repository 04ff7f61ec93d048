//! Repeated stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_weights, derive_seed, fit, predict_all, Example, TrainConfig};
use crate::data::embeddings::EmbeddingSet;
use crate::data::vocab::{build_vocab, encode, Vocabulary};
use crate::data::StatementPair;
use crate::error::{Error, Result};
use crate::linguistics::lexicon::{lexicon_vector, LexiconDictionary};
use crate::metrics::{aggregate, evaluate, MetricsReport, DEFAULT_THRESHOLD};
use crate::model::{Architecture, Model, ModelConfig, ModelInput, StatementInput};

/// Optional inputs shared by every run.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub lexicon: Option<LexiconDictionary>,
    /// When present, statements are read from here instead of being encoded.
    pub embeddings: Option<EmbeddingSet>,
}

impl Resources {
    /// Fills in the config fields that depend on the data resources.
    pub fn complete_config(&self, cfg: &ModelConfig, vocab: Option<&Vocabulary>) -> Result<ModelConfig> {
        let mut cfg = cfg.clone();
        if let Some(v) = vocab {
            cfg.vocab_size = v.len();
        }
        if cfg.architecture == Architecture::CoattLiwc {
            let dict = self
                .lexicon
                .as_ref()
                .ok_or_else(|| Error::config("coatt_liwc needs a lexicon dictionary"))?;
            cfg.lexicon_dim = dict.len();
        }
        if let Some(e) = &self.embeddings {
            e.check_dim(cfg.d)?;
        }
        Ok(cfg)
    }

    /// Turns a record into model inputs.
    pub fn input(&self, pair: &StatementPair, vocab: Option<&Vocabulary>, cfg: &ModelConfig) -> Result<ModelInput> {
        let (q1, q2) = match (&self.embeddings, vocab) {
            (Some(e), _) => {
                let doc = e.get(&pair.id)?;
                (StatementInput::Embedded(doc.q1.clone()), StatementInput::Embedded(doc.q2.clone()))
            }
            (None, Some(v)) => (
                StatementInput::Tokens(encode(&pair.q1, v, cfg.max_len_q1)),
                StatementInput::Tokens(encode(&pair.q2, v, cfg.max_len_q2)),
            ),
            (None, None) => return Err(Error::contract("token inputs need a vocabulary")),
        };
        let lexicon = match (cfg.architecture, &self.lexicon) {
            (Architecture::CoattLiwc, Some(d)) => Some(lexicon_vector(&pair.combined_text(), d)),
            _ => None,
        };
        Ok(ModelInput {
            q1,
            q2: Some(q2),
            lexicon,
        })
    }

    pub fn examples(&self, pairs: &[&StatementPair], vocab: Option<&Vocabulary>, cfg: &ModelConfig) -> Result<Vec<Example>> {
        pairs
            .iter()
            .map(|p| {
                Ok(Example {
                    input: self.input(p, vocab, cfg)?,
                    label: p.label,
                })
            })
            .collect()
    }

    /// Vocabulary from the given (training) records; `None` when embeddings
    /// are imported and the token path is unused.
    pub fn vocab(&self, pairs: &[&StatementPair], min_count: usize) -> Result<Option<Vocabulary>> {
        if self.embeddings.is_some() {
            return Ok(None);
        }
        let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.q1.as_str(), p.q2.as_str()]).collect();
        build_vocab(&texts, min_count).map(Some)
    }
}

/// Assigns each index a fold in `0..k`. Indices are shuffled within each
/// class, the classes are laid end to end, and folds are dealt
/// round-robin, so every fold's per-class count is within one of `n_c/k`.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::config("need at least 2 folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut pos = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::config(format!(
                "class {class} has {} examples, fewer than {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = pos % k;
            pos += 1;
        }
    }
    Ok(fold)
}

/// Splits `indices` into (train, validation) with `val_fraction` of each
/// class held out (at least one per class, never all of it).
pub fn stratified_split(indices: &[usize], labels: &[u8], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_val = ((idx.len() as f64 * val_fraction).round() as usize).clamp(1.min(idx.len()), idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub fold: usize,
    /// Seed of the repetition's fold assignment.
    pub fold_seed: u64,
    /// Seed for model initialization, split and batch order of this run.
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub final_lr: f64,
    pub best_val_loss: f64,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Ordered by (repetition, fold).
    pub runs: Vec<RunRecord>,
    pub summary: MetricsReport,
}

/// Everything a single run produces.
pub struct RunArtifacts {
    pub record: RunRecord,
    pub model: Model,
    pub vocab: Option<Vocabulary>,
}

pub fn fold_seed(base: u64, repetition: usize) -> u64 {
    derive_seed(base, 0x1000 + repetition as u64)
}

pub fn run_seed(base: u64, repetition: usize, fold: usize) -> u64 {
    derive_seed(base, ((repetition as u64) << 32) | fold as u64)
}

/// Trains and scores one (repetition, fold) run.
pub fn run_fold(
    pairs: &[StatementPair],
    folds: &[usize],
    repetition: usize,
    fold: usize,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    res: &Resources,
) -> Result<RunArtifacts> {
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let seed = run_seed(cfg.seed, repetition, fold);
    let train_part: Vec<usize> = (0..pairs.len()).filter(|&i| folds[i] != fold).collect();
    let test: Vec<usize> = (0..pairs.len()).filter(|&i| folds[i] == fold).collect();
    let (train, val) = stratified_split(&train_part, &labels, cfg.val_fraction, derive_seed(seed, 1));
    let pick = |ids: &[usize]| ids.iter().map(|&i| &pairs[i]).collect::<Vec<_>>();
    let (train_p, val_p, test_p) = (pick(&train), pick(&val), pick(&test));

    let vocab = res.vocab(&pick(&train_part), cfg.min_count)?;
    let run_cfg = res.complete_config(model_cfg, vocab.as_ref())?;
    let train_x = res.examples(&train_p, vocab.as_ref(), &run_cfg)?;
    let val_x = res.examples(&val_p, vocab.as_ref(), &run_cfg)?;
    let test_x = res.examples(&test_p, vocab.as_ref(), &run_cfg)?;

    let n_dec = train_x.iter().filter(|e| e.label == 1).count();
    let weights = class_weights(train_x.len() - n_dec, n_dec)?;
    let mut model = Model::build(&run_cfg, derive_seed(seed, 2))?;
    let history = fit(&mut model, &train_x, &val_x, cfg, &weights, derive_seed(seed, 3))?;

    let scores = predict_all(&model, &test_x)?;
    let test_labels: Vec<u8> = test_x.iter().map(|e| e.label).collect();
    let metrics = evaluate(&scores, &test_labels, DEFAULT_THRESHOLD)?;
    let record = RunRecord {
        repetition,
        fold,
        fold_seed: fold_seed(cfg.seed, repetition),
        seed,
        train_size: train_x.len(),
        val_size: val_x.len(),
        test_size: test_x.len(),
        epochs_phase1: history.phases.first().map_or(0, |p| p.epochs.len()),
        epochs_phase2: history.phases.get(1).map_or(0, |p| p.epochs.len()),
        final_lr: history.final_lr(),
        best_val_loss: history.best_val_loss(),
        metrics,
    };
    Ok(RunArtifacts { record, model, vocab })
}

/// Runs `repetitions × folds` independent trainings in parallel.
///
/// Runs whose (repetition, fold) appear in `completed` are not retrained;
/// their records are reused. `on_run` sees every newly finished run.
pub fn cross_validate<F>(
    pairs: &[StatementPair],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    res: &Resources,
    completed: &[RunRecord],
    on_run: F,
) -> Result<CvResult>
where
    F: Fn(&RunArtifacts) -> Result<()> + Sync,
{
    cfg.validate()?;
    // vocab_size is filled in per run
    let mut probe = res.complete_config(model_cfg, None)?;
    probe.vocab_size = probe.vocab_size.max(2);
    probe.validate()?;
    if let Some(e) = &res.embeddings {
        e.check_covers(pairs.iter().map(|p| p.id.as_str()))?;
    }
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let fold_maps: Vec<Vec<usize>> = (0..cfg.repetitions)
        .map(|r| stratified_folds(&labels, cfg.folds, fold_seed(cfg.seed, r)))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.repetitions)
        .flat_map(|r| (0..cfg.folds).map(move |f| (r, f)))
        .collect();
    let mut runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(r, f)| {
            if let Some(done) = completed.iter().find(|c| c.repetition == r && c.fold == f) {
                return Ok(done.clone());
            }
            let art = run_fold(pairs, &fold_maps[r], r, f, model_cfg, cfg, res)?;
            log::info!(
                "run {r}/{f}: accuracy {:.4}, {} + {} epochs",
                art.record.metrics.accuracy,
                art.record.epochs_phase1,
                art.record.epochs_phase2
            );
            on_run(&art)?;
            Ok(art.record)
        })
        .collect::<Result<_>>()?;
    runs.sort_by_key(|r| (r.repetition, r.fold));
    let rows: Vec<MetricsReport> = runs.iter().map(|r| r.metrics.clone()).collect();
    Ok(CvResult {
        summary: aggregate(&rows)?,
        runs,
    })
}
