//! Local explanations for pair classifiers: drop tokens, query the model,
//! fit a locality-weighted sparse linear surrogate.

pub mod html;
pub mod lime;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::vocab::{encode, Vocabulary};
use crate::error::{Error, Result};
use crate::linguistics::lexicon::lexicon_vector;
use crate::linguistics::LexiconDictionary;
use crate::model::{Model, ModelInput, Statement, StatementInput};
use crate::text::tokenize;

pub use lime::{fit_surrogate, perturb, proximity, PerturbationSample, Surrogate};

pub const CLASS_NAMES: [&str; 2] = ["truthful", "deceptive"];

/// Anything that maps a statement pair to P(deceptive).
pub trait PairScorer: Sync {
    fn score(&self, q1: &str, q2: &str) -> Result<f64>;

    /// Whether the second statement is read at all.
    fn paired(&self) -> bool {
        true
    }
}

impl<F> PairScorer for F
where
    F: Fn(&str, &str) -> Result<f64> + Sync,
{
    fn score(&self, q1: &str, q2: &str) -> Result<f64> {
        self(q1, q2)
    }
}

/// Scores raw text with a trained token model.
pub struct ModelScorer<'a> {
    model: &'a Model,
    vocab: &'a Vocabulary,
    lexicon: Option<&'a LexiconDictionary>,
}

impl<'a> ModelScorer<'a> {
    pub fn new(model: &'a Model, vocab: &'a Vocabulary, lexicon: Option<&'a LexiconDictionary>) -> Result<Self> {
        if !model.is_trained() {
            return Err(Error::contract("cannot explain an untrained model"));
        }
        let cfg = model.config();
        if vocab.len() != cfg.vocab_size {
            return Err(Error::contract(format!(
                "vocabulary has {} entries, model was built for {}",
                vocab.len(),
                cfg.vocab_size
            )));
        }
        match (cfg.lexicon_dim, lexicon) {
            (0, _) => {}
            (n, Some(d)) if d.len() == n => {}
            (n, _) => return Err(Error::contract(format!("model needs a lexicon with {n} categories"))),
        }
        Ok(Self { model, vocab, lexicon })
    }
}

impl PairScorer for ModelScorer<'_> {
    fn score(&self, q1: &str, q2: &str) -> Result<f64> {
        let cfg = self.model.config();
        let lexicon = match self.lexicon {
            Some(d) if cfg.lexicon_dim > 0 => Some(lexicon_vector(&format!("{q1} {q2}"), d)),
            _ => None,
        };
        self.model.predict(&ModelInput {
            q1: StatementInput::Tokens(encode(q1, self.vocab, cfg.max_len_q1)),
            q2: Some(StatementInput::Tokens(encode(q2, self.vocab, cfg.max_len_q2))),
            lexicon,
        })
    }

    fn paired(&self) -> bool {
        self.model.architecture().is_paired()
    }
}

/// Which statements' tokens are perturbed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Q1,
    Q2,
    #[default]
    Both,
}

impl Target {
    fn covers(self, s: Statement) -> bool {
        matches!(
            (self, s),
            (Target::Both, _) | (Target::Q1, Statement::Q1) | (Target::Q2, Statement::Q2)
        )
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Q1 => "q1",
            Target::Q2 => "q2",
            Target::Both => "both",
        })
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q1" => Ok(Target::Q1),
            "q2" => Ok(Target::Q2),
            "both" => Ok(Target::Both),
            _ => Err(Error::config(format!("unknown target {s:?}, expected q1, q2 or both"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub target: Target,
    pub sigma: f64,
    pub max_features: usize,
    pub ridge: f64,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self {
            n_samples: lime::DEFAULT_SAMPLES,
            seed: 0,
            target: Target::Both,
            sigma: lime::DEFAULT_SIGMA,
            max_features: lime::DEFAULT_MAX_FEATURES,
            ridge: lime::DEFAULT_RIDGE,
        }
    }
}

/// One surface token of either statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainedToken {
    pub token: String,
    pub statement: Statement,
    /// Index within its statement.
    pub position: usize,
    /// Whether the token was part of the perturbed space.
    pub perturbed: bool,
    /// Surrogate weight; 0 for tokens not selected.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub token: String,
    pub statement: Statement,
    pub position: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub doc_id: Option<String>,
    pub target: Target,
    /// Selected tokens by decreasing |weight|. Positive pushes toward deceptive.
    pub token_weights: Vec<TokenWeight>,
    pub intercept: f64,
    pub local_fidelity_r2: f64,
    pub predicted_prob: f64,
    pub class_names: [String; 2],
    pub n_samples: usize,
    pub seed: u64,
    /// Every token of both statements in reading order.
    pub tokens: Vec<ExplainedToken>,
}

impl Explanation {
    pub fn weights_for(&self, statement: Statement) -> impl Iterator<Item = &TokenWeight> {
        self.token_weights.iter().filter(move |w| w.statement == statement)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_html(&self) -> String {
        html::render(self)
    }
}

/// Rebuilds one statement from its tokens, keeping those flagged in
/// `keep`. A fully kept statement is returned verbatim.
fn realize(original: &str, tokens: &[String], keep: &[bool]) -> String {
    if keep.iter().all(|&k| k) {
        return original.to_string();
    }
    tokens
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(t, _)| t.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Perturbed text of a statement for a mask over the interpretable
/// space. Tokens outside the target are always kept.
pub fn perturbed_text(original: &str, tokens: &[String], mask_slice: Option<&[bool]>) -> String {
    match mask_slice {
        Some(keep) => realize(original, tokens, keep),
        None => original.to_string(),
    }
}

pub fn explain_pair(scorer: &dyn PairScorer, q1: &str, q2: &str, opts: &ExplainOptions) -> Result<Explanation> {
    if opts.target != Target::Q1 && !scorer.paired() {
        return Err(Error::contract(format!(
            "target {} needs a paired model",
            opts.target
        )));
    }
    let toks1: Vec<String> = tokenize(q1).into_iter().map(|t| t.text).collect();
    let toks2: Vec<String> = tokenize(q2).into_iter().map(|t| t.text).collect();
    let n1 = if opts.target.covers(Statement::Q1) { toks1.len() } else { 0 };
    let n2 = if opts.target.covers(Statement::Q2) { toks2.len() } else { 0 };
    let masks = perturb(n1 + n2, opts.n_samples, opts.seed)?;

    let probs: Vec<f64> = masks
        .par_iter()
        .map(|m| {
            let t1 = perturbed_text(q1, &toks1, (n1 > 0).then(|| &m[..n1]));
            let t2 = perturbed_text(q2, &toks2, (n2 > 0).then(|| &m[n1..]));
            scorer.score(&t1, &t2)
        })
        .collect::<Result<_>>()?;
    let predicted_prob = probs[0];
    let samples: Vec<PerturbationSample> = masks
        .into_iter()
        .zip(probs)
        .map(|(mask, model_prob)| PerturbationSample {
            proximity_weight: proximity(&mask, opts.sigma),
            mask,
            model_prob,
        })
        .collect();
    let surrogate = fit_surrogate(&samples, opts.max_features, opts.ridge)?;

    // feature index → (statement, position)
    let locate = |f: usize| {
        if f < n1 {
            (Statement::Q1, f, &toks1[f])
        } else {
            (Statement::Q2, f - n1, &toks2[f - n1])
        }
    };
    let mut token_weights: Vec<TokenWeight> = surrogate
        .coefficients
        .iter()
        .map(|&(f, weight)| {
            let (statement, position, token) = locate(f);
            TokenWeight {
                token: token.clone(),
                statement,
                position,
                weight,
            }
        })
        .collect();
    token_weights.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()));

    let tokens = [(Statement::Q1, &toks1, n1), (Statement::Q2, &toks2, n2)]
        .into_iter()
        .flat_map(|(statement, toks, n)| {
            let weights = &token_weights;
            toks.iter().enumerate().map(move |(position, token)| ExplainedToken {
                token: token.clone(),
                statement,
                position,
                perturbed: n > 0,
                weight: weights
                    .iter()
                    .find(|w| w.statement == statement && w.position == position)
                    .map_or(0.0, |w| w.weight),
            })
        })
        .collect();

    Ok(Explanation {
        doc_id: None,
        target: opts.target,
        token_weights,
        intercept: surrogate.intercept,
        local_fidelity_r2: surrogate.r2,
        predicted_prob,
        class_names: CLASS_NAMES.map(String::from),
        n_samples: opts.n_samples,
        seed: opts.seed,
        tokens,
    })
}
