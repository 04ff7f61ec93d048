//! The six statement classifiers.
//!
//! Every architecture starts from the same statement encoder (token
//! embedding + sinusoidal positions + a small transformer backbone).
//! Paired architectures run that one encoder over both statements, so
//! the two branches share parameters by construction.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::checkpoint::{read_checkpoint, write_checkpoint};
use crate::autodiff::layers::{sinusoidal_positions, Dense, MultiHeadAttention, TransformerEncoder};
use crate::autodiff::{Activation, Graph, LayerId, LayerParams, ParamStore, Tensor, Var};
use crate::coattention::{CoAttention, CoAttentionOutput, CoAttentionVars};
use crate::data::vocab::{EncodedText, PAD_ID};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Encoder → mean pool → dense stack.
    Dense,
    /// Encoder → multi-head attention → mean pool → dense stack.
    Mha,
    /// Encoder → transformer encoder → mean pool → dense stack.
    Transformer,
    /// Siamese encoder → co-attention → dense stack.
    Coatt,
    /// Siamese encoder → co-attention → dense → concat(lexicon) → dense → output.
    CoattLiwc,
    /// Siamese encoder → per-branch transformer → co-attention → dense stack.
    TransformerCoatt,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::Dense,
        Architecture::Mha,
        Architecture::Transformer,
        Architecture::Coatt,
        Architecture::CoattLiwc,
        Architecture::TransformerCoatt,
    ];

    pub fn is_paired(self) -> bool {
        matches!(self, Self::Coatt | Self::CoattLiwc | Self::TransformerCoatt)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dense => "dense",
            Self::Mha => "mha",
            Self::Transformer => "transformer",
            Self::Coatt => "coatt",
            Self::CoattLiwc => "coatt_liwc",
            Self::TransformerCoatt => "transformer_coatt",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown architecture {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// Hidden size of the statement encodings.
    pub d: usize,
    /// Co-attention hidden size; `None` means `d`.
    pub k: Option<usize>,
    pub heads: usize,
    /// Depth of the transformer stack used by `transformer` and `transformer_coatt`.
    pub encoder_layers: usize,
    /// Depth of the transformer backbone inside the statement encoder.
    pub backbone_layers: usize,
    pub head_widths: Vec<usize>,
    /// Widths of the two dense layers around the lexicon concatenation.
    pub liwc_widths: [usize; 2],
    pub vocab_size: usize,
    pub max_len_q1: usize,
    pub max_len_q2: usize,
    pub lexicon_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Coatt,
            d: 48,
            k: None,
            heads: 6,
            encoder_layers: 6,
            backbone_layers: 1,
            head_widths: vec![512, 128, 64],
            liwc_widths: [128, 64],
            vocab_size: 2,
            max_len_q1: 64,
            max_len_q2: 64,
            lexicon_dim: 0,
        }
    }
}

impl ModelConfig {
    pub fn k(&self) -> usize {
        self.k.unwrap_or(self.d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k() == 0 {
            return Err(Error::config("d and k must be positive"));
        }
        if self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return Err(Error::config(format!("d={} is not divisible by heads={}", self.d, self.heads)));
        }
        if self.head_widths.is_empty() || self.head_widths.contains(&0) {
            return Err(Error::config("head_widths must be non-empty and positive"));
        }
        if self.liwc_widths.contains(&0) {
            return Err(Error::config("liwc_widths must be positive"));
        }
        if self.vocab_size < 2 {
            return Err(Error::config("vocab_size must include the pad and unknown ids"));
        }
        if self.max_len_q1 == 0 || self.max_len_q2 == 0 {
            return Err(Error::config("max lengths must be positive"));
        }
        match (self.architecture, self.lexicon_dim) {
            (Architecture::CoattLiwc, 0) => Err(Error::config("coatt_liwc needs lexicon_dim > 0")),
            (a, l) if a != Architecture::CoattLiwc && l != 0 => {
                Err(Error::config(format!("lexicon_dim must be 0 for {a}")))
            }
            _ => Ok(()),
        }
    }
}

/// One statement as the model sees it: token ids, or a precomputed
/// d×N contextual embedding that bypasses the encoder.
#[derive(Clone, Debug, PartialEq)]
pub enum StatementInput {
    Tokens(EncodedText),
    Embedded(Tensor),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    pub q1: StatementInput,
    pub q2: Option<StatementInput>,
    pub lexicon: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    /// Probability of the deceptive class.
    pub probability: f64,
    pub coattention: Option<CoAttentionOutput>,
}

/// Graph handles produced by [`Model::forward_graph`].
pub struct ModelVars {
    pub probability: Var,
    pub coattention: Option<CoAttentionVars>,
}

/// Token embedding + positions + transformer backbone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatementEncoder {
    pub embedding: LayerId,
    pub backbone: TransformerEncoder,
    pub d: usize,
}

pub const ENCODER_PREFIX: &str = "encoder.";

impl StatementEncoder {
    fn init(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let embedding = store.add(LayerParams::new("encoder.embedding").with(
            "table",
            Tensor::unit_uniform(cfg.vocab_size, cfg.d, rng),
        ));
        let backbone =
            TransformerEncoder::init(store, "encoder.backbone", cfg.d, cfg.backbone_layers, cfg.heads, rng)?;
        Ok(Self {
            embedding,
            backbone,
            d: cfg.d,
        })
    }

    /// Encodes a statement into a d×n matrix, returning the column mask.
    /// Trailing pad columns are dropped since they carry no mass. A
    /// statement with no real tokens is read as a single pad token.
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, input: &StatementInput) -> Result<(Var, Vec<bool>)> {
        match input {
            StatementInput::Embedded(t) => {
                if t.rows() != self.d {
                    return Err(Error::config(format!(
                        "imported embedding has d={}, model expects {}",
                        t.rows(),
                        self.d
                    )));
                }
                Ok((g.constant(t), vec![true; t.cols()]))
            }
            StatementInput::Tokens(enc) => {
                if enc.ids.len() != enc.mask.len() || enc.ids.is_empty() {
                    return Err(Error::contract("token ids and mask must be non-empty and equal length"));
                }
                let len = enc.mask.iter().rposition(|&m| m).map_or(1, |p| p + 1);
                let (ids, mask): (Vec<usize>, Vec<bool>) = if enc.mask.iter().any(|&m| m) {
                    (enc.ids[..len].to_vec(), enc.mask[..len].to_vec())
                } else {
                    (vec![PAD_ID], vec![true])
                };
                let table = g.param(store, self.embedding, "table")?;
                let x = g.embed(table, &ids)?;
                let pos = g.constant(&sinusoidal_positions(self.d, ids.len()));
                let x = g.add(x, pos)?;
                let x = self.backbone.forward(g, store, x, &mask)?;
                Ok((x, mask))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LexiconHead {
    pre: Dense,
    post: Dense,
    out: Dense,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    encoder: StatementEncoder,
    attention: Option<MultiHeadAttention>,
    context: Option<TransformerEncoder>,
    coattention: Option<CoAttention>,
    head: Vec<Dense>,
    lexicon_head: Option<LexiconHead>,
    trained: bool,
}

/// Which statement of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statement {
    Q1,
    Q2,
}

impl Model {
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let cfg = config;
        let encoder = StatementEncoder::init(&mut store, cfg, &mut rng)?;
        let arch = cfg.architecture;
        let attention = match arch {
            Architecture::Mha => Some(MultiHeadAttention::init(&mut store, "mha", cfg.d, cfg.heads, &mut rng)?),
            _ => None,
        };
        let context = match arch {
            Architecture::Transformer | Architecture::TransformerCoatt => Some(TransformerEncoder::init(
                &mut store,
                "context",
                cfg.d,
                cfg.encoder_layers,
                cfg.heads,
                &mut rng,
            )?),
            _ => None,
        };
        let coattention = arch
            .is_paired()
            .then(|| CoAttention::init(&mut store, "coattention", cfg.d, cfg.k(), &mut rng));
        let pooled = if arch.is_paired() { 2 * cfg.d } else { cfg.d };

        let mut head = Vec::new();
        let mut lexicon_head = None;
        if arch == Architecture::CoattLiwc {
            let [w1, w2] = cfg.liwc_widths;
            let pre = Dense::init(&mut store, "head.pre", pooled, w1, Activation::Relu, &mut rng);
            let post = Dense::init(&mut store, "head.post", w1 + cfg.lexicon_dim, w2, Activation::Relu, &mut rng);
            let out = Dense::init(&mut store, "head.out", w2, 1, Activation::Sigmoid, &mut rng);
            lexicon_head = Some(LexiconHead { pre, post, out });
        } else {
            let mut width = pooled;
            for (i, &w) in cfg.head_widths.iter().enumerate() {
                head.push(Dense::init(&mut store, &format!("head.dense{i}"), width, w, Activation::Relu, &mut rng));
                width = w;
            }
            head.push(Dense::init(&mut store, "head.out", width, 1, Activation::Sigmoid, &mut rng));
        }
        Ok(Self {
            config: config.clone(),
            store,
            encoder,
            attention,
            context,
            coattention,
            head,
            lexicon_head,
            trained: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    /// The encoder applied to a statement. Both statements resolve to the
    /// same object.
    pub fn statement_encoder(&self, _which: Statement) -> &StatementEncoder {
        &self.encoder
    }

    pub fn is_encoder_layer(name: &str) -> bool {
        name.starts_with(ENCODER_PREFIX)
    }

    pub fn set_encoder_frozen(&mut self, frozen: bool) {
        self.store.set_frozen_where(frozen, Self::is_encoder_layer);
    }

    /// Parameter counts split as (encoder, co-attention, everything else).
    pub fn param_breakdown(&self) -> (usize, usize, usize) {
        let mut enc = 0;
        let mut co = 0;
        let mut rest = 0;
        for l in self.store.layers() {
            if Self::is_encoder_layer(&l.name) {
                enc += l.num_params();
            } else if l.name == "coattention" {
                co += l.num_params();
            } else {
                rest += l.num_params();
            }
        }
        (enc, co, rest)
    }

    pub fn forward(&self, input: &ModelInput) -> Result<ModelOutput> {
        let mut g = Graph::new();
        let vars = self.forward_graph(&mut g, &self.store, input)?;
        Ok(ModelOutput {
            probability: g.scalar(vars.probability),
            coattention: vars.coattention.map(|c| c.read(&g)),
        })
    }

    pub fn predict(&self, input: &ModelInput) -> Result<f64> {
        self.forward(input).map(|o| o.probability)
    }

    /// Records the forward pass on `g`, reading weights from `store`
    /// (which must share this model's layout).
    pub fn forward_graph(&self, g: &mut Graph, store: &ParamStore, input: &ModelInput) -> Result<ModelVars> {
        let arch = self.config.architecture;
        if arch == Architecture::CoattLiwc {
            match &input.lexicon {
                None => return Err(Error::contract("coatt_liwc needs lexicon features")),
                Some(v) if v.len() != self.config.lexicon_dim => {
                    return Err(Error::contract(format!(
                        "expected {} lexicon features, got {}",
                        self.config.lexicon_dim,
                        v.len()
                    )))
                }
                _ => {}
            }
        }
        let (c, mask_c) = self.encoder.encode(g, store, &input.q1)?;

        let (features, coattention) = if arch.is_paired() {
            let q2 = input
                .q2
                .as_ref()
                .ok_or_else(|| Error::contract(format!("{arch} needs the second statement")))?;
            let (s, mask_s) = self.encoder.encode(g, store, q2)?;
            let (c, s) = match &self.context {
                Some(ctx) => (ctx.forward(g, store, c, &mask_c)?, ctx.forward(g, store, s, &mask_s)?),
                None => (c, s),
            };
            let co = self.coattention.as_ref().expect("paired model has co-attention");
            let vars = co.forward(g, store, c, s, &mask_c, &mask_s)?;
            (vars.z, Some(vars))
        } else {
            let x = match (&self.attention, &self.context) {
                (Some(mha), _) => mha.forward(g, store, c, &mask_c)?.output,
                (None, Some(ctx)) => ctx.forward(g, store, c, &mask_c)?,
                (None, None) => c,
            };
            (g.mean_pool(x, &mask_c)?, None)
        };

        let probability = match &self.lexicon_head {
            Some(lh) => {
                let h = lh.pre.forward(g, store, features)?;
                let lex = g.constant(&Tensor::row(input.lexicon.clone().expect("checked above")));
                let h = g.concat_cols(&[h, lex])?;
                let h = lh.post.forward(g, store, h)?;
                lh.out.forward(g, store, h)?
            }
            None => self
                .head
                .iter()
                .try_fold(features, |h, layer| layer.forward(g, store, h))?,
        };
        Ok(ModelVars {
            probability,
            coattention,
        })
    }

    /// Writes a checkpoint. `extra` is stored alongside the config in the
    /// header metadata.
    pub fn save<W: Write>(&self, w: W, extra: serde_json::Value) -> Result<()> {
        let meta = serde_json::json!({
            "config": self.config,
            "trained": self.trained,
            "extra": extra,
        });
        write_checkpoint(w, &self.store, &meta)
    }

    /// Rebuilds a model from a checkpoint, returning the `extra` metadata.
    pub fn load<R: Read>(r: R) -> Result<(Self, serde_json::Value)> {
        let (store, meta) = read_checkpoint(r)?;
        let config: ModelConfig = serde_json::from_value(meta["config"].clone())?;
        let mut model = Self::build(&config, 0)?;
        model.store.copy_values_from(&store)?;
        for (dst, src) in model.store.layers_mut().iter_mut().zip(store.layers()) {
            dst.frozen = src.frozen;
        }
        model.trained = meta["trained"].as_bool().unwrap_or(false);
        Ok((model, meta["extra"].clone()))
    }
}
