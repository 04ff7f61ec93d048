use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const RESERVED: [&str; 2] = ["<pad>", "<unk>"];

/// Token → id mapping with `0 = <pad>` and `1 = <unk>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// Fixed-length id sequence; `mask[i]` is true for real tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedText {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
}

impl EncodedText {
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(mut self) -> Self {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= RESERVED.len()
    }

    pub fn id(&self, key: &str) -> usize {
        self.index.get(key).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.get(key).is_some_and(|&i| i >= RESERVED.len())
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    /// Encodes already-normalized token keys.
    pub fn encode_keys<S: AsRef<str>>(&self, keys: &[S], max_len: usize) -> EncodedText {
        let mut ids: Vec<usize> = keys.iter().take(max_len).map(|k| self.id(k.as_ref())).collect();
        let real = ids.len();
        ids.resize(max_len, PAD_ID);
        let mask = (0..max_len).map(|i| i < real).collect();
        EncodedText { ids, mask }
    }
}

/// Builds a vocabulary from training texts. Tokens seen fewer than
/// `min_count` times are left out; ids are assigned by descending
/// frequency with ties broken alphabetically.
pub fn build_vocab<S: AsRef<str>>(train_texts: &[S], min_count: usize) -> Result<Vocabulary> {
    if train_texts.is_empty() {
        return Err(Error::config("cannot build a vocabulary from an empty corpus"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in train_texts {
        for tok in tokenize(text.as_ref()) {
            *counts.entry(tok.key()).or_default() += 1;
        }
    }
    let mut entries: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count.max(1)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(entries.into_iter().map(|(t, _)| t))
        .collect();
    Ok(Vocabulary::from_tokens(tokens))
}

/// Tokenizes, truncates to `max_len` and pads with [`PAD_ID`].
pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> EncodedText {
    let keys: Vec<String> = tokenize(text).iter().map(|t| t.key()).collect();
    vocab.encode_keys(&keys, max_len)
}
