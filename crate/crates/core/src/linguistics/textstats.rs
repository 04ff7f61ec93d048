//! Readability-style counts per document.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::text::{tokenize, TokenKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStats {
    pub syllable_count: usize,
    pub lexicon_count: usize,
    pub sentence_count: usize,
    pub difficult_words: usize,
}

impl TextStats {
    pub const METRICS: [&'static str; 4] = ["syllable_count", "lexicon_count", "sentence_count", "difficult_words"];

    pub fn values(&self) -> [f64; 4] {
        [
            self.syllable_count as f64,
            self.lexicon_count as f64,
            self.sentence_count as f64,
            self.difficult_words as f64,
        ]
    }
}

const EASY_WORDS: &str = include_str!("../../data/easy_words.txt");

/// The bundled list of common words never counted as difficult.
pub fn default_easy_words() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| parse_word_list(EASY_WORDS))
}

/// One word per line; blank lines and `#` comments ignored.
pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel groups, minus a silent final `e` (kept after `l`), at least 1.
pub fn syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = letters.len();
    if n >= 2 && letters[n - 1] == 'e' && letters[n - 2] != 'l' && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

pub fn text_stats(text: &str) -> TextStats {
    text_stats_with(text, default_easy_words())
}

pub fn text_stats_with(text: &str, easy: &HashSet<String>) -> TextStats {
    let tokens = tokenize(text);
    let mut stats = TextStats::default();
    let mut open_sentence = false;
    for t in &tokens {
        match t.kind {
            TokenKind::Word => {
                let s = syllables(&t.text);
                stats.lexicon_count += 1;
                stats.syllable_count += s;
                if s >= 2 && !easy.contains(&t.key()) {
                    stats.difficult_words += 1;
                }
                open_sentence = true;
            }
            TokenKind::Punct => {
                if t.text.chars().all(is_terminal) && open_sentence {
                    stats.sentence_count += 1;
                    open_sentence = false;
                }
            }
        }
    }
    if open_sentence {
        stats.sentence_count += 1;
    }
    if stats.sentence_count == 0 && !text.trim().is_empty() {
        stats.sentence_count = 1;
    }
    stats
}
