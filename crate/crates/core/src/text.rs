//! Word/punctuation tokenizer shared by the model vocabulary, the
//! explainer and the linguistic analyses.
//!
//! Whitespace separates chunks. Non-alphanumeric characters at either
//! end of a chunk become one punctuation token each; anything inside a
//! word (apostrophes, hyphens, decimal points) stays in the word, so
//! `haven't` is a single token.

use unicode_normalization::UnicodeNormalization;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Punct,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    /// Surface form as written.
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }

    /// NFC-normalized lowercase key.
    pub fn key(&self) -> String {
        normalize_key(&self.text)
    }
}

pub fn normalize_key(s: &str) -> String {
    s.nfc().collect::<String>().to_lowercase()
}

pub fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{02bc}')
}

/// Tokenizes preserving the surface case.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let start = chars.iter().position(|c| c.is_alphanumeric());
        let Some(start) = start else {
            out.extend(chars.iter().map(|c| punct(*c)));
            continue;
        };
        let end = chars.iter().rposition(|c| c.is_alphanumeric()).map_or(start, |e| e + 1);
        out.extend(chars[..start].iter().map(|c| punct(*c)));
        out.push(Token {
            text: chars[start..end].iter().collect(),
            kind: TokenKind::Word,
        });
        out.extend(chars[end..].iter().map(|c| punct(*c)));
    }
    out
}

fn punct(c: char) -> Token {
    Token {
        text: c.to_string(),
        kind: TokenKind::Punct,
    }
}

/// Lowercased word tokens only.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(Token::is_word).map(|t| t.key()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn splits_edge_punctuation() {
        assert_eq!(texts("Hello, world!!"), ["Hello", ",", "world", "!", "!"]);
        assert_eq!(texts("(see above)."), ["(", "see", "above", ")", "."]);
        assert_eq!(texts(" -- "), ["-", "-"]);
    }

    #[test]
    fn keeps_inner_apostrophes() {
        let toks = tokenize("I haven't seen him");
        assert_eq!(toks[1].text, "haven't");
        assert!(toks[1].is_word());
        assert_eq!(words("It's 2-day"), ["it's", "2-day"]);
    }

    #[test]
    fn lowercase_keys() {
        assert_eq!(words("The CAT"), ["the", "cat"]);
        assert!(tokenize("").is_empty());
    }
}
