//! Category dictionaries in the two-section `%` format and per-document
//! category features.
//!
//! ```text
//! %
//! 1    future
//! 2    article
//! %
//! will    1
//! a    2
//! friend*    3 4
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{is_apostrophe, normalize_key, tokenize, TokenKind};

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconDictionary {
    /// Category names in file order.
    categories: Vec<String>,
    /// Patterns per category, lowercase; a trailing `*` is a prefix match.
    patterns: Vec<Vec<String>>,
    exact: HashMap<String, Vec<usize>>,
    prefixes: Vec<(String, usize)>,
}

impl LexiconDictionary {
    pub fn from_categories<S: AsRef<str>>(cats: &[(S, &[&str])]) -> Result<Self> {
        let mut seen = HashMap::new();
        let mut categories = Vec::new();
        let mut patterns = Vec::new();
        for (name, pats) in cats {
            let name = name.as_ref().to_string();
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::config(format!("duplicate category {name:?}")));
            }
            categories.push(name);
            let mut ps = Vec::new();
            for p in pats.iter() {
                let p = normalize_key(p.trim());
                if p.is_empty() || p == "*" {
                    return Err(Error::config("empty dictionary pattern"));
                }
                ps.push(p);
            }
            patterns.push(ps);
        }
        Self::assemble(categories, patterns)
    }

    fn assemble(categories: Vec<String>, patterns: Vec<Vec<String>>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::config("dictionary has no categories"));
        }
        let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes = Vec::new();
        for (c, ps) in patterns.iter().enumerate() {
            for p in ps {
                match p.strip_suffix('*') {
                    Some(stem) => prefixes.push((stem.to_string(), c)),
                    None => exact.entry(p.clone()).or_default().push(c),
                }
            }
        }
        Ok(Self {
            categories,
            patterns,
            exact,
            prefixes,
        })
    }

    pub fn parse(source: &str, path: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_string(),
            line,
            message,
        };
        let mut section = 0;
        let mut ids: BTreeMap<u32, usize> = BTreeMap::new();
        let mut categories: Vec<String> = Vec::new();
        let mut patterns: Vec<Vec<String>> = Vec::new();
        for (i, raw) in source.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line == "%" {
                section += 1;
                if section > 2 {
                    return Err(err(line_no, "more than two % delimiters".into()));
                }
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().expect("non-empty line");
            match section {
                0 => return Err(err(line_no, "content before the first %".into())),
                1 => {
                    let id: u32 = head
                        .parse()
                        .map_err(|_| err(line_no, format!("category id {head:?} is not an integer")))?;
                    let name: Vec<&str> = fields.collect();
                    if name.is_empty() {
                        return Err(err(line_no, format!("category {id} has no name")));
                    }
                    let name = name.join(" ");
                    if categories.contains(&name) {
                        return Err(err(line_no, format!("duplicate category name {name:?}")));
                    }
                    if ids.insert(id, categories.len()).is_some() {
                        return Err(err(line_no, format!("duplicate category id {id}")));
                    }
                    categories.push(name);
                    patterns.push(Vec::new());
                }
                _ => {
                    let pattern = normalize_key(head);
                    if pattern == "*" {
                        return Err(err(line_no, "bare wildcard pattern".into()));
                    }
                    let mut any = false;
                    for f in fields {
                        let id: u32 = f
                            .parse()
                            .map_err(|_| err(line_no, format!("category id {f:?} is not an integer")))?;
                        let c = *ids
                            .get(&id)
                            .ok_or_else(|| err(line_no, format!("unknown category id {id}")))?;
                        if !patterns[c].contains(&pattern) {
                            patterns[c].push(pattern.clone());
                        }
                        any = true;
                    }
                    if !any {
                        return Err(err(line_no, format!("pattern {pattern:?} lists no categories")));
                    }
                }
            }
        }
        if section < 2 {
            return Err(err(source.lines().count().max(1), "expected two %-delimited sections".into()));
        }
        Self::assemble(categories, patterns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn patterns(&self, category: usize) -> &[String] {
        &self.patterns[category]
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Categories matched by a lowercase word, each listed once.
    pub fn matches(&self, word: &str) -> Vec<usize> {
        let mut out: Vec<usize> = self.exact.get(word).cloned().unwrap_or_default();
        out.extend(
            self.prefixes
                .iter()
                .filter(|(stem, _)| word.starts_with(stem.as_str()))
                .map(|(_, c)| *c),
        );
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Structural features computed from the raw text, in output order.
pub const PSEUDO_CATEGORIES: [&str; 7] = [
    "word_count",
    "all_punctuation",
    "periods",
    "commas",
    "exclamation_marks",
    "question_marks",
    "apostrophes",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub doc_id: String,
    /// (feature, value) in a fixed column order.
    pub values: Vec<(String, f64)>,
    /// Word tokens in the document.
    pub token_count: usize,
    /// True when the document had no word tokens and every percentage is 0.
    pub empty: bool,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(|(n, _)| n.as_str())
    }

    /// Percentages from raw counts; `word_count` is passed through as a count.
    pub fn from_counts(doc_id: &str, counts: &[(String, f64)], token_count: usize) -> Self {
        let values = counts
            .iter()
            .map(|(n, c)| {
                let v = if n == "word_count" {
                    *c
                } else if token_count == 0 {
                    0.0
                } else {
                    c / token_count as f64 * 100.0
                };
                (n.clone(), v)
            })
            .collect();
        Self {
            doc_id: doc_id.to_string(),
            values,
            token_count,
            empty: token_count == 0,
        }
    }
}

/// Raw per-category counts followed by the pseudo-categories.
pub fn raw_counts(text: &str, dict: &LexiconDictionary) -> (Vec<(String, f64)>, usize) {
    let tokens = tokenize(text);
    let mut cat_counts = vec![0.0; dict.len()];
    let mut words = 0usize;
    let mut punct = BTreeMap::<char, usize>::new();
    for t in &tokens {
        match t.kind {
            TokenKind::Word => {
                words += 1;
                for c in dict.matches(&t.key()) {
                    cat_counts[c] += 1.0;
                }
            }
            TokenKind::Punct => {
                let c = t.text.chars().next().expect("punct token has one char");
                *punct.entry(c).or_default() += 1;
            }
        }
    }
    let all_punct = text
        .chars()
        .filter(|c| !c.is_alphanumeric() && !c.is_whitespace())
        .count();
    let apostrophes = text.chars().filter(|&c| is_apostrophe(c)).count();
    let p = |c: char| punct.get(&c).copied().unwrap_or(0) as f64;
    let mut counts: Vec<(String, f64)> = dict.categories().iter().cloned().zip(cat_counts).collect();
    let pseudo = [
        words as f64,
        all_punct as f64,
        p('.'),
        p(','),
        p('!'),
        p('?'),
        apostrophes as f64,
    ];
    counts.extend(PSEUDO_CATEGORIES.iter().map(|s| s.to_string()).zip(pseudo));
    (counts, words)
}

/// Category percentages of word tokens, plus the structural pseudo-categories.
pub fn extract_features(doc_id: &str, text: &str, dict: &LexiconDictionary) -> FeatureVector {
    let (counts, words) = raw_counts(text, dict);
    FeatureVector::from_counts(doc_id, &counts, words)
}

/// Dictionary categories only, as fractions in [0, 1]; used as the lexicon
/// input of the `coatt_liwc` model.
pub fn lexicon_vector(text: &str, dict: &LexiconDictionary) -> Vec<f64> {
    let fv = extract_features("", text, dict);
    fv.values[..dict.len()].iter().map(|(_, v)| v / 100.0).collect()
}

/// Feature table read from CSV: a `doc_id` column plus one column per
/// feature. Values are used exactly as written.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn get(&self, doc_id: &str) -> Option<&FeatureVector> {
        self.rows.iter().find(|r| r.doc_id == doc_id)
    }
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let id_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("doc_id"))
        .ok_or_else(|| Error::Parse {
            path: shown.clone(),
            line: 1,
            message: "missing doc_id column".into(),
        })?;
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let mut values = Vec::with_capacity(columns.len());
        for (j, raw) in rec.iter().enumerate() {
            if j == id_col {
                continue;
            }
            let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                path: shown.clone(),
                line,
                message: format!("column {:?}: {raw:?} is not a number", headers[j]),
            })?;
            values.push((headers[j].clone(), v));
        }
        let token_count = values
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case("wc") || n == "word_count")
            .map_or(0, |(_, v)| *v as usize);
        rows.push(FeatureVector {
            doc_id: rec[id_col].to_string(),
            values,
            token_count,
            empty: false,
        });
    }
    Ok(FeatureTable { columns, rows })
}

pub fn write_feature_csv(path: impl AsRef<Path>, rows: &[FeatureVector]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if let Some(first) = rows.first() {
        let mut header = vec!["doc_id".to_string()];
        header.extend(first.names().map(str::to_string));
        w.write_record(&header)?;
    }
    for r in rows {
        let mut rec = vec![r.doc_id.clone()];
        rec.extend(r.values.iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> LexiconDictionary {
        LexiconDictionary::parse("%\n1\tfuture\n2\tarticle\n3\tsocial\n%\nwill\t1\nmay\t1\nsoon\t1\na\t2\nan\t2\nthe\t2\nfriend*\t3\n", "demo.dic")
            .unwrap()
    }

    #[test]
    fn percent_of_word_tokens() {
        let fv = extract_features("d", "I will eat a pizza", &demo());
        assert_eq!(fv.token_count, 5);
        assert_eq!(fv.get("future"), Some(20.0));
        assert_eq!(fv.get("article"), Some(20.0));
        assert_eq!(fv.get("word_count"), Some(5.0));
    }

    #[test]
    fn wildcard_matches_prefix() {
        let d = demo();
        assert_eq!(d.matches("friends"), [2]);
        assert_eq!(d.matches("friend"), [2]);
        assert!(d.matches("fiend").is_empty());
    }

    #[test]
    fn empty_text_flagged() {
        let fv = extract_features("d", "", &demo());
        assert!(fv.empty);
        assert!(fv.values.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn apostrophes_and_punctuation() {
        let fv = extract_features("d", "I haven't, really! Why?", &demo());
        assert_eq!(fv.token_count, 4);
        assert_eq!(fv.get("apostrophes"), Some(25.0));
        assert_eq!(fv.get("commas"), Some(25.0));
        assert_eq!(fv.get("all_punctuation"), Some(100.0));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("%\n1\tfuture\n%\nwill\t9\n", 4),
            ("%\nx\tfuture\n%\n", 2),
            ("%\n1\tfuture\n1\tpast\n%\n", 3),
            ("will\t1\n", 1),
            ("%\n1\tfuture\n%\nwill\n", 4),
        ];
        for (src, line) in cases {
            match LexiconDictionary::parse(src, "t.dic") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{src:?}"),
                other => panic!("{src:?}: {other:?}"),
            }
        }
        assert!(matches!(LexiconDictionary::parse("%\n%\n", "t.dic"), Err(Error::Config(_))));
    }

    #[test]
    fn multiple_categories_per_token() {
        let d = LexiconDictionary::parse("%\n1\ta\n2\tb\n%\nwill\t1 2\nwil*\t1\n", "x").unwrap();
        assert_eq!(d.matches("will"), [0, 1]);
        let fv = extract_features("d", "will", &d);
        assert_eq!(fv.get("a"), Some(100.0));
        assert_eq!(fv.get("b"), Some(100.0));
    }
}
