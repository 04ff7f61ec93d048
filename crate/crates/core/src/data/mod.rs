//! Dataset records and loaders.
//!
//! Paired files are CSV (header required) or JSONL with fields `id`,
//! `q1`, `q2`, `label`. Open-domain files carry one merged `text` per row
//! which is split at the token midpoint.

pub mod embeddings;
pub mod synthetic;
pub mod vocab;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Paired,
    OpenDomain,
}

/// One participant record. `label` is 1 for deceptive, 0 for truthful.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementPair {
    pub id: String,
    pub q1: String,
    pub q2: String,
    pub label: u8,
    pub source: Source,
}

impl StatementPair {
    pub fn is_deceptive(&self) -> bool {
        self.label == 1
    }

    /// Both statements joined by a space.
    pub fn combined_text(&self) -> String {
        if self.q2.is_empty() {
            self.q1.clone()
        } else {
            format!("{} {}", self.q1, self.q2)
        }
    }
}

pub fn class_counts(pairs: &[StatementPair]) -> (usize, usize) {
    let deceptive = pairs.iter().filter(|p| p.is_deceptive()).count();
    (pairs.len() - deceptive, deceptive)
}

pub fn parse_label(raw: &str) -> Option<u8> {
    match raw.trim().to_lowercase().as_str() {
        "0" | "truthful" => Some(0),
        "1" | "deceptive" => Some(1),
        _ => None,
    }
}

/// A raw row before validation: field name → value, plus its line number.
struct RawRow {
    line: usize,
    fields: Vec<(String, String)>,
}

impl RawRow {
    fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_lowercase).as_deref(),
        Some("jsonl" | "json" | "ndjson")
    )
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_rows(path: &Path, required: &[&str]) -> Result<Vec<RawRow>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    if is_jsonl(path) {
        read_jsonl(path, file)
    } else {
        read_csv(path, file, required)
    }
}

fn read_csv(path: &Path, file: File, required: &[&str]) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_lowercase())
        .collect();
    if let Some(missing) = required.iter().find(|r| !headers.iter().any(|h| h == *r)) {
        return Err(parse_error(path, 1, format!("missing column {missing:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| {
            let line = e.position().map_or(line, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(line, |p| p.line() as usize);
        let fields = headers.iter().cloned().zip(record.iter().map(str::to_string)).collect();
        rows.push(RawRow { line, fields });
    }
    Ok(rows)
}

fn read_jsonl(path: &Path, file: File) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| parse_error(path, line_no, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_error(path, line_no, "expected a JSON object"))?;
        let fields = obj
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.to_lowercase(), s)
            })
            .collect();
        rows.push(RawRow { line: line_no, fields });
    }
    Ok(rows)
}

fn field<'a>(path: &Path, row: &'a RawRow, key: &str) -> Result<&'a str> {
    row.get(key)
        .ok_or_else(|| parse_error(path, row.line, format!("missing field {key:?}")))
}

fn label_of(path: &Path, row: &RawRow) -> Result<u8> {
    let raw = field(path, row, "label")?;
    parse_label(raw).ok_or_else(|| parse_error(path, row.line, format!("label {raw:?} is not binary")))
}

fn id_of(path: &Path, row: &RawRow) -> Result<String> {
    let id = field(path, row, "id")?.trim();
    if id.is_empty() {
        return Err(parse_error(path, row.line, "empty id"));
    }
    Ok(id.to_string())
}

/// Loads a paired dataset.
pub fn load_paired(path: impl AsRef<Path>) -> Result<Vec<StatementPair>> {
    let path = path.as_ref();
    let rows = read_rows(path, &["id", "q1", "q2", "label"])?;
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let q1 = field(path, row, "q1")?;
        if q1.trim().is_empty() {
            return Err(parse_error(path, row.line, "empty q1"));
        }
        out.push(StatementPair {
            id: id_of(path, row)?,
            q1: q1.to_string(),
            q2: field(path, row, "q2")?.to_string(),
            label: label_of(path, row)?,
            source: Source::Paired,
        });
    }
    check_unique_ids(path, &out, &rows)?;
    Ok(out)
}

/// Loads merged statements (`id`, `text`, `label`) and splits each one
/// at its whitespace-token midpoint; with an odd count Q1 gets the extra
/// token.
pub fn load_open_domain(path: impl AsRef<Path>) -> Result<Vec<StatementPair>> {
    let path = path.as_ref();
    let rows = read_rows(path, &["id", "text", "label"])?;
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let text = field(path, row, "text")?;
        if text.trim().is_empty() {
            return Err(parse_error(path, row.line, "empty text"));
        }
        let (q1, q2) = split_midpoint(text);
        out.push(StatementPair {
            id: id_of(path, row)?,
            q1,
            q2,
            label: label_of(path, row)?,
            source: Source::OpenDomain,
        });
    }
    check_unique_ids(path, &out, &rows)?;
    Ok(out)
}

pub fn split_midpoint(text: &str) -> (String, String) {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let cut = tokens.len().div_ceil(2);
    (tokens[..cut].join(" "), tokens[cut..].join(" "))
}

fn check_unique_ids(path: &Path, pairs: &[StatementPair], rows: &[RawRow]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for (p, row) in pairs.iter().zip(rows) {
        if !seen.insert(p.id.as_str()) {
            return Err(parse_error(path, row.line, format!("duplicate id {:?}", p.id)));
        }
    }
    Ok(())
}

/// Writes pairs as CSV with the paired-file header.
pub fn write_paired_csv(path: impl AsRef<Path>, pairs: &[StatementPair]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["id", "q1", "q2", "label"])?;
    for p in pairs {
        w.write_record([p.id.as_str(), &p.q1, &p.q2, &p.label.to_string()])?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(parse_label("deceptive"), Some(1));
        assert_eq!(parse_label(" Truthful "), Some(0));
        assert_eq!(parse_label("1"), Some(1));
        assert_eq!(parse_label("2"), None);
        assert_eq!(parse_label("yes"), None);
    }

    #[test]
    fn midpoint_split() {
        let ten = "1 2 3 4 5 6 7 8 9 10";
        assert_eq!(split_midpoint(ten), ("1 2 3 4 5".into(), "6 7 8 9 10".into()));
        let eleven = "1 2 3 4 5 6 7 8 9 10 11";
        assert_eq!(split_midpoint(eleven), ("1 2 3 4 5 6".into(), "7 8 9 10 11".into()));
        assert_eq!(split_midpoint("one"), ("one".into(), String::new()));
    }
}
