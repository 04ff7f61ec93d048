//! Corpus-level analysis: text statistics with t-tests, vocabulary
//! overlap between classes, and feature/label correlations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::lexicon::{extract_features, FeatureTable, FeatureVector, LexiconDictionary};
use super::stats::{benjamini_hochberg, jaccard, mean, point_biserial, sample_std, welch_ttest};
use super::textstats::{text_stats, TextStats};
use crate::data::StatementPair;
use crate::error::{Error, Result};
use crate::text::words;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Truthful,
    Deceptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub feature: String,
    pub r_pb: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significant: bool,
    pub associated_class: Class,
    /// Taken verbatim from an imported feature file.
    pub imported: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Significant rows with r < 0, by |r| descending.
    pub truthful: Vec<CorrelationRow>,
    /// Significant rows with r > 0, by |r| descending.
    pub deceptive: Vec<CorrelationRow>,
    /// Every tested feature in input column order.
    pub all: Vec<CorrelationRow>,
    /// Features left out because they are constant or otherwise degenerate.
    pub skipped: Vec<String>,
}

/// Point-biserial correlation of every feature with the labels, BH-corrected.
pub fn correlation_report(
    features: &[FeatureVector],
    labels: &[u8],
    alpha: f64,
    imported: bool,
) -> Result<CorrelationReport> {
    if features.len() != labels.len() {
        return Err(Error::contract("feature rows and labels differ in length"));
    }
    let Some(first) = features.first() else {
        return Ok(CorrelationReport::default());
    };
    let names: Vec<&str> = first.names().collect();
    for f in features {
        if !f.names().eq(names.iter().copied()) {
            return Err(Error::contract(format!(
                "document {:?} has a different feature set",
                f.doc_id
            )));
        }
    }
    let mut tested = Vec::new();
    let mut skipped = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let column: Vec<f64> = features.iter().map(|f| f.values[j].1).collect();
        match point_biserial(&column, labels) {
            Ok(c) => tested.push((name.to_string(), c)),
            Err(Error::Domain(msg)) => {
                log::warn!("skipping feature {name}: {msg}");
                skipped.push(name.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    let ps: Vec<f64> = tested.iter().map(|(_, c)| c.p).collect();
    let bh = benjamini_hochberg(&ps, alpha)?;
    let all: Vec<CorrelationRow> = tested
        .into_iter()
        .enumerate()
        .map(|(i, (feature, c))| CorrelationRow {
            feature,
            r_pb: c.r,
            p_value: c.p,
            p_adjusted: bh.adjusted[i],
            significant: bh.adjusted[i] < alpha,
            associated_class: if c.r < 0.0 { Class::Truthful } else { Class::Deceptive },
            imported,
        })
        .collect();
    let mut sig: Vec<CorrelationRow> = all.iter().filter(|r| r.significant && r.r_pb != 0.0).cloned().collect();
    sig.sort_by(|a, b| b.r_pb.abs().total_cmp(&a.r_pb.abs()).then_with(|| a.feature.cmp(&b.feature)));
    let (truthful, deceptive) = sig.into_iter().partition(|r| r.associated_class == Class::Truthful);
    Ok(CorrelationReport {
        truthful,
        deceptive,
        all,
        skipped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Q1,
    Q2,
    Both,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Both, Scope::Q1, Scope::Q2];

    pub fn text(self, p: &StatementPair) -> String {
        match self {
            Scope::Q1 => p.q1.clone(),
            Scope::Q2 => p.q2.clone(),
            Scope::Both => p.combined_text(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        Self {
            mean: if xs.is_empty() { 0.0 } else { mean(xs) },
            std: if xs.len() < 2 { 0.0 } else { sample_std(xs) },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextStatRow {
    pub metric: String,
    pub scope: Scope,
    pub truthful: MeanStd,
    pub deceptive: MeanStd,
    /// `None` when the test is undefined (e.g. zero variance).
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub p_adjusted: Option<f64>,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JaccardRow {
    pub scope: Scope,
    pub truthful_vocabulary: usize,
    pub deceptive_vocabulary: usize,
    pub jaccard: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub documents: usize,
    pub truthful: usize,
    pub deceptive: usize,
    pub alpha: f64,
    pub textstats: Vec<TextStatRow>,
    pub jaccard: Vec<JaccardRow>,
    pub correlations: CorrelationReport,
}

/// Mean ± std per class and Welch t-tests for every metric and scope,
/// BH-corrected across all of them.
pub fn textstats_table(pairs: &[StatementPair], alpha: f64) -> Result<Vec<TextStatRow>> {
    let mut rows = Vec::new();
    let mut tests = Vec::new();
    for scope in [Scope::Q1, Scope::Q2, Scope::Both] {
        let stats: Vec<(u8, TextStats)> = pairs.iter().map(|p| (p.label, text_stats(&scope.text(p)))).collect();
        for (m, metric) in TextStats::METRICS.iter().enumerate() {
            let t: Vec<f64> = stats.iter().filter(|(l, _)| *l == 0).map(|(_, s)| s.values()[m]).collect();
            let d: Vec<f64> = stats.iter().filter(|(l, _)| *l == 1).map(|(_, s)| s.values()[m]).collect();
            let test = match welch_ttest(&t, &d) {
                Ok(r) => Some(r),
                Err(Error::Domain(msg)) => {
                    log::warn!("t-test for {metric} ({scope:?}) undefined: {msg}");
                    None
                }
                Err(e) => return Err(e),
            };
            if let Some(r) = test {
                tests.push((rows.len(), r.p));
            }
            rows.push(TextStatRow {
                metric: metric.to_string(),
                scope,
                truthful: MeanStd::of(&t),
                deceptive: MeanStd::of(&d),
                t: test.map(|r| r.t),
                p: test.map(|r| r.p),
                p_adjusted: None,
                significant: false,
            });
        }
    }
    let ps: Vec<f64> = tests.iter().map(|(_, p)| *p).collect();
    let bh = benjamini_hochberg(&ps, alpha)?;
    for (k, (row, _)) in tests.iter().enumerate() {
        rows[*row].p_adjusted = Some(bh.adjusted[k]);
        rows[*row].significant = bh.rejected[k];
    }
    Ok(rows)
}

/// Vocabulary overlap between the classes for Q1 & Q2, Q1, and Q2.
pub fn jaccard_table(pairs: &[StatementPair]) -> Result<Vec<JaccardRow>> {
    Scope::ALL
        .iter()
        .map(|&scope| {
            let vocab = |label: u8| -> HashSet<String> {
                pairs
                    .iter()
                    .filter(|p| p.label == label)
                    .flat_map(|p| words(&scope.text(p)))
                    .collect()
            };
            let (t, d) = (vocab(0), vocab(1));
            Ok(JaccardRow {
                scope,
                truthful_vocabulary: t.len(),
                deceptive_vocabulary: d.len(),
                jaccard: jaccard(&t, &d)?,
            })
        })
        .collect()
}

/// Where the correlation features come from.
pub enum FeatureSource<'a> {
    Dictionary(&'a LexiconDictionary),
    Imported(&'a FeatureTable),
}

/// Runs all three analyses. Dictionary features are computed over each
/// participant's combined Q1 and Q2 text.
pub fn analyze(pairs: &[StatementPair], features: FeatureSource<'_>, alpha: f64) -> Result<AnalysisReport> {
    if pairs.is_empty() {
        return Err(Error::config("no documents to analyze"));
    }
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let (rows, imported) = match features {
        FeatureSource::Dictionary(dict) => (
            pairs
                .iter()
                .map(|p| extract_features(&p.id, &p.combined_text(), dict))
                .collect::<Vec<_>>(),
            false,
        ),
        FeatureSource::Imported(table) => {
            let rows = pairs
                .iter()
                .map(|p| {
                    table
                        .get(&p.id)
                        .cloned()
                        .ok_or_else(|| Error::Lookup(format!("no imported features for document {:?}", p.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            (rows, true)
        }
    };
    let deceptive = labels.iter().filter(|&&l| l == 1).count();
    Ok(AnalysisReport {
        documents: pairs.len(),
        truthful: pairs.len() - deceptive,
        deceptive,
        alpha,
        textstats: textstats_table(pairs, alpha)?,
        jaccard: jaccard_table(pairs)?,
        correlations: correlation_report(&rows, &labels, alpha, imported)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(id: &str, vals: &[(&str, f64)]) -> FeatureVector {
        FeatureVector {
            doc_id: id.into(),
            values: vals.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            token_count: 10,
            empty: false,
        }
    }

    #[test]
    fn deceptive_only_feature_goes_to_deceptive_table() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let rows: Vec<FeatureVector> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                fv(
                    &i.to_string(),
                    &[
                        ("lies", if l == 1 { 5.0 + i as f64 * 0.1 } else { 0.0 }),
                        ("constant", 1.0),
                        ("truth", if l == 0 { 3.0 + i as f64 * 0.1 } else { 0.0 }),
                    ],
                )
            })
            .collect();
        let rep = correlation_report(&rows, &labels, 0.05, false).unwrap();
        assert_eq!(rep.deceptive.len(), 1);
        assert_eq!(rep.deceptive[0].feature, "lies");
        assert!(rep.deceptive[0].r_pb > 0.0);
        assert_eq!(rep.truthful[0].feature, "truth");
        assert_eq!(rep.skipped, ["constant"]);
        assert!(rep.all.iter().all(|r| r.feature != "constant"));
    }

    #[test]
    fn inconsistent_features_rejected() {
        let rows = vec![fv("a", &[("x", 1.0)]), fv("b", &[("y", 1.0)])];
        assert!(matches!(correlation_report(&rows, &[0, 1], 0.05, false), Err(Error::Contract(_))));
    }
}
