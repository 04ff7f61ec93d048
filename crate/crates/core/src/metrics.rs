//! Classification metrics with deceptive (label 1) as the positive class.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub const METRIC_NAMES: [&str; 6] = ["precision", "recall", "f1", "accuracy", "auroc", "specificity"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::contract("labels must be 0 or 1"));
    }
    Ok(())
}

/// Counts with `score >= threshold` predicted deceptive.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    check_lengths(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PointMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub specificity: f64,
    /// Names of ratios whose denominator was zero; they are reported as 0.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<&'static str>,
}

fn ratio(num: usize, den: usize, name: &'static str, undefined: &mut Vec<&'static str>) -> f64 {
    if den == 0 {
        undefined.push(name);
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn point_metrics(c: &ConfusionCounts) -> PointMetrics {
    let mut undefined = Vec::new();
    let precision = ratio(c.tp, c.tp + c.fp, "precision", &mut undefined);
    let recall = ratio(c.tp, c.tp + c.fn_, "recall", &mut undefined);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined.push("f1");
        0.0
    };
    let accuracy = ratio(c.tp + c.tn, c.total(), "accuracy", &mut undefined);
    let specificity = ratio(c.tn, c.tn + c.fp, "specificity", &mut undefined);
    PointMetrics {
        precision,
        recall,
        f1,
        accuracy,
        specificity,
        undefined,
    }
}

/// Midranks (1-based) of `xs`, ties sharing their average rank.
fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn class_sizes(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::domain("AUROC needs both classes"));
    }
    Ok((pos, neg))
}

/// Rank (Mann-Whitney) AUROC; ties count one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_sizes(labels)?;
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// AUROC by sweeping every distinct score as a threshold and integrating
/// the ROC curve with the trapezoid rule. Works in integer counts so the
/// result matches [`auroc`] up to the final division.
pub fn auroc_threshold_sweep(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_sizes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // twice the area in units of (1/pos)·(1/neg)
    let mut area2: u128 = 0;
    let mut tp = 0u128;
    let mut i = 0;
    while i < order.len() {
        let (mut dtp, mut dfp) = (0u128, 0u128);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
    }
    Ok(area2 as f64 / (2 * pos * neg) as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub auroc: f64,
    pub specificity: f64,
    /// Sample standard deviations, present on aggregated reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stds: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl MetricsReport {
    pub fn values(&self) -> [f64; 6] {
        [
            self.precision,
            self.recall,
            self.f1,
            self.accuracy,
            self.auroc,
            self.specificity,
        ]
    }

    pub fn from_values(v: [f64; 6]) -> Self {
        Self {
            precision: v[0],
            recall: v[1],
            f1: v[2],
            accuracy: v[3],
            auroc: v[4],
            specificity: v[5],
            stds: None,
            undefined: Vec::new(),
        }
    }

    /// Percentages with two decimals, e.g. `70.61 ± 2.58`.
    pub fn format_row(&self) -> Vec<String> {
        let values = self.values();
        (0..6)
            .map(|i| match self.stds {
                Some(s) => format!("{:.2} ± {:.2}", values[i] * 100.0, s[i] * 100.0),
                None => format!("{:.2}", values[i] * 100.0),
            })
            .collect()
    }

    pub fn format_table(&self, label: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24}{}", "", METRIC_NAMES.map(|n| format!("{n:>16}")).concat());
        let _ = writeln!(
            out,
            "{label:<24}{}",
            self.format_row().iter().map(|c| format!("{c:>16}")).collect::<String>()
        );
        out
    }
}

/// All six metrics for one set of scores.
pub fn evaluate(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    let c = confusion(scores, labels, threshold)?;
    let pm = point_metrics(&c);
    let mut r = MetricsReport::from_values([
        pm.precision,
        pm.recall,
        pm.f1,
        pm.accuracy,
        auroc(scores, labels)?,
        pm.specificity,
    ]);
    r.undefined = pm.undefined.iter().map(|s| s.to_string()).collect();
    Ok(r)
}

/// Per-metric mean and sample standard deviation.
pub fn aggregate(rows: &[MetricsReport]) -> Result<MetricsReport> {
    if rows.len() < 2 {
        return Err(Error::domain("aggregation needs at least two rows for a sample std"));
    }
    let n = rows.len() as f64;
    let mut means = [0.0; 6];
    let mut stds = [0.0; 6];
    for i in 0..6 {
        let xs: Vec<f64> = rows.iter().map(|r| r.values()[i]).collect();
        let m = xs.iter().sum::<f64>() / n;
        means[i] = m;
        stds[i] = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    }
    let mut r = MetricsReport::from_values(means);
    r.stds = Some(stds);
    Ok(r)
}

/// One row per run followed by `mean` and `std` rows.
pub fn write_csv(path: impl AsRef<Path>, runs: &[MetricsReport], summary: Option<&MetricsReport>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["row"];
    header.extend(METRIC_NAMES);
    w.write_record(&header)?;
    let fmt = |v: f64| format!("{v:.10}");
    for (i, r) in runs.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(r.values().map(fmt));
        w.write_record(&rec)?;
    }
    if let Some(s) = summary {
        let mut rec = vec!["mean".to_string()];
        rec.extend(s.values().map(fmt));
        w.write_record(&rec)?;
        if let Some(stds) = s.stds {
            let mut rec = vec!["std".to_string()];
            rec.extend(stds.map(fmt));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn confusion_fixtures() {
        let c = confusion(&[0.9, 0.4], &[1, 0], DEFAULT_THRESHOLD).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (1, 1, 0, 0));
        assert_eq!(confusion(&[0.5], &[1], 0.5).unwrap().tp, 1);
        let c = confusion(&[0.1, 0.7, 0.3], &[1, 1, 1], 0.5).unwrap();
        assert_eq!((c.tn, c.fp), (0, 0));
        assert!(matches!(confusion(&[0.1], &[1, 0], 0.5), Err(Error::Contract(_))));
    }

    #[test]
    fn point_metric_fixture() {
        let m = point_metrics(&ConfusionCounts { tp: 3, fp: 1, fn_: 2, tn: 4 });
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert_abs_diff_eq!(m.f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(m.accuracy, 0.7);
        assert_eq!(m.specificity, 0.8);
        let m = point_metrics(&ConfusionCounts { tp: 0, fp: 0, fn_: 2, tn: 3 });
        assert_eq!(m.precision, 0.0);
        assert!(m.undefined.contains(&"precision"));
        let perfect = point_metrics(&ConfusionCounts { tp: 2, fp: 0, fn_: 0, tn: 2 });
        assert_eq!([perfect.precision, perfect.recall, perfect.f1, perfect.accuracy, perfect.specificity], [1.0; 5]);
    }

    #[test]
    fn auroc_fixtures() {
        assert_eq!(auroc(&[1.0, 0.0, 1.0], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &[1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(auroc_threshold_sweep(&[0.3; 4], &[1, 0, 1, 0]).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::Domain(_))));
    }

    #[test]
    fn aggregate_fixture() {
        let mk = |a| MetricsReport {
            accuracy: a,
            ..MetricsReport::default()
        };
        let agg = aggregate(&[mk(0.6), mk(0.8)]).unwrap();
        assert_abs_diff_eq!(agg.accuracy, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(agg.stds.unwrap()[3], 0.02f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(aggregate(&[mk(0.6)]), Err(Error::Domain(_))));
    }

    #[test]
    fn table_formatting() {
        let r = MetricsReport {
            accuracy: 0.7061,
            stds: Some([0.0, 0.0, 0.0, 0.0258, 0.0, 0.0]),
            ..MetricsReport::default()
        };
        assert_eq!(r.format_row()[3], "70.61 ± 2.58");
    }
}
