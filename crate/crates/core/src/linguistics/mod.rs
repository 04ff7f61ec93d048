//! Lexicon features, text statistics and the statistical tests used to
//! compare truthful and deceptive statements.

pub mod lexicon;
pub mod report;
pub mod stats;
pub mod textstats;

pub use lexicon::{extract_features, FeatureVector, LexiconDictionary};
pub use report::{analyze, correlation_report, AnalysisReport, CorrelationRow};
pub use textstats::{text_stats, TextStats};
