use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use veracity_core::config::ExperimentConfig;
use veracity_core::data::embeddings::EmbeddingSet;
use veracity_core::data::vocab::Vocabulary;
use veracity_core::data::{load_open_domain, load_paired, StatementPair};
use veracity_core::explain::{explain_pair, ExplainOptions, ModelScorer};
use veracity_core::linguistics::lexicon::read_feature_csv;
use veracity_core::linguistics::report::FeatureSource;
use veracity_core::linguistics::{analyze, LexiconDictionary};
use veracity_core::metrics::{self, MetricsReport, DEFAULT_THRESHOLD};
use veracity_core::model::{Architecture, Model};
use veracity_core::train::{cross_validate, predict_all, Resources, RunRecord};
use veracity_core::{Error, Result};

use crate::args::{AnalyzeArgs, DataArgs, EvaluateArgs, ExplainArgs, TrainArgs};
use crate::ledger::{self, Ledger, LedgerEntry};

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

fn load_data(a: &DataArgs) -> Result<Vec<StatementPair>> {
    if a.open_domain {
        load_open_domain(&a.data)
    } else {
        load_paired(&a.data)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(file_err(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(file_err(path))
}

/// Dictionary in a form that can ride along in a checkpoint.
fn lexicon_json(d: &LexiconDictionary) -> serde_json::Value {
    let cats: Vec<serde_json::Value> = d
        .categories()
        .iter()
        .enumerate()
        .map(|(i, name)| json!([name, d.patterns(i)]))
        .collect();
    json!(cats)
}

fn lexicon_from_json(v: &serde_json::Value) -> Result<Option<LexiconDictionary>> {
    if v.is_null() {
        return Ok(None);
    }
    let cats: Vec<(String, Vec<String>)> = serde_json::from_value(v.clone())?;
    let borrowed: Vec<Vec<&str>> = cats.iter().map(|(_, p)| p.iter().map(String::as_str).collect()).collect();
    let pairs: Vec<(&str, &[&str])> = cats
        .iter()
        .zip(&borrowed)
        .map(|((n, _), p)| (n.as_str(), p.as_slice()))
        .collect();
    LexiconDictionary::from_categories(&pairs).map(Some)
}

struct Checkpoint {
    model: Model,
    vocab: Option<Vocabulary>,
    lexicon: Option<LexiconDictionary>,
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).map_err(file_err(path))?;
    let (model, extra) = Model::load(std::io::BufReader::new(f))?;
    let vocab = if extra["vocab"].is_null() {
        None
    } else {
        Some(serde_json::from_value(extra["vocab"].clone())?)
    };
    Ok(Checkpoint {
        model,
        vocab,
        lexicon: lexicon_from_json(&extra["lexicon"])?,
    })
}

fn fingerprint(cfg: &ExperimentConfig, inputs: &[Option<&PathBuf>]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg)?);
    for p in inputs {
        match p {
            Some(p) => {
                h.update(b"\x01");
                h.update(fs::read(p).map_err(file_err(p))?);
            }
            None => h.update(b"\x00"),
        }
    }
    Ok(format!("{:x}", h.finalize()))
}

#[derive(Serialize)]
struct TrainReport<'a> {
    architecture: Architecture,
    config: &'a ExperimentConfig,
    documents: usize,
    summary: &'a MetricsReport,
    runs: &'a [RunRecord],
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(arch) = a.arch {
        cfg.model.architecture = arch;
    }
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    let pairs = load_data(&a.data)?;
    let lexicon = a.dict.as_ref().map(LexiconDictionary::load).transpose()?;
    if cfg.model.architecture == Architecture::CoattLiwc && lexicon.is_none() {
        return Err(Error::Config("coatt_liwc needs a category dictionary (--dict)".into()));
    }
    let embeddings = a.embeddings.as_ref().map(EmbeddingSet::load).transpose()?;
    let res = Resources { lexicon, embeddings };

    let ckpt_dir = a.out.join("checkpoints");
    create_dir(&ckpt_dir)?;
    let fresh = Ledger::new(
        fingerprint(&cfg, &[Some(&a.data.data), a.dict.as_ref(), a.embeddings.as_ref()])?,
        cfg.clone(),
        a.data.data.display().to_string(),
    );
    let ledger = Ledger::resume(&a.out, fresh)?;
    let completed = ledger.completed(&a.out);
    if !completed.is_empty() {
        log::info!("resuming: {} runs already finished", completed.len());
    }
    ledger.write(&a.out)?;
    let ledger = Mutex::new(ledger);
    let lex = res.lexicon.as_ref().map(lexicon_json);

    let result = cross_validate(&pairs, &cfg.model, &cfg.train, &res, &completed, |art| {
        let r = &art.record;
        let name = format!("checkpoints/run_r{}_f{}.ckpt", r.repetition, r.fold);
        let path = a.out.join(&name);
        let file = File::create(&path).map_err(file_err(&path))?;
        let mut w = BufWriter::new(file);
        art.model.save(&mut w, json!({ "vocab": art.vocab, "lexicon": lex, "run": r }))?;
        w.flush().map_err(file_err(&path))?;
        let mut l = ledger.lock().expect("ledger lock");
        l.push(LedgerEntry {
            repetition: r.repetition,
            fold: r.fold,
            checkpoint: name,
            finished_at: ledger::now(),
            record: r.clone(),
        });
        l.write(&a.out)
    })?;

    let mut l = ledger.into_inner().expect("ledger lock");
    l.completed_at = Some(ledger::now());
    l.write(&a.out)?;

    write_json(
        &a.out.join("metrics.json"),
        &TrainReport {
            architecture: cfg.model.architecture,
            config: &cfg,
            documents: pairs.len(),
            summary: &result.summary,
            runs: &result.runs,
        },
    )?;
    let rows: Vec<MetricsReport> = result.runs.iter().map(|r| r.metrics.clone()).collect();
    metrics::write_csv(a.out.join("metrics.csv"), &rows, Some(&result.summary))?;
    print!("{}", result.summary.format_table(cfg.model.architecture.name()));
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let pairs = load_data(&a.data)?;
    let embeddings = a.embeddings.as_ref().map(EmbeddingSet::load).transpose()?;
    let res = Resources {
        lexicon: ck.lexicon,
        embeddings,
    };
    let cfg = ck.model.config().clone();
    let refs: Vec<&StatementPair> = pairs.iter().collect();
    let examples = res.examples(&refs, ck.vocab.as_ref(), &cfg)?;
    let scores = predict_all(&ck.model, &examples)?;
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let report = metrics::evaluate(&scores, &labels, DEFAULT_THRESHOLD)?;
    create_dir(&a.out)?;
    write_json(
        &a.out.join("metrics.json"),
        &json!({
            "architecture": cfg.architecture,
            "documents": pairs.len(),
            "threshold": DEFAULT_THRESHOLD,
            "metrics": report,
        }),
    )?;
    metrics::write_csv(a.out.join("metrics.csv"), std::slice::from_ref(&report), None)?;
    print!("{}", report.format_table(cfg.architecture.name()));
    Ok(())
}

/// Keeps document ids usable as file names.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

pub fn explain(a: &ExplainArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let vocab = ck.vocab.as_ref().ok_or_else(|| {
        Error::Contract("checkpoint was trained on imported encodings and has no vocabulary to perturb".into())
    })?;
    let pairs = load_data(&a.data)?;
    let docs: Vec<&StatementPair> = a
        .doc_ids
        .iter()
        .map(|id| {
            pairs.iter().find(|p| &p.id == id).ok_or_else(|| {
                Error::Lookup(format!("document {id:?} not found in {}", a.data.data.display()))
            })
        })
        .collect::<Result<_>>()?;
    let scorer = ModelScorer::new(&ck.model, vocab, ck.lexicon.as_ref())?;
    let opts = ExplainOptions {
        n_samples: a.samples,
        seed: a.seed,
        target: a.target,
        ..Default::default()
    };
    create_dir(&a.out)?;
    for p in docs {
        let mut e = explain_pair(&scorer, &p.q1, &p.q2, &opts)?;
        e.doc_id = Some(p.id.clone());
        let stem = file_stem(&p.id);
        write_json(&a.out.join(format!("explanation_{stem}.json")), &e)?;
        let html = a.out.join(format!("explanation_{stem}.html"));
        fs::write(&html, e.to_html()).map_err(file_err(&html))?;
        println!("{}: P(deceptive) = {:.4}, surrogate R² = {:.4}", p.id, e.predicted_prob, e.local_fidelity_r2);
        for w in e.token_weights.iter().take(5) {
            println!("  {:<20} {:+.4}", w.token, w.weight);
        }
    }
    Ok(())
}

pub fn analyze_cmd(a: &AnalyzeArgs) -> Result<()> {
    let pairs = load_data(&a.data)?;
    let dict;
    let table;
    let source = match (&a.dict, &a.features) {
        (Some(p), _) => {
            dict = LexiconDictionary::load(p)?;
            FeatureSource::Dictionary(&dict)
        }
        (None, Some(p)) => {
            table = read_feature_csv(p)?;
            FeatureSource::Imported(&table)
        }
        (None, None) => return Err(Error::Config("analyze needs --dict or --features".into())),
    };
    let report = analyze(&pairs, source, a.alpha)?;
    create_dir(&a.out)?;
    write_json(&a.out.join("analysis.json"), &report)?;
    println!(
        "{} documents ({} truthful, {} deceptive); {} truthful and {} deceptive correlates at alpha {}",
        report.documents,
        report.truthful,
        report.deceptive,
        report.correlations.truthful.len(),
        report.correlations.deceptive.len(),
        report.alpha
    );
    Ok(())
}
