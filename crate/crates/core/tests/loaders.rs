//! File formats: corpora, encodings, dictionaries, feature tables, configs.

use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use veracity_core::autodiff::Tensor;
use veracity_core::data::embeddings::EmbeddingSet;
use veracity_core::data::{load_open_domain, load_paired, synthetic, write_paired_csv};
use veracity_core::linguistics::lexicon::{read_feature_csv, write_feature_csv};
use veracity_core::linguistics::{extract_features, LexiconDictionary};
use veracity_core::model::{Architecture, ModelConfig};
use veracity_core::text::words;
use veracity_core::train::Resources;
use veracity_core::Error;

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn parse_line(e: Error) -> usize {
    match e {
        Error::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn bundled_corpus_has_the_planted_rule() {
    let pairs = load_paired(repo_file("data/synthetic_pairs.csv")).unwrap();
    assert_eq!(pairs.len(), 2000);
    let group = |text: &str, a: &[&str], b: &[&str]| {
        let ws = words(text);
        if ws.iter().any(|w| a.contains(&w.as_str())) {
            Some(true)
        } else if ws.iter().any(|w| b.contains(&w.as_str())) {
            Some(false)
        } else {
            None
        }
    };
    for p in &pairs {
        let g1 = group(&p.q1, &synthetic::OUTDOOR_ACTIVITIES, &synthetic::INDOOR_ACTIVITIES).unwrap();
        let g2 = group(&p.q2, &synthetic::OUTDOOR_EVIDENCE, &synthetic::INDOOR_EVIDENCE).unwrap();
        assert_eq!(p.label == 1, g1 != g2, "{}", p.id);
    }
    assert_eq!(pairs, synthetic::generate(2000, 1), "bundled file is stale");
}

#[test]
fn csv_and_jsonl_agree() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "a.csv", "id,q1,q2,label\nx1,\"Hi, there\",Yes,deceptive\nx2,Plain,Text,0\n");
    let jsonl = write(
        &dir,
        "a.jsonl",
        "{\"id\":\"x1\",\"q1\":\"Hi, there\",\"q2\":\"Yes\",\"label\":1}\n\n{\"id\":\"x2\",\"q1\":\"Plain\",\"q2\":\"Text\",\"label\":\"truthful\"}\n",
    );
    assert_eq!(load_paired(&csv).unwrap(), load_paired(&jsonl).unwrap());
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("id,q1,label\nx,a,1\n", 1),
        ("id,q1,q2,label\nx,a,b,1\ny,a,b,maybe\n", 3),
        ("id,q1,q2,label\nx,a,b,1\nx,c,d,0\n", 3),
        ("id,q1,q2,label\nx,,b,1\n", 2),
        ("id,q1,q2,label\n,a,b,1\n", 2),
    ];
    for (i, (body, line)) in cases.iter().enumerate() {
        let p = write(&dir, &format!("c{i}.csv"), body);
        assert_eq!(parse_line(load_paired(&p).unwrap_err()), *line, "{body:?}");
    }
    let p = write(&dir, "bad.jsonl", "{\"id\":\"a\",\"q1\":\"x\",\"q2\":\"y\",\"label\":1}\nnot json\n");
    assert_eq!(parse_line(load_paired(&p).unwrap_err()), 2);
    match load_paired(dir.path().join("missing.csv")) {
        Err(Error::File { path, .. }) => assert!(path.ends_with("missing.csv")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn open_domain_records_split_in_half() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "o.csv", "id,text,label\nd1,one two three four five,1\n");
    let pairs = load_open_domain(&p).unwrap();
    assert_eq!(pairs[0].q1, "one two three");
    assert_eq!(pairs[0].q2, "four five");
}

#[test]
fn written_corpus_reads_back() {
    let dir = TempDir::new().unwrap();
    let pairs = synthetic::generate(30, 9);
    let p = dir.path().join("s.csv");
    write_paired_csv(&p, &pairs).unwrap();
    assert_eq!(load_paired(&p).unwrap(), pairs);
}

fn f32_exact(mut t: Tensor) -> Tensor {
    for v in t.data_mut() {
        *v = f64::from(*v as f32);
    }
    t
}

#[test]
fn embeddings_roundtrip_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut set = EmbeddingSet::new(4);
    for i in 0..5 {
        // f32-representable values survive the on-disk precision
        let q1 = f32_exact(Tensor::unit_uniform(4, 3 + i, &mut rng));
        let q2 = f32_exact(Tensor::unit_uniform(4, 2, &mut rng));
        set.insert(format!("doc{i}"), q1, q2).unwrap();
    }
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("e.vemb");
    set.save(&p).unwrap();
    let back = EmbeddingSet::load(&p).unwrap();
    for i in 0..5 {
        let id = format!("doc{i}");
        let (a, b) = (back.get(&id).unwrap(), set.get(&id).unwrap());
        assert_eq!(a.q1.data(), b.q1.data());
        assert_eq!(a.q2.shape(), b.q2.shape());
        assert_eq!(a.q2.data(), b.q2.data());
    }
    let mut bytes = Vec::new();
    back.write(&mut bytes).unwrap();
    assert_eq!(bytes, fs::read(&p).unwrap());

    assert!(matches!(back.get("nope"), Err(Error::Lookup(_))));
    let res = Resources {
        lexicon: None,
        embeddings: Some(back),
    };
    let cfg = ModelConfig {
        architecture: Architecture::Coatt,
        d: 8,
        heads: 2,
        ..ModelConfig::default()
    };
    assert!(matches!(res.complete_config(&cfg, None), Err(Error::Config(_))));
}

#[test]
fn truncated_embedding_file_is_rejected() {
    let mut set = EmbeddingSet::new(2);
    set.insert("a", Tensor::zeros(2, 2), Tensor::zeros(2, 1)).unwrap();
    let mut bytes = Vec::new();
    set.write(&mut bytes).unwrap();
    bytes.truncate(bytes.len() - 3);
    assert!(EmbeddingSet::read(bytes.as_slice()).is_err());
}

#[test]
fn demo_lexicon_parses_and_counts() {
    let dict = LexiconDictionary::load(repo_file("data/demo_lexicon.dic")).unwrap();
    assert!(dict.categories().iter().any(|c| c == "leisure"));
    let fv = extract_features("d", "I went hiking yesterday. The trail was great!", &dict);
    // 8 words: i, hiking, yesterday, the, trail, great each hit one category
    assert_eq!(fv.get("word_count"), Some(8.0));
    assert_eq!(fv.get("i"), Some(12.5));
    assert_eq!(fv.get("leisure"), Some(12.5));
    assert_eq!(fv.get("nature"), Some(12.5));
    assert_eq!(fv.get("exclamation_marks"), Some(12.5));
}

#[test]
fn feature_csv_roundtrip() {
    let dict = LexiconDictionary::load(repo_file("data/demo_lexicon.dic")).unwrap();
    let rows: Vec<_> = synthetic::generate(5, 2)
        .iter()
        .map(|p| extract_features(&p.id, &p.combined_text(), &dict))
        .collect();
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("f.csv");
    write_feature_csv(&p, &rows).unwrap();
    let table = read_feature_csv(&p).unwrap();
    assert_eq!(table.rows.len(), 5);
    for (a, b) in rows.iter().zip(&table.rows) {
        assert_eq!(a.doc_id, b.doc_id);
        assert_eq!(a.values, b.values);
    }
    let bad = write(&dir, "g.csv", "id,wc\nx,3\n");
    assert_eq!(parse_line(read_feature_csv(&bad).unwrap_err()), 1);
}

proptest! {
    #[test]
    fn arbitrary_text_survives_csv(q1 in "[^\u{0}]{1,40}", q2 in "[^\u{0}]{0,40}", label in 0u8..2) {
        prop_assume!(!q1.trim().is_empty());
        let pair = veracity_core::data::StatementPair {
            id: "p".into(),
            q1: q1.clone(),
            q2: q2.clone(),
            label,
            source: veracity_core::data::Source::Paired,
        };
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("p.csv");
        write_paired_csv(&p, std::slice::from_ref(&pair)).unwrap();
        let back = load_paired(&p).unwrap();
        prop_assert_eq!(&back[0].q2, &q2);
        prop_assert_eq!(back[0].label, label);
    }
}
