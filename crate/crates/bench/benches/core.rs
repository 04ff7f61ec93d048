use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veracity_core::autodiff::Graph;
use veracity_core::data::synthetic;
use veracity_core::data::vocab::{build_vocab, encode};
use veracity_core::explain::lime::{fit_surrogate, perturb, proximity, PerturbationSample, DEFAULT_RIDGE, DEFAULT_SIGMA};
use veracity_core::linguistics::{extract_features, LexiconDictionary};
use veracity_core::metrics::{auroc, auroc_threshold_sweep};
use veracity_core::model::{Architecture, Model, ModelConfig, ModelInput, StatementInput};

fn model_setup(arch: Architecture) -> (Model, ModelInput) {
    let pairs = synthetic::generate(200, 1);
    let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.q1.as_str(), p.q2.as_str()]).collect();
    let vocab = build_vocab(&texts, 1).unwrap();
    let cfg = ModelConfig {
        architecture: arch,
        d: 32,
        heads: 4,
        encoder_layers: 2,
        vocab_size: vocab.len(),
        max_len_q1: 16,
        max_len_q2: 16,
        ..Default::default()
    };
    let input = ModelInput {
        q1: StatementInput::Tokens(encode(&pairs[0].q1, &vocab, 16)),
        q2: Some(StatementInput::Tokens(encode(&pairs[0].q2, &vocab, 16))),
        lexicon: None,
    };
    (Model::build(&cfg, 0).unwrap(), input)
}

fn bench_model(c: &mut Criterion) {
    let mut group = c.benchmark_group("model");
    for arch in [Architecture::Dense, Architecture::Coatt, Architecture::TransformerCoatt] {
        let (model, input) = model_setup(arch);
        group.bench_with_input(BenchmarkId::new("forward", arch), &input, |b, x| {
            b.iter(|| model.predict(black_box(x)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("forward_backward", arch), &input, |b, x| {
            b.iter(|| {
                let mut g = Graph::new();
                let out = model.forward_graph(&mut g, model.params(), black_box(x)).unwrap();
                g.backward(out.probability).unwrap();
            })
        });
    }
    group.finish();
}

fn bench_auroc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 2000;
    let scores: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 100.0).round() / 100.0).collect();
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    c.bench_function("auroc/midrank_2000", |b| b.iter(|| auroc(black_box(&scores), &labels).unwrap()));
    c.bench_function("auroc/sweep_2000", |b| {
        b.iter(|| auroc_threshold_sweep(black_box(&scores), &labels).unwrap())
    });
}

fn bench_surrogate(c: &mut Criterion) {
    let masks = perturb(30, 5000, 1).unwrap();
    let samples: Vec<PerturbationSample> = masks
        .into_iter()
        .map(|mask| {
            let x: f64 = mask.iter().enumerate().map(|(i, &m)| if m { (i as f64 - 15.0) / 30.0 } else { 0.0 }).sum();
            PerturbationSample {
                proximity_weight: proximity(&mask, DEFAULT_SIGMA),
                model_prob: 1.0 / (1.0 + (-x).exp()),
                mask,
            }
        })
        .collect();
    c.bench_function("explain/fit_surrogate_30x5000", |b| {
        b.iter(|| fit_surrogate(black_box(&samples), 10, DEFAULT_RIDGE).unwrap())
    });
}

fn bench_lexicon(c: &mut Criterion) {
    let dict = LexiconDictionary::parse(include_str!("../../../data/demo_lexicon.dic"), "demo_lexicon.dic").unwrap();
    let pairs = synthetic::generate(100, 2);
    c.bench_function("lexicon/extract_100_docs", |b| {
        b.iter(|| {
            for p in &pairs {
                black_box(extract_features(&p.id, &p.combined_text(), &dict));
            }
        })
    });
}

criterion_group!(benches, bench_model, bench_auroc, bench_surrogate, bench_lexicon);
criterion_main!(benches);
