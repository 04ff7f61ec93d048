//! Acceptance criteria, one test per criterion. Each prints a single
//! `criterion N ... PASS|FAIL` line with the tolerance it was held to.
//!
//! Criterion 8 needs the original corpus and is ignored by default:
//!
//! ```text
//! VERACITY_ORIGINAL_DATA=pairs.csv VERACITY_ORIGINAL_LIWC=liwc.csv \
//!     cargo test -p veracity-cli --test acceptance -- --ignored
//! ```

#![allow(clippy::excessive_precision)]

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veracity_core::autodiff::gradcheck::{check_gradients, DEFAULT_STEP};
use veracity_core::autodiff::{Activation, Dense, MultiHeadAttention, ParamStore, Tensor, TransformerEncoder};
use veracity_core::coattention::{coattend, coattend_gradcheck, CoAttentionParams};
use veracity_core::data::{load_paired, StatementPair};
use veracity_core::explain::{explain_pair, ExplainOptions, PairScorer};
use veracity_core::linguistics::lexicon::read_feature_csv;
use veracity_core::linguistics::report::FeatureSource;
use veracity_core::linguistics::stats::{benjamini_hochberg, jaccard, pearson, point_biserial, welch_ttest};
use veracity_core::linguistics::analyze;
use veracity_core::metrics::{auroc, auroc_threshold_sweep, confusion, point_metrics};
use veracity_core::model::{Architecture, Model, ModelConfig};
use veracity_core::train::cv::stratified_split;
use veracity_core::train::{
    class_weights, cross_validate, fit, fit_phase, predict_all, stratified_folds, ClassWeights, OptimizerKind, Phase,
    Resources, TrainConfig,
};

fn verdict(n: u8, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::unit_uniform(rows, cols, rng)
}

// ---------------------------------------------------------------- 1

const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(60);

#[test]
fn criterion_1_gradient_integrity() {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut note = |e: f64, what: String| {
        if e > worst.0 {
            worst = (e, what);
        }
    };
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 * rng.gen_range(1..=8usize);
        let n = rng.gen_range(1..=6usize);
        let t = rng.gen_range(1..=6usize);
        let mask: Vec<bool> = (0..n).map(|j| j == 0 || rng.gen_bool(0.8)).collect();

        for act in [Activation::Linear, Activation::Tanh, Activation::Sigmoid, Activation::Relu] {
            let mut store = ParamStore::new();
            let out = rng.gen_range(1..=6usize);
            let layer = Dense::init(&mut store, "dense", d, out, act, &mut rng);
            let x = random(n, d, &mut rng);
            let r = check_gradients(&store, &[x], DEFAULT_STEP, seed, |g, s, v| layer.forward(g, s, v[0])).unwrap();
            note(r.max_rel_error, format!("dense {act:?} seed {seed}: {}", r.worst));
        }

        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::init(&mut store, "mha", d, 2, &mut rng).unwrap();
        let x = random(d, n, &mut rng);
        let r = check_gradients(&store, &[x], DEFAULT_STEP, seed, |g, s, v| Ok(mha.forward(g, s, v[0], &mask)?.output))
            .unwrap();
        note(r.max_rel_error, format!("attention seed {seed}: {}", r.worst));

        let mut store = ParamStore::new();
        let enc = TransformerEncoder::init(&mut store, "enc", d, 1, 2, &mut rng).unwrap();
        let x = random(d, n, &mut rng);
        let r = check_gradients(&store, &[x], DEFAULT_STEP, seed, |g, s, v| enc.forward(g, s, v[0], &mask)).unwrap();
        note(r.max_rel_error, format!("encoder seed {seed}: {}", r.worst));

        let e = coattend_gradcheck(d, n, t, d, seed).unwrap();
        note(e, format!("coattention seed {seed}"));
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "gradient integrity",
        worst.0 < GRAD_TOL && elapsed < GRAD_BUDGET,
        &format!("max rel error {:.2e} < {GRAD_TOL:e} at {}; {:.1?} < {GRAD_BUDGET:?}", worst.0, worst.1, elapsed),
    );
}

// ---------------------------------------------------------------- 2

const SUM_TOL: f64 = 1e-9;
const EQUIV_TOL: f64 = 1e-12;

#[test]
fn criterion_2_coattention_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();

    let p = CoAttentionParams::init(768, 768, &mut rng);
    let (c, s) = (random(768, 12, &mut rng), random(768, 20, &mut rng));
    let out = coattend(&c, &s, &p, &[true; 12], &[true; 20]).unwrap();
    if out.f.dims() != (12, 20) || out.z.dims() != (1, 1536) {
        failures.push(format!("shapes F {:?} z {:?}", out.f.dims(), out.z.dims()));
    }

    let mut max_sum_err = 0.0f64;
    let mut max_equiv = 0.0f64;
    for trial in 0..20 {
        let d = rng.gen_range(2..=16usize);
        let (n, t) = (rng.gen_range(1..=6usize), rng.gen_range(1..=6usize));
        let p = CoAttentionParams::init(d, d, &mut rng);
        let (c, s) = (random(d, n, &mut rng), random(d, t, &mut rng));
        let out = coattend(&c, &s, &p, &vec![true; n], &vec![true; t]).unwrap();
        max_sum_err = max_sum_err.max((out.a_s.sum() - 1.0).abs()).max((out.a_c.sum() - 1.0).abs());
        let concat: Vec<f64> = out.s_hat.data().iter().chain(out.c_hat.data()).copied().collect();
        if out.z.data() != concat.as_slice() {
            failures.push(format!("trial {trial}: z is not [s_hat, c_hat]"));
        }

        // reversing the tokens of each statement permutes maps, fixes summaries
        let rev = |k: usize| (0..k).rev().collect::<Vec<_>>();
        let out2 = coattend(
            &c.select_columns(&rev(n)).unwrap(),
            &s.select_columns(&rev(t)).unwrap(),
            &p,
            &vec![true; n],
            &vec![true; t],
        )
        .unwrap();
        for j in 0..n {
            max_equiv = max_equiv.max((out.a_c.data()[j] - out2.a_c.data()[n - 1 - j]).abs());
            for k in 0..t {
                max_equiv = max_equiv.max((out.f.get(j, k) - out2.f.get(n - 1 - j, t - 1 - k)).abs());
            }
        }
        for k in 0..t {
            max_equiv = max_equiv.max((out.a_s.data()[k] - out2.a_s.data()[t - 1 - k]).abs());
        }
        for (a, b) in out.z.data().iter().zip(out2.z.data()) {
            max_equiv = max_equiv.max((a - b).abs());
        }
    }
    if max_sum_err >= SUM_TOL {
        failures.push(format!("attention sums off by {max_sum_err:e}"));
    }
    if max_equiv >= EQUIV_TOL {
        failures.push(format!("permutation error {max_equiv:e}"));
    }
    verdict(
        2,
        "co-attention contracts",
        failures.is_empty(),
        &format!(
            "sum err {max_sum_err:.1e} < {SUM_TOL:e}; permutation err {max_equiv:.1e} < {EQUIV_TOL:e}; z exact; 768-d shapes{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    );
}

// ---------------------------------------------------------------- 3

const AUROC_TOL: f64 = 1e-12;

fn pair_count_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

#[test]
fn criterion_3_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut vs_oracle, mut rank_vs_sweep) = (0.0f64, 0.0f64);
    let mut instances = 0;
    while instances < 1000 {
        let n = rng.gen_range(2..=12usize);
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            continue;
        }
        // coarse grid so ties are common
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..5u8)) / 4.0).collect();
        let a = auroc(&scores, &labels).unwrap();
        let b = auroc_threshold_sweep(&scores, &labels).unwrap();
        vs_oracle = vs_oracle.max((a - pair_count_auroc(&scores, &labels)).abs());
        rank_vs_sweep = rank_vs_sweep.max((a - b).abs());
        instances += 1;
    }

    // tp 2 (0.9, 0.5), fp 1 (0.6), fn 1 (0.4), tn 1 (0.2)
    let c = confusion(&[0.9, 0.6, 0.4, 0.2, 0.5], &[1, 0, 1, 0, 1], 0.5).unwrap();
    let pm = point_metrics(&c);
    let fixture = (c.tp, c.fp, c.fn_, c.tn) == (2, 1, 1, 1)
        && pm.precision == 2.0 / 3.0
        && pm.recall == 2.0 / 3.0
        && pm.f1 == 2.0 / 3.0
        && pm.accuracy == 3.0 / 5.0
        && pm.specificity == 1.0 / 2.0;
    verdict(
        3,
        "metric oracles",
        vs_oracle < AUROC_TOL && rank_vs_sweep < AUROC_TOL && fixture,
        &format!(
            "1000 tied instances: |rank - pairs| {vs_oracle:.1e}, |rank - sweep| {rank_vs_sweep:.1e} < {AUROC_TOL:e}; confusion fixture exact: {fixture}"
        ),
    );
}

// ---------------------------------------------------------------- 4

const WEIGHT_TOL: f64 = 1e-9;

fn tiny(arch: Architecture) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        d: 8,
        heads: 2,
        encoder_layers: 1,
        head_widths: vec![8],
        max_len_q1: 8,
        max_len_q2: 8,
        ..ModelConfig::default()
    }
}

#[test]
fn criterion_4_protocol_fidelity() {
    let pairs = veracity_core::data::synthetic::generate(60, 4);
    let tc = TrainConfig {
        max_epochs: 1,
        optimizer: Some(OptimizerKind::Adam),
        seed: 3,
        ..TrainConfig::default()
    };
    let cv = cross_validate(&pairs, &tiny(Architecture::Dense), &tc, &Resources::default(), &[], |_| Ok(())).unwrap();
    let runs = cv.runs.len();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_spread = 0usize;
    for _ in 0..200 {
        let labels: Vec<u8> = (0..rng.gen_range(40..400)).map(|_| u8::from(rng.gen_bool(0.45))).collect();
        let folds = stratified_folds(&labels, 5, rng.gen()).unwrap();
        for class in 0..2u8 {
            let mut sizes = [0usize; 5];
            for (f, _) in folds.iter().zip(&labels).filter(|(_, &l)| l == class) {
                sizes[*f] += 1;
            }
            worst_spread = worst_spread.max(sizes.iter().max().unwrap() - sizes.iter().min().unwrap());
        }
    }

    let w = class_weights(783, 857).unwrap();
    let weight_err = (w.weight_truthful - 1.04725415070242656)
        .abs()
        .max((w.weight_deceptive - 0.95682613768961494).abs());

    // a constant validation loss plateaus after `plateau_patience` epochs
    let refs: Vec<&StatementPair> = pairs.iter().collect();
    let res = Resources::default();
    let vocab = res.vocab(&refs, 1).unwrap();
    let cfg = res.complete_config(&tiny(Architecture::Coatt), vocab.as_ref()).unwrap();
    let ex = res.examples(&refs, vocab.as_ref(), &cfg).unwrap();
    let sgd = TrainConfig {
        max_epochs: 40,
        optimizer: Some(OptimizerKind::Sgd),
        lr_initial: 0.001,
        ..TrainConfig::default()
    };
    let mut model = Model::build(&cfg, 1).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let before = model.params().clone();
    let h = fit_phase(&mut model, &ex[..45], &ex[45..], &sgd, &ClassWeights::UNIT, Phase::Frozen, &mut r).unwrap();
    let lrs: Vec<f64> = h.epochs.iter().map(|e| e.lr).collect();
    let plateau = lrs[0] == 0.001 && lrs.iter().any(|&l| (l - 0.0001).abs() < 1e-18);

    let mut frozen_identical = true;
    for (a, b) in before.layers().iter().zip(model.params().layers()) {
        if Model::is_encoder_layer(&a.name) {
            frozen_identical &= a.weights.values().zip(b.weights.values()).all(|(x, y)| {
                x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits())
            });
        }
    }
    verdict(
        4,
        "protocol fidelity",
        runs == 25 && worst_spread <= 1 && weight_err < WEIGHT_TOL && plateau && frozen_identical,
        &format!(
            "{runs} runs; fold spread {worst_spread} <= 1; class weight err {weight_err:.1e} < {WEIGHT_TOL:e}; lr 0.001 -> 0.0001: {plateau}; frozen encoder bit-identical: {frozen_identical}"
        ),
    );
}

// ---------------------------------------------------------------- 5

const COATT_MIN_ACC: f64 = 0.95;
const DENSE_MAX_ACC: f64 = 0.80;
const SANITY_BUDGET: Duration = Duration::from_secs(600);

fn held_out_accuracy(pairs: &[StatementPair], model_cfg: &ModelConfig, tc: &TrainConfig, seed: u64) -> f64 {
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let all: Vec<usize> = (0..pairs.len()).collect();
    let (rest, test) = stratified_split(&all, &labels, 0.2, seed);
    let (train, val) = stratified_split(&rest, &labels, tc.val_fraction, seed + 1);
    let pick = |ids: &[usize]| ids.iter().map(|&i| &pairs[i]).collect::<Vec<_>>();
    let res = Resources::default();
    let vocab = res.vocab(&pick(&rest), 1).unwrap();
    let cfg = res.complete_config(model_cfg, vocab.as_ref()).unwrap();
    let examples = |ids: &[usize]| res.examples(&pick(ids), vocab.as_ref(), &cfg).unwrap();
    let (train_x, val_x, test_x) = (examples(&train), examples(&val), examples(&test));
    let n_dec = train_x.iter().filter(|e| e.label == 1).count();
    let weights = class_weights(train_x.len() - n_dec, n_dec).unwrap();
    let mut model = Model::build(&cfg, seed + 2).unwrap();
    fit(&mut model, &train_x, &val_x, tc, &weights, seed + 3).unwrap();
    let scores = predict_all(&model, &test_x).unwrap();
    let correct = scores.iter().zip(&test_x).filter(|(s, e)| u8::from(**s >= 0.5) == e.label).count();
    correct as f64 / test_x.len() as f64
}

#[test]
fn criterion_5_learning_sanity() {
    let pairs = load_paired(repo_file("data/synthetic_pairs.csv")).unwrap();
    assert_eq!(pairs.len(), 2000);
    let arch = |a| ModelConfig {
        architecture: a,
        d: 32,
        heads: 2,
        encoder_layers: 1,
        ..ModelConfig::default()
    };
    let tc = TrainConfig {
        optimizer: Some(OptimizerKind::Adam),
        max_epochs: 100,
        ..TrainConfig::default()
    };
    let one_core = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let (coatt, dense) = one_core.install(|| {
        (
            held_out_accuracy(&pairs, &arch(Architecture::Coatt), &tc, 1),
            held_out_accuracy(&pairs, &arch(Architecture::Dense), &tc, 1),
        )
    });
    let elapsed = start.elapsed();
    verdict(
        5,
        "learning sanity",
        coatt >= COATT_MIN_ACC && coatt > dense && dense <= DENSE_MAX_ACC && elapsed < SANITY_BUDGET,
        &format!(
            "coatt {coatt:.4} >= {COATT_MIN_ACC}; dense {dense:.4} <= {DENSE_MAX_ACC} and < coatt; one thread, {elapsed:.0?} < {SANITY_BUDGET:?}"
        ),
    );
}

// ---------------------------------------------------------------- 6

const TOP1_MIN: usize = 95;
const CONSTANT_TOL: f64 = 1e-6;

struct Logistic {
    bias: f64,
    weights: HashMap<String, f64>,
}

impl PairScorer for Logistic {
    fn score(&self, q1: &str, q2: &str) -> veracity_core::Result<f64> {
        let z = self.bias
            + q1
                .split_whitespace()
                .chain(q2.split_whitespace())
                .map(|w| self.weights.get(w).copied().unwrap_or(0.0))
                .sum::<f64>();
        Ok(1.0 / (1.0 + (-z).exp()))
    }
}

#[test]
fn criterion_6_explainer_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let words = |p: &str| (0..5).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let (q1, q2) = (words("a").join(" "), words("b").join(" "));
    let mut top1 = 0;
    for trial in 0..100 {
        let weights: HashMap<String, f64> =
            words("a").into_iter().chain(words("b")).map(|w| (w, rng.gen_range(-1.0..1.0))).collect();
        let m = Logistic {
            bias: rng.gen_range(-1.0..1.0),
            weights,
        };
        let truth = m.weights.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
        let opts = ExplainOptions {
            n_samples: 5000,
            seed: trial,
            ..Default::default()
        };
        let e = explain_pair(&m, &q1, &q2, &opts).unwrap();
        top1 += usize::from(&e.token_weights[0].token == truth);
    }

    let mut worst_constant = 0.0f64;
    for (i, c) in [0.0, 0.42, 1.0].into_iter().enumerate() {
        let f = move |_: &str, _: &str| -> veracity_core::Result<f64> { Ok(c) };
        let opts = ExplainOptions {
            seed: i as u64,
            ..Default::default()
        };
        let e = explain_pair(&f, "I went hiking on saturday.", "Ask about the boots.", &opts).unwrap();
        worst_constant = e.token_weights.iter().map(|w| w.weight.abs()).fold(worst_constant, f64::max);
    }
    verdict(
        6,
        "explainer fidelity",
        top1 >= TOP1_MIN && worst_constant < CONSTANT_TOL,
        &format!("logistic top-1 {top1}/100 >= {TOP1_MIN}; constant model max |w| {worst_constant:.1e} < {CONSTANT_TOL:e}"),
    );
}

// ---------------------------------------------------------------- 7

const PB_TOL: f64 = 1e-12;
const WELCH_TOL: f64 = 1e-8;

/// (a, b, t, df, two-sided p) computed with 30-digit arithmetic.
type WelchCase = (&'static [f64], &'static [f64], f64, f64, f64);
const WELCH_REFERENCE: [WelchCase; 2] = [
    (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], -1.0, 8.0, 0.34659350708733424783),
    (
        &[1.2, 3.4, 2.2, 5.1, 4.4, 3.3],
        &[7.1, 6.2, 8.8, 5.9],
        -4.2802374123545376663,
        6.9937056154337126941,
        0.0036618852752871798766,
    ),
];

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn exhaustive_bh(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len();
    let k = (1..=m)
        .filter(|&k| p.iter().filter(|&&q| q <= k as f64 * alpha / m as f64).count() >= k)
        .max()
        .unwrap_or(0);
    let cut = k as f64 * alpha / m as f64;
    p.iter().map(|&q| k > 0 && q <= cut).collect()
}

#[test]
fn criterion_7_statistics_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pb_err = 0.0f64;
    let mut done = 0;
    while done < 1000 {
        let n = rng.gen_range(3..60usize);
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            continue;
        }
        let coded: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let r = point_biserial(&values, &labels).unwrap().r;
        pb_err = pb_err.max((r - textbook_pearson(&values, &coded)).abs());
        pb_err = pb_err.max((r - pearson(&values, &coded).unwrap()).abs());
        done += 1;
    }

    let fixture = benjamini_hochberg(&[0.01, 0.02, 0.04, 0.2], 0.05).unwrap().rejected;
    let bh_fixture = fixture == [true, true, false, false];
    let mut bh_mismatch = 0;
    for _ in 0..1000 {
        let m = rng.gen_range(1..30usize);
        let p: Vec<f64> = (0..m).map(|_| rng.gen::<f64>().powi(3)).collect();
        bh_mismatch += usize::from(benjamini_hochberg(&p, 0.05).unwrap().rejected != exhaustive_bh(&p, 0.05));
    }

    let mut welch_err = 0.0f64;
    for (a, b, t, df, p) in WELCH_REFERENCE {
        let r = welch_ttest(a, b).unwrap();
        welch_err = welch_err.max((r.t - t).abs()).max((r.df - df).abs()).max((r.p - p).abs());
    }

    let set = |xs: &[&'static str]| xs.iter().copied().collect::<HashSet<_>>();
    let jac = jaccard(&set(&["a", "b"]), &set(&["b", "c"])).unwrap() == 1.0 / 3.0
        && jaccard(&set(&["a", "b"]), &set(&["a", "b"])).unwrap() == 1.0
        && jaccard(&set(&["a"]), &set(&["b"])).unwrap() == 0.0;

    verdict(
        7,
        "statistics oracles",
        pb_err < PB_TOL && bh_fixture && bh_mismatch == 0 && welch_err < WELCH_TOL && jac,
        &format!(
            "point-biserial vs Pearson {pb_err:.1e} < {PB_TOL:e}; BH fixture 2 rejections: {bh_fixture}; BH mismatches 0/1000: {bh_mismatch}; Welch err {welch_err:.1e} < {WELCH_TOL:e}; Jaccard fixtures exact: {jac}"
        ),
    );
}

// ---------------------------------------------------------------- 8

const TABLE_R_TOL: f64 = 1e-3;
const JACCARD_TOL: f64 = 5e-3;
const TRUTHFUL_TOP: (&str, f64) = ("ingest", 0.1695);
const DECEPTIVE_TOP: (&str, f64) = ("apostro", 0.1850);
const ORIGINAL_JACCARD: [f64; 3] = [0.3618, 0.3548, 0.3341];

#[test]
#[ignore = "needs VERACITY_ORIGINAL_DATA and VERACITY_ORIGINAL_LIWC"]
fn criterion_8_original_corpus_reproduction() {
    let (Ok(data), Ok(liwc)) = (std::env::var("VERACITY_ORIGINAL_DATA"), std::env::var("VERACITY_ORIGINAL_LIWC")) else {
        verdict(8, "original corpus reproduction", false, "data not supplied");
        return;
    };
    let pairs = load_paired(&data).unwrap();
    let table = read_feature_csv(&liwc).unwrap();
    let report = analyze(&pairs, FeatureSource::Imported(&table), 0.05).unwrap();
    let top = |rows: &[veracity_core::linguistics::report::CorrelationRow]| {
        rows.first().map(|r| (r.feature.to_lowercase(), r.r_pb.abs()))
    };
    let matches = |got: Option<(String, f64)>, (name, r): (&str, f64)| {
        got.as_ref().is_some_and(|(f, v)| f.starts_with(name) && (v - r).abs() < TABLE_R_TOL)
    };
    let t = top(&report.correlations.truthful);
    let d = top(&report.correlations.deceptive);
    let jac: Vec<f64> = report.jaccard.iter().map(|r| r.jaccard).collect();
    let jac_ok = jac.len() == 3 && jac.iter().zip(ORIGINAL_JACCARD).all(|(a, b)| (a - b).abs() < JACCARD_TOL);
    verdict(
        8,
        "original corpus reproduction",
        matches(t.clone(), TRUTHFUL_TOP) && matches(d.clone(), DECEPTIVE_TOP) && jac_ok,
        &format!("truthful top {t:?}, deceptive top {d:?} within {TABLE_R_TOL:e}; Jaccard {jac:?} within {JACCARD_TOL:e}"),
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_9_determinism() {
    let tmp = tempfile::TempDir::new().unwrap();
    let data = repo_file("data/synthetic_pairs.csv");
    let small = tmp.path().join("pairs.csv");
    // a 200-row slice keeps the check quick
    let text = fs::read_to_string(&data).unwrap();
    fs::write(&small, text.lines().take(201).collect::<Vec<_>>().join("\n") + "\n").unwrap();
    let quick = repo_file("configs/quick.json");
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_veracity"))
            .args(["train", "--data"])
            .arg(&small)
            .arg("--out")
            .arg(out)
            .arg("--config")
            .arg(&quick)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(out.join("metrics.json")).unwrap()
    };
    let a = run(&tmp.path().join("a"));
    let b = run(&tmp.path().join("b"));
    verdict(
        9,
        "determinism",
        a == b,
        &format!("two train runs, metrics.json {} bytes, byte-identical: {}", a.len(), a == b),
    );
}
