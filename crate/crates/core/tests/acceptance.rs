//! Acceptance suite. Every criterion runs even when an earlier one fails;
//! each prints one PASS/FAIL line and the process exits non-zero if any
//! failed.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use multiplex_embed::eval::{self, auc, f1_scores, mean_std};
use multiplex_embed::experiment::link_prediction;
use multiplex_embed::graph::{LayerStats, MultiplexNetwork};
use multiplex_embed::model::{ModelConfig, ModelParams};
use multiplex_embed::rng;
use multiplex_embed::sampler::{undersample, SamplerConfig, Verdict};
use multiplex_embed::synth::{self, AuxLayerSpec, SynthConfig};
use multiplex_embed::trainer::{self, similarity_embeddings, TrainConfig, Variant};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng as _;
use statrs::distribution::{Binomial, DiscreteCDF};

const SEEDS: u64 = 5;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// The shared synthetic benchmark: 1000 nodes, 4 communities, 400 target
/// edges, one auxiliary layer of 20,000 edges at relevance 0.5.
fn benchmark(seed: u64) -> MultiplexNetwork {
    synth::generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn train_cfg(seed: u64, variant: Variant) -> TrainConfig {
    let mut cfg = TrainConfig {
        seed,
        variant,
        ..TrainConfig::default()
    };
    cfg.sampler.seed = seed;
    cfg
}

fn test_auc(net: &MultiplexNetwork, seed: u64, variant: Variant) -> f64 {
    let run = link_prediction(
        net,
        &ModelConfig::default(),
        &train_cfg(seed, variant),
        seed,
    )
    .unwrap();
    run.report.auc.unwrap()
}

// ---------------------------------------------------------------------------

struct Row {
    name: &'static str,
    max_edges: usize,
    target_edges: usize,
    nodes: usize,
    mu: f64,
    density: f64,
}

const TABLE: &[Row] = &[
    Row {
        name: "FFTWYT",
        max_edges: 42_327,
        target_edges: 614,
        nodes: 6_407,
        mu: 4.23,
        density: 1.49e-5,
    },
    Row {
        name: "Sacch-Pomb",
        max_edges: 34_192,
        target_edges: 240,
        nodes: 4_092,
        mu: 4.95,
        density: 1.43e-5,
    },
    Row {
        name: "Sacch-Cere",
        max_edges: 109_045,
        target_edges: 1_426,
        nodes: 6_570,
        mu: 4.33,
        density: 3.30e-5,
    },
    Row {
        name: "Rattus",
        max_edges: 3_014,
        target_edges: 122,
        nodes: 2_640,
        mu: 1.54,
        density: 1.75e-5,
    },
    Row {
        name: "IMDB",
        max_edges: 66_428,
        target_edges: 13_788,
        nodes: 3_550,
        mu: 1.57,
        density: 109e-5,
    },
    Row {
        name: "IMDB*",
        max_edges: 50_484,
        target_edges: 811,
        nodes: 3_550,
        mu: 4.13,
        density: 6.43e-5,
    },
    Row {
        name: "DBLP",
        max_edges: 144_783,
        target_edges: 90_145,
        nodes: 7_907,
        mu: 0.47,
        density: 144e-5,
    },
    Row {
        name: "DBLP*",
        max_edges: 109_428,
        target_edges: 2_039,
        nodes: 7_907,
        mu: 3.98,
        density: 3.26e-5,
    },
];

fn dataset_statistics() -> Outcome {
    let started = Instant::now();
    let mut failures = Vec::new();
    for row in TABLE {
        let stats =
            LayerStats::from_counts(&[row.max_edges, row.target_edges], 1, row.nodes).unwrap();
        let mu_ok = (stats.imbalance_ratio - row.mu).abs() <= 0.01;
        let density_ok = (stats.target_density - row.density).abs() <= 0.02 * row.density;
        if !(mu_ok && density_ok) {
            failures.push(format!(
                "{}: mu {:.4} vs {:.2}, density {:.3e} vs {:.3e}",
                row.name, stats.imbalance_ratio, row.mu, stats.target_density, row.density
            ));
        }
    }
    let elapsed = started.elapsed();
    failures.extend((elapsed >= Duration::from_secs(1)).then(|| format!("took {elapsed:?}")));
    ensure(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} rows reproduced in {elapsed:?}", TABLE.len())
        } else {
            failures.join("; ")
        },
    )
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let net = common::fixture();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for draw in 0..20 {
        let (n, w) = common::check(
            &common::scaled_params(&net, draw, 3.0),
            &net,
            &common::batch(),
        );
        worst = worst.max(w);
        checked += n;
    }
    let elapsed = started.elapsed();
    ensure(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("20 draws, {checked} coordinates, worst relative error {worst:.2e}, {elapsed:?}"),
    )
}

fn optimization_sanity() -> Outcome {
    let net = synth::generate(&SynthConfig {
        num_nodes: 50,
        num_communities: 2,
        target_edges: 40,
        // 5 negatives per positive must fit in the 1185 target non-edges
        aux_layers: vec![AuxLayerSpec {
            edges: 150,
            relevance: 0.5,
        }],
        p_in: 0.9,
        p_out: 0.1,
        seed: 7,
    })
    .unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        learning_rate: 0.01,
        batch_size: 0,
        resample_negatives: false,
        variant: Variant::NoSampling,
        seed: 7,
        ..TrainConfig::default()
    };
    let out = trainer::train(&net, &ModelConfig::default(), &cfg).unwrap();
    let totals = out.log.totals();
    let increases = totals.windows(2).filter(|w| w[1] > w[0]).count();
    ensure(
        totals.len() == 10 && increases == 0,
        format!(
            "L_total {:.4} -> {:.4}, {increases} increases over {} epochs",
            totals[0],
            totals[totals.len() - 1],
            totals.len()
        ),
    )
}

fn ablation_directionality() -> Outcome {
    let started = Instant::now();
    let mut per_variant = BTreeMap::new();
    for variant in Variant::ALL {
        let aucs: Vec<f64> = (0..SEEDS)
            .map(|s| test_auc(&benchmark(s), s, variant))
            .collect();
        per_variant.insert(variant.as_str(), mean_std(&aucs).0);
    }
    let full = per_variant["full"];
    let random = per_variant["random-sampling"];
    let none = per_variant["no-sampling"];
    let elapsed = started.elapsed();
    ensure(
        full - random >= 0.02 && full - none >= 0.02 && elapsed < Duration::from_secs(600),
        format!(
            "mean AUC full {full:.4}, random-sampling {random:.4}, no-sampling {none:.4}, time limit 600s"
        ),
    )
}

fn sampler_selectivity() -> Outcome {
    let (mut kept, mut kept_within, mut dropped, mut dropped_within) = (0u64, 0u64, 0u64, 0u64);
    for seed in 0..SEEDS {
        let net = benchmark(seed);
        let community: Vec<usize> = net.labels().unwrap().values().copied().collect();
        let mut cfg = train_cfg(seed, Variant::Full);
        cfg.epochs = 3;
        let out = trainer::train(&net, &ModelConfig::default(), &cfg).unwrap();
        let emb = similarity_embeddings(&out.params, &net, 0, cfg.similarity_source).unwrap();
        let sampler_cfg = SamplerConfig {
            seed: rng::derive_seed(seed, "selectivity"),
            ..cfg.sampler
        };
        let res = undersample(&net, emb.view(), &sampler_cfg, true).unwrap();
        for d in res.decisions.unwrap() {
            // duplicates of target edges are kept by rule, not by similarity
            if d.verdict == Verdict::KeptInTarget {
                continue;
            }
            let within = (community[d.edge.0] == community[d.edge.1]) as u64;
            if d.verdict.kept() {
                kept += 1;
                kept_within += within;
            } else {
                dropped += 1;
                dropped_within += within;
            }
        }
    }
    let p_kept = kept_within as f64 / kept as f64;
    let p_dropped = dropped_within as f64 / dropped as f64;
    // one-sided: P(X ≥ kept_within) when kept edges share the dropped rate
    let null = Binomial::new(p_dropped, kept).unwrap();
    let p_value = if kept_within == 0 {
        1.0
    } else {
        null.sf(kept_within - 1)
    };
    ensure(
        p_kept > p_dropped && p_value < 0.01,
        format!(
            "within-community fraction kept {p_kept:.4} ({kept} edges) vs dropped {p_dropped:.4} ({dropped} edges), p = {p_value:.3e}"
        ),
    )
}

fn imbalance_robustness() -> Outcome {
    let fractions = [1.0, 0.3, 0.1, 0.03];
    let mut means = BTreeMap::new();
    for variant in [Variant::Full, Variant::NoSampling] {
        let mut row = Vec::new();
        for &frac in &fractions {
            let aucs: Vec<f64> = (0..SEEDS)
                .map(|s| {
                    let net = synth::sparsify_target(&benchmark(s), 0, frac, s).unwrap();
                    test_auc(&net, s, variant)
                })
                .collect();
            row.push(mean_std(&aucs).0);
        }
        means.insert(variant.as_str(), row);
    }
    let drop = |v: &str| means[v][0] - means[v][fractions.len() - 1];
    let (full, none) = (drop("full"), drop("no-sampling"));
    let fmt = |v: &str| {
        means[v]
            .iter()
            .map(|m| format!("{m:.3}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    ensure(
        full <= none,
        format!(
            "AUC drop full {full:.4} ({}) vs no-sampling {none:.4} ({})",
            fmt("full"),
            fmt("no-sampling")
        ),
    )
}

fn brute_force_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn metric_oracles() -> Outcome {
    let mut rng = rng::stream(11, "metric-oracles");
    for case in 0..100 {
        let np = rng.gen_range(1..40);
        let nn = rng.gen_range(1..40);
        // a coarse grid forces plenty of ties
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect() };
        let pos = draw(np);
        let neg = draw(nn);
        let (fast, slow) = (auc(&pos, &neg).unwrap(), brute_force_auc(&pos, &neg));
        if fast != slow {
            return Err(format!("case {case}: {fast} vs brute force {slow}"));
        }
    }
    // 10-node, 3-class fixture; per-class F1 by hand from the confusion matrix:
    // class 0: tp 3 fp 1 fn 1 -> 6/8; class 1: tp 2 fp 2 fn 1 -> 4/7;
    // class 2: tp 1 fp 1 fn 2 -> 2/5. Micro: 6 of 10 correct.
    let truth = [0, 0, 0, 0, 1, 1, 1, 2, 2, 2];
    let predicted = [0, 0, 0, 1, 1, 1, 2, 2, 0, 1];
    let (macro_f1, micro_f1) = f1_scores(&truth, &predicted);
    let expected_macro = (6.0 / 8.0 + 4.0 / 7.0 + 2.0 / 5.0) / 3.0;
    ensure(
        macro_f1 == expected_macro && micro_f1 == 0.6,
        format!("100 AUC lists exact; Macro-F1 {macro_f1} (hand {expected_macro}), Micro-F1 {micro_f1} (hand 0.6)"),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_mxembed"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "mxembed {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_cli(
        &[
            "synth",
            "--nodes",
            "200",
            "--target-edges",
            "150",
            "--aux",
            "3000:0.5",
            "--seed",
            "3",
            "--out",
            "net.txt",
        ],
        d,
    );
    std::fs::write(
        d.join("run.cfg"),
        "dim = 16\nattn_dim = 16\nepochs = 4\nseed = 5\nsplit_seed = 2\n",
    )
    .unwrap();
    let mut logs = Vec::new();
    let mut reports = Vec::new();
    for k in 0..2 {
        let log = format!("log{k}.csv");
        let ck = format!("ck{k}.bin");
        let lp = format!("lp{k}.csv");
        run_cli(
            &[
                "train",
                "--config",
                "run.cfg",
                "--data",
                "net.txt",
                "--log",
                &log,
                "--out-checkpoint",
                &ck,
            ],
            d,
        );
        run_cli(
            &[
                "eval-lp",
                "--config",
                "run.cfg",
                "--data",
                "net.txt",
                "--checkpoint",
                &ck,
                "--csv",
                &lp,
            ],
            d,
        );
        logs.push(std::fs::read(d.join(&log)).unwrap());
        reports.push(std::fs::read_to_string(d.join(&lp)).unwrap());
    }
    let auc_of = |csv: &str| -> f64 {
        csv.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    let (a0, a1) = (auc_of(&reports[0]), auc_of(&reports[1]));
    ensure(
        logs[0] == logs[1] && a0.to_bits() == a1.to_bits(),
        format!("logs identical: {}, AUC {a0} vs {a1}", logs[0] == logs[1]),
    )
}

fn sampler_strategy() -> impl Strategy<Value = (MultiplexNetwork, Vec<f64>, f64, f64, f64, u64)> {
    (4usize..14, 2usize..4, any::<u64>()).prop_flat_map(|(n, layers, seed)| {
        let pair = (0..n, 0..n);
        (
            proptest::collection::vec(proptest::collection::vec(pair, 0..30), layers),
            proptest::collection::vec(-2.0f64..2.0, n * 3),
            0.0f64..=1.0,
            0.0f64..=1.0,
            0.0f64..=1.0,
            Just(seed),
        )
            .prop_map(move |(edges, emb, a, b, c, seed)| {
                let mut layers: Vec<Vec<(usize, usize)>> = edges;
                // make sure the target layer has an edge so mu is defined
                layers[0].push((0, 1));
                for l in layers.iter_mut().skip(1) {
                    l.push((1, 2));
                }
                let net = MultiplexNetwork::new(n, layers).unwrap();
                let mut t = [a, b, c];
                t.sort_by(f64::total_cmp);
                (net, emb, t[0], t[1], t[2], seed)
            })
    })
}

fn sampler_invariants() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let result = runner.run(&sampler_strategy(), |(net, emb, lo, mid, hi, seed)| {
        let emb = ndarray::Array2::from_shape_vec((net.num_nodes(), 3), emb).unwrap();
        let run = |alpha: f64, beta: f64| {
            undersample(
                &net,
                emb.view(),
                &SamplerConfig {
                    alpha,
                    beta,
                    target_layer: 0,
                    seed,
                },
                false,
            )
            .unwrap()
        };
        let contains = |big: &MultiplexNetwork, small: &MultiplexNetwork| {
            (0..big.num_layers()).all(|l| {
                small
                    .layer(l)
                    .edges()
                    .iter()
                    .all(|&(i, j)| big.layer(l).contains(i, j))
            })
        };
        let base = run(lo, hi);
        // subset of the input, target layer untouched
        prop_assert!(contains(&net, &base.sampled_network));
        prop_assert_eq!(base.sampled_network.layer(0), net.layer(0));
        // target edges duplicated in auxiliary layers are never dropped
        for l in 1..net.num_layers() {
            for &(i, j) in net.layer(l).edges() {
                if net.layer(0).contains(i, j) {
                    prop_assert!(base.sampled_network.layer(l).contains(i, j));
                }
            }
        }
        // raising either threshold keeps a subset
        prop_assert!(contains(
            &run(lo, mid).sampled_network,
            &run(mid, mid).sampled_network
        ));
        prop_assert!(contains(
            &run(lo, mid).sampled_network,
            &run(lo, hi).sampled_network
        ));
        // degenerate thresholds
        prop_assert_eq!(&run(0.0, 0.0).sampled_network, &net);
        let strict = run(1.0, 1.0).sampled_network;
        for l in 1..net.num_layers() {
            for &(i, j) in strict.layer(l).edges() {
                prop_assert!(net.layer(0).contains(i, j));
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => Ok(
            "1000 random cases: subset, target retention, monotonicity, degenerate thresholds"
                .into(),
        ),
        Err(e) => Err(e.to_string()),
    }
}

fn chance_baselines() -> Outcome {
    let mut aucs = Vec::new();
    for seed in 0..10 {
        let net = benchmark(100 + seed);
        let manifest = eval::split_edges(&net, 0, (8, 1, 1), seed).unwrap();
        let train_net = manifest.training_network(&net).unwrap();
        let params = ModelParams::init(&train_net, ModelConfig::default(), seed).unwrap();
        aucs.push(
            eval::predict_links(&params, &train_net, &manifest)
                .unwrap()
                .auc
                .unwrap(),
        );
    }
    let (auc_mean, _) = mean_std(&aucs);

    let classes = 4.0;
    let mut micro = Vec::new();
    let mut outside = 0;
    for seed in 0..10 {
        let net = benchmark(200 + seed);
        let mut labels: Vec<usize> = net.labels().unwrap().values().copied().collect();
        labels.shuffle(&mut rng::stream(seed, "shuffle-labels"));
        let labels: BTreeMap<usize, usize> = labels.into_iter().enumerate().collect();
        let params = ModelParams::init(&net, ModelConfig::default(), seed).unwrap();
        let report = eval::classify_nodes(&params, &net, &labels, seed).unwrap();
        let f1 = report.micro_f1.unwrap();
        let n_test = report.counts.2 as f64;
        let sd = (1.0 / classes * (1.0 - 1.0 / classes) / n_test).sqrt();
        if (f1 - 1.0 / classes).abs() > 3.0 * sd {
            outside += 1;
        }
        micro.push(f1);
    }
    let (micro_mean, _) = mean_std(&micro);
    ensure(
        (0.4..=0.6).contains(&auc_mean) && outside == 0,
        format!(
            "untrained AUC mean {auc_mean:.4} (range {:.3}..{:.3}); shuffled-label Micro-F1 mean {micro_mean:.4}, {outside} of 10 outside 3 sd",
            aucs.iter().copied().fold(f64::INFINITY, f64::min),
            aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("dataset statistics", dataset_statistics),
        ("gradient correctness", gradient_correctness),
        ("optimization sanity", optimization_sanity),
        ("ablation directionality", ablation_directionality),
        ("sampler selectivity", sampler_selectivity),
        ("imbalance robustness", imbalance_robustness),
        ("metric oracles", metric_oracles),
        ("determinism", determinism),
        ("sampler invariants", sampler_invariants),
        ("chance-level baselines", chance_baselines),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
