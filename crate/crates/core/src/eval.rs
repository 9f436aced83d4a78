//! Evaluation: target-layer link prediction (AUC) and node classification
//! (Macro/Micro F1) with an in-crate softmax-regression classifier.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::{Edge, MultiplexNetwork};
use crate::math::sigmoid;
use crate::model::{Forward, ModelParams};
use crate::rng;
use crate::trainer::sample_negatives_with;

/// Held-out partition of the target layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub target_layer: usize,
    pub train: Vec<Edge>,
    pub valid: Vec<Edge>,
    pub test: Vec<Edge>,
    pub valid_negatives: Vec<Edge>,
    pub test_negatives: Vec<Edge>,
    pub seed: u64,
}

impl SplitManifest {
    /// The network to train on: held-out positives removed from the target
    /// layer, all other layers untouched.
    pub fn training_network(&self, net: &MultiplexNetwork) -> Result<MultiplexNetwork> {
        net.replace_layer(self.target_layer, self.train.clone())
    }

    /// Every held-out pair, positive or negative. Training must not draw
    /// these as negatives.
    pub fn held_out_pairs(&self) -> HashSet<Edge> {
        self.valid
            .iter()
            .chain(&self.test)
            .chain(&self.valid_negatives)
            .chain(&self.test_negatives)
            .copied()
            .collect()
    }

    /// Plain-text manifest: one `split i j` line per pair.
    pub fn write<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# target_layer {} seed {}", self.target_layer, self.seed)?;
        for (name, edges) in [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
            ("valid_neg", &self.valid_negatives),
            ("test_neg", &self.test_negatives),
        ] {
            for (i, j) in edges {
                writeln!(w, "{name} {i} {j}")?;
            }
        }
        Ok(())
    }
}

/// Sizes of an 8:1:1-style split: held-out parts are floored, training gets
/// the remainder.
pub fn split_sizes(total: usize, ratios: (usize, usize, usize)) -> (usize, usize, usize) {
    let sum = ratios.0 + ratios.1 + ratios.2;
    let valid = total * ratios.1 / sum;
    let test = total * ratios.2 / sum;
    (total - valid - test, valid, test)
}

pub fn split_edges(
    net: &MultiplexNetwork,
    target_layer: usize,
    ratios: (usize, usize, usize),
    seed: u64,
) -> Result<SplitManifest> {
    net.check_layer(target_layer)?;
    if ratios.0 + ratios.1 + ratios.2 == 0 {
        return Err(Error::Config("split ratios must not all be zero".into()));
    }
    let edges = net.layer(target_layer).edges();
    if edges.len() < 10 {
        return Err(Error::TooFewEdges {
            found: edges.len(),
            required: 10,
        });
    }
    let mut rng = rng::stream(seed, rng::streams::SPLITS);
    let mut shuffled = edges.to_vec();
    shuffled.shuffle(&mut rng);
    let (n_train, n_valid, _) = split_sizes(edges.len(), ratios);
    let mut train = shuffled[..n_train].to_vec();
    let mut valid = shuffled[n_train..n_train + n_valid].to_vec();
    let mut test = shuffled[n_train + n_valid..].to_vec();
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();

    // negatives avoid the full target layer, so held-out positives too
    let held = valid.len() + test.len();
    let negatives = sample_negatives_with(net, target_layer, held, &HashSet::new(), &mut rng)?;
    let valid_negatives = negatives[..valid.len()].to_vec();
    let test_negatives = negatives[valid.len()..].to_vec();
    Ok(SplitManifest {
        target_layer,
        train,
        valid,
        test,
        valid_negatives,
        test_negatives,
        seed,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann–Whitney U / (n_pos · n_neg)).
pub fn auc(scores_pos: &[f64], scores_neg: &[f64]) -> Result<f64> {
    if scores_pos.is_empty() || scores_neg.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut neg = scores_neg.to_vec();
    neg.sort_by(f64::total_cmp);
    // twice the U statistic, kept integral so the result is exact
    let mut doubled: u128 = 0;
    for &p in scores_pos {
        let below = neg.partition_point(|&x| x < p);
        let not_above = neg.partition_point(|&x| x <= p);
        doubled += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(doubled as f64 / (2 * scores_pos.len() * scores_neg.len()) as f64)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub auc: Option<f64>,
    pub valid_auc: Option<f64>,
    pub macro_f1: Option<f64>,
    pub micro_f1: Option<f64>,
    /// `(train, valid, test)` sizes of whichever split produced the report.
    pub counts: (usize, usize, usize),
}

/// Link scores for node pairs on `layer`.
pub fn score_pairs(fwd: &Forward, params: &ModelParams, layer: usize, pairs: &[Edge]) -> Vec<f64> {
    let z = fwd.layer_embeddings(params, layer);
    pairs
        .iter()
        .map(|&(i, j)| sigmoid(z.row(i).dot(&z.row(j))))
        .collect()
}

/// Score held-out pairs on the target layer and report valid/test AUC.
///
/// `net` is the graph the model aggregates over, normally the network it
/// was trained on.
pub fn predict_links(
    params: &ModelParams,
    net: &MultiplexNetwork,
    manifest: &SplitManifest,
) -> Result<EvalReport> {
    let fwd = Forward::compute(params, net)?;
    let t = manifest.target_layer;
    let test_auc = auc(
        &score_pairs(&fwd, params, t, &manifest.test),
        &score_pairs(&fwd, params, t, &manifest.test_negatives),
    )?;
    let valid_auc = auc(
        &score_pairs(&fwd, params, t, &manifest.valid),
        &score_pairs(&fwd, params, t, &manifest.valid_negatives),
    )?;
    Ok(EvalReport {
        auc: Some(test_auc),
        valid_auc: Some(valid_auc),
        counts: (
            manifest.train.len(),
            manifest.valid.len(),
            manifest.test.len(),
        ),
        ..Default::default()
    })
}

/// Node features for classification: the mean over layers of `z_{i,l}`.
pub fn node_features(params: &ModelParams, net: &MultiplexNetwork) -> Result<Array2<f64>> {
    let fwd = Forward::compute(params, net)?;
    let mut mean = Array2::zeros(fwd.common.raw_dim());
    for l in 0..params.num_layers {
        mean += &params.layer_embed[l];
    }
    mean /= params.num_layers as f64;
    mean += &fwd.common;
    Ok(mean)
}

/// Hyperparameters of the softmax-regression classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegConfig {
    pub l2: f64,
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            steps: 500,
            learning_rate: 0.1,
        }
    }
}

/// Multinomial logistic regression trained by full-batch gradient descent.
/// Features are standardized with training-set statistics.
#[derive(Debug, Clone)]
pub struct SoftmaxRegression {
    weights: Array2<f64>,
    bias: Array1<f64>,
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl SoftmaxRegression {
    pub fn fit(x: &Array2<f64>, y: &[usize], num_classes: usize, cfg: &LogRegConfig) -> Self {
        let (n, d) = x.dim();
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d));
        let std = x.std_axis(Axis(0), 0.0);
        let scale = std.mapv(|s| if s > 1e-12 { 1.0 / s } else { 1.0 });
        let xs = (x - &mean) * &scale;

        let mut weights = Array2::zeros((d, num_classes));
        let mut bias = Array1::zeros(num_classes);
        let mut onehot = Array2::zeros((n, num_classes));
        for (r, &c) in y.iter().enumerate() {
            onehot[[r, c]] = 1.0;
        }
        for _ in 0..cfg.steps {
            let mut probs = xs.dot(&weights) + &bias;
            softmax_rows(&mut probs);
            let err = (probs - &onehot) / n.max(1) as f64;
            let gw = xs.t().dot(&err) + &(&weights * cfg.l2);
            let gb = err.sum_axis(Axis(0));
            weights.scaled_add(-cfg.learning_rate, &gw);
            bias.scaled_add(-cfg.learning_rate, &gb);
        }
        SoftmaxRegression {
            weights,
            bias,
            mean,
            scale,
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        let logits = ((x - &self.mean) * &self.scale).dot(&self.weights) + &self.bias;
        logits
            .outer_iter()
            .map(|row| {
                // first maximum wins
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
}

/// `(macro_f1, micro_f1)` over the classes present in either labels or
/// predictions. A class with no true and no predicted members does not
/// count; precision or recall with a zero denominator is zero.
pub fn f1_scores(truth: &[usize], predicted: &[usize]) -> (f64, f64) {
    assert_eq!(truth.len(), predicted.len());
    let classes: BTreeSet<usize> = truth.iter().chain(predicted).copied().collect();
    let mut per_class = Vec::with_capacity(classes.len());
    let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
    for &c in &classes {
        let mut tp = 0;
        let mut fp = 0;
        let mut fnn = 0;
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fnn += 1,
                _ => {}
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fnn;
        per_class.push(f1(tp, fp, fnn));
    }
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().sum::<f64>() / per_class.len() as f64
    };
    (macro_f1, f1(tp_all, fp_all, fn_all))
}

fn f1(tp: usize, fp: usize, fnn: usize) -> f64 {
    let denom = 2 * tp + fp + fnn;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Node classification on precomputed features with an 8:1:1 node split.
pub fn classify_features(
    features: &Array2<f64>,
    labels: &BTreeMap<usize, usize>,
    split_seed: u64,
    cfg: &LogRegConfig,
) -> Result<EvalReport> {
    let classes: BTreeSet<usize> = labels.values().copied().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let class_index: BTreeMap<usize, usize> =
        classes.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut nodes: Vec<usize> = labels.keys().copied().collect();
    if nodes.len() < 10 {
        return Err(Error::Config(format!(
            "need at least 10 labeled nodes, found {}",
            nodes.len()
        )));
    }
    nodes.shuffle(&mut rng::stream(split_seed, rng::streams::SPLITS));
    let (n_train, n_valid, n_test) = split_sizes(nodes.len(), (8, 1, 1));
    let train = &nodes[..n_train];
    let test = &nodes[n_train + n_valid..];

    let gather = |ids: &[usize]| {
        let x = features.select(Axis(0), ids);
        let y: Vec<usize> = ids.iter().map(|i| class_index[&labels[i]]).collect();
        (x, y)
    };
    let (x_train, y_train) = gather(train);
    let (x_test, y_test) = gather(test);
    let model = SoftmaxRegression::fit(&x_train, &y_train, classes.len(), cfg);
    let (macro_f1, micro_f1) = f1_scores(&y_test, &model.predict(&x_test));
    Ok(EvalReport {
        macro_f1: Some(macro_f1),
        micro_f1: Some(micro_f1),
        counts: (n_train, n_valid, n_test),
        ..Default::default()
    })
}

/// Node classification from trained parameters.
pub fn classify_nodes(
    params: &ModelParams,
    net: &MultiplexNetwork,
    labels: &BTreeMap<usize, usize>,
    split_seed: u64,
) -> Result<EvalReport> {
    let features = node_features(params, net)?;
    classify_features(&features, labels, split_seed, &LogRegConfig::default())
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
