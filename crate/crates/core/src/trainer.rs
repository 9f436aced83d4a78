//! Training: positive-edge and target-layer negative losses, minibatch SGD,
//! and the epoch schedule that re-runs the under-sampler on the auxiliary
//! layers using the embeddings from the previous epoch.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{normalize, Edge, MultiplexNetwork};
use crate::math::{sigmoid, softplus};
use crate::model::{Forward, ModelConfig, ModelParams};
use crate::rng::{self, streams};
use crate::sampler::{self, SamplerConfig};

/// Which under-sampling strategy runs during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Similarity-based under-sampling.
    Full,
    /// Drop as many auxiliary edges as `Full` would, chosen uniformly.
    RandomSampling,
    /// Train on the unsampled network.
    NoSampling,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::RandomSampling, Variant::NoSampling];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RandomSampling => "random-sampling",
            Variant::NoSampling => "no-sampling",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant {s:?} (expected full, random-sampling or no-sampling)"
                ))
            })
    }
}

/// Embeddings the sampler scores auxiliary edges with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilaritySource {
    /// The target layer's own embedding `x_{·,t}`.
    Layer,
    /// The overall target-layer embedding `c + x_{·,t}`.
    Overall,
}

impl FromStr for SimilaritySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer" => Ok(SimilaritySource::Layer),
            "overall" => Ok(SimilaritySource::Overall),
            _ => Err(Error::Config(format!(
                "unknown similarity source {s:?} (expected layer or overall)"
            ))),
        }
    }
}

/// How a batch's summed loss is scaled before the gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReduction {
    /// Step on the summed loss, the per-sample SGD scale.
    Sum,
    /// Step on the loss averaged over the batch's positive edges.
    Mean,
}

impl FromStr for LossReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(LossReduction::Sum),
            "mean" => Ok(LossReduction::Mean),
            _ => Err(Error::Config(format!(
                "unknown loss reduction {s:?} (expected sum or mean)"
            ))),
        }
    }
}

impl fmt::Display for LossReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossReduction::Sum => "sum",
            LossReduction::Mean => "mean",
        })
    }
}

impl fmt::Display for SimilaritySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilaritySource::Layer => "layer",
            SimilaritySource::Overall => "overall",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Negatives drawn per positive edge.
    pub neg_ratio: usize,
    /// Positive edges per step; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    /// First (1-based) epoch that trains on an under-sampled network.
    pub sampling_start_epoch: usize,
    /// Re-sample from the original auxiliary layers every epoch instead of
    /// sampling once and keeping the result.
    pub resample_each_epoch: bool,
    /// Draw fresh negatives every epoch; when false the same negative set
    /// is reused, which makes full-batch training plain gradient descent
    /// on a fixed objective.
    pub resample_negatives: bool,
    pub similarity_source: SimilaritySource,
    pub loss_reduction: LossReduction,
    pub sampler: SamplerConfig,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.025,
            neg_ratio: 5,
            batch_size: 256,
            seed: 0,
            sampling_start_epoch: 2,
            resample_each_epoch: true,
            resample_negatives: true,
            similarity_source: SimilaritySource::Layer,
            loss_reduction: LossReduction::Sum,
            sampler: SamplerConfig::default(),
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if self.neg_ratio == 0 {
            return Err(Error::Config("neg_ratio must be ≥ 1".into()));
        }
        if self.sampling_start_epoch == 0 {
            return Err(Error::Config("sampling_start_epoch must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.sampler.validate()
    }

    pub fn target_layer(&self) -> usize {
        self.sampler.target_layer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_pos: f64,
    pub l_neg: f64,
    pub l_total: f64,
    /// Edge count of every layer of the network trained on this epoch.
    pub kept_per_layer: Vec<usize>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn totals(&self) -> Vec<f64> {
        self.epochs.iter().map(|r| r.l_total).collect()
    }

    /// CSV with one row per epoch. Wall time is left out so that logs of
    /// identical runs compare byte for byte.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let layers = self.epochs.first().map_or(0, |r| r.kept_per_layer.len());
        write!(w, "epoch,l_pos,l_neg,l_total")?;
        for l in 0..layers {
            write!(w, ",kept_edges_layer_{l}")?;
        }
        writeln!(w)?;
        for r in &self.epochs {
            write!(w, "{},{},{},{}", r.epoch, r.l_pos, r.l_neg, r.l_total)?;
            for k in &r.kept_per_layer {
                write!(w, ",{k}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Positive edges `(layer, edge)` and target-layer negatives for one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub positives: Vec<(usize, Edge)>,
    pub negatives: Vec<Edge>,
}

impl Batch {
    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub pos: f64,
    pub neg: f64,
}

impl Losses {
    pub fn total(&self) -> f64 {
        self.pos + self.neg
    }
}

/// Every edge of every layer as a positive, in canonical order.
pub fn all_positives(net: &MultiplexNetwork) -> Vec<(usize, Edge)> {
    net.layers()
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| layer.edges().iter().map(move |&e| (l, e)))
        .collect()
}

fn dot_rows(fwd: &Forward, params: &ModelParams, layer: usize, i: usize, j: usize) -> f64 {
    let x = &params.layer_embed[layer];
    let c = &fwd.common;
    let mut s = 0.0;
    for k in 0..params.config.dim {
        s += (c[[i, k]] + x[[i, k]]) * (c[[j, k]] + x[[j, k]]);
    }
    s
}

/// Summed losses of a batch under a precomputed forward pass.
pub fn batch_losses(
    fwd: &Forward,
    params: &ModelParams,
    batch: &Batch,
    target_layer: usize,
) -> Losses {
    let pos = batch
        .positives
        .iter()
        .map(|&(l, (i, j))| softplus(-dot_rows(fwd, params, l, i, j)))
        .sum();
    let neg = batch
        .negatives
        .iter()
        .map(|&(i, j)| softplus(dot_rows(fwd, params, target_layer, i, j)))
        .sum();
    Losses { pos, neg }
}

/// `Σ_l Σ_{(i,j) ∈ E_l} -ln σ(z_{i,l} · z_{j,l})` over the whole network.
pub fn positive_loss(params: &ModelParams, net: &MultiplexNetwork) -> Result<f64> {
    let fwd = Forward::compute(params, net)?;
    let batch = Batch {
        positives: all_positives(net),
        negatives: Vec::new(),
    };
    Ok(batch_losses(&fwd, params, &batch, 0).pos)
}

/// `Σ_{(i,j) ∈ D_t} -ln(1 - σ(z_{i,t} · z_{j,t}))`
pub fn negative_loss(
    params: &ModelParams,
    net: &MultiplexNetwork,
    negatives: &[Edge],
    target_layer: usize,
) -> Result<f64> {
    net.check_layer(target_layer)?;
    let fwd = Forward::compute(params, net)?;
    let batch = Batch {
        positives: Vec::new(),
        negatives: negatives.to_vec(),
    };
    Ok(batch_losses(&fwd, params, &batch, target_layer).neg)
}

/// Uniform unordered non-edges of the target layer, no repeats.
pub fn sample_negatives(
    net: &MultiplexNetwork,
    target_layer: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Edge>> {
    let mut rng = rng::stream(seed, streams::NEGATIVES);
    sample_negatives_with(net, target_layer, count, &HashSet::new(), &mut rng)
}

/// As [`sample_negatives`], also avoiding `excluded` pairs, drawing from a
/// caller-owned stream.
pub fn sample_negatives_with(
    net: &MultiplexNetwork,
    target_layer: usize,
    count: usize,
    excluded: &HashSet<Edge>,
    rng: &mut rng::Rng,
) -> Result<Vec<Edge>> {
    net.check_layer(target_layer)?;
    let n = net.num_nodes();
    let target = net.layer(target_layer);
    let pairs = n * n.saturating_sub(1) / 2;
    let blocked = target.len()
        + excluded
            .iter()
            .filter(|&&(i, j)| i != j && i.max(j) < n && !target.contains(i, j))
            .count();
    let available = pairs.saturating_sub(blocked);
    if count > available {
        return Err(Error::NegativeSampling(format!(
            "asked for {count} negatives but the target layer has only {available} non-edges"
        )));
    }
    let max_attempts = 1000 + 200 * count;
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::NegativeSampling(format!(
                "target layer too dense: {} of {count} negatives after {max_attempts} draws",
                out.len()
            )));
        }
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let e = normalize(i, j);
        if target.contains(e.0, e.1) || excluded.contains(&e) || !seen.insert(e) {
            continue;
        }
        out.push(e);
    }
    Ok(out)
}

/// Summed losses of `batch` and their exact gradients with respect to all
/// parameters, on the aggregation graph `net`.
pub fn gradients(
    params: &ModelParams,
    net: &MultiplexNetwork,
    batch: &Batch,
    target_layer: usize,
) -> Result<(Losses, ModelParams)> {
    net.check_layer(target_layer)?;
    let fwd = Forward::compute(params, net)?;
    gradients_with(&fwd, params, net, batch, target_layer)
}

fn gradients_with(
    fwd: &Forward,
    params: &ModelParams,
    net: &MultiplexNetwork,
    batch: &Batch,
    target_layer: usize,
) -> Result<(Losses, ModelParams)> {
    if batch.is_empty() {
        return Ok((Losses { pos: 0.0, neg: 0.0 }, params.zeros_like()));
    }
    let n = params.num_nodes;
    let d = params.config.dim;
    let z: Vec<Array2<f64>> = (0..params.num_layers)
        .map(|l| fwd.layer_embeddings(params, l))
        .collect();
    let mut dz: Vec<Array2<f64>> = (0..params.num_layers)
        .map(|_| Array2::zeros((n, d)))
        .collect();
    let mut losses = Losses { pos: 0.0, neg: 0.0 };

    let mut accumulate = |layer: usize, i: usize, j: usize, positive: bool| -> f64 {
        let zl = &z[layer];
        let s = zl.row(i).dot(&zl.row(j));
        // d/ds of softplus(-s) is σ(s) - 1, of softplus(s) is σ(s)
        let (loss, g) = if positive {
            (softplus(-s), sigmoid(s) - 1.0)
        } else {
            (softplus(s), sigmoid(s))
        };
        let g_l = &mut dz[layer];
        g_l.row_mut(i).scaled_add(g, &zl.row(j));
        g_l.row_mut(j).scaled_add(g, &zl.row(i));
        loss
    };
    for &(l, (i, j)) in &batch.positives {
        losses.pos += accumulate(l, i, j, true);
    }
    for &(i, j) in &batch.negatives {
        losses.neg += accumulate(target_layer, i, j, false);
    }
    let grads = fwd.backward(params, net, &dz)?;
    Ok((losses, grads))
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: TrainLog,
    /// The network trained on in the final epoch.
    pub active_network: MultiplexNetwork,
}

pub fn train(
    net: &MultiplexNetwork,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_excluding(net, model_cfg, cfg, &HashSet::new())
}

/// Train, never drawing any pair in `excluded` as a negative (used to keep
/// held-out evaluation pairs out of the objective).
pub fn train_excluding(
    net: &MultiplexNetwork,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    excluded: &HashSet<Edge>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let target = cfg.target_layer();
    net.check_layer(target)?;
    let params = ModelParams::init(net, *model_cfg, cfg.seed)?;
    train_from(net, params, cfg, excluded)
}

/// Continue training from given parameters.
pub fn train_from(
    net: &MultiplexNetwork,
    mut params: ModelParams,
    cfg: &TrainConfig,
    excluded: &HashSet<Edge>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.check_network(net)?;
    let target = cfg.target_layer();
    net.check_layer(target)?;

    let mut active = net.clone();
    let mut sampled_once = false;
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        if epoch >= cfg.sampling_start_epoch
            && cfg.variant != Variant::NoSampling
            && (cfg.resample_each_epoch || !sampled_once)
        {
            active = resample(net, &params, cfg, epoch)?;
            sampled_once = true;
        }

        let mut positives = all_positives(&active);
        positives.shuffle(&mut rng::indexed_stream(
            cfg.seed,
            streams::BATCHES,
            epoch as u64,
        ));
        let batch_size = if cfg.batch_size == 0 {
            positives.len().max(1)
        } else {
            cfg.batch_size
        };
        let neg_epoch = if cfg.resample_negatives {
            epoch as u64
        } else {
            0
        };
        let mut neg_rng = rng::indexed_stream(cfg.seed, streams::NEGATIVES, neg_epoch);

        let mut epoch_losses = Losses { pos: 0.0, neg: 0.0 };
        for (step, chunk) in positives.chunks(batch_size).enumerate() {
            let negatives = sample_negatives_with(
                &active,
                target,
                cfg.neg_ratio * chunk.len(),
                excluded,
                &mut neg_rng,
            )?;
            let batch = Batch {
                positives: chunk.to_vec(),
                negatives,
            };
            let (losses, grads) = gradients(&params, &active, &batch, target)?;
            if !losses.total().is_finite() {
                return Err(Error::Divergence { epoch, step });
            }
            epoch_losses.pos += losses.pos;
            epoch_losses.neg += losses.neg;
            let scale = match cfg.loss_reduction {
                LossReduction::Sum => 1.0,
                LossReduction::Mean => 1.0 / chunk.len() as f64,
            };
            params.add_scaled(&grads, -cfg.learning_rate * scale);
            if !params.all_finite() {
                return Err(Error::Divergence { epoch, step });
            }
        }
        let record = EpochRecord {
            epoch,
            l_pos: epoch_losses.pos,
            l_neg: epoch_losses.neg,
            l_total: epoch_losses.total(),
            kept_per_layer: active.layers().iter().map(|l| l.len()).collect(),
            wall_time: started.elapsed(),
        };
        log::debug!(
            "epoch {epoch}: l_pos={:.4} l_neg={:.4} kept={:?}",
            record.l_pos,
            record.l_neg,
            record.kept_per_layer
        );
        log.epochs.push(record);
    }
    Ok(TrainOutcome {
        params,
        log,
        active_network: active,
    })
}

/// Embeddings the sampler reads for the current parameters.
pub fn similarity_embeddings(
    params: &ModelParams,
    net: &MultiplexNetwork,
    target_layer: usize,
    source: SimilaritySource,
) -> Result<Array2<f64>> {
    match source {
        SimilaritySource::Layer => Ok(params.layer_embed[target_layer].clone()),
        SimilaritySource::Overall => {
            let fwd = Forward::compute(params, net)?;
            Ok(fwd.layer_embeddings(params, target_layer))
        }
    }
}

fn resample(
    original: &MultiplexNetwork,
    params: &ModelParams,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<MultiplexNetwork> {
    let target = cfg.target_layer();
    let emb = similarity_embeddings(params, original, target, cfg.similarity_source)?;
    let sampler_cfg = SamplerConfig {
        seed: rng::derive_seed(
            rng::derive_seed(cfg.seed, streams::SAMPLER),
            &epoch.to_string(),
        ),
        ..cfg.sampler
    };
    let res = sampler::undersample(original, emb.view(), &sampler_cfg, false)?;
    match cfg.variant {
        Variant::Full => Ok(res.sampled_network),
        Variant::RandomSampling => sampler::random_undersample(
            original,
            target,
            &res.per_layer_kept,
            rng::derive_seed(
                rng::derive_seed(cfg.seed, streams::RANDOM_SAMPLING),
                &epoch.to_string(),
            ),
        ),
        Variant::NoSampling => Ok(original.clone()),
    }
}
