//! Similarity-driven under-sampling of auxiliary layers.
//!
//! Every auxiliary edge `(i, j)` is scored by the logistic similarity of the
//! two endpoints in the target layer's embedding space. Edges that also
//! exist in the target layer are always kept. Otherwise an edge with
//! similarity above `beta` is kept, one below `alpha` is dropped, and one in
//! the closed band `[alpha, beta]` is kept with probability equal to its
//! similarity.
//!
//! Each layer draws from its own seeded stream and every non-target edge
//! consumes exactly one uniform in canonical (sorted) order, whichever branch
//! it takes. A given edge therefore sees the same uniform for any thresholds,
//! which makes the kept set monotone in both `alpha` and `beta`.

use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, MultiplexNetwork};
use crate::math::{dot, sigmoid};

/// Thresholds and target layer for one under-sampling pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub target_layer: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            alpha: 0.2,
            beta: 0.6,
            target_layer: 0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.alpha)
            && (0.0..=1.0).contains(&self.beta)
            && self.alpha <= self.beta;
        if !ok {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 ≤ α ≤ β ≤ 1 (α={}, β={})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Why an auxiliary edge was kept or dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    KeptInTarget,
    KeptHigh,
    KeptProb,
    DroppedProb,
    DroppedLow,
}

impl Verdict {
    pub fn kept(self) -> bool {
        matches!(
            self,
            Verdict::KeptInTarget | Verdict::KeptHigh | Verdict::KeptProb
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::KeptInTarget => "kept-in-target",
            Verdict::KeptHigh => "kept-high",
            Verdict::KeptProb => "kept-prob",
            Verdict::DroppedProb => "dropped-prob",
            Verdict::DroppedLow => "dropped-low",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub layer: usize,
    pub edge: Edge,
    pub similarity: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct SampleResult {
    pub sampled_network: MultiplexNetwork,
    /// Kept-edge count for every layer; the target entry is its full size.
    pub per_layer_kept: Vec<usize>,
    pub decisions: Option<Vec<Decision>>,
}

/// Logistic similarity of two target-layer embeddings.
pub fn similarity(x_i: ArrayView1<f64>, x_j: ArrayView1<f64>) -> Result<f64> {
    if x_i.len() != x_j.len() {
        return Err(Error::DimensionMismatch {
            left: x_i.len(),
            right: x_j.len(),
        });
    }
    Ok(sigmoid(dot(x_i, x_j)))
}

/// Verdict for one non-target edge given its similarity and uniform draw.
#[inline]
pub fn classify(sim: f64, u: f64, alpha: f64, beta: f64) -> Verdict {
    if sim > beta {
        Verdict::KeptHigh
    } else if sim < alpha {
        Verdict::DroppedLow
    } else if u < sim {
        Verdict::KeptProb
    } else {
        Verdict::DroppedProb
    }
}

pub(crate) fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64);
    rng
}

/// Under-sample every auxiliary layer of `net` using `embeddings`
/// (one row per node, target-layer space).
pub fn undersample(
    net: &MultiplexNetwork,
    embeddings: ArrayView2<f64>,
    cfg: &SamplerConfig,
    record_decisions: bool,
) -> Result<SampleResult> {
    cfg.validate()?;
    net.check_layer(cfg.target_layer)?;
    if embeddings.nrows() != net.num_nodes() {
        return Err(Error::DimensionMismatch {
            left: embeddings.nrows(),
            right: net.num_nodes(),
        });
    }
    let target = net.layer(cfg.target_layer);
    let mut decisions = record_decisions.then(Vec::new);
    let mut layers = Vec::with_capacity(net.num_layers());
    let mut per_layer_kept = Vec::with_capacity(net.num_layers());

    for (l, layer) in net.layers().iter().enumerate() {
        if l == cfg.target_layer {
            layers.push(layer.edges().to_vec());
            per_layer_kept.push(layer.len());
            continue;
        }
        let mut rng = layer_rng(cfg.seed, l);
        let mut kept = Vec::new();
        for &(i, j) in layer.edges() {
            let sim = sigmoid(dot(embeddings.row(i), embeddings.row(j)));
            let verdict = if target.contains(i, j) {
                Verdict::KeptInTarget
            } else {
                let u: f64 = rng.gen();
                classify(sim, u, cfg.alpha, cfg.beta)
            };
            if verdict.kept() {
                kept.push((i, j));
            }
            if let Some(d) = decisions.as_mut() {
                d.push(Decision {
                    layer: l,
                    edge: (i, j),
                    similarity: sim,
                    verdict,
                });
            }
        }
        per_layer_kept.push(kept.len());
        layers.push(kept);
    }

    Ok(SampleResult {
        sampled_network: net.with_layers(layers)?,
        per_layer_kept,
        decisions,
    })
}

/// Keep exactly `counts[l]` uniformly chosen edges of each auxiliary layer.
///
/// This is the random-selection control: it removes as many edges as the
/// similarity sampler would, but without looking at the embeddings.
pub fn random_undersample(
    net: &MultiplexNetwork,
    target_layer: usize,
    counts: &[usize],
    seed: u64,
) -> Result<MultiplexNetwork> {
    net.check_layer(target_layer)?;
    if counts.len() != net.num_layers() {
        return Err(Error::DimensionMismatch {
            left: counts.len(),
            right: net.num_layers(),
        });
    }
    let mut layers = Vec::with_capacity(net.num_layers());
    for (l, layer) in net.layers().iter().enumerate() {
        if l == target_layer {
            layers.push(layer.edges().to_vec());
            continue;
        }
        let mut rng = layer_rng(seed, l);
        let keep = counts[l].min(layer.len());
        let picked = rand::seq::index::sample(&mut rng, layer.len(), keep);
        let mut idx = picked.into_vec();
        idx.sort_unstable();
        layers.push(idx.into_iter().map(|k| layer.edges()[k]).collect());
    }
    net.with_layers(layers)
}
