//! Synthetic multiplex networks with planted communities.
//!
//! The target layer follows a planted-partition model. Each auxiliary layer
//! takes a fraction `ρ` of its edges from the same community structure and
//! the rest uniformly at random, so `ρ` controls how relevant the layer is
//! to the target. All edge counts are exact.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{normalize, Edge, MultiplexNetwork};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxLayerSpec {
    pub edges: usize,
    /// Fraction of edges drawn from the community structure.
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub num_communities: usize,
    pub target_edges: usize,
    pub aux_layers: Vec<AuxLayerSpec>,
    /// Relative propensity of a within-community pair.
    pub p_in: f64,
    /// Relative propensity of a between-community pair.
    pub p_out: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_nodes: 1000,
            num_communities: 4,
            target_edges: 400,
            aux_layers: vec![AuxLayerSpec {
                edges: 20_000,
                relevance: 0.5,
            }],
            p_in: 0.9,
            p_out: 0.1,
            seed: 0,
        }
    }
}

/// Community assignment: balanced sizes, shuffled by the seed.
pub fn communities(num_nodes: usize, num_communities: usize, seed: u64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..num_nodes).map(|i| i % num_communities).collect();
    ids.shuffle(&mut rng::stream(seed, "communities"));
    ids
}

struct Planted {
    members: Vec<Vec<usize>>,
    within_pairs: usize,
    between_pairs: usize,
    /// Probability that a structured draw is a within-community pair.
    within_prob: f64,
}

impl Planted {
    fn new(community: &[usize], k: usize, p_in: f64, p_out: f64) -> Self {
        let mut members = vec![Vec::new(); k];
        for (v, &c) in community.iter().enumerate() {
            members[c].push(v);
        }
        let n = community.len();
        let within_pairs: usize = members
            .iter()
            .map(|m| m.len() * m.len().saturating_sub(1) / 2)
            .sum();
        let between_pairs = n * n.saturating_sub(1) / 2 - within_pairs;
        let w = p_in * within_pairs as f64;
        let b = p_out * between_pairs as f64;
        Planted {
            members,
            within_pairs,
            between_pairs,
            within_prob: w / (w + b),
        }
    }

    fn draw(&self, community: &[usize], rng: &mut Rng) -> Edge {
        let n = community.len();
        if rng.gen::<f64>() < self.within_prob {
            // community chosen proportionally to its pair count
            let mut r = rng.gen_range(0..self.within_pairs);
            for m in &self.members {
                let pairs = m.len() * m.len().saturating_sub(1) / 2;
                if r < pairs {
                    loop {
                        let a = m[rng.gen_range(0..m.len())];
                        let b = m[rng.gen_range(0..m.len())];
                        if a != b {
                            return normalize(a, b);
                        }
                    }
                }
                r -= pairs;
            }
            unreachable!("pair index within range");
        }
        loop {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if community[a] != community[b] {
                return normalize(a, b);
            }
        }
    }
}

fn uniform_pair(n: usize, rng: &mut Rng) -> Edge {
    loop {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            return normalize(a, b);
        }
    }
}

/// Draw until `count` distinct edges are collected.
fn collect_distinct(
    seen: &mut HashSet<Edge>,
    count: usize,
    mut draw: impl FnMut() -> Edge,
) -> Result<Vec<Edge>> {
    let mut out = Vec::with_capacity(count);
    let limit = 1000 + 200 * count;
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > limit {
            return Err(Error::Infeasible(format!(
                "could not place {count} distinct edges (got {})",
                out.len()
            )));
        }
        let e = draw();
        if seen.insert(e) {
            out.push(e);
        }
    }
    Ok(out)
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if self.num_communities == 0 || self.num_communities > n {
            return Err(Error::Infeasible(format!(
                "need 1 ≤ communities ≤ nodes, got {} communities for {n} nodes",
                self.num_communities
            )));
        }
        if !(self.p_in > self.p_out && self.p_out >= 0.0) {
            return Err(Error::Infeasible(format!(
                "need p_in > p_out ≥ 0, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        let max_pairs = n * n.saturating_sub(1) / 2;
        // rejection sampling stays cheap below half of the pair space
        let budget = max_pairs / 2;
        for (name, count) in std::iter::once(("target", self.target_edges))
            .chain(self.aux_layers.iter().map(|a| ("auxiliary", a.edges)))
        {
            if count == 0 {
                return Err(Error::Infeasible(format!(
                    "{name} layer needs at least one edge"
                )));
            }
            if count > budget {
                return Err(Error::Infeasible(format!(
                    "{name} layer asks for {count} edges; at most {budget} of {max_pairs} pairs supported"
                )));
            }
        }
        for a in &self.aux_layers {
            if !(0.0..=1.0).contains(&a.relevance) {
                return Err(Error::Infeasible(format!(
                    "relevance must lie in [0, 1], got {}",
                    a.relevance
                )));
            }
        }
        if self.aux_layers.is_empty() {
            return Err(Error::Infeasible(
                "at least one auxiliary layer is required".into(),
            ));
        }
        Ok(())
    }
}

/// Generate the network. Layer 0 is the target; auxiliary layers follow in
/// order. Labels are the community ids.
pub fn generate(cfg: &SynthConfig) -> Result<MultiplexNetwork> {
    cfg.validate()?;
    let community = communities(cfg.num_nodes, cfg.num_communities, cfg.seed);
    let planted = Planted::new(&community, cfg.num_communities, cfg.p_in, cfg.p_out);
    if planted.within_pairs < cfg.target_edges && planted.between_pairs == 0 {
        return Err(Error::Infeasible(
            "not enough within-community pairs".into(),
        ));
    }

    let mut layers = Vec::with_capacity(1 + cfg.aux_layers.len());
    let mut rng = rng::indexed_stream(cfg.seed, "synth-layer", 0);
    let mut seen = HashSet::new();
    layers.push(collect_distinct(&mut seen, cfg.target_edges, || {
        planted.draw(&community, &mut rng)
    })?);

    for (k, aux) in cfg.aux_layers.iter().enumerate() {
        let mut rng = rng::indexed_stream(cfg.seed, "synth-layer", k as u64 + 1);
        let structured = (aux.relevance * aux.edges as f64).round() as usize;
        let mut seen = HashSet::new();
        let mut edges =
            collect_distinct(&mut seen, structured, || planted.draw(&community, &mut rng))?;
        edges.extend(collect_distinct(&mut seen, aux.edges - structured, || {
            uniform_pair(cfg.num_nodes, &mut rng)
        })?);
        layers.push(edges);
    }

    let labels: BTreeMap<usize, usize> = community.iter().copied().enumerate().collect();
    MultiplexNetwork::new(cfg.num_nodes, layers)?.with_labels(labels)
}

/// Keep exactly `round(keep_fraction · |E_t|)` uniformly chosen target edges.
pub fn sparsify_target(
    net: &MultiplexNetwork,
    target_layer: usize,
    keep_fraction: f64,
    seed: u64,
) -> Result<MultiplexNetwork> {
    net.check_layer(target_layer)?;
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "keep_fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let edges = net.layer(target_layer).edges();
    let keep = (keep_fraction * edges.len() as f64).round() as usize;
    if keep < 10 {
        return Err(Error::TooFewEdges {
            found: keep,
            required: 10,
        });
    }
    if keep == edges.len() {
        return Ok(net.clone());
    }
    let mut idx =
        rand::seq::index::sample(&mut rng::stream(seed, "sparsify"), edges.len(), keep).into_vec();
    idx.sort_unstable();
    net.replace_layer(target_layer, idx.into_iter().map(|k| edges[k]).collect())
}

/// Fraction of a layer's edges joining two nodes of the same community.
pub fn within_fraction(edges: &[Edge], community: &[usize]) -> f64 {
    if edges.is_empty() {
        return 0.0;
    }
    let within = edges
        .iter()
        .filter(|&&(i, j)| community[i] == community[j])
        .count();
    within as f64 / edges.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            num_nodes: 200,
            num_communities: 4,
            target_edges: 50,
            aux_layers: vec![AuxLayerSpec {
                edges: 5000,
                relevance: 0.5,
            }],
            p_in: 0.9,
            p_out: 0.1,
            seed,
        }
    }

    #[test]
    fn exact_counts_and_ratio() {
        let net = generate(&small(3)).unwrap();
        assert_eq!(net.layer(0).len(), 50);
        assert_eq!(net.layer(1).len(), 5000);
        let stats = net.compute_stats(0).unwrap();
        assert!((stats.imbalance_ratio - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn seeded() {
        assert_eq!(generate(&small(9)).unwrap(), generate(&small(9)).unwrap());
        assert_ne!(generate(&small(9)).unwrap(), generate(&small(10)).unwrap());
    }

    #[test]
    fn labels_cover_all_communities() {
        let net = generate(&small(1)).unwrap();
        let labels = net.labels().unwrap();
        assert_eq!(labels.len(), 200);
        let mut sizes = [0usize; 4];
        for &c in labels.values() {
            sizes[c] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 50));
    }

    #[test]
    fn infeasible_requests() {
        let mut cfg = small(0);
        cfg.aux_layers[0].edges = 15_000;
        assert!(matches!(generate(&cfg), Err(Error::Infeasible(_))));
        let mut cfg = small(0);
        cfg.p_in = 0.1;
        assert!(generate(&cfg).is_err());
        let mut cfg = small(0);
        cfg.aux_layers[0].relevance = 1.5;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn sparsify_counts() {
        let mut cfg = small(2);
        cfg.target_edges = 1000;
        let net = generate(&cfg).unwrap();
        assert_eq!(sparsify_target(&net, 0, 1.0, 5).unwrap(), net);
        let s = sparsify_target(&net, 0, 0.1, 5).unwrap();
        assert_eq!(s.layer(0).len(), 100);
        assert_eq!(s.layer(1), net.layer(1));
        for e in s.layer(0).edges() {
            assert!(net.layer(0).edges().contains(e));
        }
        assert!(matches!(
            sparsify_target(&net, 0, 0.005, 5),
            Err(Error::TooFewEdges { .. })
        ));
    }

    #[test]
    fn ratio_grows_as_target_shrinks() {
        let mut cfg = small(4);
        cfg.target_edges = 1000;
        let net = generate(&cfg).unwrap();
        let mut last = f64::NEG_INFINITY;
        for frac in [1.0, 0.5, 0.2, 0.1, 0.05, 0.02] {
            let mu = sparsify_target(&net, 0, frac, 1)
                .unwrap()
                .compute_stats(0)
                .unwrap()
                .imbalance_ratio;
            assert!(mu > last);
            last = mu;
        }
    }
}
