//! The embedding model.
//!
//! Every node owns one trainable embedding per layer (`layer_embed`) and a
//! common embedding built by attention over per-layer neighbor summaries:
//!
//! * `h⁽ᵏ⁾_{i,l}` is the mean of the neighbors' `h⁽ᵏ⁻¹⁾` on layer `l`,
//!   starting from `h⁽⁰⁾` (free parameters, or a linear map of node
//!   attributes), repeated `hops` times;
//! * `a_i = softmax_l(w1 · tanh(W2 h_{i,l}))`;
//! * `c_i = W3 Σ_l a_{i,l} h_{i,l}`;
//! * the final embedding on layer `l` is `z_{i,l} = c_i + x_{i,l}`.

mod aggregate;
pub mod checkpoint;
mod forward;

use ndarray::{Array1, Array2, Zip};
use rand::distributions::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::graph::MultiplexNetwork;
use crate::rng::{self, streams};

pub use aggregate::{propagate, propagate_transpose};
pub use forward::{
    aggregate_neighbors, attention_weights, common_embedding, final_embedding, score_edge, Forward,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Dimension shared by the common and layer embeddings.
    pub dim: usize,
    /// Attention hidden size.
    pub attn_dim: usize,
    /// Mean-aggregation depth.
    pub hops: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            attn_dim: 64,
            hops: 2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.attn_dim == 0 || self.hops == 0 {
            return Err(Error::Config(format!(
                "dim, attn_dim and hops must be ≥ 1 (got {}, {}, {})",
                self.dim, self.attn_dim, self.hops
            )));
        }
        Ok(())
    }
}

/// Source of the zeroth-hop neighbor embeddings `h⁽⁰⁾`.
#[derive(Debug, Clone, PartialEq)]
pub enum NeighborInit {
    /// One trainable `|V| × d` matrix per layer.
    Free(Vec<Array2<f64>>),
    /// One `d × d_attr` linear map per layer applied to node attributes.
    Attributed(Vec<Array2<f64>>),
}

impl NeighborInit {
    pub fn tensors(&self) -> &[Array2<f64>] {
        match self {
            NeighborInit::Free(t) | NeighborInit::Attributed(t) => t,
        }
    }

    pub fn tensors_mut(&mut self) -> &mut [Array2<f64>] {
        match self {
            NeighborInit::Free(t) | NeighborInit::Attributed(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub num_nodes: usize,
    pub num_layers: usize,
    pub config: ModelConfig,
    /// `layer_embed[l]` is `|V| × d`; row `i` is `x_{i,l}`.
    pub layer_embed: Vec<Array2<f64>>,
    pub neighbor_init: NeighborInit,
    /// `d_a`
    pub w1: Array1<f64>,
    /// `d_a × d`
    pub w2: Array2<f64>,
    /// `d × d`
    pub w3: Array2<f64>,
    pub seed: u64,
}

impl ModelParams {
    /// Random initialization, uniform in `[-1/√d, 1/√d]`.
    ///
    /// Attributed networks get per-layer attribute maps; attribute-free ones
    /// get free `h⁽⁰⁾` matrices.
    pub fn init(net: &MultiplexNetwork, config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = net.num_nodes();
        let layers = net.num_layers();
        let d = config.dim;
        let bound = 1.0 / (d as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut rng = rng::stream(seed, streams::INIT);
        let mut draw = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || dist.sample(&mut rng))
        };

        let layer_embed = (0..layers).map(|_| draw(n, d)).collect();
        let neighbor_init = match net.attributes() {
            Some(attrs) => {
                NeighborInit::Attributed((0..layers).map(|_| draw(d, attrs.ncols())).collect())
            }
            None => NeighborInit::Free((0..layers).map(|_| draw(n, d)).collect()),
        };
        let w2 = draw(config.attn_dim, d);
        let w3 = draw(d, d);
        let w1 = draw(1, config.attn_dim).row(0).to_owned();
        Ok(ModelParams {
            num_nodes: n,
            num_layers: layers,
            config,
            layer_embed,
            neighbor_init,
            w1,
            w2,
            w3,
            seed,
        })
    }

    /// `h⁽⁰⁾` for one layer as a `|V| × d` matrix.
    pub fn base_neighbor(
        &self,
        layer: usize,
        attributes: Option<&Array2<f64>>,
    ) -> Result<Array2<f64>> {
        match &self.neighbor_init {
            NeighborInit::Free(h) => Ok(h[layer].clone()),
            NeighborInit::Attributed(f) => {
                let attrs = attributes.ok_or_else(|| {
                    Error::Config("model expects node attributes but the network has none".into())
                })?;
                if attrs.ncols() != f[layer].ncols() || attrs.nrows() != self.num_nodes {
                    return Err(Error::DimensionMismatch {
                        left: attrs.ncols(),
                        right: f[layer].ncols(),
                    });
                }
                Ok(attrs.dot(&f[layer].t()))
            }
        }
    }

    pub fn check_network(&self, net: &MultiplexNetwork) -> Result<()> {
        if net.num_nodes() != self.num_nodes || net.num_layers() != self.num_layers {
            return Err(Error::Config(format!(
                "model built for {} nodes / {} layers, network has {} / {}",
                self.num_nodes,
                self.num_layers,
                net.num_nodes(),
                net.num_layers()
            )));
        }
        Ok(())
    }

    /// All-zero tensors of the same shapes (used for gradients).
    pub fn zeros_like(&self) -> Self {
        let z = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        let neighbor_init = match &self.neighbor_init {
            NeighborInit::Free(t) => NeighborInit::Free(t.iter().map(z).collect()),
            NeighborInit::Attributed(t) => NeighborInit::Attributed(t.iter().map(z).collect()),
        };
        ModelParams {
            layer_embed: self.layer_embed.iter().map(z).collect(),
            neighbor_init,
            w1: Array1::zeros(self.w1.len()),
            w2: z(&self.w2),
            w3: z(&self.w3),
            ..self.clone()
        }
    }

    /// Visit every scalar parameter in a fixed order.
    pub fn for_each(&self, mut f: impl FnMut(f64)) {
        for t in &self.layer_embed {
            t.iter().for_each(|&v| f(v));
        }
        for t in self.neighbor_init.tensors() {
            t.iter().for_each(|&v| f(v));
        }
        self.w1.iter().for_each(|&v| f(v));
        self.w2.iter().for_each(|&v| f(v));
        self.w3.iter().for_each(|&v| f(v));
    }

    /// Mutable visit in the same order as [`ModelParams::for_each`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for t in self.layer_embed.iter_mut() {
            t.iter_mut().for_each(&mut f);
        }
        for t in self.neighbor_init.tensors_mut() {
            t.iter_mut().for_each(&mut f);
        }
        self.w1.iter_mut().for_each(&mut f);
        self.w2.iter_mut().for_each(&mut f);
        self.w3.iter_mut().for_each(&mut f);
    }

    pub fn num_scalars(&self) -> usize {
        let mut n = 0;
        self.for_each(|_| n += 1);
        n
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|v| ok &= v.is_finite());
        ok
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let axpy = |a: &mut Array2<f64>, b: &Array2<f64>| {
            Zip::from(a).and(b).for_each(|x, &y| *x += scale * y)
        };
        for (a, b) in self.layer_embed.iter_mut().zip(&other.layer_embed) {
            axpy(a, b);
        }
        for (a, b) in self
            .neighbor_init
            .tensors_mut()
            .iter_mut()
            .zip(other.neighbor_init.tensors())
        {
            axpy(a, b);
        }
        Zip::from(&mut self.w1)
            .and(&other.w1)
            .for_each(|x, &y| *x += scale * y);
        axpy(&mut self.w2, &other.w2);
        axpy(&mut self.w3, &other.w3);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> MultiplexNetwork {
        MultiplexNetwork::new(5, vec![vec![(0, 1), (1, 2)], vec![(2, 3), (3, 4)]]).unwrap()
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let cfg = ModelConfig {
            dim: 4,
            attn_dim: 3,
            hops: 2,
        };
        let a = ModelParams::init(&net(), cfg, 11).unwrap();
        let b = ModelParams::init(&net(), cfg, 11).unwrap();
        assert_eq!(a, b);
        let bound = 0.5;
        a.for_each(|v| assert!(v.abs() <= bound));
        assert_eq!(a.w2.dim(), (3, 4));
        assert_eq!(a.w1.len(), 3);
        assert!(matches!(a.neighbor_init, NeighborInit::Free(_)));
        assert_eq!(a.num_scalars(), 2 * 5 * 4 + 2 * 5 * 4 + 3 + 12 + 16);
    }

    #[test]
    fn attributed_networks_use_linear_maps() {
        let attrs = Array2::from_shape_fn((5, 7), |(i, j)| (i * j) as f64 * 0.1);
        let net = net().with_attributes(attrs.clone()).unwrap();
        let cfg = ModelConfig {
            dim: 4,
            attn_dim: 4,
            hops: 1,
        };
        let p = ModelParams::init(&net, cfg, 1).unwrap();
        let NeighborInit::Attributed(f) = &p.neighbor_init else {
            panic!("expected attribute maps");
        };
        assert_eq!(f[0].dim(), (4, 7));
        let h0 = p.base_neighbor(1, net.attributes()).unwrap();
        let expect = attrs.row(2).dot(&f[1].t());
        for k in 0..4 {
            assert!((h0[[2, k]] - expect[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sized_config_rejected() {
        let cfg = ModelConfig {
            dim: 0,
            ..Default::default()
        };
        assert!(ModelParams::init(&net(), cfg, 0).is_err());
    }
}
