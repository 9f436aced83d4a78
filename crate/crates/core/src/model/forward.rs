use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::aggregate::{propagate, propagate_transpose};
use super::{ModelParams, NeighborInit};
use crate::error::{Error, Result};
use crate::graph::MultiplexNetwork;
use crate::math::sigmoid;

/// Neighbor embeddings `H_i` of one node as a `d × L` matrix.
pub fn aggregate_neighbors(
    net: &MultiplexNetwork,
    params: &ModelParams,
    node: usize,
) -> Result<Array2<f64>> {
    params.check_network(net)?;
    net.check_node(node)?;
    let mut out = Array2::zeros((params.config.dim, net.num_layers()));
    for (l, layer) in net.layers().iter().enumerate() {
        let mut h = params.base_neighbor(l, net.attributes())?;
        for _ in 0..params.config.hops {
            h = propagate(layer, h.view());
        }
        out.column_mut(l).assign(&h.row(node));
    }
    Ok(out)
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// Attention over layers for one node given its `d × L` neighbor matrix.
pub fn attention_weights(params: &ModelParams, h: ArrayView2<f64>) -> Array1<f64> {
    let hidden = params.w2.dot(&h).mapv(f64::tanh);
    let mut logits = params.w1.dot(&hidden).to_vec();
    softmax_in_place(&mut logits);
    Array1::from(logits)
}

/// `W3 · (H a)`
pub fn common_embedding(
    params: &ModelParams,
    h: ArrayView2<f64>,
    a: ArrayView1<f64>,
) -> Array1<f64> {
    params.w3.dot(&h.dot(&a))
}

/// `c_i + x_{i,l}`
pub fn final_embedding(
    params: &ModelParams,
    common: ArrayView1<f64>,
    node: usize,
    layer: usize,
) -> Array1<f64> {
    &common + &params.layer_embed[layer].row(node)
}

/// Edge score `σ(z_i · z_j)`.
pub fn score_edge(z_i: ArrayView1<f64>, z_j: ArrayView1<f64>) -> Result<f64> {
    if z_i.len() != z_j.len() {
        return Err(Error::DimensionMismatch {
            left: z_i.len(),
            right: z_j.len(),
        });
    }
    Ok(sigmoid(z_i.dot(&z_j)))
}

/// Activations of a full forward pass over every node.
///
/// All matrices are node-major (`|V|` rows).
#[derive(Debug, Clone)]
pub struct Forward {
    /// `H_l` after the last hop, one `|V| × d` matrix per layer.
    pub neighbor: Vec<Array2<f64>>,
    /// `tanh(H_l W2ᵀ)`, one `|V| × d_a` matrix per layer.
    pub hidden: Vec<Array2<f64>>,
    /// `|V| × L` attention weights.
    pub attention: Array2<f64>,
    /// `Σ_l a_l ⊙ H_l`
    pub mixed: Array2<f64>,
    /// Common embeddings `|V| × d`.
    pub common: Array2<f64>,
}

impl Forward {
    /// Run the model over `net`, which supplies both the aggregation graph
    /// and (when present) node attributes.
    pub fn compute(params: &ModelParams, net: &MultiplexNetwork) -> Result<Self> {
        params.check_network(net)?;
        let n = params.num_nodes;
        let layers = params.num_layers;
        let mut neighbor = Vec::with_capacity(layers);
        let mut hidden = Vec::with_capacity(layers);
        let mut logits = Array2::zeros((n, layers));
        for (l, layer) in net.layers().iter().enumerate() {
            let mut h = params.base_neighbor(l, net.attributes())?;
            for _ in 0..params.config.hops {
                h = propagate(layer, h.view());
            }
            let t = h.dot(&params.w2.t()).mapv(f64::tanh);
            logits.column_mut(l).assign(&t.dot(&params.w1));
            neighbor.push(h);
            hidden.push(t);
        }
        let mut attention = logits;
        for mut row in attention.axis_iter_mut(Axis(0)) {
            softmax_in_place(row.as_slice_mut().expect("row-major"));
        }
        let mut mixed = Array2::zeros((n, params.config.dim));
        for (l, h) in neighbor.iter().enumerate() {
            let a = attention.slice(s![.., l..l + 1]);
            mixed += &(&a * h);
        }
        let common = mixed.dot(&params.w3.t());
        Ok(Forward {
            neighbor,
            hidden,
            attention,
            mixed,
            common,
        })
    }

    /// `z_{i,l}`
    pub fn embedding(&self, params: &ModelParams, node: usize, layer: usize) -> Array1<f64> {
        &self.common.row(node) + &params.layer_embed[layer].row(node)
    }

    /// Final embeddings of every node on `layer`, `|V| × d`.
    pub fn layer_embeddings(&self, params: &ModelParams, layer: usize) -> Array2<f64> {
        &self.common + &params.layer_embed[layer]
    }

    /// Gradients of a loss with respect to every parameter, given the
    /// gradient of that loss with respect to each layer's final embeddings
    /// (`dz[l]` is `|V| × d`).
    pub fn backward(
        &self,
        params: &ModelParams,
        net: &MultiplexNetwork,
        dz: &[Array2<f64>],
    ) -> Result<ModelParams> {
        let mut grads = params.zeros_like();
        let layers = params.num_layers;

        let mut d_common = Array2::zeros(self.common.raw_dim());
        for (l, g) in dz.iter().enumerate() {
            grads.layer_embed[l].assign(g);
            d_common += g;
        }
        grads.w3 = d_common.t().dot(&self.mixed);
        let d_mixed = d_common.dot(&params.w3);

        // attention weights and their softmax
        let mut d_att = Array2::zeros(self.attention.raw_dim());
        for (l, h) in self.neighbor.iter().enumerate() {
            let col = (&d_mixed * h).sum_axis(Axis(1));
            d_att.column_mut(l).assign(&col);
        }
        let weighted = (&d_att * &self.attention).sum_axis(Axis(1));
        let d_logits = &self.attention * &(&d_att - &weighted.insert_axis(Axis(1)));

        for l in 0..layers {
            let a = self.attention.slice(s![.., l..l + 1]);
            let mut d_h = &a * &d_mixed;

            let dl = d_logits.column(l);
            let t = &self.hidden[l];
            grads.w1 += &t.t().dot(&dl);
            // d(pre-tanh) = (ds ⊗ w1) ⊙ (1 - t²)
            let mut d_pre = dl
                .insert_axis(Axis(1))
                .dot(&params.w1.view().insert_axis(Axis(0)));
            d_pre *= &t.mapv(|v| 1.0 - v * v);
            grads.w2 += &d_pre.t().dot(&self.neighbor[l]);
            d_h += &d_pre.dot(&params.w2);

            let layer = net.layer(l);
            for _ in 0..params.config.hops {
                d_h = propagate_transpose(layer, d_h.view());
            }
            match &mut grads.neighbor_init {
                NeighborInit::Free(g) => g[l] = d_h,
                NeighborInit::Attributed(g) => {
                    let attrs = net.attributes().ok_or_else(|| {
                        Error::Config(
                            "model expects node attributes but the network has none".into(),
                        )
                    })?;
                    g[l] = d_h.t().dot(attrs);
                }
            }
        }
        Ok(grads)
    }
}
