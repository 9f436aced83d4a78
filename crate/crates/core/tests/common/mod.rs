//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use multiplex_embed::graph::MultiplexNetwork;
use multiplex_embed::math::softplus;
use multiplex_embed::model::{
    aggregate_neighbors, attention_weights, common_embedding, final_embedding, ModelConfig,
    ModelParams,
};
use multiplex_embed::trainer::{gradients, Batch};

pub const STEP: f64 = 1e-4;

pub fn fixture() -> MultiplexNetwork {
    MultiplexNetwork::new(
        6,
        vec![
            vec![(0, 1), (1, 2), (3, 4)],
            vec![(0, 2), (0, 5), (1, 4), (2, 3), (4, 5)],
        ],
    )
    .unwrap()
}

pub fn batch() -> Batch {
    Batch {
        positives: vec![(0, (0, 1)), (0, (3, 4)), (1, (0, 5)), (1, (2, 3))],
        negatives: vec![(0, 3), (1, 5), (2, 4)],
    }
}

/// Loss evaluated node by node with the scalar formulas.
pub fn oracle_loss(
    params: &ModelParams,
    net: &MultiplexNetwork,
    batch: &Batch,
    target: usize,
) -> f64 {
    let z = |i: usize, l: usize| {
        let h = aggregate_neighbors(net, params, i).unwrap();
        let a = attention_weights(params, h.view());
        let c = common_embedding(params, h.view(), a.view());
        final_embedding(params, c.view(), i, l)
    };
    let mut loss = 0.0;
    for &(l, (i, j)) in &batch.positives {
        loss += softplus(-z(i, l).dot(&z(j, l)));
    }
    for &(i, j) in &batch.negatives {
        loss += softplus(z(i, target).dot(&z(j, target)));
    }
    loss
}

fn flatten(p: &ModelParams) -> Vec<f64> {
    let mut v = Vec::new();
    p.for_each(|x| v.push(x));
    v
}

fn set_scalar(p: &mut ModelParams, index: usize, value: f64) {
    let mut k = 0;
    p.for_each_mut(|x| {
        if k == index {
            *x = value;
        }
        k += 1;
    });
}

/// Larger init than training uses, so attention and tanh are exercised
/// away from their linear regime.
pub fn scaled_params(net: &MultiplexNetwork, seed: u64, scale: f64) -> ModelParams {
    let cfg = ModelConfig {
        dim: 4,
        attn_dim: 3,
        hops: 2,
    };
    let mut p = ModelParams::init(net, cfg, seed).unwrap();
    p.for_each_mut(|x| *x *= scale);
    p
}

pub fn check(params: &ModelParams, net: &MultiplexNetwork, batch: &Batch) -> (usize, f64) {
    let (losses, grads) = gradients(params, net, batch, 0).unwrap();
    let direct = oracle_loss(params, net, batch, 0);
    assert!((losses.total() - direct).abs() < 1e-10);

    let analytic = flatten(&grads);
    let base = flatten(params);
    let mut worst = 0.0f64;
    for (k, &g) in analytic.iter().enumerate() {
        let mut plus = params.clone();
        set_scalar(&mut plus, k, base[k] + STEP);
        let mut minus = params.clone();
        set_scalar(&mut minus, k, base[k] - STEP);
        let numeric =
            (oracle_loss(&plus, net, batch, 0) - oracle_loss(&minus, net, batch, 0)) / (2.0 * STEP);
        // relative error; the floor only guards exact zeros
        let err = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
        assert!(
            err < 1e-4,
            "coordinate {k}: analytic {g:e}, numeric {numeric:e}, rel err {err:e}"
        );
        worst = worst.max(err);
    }
    (analytic.len(), worst)
}
