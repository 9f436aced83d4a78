use ndarray::{Array2, ArrayView2};

use crate::graph::Layer;

/// One hop of mean aggregation on `layer`: row `i` of the result is the mean
/// of `h` over `i`'s neighbors, or `h[i]` itself when `i` is isolated.
pub fn propagate(layer: &Layer, h: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = h.dim();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let nbrs = layer.neighbors(i);
        let mut row = out.row_mut(i);
        if nbrs.is_empty() {
            row.assign(&h.row(i));
            continue;
        }
        for &j in nbrs {
            row += &h.row(j);
        }
        row /= nbrs.len() as f64;
    }
    out
}

/// Adjoint of [`propagate`]: pulls a gradient on the aggregated rows back
/// onto the rows that fed them.
pub fn propagate_transpose(layer: &Layer, g: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = g.dim();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let nbrs = layer.neighbors(i);
        let gi = g.row(i);
        if nbrs.is_empty() {
            let mut row = out.row_mut(i);
            row += &gi;
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        for &j in nbrs {
            out.row_mut(j).scaled_add(w, &gi);
        }
    }
    out
}
