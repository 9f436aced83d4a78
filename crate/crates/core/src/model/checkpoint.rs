//! Binary model checkpoints.
//!
//! Layout (all integers `u64` little-endian, all reals `f64` little-endian
//! bit patterns, so a save/load cycle is bit-exact):
//!
//! ```text
//! magic        8 bytes  "MXEMBCK1"
//! num_nodes, num_layers, dim, attn_dim, hops, seed
//! init_kind    0 = free h⁽⁰⁾, 1 = attribute maps
//! attr_dim     0 for free h⁽⁰⁾
//! layer_embed  L × |V| × d
//! h0 / maps    L × |V| × d   or   L × d × attr_dim
//! w1           d_a
//! w2           d_a × d
//! w3           d × d
//! has_graph    0 or 1
//! graph        (if has_graph) per layer: edge count, then (i, j) pairs
//! ```
//!
//! The optional graph is the network the model aggregated over at the end
//! of training (auxiliary layers possibly under-sampled), so a loaded
//! checkpoint reproduces the exact embeddings it was trained with.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{ModelConfig, ModelParams, NeighborInit};
use crate::error::{Error, Result};
use crate::graph::Edge;

const MAGIC: &[u8; 8] = b"MXEMBCK1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Per-layer edge sets used for aggregation.
    pub graph: Option<Vec<Vec<Edge>>>,
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s<'a, W: Write>(
    w: &mut W,
    vals: impl IntoIterator<Item = &'a f64>,
) -> std::io::Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let p = &self.params;
        w.write_all(MAGIC)?;
        for v in [
            p.num_nodes,
            p.num_layers,
            p.config.dim,
            p.config.attn_dim,
            p.config.hops,
        ] {
            put_u64(w, v as u64)?;
        }
        put_u64(w, p.seed)?;
        let (kind, attr_dim) = match &p.neighbor_init {
            NeighborInit::Free(_) => (0, 0),
            NeighborInit::Attributed(f) => (1, f[0].ncols()),
        };
        put_u64(w, kind)?;
        put_u64(w, attr_dim as u64)?;
        for t in &p.layer_embed {
            put_f64s(w, t.iter())?;
        }
        for t in p.neighbor_init.tensors() {
            put_f64s(w, t.iter())?;
        }
        put_f64s(w, p.w1.iter())?;
        put_f64s(w, p.w2.iter())?;
        put_f64s(w, p.w3.iter())?;
        match &self.graph {
            None => put_u64(w, 0)?,
            Some(layers) => {
                put_u64(w, 1)?;
                for edges in layers {
                    put_u64(w, edges.len() as u64)?;
                    for &(i, j) in edges {
                        put_u64(w, i as u64)?;
                        put_u64(w, j as u64)?;
                    }
                }
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut reader = Reader { inner: r };
        let mut magic = [0u8; 8];
        reader.fill(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(
                "not a model checkpoint (bad magic)".into(),
            ));
        }
        let num_nodes = reader.usize()?;
        let num_layers = reader.usize()?;
        let dim = reader.usize()?;
        let attn_dim = reader.usize()?;
        let hops = reader.usize()?;
        let seed = reader.u64()?;
        let kind = reader.u64()?;
        let attr_dim = reader.usize()?;
        let config = ModelConfig {
            dim,
            attn_dim,
            hops,
        };
        config.validate()?;
        // guard against absurd headers before allocating
        num_nodes
            .checked_mul(num_layers)
            .and_then(|v| v.checked_mul(dim))
            .filter(|&v| v < (1 << 34))
            .ok_or_else(|| Error::Checkpoint("header sizes overflow".into()))?;

        let layer_embed = (0..num_layers)
            .map(|_| reader.matrix(num_nodes, dim))
            .collect::<Result<Vec<_>>>()?;
        let neighbor_init = match kind {
            0 => NeighborInit::Free(
                (0..num_layers)
                    .map(|_| reader.matrix(num_nodes, dim))
                    .collect::<Result<_>>()?,
            ),
            1 => NeighborInit::Attributed(
                (0..num_layers)
                    .map(|_| reader.matrix(dim, attr_dim))
                    .collect::<Result<_>>()?,
            ),
            other => return Err(Error::Checkpoint(format!("unknown init kind {other}"))),
        };
        let w1 = Array1::from(reader.f64s(attn_dim)?);
        let w2 = reader.matrix(attn_dim, dim)?;
        let w3 = reader.matrix(dim, dim)?;
        let graph = match reader.u64()? {
            0 => None,
            1 => {
                let mut layers = Vec::with_capacity(num_layers);
                for _ in 0..num_layers {
                    let count = reader.usize()?;
                    let mut edges = Vec::with_capacity(count.min(1 << 24));
                    for _ in 0..count {
                        let i = reader.usize()?;
                        let j = reader.usize()?;
                        edges.push((i, j));
                    }
                    layers.push(edges);
                }
                Some(layers)
            }
            other => return Err(Error::Checkpoint(format!("bad graph flag {other}"))),
        };
        let mut trailing = [0u8; 1];
        if reader.inner.read(&mut trailing).map_err(read_err)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint {
            params: ModelParams {
                num_nodes,
                num_layers,
                config,
                layer_embed,
                neighbor_init,
                w1,
                w2,
                w3,
                seed,
            },
            graph,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(&mut BufReader::new(f))
    }
}

fn read_err(e: std::io::Error) -> Error {
    Error::Checkpoint(format!("truncated or unreadable: {e}"))
}

struct Reader<'a, R: Read> {
    inner: &'a mut R,
}

impl<R: Read> Reader<'_, R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(read_err)
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.u64().map(f64::from_bits)).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let data = self.f64s(rows * cols)?;
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
