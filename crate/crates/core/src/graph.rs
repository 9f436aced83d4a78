//! Multiplex networks: one shared node set, several undirected edge layers.
//!
//! Nodes are dense ids `0..num_nodes`. Each layer stores its edges once,
//! normalized to `(i, j)` with `i < j`, sorted, and keeps a CSR adjacency
//! for neighbor queries. A network is immutable after construction.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Undirected edge stored with the smaller endpoint first.
pub type Edge = (usize, usize);

/// Normalize an unordered pair so the smaller id comes first.
#[inline]
pub fn normalize(i: usize, j: usize) -> Edge {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// One edge layer: sorted unique edges plus a CSR adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
}

impl Layer {
    /// Build from edges that are already validated (in range, no self-loops).
    fn from_edges(num_nodes: usize, mut edges: Vec<Edge>) -> Self {
        for e in edges.iter_mut() {
            *e = normalize(e.0, e.1);
        }
        edges.sort_unstable();
        edges.dedup();

        let mut degree = vec![0usize; num_nodes];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..num_nodes].to_vec();
        let mut adjacency = vec![0usize; offsets[num_nodes]];
        for &(i, j) in &edges {
            adjacency[cursor[i]] = j;
            cursor[i] += 1;
            adjacency[cursor[j]] = i;
            cursor[j] += 1;
        }
        for v in 0..num_nodes {
            adjacency[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Layer {
            edges,
            offsets,
            adjacency,
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Sorted neighbor ids of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    /// Membership test on the unordered pair.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&normalize(i, j)).is_ok()
    }
}

/// A multiplex network with optional node attributes and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexNetwork {
    num_nodes: usize,
    layers: Vec<Layer>,
    attributes: Option<Array2<f64>>,
    labels: Option<BTreeMap<usize, usize>>,
}

impl MultiplexNetwork {
    /// Validate and build a network from raw per-layer edge lists.
    ///
    /// Duplicate and mirrored edges collapse to one; self-loops are dropped
    /// and counted in the log.
    pub fn new(num_nodes: usize, layers: Vec<Vec<Edge>>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidNetwork(format!(
                "a multiplex network needs at least 2 layers, got {}",
                layers.len()
            )));
        }
        let mut self_loops = 0usize;
        let mut built = Vec::with_capacity(layers.len());
        for (l, edges) in layers.into_iter().enumerate() {
            let mut kept = Vec::with_capacity(edges.len());
            for (i, j) in edges {
                for node in [i, j] {
                    if node >= num_nodes {
                        return Err(Error::EndpointOutOfRange {
                            layer: l,
                            node,
                            num_nodes,
                        });
                    }
                }
                if i == j {
                    self_loops += 1;
                    continue;
                }
                kept.push((i, j));
            }
            built.push(Layer::from_edges(num_nodes, kept));
        }
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s)");
        }
        Ok(MultiplexNetwork {
            num_nodes,
            layers: built,
            attributes: None,
            labels: None,
        })
    }

    pub fn with_attributes(mut self, attributes: Array2<f64>) -> Result<Self> {
        if attributes.nrows() != self.num_nodes {
            return Err(Error::AttributeRows {
                expected: self.num_nodes,
                found: attributes.nrows(),
            });
        }
        self.attributes = Some(attributes);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: BTreeMap<usize, usize>) -> Result<Self> {
        if let Some((&node, _)) = labels.iter().find(|(&n, _)| n >= self.num_nodes) {
            return Err(Error::EndpointOutOfRange {
                layer: 0,
                node,
                num_nodes: self.num_nodes,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same nodes, attributes and labels, different edge sets.
    pub fn with_layers(&self, layers: Vec<Vec<Edge>>) -> Result<Self> {
        let mut net = MultiplexNetwork::new(self.num_nodes, layers)?;
        net.attributes = self.attributes.clone();
        net.labels = self.labels.clone();
        Ok(net)
    }

    /// Replace a single layer, keeping everything else.
    pub fn replace_layer(&self, layer: usize, edges: Vec<Edge>) -> Result<Self> {
        self.check_layer(layer)?;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, ly)| {
                if l == layer {
                    edges.clone()
                } else {
                    ly.edges.clone()
                }
            })
            .collect();
        self.with_layers(layers)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, layer: usize) -> &Layer {
        &self.layers[layer]
    }

    pub fn attributes(&self) -> Option<&Array2<f64>> {
        self.attributes.as_ref()
    }

    pub fn labels(&self) -> Option<&BTreeMap<usize, usize>> {
        self.labels.as_ref()
    }

    pub fn total_edges(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.layers.len() {
            return Err(Error::Config(format!(
                "layer {layer} out of range ({} layers)",
                self.layers.len()
            )));
        }
        Ok(())
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.num_nodes {
            return Err(Error::EndpointOutOfRange {
                layer: 0,
                node,
                num_nodes: self.num_nodes,
            });
        }
        Ok(())
    }

    /// Sorted neighbors of `node` on `layer`.
    pub fn neighbors(&self, node: usize, layer: usize) -> Result<Vec<usize>> {
        self.check_layer(layer)?;
        self.check_node(node)?;
        Ok(self.layers[layer].neighbors(node).to_vec())
    }

    pub fn compute_stats(&self, target_layer: usize) -> Result<LayerStats> {
        self.check_layer(target_layer)?;
        let counts: Vec<usize> = self.layers.iter().map(Layer::len).collect();
        LayerStats::from_counts(&counts, target_layer, self.num_nodes)
    }
}

/// Edge-count statistics describing how imbalanced the layers are.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub edges_per_layer: Vec<usize>,
    pub densest: usize,
    pub sparsest: usize,
    /// `ln(|E_max| / |E_min|)`.
    pub imbalance_ratio: f64,
    /// `|E_t| / (|V| (|V| - 1))`.
    pub target_density: f64,
}

impl LayerStats {
    /// Statistics from raw counts, without needing the edges themselves.
    pub fn from_counts(counts: &[usize], target_layer: usize, num_nodes: usize) -> Result<Self> {
        if target_layer >= counts.len() {
            return Err(Error::Config(format!(
                "layer {target_layer} out of range ({} layers)",
                counts.len()
            )));
        }
        if let Some(layer) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyLayer { layer });
        }
        if num_nodes < 2 {
            return Err(Error::InvalidNetwork(
                "density needs at least 2 nodes".into(),
            ));
        }
        // first index wins on ties
        let densest =
            (0..counts.len()).fold(0, |best, l| if counts[l] > counts[best] { l } else { best });
        let sparsest =
            (0..counts.len()).fold(0, |best, l| if counts[l] < counts[best] { l } else { best });
        let imbalance_ratio = (counts[densest] as f64 / counts[sparsest] as f64).ln();
        let n = num_nodes as f64;
        let target_density = counts[target_layer] as f64 / (n * (n - 1.0));
        Ok(LayerStats {
            edges_per_layer: counts.to_vec(),
            densest,
            sparsest,
            imbalance_ratio,
            target_density,
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_usize(path: &Path, line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} {tok:?}")))
}

/// Meaningful lines of a text file with their 1-based line numbers.
fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        // `#` starts a comment, whole-line or trailing
        let trimmed = line.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        out.push((idx + 1, trimmed.to_string()));
    }
    Ok(out)
}

/// Load a multiplex network from an edge file and optional attribute and
/// label files.
///
/// Edge lines are `layer src dst`. An optional `nodes N layers L` header
/// fixes the sizes; otherwise they are inferred from the largest ids.
pub fn load_multiplex(
    edge_file: &Path,
    attr_file: Option<&Path>,
    label_file: Option<&Path>,
) -> Result<MultiplexNetwork> {
    let mut declared: Option<(usize, usize)> = None;
    let mut raw: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (lineno, line) in content_lines(edge_file)? {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() == Some(&"nodes") {
            if toks.len() != 4 || toks[2] != "layers" || !raw.is_empty() || declared.is_some() {
                return Err(parse_err(
                    edge_file,
                    lineno,
                    "header must be the first line and read \"nodes N layers L\"",
                ));
            }
            let n = parse_usize(edge_file, lineno, toks[1], "node count")?;
            let l = parse_usize(edge_file, lineno, toks[3], "layer count")?;
            declared = Some((n, l));
            continue;
        }
        if toks.len() != 3 {
            return Err(parse_err(
                edge_file,
                lineno,
                format!("expected \"layer src dst\", got {} fields", toks.len()),
            ));
        }
        let layer = parse_usize(edge_file, lineno, toks[0], "layer id")?;
        let src = parse_usize(edge_file, lineno, toks[1], "node id")?;
        let dst = parse_usize(edge_file, lineno, toks[2], "node id")?;
        raw.push((lineno, layer, src, dst));
    }

    let (num_nodes, num_layers) = match declared {
        Some(d) => d,
        None => {
            let n = raw.iter().map(|r| r.2.max(r.3) + 1).max().unwrap_or(0);
            let l = raw.iter().map(|r| r.1 + 1).max().unwrap_or(0);
            (n, l)
        }
    };
    let mut layers = vec![Vec::new(); num_layers];
    for (lineno, layer, src, dst) in raw {
        if layer >= num_layers {
            return Err(parse_err(
                edge_file,
                lineno,
                format!("layer {layer} out of range ({num_layers} layers)"),
            ));
        }
        if src >= num_nodes || dst >= num_nodes {
            return Err(parse_err(
                edge_file,
                lineno,
                format!(
                    "endpoint out of range: {} with {num_nodes} nodes",
                    src.max(dst)
                ),
            ));
        }
        layers[layer].push((src, dst));
    }
    let mut net = MultiplexNetwork::new(num_nodes, layers)?;
    if let Some(path) = attr_file {
        net = net.with_attributes(load_attributes(path, num_nodes)?)?;
    }
    if let Some(path) = label_file {
        net = net.with_labels(load_labels(path, num_nodes)?)?;
    }
    Ok(net)
}

/// Attribute file: `node_id v1 v2 ...` per node.
pub fn load_attributes(path: &Path, num_nodes: usize) -> Result<Array2<f64>> {
    let lines = content_lines(path)?;
    if lines.len() != num_nodes {
        return Err(Error::AttributeRows {
            expected: num_nodes,
            found: lines.len(),
        });
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; num_nodes];
    let mut width = None;
    for (lineno, line) in lines {
        let mut toks = line.split_whitespace();
        let node = parse_usize(path, lineno, toks.next().unwrap_or(""), "node id")?;
        if node >= num_nodes {
            return Err(parse_err(
                path,
                lineno,
                format!("endpoint out of range: {node} with {num_nodes} nodes"),
            ));
        }
        let values = toks
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("invalid value {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("expected {w} attribute values, got {}", values.len()),
                ))
            }
            _ => {}
        }
        if rows[node].replace(values).is_some() {
            return Err(parse_err(
                path,
                lineno,
                format!("duplicate row for node {node}"),
            ));
        }
    }
    let width = width.unwrap_or(0);
    let mut out = Array2::zeros((num_nodes, width));
    for (i, row) in rows.into_iter().enumerate() {
        // every slot is filled: row count matched and duplicates were rejected
        let row = row.expect("attribute row");
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    Ok(out)
}

/// Label file: `node_id class_id` per line.
pub fn load_labels(path: &Path, num_nodes: usize) -> Result<BTreeMap<usize, usize>> {
    let mut labels = BTreeMap::new();
    for (lineno, line) in content_lines(path)? {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, lineno, "expected \"node_id class_id\""));
        }
        let node = parse_usize(path, lineno, toks[0], "node id")?;
        let class = parse_usize(path, lineno, toks[1], "class id")?;
        if node >= num_nodes {
            return Err(parse_err(
                path,
                lineno,
                format!("endpoint out of range: {node} with {num_nodes} nodes"),
            ));
        }
        labels.insert(node, class);
    }
    Ok(labels)
}

/// Optional sidecar mapping dense ids to external names: `node_id name`.
pub fn load_node_names(path: &Path, num_nodes: usize) -> Result<Vec<String>> {
    let mut names = vec![String::new(); num_nodes];
    for (lineno, line) in content_lines(path)? {
        let (id, name) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| parse_err(path, lineno, "expected \"node_id name\""))?;
        let node = parse_usize(path, lineno, id, "node id")?;
        if node >= num_nodes {
            return Err(parse_err(
                path,
                lineno,
                format!("endpoint out of range: {node} with {num_nodes} nodes"),
            ));
        }
        names[node] = name.trim().to_string();
    }
    Ok(names)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Write the network in the edge-file format, header included.
pub fn save_edges(net: &MultiplexNetwork, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_edges(net, &mut w).map_err(|e| Error::io(path, e))
}

pub fn write_edges<W: Write>(net: &MultiplexNetwork, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "nodes {} layers {}", net.num_nodes(), net.num_layers())?;
    for (l, layer) in net.layers().iter().enumerate() {
        for &(i, j) in layer.edges() {
            writeln!(w, "{l} {i} {j}")?;
        }
    }
    w.flush()
}

pub fn save_labels(labels: &BTreeMap<usize, usize>, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    (|| {
        for (node, class) in labels {
            writeln!(w, "{node} {class}")?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn save_attributes(attributes: &Array2<f64>, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    (|| {
        for (i, row) in attributes.outer_iter().enumerate() {
            write!(w, "{i}")?;
            for v in row {
                // `{:?}` prints the shortest string that round-trips
                write!(w, " {v:?}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}
