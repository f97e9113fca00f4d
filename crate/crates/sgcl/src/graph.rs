//! Undirected attributed graphs in CSR form: loading, validation,
//! symmetric normalization and edge-drop augmentation.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SgclError};
use crate::nd::DenseMatrix;

/// Undirected graph in compressed sparse row form with node features.
///
/// Invariants: edge (u,v) is stored iff (v,u) is, no explicit self-loops,
/// `col_idx` strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrGraph {
    pub num_nodes: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub features: DenseMatrix,
    pub labels: Option<Vec<usize>>,
    pub num_classes: Option<usize>,
}

/// GCN normalization coefficients with implicit self-loops.
///
/// `neighbor[e]` aligns with `col_idx[e]` and equals
/// 1/sqrt((deg(u)+1)(deg(v)+1)); `self_term[u]` equals 1/(deg(u)+1).
#[derive(Debug, Clone)]
pub struct NormCoeffs {
    pub neighbor: Vec<f32>,
    pub self_term: Vec<f32>,
}

impl CsrGraph {
    /// Builds a CSR graph from an arbitrary directed edge list: self-loops
    /// dropped, duplicates and reversed pairs deduplicated, then symmetrized.
    pub fn from_edges(edges: &[(usize, usize)], features: DenseMatrix) -> Result<Self> {
        let num_nodes = features.rows;
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(SgclError::Dimension(format!(
                    "edge ({u},{v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                continue;
            }
            set.insert((u, v));
            set.insert((v, u));
        }
        let mut row_ptr = vec![0usize; num_nodes + 1];
        for &(u, _) in &set {
            row_ptr[u + 1] += 1;
        }
        for i in 0..num_nodes {
            row_ptr[i + 1] += row_ptr[i];
        }
        // BTreeSet iteration is already (u, v)-sorted.
        let col_idx = set.iter().map(|&(_, v)| v).collect();
        Ok(CsrGraph {
            num_nodes,
            row_ptr,
            col_idx,
            features,
            labels: None,
            num_classes: None,
        })
    }

    pub fn num_directed_edges(&self) -> usize {
        self.col_idx.len()
    }

    /// Undirected edge count (half the stored directed entries).
    pub fn num_undirected_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[u]..self.row_ptr[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_ptr[u + 1] - self.row_ptr[u]
    }

    /// Undirected (u < v) edge pairs in deterministic order.
    pub fn undirected_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::with_capacity(self.num_undirected_edges());
        for u in 0..self.num_nodes {
            for &v in self.neighbors(u) {
                if u < v {
                    pairs.push((u, v));
                }
            }
        }
        pairs
    }

    /// Checks the CSR invariants (symmetry, sortedness, no self-loops).
    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.num_nodes + 1 {
            return Err(SgclError::Dimension("row_ptr length mismatch".into()));
        }
        for u in 0..self.num_nodes {
            if self.row_ptr[u] > self.row_ptr[u + 1] {
                return Err(SgclError::Dimension("row_ptr not monotone".into()));
            }
            let row = self.neighbors(u);
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(SgclError::Dimension(format!(
                        "col_idx not strictly increasing in row {u}"
                    )));
                }
            }
            for &v in row {
                if v == u {
                    return Err(SgclError::Dimension(format!("self-loop stored at {u}")));
                }
                if self.neighbors(v).binary_search(&u).is_err() {
                    return Err(SgclError::Dimension(format!(
                        "asymmetric edge ({u},{v})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Loads a CSV dataset directory: `edges.csv` (u,v per line), `features.csv`
/// (one row per node), optional `labels.csv` (one integer per node).
pub fn load_graph(dir: &Path) -> Result<CsrGraph> {
    let features = read_features(&dir.join("features.csv"))?;
    let edges = read_edges(&dir.join("edges.csv"))?;
    let max_id = edges.iter().map(|&(u, v)| u.max(v)).max();
    if let Some(max_id) = max_id {
        if max_id + 1 > features.rows {
            return Err(SgclError::Dimension(format!(
                "edges reference node {max_id} but features.csv has {} rows",
                features.rows
            )));
        }
    }
    let mut g = CsrGraph::from_edges(&edges, features)?;
    let labels_path = dir.join("labels.csv");
    if labels_path.exists() {
        let labels = read_labels(&labels_path)?;
        if labels.len() != g.num_nodes {
            return Err(SgclError::Dimension(format!(
                "labels.csv has {} rows, expected {}",
                labels.len(),
                g.num_nodes
            )));
        }
        g.num_classes = labels.iter().max().map(|&m| m + 1);
        g.labels = Some(labels);
    }
    Ok(g)
}

/// Writes a graph back out in the same CSV directory format.
pub fn save_graph(g: &CsrGraph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut ef = BufWriter::new(File::create(dir.join("edges.csv"))?);
    for (u, v) in g.undirected_pairs() {
        writeln!(ef, "{u},{v}")?;
    }
    let mut ff = BufWriter::new(File::create(dir.join("features.csv"))?);
    for r in 0..g.features.rows {
        let row: Vec<String> = (0..g.features.cols)
            .map(|c| format!("{}", g.features[(r, c)]))
            .collect();
        writeln!(ff, "{}", row.join(","))?;
    }
    if let Some(labels) = &g.labels {
        let mut lf = BufWriter::new(File::create(dir.join("labels.csv"))?);
        for l in labels {
            writeln!(lf, "{l}")?;
        }
    }
    Ok(())
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let file = File::open(path)?;
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.ok_or_else(|| SgclError::Parse {
                line: i + 1,
                msg: "expected \"u,v\"".into(),
            })?
            .trim()
            .parse()
            .map_err(|e| SgclError::Parse {
                line: i + 1,
                msg: format!("bad node id: {e}"),
            })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(SgclError::Parse {
                line: i + 1,
                msg: "trailing fields after \"u,v\"".into(),
            });
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_features(path: &Path) -> Result<DenseMatrix> {
    let file = File::open(path)?;
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f32> = line
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|e| SgclError::Parse {
                    line: i + 1,
                    msg: format!("bad feature value: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(SgclError::Dimension(format!(
                    "features.csv line {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SgclError::Dimension("features.csv is empty".into()));
    }
    let cols = rows[0].len();
    let data: Vec<f32> = rows.into_iter().flatten().collect();
    DenseMatrix::from_vec(data.len() / cols, cols, data)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let file = File::open(path)?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse().map_err(|e| SgclError::Parse {
            line: i + 1,
            msg: format!("bad label: {e}"),
        })?);
    }
    Ok(labels)
}

/// Symmetric GCN normalization with implicit self-loops (deg+1).
pub fn sym_norm_coeffs(g: &CsrGraph) -> NormCoeffs {
    let inv = |u: usize| 1.0 / ((g.degree(u) + 1) as f32);
    let mut neighbor = Vec::with_capacity(g.col_idx.len());
    for u in 0..g.num_nodes {
        for &v in g.neighbors(u) {
            neighbor.push((inv(u) * inv(v)).sqrt());
        }
    }
    let self_term = (0..g.num_nodes).map(inv).collect();
    NormCoeffs { neighbor, self_term }
}

/// Drops each undirected edge independently with probability `p`.
/// Samples over (u < v) pairs so both directed entries go together.
pub fn drop_edges(g: &CsrGraph, p: f64, seed: u64) -> Result<CsrGraph> {
    if !(0.0..1.0).contains(&p) {
        return Err(SgclError::Config(format!(
            "edge drop probability must be in [0,1), got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: Vec<(usize, usize)> = g
        .undirected_pairs()
        .into_iter()
        .filter(|_| rng.gen::<f64>() >= p)
        .collect();
    let mut out = CsrGraph::from_edges(&kept, g.features.clone())?;
    out.labels = g.labels.clone();
    out.num_classes = g.num_classes;
    Ok(out)
}

/// Maximum node degree.
pub fn degree_bound(g: &CsrGraph) -> usize {
    (0..g.num_nodes).map(|u| g.degree(u)).max().unwrap_or(0)
}
