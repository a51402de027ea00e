//! Graph ingestion, validation and preprocessing.
//!
//! A dataset directory holds three headerless UTF-8 files:
//!
//! * `edges.csv`: `src,dst` per line, 0-based node ids;
//! * `features.csv`: one line of comma-separated reals per node;
//! * `labels.csv`: `node_id,class_id` per line, `class_id` empty when unknown.
//!
//! The node count is the number of feature rows. Edges are symmetrized and
//! deduplicated; self-loops are dropped and counted.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::sparse::Csr;

pub const EDGES_FILE: &str = "edges.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// Number of reseeds tried before a split gives up on class coverage.
pub const MAX_SPLIT_RETRIES: u64 = 50;

/// Undirected attributed graph with partial labels.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Csr,
    features: Array2<f64>,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

/// What ingestion did to the raw edge list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub raw_edge_lines: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_classes: usize,
    pub num_features: usize,
    pub num_labeled: usize,
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} E={} C={} F={} (raw edge lines {}, duplicates dropped {}, self-loops dropped {}, labeled {})",
            self.num_nodes,
            self.num_edges,
            self.num_classes,
            self.num_features,
            self.raw_edge_lines,
            self.duplicates_dropped,
            self.self_loops_dropped,
            self.num_labeled
        )
    }
}

/// Parses `edges.csv` content into directed pairs as written.
pub fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(Error::parse(EDGES_FILE, i + 1, format!("expected two columns, got {line:?}"))),
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(EDGES_FILE, i + 1, format!("invalid node id {s:?}")))
        };
        out.push((parse(a)?, parse(b)?));
    }
    Ok(out)
}

/// Parses `features.csv` content into an `N × F` matrix.
pub fn parse_features(text: &str) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(FEATURES_FILE, i + 1, format!("invalid number {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(FEATURES_FILE, i + 1, "non-finite feature value"));
            }
            data.push(v);
        }
        let w = data.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(Error::parse(
                    FEATURES_FILE,
                    i + 1,
                    format!("row has {w} columns, expected {expected}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    Array2::from_shape_vec((rows, width), data).map_err(|e| Error::DimensionMismatch(e.to_string()))
}

/// Parses `labels.csv` content for a graph of `num_nodes` nodes.
pub fn parse_labels(text: &str, num_nodes: usize) -> Result<Vec<Option<usize>>> {
    let mut labels = vec![None; num_nodes];
    let mut seen = vec![false; num_nodes];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (node, class) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(LABELS_FILE, i + 1, format!("expected `node_id,class_id`, got {line:?}")))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|_| Error::parse(LABELS_FILE, i + 1, format!("invalid node id {node:?}")))?;
        if node >= num_nodes {
            return Err(Error::parse(
                LABELS_FILE,
                i + 1,
                format!("node id {node} out of range (num_nodes = {num_nodes})"),
            ));
        }
        if seen[node] {
            return Err(Error::parse(LABELS_FILE, i + 1, format!("duplicate entry for node {node}")));
        }
        seen[node] = true;
        let class = class.trim();
        if !class.is_empty() {
            let c: usize = class
                .parse()
                .map_err(|_| Error::parse(LABELS_FILE, i + 1, format!("invalid class id {class:?}")))?;
            labels[node] = Some(c);
        }
    }
    Ok(labels)
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })
}

impl Graph {
    /// Builds a graph from parsed parts. `num_classes` defaults to one past
    /// the largest label present.
    pub fn from_parts(
        edges: &[(usize, usize)],
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        num_classes: Option<usize>,
    ) -> Result<(Self, LoadReport)> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} feature rows",
                labels.len(),
                n
            )));
        }
        let mut pairs = BTreeSet::new();
        let mut self_loops = 0;
        for (line, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::parse(
                    EDGES_FILE,
                    line + 1,
                    format!("node id {} out of range (num_nodes = {n})", a.max(b)),
                ));
            }
            if a == b {
                self_loops += 1;
                continue;
            }
            pairs.insert((a.min(b), a.max(b)));
        }
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s) from the edge list");
        }
        let mut triplets = Vec::with_capacity(2 * pairs.len());
        for &(a, b) in &pairs {
            triplets.push((a, b, 1.0));
            triplets.push((b, a, 1.0));
        }
        let adjacency = Csr::from_triplets(n, n, &triplets)?;
        let max_label = labels.iter().flatten().max().copied();
        let num_classes = match (num_classes, max_label) {
            (Some(c), Some(m)) if m >= c => {
                return Err(Error::InvalidGraph(format!("label {m} not below num_classes {c}")))
            }
            (Some(c), _) => c,
            (None, Some(m)) => m + 1,
            (None, None) => 0,
        };
        let report = LoadReport {
            raw_edge_lines: edges.len(),
            self_loops_dropped: self_loops,
            duplicates_dropped: edges.len() - self_loops - pairs.len(),
            num_nodes: n,
            num_edges: pairs.len(),
            num_classes,
            num_features: features.ncols(),
            num_labeled: labels.iter().filter(|l| l.is_some()).count(),
        };
        let graph = Graph {
            adjacency,
            features,
            labels,
            num_classes,
        };
        Ok((graph, report))
    }

    /// Parses the three file contents directly.
    pub fn from_csv_strs(edges: &str, features: &str, labels: &str) -> Result<(Self, LoadReport)> {
        let features = parse_features(features)?;
        let labels = parse_labels(labels, features.nrows())?;
        let edges = parse_edges(edges)?;
        Graph::from_parts(&edges, features, labels, None)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        Ok(Graph::load_with_report(dir)?.0)
    }

    pub fn load_with_report(dir: impl AsRef<Path>) -> Result<(Self, LoadReport)> {
        let dir = dir.as_ref();
        let edges = read(dir, EDGES_FILE)?;
        let features = read(dir, FEATURES_FILE)?;
        let labels = read(dir, LABELS_FILE)?;
        Graph::from_csv_strs(&edges, &features, &labels)
    }

    /// Writes the graph in the CSV layout, one line per stored undirected edge.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        use std::fmt::Write as _;
        let dir = dir.as_ref();
        let io = |path: &Path, source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut edges = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(edges, "{a},{b}");
        }
        let mut feats = String::new();
        for row in self.features.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            feats.push_str(&line.join(","));
            feats.push('\n');
        }
        let mut labels = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            match l {
                Some(c) => writeln!(labels, "{i},{c}"),
                None => writeln!(labels, "{i},"),
            }
            .expect("write to string");
        }
        for (name, body) in [(EDGES_FILE, edges), (FEATURES_FILE, feats), (LABELS_FILE, labels)] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Symmetric 0/1 adjacency without self-loops.
    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adjacency.row(i).0
    }

    /// Undirected edges with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().filter(|&(a, b, _)| a < b).map(|(a, b, _)| (a, b))
    }

    pub fn degrees(&self) -> DegreeVector {
        DegreeVector((0..self.num_nodes()).map(|i| self.adjacency.row_nnz(i)).collect())
    }

    /// Features as a sparse matrix, optionally with rows rescaled to unit sum.
    pub fn feature_matrix(&self, row_normalize: bool) -> Csr {
        let m = Csr::from_dense(self.features.view());
        if row_normalize {
            m.row_normalized()
        } else {
            m
        }
    }

    /// `D̃^{-1/2}(A+I)D̃^{-1/2}` with self-loops, `D^{-1/2} A D^{-1/2}` without.
    pub fn normalized_adjacency(&self, add_self_loops: bool) -> NormalizedAdjacency {
        let n = self.num_nodes();
        let loop_w = if add_self_loops { 1.0 } else { 0.0 };
        let deg: Vec<f64> = (0..n).map(|i| self.adjacency.row_nnz(i) as f64 + loop_w).collect();
        let inv_sqrt: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
        let mut triplets = Vec::with_capacity(self.adjacency.nnz() + n);
        for (i, j, _) in self.adjacency.iter() {
            triplets.push((i, j, inv_sqrt[i] * inv_sqrt[j]));
        }
        if add_self_loops {
            for (i, s) in inv_sqrt.iter().enumerate() {
                triplets.push((i, i, s * s));
            }
        }
        let m = Csr::from_triplets(n, n, &triplets).expect("indices are in range by construction");
        NormalizedAdjacency(m)
    }

    /// Induced subgraph on `nodes` (renumbered in the given order).
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let n = self.num_nodes();
        let mut new_id = vec![usize::MAX; n];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidGraph(format!("node {v} out of range")));
            }
            new_id[v] = k;
        }
        let mut edges = Vec::new();
        for (a, b) in self.edges() {
            if new_id[a] != usize::MAX && new_id[b] != usize::MAX {
                edges.push((new_id[a], new_id[b]));
            }
        }
        let features = self.features.select(ndarray::Axis(0), nodes);
        let labels = nodes.iter().map(|&v| self.labels[v]).collect();
        Ok(Graph::from_parts(&edges, features, labels, Some(self.num_classes))?.0)
    }

    /// Node ids labeled `Some(c)` per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for c in self.labels.iter().flatten() {
            counts[*c] += 1;
        }
        counts
    }
}

/// Per-node degree over the self-loop-free edge set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeVector(pub Vec<usize>);

impl Deref for DegreeVector {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl DegreeVector {
    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<usize>() as f64 / self.0.len() as f64
        }
    }
}

/// Symmetrically normalized adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(pub Csr);

impl Deref for NormalizedAdjacency {
    type Target = Csr;
    fn deref(&self) -> &Csr {
        &self.0
    }
}

impl NormalizedAdjacency {
    pub fn into_inner(self) -> Csr {
        self.0
    }
}

/// Disjoint train/test/unlabeled partition of the nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub test: Vec<bool>,
    pub unlabeled: Vec<bool>,
    /// Seed requested by the caller.
    pub seed: u64,
    /// Seed that produced these masks after class-coverage retries.
    pub effective_seed: u64,
}

impl SplitMasks {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        indices(&self.test)
    }

    pub fn unlabeled_nodes(&self) -> Vec<usize> {
        indices(&self.unlabeled)
    }

    /// Every node outside the training set: the pool whose labels are hidden
    /// from training (test and unlabeled nodes).
    pub fn non_train_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.train[i]).collect()
    }

    /// Masks from explicit node sets; everything else is unlabeled.
    pub fn from_sets(n: usize, train: &[usize], test: &[usize]) -> Result<Self> {
        let mut t = vec![false; n];
        let mut s = vec![false; n];
        for &i in train {
            *t.get_mut(i).ok_or_else(|| Error::Split(format!("node {i} out of range")))? = true;
        }
        for &i in test {
            if *t.get(i).ok_or_else(|| Error::Split(format!("node {i} out of range")))? {
                return Err(Error::Split(format!("node {i} in both train and test")));
            }
            s[i] = true;
        }
        let u = (0..n).map(|i| !t[i] && !s[i]).collect();
        Ok(SplitMasks {
            train: t,
            test: s,
            unlabeled: u,
            seed: 0,
            effective_seed: 0,
        })
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

/// Random train/test split over labeled nodes.
///
/// `round(label_rate·N)` training and `round(test_frac·N)` test nodes are
/// drawn from the labeled nodes; every other node is unlabeled. When the
/// training set misses a class, the split is redrawn with `seed+1`, `seed+2`,
/// … up to [`MAX_SPLIT_RETRIES`] times.
pub fn split(g: &Graph, label_rate: f64, test_frac: f64, seed: u64) -> Result<SplitMasks> {
    if !(0.0..=1.0).contains(&label_rate) || !(0.0..=1.0).contains(&test_frac) {
        return Err(Error::Split(format!(
            "fractions must lie in [0, 1] (label_rate {label_rate}, test_frac {test_frac})"
        )));
    }
    if label_rate + test_frac > 1.0 + 1e-12 {
        return Err(Error::Split(format!(
            "label_rate + test_frac = {} exceeds 1",
            label_rate + test_frac
        )));
    }
    let n = g.num_nodes();
    let n_train = (label_rate * n as f64).round() as usize;
    let n_test = (test_frac * n as f64).round() as usize;
    let candidates: Vec<usize> = (0..n).filter(|&i| g.labels[i].is_some()).collect();
    if n_train + n_test > candidates.len() {
        return Err(Error::Split(format!(
            "need {} labeled nodes for {n_train} train + {n_test} test, graph has {}",
            n_train + n_test,
            candidates.len()
        )));
    }
    let present: BTreeSet<usize> = candidates.iter().map(|&i| g.labels[i].unwrap()).collect();
    let need_coverage = n_train > 0;
    for attempt in 0..MAX_SPLIT_RETRIES {
        let effective = seed.wrapping_add(attempt);
        let mut order = candidates.clone();
        order.shuffle(&mut rng::seeded(rng::derive_seed(effective, rng::Stream::Split)));
        let train = &order[..n_train];
        if need_coverage {
            let covered: BTreeSet<usize> = train.iter().map(|&i| g.labels[i].unwrap()).collect();
            if covered != present {
                continue;
            }
        }
        let test = &order[n_train..n_train + n_test];
        let mut masks = SplitMasks::from_sets(n, train, test)?;
        masks.seed = seed;
        masks.effective_seed = effective;
        return Ok(masks);
    }
    Err(Error::Split(format!(
        "no split with {n_train} training nodes covers all {} classes after {MAX_SPLIT_RETRIES} seeds",
        present.len()
    )))
}
