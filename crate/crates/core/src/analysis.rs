//! Degree-bias diagnostics: degree distribution, error rate and
//! labeled-neighbour ratio by degree, and gradient-based influence scores.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape};
use crate::error::{Error, Result};
use crate::graph::{Graph, SplitMasks};
use crate::params::glorot_uniform;
use crate::rng::{derive_seed, seeded, splitmix64, Rng, Stream};

/// Reporting bucket for a node degree: exact degrees up to `d_max`, then one
/// open-ended bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DegreeBucket {
    Exact(usize),
    Above(usize),
}

impl DegreeBucket {
    pub fn of(degree: usize, d_max: usize) -> Self {
        if degree > d_max {
            DegreeBucket::Above(d_max)
        } else {
            DegreeBucket::Exact(degree)
        }
    }

    pub fn contains(self, degree: usize) -> bool {
        match self {
            DegreeBucket::Exact(d) => degree == d,
            DegreeBucket::Above(d) => degree > d,
        }
    }
}

impl fmt::Display for DegreeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeBucket::Exact(d) => write!(f, "{d}"),
            DegreeBucket::Above(d) => write!(f, ">{d}"),
        }
    }
}

/// Buckets `1..=d_max` and `>d_max`, preceded by `0` when `degrees` contains
/// an isolated node.
pub fn bucket_order(degrees: impl IntoIterator<Item = usize>, d_max: usize) -> Vec<DegreeBucket> {
    let has_zero = degrees.into_iter().any(|d| d == 0);
    let start = if has_zero { 0 } else { 1 };
    (start..=d_max)
        .map(DegreeBucket::Exact)
        .chain(std::iter::once(DegreeBucket::Above(d_max)))
        .collect()
}

/// Classification outcome for one degree bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub bucket: String,
    pub nodes: usize,
    pub correct: usize,
    /// `None` for an empty bucket.
    pub accuracy: Option<f64>,
    pub error_rate: Option<f64>,
}

/// Per-bucket accuracy and error rate of `predicted` over `nodes` with known
/// labels.
pub fn error_by_degree(
    predicted: &[usize],
    truth: &[Option<usize>],
    nodes: &[usize],
    degrees: &[usize],
    d_max: usize,
) -> Vec<BucketStats> {
    let scored: Vec<(usize, bool)> = nodes
        .iter()
        .filter_map(|&i| truth[i].map(|t| (degrees[i], predicted[i] == t)))
        .collect();
    bucket_order(scored.iter().map(|s| s.0), d_max)
        .into_iter()
        .map(|b| {
            let (n, c) = scored
                .iter()
                .filter(|s| b.contains(s.0))
                .fold((0, 0), |(n, c), s| (n + 1, c + usize::from(s.1)));
            let accuracy = (n > 0).then(|| c as f64 / n as f64);
            BucketStats {
                bucket: b.to_string(),
                nodes: n,
                correct: c,
                accuracy,
                error_rate: accuracy.map(|a| 1.0 - a),
            }
        })
        .collect()
}

/// Number of nodes with each degree value.
pub fn degree_distribution(g: &Graph) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for &d in g.degrees().iter() {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub bucket: String,
    pub nodes: usize,
    pub with_labeled_neighbor: usize,
    pub ratio: f64,
}

fn has_training_neighbor(g: &Graph, masks: &SplitMasks) -> Vec<bool> {
    (0..g.num_nodes())
        .map(|i| g.neighbors(i).iter().any(|&j| masks.train[j]))
        .collect()
}

/// For each degree value present, the fraction of nodes with at least one
/// training neighbour.
pub fn labeled_neighbor_ratio(g: &Graph, masks: &SplitMasks) -> BTreeMap<usize, RatioRow> {
    let flags = has_training_neighbor(g, masks);
    let mut out: BTreeMap<usize, RatioRow> = BTreeMap::new();
    for (i, &d) in g.degrees().iter().enumerate() {
        let row = out.entry(d).or_insert_with(|| RatioRow {
            bucket: d.to_string(),
            nodes: 0,
            with_labeled_neighbor: 0,
            ratio: 0.0,
        });
        row.nodes += 1;
        row.with_labeled_neighbor += usize::from(flags[i]);
    }
    for row in out.values_mut() {
        row.ratio = row.with_labeled_neighbor as f64 / row.nodes as f64;
    }
    out
}

/// The labeled-neighbour ratio aggregated into reporting buckets.
pub fn labeled_neighbor_ratio_buckets(g: &Graph, masks: &SplitMasks, d_max: usize) -> Vec<RatioRow> {
    let flags = has_training_neighbor(g, masks);
    let degrees = g.degrees();
    bucket_order(degrees.iter().copied(), d_max)
        .into_iter()
        .map(|b| {
            let (n, k) = degrees
                .iter()
                .zip(&flags)
                .filter(|(d, _)| b.contains(**d))
                .fold((0, 0), |(n, k), (_, &f)| (n + 1, k + usize::from(f)));
            RatioRow {
                bucket: b.to_string(),
                nodes: n,
                with_labeled_neighbor: k,
                ratio: if n == 0 { 0.0 } else { k as f64 / n as f64 },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InfluenceConfig {
    /// Independent random initializations averaged over.
    pub trials: usize,
    /// Random cotangent directions per labeled node and trial.
    pub repetitions: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        InfluenceConfig {
            trials: 20,
            repetitions: 8,
            hidden: crate::layers::HIDDEN_UNITS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    /// `S(i)` for every node.
    pub scores: Vec<f64>,
    pub labeled: Vec<usize>,
    pub trials: usize,
    pub repetitions: usize,
    pub norm: String,
    /// `I(i, k)`: rows are nodes, columns follow `labeled`.
    #[serde(skip)]
    pub pairwise: Matrix,
}

/// Estimated Frobenius norms `‖∂h_k / ∂x_i‖` of an untrained two-layer GCN
/// (ReLU hidden layer, linear output), for one initialization. Rows are
/// nodes, columns follow `labeled`.
///
/// For a unit vector `u` uniform on the output sphere,
/// `E‖uᵀJ‖² = ‖J‖²_F / C`, so each labeled node needs only reverse passes
/// seeded at its own output row. Because the normalized adjacency is
/// symmetric, `∂h_k/∂x_i` and `∂h_i/∂x_k` coincide for this architecture.
pub fn jacobian_norms_single(
    adjacency: &Arc<crate::sparse::Csr>,
    features: &Matrix,
    labeled: &[usize],
    num_outputs: usize,
    hidden: usize,
    repetitions: usize,
    rng: &mut Rng,
) -> Result<Matrix> {
    let w1 = glorot_uniform(features.ncols(), hidden, rng);
    let w2 = glorot_uniform(hidden, num_outputs, rng);
    jacobian_norms_with_weights(adjacency, features, &w1, &w2, labeled, repetitions, rng)
}

/// [`jacobian_norms_single`] for given layer weights `w1` (features × hidden)
/// and `w2` (hidden × outputs); `rng` only draws the cotangent directions.
pub fn jacobian_norms_with_weights(
    adjacency: &Arc<crate::sparse::Csr>,
    features: &Matrix,
    w1: &Matrix,
    w2: &Matrix,
    labeled: &[usize],
    repetitions: usize,
    rng: &mut Rng,
) -> Result<Matrix> {
    if repetitions == 0 {
        return Err(Error::Config("influence needs at least one repetition".into()));
    }
    let n = features.nrows();
    let num_outputs = w2.ncols();
    let mut tape = Tape::new();
    let x = tape.param(features.clone());
    let w1 = tape.constant(w1.clone());
    let w2 = tape.constant(w2.clone());
    let xw = tape.matmul(x, w1)?;
    let h = tape.sparse_matmul(adjacency, xw)?;
    let h = tape.relu(h);
    let hw = tape.matmul(h, w2)?;
    let out = tape.sparse_matmul(adjacency, hw)?;

    let mut norms = Matrix::zeros((n, labeled.len()));
    for (col, &k) in labeled.iter().enumerate() {
        for _ in 0..repetitions {
            let mut u: Vec<f64> = (0..num_outputs).map(|_| StandardNormal.sample(rng)).collect();
            let len = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.iter_mut().for_each(|v| *v /= len);
            let mut cot = Matrix::zeros((n, num_outputs));
            cot.row_mut(k).assign(&ndarray::Array1::from(u));
            let grads = tape.backward_with_cotangent(out, cot)?;
            let gx = grads.get_or_zeros(x, (n, features.ncols()));
            for (i, row) in gx.rows().into_iter().enumerate() {
                norms[[i, col]] += row.dot(&row);
            }
        }
    }
    let scale = num_outputs as f64 / repetitions as f64;
    norms.mapv_inplace(|s| (s * scale).sqrt());
    Ok(norms)
}

/// Influence scores `S(i) = Σ_k I(i, k)` over the nodes in `labeled`, where
/// `I(i, k)` is the Jacobian norm averaged over `config.trials` random
/// initializations. Trials run in parallel; results are deterministic.
pub fn influence_scores(g: &Graph, labeled: &[usize], config: &InfluenceConfig) -> Result<InfluenceReport> {
    if config.trials == 0 || config.repetitions == 0 {
        return Err(Error::Config("influence needs at least one trial and one repetition".into()));
    }
    if let Some(&bad) = labeled.iter().find(|&&k| k >= g.num_nodes()) {
        return Err(Error::Contract(format!("labeled node {bad} out of range")));
    }
    let adjacency = Arc::new(g.normalized_adjacency(true).into_inner());
    let features = g.feature_matrix(true).to_dense();
    let outputs = g.num_classes().max(1);
    let base = derive_seed(config.seed, Stream::Analysis);
    let per_trial: Vec<Matrix> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(splitmix64(base.wrapping_add(t as u64)));
            jacobian_norms_single(&adjacency, &features, labeled, outputs, config.hidden, config.repetitions, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut pairwise = Matrix::zeros((g.num_nodes(), labeled.len()));
    for m in &per_trial {
        pairwise += m;
    }
    pairwise /= config.trials as f64;
    let scores = pairwise.rows().into_iter().map(|r| r.sum()).collect();
    Ok(InfluenceReport {
        scores,
        labeled: labeled.to_vec(),
        trials: config.trials,
        repetitions: config.repetitions,
        norm: "frobenius".into(),
        pairwise,
    })
}

/// Breadth-first snowball sample of `size` nodes. Starts at a random node and
/// restarts from a random unvisited node whenever a component is exhausted.
pub fn snowball_sample(g: &Graph, size: usize, rng: &mut Rng) -> Vec<usize> {
    let n = g.num_nodes();
    let size = size.min(n);
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(size);
    let mut queue = VecDeque::new();
    while order.len() < size {
        if queue.is_empty() {
            let unvisited: Vec<usize> = (0..n).filter(|&i| !visited[i]).collect();
            let start = unvisited[rng.random_range(0..unvisited.len())];
            visited[start] = true;
            queue.push_back(start);
        }
        let Some(v) = queue.pop_front() else { break };
        order.push(v);
        let mut next: Vec<usize> = g.neighbors(v).iter().copied().filter(|&j| !visited[j]).collect();
        next.shuffle(rng);
        for j in next {
            visited[j] = true;
            queue.push_back(j);
        }
    }
    order.sort_unstable();
    order
}

pub fn write_degree_distribution_csv<W: Write>(hist: &BTreeMap<usize, usize>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "degree,count")?;
    for (d, c) in hist {
        writeln!(out, "{d},{c}")?;
    }
    Ok(())
}

pub fn write_ratio_csv<W: Write>(rows: &[RatioRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "bucket,nodes,with_labeled_neighbor,ratio")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.bucket, r.nodes, r.with_labeled_neighbor, r.ratio)?;
    }
    Ok(())
}

pub fn write_bucket_stats_csv<W: Write>(rows: &[BucketStats], mut out: W) -> std::io::Result<()> {
    writeln!(out, "bucket,nodes,correct,accuracy,error_rate")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.bucket, r.nodes, r.correct, opt(r.accuracy), opt(r.error_rate))?;
    }
    Ok(())
}

pub fn write_influence_csv<W: Write>(g: &Graph, report: &InfluenceReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "node_id,degree,labeled,influence")?;
    let degrees = g.degrees();
    let mut labeled = vec![false; g.num_nodes()];
    for &k in &report.labeled {
        labeled[k] = true;
    }
    for (i, s) in report.scores.iter().enumerate() {
        writeln!(out, "{i},{},{},{s}", degrees[i], u8::from(labeled[i]))?;
    }
    Ok(())
}
