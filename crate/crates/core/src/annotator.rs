//! Label propagation annotator.
//!
//! Iterates `Y ← D⁻¹ A Y` with training rows clamped to their one-hot labels,
//! then takes a per-node argmax. Nodes that receive no label mass (components
//! without a training node) fall back to the most frequent training class.
//!
//! The iteration stops short of the exact fixed point, so two classes whose
//! limiting masses are equal can still differ by the remaining error. That
//! error is estimated from the geometric decay of successive changes, and
//! classes within it of the maximum count as tied (lowest index wins).

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, SplitMasks};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Cap on the estimated contraction rate used for the tie margin.
const MAX_RATE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotatorConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Per-node pseudo labels from the annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabels {
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Final propagated class mass, one row per node.
    #[serde(skip)]
    pub mass: Array2<f64>,
}

impl PseudoLabels {
    /// Accuracy of the pseudo labels on `nodes` against ground truth.
    pub fn accuracy_on(&self, g: &Graph, nodes: &[usize]) -> f64 {
        accuracy(&self.labels, g.labels(), nodes)
    }

    /// Writes `node_id,pseudo_label` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node_id,pseudo_label")?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        Ok(())
    }
}

/// Fraction of `nodes` whose predicted label equals the known label. Nodes
/// without a known label are skipped; an empty set yields 0.
pub fn accuracy(predicted: &[usize], truth: &[Option<usize>], nodes: &[usize]) -> f64 {
    let mut total = 0usize;
    let mut hits = 0usize;
    for &i in nodes {
        if let Some(t) = truth[i] {
            total += 1;
            hits += usize::from(predicted[i] == t);
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Most frequent class among training nodes, ties to the lowest index.
pub fn majority_training_class(g: &Graph, masks: &SplitMasks) -> Option<usize> {
    let mut counts = vec![0usize; g.num_classes()];
    for i in masks.train_nodes() {
        if let Some(c) = g.labels()[i] {
            counts[c] += 1;
        }
    }
    let max = *counts.iter().max()?;
    (max > 0).then(|| counts.iter().position(|&k| k == max).expect("max is present"))
}

pub fn label_propagation(g: &Graph, masks: &SplitMasks, config: &AnnotatorConfig) -> Result<PseudoLabels> {
    if !(config.tol > 0.0) {
        return Err(Error::Contract(format!("tolerance must be positive, got {}", config.tol)));
    }
    let n = g.num_nodes();
    let c = g.num_classes();
    if masks.len() != n {
        return Err(Error::DimensionMismatch(format!("split over {} nodes for a graph of {n}", masks.len())));
    }
    let train: Vec<(usize, usize)> = masks
        .train_nodes()
        .into_iter()
        .filter_map(|i| g.labels()[i].map(|l| (i, l)))
        .collect();
    let Some(fallback) = majority_training_class(g, masks) else {
        return Err(Error::Contract("label propagation needs at least one training node".into()));
    };

    let adj = g.adjacency();
    let degrees = g.degrees();
    let clamp = |y: &mut Array2<f64>| {
        for &(i, l) in &train {
            y.row_mut(i).fill(0.0);
            y[[i, l]] = 1.0;
        }
    };
    let mut y = Array2::<f64>::zeros((n, c));
    clamp(&mut y);
    let mut iterations = 0;
    let mut converged = false;
    let mut prev_change = f64::INFINITY;
    let mut residual = 0.0;
    while iterations < config.max_iter {
        let mut next = adj.mul_dense(y.view())?;
        for (i, mut row) in next.rows_mut().into_iter().enumerate() {
            if degrees[i] > 0 {
                row /= degrees[i] as f64;
            }
        }
        clamp(&mut next);
        iterations += 1;
        let change = next
            .iter()
            .zip(y.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        y = next;
        let rate = if prev_change > 0.0 { (change / prev_change).min(MAX_RATE) } else { 0.0 };
        residual = change * rate / (1.0 - rate);
        prev_change = change;
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let margin = 2.0 * residual;
    let labels = y
        .rows()
        .into_iter()
        .map(|row| {
            let max = row.fold(0.0f64, |m, &v| m.max(v));
            if max <= 0.0 {
                fallback
            } else {
                row.iter().position(|&v| v >= max - margin).expect("max is present")
            }
        })
        .collect();
    Ok(PseudoLabels {
        labels,
        iterations,
        converged,
        mass: y,
    })
}
