//! Helpers shared by the integration suites.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng as _;
use sldsgcn::graph::Graph;
use sldsgcn::rng::Rng;
use sldsgcn::sparse::Csr;

pub mod checks;

pub fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn load(name: &str) -> Graph {
    Graph::load(data_dir(name)).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

/// Erdős–Rényi edges over `n` nodes with edge probability `p`.
pub fn random_edges(n: usize, p: f64, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn random_dense(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// Graph over `edges` with random features and labels cycling over `classes`.
pub fn graph_from_edges(n: usize, edges: &[(usize, usize)], features: usize, classes: usize, rng: &mut Rng) -> Graph {
    let x = random_dense(n, features, rng);
    let labels = (0..n).map(|i| Some(i % classes)).collect();
    Graph::from_parts(edges, x, labels, Some(classes)).unwrap().0
}

/// Dense adjacency built straight from the edge list.
pub fn dense_adjacency(n: usize, edges: &[(usize, usize)]) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for &(i, j) in edges {
        if i != j {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
    }
    a
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` evaluated entry by entry.
pub fn dense_normalized(n: usize, edges: &[(usize, usize)]) -> Array2<f64> {
    let mut a = dense_adjacency(n, edges);
    for i in 0..n {
        a[[i, i]] = 1.0;
    }
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (deg[i] * deg[j]).sqrt())
}

pub fn sparse(m: &Array2<f64>) -> Arc<Csr> {
    Arc::new(Csr::from_dense(m.view()))
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
