#![allow(dead_code)]

use dynhop::StaticGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph: random spanning tree plus random extra edges up to `m`.
pub fn random_connected_edges(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for k in 1..n {
        let p = rng.random_range(0..k);
        edges.push((p, k));
    }
    let m = m.min(n * (n - 1) / 2);
    while edges.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let e = (a.min(b), a.max(b));
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges
}

/// Random simple graph that may be disconnected.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn weighted(rng: &mut ChaCha8Rng, n: usize, edges: Vec<(usize, usize)>) -> StaticGraph {
    let w = (0..edges.len()).map(|_| rng.random_range(0.05..2.0)).collect();
    StaticGraph::new(n, edges, w).unwrap()
}

/// Dense row-major matrix product, independent of the library's linear algebra.
pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}
