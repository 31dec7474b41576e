#![allow(dead_code)]

use qgm::factor_graph::{Factor, FactorGraph, PairwiseExpFactor};
use qgm::inference::DataSet;
use qgm::model::{Graph, LocalMatrix, QgmModel};
use qgm::C64;
use rand::Rng;

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Random complex 2×2 matrix with |det| ≥ 0.3.
pub fn random_matrix<R: Rng>(rng: &mut R) -> LocalMatrix {
    loop {
        let mut z = || C64::new(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
        let m = LocalMatrix::new(z() + 1.0, z(), z(), z() + 1.0);
        if m.det().norm() >= 0.3 {
            return m;
        }
    }
}

pub fn random_graph<R: Rng>(rng: &mut R, m: usize, p_edge: f64) -> Vec<(usize, usize)> {
    let mut edges = vec![];
    for a in 0..m {
        for b in a + 1..m {
            if rng.random::<f64>() < p_edge {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Random model on m vertices; `visible` nonempty random subset when `with_hidden`.
pub fn random_model<R: Rng>(rng: &mut R, m: usize, with_hidden: bool) -> QgmModel {
    let edges = random_graph(rng, m, 0.5);
    let mut visible: Vec<usize> = (0..m).filter(|_| !with_hidden || rng.random::<f64>() < 0.7).collect();
    if visible.is_empty() {
        visible.push(rng.random_range(0..m));
    }
    let g = Graph::new(m, &edges, &visible).unwrap();
    let mats = (0..m).map(|_| random_matrix(rng)).collect();
    QgmModel::new(g, mats).unwrap()
}

pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, records: usize) -> DataSet {
    let recs = (0..records).map(|_| (0..n).map(|_| rng.random_range(0..2u8)).collect()).collect();
    DataSet::new(n, recs).unwrap()
}

/// Random pairwise factor graph whose compiled model has at most `max_qubits` qubits
/// and every variable degree at most `max_degree`.
pub fn random_pairwise_fg<R: Rng>(rng: &mut R, max_vars: usize, max_qubits: usize, max_degree: usize) -> FactorGraph {
    let n = rng.random_range(2..=max_vars);
    let mut deg = vec![0usize; n];
    let mut factors = vec![];
    let budget = max_qubits - n;
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    for i in (1..pairs.len()).rev() {
        pairs.swap(i, rng.random_range(0..=i));
    }
    for (a, b) in pairs.into_iter().take(budget) {
        if deg[a] < max_degree && deg[b] < max_degree {
            deg[a] += 1;
            deg[b] += 1;
            let f = PairwiseExpFactor {
                a: uniform(rng, -2.0, 2.0),
                b: uniform(rng, -1.0, 1.0),
                c: uniform(rng, -1.0, 1.0),
            };
            factors.push(Factor::pairwise(a, b, f));
        }
    }
    for v in 0..n {
        if rng.random::<f64>() < 0.5 {
            factors.push(Factor::unary(v, uniform(rng, -1.0, 1.0)));
        }
    }
    let hidden: Vec<usize> = if n > 2 && rng.random::<f64>() < 0.5 { vec![n - 1] } else { vec![] };
    FactorGraph::new(n, factors).unwrap().with_hidden(&hidden).unwrap()
}

/// Random probability vector with entries bounded away from 0.
pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| uniform(rng, 0.05, 1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}
