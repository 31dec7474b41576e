//! Quantum generative models: a graph state dressed with one invertible 2×2 matrix per vertex.

mod io;
mod network;

pub use io::ModelFile;
pub use network::{group_tensors, group_tensors_with, tensor_network_of, Grouping, GroupingOptions};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::statevec;
use crate::tensor::ComplexTensor;

/// Default statevector cap in qubits.
pub const DEFAULT_QUBIT_CAP: usize = 20;
/// Matrices with |det| below this are treated as singular.
pub const DET_FLOOR: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    m: usize,
    edges: Vec<(usize, usize)>,
    visible: Vec<usize>,
    degree_bound: Option<usize>,
}

impl Graph {
    pub fn new(m: usize, edges: &[(usize, usize)], visible: &[usize]) -> Result<Self> {
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {u}")));
            }
            if u >= m || v >= m {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) outside {m} vertices")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort();
        if norm.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph("duplicate edge".into()));
        }
        let mut seen = vec![false; m];
        for &v in visible {
            if v >= m || seen[v] {
                return Err(Error::InvalidGraph(format!("bad visible vertex {v}")));
            }
            seen[v] = true;
        }
        Ok(Self {
            m,
            edges: norm,
            visible: visible.to_vec(),
            degree_bound: None,
        })
    }

    /// Declares a degree bound and checks it.
    pub fn with_degree_bound(mut self, k: usize) -> Result<Self> {
        if let Some(v) = (0..self.m).find(|&v| self.degree(v) > k) {
            return Err(Error::InvalidGraph(format!(
                "vertex {v} has degree {} above bound {k}",
                self.degree(v)
            )));
        }
        self.degree_bound = Some(k);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn hidden(&self) -> Vec<usize> {
        (0..self.m).filter(|v| !self.visible.contains(v)).collect()
    }

    pub fn degree_bound(&self) -> Option<usize> {
        self.degree_bound
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.m).map(|v| self.degree(v)).max().unwrap_or(0)
    }
}

/// One invertible 2×2 complex matrix. Its 8 real parameters are (re, im) of the
/// entries in row-major order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalMatrix(pub Matrix2<C64>);

impl LocalMatrix {
    pub fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        Self(Matrix2::new(m00, m01, m10, m11))
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(C64::new(a, 0.0), ZERO, ZERO, C64::new(b, 0.0))
    }

    pub fn entries(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn params(&self) -> [f64; 8] {
        let m = &self.0;
        let e = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
        let mut p = [0.0; 8];
        for (k, z) in e.iter().enumerate() {
            p[2 * k] = z.re;
            p[2 * k + 1] = z.im;
        }
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        Self::new(
            C64::new(p[0], p[1]),
            C64::new(p[2], p[3]),
            C64::new(p[4], p[5]),
            C64::new(p[6], p[7]),
        )
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    }

    pub fn is_invertible(&self) -> bool {
        self.det().norm() >= DET_FLOOR
    }

    pub fn inverse(&self) -> Option<Matrix2<C64>> {
        if !self.is_invertible() {
            return None;
        }
        let m = &self.0;
        let d = self.det();
        Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / d)
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_iterator(2, 2, self.0.iter().copied())
    }

    /// ∂M/∂θ for real component `c` (0..8).
    pub fn derivative(c: usize) -> Matrix2<C64> {
        let mut d = Matrix2::zeros();
        let (r, col) = ((c / 2) / 2, (c / 2) % 2);
        d[(r, col)] = if c % 2 == 0 { ONE } else { C64::new(0.0, 1.0) };
        d
    }
}

/// Global parameter id `8·vertex + component`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId {
    pub vertex: usize,
    pub component: usize,
}

impl ParamId {
    pub fn from_global(id: usize) -> Self {
        Self {
            vertex: id / 8,
            component: id % 8,
        }
    }

    pub fn global(&self) -> usize {
        8 * self.vertex + self.component
    }
}

/// Partial assignment of bits to vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment(pub BTreeMap<usize, u8>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(usize, u8)]) -> Self {
        Self(pairs.iter().copied().collect())
    }

    pub fn insert(&mut self, v: usize, bit: u8) {
        self.0.insert(v, bit);
    }

    pub fn get(&self, v: usize) -> Option<u8> {
        self.0.get(&v).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn keys(&self) -> Vec<usize> {
        self.0.keys().copied().collect()
    }

    pub fn pairs(&self) -> Vec<(usize, u8)> {
        self.0.iter().map(|(k, v)| (*k, *v)).collect()
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        for (&v, &b) in &self.0 {
            if v >= m {
                return Err(Error::InvalidAssignment(format!("vertex {v} not in graph")));
            }
            if b > 1 {
                return Err(Error::InvalidAssignment(format!("bit {b} on vertex {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QgmModel {
    pub graph: Graph,
    pub matrices: Vec<LocalMatrix>,
}

impl QgmModel {
    pub fn new(graph: Graph, matrices: Vec<LocalMatrix>) -> Result<Self> {
        if matrices.len() != graph.m() {
            return Err(Error::InvalidGraph(format!(
                "{} matrices for {} vertices",
                matrices.len(),
                graph.m()
            )));
        }
        let model = Self { graph, matrices };
        model.check_invertible()?;
        Ok(model)
    }

    pub fn check_invertible(&self) -> Result<()> {
        for (v, m) in self.matrices.iter().enumerate() {
            if !m.is_invertible() {
                return Err(Error::SingularMatrix {
                    vertex: v,
                    det: m.det().norm(),
                });
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.graph.m()
    }

    pub fn n_params(&self) -> usize {
        8 * self.m()
    }

    pub fn params(&self) -> Vec<f64> {
        self.matrices.iter().flat_map(|m| m.params()).collect()
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        assert_eq!(p.len(), self.n_params());
        let matrices = p.chunks(8).map(LocalMatrix::from_params).collect();
        Self::new(self.graph.clone(), matrices)
    }

    /// Unnormalized (M₁⊗…⊗M_m)|G⟩.
    pub fn q_state(&self) -> Result<ComplexTensor> {
        self.q_state_capped(DEFAULT_QUBIT_CAP)
    }

    pub fn q_state_capped(&self, cap: usize) -> Result<ComplexTensor> {
        self.check_invertible()?;
        let m = self.m();
        let mut s = graph_state_capped(&self.graph, cap)?.into_data();
        for (v, mat) in self.matrices.iter().enumerate() {
            s = statevec::apply_op(&s, m, &[v], &mat.to_dmatrix());
        }
        Ok(ComplexTensor::from_parts(vec![2; m], s))
    }
}

pub fn graph_state(g: &Graph) -> Result<ComplexTensor> {
    graph_state_capped(g, DEFAULT_QUBIT_CAP)
}

pub fn graph_state_capped(g: &Graph, cap: usize) -> Result<ComplexTensor> {
    let m = g.m();
    if m > cap {
        return Err(Error::TooManyQubits { requested: m, cap });
    }
    let amp = 1.0 / ((1u64 << m) as f64).sqrt();
    let data = (0..1usize << m)
        .map(|i| {
            let parity = g
                .edges()
                .iter()
                .filter(|&&(u, v)| statevec::bit(i, u, m) & statevec::bit(i, v, m) == 1)
                .count();
            C64::new(if parity % 2 == 0 { amp } else { -amp }, 0.0)
        })
        .collect();
    Ok(ComplexTensor::from_parts(vec![2; m], data))
}

pub fn q_state(model: &QgmModel) -> Result<ComplexTensor> {
    model.q_state()
}

/// (I⊗⟨z|)|Q⟩ over the remaining vertices in ascending order; a scalar when all are fixed.
pub fn project_conditioned(model: &QgmModel, z: &Assignment) -> Result<ComplexTensor> {
    z.validate(model.m())?;
    let q = model.q_state()?;
    Ok(slice_state(q.data(), model.m(), z))
}

pub(crate) fn slice_state(q: &[C64], m: usize, z: &Assignment) -> ComplexTensor {
    let v = statevec::slice_qubits(q, m, &z.pairs());
    ComplexTensor::from_parts(vec![2; m - z.len()], v)
}
