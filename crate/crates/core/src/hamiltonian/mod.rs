//! Parent Hamiltonians: stabilizer projectors, their M-transformed versions, and
//! range-complement terms of grouped tensor networks.

mod spectrum;

pub use spectrum::{spectrum, spectrum_with, Spectrum, SpectrumOptions};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{Graph, Grouping, QgmModel};
use crate::tensor::{complement_projector, statevec, TensorNetwork};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Hermitian positive-semidefinite operator on an ordered list of qubits
/// (first listed qubit is the matrix's most significant bit).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub support: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl LocalTerm {
    pub fn new(support: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = 1usize << support.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidTensor(format!(
                "term on {} qubits needs a {d}×{d} matrix",
                support.len()
            )));
        }
        let mut sorted = support.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::InvalidTensor("repeated qubit in support".into()));
        }
        let scale = matrix.norm().max(1.0);
        if (&matrix - matrix.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::InvalidTensor("term is not Hermitian".into()));
        }
        let herm = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let min = herm.clone().symmetric_eigenvalues().min();
        if min < -1e-10 * scale {
            return Err(Error::InvalidTensor(format!("term has negative eigenvalue {min:e}")));
        }
        Ok(Self { support, matrix: herm })
    }

    /// |b⟩⟨b| on one qubit.
    pub fn pin(qubit: usize, bit: u8) -> Self {
        let mut m = DMatrix::zeros(2, 2);
        m[(bit as usize, bit as usize)] = ONE;
        Self {
            support: vec![qubit],
            matrix: m,
        }
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        (&self.matrix * &self.matrix - &self.matrix).iter().all(|z| z.norm() <= tol)
    }

    pub fn rank(&self) -> usize {
        self.matrix.trace().re.round() as usize
    }

    /// Same operator on relabelled qubits.
    pub fn relabel(&self, map: impl Fn(usize) -> usize) -> Self {
        Self {
            support: self.support.iter().map(|&q| map(q)).collect(),
            matrix: self.matrix.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParentHamiltonian {
    pub n_qubits: usize,
    pub terms: Vec<LocalTerm>,
}

impl ParentHamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<LocalTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidTensor("parent Hamiltonian needs at least one term".into()));
        }
        if let Some(q) = terms.iter().flat_map(|t| t.support.iter()).find(|&&q| q >= n_qubits) {
            return Err(Error::InvalidTensor(format!("support qubit {q} outside {n_qubits} qubits")));
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; v.len()];
        for t in &self.terms {
            let w = statevec::apply_op(v, self.n_qubits, &t.support, &t.matrix);
            for (o, x) in out.iter_mut().zip(w) {
                *o += x;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = 1usize << self.n_qubits;
        let mut h = DMatrix::zeros(d, d);
        for j in 0..d {
            let col = self.apply(&statevec::basis_state(self.n_qubits, j));
            for (i, x) in col.into_iter().enumerate() {
                h[(i, j)] = x;
            }
        }
        h
    }

    /// Largest Frobenius norm among the terms (at least 1); sets the tolerance scale.
    pub fn term_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.matrix.norm()).fold(1.0, f64::max)
    }
}

fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// H_i = (I − X_i ⊗_{j∈N(i)} Z_j)/2 on the sorted support {i} ∪ N(i).
pub fn stabilizer_terms(g: &Graph) -> Result<ParentHamiltonian> {
    let terms = (0..g.m())
        .map(|i| {
            let mut support = g.neighbors(i);
            support.push(i);
            support.sort();
            let mut p = DMatrix::from_element(1, 1, ONE);
            for &q in &support {
                p = p.kronecker(&if q == i { pauli_x() } else { pauli_z() });
            }
            let d = p.nrows();
            let h = (DMatrix::identity(d, d) - p) * C64::new(0.5, 0.0);
            LocalTerm { support, matrix: h }
        })
        .collect();
    ParentHamiltonian::new(g.m(), terms)
}

/// H_i′ = A† H_i A with A = ⊗_{j ∈ support} M_j⁻¹.
pub fn transformed_terms(model: &QgmModel) -> Result<ParentHamiltonian> {
    model.check_invertible()?;
    let base = stabilizer_terms(&model.graph)?;
    let terms = base
        .terms
        .into_iter()
        .map(|t| {
            let mut a = DMatrix::from_element(1, 1, ONE);
            for &q in &t.support {
                let inv = model.matrices[q].inverse().expect("checked invertible");
                a = a.kronecker(&DMatrix::from_iterator(2, 2, inv.iter().copied()));
            }
            let h = a.adjoint() * &t.matrix * &a;
            LocalTerm::new(t.support, h)
        })
        .collect::<Result<Vec<_>>>()?;
    ParentHamiltonian::new(model.m(), terms)
}

/// Windows of two consecutive groups (a single group if there is only one).
pub fn pair_windows(grouping: &Grouping) -> Vec<Vec<usize>> {
    if grouping.groups.len() == 1 {
        return vec![grouping.groups[0].clone()];
    }
    grouping
        .groups
        .windows(2)
        .map(|w| {
            let mut v: Vec<usize> = w[0].iter().chain(&w[1]).copied().collect();
            v.sort();
            v
        })
        .collect()
}

pub fn tn_parent_terms(tn: &TensorNetwork, grouping: &Grouping) -> Result<ParentHamiltonian> {
    tn_parent_terms_windows(tn, &pair_windows(grouping))
}

/// One complement projector per window of tensor ids. Qubits are renumbered by their
/// rank among the network's physical qubits.
pub fn tn_parent_terms_windows(tn: &TensorNetwork, windows: &[Vec<usize>]) -> Result<ParentHamiltonian> {
    let qubits = tn.qubits();
    let mut terms = vec![];
    for (wi, w) in windows.iter().enumerate() {
        let (l, legs) = tn.contract_subset(w)?;
        if l.data().iter().all(|z| *z == ZERO) {
            return Err(Error::ZeroWindow { window: wi });
        }
        let phys: Vec<usize> = legs
            .iter()
            .filter_map(|leg| match leg {
                crate::tensor::Leg::Physical { qubit, .. } => Some(*qubit),
                _ => None,
            })
            .collect();
        let axes: Vec<usize> = (0..phys.len()).collect();
        let p = complement_projector(&l, &axes);
        let support = phys
            .iter()
            .map(|q| qubits.binary_search(q).expect("qubit in network"))
            .collect();
        terms.push(LocalTerm {
            support,
            matrix: p.to_dmatrix(1),
        });
    }
    ParentHamiltonian::new(qubits.len(), terms)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrustrationReport {
    /// ‖term · ψ̂‖ per term, ψ̂ normalized.
    pub residuals: Vec<f64>,
    pub pass: bool,
}

pub const FRUSTRATION_TOL: f64 = 1e-10;

pub fn verify_frustration_free(h: &ParentHamiltonian, state: &[C64]) -> Result<FrustrationReport> {
    let norm = statevec::norm_sqr(state).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let residuals: Vec<f64> = h
        .terms
        .iter()
        .map(|t| statevec::norm_sqr(&statevec::apply_op(state, h.n_qubits, &t.support, &t.matrix)).sqrt() / norm)
        .collect();
    let pass = residuals.iter().all(|r| *r <= FRUSTRATION_TOL);
    Ok(FrustrationReport { residuals, pass })
}

/// Plain-text report: one `key = value` line per quantity, then one line per term.
pub fn spectrum_report(h: &ParentHamiltonian, s: &Spectrum, ff: Option<&FrustrationReport>) -> String {
    let mut out = String::new();
    out.push_str(&format!("qubits = {}\nterms = {}\n", h.n_qubits, h.terms.len()));
    out.push_str(&format!("ground_energy = {:e}\n", s.ground_energy));
    out.push_str(&format!("gap = {:e}\n", s.gap));
    out.push_str(&format!("degeneracy = {}\n", s.degeneracy));
    out.push_str(&format!("solver = {}\n", if s.dense { "dense" } else { "lanczos" }));
    if let Some(ff) = ff {
        out.push_str(&format!("frustration_free = {}\n", ff.pass));
        for (i, (t, r)) in h.terms.iter().zip(&ff.residuals).enumerate() {
            out.push_str(&format!("residual[{i}] support={:?} = {r:e}\n", t.support));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{graph_state, Assignment, LocalMatrix};

    #[test]
    fn single_vertex_stabilizer() {
        let g = Graph::new(1, &[], &[0]).unwrap();
        let h = stabilizer_terms(&g).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[ONE, -ONE, -ONE, ONE]) * C64::new(0.5, 0.0);
        assert!((&h.terms[0].matrix - want).norm() < 1e-15);
        let r = verify_frustration_free(&h, graph_state(&g).unwrap().data()).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn ring_stabilizers_annihilate_graph_state() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], &[]).unwrap();
        let h = stabilizer_terms(&g).unwrap();
        assert_eq!(h.terms.len(), 4);
        for t in &h.terms {
            assert!(t.is_projector(1e-15));
        }
        let r = verify_frustration_free(&h, graph_state(&g).unwrap().data()).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
    }

    #[test]
    fn transformed_single_vertex() {
        let g = Graph::new(1, &[], &[0]).unwrap();
        let model = QgmModel::new(g, vec![LocalMatrix::diag(1.0, 2.0)]).unwrap();
        let h = transformed_terms(&model).unwrap();
        let psi = [ONE, C64::new(2.0, 0.0)];
        let r = verify_frustration_free(&h, &psi).unwrap();
        assert!(r.pass);
        let identity = QgmModel::new(Graph::new(1, &[], &[0]).unwrap(), vec![LocalMatrix::identity()]).unwrap();
        assert_eq!(transformed_terms(&identity).unwrap(), stabilizer_terms(&identity.graph).unwrap());
    }

    #[test]
    fn local_term_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(LocalTerm::new(vec![0], bad).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[-ONE, ZERO, ZERO, ONE]);
        assert!(LocalTerm::new(vec![0], neg).is_err());
        assert!(LocalTerm::new(vec![0, 0], DMatrix::identity(4, 4)).is_err());
        assert!(ParentHamiltonian::new(1, vec![LocalTerm::pin(1, 1)]).is_err());
        assert!(ParentHamiltonian::new(1, vec![]).is_err());
    }

    #[test]
    fn product_state_network_terms() {
        // single tensor equal to |0⟩⊗|+⟩
        use crate::tensor::{ComplexTensor, Leg, NetTensor};
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = ComplexTensor::new(vec![2, 2], vec![C64::new(h, 0.), C64::new(h, 0.), ZERO, ZERO]).unwrap();
        let tn = TensorNetwork::new(vec![NetTensor::new(
            t,
            vec![Leg::Physical { qubit: 0, site: 0 }, Leg::Physical { qubit: 1, site: 0 }],
            "psi",
        )])
        .unwrap();
        let grouping = crate::model::group_tensors(&tn).unwrap();
        let ph = tn_parent_terms(&tn, &grouping).unwrap();
        assert_eq!(ph.terms.len(), 1);
        assert_eq!(ph.terms[0].rank(), 3);
        let psi = [C64::new(h, 0.), C64::new(h, 0.), ZERO, ZERO];
        assert!(verify_frustration_free(&ph, &psi).unwrap().pass);
    }

    #[test]
    fn qgm_network_terms_annihilate_state() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3)], &[0, 1, 2, 3]).unwrap();
        let mats = vec![
            LocalMatrix::new(C64::new(1.0, 0.3), C64::new(0.2, 0.0), C64::new(-0.4, 0.1), C64::new(0.9, 0.0)),
            LocalMatrix::diag(1.5, 0.5),
            LocalMatrix::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.3, 0.0), C64::new(1.0, -0.2)),
            LocalMatrix::identity(),
        ];
        let model = QgmModel::new(g, mats).unwrap();
        let z = Assignment::from_pairs(&[(1, 1)]);
        let tn = crate::model::tensor_network_of(&model, &z).unwrap();
        let grouping = crate::model::group_tensors(&tn).unwrap();
        let ph = tn_parent_terms(&tn, &grouping).unwrap();
        assert_eq!(ph.n_qubits, 3);
        for t in &ph.terms {
            assert!(t.is_projector(1e-10));
        }
        let psi = crate::model::project_conditioned(&model, &z).unwrap();
        let r = verify_frustration_free(&ph, psi.data()).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
    }
}
