//! Clock-encoded history states of small circuits, their tensor network, clock parent
//! Hamiltonians, the η law, and the gradient-encoding demo.
//!
//! Register layout: clock qubits c₁…c_T are qubits 0…T−1 (unary, 1^t 0^(T−t)), data
//! qubits follow. In the chain layout every gate acts on one logical qubit that is
//! swapped one data site to the right per step, so step t is V_t = (I⊗U_t)·SWAP on
//! (d_{t−1}, d_t) and V₁ = U₁ on d₁.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compiler::build_brickwork;
use crate::error::{Error, Result};
use crate::hamiltonian::{spectrum, LocalTerm, ParentHamiltonian};
use crate::inference::{grad_unconditioned, o1};
use crate::model::{LocalMatrix, ParamId};
use crate::preparation::{PreparationProblem, StateSequence};
use crate::tensor::{statevec, ComplexTensor, Leg, NetTensor, TensorNetwork};

pub const UNITARY_TOL: f64 = 1e-12;
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Chain,
    Register,
}

/// Unitary on data qubits (first listed qubit is the matrix's high bit).
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub qubits: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl Gate {
    pub fn new(qubits: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = 1usize << qubits.len();
        if qubits.is_empty() || matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidTensor(format!(
                "gate on {} qubits needs a {d}×{d} matrix",
                qubits.len()
            )));
        }
        let mut q = qubits.clone();
        q.sort();
        q.dedup();
        if q.len() != qubits.len() {
            return Err(Error::InvalidTensor("gate repeats a qubit".into()));
        }
        let dev = (matrix.adjoint() * &matrix - DMatrix::identity(d, d)).norm();
        if dev > UNITARY_TOL * d as f64 {
            return Err(Error::InvalidTensor(format!("gate is not unitary (deviation {dev:e})")));
        }
        Ok(Self { qubits, matrix })
    }

    pub fn named(name: &str, qubit: usize) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let i = C64::new(0.0, 1.0);
        let e = |a: [C64; 4]| DMatrix::from_row_slice(2, 2, &a);
        let m = match name {
            "I" => e([ONE, ZERO, ZERO, ONE]),
            "X" => e([ZERO, ONE, ONE, ZERO]),
            "Y" => e([ZERO, -i, i, ZERO]),
            "Z" => e([ONE, ZERO, ZERO, -ONE]),
            "H" => e([ONE, ONE, ONE, -ONE]) * C64::new(h, 0.0),
            "S" => e([ONE, ZERO, ZERO, i]),
            "T" => e([ONE, ZERO, ZERO, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
            _ => return Err(Error::Parse(format!("unknown gate name {name:?}"))),
        };
        Self::new(vec![qubit], m)
    }
}

/// Haar-distributed 2×2 unitary.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> DMatrix<C64> {
    let g: Vec<C64> = (0..4)
        .map(|_| {
            // Box-Muller
            let (u1, u2): (f64, f64) = (rng.random::<f64>().max(f64::MIN_POSITIVE), rng.random());
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            C64::new(r * c, r * s)
        })
        .collect();
    let m = DMatrix::from_row_slice(2, 2, &g);
    let qr = m.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..2 {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..2 {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub layout: Layout,
    /// Declared data register width (register layout); 1 for the chain.
    pub register: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    /// Chain circuit V₁ = U₁, V_t = (I⊗U_t)·SWAP.
    pub fn chain(unitaries: Vec<DMatrix<C64>>) -> Result<Self> {
        let gates = unitaries
            .into_iter()
            .map(|u| Gate::new(vec![0], u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layout: Layout::Chain,
            register: 1,
            gates,
        })
    }

    pub fn register(data_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if data_qubits == 0 {
            return Err(Error::InvalidTensor("register needs at least one data qubit".into()));
        }
        if let Some(q) = gates.iter().flat_map(|g| g.qubits.iter()).find(|&&q| q >= data_qubits) {
            return Err(Error::InvalidTensor(format!("gate qubit {q} outside {data_qubits} data qubits")));
        }
        Ok(Self {
            layout: Layout::Register,
            register: data_qubits,
            gates,
        })
    }

    pub fn random_chain<R: Rng + ?Sized>(t: usize, rng: &mut R) -> Self {
        Self::chain((0..t).map(|_| random_unitary(rng)).collect()).expect("random unitaries are valid")
    }

    /// T, the gate count.
    pub fn t(&self) -> usize {
        self.gates.len()
    }

    pub fn data_qubits(&self) -> usize {
        match self.layout {
            Layout::Chain => self.t().max(1),
            Layout::Register => self.register,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.t() + self.data_qubits()
    }

    pub fn truncated(&self, t: usize) -> Self {
        Self {
            layout: self.layout,
            register: self.register,
            gates: self.gates[..t.min(self.t())].to_vec(),
        }
    }

    /// Step operator V_t (1-based) as (data-register qubits, matrix).
    pub fn step(&self, t: usize) -> (Vec<usize>, DMatrix<C64>) {
        let g = &self.gates[t - 1];
        match self.layout {
            Layout::Register => (g.qubits.clone(), g.matrix.clone()),
            Layout::Chain if t == 1 => (vec![0], g.matrix.clone()),
            Layout::Chain => (vec![t - 2, t - 1], swap_then(&g.matrix)),
        }
    }

    /// Global index of the qubit read out by the gradient demo.
    pub fn output_qubit(&self) -> usize {
        match self.layout {
            Layout::Chain => self.t() + self.data_qubits() - 1,
            Layout::Register => self.t(),
        }
    }
}

/// (I⊗U)·SWAP.
fn swap_then(u: &DMatrix<C64>) -> DMatrix<C64> {
    let swap = DMatrix::from_fn(4, 4, |i, j| {
        if i == ((j & 1) << 1 | j >> 1) {
            ONE
        } else {
            ZERO
        }
    });
    DMatrix::identity(2, 2).kronecker(u) * swap
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qubit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qubits: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CircuitFile {
    Gates(Vec<GateSpec>),
    Full {
        #[serde(default)]
        data_qubits: Option<usize>,
        #[serde(default)]
        layout: Option<Layout>,
        gates: Vec<GateSpec>,
    },
}

impl GateSpec {
    fn to_gate(&self) -> Result<Gate> {
        let qubits = match (&self.qubit, &self.qubits) {
            (Some(q), None) => vec![*q],
            (None, Some(qs)) => qs.clone(),
            (None, None) => vec![0],
            _ => return Err(Error::Parse("gate gives both qubit and qubits".into())),
        };
        match (&self.name, &self.matrix) {
            (Some(n), None) if qubits.len() == 1 => Gate::named(n, qubits[0]),
            (None, Some(m)) => {
                let d = 1usize << qubits.len();
                if m.len() != d * d {
                    return Err(Error::Parse(format!("matrix needs {} entries, got {}", d * d, m.len())));
                }
                let entries: Vec<C64> = m.iter().map(|p| C64::new(p[0], p[1])).collect();
                Gate::new(qubits, DMatrix::from_row_slice(d, d, &entries))
            }
            _ => Err(Error::Parse("gate needs exactly one of a single-qubit name or a matrix".into())),
        }
    }
}

impl Circuit {
    /// Accepts a bare gate list or `{data_qubits, layout, gates}`. Without an explicit
    /// layout, one-qubit circuits on qubit 0 are chains.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: CircuitFile = serde_json::from_str(s)?;
        let (data_qubits, layout, specs) = match file {
            CircuitFile::Gates(g) => (None, None, g),
            CircuitFile::Full {
                data_qubits,
                layout,
                gates,
            } => (data_qubits, layout, gates),
        };
        let gates = specs.iter().map(GateSpec::to_gate).collect::<Result<Vec<_>>>()?;
        let single = gates.iter().all(|g| g.qubits == [0]);
        let layout = layout.unwrap_or(if single && data_qubits.unwrap_or(1) <= 1 {
            Layout::Chain
        } else {
            Layout::Register
        });
        match layout {
            Layout::Chain => {
                if !single || data_qubits.unwrap_or(1) != 1 {
                    return Err(Error::Parse("chain circuits hold single-qubit gates on qubit 0".into()));
                }
                Self::chain(gates.into_iter().map(|g| g.matrix).collect())
            }
            Layout::Register => {
                let inferred = gates.iter().flat_map(|g| g.qubits.iter()).max().map_or(1, |q| q + 1);
                Self::register(data_qubits.unwrap_or(inferred), gates)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let gates = self
            .gates
            .iter()
            .map(|g| GateSpec {
                name: None,
                matrix: Some(g.matrix.transpose().iter().map(|z| [z.re, z.im]).collect()),
                qubit: None,
                qubits: Some(g.qubits.clone()),
            })
            .collect();
        let file = CircuitFile::Full {
            data_qubits: Some(self.register),
            layout: Some(self.layout),
            gates,
        };
        serde_json::to_string_pretty(&file).expect("circuit serializes")
    }
}

/// Clock ⊗ data statevector; clock width T.
#[derive(Clone, Debug, PartialEq)]
pub struct ClockState {
    pub t_gates: usize,
    pub data_qubits: usize,
    pub amplitudes: Vec<C64>,
}

impl ClockState {
    pub fn n_qubits(&self) -> usize {
        self.t_gates + self.data_qubits
    }

    /// Probability that qubit q reads 0.
    pub fn prob_zero(&self, q: usize) -> f64 {
        let n = self.n_qubits();
        let total = statevec::norm_sqr(&self.amplitudes);
        let p: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| statevec::bit(*i, q, n) == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        p / total
    }
}

/// Unary clock index of 1^k 0^(T−k).
fn clock_index(k: usize, t_width: usize) -> usize {
    ((1usize << k) - 1) << (t_width - k)
}

pub fn history_state(c: &Circuit) -> ClockState {
    truncated_history(c, c.t()).expect("t = T is in range")
}

/// (1/√(t+1)) Σ_{k≤t} |1^k 0^(T−k)⟩ ⊗ V_k…V₁|0…0⟩.
pub fn truncated_history(c: &Circuit, t: usize) -> Result<ClockState> {
    let big_t = c.t();
    if t > big_t {
        return Err(Error::InvalidTensor(format!("truncation {t} exceeds {big_t} gates")));
    }
    let dq = c.data_qubits();
    let mut data = statevec::basis_state(dq, 0);
    let mut amps = vec![ZERO; 1 << (big_t + dq)];
    let w = 1.0 / ((t + 1) as f64).sqrt();
    for k in 0..=t {
        if k > 0 {
            let (qs, m) = c.step(k);
            data = statevec::apply_op(&data, dq, &qs, &m);
        }
        let base = clock_index(k, big_t) << dq;
        for (j, a) in data.iter().enumerate() {
            amps[base | j] = a * w;
        }
    }
    Ok(ClockState {
        t_gates: big_t,
        data_qubits: dq,
        amplitudes: amps,
    })
}

fn tensor_from_fn(dims: Vec<usize>, f: impl Fn(&[usize]) -> C64) -> ComplexTensor {
    let len: usize = dims.iter().product();
    let mut idx = vec![0; dims.len()];
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(f(&idx));
        for a in (0..dims.len()).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    ComplexTensor::new(dims, data).expect("dims match data")
}

/// Tensor ids of the clock network: K_t is t−1, G_s is T+s−1.
pub fn clock_tensor_id(big_t: usize, kind: char, index: usize) -> usize {
    match kind {
        'K' => index - 1,
        _ => big_t + index - 1,
    }
}

/// Window {K_{t−1}, G_t, K_t, G_{t+1}, K_{t+1}} for 2 ≤ t ≤ T−1.
pub fn clock_window(big_t: usize, t: usize) -> Vec<usize> {
    let mut ids = vec![
        clock_tensor_id(big_t, 'K', t - 1),
        clock_tensor_id(big_t, 'G', t),
        clock_tensor_id(big_t, 'K', t),
        clock_tensor_id(big_t, 'G', t + 1),
        clock_tensor_id(big_t, 'K', t + 1),
    ];
    ids.sort();
    ids
}

/// Chain-layout network: clock tensors K_t carry c_t and the unary bonds ℓ, controlled
/// gate tensors G_s move the data wire w and emit d_{s−1}. Sites: c_t and d_t are site t.
pub fn clock_tensor_network(c: &Circuit) -> Result<TensorNetwork> {
    if c.layout != Layout::Chain {
        return Err(Error::Unsupported(
            "the clock tensor network is built for chain circuits only".into(),
        ));
    }
    let big_t = c.t();
    if big_t == 0 {
        let t = ComplexTensor::vector(vec![ONE, ZERO]);
        return TensorNetwork::new(vec![NetTensor::new(t, vec![Leg::Physical { qubit: 0, site: 1 }], "d1")]);
    }
    // bond ids: ℓ_t = t (t = 2..T), κ_t = T + t, w_t = 2T + t
    let ell = |t: usize| Leg::Bond(t);
    let kappa = |t: usize| Leg::Bond(big_t + t);
    let wire = |t: usize| Leg::Bond(2 * big_t + t);
    let scale = 1.0 / ((big_t + 1) as f64).sqrt();
    let mut tensors = vec![];
    for t in 1..=big_t {
        let mut legs = vec![Leg::Physical { qubit: t - 1, site: t }];
        if t >= 2 {
            legs.push(ell(t));
        }
        if t < big_t {
            legs.push(ell(t + 1));
            legs.push(kappa(t + 1));
        }
        if t == 1 {
            legs.push(kappa(1));
        }
        let has_in = t >= 2;
        let has_out = t < big_t;
        let w = if t == 1 { scale } else { 1.0 };
        let k = tensor_from_fn(vec![2; legs.len()], |ix| {
            let cv = ix[0];
            let mut a = 1;
            if has_in && ix[a] != cv {
                return ZERO;
            }
            a += has_in as usize;
            if has_out {
                let (lo, ko) = (ix[a], ix[a + 1]);
                if lo > cv || ko != lo {
                    return ZERO;
                }
                a += 2;
            }
            if t == 1 && ix[a] != cv {
                return ZERO;
            }
            C64::new(w, 0.0)
        });
        tensors.push(NetTensor::new(k, legs, format!("K{t}")));
    }
    let u1 = &c.gates[0].matrix;
    let g1 = tensor_from_fn(vec![2, 2], |ix| match ix[0] {
        0 if ix[1] == 0 => ONE,
        0 => ZERO,
        _ => u1[(ix[1], 0)],
    });
    tensors.push(NetTensor::new(g1, vec![kappa(1), wire(1)], "G1"));
    for s in 2..=big_t {
        let u = &c.gates[s - 1].matrix;
        let legs = vec![
            Leg::Physical {
                qubit: big_t + s - 2,
                site: s - 1,
            },
            kappa(s),
            wire(s - 1),
            wire(s),
        ];
        let g = tensor_from_fn(vec![2; 4], |ix| {
            let (d, k, win, wout) = (ix[0], ix[1], ix[2], ix[3]);
            match k {
                0 if d == win && wout == 0 => ONE,
                0 => ZERO,
                _ if d == 0 => u[(wout, win)],
                _ => ZERO,
            }
        });
        tensors.push(NetTensor::new(g, legs, format!("G{s}")));
    }
    let end = tensor_from_fn(vec![2, 2], |ix| if ix[0] == ix[1] { ONE } else { ZERO });
    tensors.push(NetTensor::new(
        end,
        vec![
            Leg::Physical {
                qubit: 2 * big_t - 1,
                site: big_t,
            },
            wire(big_t),
        ],
        format!("G{}", big_t + 1),
    ));
    TensorNetwork::new(tensors)
}

fn ket_bra(bits: &[u8]) -> DMatrix<C64> {
    let d = 1usize << bits.len();
    let i = bits.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
    let mut m = DMatrix::zeros(d, d);
    m[(i, i)] = ONE;
    m
}

fn outer(a: &[u8], b: &[u8]) -> DMatrix<C64> {
    let d = 1usize << a.len();
    let i = a.iter().fold(0usize, |acc, &x| acc << 1 | x as usize);
    let j = b.iter().fold(0usize, |acc, &x| acc << 1 | x as usize);
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = ONE;
    m
}

fn eye(k: usize) -> DMatrix<C64> {
    DMatrix::identity(1 << k, 1 << k)
}

/// The four bulk parts of Π_t on (c_{t−1}, c_t, c_{t+1}, d_{t−1}, d_t) for gate U.
pub fn pi_parts(u: &DMatrix<C64>) -> [DMatrix<C64>; 4] {
    let p1 = ket_bra(&[0, 1]).kronecker(&eye(3)) + eye(1).kronecker(&ket_bra(&[0, 1])).kronecker(&eye(2));
    let one = ket_bra(&[1]);
    let zero = ket_bra(&[0]);
    let p2 = ket_bra(&[0, 0, 0]).kronecker(&eye(1)).kronecker(&one)
        + ket_bra(&[1, 1, 1]).kronecker(&(eye(2) - ket_bra(&[0, 0])));
    let p3 = ket_bra(&[1, 0, 0]).kronecker(&eye(1)).kronecker(&one)
        + ket_bra(&[1, 1, 0]).kronecker(&one).kronecker(&eye(1));
    let p = eye(1).kronecker(&zero);
    let q = zero.kronecker(&eye(1));
    let vp = swap_then(u) * &p;
    let p4 = (ket_bra(&[1, 0, 0]).kronecker(&p) + ket_bra(&[1, 1, 0]).kronecker(&q)
        - outer(&[1, 1, 0], &[1, 0, 0]).kronecker(&vp)
        - outer(&[1, 0, 0], &[1, 1, 0]).kronecker(&vp.adjoint()))
        * C64::new(0.5, 0.0);
    [p1, p2, p3, p4]
}

pub fn pi_term(u: &DMatrix<C64>) -> DMatrix<C64> {
    pi_parts(u).into_iter().fold(DMatrix::zeros(32, 32), |a, b| a + b)
}

/// Rank of a Hermitian PSD matrix by eigenvalues above 1e-9.
pub fn psd_rank(m: &DMatrix<C64>) -> usize {
    m.clone().symmetric_eigenvalues().iter().filter(|&&e| e > 1e-9).count()
}

/// ⟨b|M|b⟩ for `fixed` (position, bit) pairs, then the projector onto its range.
fn compress_to_projector(m: &DMatrix<C64>, n: usize, fixed: &[(usize, u8)]) -> DMatrix<C64> {
    let keep: Vec<usize> = (0..1usize << n)
        .filter(|&i| fixed.iter().all(|&(p, b)| statevec::bit(i, p, n) == b as usize))
        .collect();
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])]);
    let eig = sub.symmetric_eigen();
    let d = keep.len();
    let mut proj = DMatrix::zeros(d, d);
    for (k, &e) in eig.eigenvalues.iter().enumerate() {
        if e > 1e-9 {
            let v = eig.eigenvectors.column(k);
            proj += &v * v.adjoint();
        }
    }
    proj
}

/// Π_t for t = 1..T with boundary compression (c₀ = 1, d₀ = 0 at t = 1; c_{T+1} = 0 at
/// t = T); T = 0 gives |1⟩⟨1| on d₁.
pub fn clock_parent_terms(c: &Circuit) -> Result<ParentHamiltonian> {
    if c.layout != Layout::Chain {
        return Err(Error::Unsupported("clock parent terms are built for chain circuits only".into()));
    }
    let big_t = c.t();
    if big_t == 0 {
        return ParentHamiltonian::new(1, vec![LocalTerm::pin(0, 1)]);
    }
    let mut terms = vec![];
    for t in 1..=big_t {
        let full = pi_term(&c.gates[t - 1].matrix);
        // positions: 0 c_{t−1}, 1 c_t, 2 c_{t+1}, 3 d_{t−1}, 4 d_t
        let mut fixed = vec![];
        if t == 1 {
            fixed.push((0, 1));
            fixed.push((3, 0));
        }
        if t == big_t {
            fixed.push((2, 0));
        }
        let qubit_of = [t as isize - 2, t as isize - 1, t as isize, (big_t + t) as isize - 2, (big_t + t) as isize - 1];
        let support: Vec<usize> = (0..5)
            .filter(|p| !fixed.iter().any(|f| f.0 == *p))
            .map(|p| qubit_of[p] as usize)
            .collect();
        let matrix = if fixed.is_empty() {
            full
        } else {
            compress_to_projector(&full, 5, &fixed)
        };
        // support order follows positions, which are ascending in qubit index except
        // clocks before data, matching the matrix layout
        terms.push(LocalTerm::new(support, matrix)?);
    }
    ParentHamiltonian::new(c.n_qubits(), terms)
}

/// Feynman–Kitaev terms for the register layout: clock validity, data initialization,
/// and one propagation projector per gate.
pub fn register_parent_terms(c: &Circuit) -> Result<ParentHamiltonian> {
    let big_t = c.t();
    let dq = c.data_qubits();
    let mut terms = vec![];
    for t in 1..big_t {
        terms.push(LocalTerm::new(vec![t - 1, t], ket_bra(&[0, 1]))?);
    }
    for q in 0..dq {
        if big_t == 0 {
            terms.push(LocalTerm::pin(q, 1));
        } else {
            terms.push(LocalTerm::new(vec![0, big_t + q], ket_bra(&[0, 1]))?);
        }
    }
    for t in 1..=big_t {
        let (qs, v) = c.step(t);
        let mut clocks = vec![];
        let mut before = vec![];
        let mut after = vec![];
        if t >= 2 {
            clocks.push(t - 2);
            before.push(1);
            after.push(1);
        }
        clocks.push(t - 1);
        before.push(0);
        after.push(1);
        if t < big_t {
            clocks.push(t);
            before.push(0);
            after.push(0);
        }
        let k = qs.len();
        let m = (ket_bra(&before).kronecker(&eye(k)) + ket_bra(&after).kronecker(&eye(k))
            - outer(&after, &before).kronecker(&v)
            - outer(&before, &after).kronecker(&v.adjoint()))
            * C64::new(0.5, 0.0);
        let support = clocks.into_iter().chain(qs.iter().map(|q| big_t + q)).collect();
        terms.push(LocalTerm::new(support, m)?);
    }
    ParentHamiltonian::new(c.n_qubits(), terms)
}

/// Clock parent Hamiltonian for either layout.
pub fn clock_hamiltonian(c: &Circuit) -> Result<ParentHamiltonian> {
    match c.layout {
        Layout::Chain => clock_parent_terms(c),
        Layout::Register => register_parent_terms(c),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClockGap {
    pub ground_energy: f64,
    pub gap: f64,
    pub degeneracy: usize,
    /// Fidelity of the computed ground vector with the history state.
    pub fidelity: f64,
}

pub fn clock_gap(c: &Circuit) -> Result<ClockGap> {
    let h = clock_hamiltonian(c)?;
    let s = spectrum(&h)?;
    Ok(ClockGap {
        ground_energy: s.ground_energy,
        gap: s.gap,
        degeneracy: s.degeneracy,
        fidelity: statevec::fidelity(&s.ground_vector, &history_state(c).amplitudes),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaRow {
    /// Branch count of the later state.
    pub t: usize,
    pub eta: f64,
    pub expected: f64,
    pub diff: f64,
    /// The t = 1 row has no earlier state; η is reported as 0.
    pub boundary: bool,
}

/// Rows t = 1..T: η_t = |⟨Q̂_{t−1}|Q̂_{t−2}⟩|² where Q_k is the truncated history with k+1 branches.
pub fn verify_eta(c: &Circuit) -> Result<Vec<EtaRow>> {
    let states: Vec<ClockState> = (0..c.t()).map(|k| truncated_history(c, k)).collect::<Result<_>>()?;
    Ok((1..=c.t())
        .map(|t| {
            let expected = 1.0 - 1.0 / t as f64;
            let (eta, boundary) = if t == 1 {
                (0.0, true)
            } else {
                (statevec::fidelity(&states[t - 1].amplitudes, &states[t - 2].amplitudes), false)
            };
            EtaRow {
                t,
                eta,
                expected,
                diff: (eta - expected).abs(),
                boundary,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientDemo {
    /// p₀ − 1/2, half the raw KL-gradient component.
    pub value: f64,
    /// Data term minus model term: 2p₀ − 1.
    pub raw: f64,
    pub data_term: f64,
    pub model_term: f64,
    pub p0: f64,
    pub output_qubit: usize,
}

/// Designated parameter: real part of entry 00 of the output vertex's matrix, evaluated at
/// M = I. The data term uses the history state as the record's conditioned state; the
/// model term uses a 2×5 brickwork with vertex 0's matrix set to I.
pub fn gradient_encoding_demo(c: &Circuit) -> Result<GradientDemo> {
    let hs = history_state(c);
    let q = c.output_qubit();
    let p = ParamId { vertex: 0, component: 0 };
    let mut brick = build_brickwork(2, 5, &[0.0; 10])?;
    brick.matrices[0] = LocalMatrix::identity();
    let op = o1(&brick, p)?;
    let op = DMatrix::from_iterator(2, 2, op.iter().copied());
    let data_term = statevec::expectation_local(&hs.amplitudes, hs.n_qubits(), &[q], &op)?.re;
    let model_term = grad_unconditioned(&brick, p)?;
    let raw = data_term - model_term;
    Ok(GradientDemo {
        value: raw / 2.0,
        raw,
        data_term,
        model_term,
        p0: hs.prob_zero(q),
        output_qubit: q,
    })
}

/// Finite-difference estimate of the raw demo gradient: perturbs entry 00 of the output
/// qubit's matrix in the data term and of vertex 0 in the brickwork term.
pub fn gradient_demo_fd(c: &Circuit, h: f64) -> Result<f64> {
    let hs = history_state(c);
    let q = c.output_qubit();
    let f = |eps: f64| -> Result<f64> {
        let m = LocalMatrix::new(C64::new(1.0 + eps, 0.0), ZERO, ZERO, ONE);
        let data = statevec::apply_op(&hs.amplitudes, hs.n_qubits(), &[q], &m.to_dmatrix());
        let mut brick = build_brickwork(2, 5, &[0.0; 10])?;
        brick.matrices[0] = m;
        let qs = brick.q_state()?;
        Ok(statevec::norm_sqr(&data).ln() - qs.norm_sqr().ln())
    };
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

/// The history-state preparation sequence: Q_t = truncated_history(t), with stage
/// Hamiltonian = clock Hamiltonian of the first t gates plus |1⟩⟨1| pins elsewhere.
pub fn history_problem(c: &Circuit) -> Result<PreparationProblem> {
    let big_t = c.t();
    let n = c.n_qubits();
    let states = (0..=big_t)
        .map(|t| truncated_history(c, t).map(|s| s.amplitudes))
        .collect::<Result<Vec<_>>>()?;
    let seq = StateSequence::from_states(n, states)?;
    let mut hams = vec![];
    for t in 0..=big_t {
        let sub = c.truncated(t);
        let local = clock_hamiltonian(&sub)?;
        let map = |q: usize| if q < t { q } else { big_t + q - t };
        let mut terms: Vec<LocalTerm> = local.terms.iter().map(|term| term.relabel(map)).collect();
        let used: Vec<usize> = (0..local.n_qubits).map(map).collect();
        terms.extend((0..n).filter(|q| !used.contains(q)).map(|q| LocalTerm::pin(q, 1)));
        hams.push(ParentHamiltonian::new(n, terms)?);
    }
    Ok(PreparationProblem {
        merged: vec![false; hams.len()],
        seq,
        hams,
    })
}
