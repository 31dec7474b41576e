//! Statevector helpers. Qubit 0 is the most significant bit of a basis index.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[inline]
pub fn bit(index: usize, q: usize, n: usize) -> usize {
    (index >> (n - 1 - q)) & 1
}

#[inline]
fn mask(q: usize, n: usize) -> usize {
    1 << (n - 1 - q)
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// |⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩).
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).norm_sqr() / (norm_sqr(a) * norm_sqr(b))
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n = norm_sqr(v).sqrt();
    v.iter().map(|z| z / n).collect()
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Applies a 2^k × 2^k operator to `qubits` (first listed qubit is the operator's high bit).
pub fn apply_op(state: &[C64], n: usize, qubits: &[usize], op: &DMatrix<C64>) -> Vec<C64> {
    let k = qubits.len();
    let d = 1usize << k;
    debug_assert_eq!(op.nrows(), d);
    let masks: Vec<usize> = qubits.iter().map(|&q| mask(q, n)).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..d)
        .map(|j| (0..k).filter(|&b| (j >> (k - 1 - b)) & 1 == 1).map(|b| masks[b]).sum())
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); state.len()];
    let mut local = vec![C64::new(0.0, 0.0); d];
    for base in 0..state.len() {
        if base & all != 0 {
            continue;
        }
        for j in 0..d {
            local[j] = state[base | offsets[j]];
        }
        for i in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..d {
                acc += op[(i, j)] * local[j];
            }
            out[base | offsets[i]] = acc;
        }
    }
    out
}

/// ⟨s|op_on_qubits|s⟩ / ⟨s|s⟩.
pub fn expectation_local(state: &[C64], n: usize, qubits: &[usize], op: &DMatrix<C64>) -> Result<C64> {
    let norm = norm_sqr(state);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(inner(state, &apply_op(state, n, qubits, op)) / norm)
}

/// Fixes qubits to bits and keeps the rest in ascending order.
pub fn slice_qubits(state: &[C64], n: usize, fixed: &[(usize, u8)]) -> Vec<C64> {
    let free: Vec<usize> = (0..n).filter(|q| !fixed.iter().any(|f| f.0 == *q)).collect();
    let base: usize = fixed.iter().filter(|f| f.1 == 1).map(|f| mask(f.0, n)).sum();
    let k = free.len();
    (0..1usize << k)
        .map(|j| {
            let mut idx = base;
            for (b, &q) in free.iter().enumerate() {
                if (j >> (k - 1 - b)) & 1 == 1 {
                    idx |= mask(q, n);
                }
            }
            state[idx]
        })
        .collect()
}

/// Embeds `v`, defined on `qubits` (ascending), into an n-qubit register with every other qubit |0⟩.
pub fn embed_zero_fill(v: &[C64], n: usize, qubits: &[usize]) -> Vec<C64> {
    let k = qubits.len();
    let mut out = vec![C64::new(0.0, 0.0); 1 << n];
    for (j, &a) in v.iter().enumerate() {
        let mut idx = 0;
        for (b, &q) in qubits.iter().enumerate() {
            if (j >> (k - 1 - b)) & 1 == 1 {
                idx |= mask(q, n);
            }
        }
        out[idx] = a;
    }
    out
}

pub fn basis_state(n: usize, index: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); 1 << n];
    v[index] = C64::new(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn apply_x_on_each_qubit() {
        let x = DMatrix::from_row_slice(2, 2, &[c(0.), c(1.), c(1.), c(0.)]);
        let s = basis_state(3, 0);
        assert_eq!(apply_op(&s, 3, &[0], &x), basis_state(3, 4));
        assert_eq!(apply_op(&s, 3, &[2], &x), basis_state(3, 1));
    }

    #[test]
    fn two_qubit_op_ordering() {
        // CNOT with control qubit 2, target qubit 0
        let mut cnot = DMatrix::zeros(4, 4);
        cnot[(0, 0)] = c(1.);
        cnot[(1, 1)] = c(1.);
        cnot[(2, 3)] = c(1.);
        cnot[(3, 2)] = c(1.);
        let s = basis_state(3, 0b001);
        assert_eq!(apply_op(&s, 3, &[2, 0], &cnot), basis_state(3, 0b101));
    }

    #[test]
    fn slice_and_embed() {
        let v: Vec<C64> = (0..8).map(|i| c(i as f64)).collect();
        assert_eq!(slice_qubits(&v, 3, &[(1, 1)]), vec![c(2.), c(3.), c(6.), c(7.)]);
        let e = embed_zero_fill(&[c(1.), c(2.)], 3, &[1]);
        assert_eq!(e[0b000], c(1.));
        assert_eq!(e[0b010], c(2.));
    }
}
