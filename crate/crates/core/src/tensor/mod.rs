//! Dense complex tensors and the handful of factorizations built on them.

mod network;
pub mod statevec;

pub use network::{Leg, NetTensor, TensorNetwork};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Row-major dense tensor of complex doubles.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl ComplexTensor {
    pub fn new(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidTensor(format!("zero extent in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::InvalidTensor(format!(
                "dims {dims:?} need {n} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidTensor("non-finite entry".into()));
        }
        Ok(Self { dims, data })
    }

    /// Skips the finiteness scan; callers guarantee the invariants.
    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self::from_parts(dims, vec![C64::new(0.0, 0.0); n])
    }

    pub fn scalar(z: C64) -> Self {
        Self::from_parts(vec![], vec![z])
    }

    pub fn vector(data: Vec<C64>) -> Self {
        Self::from_parts(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = C64::new(1.0, 0.0);
        }
        t
    }

    pub fn from_dmatrix(m: &DMatrix<C64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self::from_parts(vec![r, c], data)
    }

    /// Interprets the tensor as a matrix whose rows run over the first `split` axes.
    pub fn to_dmatrix(&self, split: usize) -> DMatrix<C64> {
        let rows: usize = self.dims[..split].iter().product();
        let cols: usize = self.dims[split..].iter().product();
        DMatrix::from_row_slice(rows, cols, &self.data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.dims)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        let s = self.strides();
        self.data[idx.iter().zip(&s).map(|(i, s)| i * s).sum::<usize>()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&self, a: C64) -> Self {
        Self::from_parts(self.dims.clone(), self.data.iter().map(|z| z * a).collect())
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    /// New axis `k` is old axis `axes[k]`.
    pub fn permute(&self, axes: &[usize]) -> Self {
        let r = self.rank();
        assert_eq!(axes.len(), r, "permutation length");
        if axes.iter().enumerate().all(|(i, &a)| i == a) {
            return self.clone();
        }
        let old_strides = self.strides();
        let new_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| old_strides[a]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; r];
        let mut off = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[off]);
            for k in (0..r).rev() {
                idx[k] += 1;
                off += src_strides[k];
                if idx[k] < new_dims[k] {
                    break;
                }
                off -= src_strides[k] * new_dims[k];
                idx[k] = 0;
            }
        }
        Self::from_parts(new_dims, out)
    }

    /// Fixes `axis` to `value`, dropping the axis.
    pub fn slice_axis(&self, axis: usize, value: usize) -> Self {
        let outer: usize = self.dims[..axis].iter().product();
        let d = self.dims[axis];
        let inner: usize = self.dims[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * d + value) * inner;
            out.extend_from_slice(&self.data[base..base + inner]);
        }
        let mut dims = self.dims.clone();
        dims.remove(axis);
        Self::from_parts(dims, out)
    }
}

pub(crate) fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Pairs of (axis of A, axis of B) to be summed over.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexPairing {
    pub pairs: Vec<(usize, usize)>,
}

impl IndexPairing {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    fn validate(&self, a: &ComplexTensor, b: &ComplexTensor) -> Result<()> {
        let mut seen_a = vec![false; a.rank()];
        let mut seen_b = vec![false; b.rank()];
        for &(i, j) in &self.pairs {
            if i >= a.rank() || j >= b.rank() {
                return Err(Error::InvalidPairing(format!(
                    "pair ({i},{j}) out of range for ranks {} and {}",
                    a.rank(),
                    b.rank()
                )));
            }
            if seen_a[i] || seen_b[j] {
                return Err(Error::InvalidPairing(format!("axis repeated in pair ({i},{j})")));
            }
            seen_a[i] = true;
            seen_b[j] = true;
            if a.dims[i] != b.dims[j] {
                return Err(Error::DimensionMismatch {
                    axis_a: i,
                    axis_b: j,
                    dim_a: a.dims[i],
                    dim_b: b.dims[j],
                });
            }
        }
        Ok(())
    }
}

/// Sums over paired axes. Output axes: unpaired axes of `a`, then unpaired axes of `b`.
pub fn contract(a: &ComplexTensor, b: &ComplexTensor, pairing: &IndexPairing) -> Result<ComplexTensor> {
    pairing.validate(a, b)?;
    let paired_a: Vec<usize> = pairing.pairs.iter().map(|p| p.0).collect();
    let paired_b: Vec<usize> = pairing.pairs.iter().map(|p| p.1).collect();
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !paired_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !paired_b.contains(i)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(&paired_a).copied().collect();
    let perm_b: Vec<usize> = paired_b.iter().chain(&free_b).copied().collect();
    let ap = a.permute(&perm_a);
    let bp = b.permute(&perm_b);

    let rows: usize = free_a.iter().map(|&i| a.dims[i]).product();
    let inner: usize = paired_a.iter().map(|&i| a.dims[i]).product();
    let cols: usize = free_b.iter().map(|&i| b.dims[i]).product();

    let mut out = vec![C64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        let arow = &ap.data[r * inner..(r + 1) * inner];
        let orow = &mut out[r * cols..(r + 1) * cols];
        for (k, &x) in arow.iter().enumerate() {
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            let brow = &bp.data[k * cols..(k + 1) * cols];
            for (o, &y) in orow.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    let dims: Vec<usize> = free_a
        .iter()
        .map(|&i| a.dims[i])
        .chain(free_b.iter().map(|&i| b.dims[i]))
        .collect();
    Ok(ComplexTensor::from_parts(dims, out))
}

/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Orthonormal basis (columns) of range(L), with L's rows running over `physical_axes`.
pub fn range_basis(l: &ComplexTensor, physical_axes: &[usize]) -> DMatrix<C64> {
    let rest: Vec<usize> = (0..l.rank()).filter(|a| !physical_axes.contains(a)).collect();
    let perm: Vec<usize> = physical_axes.iter().chain(&rest).copied().collect();
    let lm = l.permute(&perm).to_dmatrix(physical_axes.len());
    orthonormal_range(&lm)
}

pub(crate) fn orthonormal_range(lm: &DMatrix<C64>) -> DMatrix<C64> {
    let rows = lm.nrows();
    if lm.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = lm.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > RANK_TOLERANCE * smax)
        .collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &u.column(i));
    }
    basis
}

/// Projector onto the orthogonal complement of range(L) inside the physical space.
/// Returned as a square matrix tensor of side prod(physical extents).
pub fn complement_projector(l: &ComplexTensor, physical_axes: &[usize]) -> ComplexTensor {
    let basis = range_basis(l, physical_axes);
    let d = basis.nrows();
    let p = DMatrix::<C64>::identity(d, d) - &basis * basis.adjoint();
    ComplexTensor::from_dmatrix(&p)
}

/// Rank of a projector, read off its trace.
pub fn projector_rank(p: &ComplexTensor) -> usize {
    let n = p.dims[0];
    let tr: f64 = (0..n).map(|i| p.data[i * n + i].re).sum();
    tr.round() as usize
}

/// ⟨s|op|s⟩ / ⟨s|s⟩.
pub fn expectation(state: &ComplexTensor, op: &ComplexTensor) -> Result<C64> {
    let d = state.len();
    if op.len() != d * d {
        return Err(Error::InvalidTensor(format!(
            "operator with {} entries does not act on a {d}-dim state",
            op.len()
        )));
    }
    let norm = state.norm_sqr();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let s = state.data();
    let o = op.data();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        let row = &o[i * d..(i + 1) * d];
        let mut t = C64::new(0.0, 0.0);
        for (x, y) in row.iter().zip(s) {
            t += x * y;
        }
        acc += s[i].conj() * t;
    }
    Ok(acc / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hadamard() -> ComplexTensor {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexTensor::matrix(2, 2, vec![c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)]).unwrap()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_tensor(dims: Vec<usize>, seed: &mut u64) -> ComplexTensor {
        let n = dims.iter().product();
        let data = (0..n).map(|_| c(lcg(seed), lcg(seed))).collect();
        ComplexTensor::new(dims, data).unwrap()
    }

    #[test]
    fn identity_contraction() {
        let v = ComplexTensor::vector(vec![c(0.3, 1.0), c(-2.0, 0.5)]);
        let r = contract(&ComplexTensor::identity(2), &v, &IndexPairing::new(vec![(1, 0)])).unwrap();
        assert_eq!(r, v);
    }

    #[test]
    fn hadamard_squared() {
        let h = hadamard();
        let r = contract(&h, &h, &IndexPairing::new(vec![(1, 0)])).unwrap();
        for (x, y) in r.data().iter().zip(ComplexTensor::identity(2).data()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn mismatch_names_axes() {
        let a = ComplexTensor::zeros(vec![2, 3]);
        let b = ComplexTensor::zeros(vec![2, 2]);
        match contract(&a, &b, &IndexPairing::new(vec![(1, 0)])) {
            Err(Error::DimensionMismatch { axis_a: 1, axis_b: 0, dim_a: 3, dim_b: 2 }) => {}
            other => panic!("{other:?}"),
        }
        assert!(contract(&a, &b, &IndexPairing::new(vec![(0, 0), (0, 1)])).is_err());
    }

    #[test]
    fn contraction_matches_nested_loops() {
        // two rank-5 tensors sharing three axes, out of order
        let mut seed = 7;
        let a = random_tensor(vec![2, 3, 2, 2, 3], &mut seed);
        let b = random_tensor(vec![3, 2, 2, 2, 3], &mut seed);
        let pairing = IndexPairing::new(vec![(1, 4), (3, 1), (4, 0)]);
        let r = contract(&a, &b, &pairing).unwrap();
        assert_eq!(r.dims(), &[2, 2, 2, 2]);
        for i0 in 0..2 {
            for i2 in 0..2 {
                for j2 in 0..2 {
                    for j3 in 0..2 {
                        let mut acc = c(0., 0.);
                        for p in 0..3 {
                            for q in 0..2 {
                                for s in 0..3 {
                                    acc += a.get(&[i0, p, i2, q, s]) * b.get(&[s, q, j2, j3, p]);
                                }
                            }
                        }
                        assert!((acc - r.get(&[i0, i2, j2, j3])).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn gram_matrix_of_group_tensor() {
        // 5-leg tensor: 3 physical legs of dim 2, 2 virtual legs; Gram over physical legs
        let mut seed = 11;
        let t = random_tensor(vec![2, 2, 2, 2, 2], &mut seed);
        let tc = ComplexTensor::from_parts(t.dims().to_vec(), t.data().iter().map(|z| z.conj()).collect());
        let g = contract(&tc, &t, &IndexPairing::new(vec![(0, 0), (1, 1), (2, 2)])).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let mut acc = c(0., 0.);
                        for p in 0..8 {
                            let (p0, p1, p2) = (p >> 2, (p >> 1) & 1, p & 1);
                            acc += t.get(&[p0, p1, p2, a, b]).conj() * t.get(&[p0, p1, p2, x, y]);
                        }
                        assert!((acc - g.get(&[a, b, x, y])).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn complement_examples() {
        let p = complement_projector(&ComplexTensor::identity(2), &[0]);
        assert!(p.data().iter().all(|z| z.norm() < 1e-15));
        let col = ComplexTensor::matrix(2, 1, vec![c(1., 0.), c(0., 0.)]).unwrap();
        let p = complement_projector(&col, &[0]);
        let want = [c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)];
        for (x, y) in p.data().iter().zip(want) {
            assert!((x - y).norm() < 1e-15);
        }
        assert_eq!(projector_rank(&p), 1);
    }

    #[test]
    fn expectation_examples() {
        let z = ComplexTensor::matrix(2, 2, vec![c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]).unwrap();
        let s = ComplexTensor::vector(vec![c(1., 0.), c(0., 0.)]);
        assert!((expectation(&s, &z).unwrap() - c(1., 0.)).norm() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = ComplexTensor::vector(vec![c(h, 0.), c(h, 0.)]);
        let p0 = ComplexTensor::matrix(2, 2, vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]).unwrap();
        assert!((expectation(&s, &p0).unwrap() - c(0.5, 0.)).norm() < 1e-15);
        let zero = ComplexTensor::vector(vec![c(0., 0.); 2]);
        assert!(matches!(expectation(&zero, &p0), Err(Error::ZeroNorm)));
    }

    #[test]
    fn expectation_matches_nested_loops() {
        let mut seed = 3;
        let s = random_tensor(vec![8], &mut seed);
        let a = random_tensor(vec![8, 8], &mut seed);
        let herm: Vec<C64> = (0..64)
            .map(|k| {
                let (i, j) = (k / 8, k % 8);
                a.get(&[i, j]) + a.get(&[j, i]).conj()
            })
            .collect();
        let op = ComplexTensor::matrix(8, 8, herm).unwrap();
        let mut num = c(0., 0.);
        for i in 0..8 {
            for j in 0..8 {
                num += s.get(&[i]).conj() * op.get(&[i, j]) * s.get(&[j]);
            }
        }
        let want = num / s.norm_sqr();
        let got = expectation(&s, &op).unwrap();
        assert!((got - want).norm() < 1e-12);
        assert!(got.im.abs() < 1e-12);
    }

    #[test]
    fn permute_round_trip() {
        let mut seed = 5;
        let t = random_tensor(vec![2, 3, 4], &mut seed);
        let p = t.permute(&[2, 0, 1]);
        assert_eq!(p.dims(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), t.get(&[1, 2, 3]));
        let back = p.permute(&[1, 2, 0]);
        assert_eq!(back, t);
    }

    #[test]
    fn slice_axis_fixes_index() {
        let mut seed = 9;
        let t = random_tensor(vec![2, 3, 2], &mut seed);
        let s = t.slice_axis(1, 2);
        assert_eq!(s.dims(), &[2, 2]);
        assert_eq!(s.get(&[1, 0]), t.get(&[1, 2, 0]));
    }
}
