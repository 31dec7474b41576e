//! Factor graphs → QGMs through the pairwise-correlator gadget, plus k-ary
//! decomposition and the brickwork model.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::factor_graph::{ExpForm, Factor, FactorGraph, PairwiseExpFactor};
use crate::model::{Graph, LocalMatrix, QgmModel};

/// Guard on |a|, |b|, |c| for compile_pairwise.
pub const PARAM_LIMIT: f64 = 20.0;

/// Diagonal weights on the two visible ends and the |±⟩ eigenvalues of M†M on the hidden middle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gadget {
    pub d1: [f64; 2],
    pub d2: [f64; 2],
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Gadget {
    /// d₁(x₁)d₂(x₂)[λ₁δ + λ₂(1−δ)]/2.
    pub fn correlator(&self, x1: u8, x2: u8) -> f64 {
        let l = if x1 == x2 { self.lambda1 } else { self.lambda2 };
        self.d1[x1 as usize] * self.d2[x2 as usize] * l / 2.0
    }
}

pub fn compile_pairwise(a: f64, b: f64, c: f64) -> Result<Gadget> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !v.is_finite() || v.abs() > PARAM_LIMIT {
            return Err(Error::ParameterOutOfRange {
                name,
                value: v,
                limit: PARAM_LIMIT,
            });
        }
    }
    Ok(Gadget {
        d1: [1.0, (b + a / 2.0).exp()],
        d2: [1.0, (c + a / 2.0).exp()],
        lambda1: 2.0,
        lambda2: 2.0 * (-a / 2.0).exp(),
    })
}

/// Positive square root of λ₁|+⟩⟨+| + λ₂|−⟩⟨−|.
fn hidden_matrix(lambda1: f64, lambda2: f64) -> LocalMatrix {
    let (s1, s2) = (lambda1.sqrt(), lambda2.sqrt());
    let p = C64::new((s1 + s2) / 2.0, 0.0);
    let q = C64::new((s1 - s2) / 2.0, 0.0);
    LocalMatrix::new(p, q, q, p)
}

/// (M₁, M₂, M_hidden).
pub fn realize_gadget(g: &Gadget) -> (LocalMatrix, LocalMatrix, LocalMatrix) {
    (
        LocalMatrix::diag(g.d1[0].sqrt(), g.d1[1].sqrt()),
        LocalMatrix::diag(g.d2[0].sqrt(), g.d2[1].sqrt()),
        hidden_matrix(g.lambda1, g.lambda2),
    )
}

/// Three-vertex path 0 – 1 – 2 with the hidden gadget vertex in the middle.
pub fn gadget_model(g: &Gadget) -> Result<QgmModel> {
    let (m1, m2, h) = realize_gadget(g);
    let graph = Graph::new(3, &[(0, 1), (1, 2)], &[0, 2])?;
    QgmModel::new(graph, vec![m1, h, m2])
}

/// Variable v becomes vertex v; every pairwise factor adds one hidden gadget vertex
/// between its endpoints. Unary factors and gadget end weights fold into diagonal
/// matrices, rescaled to unit determinant.
pub fn compile_factor_graph(fg: &FactorGraph) -> Result<QgmModel> {
    let n = fg.n_vars();
    let mut log_d = vec![[0.0f64; 2]; n];
    let mut edges = vec![];
    let mut hidden_mats = vec![];
    for (i, f) in fg.factors().iter().enumerate() {
        match f.exp_form() {
            None => return Err(Error::NonPairwiseFactor { index: i }),
            Some(ExpForm::Constant) => {}
            Some(ExpForm::Unary { b }) => log_d[f.vars[0]][1] += b,
            Some(ExpForm::Pairwise(p)) => {
                let g = compile_pairwise(p.a, p.b, p.c)?;
                let (u, v) = (f.vars[0], f.vars[1]);
                log_d[u][1] += g.d1[1].ln();
                log_d[v][1] += g.d2[1].ln();
                let j = n + hidden_mats.len();
                edges.push((u, j));
                edges.push((j, v));
                hidden_mats.push(hidden_matrix(g.lambda1, g.lambda2));
            }
        }
    }
    let m = n + hidden_mats.len();
    let mut graph = Graph::new(m, &edges, &fg.visible_vars())?;
    let bound = fg.degree_bound().unwrap_or_else(|| graph.max_degree()).max(2);
    graph = graph.with_degree_bound(bound)?;
    let mut matrices: Vec<LocalMatrix> = log_d
        .iter()
        .map(|l| {
            let r = (l[1] - l[0]) / 4.0;
            LocalMatrix::diag((-r).exp(), r.exp())
        })
        .collect();
    matrices.extend(hidden_mats);
    QgmModel::new(graph, matrices)
}

/// Replaces one strictly positive k-ary table (k ≤ 4) by pairwise-exponential factors.
/// Variables 0..k are the originals. For k ≥ 3, variable k+s is a hidden selector for
/// assignment s, contributing h·(β_s − A·mismatch(x, s)) with β_s = ln(f(s)/c − 1),
/// c = min f / 2 and A = `sharpness`; k ≤ 2 is solved exactly.
pub fn decompose_kary(table: &[f64], sharpness: f64) -> Result<FactorGraph> {
    let k = table.len().trailing_zeros() as usize;
    if table.len() != 1 << k || k == 0 || k > 4 {
        return Err(Error::Unsupported(format!("table of length {} (need 2^k, 1 ≤ k ≤ 4)", table.len())));
    }
    if let Some(index) = table.iter().position(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::NonPositiveTable { index });
    }
    let exact = Factor::new((0..k).collect(), table.to_vec());
    match (k, exact.exp_form()) {
        (1, Some(ExpForm::Unary { b })) => return FactorGraph::new(1, vec![Factor::unary(0, b)]),
        (2, Some(ExpForm::Pairwise(p))) => return FactorGraph::new(2, vec![Factor::pairwise(0, 1, p)]),
        _ => {}
    }
    let c = table.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    let mut factors = vec![];
    for (s, &fs) in table.iter().enumerate() {
        let beta = (fs / c - 1.0).ln();
        let h = k + s;
        for i in 0..k {
            let bit = (s >> (k - 1 - i)) & 1;
            let p = if bit == 1 {
                PairwiseExpFactor { a: sharpness, b: 0.0, c: -sharpness + beta / k as f64 }
            } else {
                PairwiseExpFactor { a: -sharpness, b: 0.0, c: beta / k as f64 }
            };
            factors.push(Factor::pairwise(i, h, p));
        }
    }
    let hidden: Vec<usize> = (k..k + (1 << k)).collect();
    FactorGraph::new(k + (1 << k), factors)?.with_hidden(&hidden)
}

/// Rewrites every factor without an exponential form through `decompose_kary`, adding
/// its selectors as hidden variables after the existing ones.
pub fn to_pairwise(fg: &FactorGraph, sharpness: f64) -> Result<FactorGraph> {
    let mut n = fg.n_vars();
    let mut factors = vec![];
    let mut hidden = fg.hidden_vars();
    for f in fg.factors() {
        if f.exp_form().is_some() {
            factors.push(f.clone());
            continue;
        }
        let sub = decompose_kary(&f.table, sharpness)?;
        let k = f.arity();
        let base = n;
        for g in sub.factors() {
            factors.push(g.relabel(|v| if v < k { f.vars[v] } else { base + v - k }));
        }
        hidden.extend(base..base + sub.n_vars() - k);
        n += sub.n_vars() - k;
    }
    FactorGraph::new(n, factors)?.with_hidden(&hidden)
}

/// Angles used for the brickwork pattern.
pub const BRICKWORK_ANGLES: [f64; 2] = [0.0, std::f64::consts::FRAC_PI_4];

/// Brickwork graph: rows are horizontal paths; vertical links join rows i, i+1 at columns
/// j and j+2 for j ≡ 3 (mod 8) with odd i, and j ≡ 7 (mod 8) with even i (all 1-indexed).
/// Vertex (r, c) has id r·cols + c.
pub fn brickwork_graph(rows: usize, cols: usize) -> Result<Graph> {
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = vec![];
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            edges.push((id(r, c), id(r, c + 1)));
        }
    }
    for i in 1..rows {
        for j in 1..=cols {
            let start = (j % 8 == 3 && i % 2 == 1) || (j % 8 == 7 && i % 2 == 0);
            if !start {
                continue;
            }
            for jj in [j, j + 2] {
                if jj <= cols {
                    edges.push((id(i - 1, jj - 1), id(i, jj - 1)));
                }
            }
        }
    }
    Graph::new(rows * cols, &edges, &(0..rows * cols).collect::<Vec<_>>())
}

/// H·Z(θ) with Z(θ) = diag(1, e^{iθ}).
pub fn hz(theta: f64) -> LocalMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let e = C64::from_polar(s, theta);
    LocalMatrix::new(C64::new(s, 0.0), e, C64::new(s, 0.0), -e)
}

pub fn build_brickwork(rows: usize, cols: usize, thetas: &[f64]) -> Result<QgmModel> {
    if thetas.len() != rows * cols {
        return Err(Error::InvalidGraph(format!("{} angles for {} qubits", thetas.len(), rows * cols)));
    }
    let graph = brickwork_graph(rows, cols)?.with_degree_bound(3)?;
    QgmModel::new(graph, thetas.iter().map(|&t| hz(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::{marginalize, total_variation};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn trivial_gadget() {
        let g = compile_pairwise(0.0, 0.0, 0.0).unwrap();
        assert_eq!(g, Gadget { d1: [1.0, 1.0], d2: [1.0, 1.0], lambda1: 2.0, lambda2: 2.0 });
        for x in 0..4u8 {
            assert_eq!(g.correlator(x >> 1, x & 1), 1.0);
        }
        let (m1, m2, h) = realize_gadget(&g);
        assert_eq!(m1, LocalMatrix::identity());
        assert_eq!(m2, LocalMatrix::identity());
        let r2 = 2f64.sqrt();
        assert!((h.entries() - LocalMatrix::diag(r2, r2).entries()).norm() < 1e-15);
    }

    #[test]
    fn gadget_2_0_0() {
        let g = compile_pairwise(2.0, 0.0, 0.0).unwrap();
        let e = std::f64::consts::E;
        assert!(rel(g.d1[1], e) < 1e-15 && rel(g.d2[1], e) < 1e-15);
        assert!(rel(g.lambda2, 2.0 / e) < 1e-15);
        assert!(rel(g.correlator(1, 1), e * e) < 1e-15);
        let (_, _, h) = realize_gadget(&g);
        let mm = h.entries().adjoint() * h.entries();
        let eig = nalgebra::Matrix2::from_fn(|i, j| mm[(i, j)].re).symmetric_eigenvalues();
        let (lo, hi) = (eig[0].min(eig[1]), eig[0].max(eig[1]));
        assert!((lo - 2.0 / e).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
        // |+⟩ is the eigenvector of eigenvalue 2
        let plus = (mm[(0, 0)] + mm[(0, 1)]).re;
        assert!((plus - 2.0).abs() < 1e-14);
    }

    #[test]
    fn guard_rejects_large_parameters() {
        assert!(matches!(
            compile_pairwise(20.5, 0.0, 0.0),
            Err(Error::ParameterOutOfRange { name: "a", .. })
        ));
        assert!(compile_pairwise(0.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn gadget_model_reproduces_correlator() {
        let g = compile_pairwise(1.3, -0.7, 0.4).unwrap();
        let model = gadget_model(&g).unwrap();
        let q = model.q_state().unwrap();
        // P(x1, x2) summed over the hidden middle qubit, x1 = qubit 0, x2 = qubit 2
        let mut p = [0.0; 4];
        for (i, z) in q.data().iter().enumerate() {
            p[((i >> 2) << 1) | (i & 1)] += z.norm_sqr();
        }
        let f = PairwiseExpFactor { a: 1.3, b: -0.7, c: 0.4 };
        for x in 0..4usize {
            let want = f.value((x >> 1) as u8, (x & 1) as u8) / 2.0;
            assert!(rel(p[x], want) < 1e-12, "{x}: {} vs {want}", p[x]);
        }
        let tn = crate::model::tensor_network_of(&model, &crate::model::Assignment::new()).unwrap();
        let t = tn.contract_all().unwrap();
        for (a, b) in t.data().iter().zip(q.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn decompose_small_tables_exact() {
        let b = 0.8f64;
        let fg = decompose_kary(&[1.0, b.exp()], 30.0).unwrap();
        assert_eq!(fg.factors().len(), 1);
        let p = fg.distribution().unwrap();
        assert!((p[1] / p[0] - b.exp()).abs() < 1e-12);
        let t = [0.3, 1.7, 2.2, 0.9];
        let fg = decompose_kary(&t, 30.0).unwrap();
        let p = fg.distribution().unwrap();
        let z: f64 = t.iter().sum();
        for (a, b) in p.iter().zip(t) {
            assert!((a - b / z).abs() < 1e-14);
        }
        assert!(matches!(decompose_kary(&[1.0, 0.0], 30.0), Err(Error::NonPositiveTable { index: 1 })));
        assert!(decompose_kary(&[1.0; 3], 30.0).is_err());
    }

    #[test]
    fn decompose_three_ary_within_tolerance() {
        let t = [0.5, 1.9, 0.7, 3.1, 1.2, 0.25, 2.4, 0.8];
        let fg = decompose_kary(&t, 30.0).unwrap();
        assert_eq!(fg.n_vars(), 3 + 8);
        let p = marginalize(&fg.distribution().unwrap(), fg.n_vars(), &[0, 1, 2]);
        let z: f64 = t.iter().sum();
        let q: Vec<f64> = t.iter().map(|x| x / z).collect();
        assert!(total_variation(&p, &q) <= 1e-3);
        let loose = decompose_kary(&t, 2.0).unwrap();
        let p2 = marginalize(&loose.distribution().unwrap(), loose.n_vars(), &[0, 1, 2]);
        assert!(total_variation(&p2, &q) > total_variation(&p, &q));
    }

    #[test]
    fn unary_compiles_to_ratio() {
        let fg = FactorGraph::new(1, vec![Factor::unary(0, 1.25)]).unwrap();
        let model = compile_factor_graph(&fg).unwrap();
        assert_eq!(model.m(), 1);
        let q = model.q_state().unwrap();
        let r = q.data()[1].norm_sqr() / q.data()[0].norm_sqr();
        assert!(rel(r, 1.25f64.exp()) < 1e-12);
    }

    #[test]
    fn non_pairwise_factor_named() {
        let fg = FactorGraph::new(3, vec![Factor::unary(0, 0.1), Factor::new(vec![0, 1, 2], vec![1.0; 8])]).unwrap();
        assert!(matches!(compile_factor_graph(&fg), Err(Error::NonPairwiseFactor { index: 1 })));
    }

    #[test]
    fn to_pairwise_preserves_visible_marginal() {
        let t = [1.0, 2.0, 0.5, 1.5, 3.0, 1.0, 0.7, 2.2];
        let fg = FactorGraph::new(4, vec![Factor::new(vec![3, 0, 1], t.to_vec()), Factor::unary(2, 0.3)]).unwrap();
        let pw = to_pairwise(&fg, 30.0).unwrap();
        assert_eq!(pw.n_vars(), 12);
        assert!(pw.factors().iter().all(|f| f.arity() <= 2));
        let p = fg.visible_distribution().unwrap();
        let q = pw.visible_distribution().unwrap();
        assert!(crate::factor_graph::total_variation(&p, &q) < 1e-3);
    }

    #[test]
    fn brickwork_structure() {
        let g = brickwork_graph(2, 5).unwrap();
        // 4 horizontal per row plus vertical links at columns 3 and 5
        assert_eq!(g.edges().len(), 10);
        assert!(g.edges().contains(&(2, 7)) && g.edges().contains(&(4, 9)));
        let g = brickwork_graph(3, 9).unwrap();
        assert!(g.edges().contains(&(9 + 6, 18 + 6)) && g.edges().contains(&(9 + 8, 18 + 8)));
        assert!(g.max_degree() <= 3);
    }
}
