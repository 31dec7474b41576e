//! Exact inference on QGMs and log-likelihood gradients built from the O₁/O₂ operators.

use std::path::Path;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, LocalMatrix, ParamId, QgmModel, DET_FLOOR};
use crate::tensor::statevec;

/// Conditional probabilities below this mark a gradient term as low-evidence.
pub const LOW_EVIDENCE: f64 = 1e-12;

/// Visible records; bit k of a record belongs to `graph.visible()[k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataSet {
    pub n: usize,
    pub records: Vec<Vec<u8>>,
}

impl DataSet {
    pub fn new(n: usize, records: Vec<Vec<u8>>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.len() != n || r.iter().any(|&b| b > 1) {
                return Err(Error::InvalidAssignment(format!("record {i} is not a {n}-bit string")));
            }
        }
        Ok(Self { n, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One bitstring per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut records = vec![];
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: Option<Vec<u8>> = line
                .chars()
                .map(|ch| match ch {
                    '0' => Some(0),
                    '1' => Some(1),
                    _ => None,
                })
                .collect();
            records.push(rec.ok_or_else(|| Error::Parse(format!("line {}: not a bitstring", ln + 1)))?);
        }
        let n = records.first().map_or(0, Vec::len);
        Self::new(n, records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| r.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect::<String>() + "\n")
            .collect()
    }
}

fn check_visible(model: &QgmModel, a: &Assignment) -> Result<()> {
    a.validate(model.m())?;
    match a.keys().into_iter().find(|v| !model.graph.visible().contains(v)) {
        Some(v) => Err(Error::InvalidAssignment(format!("vertex {v} is not visible"))),
        None => Ok(()),
    }
}

fn total_norm(q: &[C64]) -> Result<f64> {
    let n = statevec::norm_sqr(q);
    if n < 1e-300 {
        return Err(Error::ZeroNorm);
    }
    Ok(n)
}

/// Distribution over the visible vertices, first visible vertex most significant.
pub fn visible_distribution(model: &QgmModel) -> Result<Vec<f64>> {
    let q = model.q_state()?;
    let m = model.m();
    let z = total_norm(q.data())?;
    let p: Vec<f64> = q.data().iter().map(|a| a.norm_sqr() / z).collect();
    Ok(crate::factor_graph::marginalize(&p, m, model.graph.visible()))
}

/// ⟨Q|(|x⟩⟨x|⊗I)|Q⟩ / ⟨Q|Q⟩.
pub fn marginal(model: &QgmModel, x: &Assignment) -> Result<f64> {
    conditional(model, x, &Assignment::new())
}

/// ⟨Q(z)|O|Q(z)⟩ / ⟨Q(z)|Q(z)⟩ with O = |x⟩⟨x| on the x-qubits.
pub fn conditional(model: &QgmModel, x: &Assignment, z: &Assignment) -> Result<f64> {
    check_visible(model, x)?;
    check_visible(model, z)?;
    if x.keys().iter().any(|v| z.get(*v).is_some()) {
        return Err(Error::InvalidAssignment("x and z overlap".into()));
    }
    let q = model.q_state()?;
    let m = model.m();
    total_norm(q.data())?;
    let qz = statevec::slice_qubits(q.data(), m, &z.pairs());
    let den = statevec::norm_sqr(&qz);
    if den == 0.0 {
        return Err(Error::ImpossibleCondition);
    }
    // positions of x-qubits among the remaining (ascending) vertices
    let remaining: Vec<usize> = (0..m).filter(|v| z.get(*v).is_none()).collect();
    let local: Vec<(usize, u8)> = x
        .pairs()
        .iter()
        .map(|&(v, b)| (remaining.binary_search(&v).expect("x vertex remains"), b))
        .collect();
    let num = statevec::norm_sqr(&statevec::slice_qubits(&qz, remaining.len(), &local));
    Ok(num / den)
}

fn record_assignment(model: &QgmModel, v: &[u8]) -> Result<Assignment> {
    let vis = model.graph.visible();
    if v.len() != vis.len() {
        return Err(Error::InvalidAssignment(format!("record has {} bits, model has {} visible", v.len(), vis.len())));
    }
    Ok(Assignment(vis.iter().copied().zip(v.iter().copied()).collect()))
}

/// (1/M) Σ_v log⟨Q(v)|Q(v)⟩ − log⟨Q|Q⟩.
pub fn log_likelihood(model: &QgmModel, data: &DataSet) -> Result<f64> {
    let q = model.q_state()?;
    let m = model.m();
    let z = total_norm(q.data())?;
    let mut acc = 0.0;
    for r in &data.records {
        let a = record_assignment(model, r)?;
        let qv = statevec::slice_qubits(q.data(), m, &a.pairs());
        acc += statevec::norm_sqr(&qv).ln();
    }
    Ok(acc / data.len() as f64 - z.ln())
}

/// (∂_θ M) M⁻¹ + h.c.
pub fn o1(model: &QgmModel, p: ParamId) -> Result<Matrix2<C64>> {
    let m = &model.matrices[p.vertex];
    let inv = inverse(m, p.vertex)?;
    let a = LocalMatrix::derivative(p.component) * inv;
    Ok(a + a.adjoint())
}

/// |b⟩⟨b| (∂_θ M) M⁻¹ + h.c.
pub fn o2(model: &QgmModel, p: ParamId, bit: u8) -> Result<Matrix2<C64>> {
    let m = &model.matrices[p.vertex];
    let inv = inverse(m, p.vertex)?;
    let mut proj = Matrix2::zeros();
    proj[(bit as usize, bit as usize)] = C64::new(1.0, 0.0);
    let a = proj * LocalMatrix::derivative(p.component) * inv;
    Ok(a + a.adjoint())
}

fn inverse(m: &LocalMatrix, vertex: usize) -> Result<Matrix2<C64>> {
    m.inverse().ok_or(Error::SingularMatrix {
        vertex,
        det: m.det().norm(),
    })
}

/// Unnormalized reduced density matrix of qubit q.
fn reduced(state: &[C64], n: usize, q: usize) -> Matrix2<C64> {
    let mut rho = Matrix2::zeros();
    let mask = 1usize << (n - 1 - q);
    for i in 0..state.len() {
        if i & mask != 0 {
            continue;
        }
        let (a0, a1) = (state[i], state[i | mask]);
        rho[(0, 0)] += a0 * a0.conj();
        rho[(0, 1)] += a0 * a1.conj();
        rho[(1, 0)] += a1 * a0.conj();
        rho[(1, 1)] += a1 * a1.conj();
    }
    rho
}

fn trace_with(rho: &Matrix2<C64>, op: &Matrix2<C64>) -> f64 {
    (rho * op).trace().re
}

/// ⟨Q|O₁|Q⟩/⟨Q|Q⟩ = ∂_θ log⟨Q|Q⟩.
pub fn grad_unconditioned(model: &QgmModel, p: ParamId) -> Result<f64> {
    let q = model.q_state()?;
    total_norm(q.data())?;
    let rho = reduced(q.data(), model.m(), p.vertex);
    Ok(trace_with(&rho, &o1(model, p)?) / rho.trace().re)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionedGrad {
    pub value: f64,
    /// Probability of v_i given the rest of the record.
    pub evidence: f64,
    pub low_evidence: bool,
}

/// ⟨Q(v/v_i)|O₂|Q(v/v_i)⟩ / ⟨Q(v/v_i)|v_i⟩⟨v_i|Q(v/v_i)⟩ for a visible vertex i.
pub fn grad_conditioned(model: &QgmModel, p: ParamId, v: &[u8]) -> Result<ConditionedGrad> {
    let q = model.q_state()?;
    conditioned_term(model, q.data(), p, v)
}

fn conditioned_term(model: &QgmModel, q: &[C64], p: ParamId, v: &[u8]) -> Result<ConditionedGrad> {
    let a = record_assignment(model, v)?;
    let i = p.vertex;
    let bit = a
        .get(i)
        .ok_or_else(|| Error::InvalidAssignment(format!("vertex {i} is not visible")))?;
    let mut rest = a.clone();
    rest.0.remove(&i);
    let m = model.m();
    let sliced = statevec::slice_qubits(q, m, &rest.pairs());
    let pos = (0..m).filter(|u| rest.get(*u).is_none()).position(|u| u == i).expect("i remains");
    let rho = reduced(&sliced, m - rest.len(), pos);
    let den = rho[(bit as usize, bit as usize)].re;
    if den == 0.0 {
        return Err(Error::ImpossibleCondition);
    }
    let evidence = den / rho.trace().re;
    Ok(ConditionedGrad {
        value: trace_with(&rho, &o2(model, p, bit)?) / den,
        evidence,
        low_evidence: evidence < LOW_EVIDENCE,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    /// ∂ log_likelihood / ∂θ for every global parameter id.
    pub grads: Vec<f64>,
    pub objective: f64,
    /// ⟨Q(v)|Q(v)⟩/⟨Q|Q⟩ for each record.
    pub record_norms: Vec<f64>,
    /// (record, vertex) pairs whose conditional evidence fell below the threshold.
    pub low_evidence: Vec<(usize, usize)>,
}

/// Full gradient of `log_likelihood`.
pub fn grad_kl(model: &QgmModel, data: &DataSet) -> Result<GradientReport> {
    if data.is_empty() {
        return Err(Error::InvalidAssignment("empty data set".into()));
    }
    let q = model.q_state()?;
    let q = q.data();
    let m = model.m();
    let z = total_norm(q)?;
    let o1s: Vec<Vec<Matrix2<C64>>> = (0..m)
        .map(|v| (0..8).map(|c| o1(model, ParamId { vertex: v, component: c })).collect())
        .collect::<Result<_>>()?;

    let mut grads = vec![0.0; 8 * m];
    for v in 0..m {
        let rho = reduced(q, m, v);
        let tr = rho.trace().re;
        for c in 0..8 {
            grads[8 * v + c] -= trace_with(&rho, &o1s[v][c]) / tr;
        }
    }
    let inv_m = 1.0 / data.len() as f64;
    let hidden = model.graph.hidden();
    let mut record_norms = vec![];
    let mut low_evidence = vec![];
    let mut objective = -z.ln();
    for (ri, r) in data.records.iter().enumerate() {
        let a = record_assignment(model, r)?;
        let qv = statevec::slice_qubits(q, m, &a.pairs());
        let nv = statevec::norm_sqr(&qv);
        if nv == 0.0 {
            return Err(Error::ImpossibleCondition);
        }
        objective += inv_m * nv.ln();
        record_norms.push(nv / z);
        for (pos, &h) in hidden.iter().enumerate() {
            let rho = reduced(&qv, hidden.len(), pos);
            let tr = rho.trace().re;
            for c in 0..8 {
                grads[8 * h + c] += inv_m * trace_with(&rho, &o1s[h][c]) / tr;
            }
        }
        for &vis in model.graph.visible() {
            for c in 0..8 {
                let t = conditioned_term(model, q, ParamId { vertex: vis, component: c }, r)?;
                if t.low_evidence && c == 0 {
                    low_evidence.push((ri, vis));
                }
                grads[8 * vis + c] += inv_m * t.value;
            }
        }
    }
    Ok(GradientReport {
        grads,
        objective,
        record_norms,
        low_evidence,
    })
}

/// Σ_i tr(M_i†M_i) − χ|det M_i|² and its gradient per real parameter.
pub fn regularizer(model: &QgmModel, chi: f64) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(model.n_params());
    for mat in &model.matrices {
        let e = mat.entries();
        let det = mat.det();
        value += e.iter().map(|z| z.norm_sqr()).sum::<f64>() - chi * det.norm_sqr();
        let cof = [e[(1, 1)], -e[(1, 0)], -e[(0, 1)], e[(0, 0)]];
        let flat = [e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]];
        for k in 0..4 {
            let g = det.conj() * cof[k];
            grad.push(2.0 * flat[k].re - chi * 2.0 * g.re);
            grad.push(2.0 * flat[k].im - chi * 2.0 * (g * C64::new(0.0, 1.0)).re);
        }
    }
    (value, grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lr: f64,
    pub steps: usize,
    pub chi: f64,
    /// Recorded with the run; the descent itself draws no randomness.
    pub seed: u64,
    /// Rescale every matrix to minimum singular value 1 after each step. The
    /// distribution is unchanged and the penalty becomes 1 + κ²(1 − χ).
    pub normalize: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lr: 0.05,
            steps: 100,
            chi: 0.1,
            seed: 0,
            normalize: true,
        }
    }
}

/// Loss components before the update of step `step`; objective is −log_likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub objective: f64,
    pub penalty: f64,
    pub max_grad: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: QgmModel,
    pub trace: Vec<TrainRecord>,
    pub seed: u64,
}

const MAX_HALVINGS: usize = 60;

/// Plain gradient descent on −log_likelihood + penalty. A step that would leave any
/// |det M_i| below the floor is rejected and the learning rate halved.
pub fn train(model: &QgmModel, data: &DataSet, opts: &TrainOptions) -> Result<TrainOutcome> {
    let mut cur = model.clone();
    let mut lr = opts.lr;
    let mut trace = vec![];
    for step in 0..opts.steps {
        let rep = grad_kl(&cur, data)?;
        let (penalty, pgrad) = regularizer(&cur, opts.chi);
        let grad: Vec<f64> = rep.grads.iter().zip(&pgrad).map(|(g, p)| -g + p).collect();
        let max_grad = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let rec = TrainRecord {
            step,
            objective: -rep.objective,
            penalty,
            max_grad,
            lr,
        };
        trace.push(rec);
        if !(rec.objective.is_finite() && penalty.is_finite() && max_grad.is_finite()) {
            return Err(Error::Divergence { step, trace });
        }
        let params = cur.params();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let next: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - lr * g).collect();
            let singular = next
                .chunks(8)
                .any(|c| !(LocalMatrix::from_params(c).det().norm() >= DET_FLOOR));
            if !singular {
                accepted = Some(next);
                break;
            }
            lr /= 2.0;
        }
        match accepted {
            Some(next) => {
                cur = cur.with_params(&next)?;
                if opts.normalize {
                    cur = normalized(&cur)?;
                }
            }
            None => return Err(Error::Divergence { step, trace }),
        }
    }
    Ok(TrainOutcome {
        model: cur,
        trace,
        seed: opts.seed,
    })
}

/// Each matrix divided by its smallest singular value.
pub fn normalized(model: &QgmModel) -> Result<QgmModel> {
    let mats = model
        .matrices
        .iter()
        .map(|m| {
            let sv = m.0.singular_values();
            LocalMatrix(m.0.unscale(sv[0].min(sv[1])))
        })
        .collect();
    QgmModel::new(model.graph.clone(), mats)
}

/// CSV with a leading comment line.
pub fn trace_csv(trace: &[TrainRecord], comment: &str) -> String {
    let mut s = format!("# {comment}\nstep,objective,penalty,max_grad\n");
    for r in trace {
        s.push_str(&format!("{},{:?},{:?},{:?}\n", r.step, r.objective, r.penalty, r.max_grad));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Graph;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single() -> QgmModel {
        QgmModel::new(Graph::new(1, &[], &[0]).unwrap(), vec![LocalMatrix::identity()]).unwrap()
    }

    fn sample_model() -> QgmModel {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], &[0, 2, 3]).unwrap();
        let mats = vec![
            LocalMatrix::new(c(1.0, 0.2), c(0.3, -0.4), c(-0.2, 0.1), c(0.8, 0.5)),
            LocalMatrix::new(c(0.7, 0.0), c(0.1, 0.6), c(0.5, -0.3), c(1.2, 0.1)),
            LocalMatrix::new(c(0.9, -0.3), c(-0.6, 0.2), c(0.4, 0.4), c(1.1, 0.0)),
            LocalMatrix::new(c(1.3, 0.1), c(0.2, 0.2), c(0.1, -0.7), c(0.6, -0.2)),
        ];
        QgmModel::new(g, mats).unwrap()
    }

    #[test]
    fn single_vertex_examples() {
        let m = single();
        for b in 0..2 {
            let p = marginal(&m, &Assignment::from_pairs(&[(0, b)])).unwrap();
            assert!((p - 0.5).abs() < 1e-15);
        }
        let d = DataSet::new(1, vec![vec![0]]).unwrap();
        assert!((log_likelihood(&m, &d).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn conditional_sums_to_one_and_scale_invariant() {
        let m = sample_model();
        let z = Assignment::from_pairs(&[(3, 1)]);
        let mut total = 0.0;
        for x0 in 0..2 {
            for x2 in 0..2 {
                let p = conditional(&m, &Assignment::from_pairs(&[(0, x0), (2, x2)]), &z).unwrap();
                assert!((0.0..=1.0).contains(&p));
                total += p;
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
        let mut scaled = m.clone();
        scaled.matrices[1] = LocalMatrix(scaled.matrices[1].0 * c(3.7, 0.0));
        let x = Assignment::from_pairs(&[(0, 1)]);
        let a = conditional(&m, &x, &z).unwrap();
        let b = conditional(&scaled, &x, &z).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(conditional(&m, &Assignment::from_pairs(&[(1, 0)]), &z).is_err());
    }

    #[test]
    fn log_likelihood_is_mean_log_marginal() {
        let m = sample_model();
        let d = DataSet::new(3, vec![vec![0, 1, 1], vec![1, 1, 0], vec![0, 0, 0]]).unwrap();
        let direct: f64 = d
            .records
            .iter()
            .map(|r| {
                let a = Assignment::from_pairs(&[(0, r[0]), (2, r[1]), (3, r[2])]);
                marginal(&m, &a).unwrap().ln()
            })
            .sum::<f64>()
            / 3.0;
        assert!((log_likelihood(&m, &d).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn operators_are_hermitian() {
        let m = sample_model();
        for id in 0..m.n_params() {
            let p = ParamId::from_global(id);
            let a = o1(&m, p).unwrap();
            assert!((a - a.adjoint()).norm() < 1e-12);
            let b = o2(&m, p, 1).unwrap();
            assert!((b - b.adjoint()).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = sample_model();
        let d = DataSet::new(3, vec![vec![0, 1, 1], vec![1, 1, 0], vec![0, 0, 0], vec![0, 1, 1]]).unwrap();
        let rep = grad_kl(&m, &d).unwrap();
        assert!((rep.objective - log_likelihood(&m, &d).unwrap()).abs() < 1e-12);
        let p0 = m.params();
        let h = 1e-5;
        for k in 0..p0.len() {
            let mut pp = p0.clone();
            pp[k] += h;
            let up = log_likelihood(&m.with_params(&pp).unwrap(), &d).unwrap();
            pp[k] -= 2.0 * h;
            let dn = log_likelihood(&m.with_params(&pp).unwrap(), &d).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let g = rep.grads[k];
            assert!((g - fd).abs() <= 1e-5 * g.abs().max(1e-4), "param {k}: {g} vs {fd}");
        }
    }

    #[test]
    fn symmetric_point_has_zero_bias_gradient() {
        // two disconnected visible qubits with identity matrices, balanced data
        let g = Graph::new(2, &[], &[0, 1]).unwrap();
        let m = QgmModel::new(g, vec![LocalMatrix::identity(); 2]).unwrap();
        let d = DataSet::new(2, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        let rep = grad_kl(&m, &d).unwrap();
        // diagonal entries play the role of biases
        for v in 0..2 {
            for comp in [0, 6] {
                assert!(rep.grads[8 * v + comp].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn regularizer_examples() {
        let m = single();
        assert!((regularizer(&m, 1.0).0 - 1.0).abs() < 1e-15);
        let m = QgmModel::new(Graph::new(1, &[], &[0]).unwrap(), vec![LocalMatrix::diag(2.0, 1.0)]).unwrap();
        assert!((regularizer(&m, 0.0).0 - 5.0).abs() < 1e-15);
        let m = sample_model();
        let (_, g) = regularizer(&m, 0.7);
        let p0 = m.params();
        let h = 1e-6;
        for k in 0..p0.len() {
            let mut pp = p0.clone();
            pp[k] += h;
            let up = regularizer(&m.with_params(&pp).unwrap(), 0.7).0;
            pp[k] -= 2.0 * h;
            let dn = regularizer(&m.with_params(&pp).unwrap(), 0.7).0;
            assert!((g[k] - (up - dn) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn dataset_parse() {
        let d = DataSet::parse("# comment\n010\n\n111\n").unwrap();
        assert_eq!(d.records, vec![vec![0, 1, 0], vec![1, 1, 1]]);
        assert!(DataSet::parse("01\n011\n").is_err());
        assert!(DataSet::parse("0x1\n").is_err());
        assert_eq!(DataSet::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn normalization_keeps_distribution() {
        let m = sample_model();
        let n = normalized(&m).unwrap();
        for mat in &n.matrices {
            let sv = mat.0.singular_values();
            assert!((sv[0].min(sv[1]) - 1.0).abs() < 1e-12);
        }
        let (a, b) = (visible_distribution(&m).unwrap(), visible_distribution(&n).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        // penalty reduces to 1 + κ²(1 − χ) per matrix
        let one = QgmModel::new(Graph::new(1, &[], &[0]).unwrap(), vec![LocalMatrix::diag(3.0, 1.0)]).unwrap();
        assert!((regularizer(&one, 0.25).0 - (1.0 + 9.0 * 0.75)).abs() < 1e-12);
    }
}
