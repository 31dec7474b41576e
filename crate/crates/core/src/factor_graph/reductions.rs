//! Classical model families as factor graphs, plus degree reduction.

use super::{ExpForm, Factor, FactorGraph, PairwiseExpFactor};
use crate::error::{Error, Result};

/// Default equality sharpness: leaks e^{−15} ≈ 3e-7 per copy.
pub const DEFAULT_SHARPNESS: f64 = 30.0;
/// Largest directed fan-in accepted when tabulating sigmoid conditionals.
pub const DBN_FAN_IN_CAP: usize = 6;

/// e^{a x₁x₂ − a x₁/2 − a x₂/2}: 1 on agreement, e^{−a/2} otherwise.
pub fn equality_factor(a: f64) -> PairwiseExpFactor {
    PairwiseExpFactor { a, b: -a / 2.0, c: -a / 2.0 }
}

/// Gibbs distribution ∝ exp(Σ_{i<j} J_ij x_i x_j + Σ_i h_i x_i).
pub fn from_boltzmann_machine(j: &[Vec<f64>], h: &[f64]) -> Result<FactorGraph> {
    let n = h.len();
    if j.len() != n || j.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidFactorGraph("coupling matrix shape does not match biases".into()));
    }
    let mut fg = FactorGraph::new(n, vec![])?;
    for a in 0..n {
        if j[a][a] != 0.0 {
            return Err(Error::InvalidFactorGraph(format!("diagonal coupling on {a}")));
        }
        for b in a + 1..n {
            if (j[a][b] - j[b][a]).abs() > 1e-12 * (1.0 + j[a][b].abs()) {
                return Err(Error::InvalidFactorGraph(format!("coupling ({a},{b}) not symmetric")));
            }
            if j[a][b] != 0.0 {
                fg.push(Factor::pairwise(a, b, PairwiseExpFactor { a: j[a][b], b: 0.0, c: 0.0 }))?;
            }
        }
    }
    for (v, &b) in h.iter().enumerate() {
        if b != 0.0 {
            fg.push(Factor::unary(v, b))?;
        }
    }
    Ok(fg)
}

/// Restricted Boltzmann machine; `weights[i][k]` couples visible i with hidden k.
#[derive(Clone, Debug, PartialEq)]
pub struct Rbm {
    pub weights: Vec<Vec<f64>>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl Rbm {
    fn coupling_matrix(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (nv, nh) = (self.visible_bias.len(), self.hidden_bias.len());
        let n = nv + nh;
        let mut j = vec![vec![0.0; n]; n];
        for i in 0..nv {
            for k in 0..nh {
                j[i][nv + k] = self.weights[i][k];
                j[nv + k][i] = self.weights[i][k];
            }
        }
        let h = self.visible_bias.iter().chain(&self.hidden_bias).copied().collect();
        (j, h)
    }
}

/// Visible variables first (0..nv), then hidden ones, which are flagged for marginalization.
pub fn from_rbm(rbm: &Rbm) -> Result<FactorGraph> {
    let nv = rbm.visible_bias.len();
    let nh = rbm.hidden_bias.len();
    if rbm.weights.len() != nv || rbm.weights.iter().any(|r| r.len() != nh) {
        return Err(Error::InvalidFactorGraph("RBM weight shape".into()));
    }
    let (j, h) = rbm.coupling_matrix();
    from_boltzmann_machine(&j, &h)?.with_hidden(&(nv..nv + nh).collect::<Vec<_>>())
}

/// Deep Boltzmann machine with layers 0 (visible), 1, 2, …; `weights[l][i][k]`
/// couples unit i of layer l with unit k of layer l+1.
pub fn from_dbm(biases: &[Vec<f64>], weights: &[Vec<Vec<f64>>]) -> Result<FactorGraph> {
    if biases.is_empty() || weights.len() + 1 != biases.len() {
        return Err(Error::InvalidFactorGraph("need one weight block between consecutive layers".into()));
    }
    let offsets: Vec<usize> = biases
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += b.len();
            Some(o)
        })
        .collect();
    let n: usize = biases.iter().map(Vec::len).sum();
    let mut j = vec![vec![0.0; n]; n];
    for (l, w) in weights.iter().enumerate() {
        if w.len() != biases[l].len() || w.iter().any(|r| r.len() != biases[l + 1].len()) {
            return Err(Error::InvalidFactorGraph(format!("weight block {l} shape")));
        }
        for (i, row) in w.iter().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                j[offsets[l] + i][offsets[l + 1] + k] = x;
                j[offsets[l + 1] + k][offsets[l] + i] = x;
            }
        }
    }
    let h: Vec<f64> = biases.concat();
    let hidden: Vec<usize> = (biases[0].len()..n).collect();
    from_boltzmann_machine(&j, &h)?.with_hidden(&hidden)
}

/// `parents[v]` lists v's parents; `cpts[v][r] = [P(v=0|r), P(v=1|r)]` where r indexes
/// the parent configuration with the first parent as the most significant bit.
pub fn from_bayesian_network(parents: &[Vec<usize>], cpts: &[Vec<[f64; 2]>]) -> Result<FactorGraph> {
    let n = parents.len();
    if cpts.len() != n {
        return Err(Error::InvalidFactorGraph("one CPT per node required".into()));
    }
    check_acyclic(parents)?;
    let mut fg = FactorGraph::new(n, vec![])?;
    for v in 0..n {
        let k = parents[v].len();
        if cpts[v].len() != 1 << k {
            return Err(Error::InvalidFactorGraph(format!("CPT of node {v} needs {} rows", 1 << k)));
        }
        for row in &cpts[v] {
            if (row[0] + row[1] - 1.0).abs() > 1e-12 || row[0] < 0.0 || row[1] < 0.0 {
                return Err(Error::InvalidFactorGraph(format!("CPT row of node {v} is not a distribution")));
            }
        }
        let mut vars = parents[v].clone();
        vars.push(v);
        let table = cpts[v].iter().flat_map(|r| [r[0], r[1]]).collect();
        fg.push(Factor::new(vars, table))?;
    }
    Ok(fg)
}

fn check_acyclic(parents: &[Vec<usize>]) -> Result<()> {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(v: usize, parents: &[Vec<usize>], state: &mut [u8]) -> Result<()> {
        match state[v] {
            1 => return Err(Error::InvalidFactorGraph(format!("cycle through node {v}"))),
            2 => return Ok(()),
            _ => {}
        }
        state[v] = 1;
        for &p in &parents[v] {
            if p >= parents.len() {
                return Err(Error::InvalidFactorGraph(format!("parent {p} out of range")));
            }
            visit(p, parents, state)?;
        }
        state[v] = 2;
        Ok(())
    }
    let mut state = vec![0u8; parents.len()];
    for v in 0..parents.len() {
        visit(v, parents, &mut state)?;
    }
    Ok(())
}

/// One factor per clique, tables indexed with the clique's first variable most significant.
pub fn from_markov_random_field(n_vars: usize, cliques: &[Vec<usize>], potentials: &[Vec<f64>]) -> Result<FactorGraph> {
    if cliques.len() != potentials.len() {
        return Err(Error::InvalidFactorGraph("one potential per clique required".into()));
    }
    let factors = cliques
        .iter()
        .zip(potentials)
        .map(|(c, p)| Factor::new(c.clone(), p.clone()))
        .collect();
    FactorGraph::new(n_vars, factors)
}

/// Directed sigmoid layer: unit k of the lower layer has
/// P(y_k=1 | x) = σ(Σ_i weights[k][i] x_i + biases[k]) over the upper layer x.
/// Zero weights are treated as absent edges.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectedLayer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// Variables: RBM hidden layer, RBM visible layer, then each directed layer in order.
/// Only the last layer is visible.
pub fn from_deep_belief_network(rbm_top: &Rbm, directed: &[DirectedLayer]) -> Result<FactorGraph> {
    let top = from_rbm(rbm_top)?;
    let nv = rbm_top.visible_bias.len();
    let nh = rbm_top.hidden_bias.len();
    // reorder so the RBM's hidden layer comes first
    let remap = |v: usize| if v < nv { nh + v } else { v - nv };
    let mut n = nv + nh;
    let mut factors: Vec<Factor> = top
        .factors()
        .iter()
        .map(|f| {
            let vars = f.vars.iter().map(|&v| remap(v)).collect();
            match f.exp_form() {
                Some(ExpForm::Unary { b }) => Factor::unary(remap(f.vars[0]), b),
                Some(ExpForm::Pairwise(p)) => {
                    Factor::pairwise(remap(f.vars[0]), remap(f.vars[1]), p)
                }
                _ => Factor::new(vars, f.table.clone()),
            }
        })
        .collect();
    let mut upper: Vec<usize> = (nh..nh + nv).collect();
    for (l, layer) in directed.iter().enumerate() {
        if layer.weights.len() != layer.biases.len() || layer.weights.iter().any(|r| r.len() != upper.len()) {
            return Err(Error::InvalidFactorGraph(format!("directed layer {l} shape")));
        }
        let mut lower = vec![];
        for (k, row) in layer.weights.iter().enumerate() {
            let y = n + k;
            let fan_in: Vec<(usize, f64)> = upper
                .iter()
                .zip(row)
                .filter(|(_, &w)| w != 0.0)
                .map(|(&u, &w)| (u, w))
                .collect();
            if fan_in.len() > DBN_FAN_IN_CAP {
                return Err(Error::InvalidFactorGraph(format!(
                    "node {y} has fan-in {} above {DBN_FAN_IN_CAP}",
                    fan_in.len()
                )));
            }
            let r = fan_in.len();
            let mut table = Vec::with_capacity(2 << r);
            for cfg in 0..1usize << r {
                let field: f64 = layer.biases[k]
                    + fan_in
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| (cfg >> (r - 1 - i)) & 1 == 1)
                        .map(|(_, (_, w))| w)
                        .sum::<f64>();
                let p1 = 1.0 / (1.0 + (-field).exp());
                table.push(1.0 - p1);
                table.push(p1);
            }
            let mut vars: Vec<usize> = fan_in.iter().map(|p| p.0).collect();
            vars.push(y);
            factors.push(Factor::new(vars, table));
            lower.push(y);
        }
        n += layer.biases.len();
        upper = lower;
    }
    let hidden: Vec<usize> = (0..n).filter(|v| !upper.contains(v)).collect();
    FactorGraph::new(n, factors)?.with_hidden(&hidden)
}

/// Splits high-degree variables into binary trees of hidden copies tied by equality
/// factors of sharpness `a_sharp`; afterwards every variable touches at most 3 factors.
pub fn reduce_degree(fg: &FactorGraph, a_sharp: f64) -> Result<FactorGraph> {
    let mut factors: Vec<Factor> = vec![];
    for (i, f) in fg.factors().iter().enumerate() {
        match f.exp_form() {
            Some(ExpForm::Unary { b }) => factors.push(Factor::unary(f.vars[0], b)),
            Some(ExpForm::Pairwise(p)) => factors.push(Factor::pairwise(f.vars[0], f.vars[1], p)),
            Some(ExpForm::Constant) => {}
            None => return Err(Error::NonPairwiseFactor { index: i }),
        }
    }
    let mut n = fg.n_vars();
    let mut hidden = fg.hidden_vars();
    let mut extra: Vec<Factor> = vec![];
    for v in 0..fg.n_vars() {
        let items: Vec<(usize, usize)> = factors
            .iter()
            .enumerate()
            .filter_map(|(fi, f)| f.vars.iter().position(|&x| x == v).map(|s| (fi, s)))
            .collect();
        if items.len() <= 3 {
            continue;
        }
        let mut slots: Vec<(usize, usize, usize)> = vec![];
        attach(v, &items, 3, a_sharp, &mut n, &mut hidden, &mut extra, &mut slots);
        for (fi, side, node) in slots {
            let f = &factors[fi];
            factors[fi] = match f.exp_form() {
                Some(ExpForm::Unary { b }) => Factor::unary(node, b),
                Some(ExpForm::Pairwise(p)) => {
                    let mut vars = f.vars.clone();
                    vars[side] = node;
                    Factor::pairwise(vars[0], vars[1], p)
                }
                _ => unreachable!("only exp-form factors remain"),
            };
        }
    }
    factors.extend(extra);
    let out = FactorGraph::new(n, factors)?.with_hidden(&hidden)?;
    out.with_degree_bound(3)
}

#[allow(clippy::too_many_arguments)]
fn attach(
    node: usize,
    items: &[(usize, usize)],
    capacity: usize,
    a_sharp: f64,
    n: &mut usize,
    hidden: &mut Vec<usize>,
    extra: &mut Vec<Factor>,
    slots: &mut Vec<(usize, usize, usize)>,
) {
    if items.len() <= capacity {
        slots.extend(items.iter().map(|&(f, s)| (f, s, node)));
        return;
    }
    let per = items.len().div_ceil(capacity);
    let mut rest = items;
    for g in 0..capacity {
        let left = capacity - g;
        let take = per.min(rest.len() - (left - 1)).max(1);
        let take = if left == 1 { rest.len() } else { take };
        let (group, tail) = rest.split_at(take);
        rest = tail;
        if group.len() == 1 {
            slots.push((group[0].0, group[0].1, node));
        } else {
            let copy = *n;
            *n += 1;
            hidden.push(copy);
            extra.push(Factor::pairwise(node, copy, equality_factor(a_sharp)));
            attach(copy, group, 2, a_sharp, n, hidden, extra, slots);
        }
    }
}
