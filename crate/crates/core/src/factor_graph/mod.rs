//! Binary factor graphs: the classical canonical form, with brute-force inference.

mod io;
mod reductions;

pub use io::FactorGraphFile;
pub use reductions::{
    equality_factor, from_bayesian_network, from_boltzmann_machine, from_dbm, from_deep_belief_network,
    from_markov_random_field, from_rbm, reduce_degree, DirectedLayer, Rbm, DBN_FAN_IN_CAP,
    DEFAULT_SHARPNESS,
};

use crate::error::{Error, Result};
use crate::model::Assignment;

/// Largest factor arity stored as an explicit table.
pub const MAX_ARITY: usize = 6;
/// Largest variable count for brute-force enumeration.
pub const MAX_ENUM_VARS: usize = 20;

/// f(x₁,x₂) = e^{a x₁x₂ + b x₁ + c x₂}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseExpFactor {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PairwiseExpFactor {
    pub fn value(&self, x1: u8, x2: u8) -> f64 {
        let (x1, x2) = (x1 as f64, x2 as f64);
        (self.a * x1 * x2 + self.b * x1 + self.c * x2).exp()
    }

    pub fn table(&self) -> Vec<f64> {
        vec![self.value(0, 0), self.value(0, 1), self.value(1, 0), self.value(1, 1)]
    }
}

/// Exponential-family view of a factor, up to a constant multiple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpForm {
    Constant,
    Unary { b: f64 },
    Pairwise(PairwiseExpFactor),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub vars: Vec<usize>,
    /// Indexed with vars[0] as the most significant bit.
    pub table: Vec<f64>,
    exp: Option<ExpForm>,
}

impl Factor {
    pub fn new(vars: Vec<usize>, table: Vec<f64>) -> Self {
        Self { vars, table, exp: None }
    }

    pub fn unary(v: usize, b: f64) -> Self {
        Self {
            vars: vec![v],
            table: vec![1.0, b.exp()],
            exp: Some(ExpForm::Unary { b }),
        }
    }

    pub fn pairwise(u: usize, v: usize, f: PairwiseExpFactor) -> Self {
        Self {
            vars: vec![u, v],
            table: f.table(),
            exp: Some(ExpForm::Pairwise(f)),
        }
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Same factor on renamed variables.
    pub fn relabel(&self, map: impl Fn(usize) -> usize) -> Self {
        Self {
            vars: self.vars.iter().map(|&v| map(v)).collect(),
            table: self.table.clone(),
            exp: self.exp,
        }
    }

    /// Stored parameters, else a log-linear solve for strictly positive tables of arity ≤ 2.
    pub fn exp_form(&self) -> Option<ExpForm> {
        if self.exp.is_some() {
            return self.exp;
        }
        if self.table.iter().any(|&t| t <= 0.0) {
            return None;
        }
        let l: Vec<f64> = self.table.iter().map(|t| t.ln()).collect();
        match self.arity() {
            0 => Some(ExpForm::Constant),
            1 => Some(ExpForm::Unary { b: l[1] - l[0] }),
            2 => Some(ExpForm::Pairwise(PairwiseExpFactor {
                a: l[3] + l[0] - l[1] - l[2],
                b: l[2] - l[0],
                c: l[1] - l[0],
            })),
            _ => None,
        }
    }

    fn lookup(&self, x: &[u8]) -> f64 {
        let idx = self.vars.iter().fold(0usize, |acc, &v| (acc << 1) | x[v] as usize);
        self.table[idx]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorGraph {
    n_vars: usize,
    factors: Vec<Factor>,
    hidden: Vec<bool>,
    degree_bound: Option<usize>,
}

impl FactorGraph {
    pub fn new(n_vars: usize, factors: Vec<Factor>) -> Result<Self> {
        let mut fg = Self {
            n_vars,
            factors: vec![],
            hidden: vec![false; n_vars],
            degree_bound: None,
        };
        for f in factors {
            fg.push(f)?;
        }
        Ok(fg)
    }

    pub fn push(&mut self, f: Factor) -> Result<()> {
        let idx = self.factors.len();
        if f.arity() > MAX_ARITY {
            return Err(Error::InvalidFactorGraph(format!("factor {idx} has arity {} > {MAX_ARITY}", f.arity())));
        }
        if f.table.len() != 1 << f.arity() {
            return Err(Error::InvalidFactorGraph(format!("factor {idx} table has wrong length")));
        }
        if f.table.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidFactorGraph(format!("factor {idx} table not finite and non-negative")));
        }
        for (k, &v) in f.vars.iter().enumerate() {
            if v >= self.n_vars || f.vars[..k].contains(&v) {
                return Err(Error::InvalidFactorGraph(format!("factor {idx} has bad variable {v}")));
            }
        }
        self.factors.push(f);
        if let Some(k) = self.degree_bound {
            self.check_degree(k)?;
        }
        Ok(())
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Result<Self> {
        for &h in hidden {
            if h >= self.n_vars {
                return Err(Error::InvalidFactorGraph(format!("hidden variable {h} out of range")));
            }
            self.hidden[h] = true;
        }
        Ok(self)
    }

    pub fn with_degree_bound(mut self, k: usize) -> Result<Self> {
        self.check_degree(k)?;
        self.degree_bound = Some(k);
        Ok(self)
    }

    fn check_degree(&self, k: usize) -> Result<()> {
        match (0..self.n_vars).find(|&v| self.degree(v) > k) {
            Some(v) => Err(Error::InvalidFactorGraph(format!("variable {v} has degree above {k}"))),
            None => Ok(()),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_hidden(&self, v: usize) -> bool {
        self.hidden[v]
    }

    pub fn hidden_vars(&self) -> Vec<usize> {
        (0..self.n_vars).filter(|&v| self.hidden[v]).collect()
    }

    pub fn visible_vars(&self) -> Vec<usize> {
        (0..self.n_vars).filter(|&v| !self.hidden[v]).collect()
    }

    pub fn degree_bound(&self) -> Option<usize> {
        self.degree_bound
    }

    /// Number of factors touching `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.factors.iter().filter(|f| f.vars.contains(&v)).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_vars).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Unnormalized product of factor values; `x[v]` is the bit of variable v.
    pub fn weight(&self, x: &[u8]) -> f64 {
        assert_eq!(x.len(), self.n_vars, "assignment must cover all variables");
        self.factors.iter().map(|f| f.lookup(x)).product()
    }

    fn check_size(&self) -> Result<()> {
        if self.n_vars > MAX_ENUM_VARS {
            return Err(Error::TooManyQubits {
                requested: self.n_vars,
                cap: MAX_ENUM_VARS,
            });
        }
        Ok(())
    }

    /// All 2^n weights, variable 0 as the most significant bit.
    pub fn weights(&self) -> Result<Vec<f64>> {
        self.check_size()?;
        let n = self.n_vars;
        let mut x = vec![0u8; n];
        Ok((0..1usize << n)
            .map(|i| {
                for (v, xv) in x.iter_mut().enumerate() {
                    *xv = ((i >> (n - 1 - v)) & 1) as u8;
                }
                self.weight(&x)
            })
            .collect())
    }

    pub fn distribution(&self) -> Result<Vec<f64>> {
        let w = self.weights()?;
        let z: f64 = w.iter().sum();
        if z <= 0.0 {
            return Err(Error::ZeroWeight);
        }
        Ok(w.into_iter().map(|x| x / z).collect())
    }

    /// Marginal over the non-hidden variables (ascending id, lowest id most significant).
    pub fn visible_distribution(&self) -> Result<Vec<f64>> {
        let p = self.distribution()?;
        Ok(marginalize(&p, self.n_vars, &self.visible_vars()))
    }

    /// p(x | z), summing over every variable in neither set.
    pub fn conditional(&self, x_vars: &[usize], x_vals: &[u8], z: &Assignment) -> Result<f64> {
        if x_vars.len() != x_vals.len() {
            return Err(Error::InvalidAssignment("x_vars and x_vals differ in length".into()));
        }
        z.validate(self.n_vars)?;
        if x_vars.iter().any(|v| z.get(*v).is_some() || *v >= self.n_vars) {
            return Err(Error::InvalidAssignment("x and z must be disjoint and in range".into()));
        }
        let w = self.weights()?;
        let n = self.n_vars;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, wi) in w.iter().enumerate() {
            let b = |v: usize| ((i >> (n - 1 - v)) & 1) as u8;
            if z.pairs().iter().any(|&(v, bit)| b(v) != bit) {
                continue;
            }
            den += wi;
            if x_vars.iter().zip(x_vals).all(|(&v, &bit)| b(v) == bit) {
                num += wi;
            }
        }
        if den == 0.0 {
            return Err(Error::ImpossibleCondition);
        }
        Ok(num / den)
    }
}

/// Sums a distribution over n bits down to the bits `keep` (in the given order).
pub fn marginalize(p: &[f64], n: usize, keep: &[usize]) -> Vec<f64> {
    let k = keep.len();
    let mut out = vec![0.0; 1 << k];
    for (i, pi) in p.iter().enumerate() {
        let j = keep.iter().fold(0usize, |acc, &v| (acc << 1) | ((i >> (n - 1 - v)) & 1));
        out[j] += pi;
    }
    out
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Smallest γ with |p(x) − q(x)| ≤ γ q(x) everywhere; +∞ when q(x) = 0 < p(x).
pub fn multiplicative_error(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).fold(0.0, |g, (&a, &b)| {
        if b == 0.0 {
            if a == 0.0 {
                g
            } else {
                f64::INFINITY
            }
        } else {
            g.max((a - b).abs() / b)
        }
    })
}
