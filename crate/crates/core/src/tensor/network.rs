use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{contract, ComplexTensor, IndexPairing};

/// A tensor leg: either a bond shared with another tensor, or a physical qubit.
/// `site` labels which unconditioned variable the qubit belongs to; several qubits may share a site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    Bond(usize),
    Physical { qubit: usize, site: usize },
}

impl Leg {
    fn bond(&self) -> Option<usize> {
        match self {
            Leg::Bond(b) => Some(*b),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NetTensor {
    pub tensor: ComplexTensor,
    pub legs: Vec<Leg>,
    pub label: String,
}

impl NetTensor {
    pub fn new(tensor: ComplexTensor, legs: Vec<Leg>, label: impl Into<String>) -> Self {
        Self {
            tensor,
            legs,
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TensorNetwork {
    pub tensors: Vec<NetTensor>,
}

impl TensorNetwork {
    pub fn new(tensors: Vec<NetTensor>) -> Result<Self> {
        let mut bonds: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        let mut qubits = std::collections::BTreeSet::new();
        for (ti, t) in tensors.iter().enumerate() {
            if t.legs.len() != t.tensor.rank() {
                return Err(Error::InvalidTensor(format!(
                    "tensor {ti} ({}) has {} legs but rank {}",
                    t.label,
                    t.legs.len(),
                    t.tensor.rank()
                )));
            }
            for (a, leg) in t.legs.iter().enumerate() {
                let d = t.tensor.dims()[a];
                match *leg {
                    Leg::Bond(b) => {
                        let e = bonds.entry(b).or_insert((0, d));
                        e.0 += 1;
                        if e.0 > 2 || e.1 != d {
                            return Err(Error::InvalidTensor(format!("bond {b} malformed at tensor {ti}")));
                        }
                    }
                    Leg::Physical { qubit, .. } => {
                        if d != 2 || !qubits.insert(qubit) {
                            return Err(Error::InvalidTensor(format!("physical qubit {qubit} malformed")));
                        }
                    }
                }
            }
        }
        Ok(Self { tensors })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// (qubit, site, tensor id) for every physical leg, ascending by qubit.
    pub fn physical_legs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = vec![];
        for (ti, t) in self.tensors.iter().enumerate() {
            for leg in &t.legs {
                if let Leg::Physical { qubit, site } = *leg {
                    out.push((qubit, site, ti));
                }
            }
        }
        out.sort();
        out
    }

    pub fn qubits(&self) -> Vec<usize> {
        self.physical_legs().into_iter().map(|p| p.0).collect()
    }

    pub fn sites(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.physical_legs().into_iter().map(|p| p.1).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Bond id → the (one or two) tensors carrying it.
    pub fn bond_owners(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (ti, t) in self.tensors.iter().enumerate() {
            for b in t.legs.iter().filter_map(Leg::bond) {
                m.entry(b).or_default().push(ti);
            }
        }
        m
    }

    /// Tensors adjacent through at least one bond, ascending.
    pub fn neighbors(&self, ti: usize) -> Vec<usize> {
        let owners = self.bond_owners();
        let mut out: Vec<usize> = self.tensors[ti]
            .legs
            .iter()
            .filter_map(Leg::bond)
            .flat_map(|b| owners[&b].iter().copied())
            .filter(|&o| o != ti)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Number of bonds with one end in `a` and the other in `b`.
    pub fn bonds_between(&self, a: &[usize], b: &[usize]) -> usize {
        self.bond_owners()
            .values()
            .filter(|o| {
                o.len() == 2 && ((a.contains(&o[0]) && b.contains(&o[1])) || (a.contains(&o[1]) && b.contains(&o[0])))
            })
            .count()
    }

    /// Slices the given bonds at fixed values in every tensor carrying them.
    pub fn fix_bonds(&self, fixes: &[(usize, usize)]) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let mut tensor = t.tensor.clone();
                let mut legs = t.legs.clone();
                for &(b, v) in fixes {
                    while let Some(a) = legs.iter().position(|l| *l == Leg::Bond(b)) {
                        tensor = tensor.slice_axis(a, v);
                        legs.remove(a);
                    }
                }
                NetTensor::new(tensor, legs, t.label.clone())
            })
            .collect();
        Self { tensors }
    }

    /// Contracts a subset of tensors. Output legs: physical legs ascending by qubit,
    /// then bonds leaving the subset ascending by bond id.
    pub fn contract_subset(&self, ids: &[usize]) -> Result<(ComplexTensor, Vec<Leg>)> {
        let mut items: Vec<(ComplexTensor, Vec<Leg>)> = ids
            .iter()
            .map(|&i| (self.tensors[i].tensor.clone(), self.tensors[i].legs.clone()))
            .collect();
        if items.is_empty() {
            return Ok((ComplexTensor::scalar(num_complex::Complex64::new(1.0, 0.0)), vec![]));
        }
        while items.len() > 1 {
            let (i, j) = pick_pair(&items);
            let (b_t, b_l) = items.swap_remove(j);
            let (a_t, a_l) = items.swap_remove(i);
            let mut pairs = vec![];
            for (x, la) in a_l.iter().enumerate() {
                if let Leg::Bond(bid) = la {
                    if let Some(y) = b_l.iter().position(|lb| *lb == Leg::Bond(*bid)) {
                        pairs.push((x, y));
                    }
                }
            }
            let t = contract(&a_t, &b_t, &IndexPairing::new(pairs.clone()))?;
            let legs: Vec<Leg> = a_l
                .iter()
                .enumerate()
                .filter(|(x, _)| !pairs.iter().any(|p| p.0 == *x))
                .map(|(_, l)| *l)
                .chain(
                    b_l.iter()
                        .enumerate()
                        .filter(|(y, _)| !pairs.iter().any(|p| p.1 == *y))
                        .map(|(_, l)| *l),
                )
                .collect();
            items.push((t, legs));
        }
        let (t, legs) = items.pop().expect("one item left");
        let mut order: Vec<usize> = (0..legs.len()).collect();
        order.sort_by_key(|&k| match legs[k] {
            Leg::Physical { qubit, .. } => (0, qubit),
            Leg::Bond(b) => (1, b),
        });
        let legs = order.iter().map(|&k| legs[k]).collect();
        Ok((t.permute(&order), legs))
    }

    /// Full contraction; axes are the physical qubits in ascending order.
    pub fn contract_all(&self) -> Result<ComplexTensor> {
        let ids: Vec<usize> = (0..self.tensors.len()).collect();
        let (t, legs) = self.contract_subset(&ids)?;
        if legs.iter().any(|l| matches!(l, Leg::Bond(_))) {
            return Err(Error::InvalidTensor("network has dangling bonds".into()));
        }
        Ok(t)
    }
}

fn shared_bonds(a: &[Leg], b: &[Leg]) -> Vec<usize> {
    a.iter()
        .filter_map(Leg::bond)
        .filter(|x| b.contains(&Leg::Bond(*x)))
        .collect()
}

/// Greedy choice: connected pair with the smallest result; else the two smallest tensors.
fn pick_pair(items: &[(ComplexTensor, Vec<Leg>)]) -> (usize, usize) {
    let mut best: Option<(usize, usize, usize)> = None;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let shared = shared_bonds(&items[i].1, &items[j].1);
            if shared.is_empty() {
                continue;
            }
            let mut shared_dim = 1usize;
            for b in &shared {
                let a = items[i].1.iter().position(|l| *l == Leg::Bond(*b)).unwrap();
                shared_dim *= items[i].0.dims()[a];
            }
            let size = items[i].0.len() / shared_dim * (items[j].0.len() / shared_dim);
            if best.map_or(true, |b| size < b.2) {
                best = Some((i, j, size));
            }
        }
    }
    if let Some((i, j, _)) = best {
        return (i, j);
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by_key(|&k| (items[k].0.len(), k));
    let (i, j) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
    (i, j)
}
