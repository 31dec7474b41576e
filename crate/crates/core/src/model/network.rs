use std::collections::BTreeSet;

use num_complex::Complex64 as C64;

use super::{Assignment, QgmModel};
use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Leg, NetTensor, TensorNetwork};

/// Network for |Q(z)⟩: one copy tensor per vertex (carrying M_v) and one
/// (−1)^{ab} tensor per edge. Conditioned vertices have their physical index fixed.
/// Edge e joins its lower endpoint through bond 2e and its upper endpoint through bond 2e+1.
pub fn tensor_network_of(model: &QgmModel, z: &Assignment) -> Result<TensorNetwork> {
    z.validate(model.m())?;
    let g = &model.graph;
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut tensors = Vec::with_capacity(g.m() + g.edges().len());
    for v in 0..g.m() {
        let mut bonds = vec![];
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            if a == v {
                bonds.push(2 * e);
            } else if b == v {
                bonds.push(2 * e + 1);
            }
        }
        let k = bonds.len();
        let mat = model.matrices[v].entries();
        let rows: Vec<usize> = match z.get(v) {
            Some(bit) => vec![bit as usize],
            None => vec![0, 1],
        };
        let mut dims = vec![];
        let mut legs = vec![];
        if z.get(v).is_none() {
            dims.push(2);
            legs.push(Leg::Physical { qubit: v, site: v });
        }
        dims.extend(std::iter::repeat(2).take(k));
        legs.extend(bonds.iter().map(|&b| Leg::Bond(b)));
        let mut t = ComplexTensor::zeros(dims.clone());
        let mut data = t.data().to_vec();
        let block = 1usize << k;
        let all_ones = block - 1;
        for (ri, &p) in rows.iter().enumerate() {
            for s in 0..2usize {
                let bonds_idx = if s == 0 { 0 } else { all_ones };
                data[ri * block + bonds_idx] += mat[(p, s)] * amp;
            }
        }
        t = ComplexTensor::from_parts(dims, data);
        tensors.push(NetTensor::new(t, legs, format!("M{v}")));
    }
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        let one = C64::new(1.0, 0.0);
        let t = ComplexTensor::from_parts(vec![2, 2], vec![one, one, one, -one]);
        tensors.push(NetTensor::new(
            t,
            vec![Leg::Bond(2 * e), Leg::Bond(2 * e + 1)],
            format!("CZ{a}-{b}"),
        ));
    }
    TensorNetwork::new(tensors)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupingOptions {
    /// Max bonds allowed between any two groups.
    pub bond_budget: usize,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        Self { bond_budget: 4 }
    }
}

/// Partition of a network's tensors; group g holds the single unconditioned site `sites[g]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    pub groups: Vec<Vec<usize>>,
    pub sites: Vec<usize>,
}

impl Grouping {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_of(&self, tensor: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&tensor))
    }
}

pub fn group_tensors(tn: &TensorNetwork) -> Result<Grouping> {
    group_tensors_with(tn, GroupingOptions::default())
}

/// Layered multi-source BFS from the tensors carrying each site; a tensor reached
/// by several groups in the same layer joins the lowest one. Tensors in components
/// without any site join group 0.
pub fn group_tensors_with(tn: &TensorNetwork, opts: GroupingOptions) -> Result<Grouping> {
    let sites = tn.sites();
    if sites.is_empty() {
        return Err(Error::Unsupported("network has no unconditioned site".into()));
    }
    let n = tn.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (_, site, ti) in tn.physical_legs() {
        let g = sites.binary_search(&site).expect("site listed");
        match owner[ti] {
            Some(h) if h != g => {
                return Err(Error::Unsupported(format!(
                    "tensor {ti} carries two sites ({} and {site})",
                    sites[h]
                )))
            }
            _ => owner[ti] = Some(g),
        }
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|i| tn.neighbors(i)).collect();
    let mut frontier: BTreeSet<usize> = (0..n).filter(|&i| owner[i].is_some()).collect();
    while !frontier.is_empty() {
        let mut next: Vec<(usize, usize)> = vec![];
        for i in 0..n {
            if owner[i].is_some() {
                continue;
            }
            let best = adj[i]
                .iter()
                .filter(|j| frontier.contains(j))
                .filter_map(|&j| owner[j])
                .min();
            if let Some(g) = best {
                next.push((i, g));
            }
        }
        frontier.clear();
        for (i, g) in next {
            owner[i] = Some(g);
            frontier.insert(i);
        }
    }
    let mut groups = vec![vec![]; sites.len()];
    for (i, o) in owner.iter().enumerate() {
        groups[o.unwrap_or(0)].push(i);
    }
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let bonds = tn.bonds_between(&groups[a], &groups[b]);
            if bonds > opts.bond_budget {
                return Err(Error::GroupingInfeasible {
                    left: a,
                    right: b,
                    bonds,
                    budget: opts.bond_budget,
                });
            }
        }
    }
    Ok(Grouping { groups, sites })
}

#[cfg(test)]
mod tests {
    use super::super::{project_conditioned, Graph, LocalMatrix};
    use super::*;

    fn model(m: usize, edges: &[(usize, usize)]) -> QgmModel {
        let g = Graph::new(m, edges, &(0..m).collect::<Vec<_>>()).unwrap();
        let mats = (0..m)
            .map(|v| {
                let x = v as f64;
                LocalMatrix::new(
                    C64::new(1.0 + 0.1 * x, 0.2),
                    C64::new(-0.3, 0.1 * x),
                    C64::new(0.4, -0.2),
                    C64::new(0.9, 0.3 - 0.05 * x),
                )
            })
            .collect();
        QgmModel::new(g, mats).unwrap()
    }

    #[test]
    fn single_vertex_network() {
        let g = Graph::new(1, &[], &[0]).unwrap();
        let m = QgmModel::new(g, vec![LocalMatrix::identity()]).unwrap();
        let tn = tensor_network_of(&m, &Assignment::new()).unwrap();
        assert_eq!(tn.len(), 1);
        let s = tn.contract_all().unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.data()[0] - C64::new(h, 0.0)).norm() < 1e-15);
        assert!((s.data()[1] - C64::new(h, 0.0)).norm() < 1e-15);
        assert_eq!(group_tensors(&tn).unwrap().groups, vec![vec![0]]);
    }

    #[test]
    fn edge_model_all_conditionings() {
        let m = model(2, &[(0, 1)]);
        for z in [
            Assignment::new(),
            Assignment::from_pairs(&[(0, 1)]),
            Assignment::from_pairs(&[(1, 0)]),
            Assignment::from_pairs(&[(0, 1), (1, 1)]),
        ] {
            let a = tensor_network_of(&m, &z).unwrap().contract_all().unwrap();
            let b = project_conditioned(&m, &z).unwrap();
            assert_eq!(a.dims(), b.dims());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn path_grouping_pairs_conditioned_with_unconditioned() {
        let m = model(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let z = Assignment::from_pairs(&[(1, 0), (3, 1), (5, 0)]);
        let tn = tensor_network_of(&m, &z).unwrap();
        let gr = group_tensors(&tn).unwrap();
        assert_eq!(gr.sites, vec![0, 2, 4]);
        // vertex tensors are ids 0..6, edge tensors 6..11
        for (g, pair) in [(0usize, [0usize, 1]), (1, [2, 3]), (2, [4, 5])] {
            for v in pair {
                assert_eq!(gr.group_of(v), Some(g));
            }
        }
        for a in 0..3 {
            for b in a + 1..3 {
                let want = usize::from(b == a + 1);
                assert_eq!(tn.bonds_between(&gr.groups[a], &gr.groups[b]), want);
            }
        }
    }

    #[test]
    fn bond_budget_enforced() {
        // star: each leaf group shares one bond with the centre group
        let m = model(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        let tn = tensor_network_of(&m, &Assignment::new()).unwrap();
        assert!(group_tensors(&tn).is_ok());
        let err = group_tensors_with(&tn, GroupingOptions { bond_budget: 0 }).unwrap_err();
        assert!(matches!(err, Error::GroupingInfeasible { left: 0, right: 1, bonds: 1, budget: 0 }));
    }
}
