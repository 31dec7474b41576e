//! Exact simulation of recursive phase-estimation state preparation: a sequence of
//! partially contracted network states, idealized projective measurements onto
//! consecutive states, and a cost model charging n^d / Δ per measurement.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    spectrum, tn_parent_terms_windows, verify_frustration_free, LocalTerm, ParentHamiltonian, Spectrum,
};
use crate::model::Grouping;
use crate::tensor::{statevec, Leg, TensorNetwork};

/// Probabilities this close to 0 or 1 are snapped so a vanishing branch is never sampled.
const SNAP: f64 = 1e-13;
pub const FIDELITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StateSequence {
    pub n_qubits: usize,
    /// |Q₀⟩ … |Q_n⟩, unnormalized, on the full register.
    pub states: Vec<Vec<C64>>,
    /// Group index added at each stage (empty when built from raw states).
    pub order: Vec<usize>,
}

impl StateSequence {
    pub fn from_states(n_qubits: usize, states: Vec<Vec<C64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidTensor("empty state sequence".into()));
        }
        let dim = 1usize << n_qubits;
        for (t, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::InvalidTensor(format!("state {t} has length {}, want {dim}", s.len())));
            }
            if statevec::norm_sqr(s) == 0.0 {
                return Err(Error::ZeroIntermediate { stage: t });
            }
        }
        let q0 = &states[0];
        if q0[1..].iter().any(|z| z.norm() > 1e-12 * q0[0].norm()) {
            return Err(Error::InvalidTensor("first state must be the all-zeros product state".into()));
        }
        Ok(Self {
            n_qubits,
            states,
            order: vec![],
        })
    }

    /// Number of stages (states minus one).
    pub fn stages(&self) -> usize {
        self.states.len() - 1
    }

    pub fn normalized(&self, t: usize) -> Vec<C64> {
        statevec::normalized(&self.states[t])
    }
}

fn resolve_order(grouping: &Grouping, order: Option<&[usize]>) -> Result<Vec<usize>> {
    let n = grouping.len();
    let order: Vec<usize> = order.map_or_else(|| (0..n).collect(), <[usize]>::to_vec);
    let mut seen = vec![false; n];
    for &g in &order {
        if g >= n || std::mem::replace(&mut seen[g], true) {
            return Err(Error::InvalidTensor(format!("order must list each of {n} groups once")));
        }
    }
    if order.len() != n {
        return Err(Error::InvalidTensor(format!("order must list each of {n} groups once")));
    }
    Ok(order)
}

fn included_tensors(grouping: &Grouping, order: &[usize], t: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = order[..t].iter().flat_map(|&g| grouping.groups[g].iter().copied()).collect();
    ids.sort();
    ids
}

/// Network with every bond between `ids` and the rest fixed to 0.
fn cut_network(tn: &TensorNetwork, ids: &[usize]) -> TensorNetwork {
    let fixes: Vec<(usize, usize)> = tn
        .bond_owners()
        .into_iter()
        .filter(|(_, o)| o.len() == 2 && ids.contains(&o[0]) != ids.contains(&o[1]))
        .map(|(b, _)| (b, 0))
        .collect();
    tn.fix_bonds(&fixes)
}

fn qubit_positions(tn: &TensorNetwork, ids: &[usize]) -> Vec<usize> {
    let qubits = tn.qubits();
    tn.physical_legs()
        .into_iter()
        .filter(|(_, _, ti)| ids.contains(ti))
        .map(|(q, _, _)| qubits.binary_search(&q).expect("qubit in network"))
        .collect()
}

pub fn state_sequence(tn: &TensorNetwork, grouping: &Grouping) -> Result<StateSequence> {
    state_sequence_with_order(tn, grouping, None)
}

/// |Q_t⟩ contracts the first t groups of `order` with cut bonds fixed to 0 and |0⟩ on
/// every other qubit.
pub fn state_sequence_with_order(
    tn: &TensorNetwork,
    grouping: &Grouping,
    order: Option<&[usize]>,
) -> Result<StateSequence> {
    let order = resolve_order(grouping, order)?;
    let n = tn.qubits().len();
    let mut states = vec![statevec::basis_state(n, 0)];
    for t in 1..=order.len() {
        let ids = included_tensors(grouping, &order, t);
        let cut = cut_network(tn, &ids);
        let (l, legs) = cut.contract_subset(&ids)?;
        if legs.iter().any(|l| matches!(l, Leg::Bond(_))) {
            return Err(Error::InvalidTensor("cut network still has dangling bonds".into()));
        }
        let positions = qubit_positions(tn, &ids);
        let v = statevec::embed_zero_fill(l.data(), n, &positions);
        if statevec::norm_sqr(&v) == 0.0 {
            return Err(Error::ZeroIntermediate { stage: t });
        }
        states.push(v);
    }
    Ok(StateSequence {
        n_qubits: n,
        states,
        order,
    })
}

/// Stage-t Hamiltonian: range complements of windows over the included groups plus
/// |1⟩⟨1| pins on the untouched qubits. `merged` uses one window holding every included group.
pub fn stage_hamiltonian(
    tn: &TensorNetwork,
    grouping: &Grouping,
    order: &[usize],
    t: usize,
    merged: bool,
) -> Result<ParentHamiltonian> {
    let n = tn.qubits().len();
    let ids = included_tensors(grouping, order, t);
    let mut terms = vec![];
    if t > 0 {
        let windows: Vec<Vec<usize>> = if merged || t == 1 {
            vec![ids.clone()]
        } else {
            order[..t]
                .windows(2)
                .map(|w| {
                    let mut v: Vec<usize> = grouping.groups[w[0]].iter().chain(&grouping.groups[w[1]]).copied().collect();
                    v.sort();
                    v
                })
                .collect()
        };
        terms = tn_parent_terms_windows(&cut_network(tn, &ids), &windows)?.terms;
    }
    let inside = qubit_positions(tn, &ids);
    terms.extend((0..n).filter(|q| !inside.contains(q)).map(|q| LocalTerm::pin(q, 1)));
    ParentHamiltonian::new(n, terms)
}

#[derive(Clone, Debug)]
pub struct PreparationProblem {
    pub seq: StateSequence,
    pub hams: Vec<ParentHamiltonian>,
    /// Stages whose pair-window Hamiltonian was degenerate and got replaced by a merged window.
    pub merged: Vec<bool>,
}

fn uniquely_grounds(s: &Spectrum, target: &[C64]) -> bool {
    s.degeneracy == 1 && s.ground_energy.abs() <= 1e-9 && statevec::fidelity(&s.ground_vector, target) >= 1.0 - FIDELITY_TOL
}

/// Sequence plus stage Hamiltonians for a network, falling back to a merged window at
/// any stage where the pair-window terms leave a degenerate ground space.
pub fn network_problem(tn: &TensorNetwork, grouping: &Grouping, order: Option<&[usize]>) -> Result<PreparationProblem> {
    let seq = state_sequence_with_order(tn, grouping, order)?;
    let mut hams = vec![];
    let mut merged = vec![];
    for t in 0..seq.states.len() {
        let h = stage_hamiltonian(tn, grouping, &seq.order, t, false)?;
        if uniquely_grounds(&spectrum(&h)?, &seq.states[t]) {
            hams.push(h);
            merged.push(false);
        } else {
            hams.push(stage_hamiltonian(tn, grouping, &seq.order, t, true)?);
            merged.push(true);
        }
    }
    Ok(PreparationProblem { seq, hams, merged })
}

/// η_t = |⟨Q̂_t|Q̂_{t−1}⟩|² for t = 1..n.
pub fn overlaps(seq: &StateSequence) -> Vec<f64> {
    seq.states
        .windows(2)
        .map(|w| statevec::fidelity(&w[0], &w[1]).clamp(0.0, 1.0))
        .collect()
}

/// Projective measurement {|t⟩⟨t|, I − |t⟩⟨t|} for normalized `target`.
/// Returns (outcome, normalized post-state, probability of that outcome).
pub fn measure_projector<R: Rng + ?Sized>(state: &[C64], target: &[C64], rng: &mut R) -> Result<(u8, Vec<C64>, f64)> {
    let norm = statevec::norm_sqr(state);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let amp = statevec::inner(target, state);
    let mut p1 = (amp.norm_sqr() / norm).clamp(0.0, 1.0);
    if p1 > 1.0 - SNAP {
        p1 = 1.0;
    } else if p1 < SNAP {
        p1 = 0.0;
    }
    let u: f64 = rng.random();
    if u < p1 {
        Ok((1, target.to_vec(), p1))
    } else {
        let rest: Vec<C64> = state.iter().zip(target).map(|(s, t)| s - t * amp).collect();
        Ok((0, statevec::normalized(&rest), 1.0 - p1))
    }
}

/// Closed form 1/η + 1.
pub fn expected_substeps(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(1.0 / eta + 1.0)
}

/// η + Σ_k (4k+6)(1−η)²η(η²+(1−η)²)^k, summed until terms fall below 1e-12 relative.
pub fn expected_substeps_series(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let q = eta * eta + (1.0 - eta) * (1.0 - eta);
    let c = (1.0 - eta).powi(2) * eta;
    let mut sum = eta;
    let mut qk = 1.0;
    for k in 0.. {
        let term = (4 * k + 6) as f64 * c * qk;
        sum += term;
        if term <= 1e-17 * sum && k > 0 || c == 0.0 {
            break;
        }
        qk *= q;
    }
    Ok(sum)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "eta",
            value: eta,
            limit: 1.0,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanOptions {
    /// Exponent d in the per-measurement charge n^d / Δ.
    pub cost_degree: u32,
    /// Require every stage Hamiltonian to have its state as unique zero-energy ground state.
    pub verify_unique: bool,
    pub substep_cap: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            cost_degree: 1,
            verify_unique: true,
            substep_cap: 1_000_000,
        }
    }
}

/// Per-stage quantities computed once: η, gaps, frustration checks.
#[derive(Clone, Debug)]
pub struct PreparationPlan {
    pub n_qubits: usize,
    targets: Vec<Vec<C64>>,
    /// η_t for stage t at index t−1.
    pub etas: Vec<f64>,
    /// Gap of H_t at index t (t = 0..n).
    pub gaps: Vec<f64>,
    pub degeneracies: Vec<usize>,
    pub frustration_free: Vec<bool>,
    pub options: PlanOptions,
}

impl PreparationPlan {
    pub fn new(seq: &StateSequence, hams: &[ParentHamiltonian], options: PlanOptions) -> Result<Self> {
        if hams.len() != seq.states.len() {
            return Err(Error::InvalidTensor(format!(
                "{} Hamiltonians for {} states",
                hams.len(),
                seq.states.len()
            )));
        }
        let etas = overlaps(seq);
        for (i, &eta) in etas.iter().enumerate() {
            if eta < SNAP && i > 0 {
                return Err(Error::DegenerateStage { stage: i + 1 });
            }
        }
        let mut gaps = vec![];
        let mut degeneracies = vec![];
        let mut frustration_free = vec![];
        for (t, h) in hams.iter().enumerate() {
            if h.n_qubits != seq.n_qubits {
                return Err(Error::InvalidTensor(format!("Hamiltonian {t} acts on {} qubits", h.n_qubits)));
            }
            let s = spectrum(h)?;
            if options.verify_unique && !uniquely_grounds(&s, &seq.states[t]) {
                return Err(Error::NotUnique {
                    stage: t,
                    degeneracy: s.degeneracy,
                });
            }
            frustration_free.push(verify_frustration_free(h, &seq.states[t])?.pass);
            gaps.push(s.gap);
            degeneracies.push(s.degeneracy);
        }
        Ok(Self {
            n_qubits: seq.n_qubits,
            targets: (0..seq.states.len()).map(|t| seq.normalized(t)).collect(),
            etas,
            gaps,
            degeneracies,
            frustration_free,
            options,
        })
    }

    pub fn stages(&self) -> usize {
        self.etas.len()
    }

    pub fn target(&self, t: usize) -> &[C64] {
        &self.targets[t]
    }

    fn charge(&self, t: usize) -> f64 {
        let g = self.gaps[t];
        if g.is_finite() {
            (self.n_qubits as f64).powi(self.options.cost_degree as i32) / g
        } else {
            0.0
        }
    }

    pub fn run_seeded(&self, seed: u64, stream: u64) -> Result<(Vec<C64>, PreparationTrace)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let (state, mut trace) = self.run(&mut rng)?;
        trace.seed = Some(seed);
        trace.stream = Some(stream);
        Ok((state, trace))
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<C64>, PreparationTrace)> {
        let mut psi = self.targets[0].clone();
        let mut events = vec![];
        let mut stages = vec![];
        for t in 1..=self.stages() {
            let eta = self.etas[t - 1];
            let prev = &self.targets[t - 1];
            let target = &self.targets[t];
            let first_event = events.len();
            let mut rec = StageRecord {
                stage: t,
                eta,
                gap: self.gaps[t],
                gap_previous: self.gaps[t - 1],
                substeps: 0,
                cost: 0.0,
                direct: false,
                max_plane_residual: 0.0,
            };
            if eta < SNAP {
                // only reachable at t = 1 (checked in new)
                psi = target.clone();
                rec.direct = true;
                events.push(MeasurementEvent {
                    stage: t,
                    event_index: 0,
                    projector: "direct".into(),
                    outcome: 1,
                    probability: 1.0,
                    cost_units: 0.0,
                });
                stages.push(rec);
                continue;
            }
            let plane = plane_basis(prev, target);
            let mut measure = |psi: &mut Vec<C64>, which: usize, rec: &mut StageRecord| -> Result<u8> {
                let (outcome, post, p) = measure_projector(psi, &self.targets[which], rng)?;
                *psi = post;
                let cost = self.charge(which);
                rec.substeps += 1;
                rec.cost += cost;
                rec.max_plane_residual = rec.max_plane_residual.max(plane_residual(psi, &plane));
                events.push(MeasurementEvent {
                    stage: t,
                    event_index: events.len() - first_event,
                    projector: format!("Q{which}"),
                    outcome,
                    probability: p,
                    cost_units: cost,
                });
                Ok(outcome)
            };
            let mut done = measure(&mut psi, t, &mut rec)? == 1;
            while !done {
                if rec.substeps >= self.options.substep_cap {
                    return Err(Error::Solver(format!("stage {t} exceeded {} sub-steps", self.options.substep_cap)));
                }
                measure(&mut psi, t - 1, &mut rec)?;
                done = measure(&mut psi, t, &mut rec)? == 1;
            }
            stages.push(rec);
        }
        let final_fidelity = statevec::fidelity(&psi, &self.targets[self.stages()]);
        let total_cost = stages.iter().map(|s| s.cost).sum();
        Ok((
            psi,
            PreparationTrace {
                seed: None,
                stream: None,
                events,
                stages,
                total_cost,
                final_fidelity,
            },
        ))
    }

    /// Independent trials, trial i on ChaCha stream i of `seed`; results ordered by trial.
    pub fn run_trials(&self, seed: u64, trials: usize) -> Result<Vec<PreparationTrace>> {
        (0..trials as u64)
            .into_par_iter()
            .map(|i| self.run_seeded(seed, i).map(|r| r.1))
            .collect()
    }
}

fn plane_basis(a: &[C64], b: &[C64]) -> Vec<Vec<C64>> {
    let c = statevec::inner(a, b);
    let rest: Vec<C64> = b.iter().zip(a).map(|(x, y)| x - y * c).collect();
    if statevec::norm_sqr(&rest) < 1e-24 {
        vec![a.to_vec()]
    } else {
        vec![a.to_vec(), statevec::normalized(&rest)]
    }
}

fn plane_residual(psi: &[C64], plane: &[Vec<C64>]) -> f64 {
    let mut r = psi.to_vec();
    for e in plane {
        let c = statevec::inner(e, &r);
        for (x, y) in r.iter_mut().zip(e) {
            *x -= y * c;
        }
    }
    statevec::norm_sqr(&r).sqrt()
}

/// Full sequence run: plan once, then one trajectory.
pub fn prepare<R: Rng + ?Sized>(
    seq: &StateSequence,
    hams: &[ParentHamiltonian],
    rng: &mut R,
    cost_degree: u32,
) -> Result<(Vec<C64>, PreparationTrace)> {
    let plan = PreparationPlan::new(
        seq,
        hams,
        PlanOptions {
            cost_degree,
            ..Default::default()
        },
    )?;
    plan.run(rng)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementEvent {
    pub stage: usize,
    pub event_index: usize,
    /// `Q{k}` for the projector onto stage k's state, `direct` for a constructed stage.
    pub projector: String,
    pub outcome: u8,
    /// Probability of the observed outcome.
    pub probability: f64,
    pub cost_units: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub eta: f64,
    pub gap: f64,
    pub gap_previous: f64,
    pub substeps: usize,
    pub cost: f64,
    /// Stage built directly because its overlap with the previous state vanished.
    pub direct: bool,
    /// Largest distance of a post-measurement state from span{Q̂_{t−1}, Q̂_t}.
    pub max_plane_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreparationTrace {
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub events: Vec<MeasurementEvent>,
    pub stages: Vec<StageRecord>,
    pub total_cost: f64,
    pub final_fidelity: f64,
}

impl PreparationTrace {
    /// Line-delimited records after a `#` comment line.
    pub fn to_csv(&self, comment: &str) -> String {
        let mut out = format!("# {comment}\nstage,event_index,projector,outcome,probability,cost_units\n");
        for e in &self.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{:e}",
                e.stage, e.event_index, e.projector, e.outcome, e.probability, e.cost_units
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    pub eta: f64,
    pub gap: f64,
    pub gap_previous: f64,
    /// None when η = 0 (stage constructed directly).
    pub expected_substeps: Option<f64>,
    pub mean_substeps: f64,
    pub direct: bool,
    pub frustration_free: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreparationSummary {
    pub trials: usize,
    pub stages: Vec<StageSummary>,
    pub mean_total_cost: f64,
    pub min_final_fidelity: f64,
}

pub fn summarize(plan: &PreparationPlan, traces: &[PreparationTrace]) -> PreparationSummary {
    let n = traces.len().max(1) as f64;
    let stages = (1..=plan.stages())
        .map(|t| StageSummary {
            stage: t,
            eta: plan.etas[t - 1],
            gap: plan.gaps[t],
            gap_previous: plan.gaps[t - 1],
            expected_substeps: expected_substeps(plan.etas[t - 1]).ok(),
            mean_substeps: traces.iter().map(|tr| tr.stages[t - 1].substeps as f64).sum::<f64>() / n,
            direct: traces.first().is_some_and(|tr| tr.stages[t - 1].direct),
            frustration_free: plan.frustration_free[t],
        })
        .collect();
    PreparationSummary {
        trials: traces.len(),
        stages,
        mean_total_cost: traces.iter().map(|t| t.total_cost).sum::<f64>() / n,
        min_final_fidelity: traces.iter().map(|t| t.final_fidelity).fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn minus_projector() -> LocalTerm {
        LocalTerm::new(vec![0], DMatrix::from_row_slice(2, 2, &[c(0.5), c(-0.5), c(-0.5), c(0.5)])).unwrap()
    }

    /// |0⟩ → |+⟩: a single stage with η = 1/2.
    pub(crate) fn half_overlap_problem() -> (StateSequence, Vec<ParentHamiltonian>) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let seq = StateSequence::from_states(1, vec![vec![c(1.0), c(0.0)], vec![c(h), c(h)]]).unwrap();
        let hams = vec![
            ParentHamiltonian::new(1, vec![LocalTerm::pin(0, 1)]).unwrap(),
            ParentHamiltonian::new(1, vec![minus_projector()]).unwrap(),
        ];
        (seq, hams)
    }

    #[test]
    fn expected_substeps_examples() {
        assert_eq!(expected_substeps(1.0).unwrap(), 2.0);
        assert_eq!(expected_substeps(0.5).unwrap(), 3.0);
        assert!(expected_substeps(0.0).is_err());
        for k in 1..=19 {
            let eta = k as f64 * 0.05;
            let a = expected_substeps(eta).unwrap();
            let b = expected_substeps_series(eta).unwrap();
            assert!((a - b).abs() < 1e-10, "η={eta}: {a} vs {b}");
        }
    }

    #[test]
    fn measure_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = vec![c(1.0), c(0.0)];
        let (o, post, p) = measure_projector(&t, &t, &mut rng).unwrap();
        assert_eq!((o, p), (1, 1.0));
        assert_eq!(post, t);
        let (o, post, p) = measure_projector(&[c(0.0), c(2.0)], &t, &mut rng).unwrap();
        assert_eq!((o, p), (0, 1.0));
        assert!((post[1] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn measure_three_quarters_frequency() {
        let s3 = 0.75f64.sqrt();
        let state = vec![c(s3), c(0.5)];
        let target = vec![c(1.0), c(0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| measure_projector(&state, &target, &mut rng).unwrap().0 == 1)
            .count();
        let f = hits as f64 / n as f64;
        let sigma = (0.75 * 0.25 / n as f64).sqrt();
        assert!((f - 0.75).abs() < 3.0 * sigma, "{f}");
    }

    #[test]
    fn identical_stages_take_one_substep() {
        let z = vec![c(1.0), c(0.0)];
        let seq = StateSequence::from_states(1, vec![z.clone(), z.clone(), z]).unwrap();
        let h = ParentHamiltonian::new(1, vec![LocalTerm::pin(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, trace) = prepare(&seq, &[h.clone(), h.clone(), h], &mut rng, 1).unwrap();
        assert!(trace.stages.iter().all(|s| s.substeps == 1));
        assert!((trace.final_fidelity - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_overlap_stage_mean() {
        let (seq, hams) = half_overlap_problem();
        let plan = PreparationPlan::new(&seq, &hams, PlanOptions::default()).unwrap();
        assert!((plan.etas[0] - 0.5).abs() < 1e-15);
        let traces = plan.run_trials(3, 20_000).unwrap();
        let xs: Vec<f64> = traces.iter().map(|t| t.stages[0].substeps as f64).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mean - 3.0).abs() < 3.0 * (var / xs.len() as f64).sqrt(), "{mean}");
        for t in &traces {
            assert!(t.stages[0].max_plane_residual < 1e-10);
            let charged: f64 = t.events.iter().map(|e| e.cost_units).sum();
            assert_eq!(charged, t.total_cost);
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let (seq, hams) = half_overlap_problem();
        let plan = PreparationPlan::new(&seq, &hams, PlanOptions::default()).unwrap();
        let a = plan.run_seeded(11, 4).unwrap().1;
        let b = plan.run_seeded(11, 4).unwrap().1;
        assert_eq!(a.to_csv("x"), b.to_csv("x"));
    }

    #[test]
    fn orthogonal_later_stage_rejected() {
        let z = vec![c(1.0), c(0.0)];
        let o = vec![c(0.0), c(1.0)];
        let seq = StateSequence::from_states(1, vec![z.clone(), z, o]).unwrap();
        let h0 = ParentHamiltonian::new(1, vec![LocalTerm::pin(0, 1)]).unwrap();
        let h2 = ParentHamiltonian::new(1, vec![LocalTerm::pin(0, 0)]).unwrap();
        let r = PreparationPlan::new(&seq, &[h0.clone(), h0, h2], PlanOptions::default());
        assert!(matches!(r, Err(Error::DegenerateStage { stage: 2 })));
    }

    #[test]
    fn orthogonal_first_stage_constructed() {
        let seq = StateSequence::from_states(1, vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]]).unwrap();
        let hams = vec![
            ParentHamiltonian::new(1, vec![LocalTerm::pin(0, 1)]).unwrap(),
            ParentHamiltonian::new(1, vec![LocalTerm::pin(0, 0)]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, trace) = prepare(&seq, &hams, &mut rng, 1).unwrap();
        assert!(trace.stages[0].direct);
        assert_eq!(trace.events[0].projector, "direct");
    }

    #[test]
    fn network_sequence_ends_at_conditioned_state() {
        use crate::model::{group_tensors, project_conditioned, tensor_network_of, Assignment, Graph, LocalMatrix, QgmModel};
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], &[0, 1, 2, 3]).unwrap();
        let mats = vec![
            LocalMatrix::new(c(1.0), C64::new(0.2, 0.1), c(-0.3), c(0.8)),
            LocalMatrix::diag(1.2, 0.7),
            LocalMatrix::new(c(0.9), c(0.4), C64::new(0.0, 0.5), c(1.1)),
            LocalMatrix::identity(),
        ];
        let model = QgmModel::new(g, mats).unwrap();
        let z = Assignment::from_pairs(&[(3, 0)]);
        let tn = tensor_network_of(&model, &z).unwrap();
        let grouping = group_tensors(&tn).unwrap();
        let problem = network_problem(&tn, &grouping, None).unwrap();
        let want = project_conditioned(&model, &z).unwrap();
        let last = problem.seq.states.last().unwrap();
        assert!(last.iter().zip(want.data()).all(|(a, b)| (a - b).norm() < 1e-10));
        let plan = PreparationPlan::new(&problem.seq, &problem.hams, PlanOptions::default()).unwrap();
        assert!(plan.frustration_free.iter().all(|&f| f));
        let (psi, trace) = plan.run_seeded(5, 0).unwrap();
        assert!(trace.final_fidelity > 1.0 - 1e-9);
        assert!(statevec::fidelity(&psi, last) > 1.0 - 1e-9);
    }
}
