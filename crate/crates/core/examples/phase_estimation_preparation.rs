//! Simulated recursive phase-estimation preparation of a conditioned QGM state.
//!
//! cargo run --example phase_estimation_preparation

use qgm::model::{group_tensors, tensor_network_of, Assignment, Graph, LocalMatrix, QgmModel};
use qgm::preparation::{network_problem, summarize, PlanOptions, PreparationPlan};
use qgm::C64;

fn main() -> qgm::Result<()> {
    let g = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], &(0..6).collect::<Vec<_>>())?;
    let mats = (0..6)
        .map(|i| LocalMatrix::new(C64::new(1.0, 0.0), C64::new(0.2 * i as f64, 0.0), C64::new(0.0, 0.3), C64::new(1.2, 0.0)))
        .collect();
    let model = QgmModel::new(g, mats)?;
    let z = Assignment::from_pairs(&[(1, 1), (3, 0), (5, 1)]);
    let tn = tensor_network_of(&model, &z)?;
    let grouping = group_tensors(&tn)?;
    let problem = network_problem(&tn, &grouping, None)?;
    let plan = PreparationPlan::new(&problem.seq, &problem.hams, PlanOptions::default())?;
    let traces = plan.run_trials(42, 2000)?;
    let summary = summarize(&plan, &traces);
    println!("{} stages on {} qubits, merged windows {:?}", plan.stages(), plan.n_qubits, problem.merged);
    println!("stage  eta      gap      mean sub-steps  expected");
    for s in &summary.stages {
        println!(
            "{:>5}  {:.4}  {:.4}  {:>14.4}  {}",
            s.stage,
            s.eta,
            s.gap,
            s.mean_substeps,
            s.expected_substeps.map_or("direct".into(), |e| format!("{e:.4}"))
        );
    }
    println!("mean total cost {:.3}, min final fidelity {:.12}", summary.mean_total_cost, summary.min_final_fidelity);
    Ok(())
}
