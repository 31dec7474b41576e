//! Gradient-descent training of a compiled model on bitstring data.
//!
//! cargo run --example kl_training

use qgm::compiler::compile_factor_graph;
use qgm::factor_graph::{from_boltzmann_machine, total_variation};
use qgm::inference::{train, visible_distribution, DataSet, TrainOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> qgm::Result<()> {
    let target = from_boltzmann_machine(&[vec![0.0, 1.5, 0.0], vec![1.5, 0.0, -1.0], vec![0.0, -1.0, 0.0]], &[-0.5, 0.3, 0.2])?;
    let p = target.visible_distribution()?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records: Vec<Vec<u8>> = (0..400)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let x = p.iter().position(|&w| { acc += w; u < acc }).unwrap_or(p.len() - 1);
            (0..3).map(|k| ((x >> (2 - k)) & 1) as u8).collect()
        })
        .collect();
    let data = DataSet::new(3, records)?;

    let start = compile_factor_graph(&from_boltzmann_machine(&[vec![0.0, 0.1, 0.0], vec![0.1, 0.0, 0.1], vec![0.0, 0.1, 0.0]], &[0.0; 3])?)?;
    let mut emp = vec![0.0; 8];
    for r in &data.records {
        emp[(r[0] as usize) << 2 | (r[1] as usize) << 1 | r[2] as usize] += 1.0 / data.len() as f64;
    }
    let entropy: f64 = -emp.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum::<f64>();
    println!("empirical entropy {entropy:.6} (lower bound on -log L)");
    println!("start: TV to generator {:.4}", total_variation(&p, &visible_distribution(&start)?));

    let opts = TrainOptions { lr: 0.05, steps: 150, chi: 0.0, ..Default::default() };
    let out = train(&start, &data, &opts)?;
    for r in out.trace.iter().step_by(25) {
        println!("step {:>3}  -log L {:.6}  penalty {:>8.4}  max|grad| {:.3e}", r.step, r.objective, r.penalty, r.max_grad);
    }

    // χ > 0 pulls the matrices toward better conditioning at the expense of fit
    for chi in [0.0, 0.1, 0.5] {
        let out = train(&start, &data, &TrainOptions { chi, ..opts })?;
        let q = visible_distribution(&out.model)?;
        println!(
            "chi {chi:<4} final -log L {:.6}, TV to generator {:.4}, TV to data {:.4}",
            out.trace.last().unwrap().objective,
            total_variation(&p, &q),
            total_variation(&emp, &q)
        );
    }
    Ok(())
}
