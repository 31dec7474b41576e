//! Compile a small Boltzmann machine into a QGM and compare distributions.
//!
//! cargo run --example compile_boltzmann

use qgm::compiler::{compile_factor_graph, compile_pairwise};
use qgm::factor_graph::{from_boltzmann_machine, total_variation};
use qgm::inference::visible_distribution;

fn main() -> qgm::Result<()> {
    let g = compile_pairwise(1.2, -0.4, 0.7)?;
    println!("gadget for (a, b, c) = (1.2, -0.4, 0.7):");
    for x in 0..4u8 {
        let (x1, x2) = (x >> 1, x & 1);
        let want = (1.2 * (x1 * x2) as f64 - 0.4 * x1 as f64 + 0.7 * x2 as f64).exp();
        println!("  f({x1},{x2}) = {:.12}  (exact {want:.12})", g.correlator(x1, x2));
    }

    let j = vec![
        vec![0.0, 0.8, -0.5, 0.0],
        vec![0.8, 0.0, 0.3, 1.1],
        vec![-0.5, 0.3, 0.0, -0.7],
        vec![0.0, 1.1, -0.7, 0.0],
    ];
    let h = [0.2, -0.3, 0.1, 0.4];
    let fg = from_boltzmann_machine(&j, &h)?;
    let model = compile_factor_graph(&fg)?;
    let p = fg.visible_distribution()?;
    let q = visible_distribution(&model)?;
    println!("\nBoltzmann machine on 4 spins -> QGM with {} qubits, {} edges", model.m(), model.graph.edges().len());
    println!("x     factor graph   QGM");
    for (x, (a, b)) in p.iter().zip(&q).enumerate() {
        println!("{x:04b}  {a:.10}   {b:.10}");
    }
    println!("total variation {:.3e}", total_variation(&p, &q));
    Ok(())
}
