//! Brickwork graph states with H·Z(θ) local matrices.
//!
//! cargo run --example brickwork

use qgm::compiler::{brickwork_graph, build_brickwork, BRICKWORK_ANGLES};
use qgm::inference::visible_distribution;

fn main() -> qgm::Result<()> {
    let (rows, cols) = (2, 9);
    let g = brickwork_graph(rows, cols)?;
    println!("{rows}x{cols} brickwork: {} edges, max degree {}", g.edges().len(), g.max_degree());
    for r in 0..rows - 1 {
        let cols_linked: Vec<usize> = (0..cols)
            .filter(|&c| g.neighbors(r * cols + c).contains(&((r + 1) * cols + c)))
            .collect();
        println!("  rows {r}-{}: vertical links at columns {cols_linked:?}", r + 1);
    }
    let thetas: Vec<f64> = (0..rows * cols).map(|i| BRICKWORK_ANGLES[i % 2]).collect();
    let p = visible_distribution(&build_brickwork(rows, cols, &thetas)?)?;
    let support = p.iter().filter(|&&w| w > 1e-12).count();
    let entropy: f64 = -p.iter().filter(|&&w| w > 0.0).map(|w| w * w.log2()).sum::<f64>();
    println!("angles alternate 0, pi/4: {support} of {} outcomes have weight, entropy {entropy:.4} bits", p.len());
    let single = visible_distribution(&build_brickwork(1, 1, &[std::f64::consts::FRAC_PI_4])?)?;
    println!("single site at pi/4: P(0) = {:.6} = (1 + cos(pi/4))/2", single[0]);
    Ok(())
}
