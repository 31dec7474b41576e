//! Marginals and conditionals of a QGM with hidden vertices.
//!
//! cargo run --example conditional_inference

use qgm::inference::{conditional, marginal};
use qgm::model::{Assignment, Graph, LocalMatrix, QgmModel};
use qgm::C64;

fn main() -> qgm::Result<()> {
    // a ring of five qubits, vertices 1 and 3 hidden
    let g = Graph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], &[0, 2, 4])?;
    let c = |re: f64, im: f64| C64::new(re, im);
    let mats = vec![
        LocalMatrix::new(c(1.0, 0.0), c(0.3, 0.1), c(-0.2, 0.0), c(0.9, 0.2)),
        LocalMatrix::new(c(0.7, 0.0), c(0.0, 0.5), c(0.4, 0.0), c(1.1, 0.0)),
        LocalMatrix::diag(1.4, 0.6),
        LocalMatrix::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
        LocalMatrix::new(c(0.5, 0.5), c(0.0, 0.0), c(0.2, -0.3), c(1.0, 0.0)),
    ];
    let model = QgmModel::new(g, mats)?;

    println!("marginals of visible vertex 0:");
    for b in 0..2u8 {
        println!("  P(x0 = {b}) = {:.6}", marginal(&model, &Assignment::from_pairs(&[(0, b)]))?);
    }
    println!("conditionals of (x0, x2) given x4:");
    for z in 0..2u8 {
        let given = Assignment::from_pairs(&[(4, z)]);
        let mut total = 0.0;
        for x in 0..4u8 {
            let xs = Assignment::from_pairs(&[(0, x >> 1), (2, x & 1)]);
            let p = conditional(&model, &xs, &given)?;
            total += p;
            println!("  P(x0 = {}, x2 = {} | x4 = {z}) = {p:.6}", x >> 1, x & 1);
        }
        println!("  sum = {total:.12}");
    }
    Ok(())
}
