//! Classical models rewritten as factor graphs, degree reduction, and k-ary decomposition.
//!
//! cargo run --example factor_graph_reductions

use qgm::compiler::{compile_factor_graph, to_pairwise};
use qgm::factor_graph::{
    from_bayesian_network, from_markov_random_field, from_rbm, reduce_degree, total_variation, Factor, FactorGraph,
    PairwiseExpFactor, Rbm,
};
use qgm::inference::visible_distribution;

fn main() -> qgm::Result<()> {
    let rbm = Rbm {
        weights: vec![vec![0.9, -0.4], vec![0.2, 0.6], vec![-0.8, 0.5]],
        visible_bias: vec![0.1, -0.2, 0.3],
        hidden_bias: vec![0.0, 0.4],
    };
    let fg = from_rbm(&rbm)?;
    let model = compile_factor_graph(&fg)?;
    let tv = total_variation(&fg.visible_distribution()?, &visible_distribution(&model)?);
    println!("RBM 3x2: {} factors, compiled to {} qubits, TV {tv:.2e}", fg.factors().len(), model.m());

    // sprinkler network: rain -> sprinkler, (rain, sprinkler) -> wet grass
    let parents = vec![vec![], vec![0], vec![0, 1]];
    let cpts = vec![
        vec![[0.8, 0.2]],
        vec![[0.6, 0.4], [0.99, 0.01]],
        vec![[1.0, 0.0], [0.1, 0.9], [0.2, 0.8], [0.01, 0.99]],
    ];
    let bn = from_bayesian_network(&parents, &cpts)?;
    let z: f64 = bn.weights()?.iter().sum();
    println!("Bayesian network: Z = {z:.15}, P(wet) = {:.4}", bn.visible_distribution()?.iter().skip(1).step_by(2).sum::<f64>());

    // a star with five leaves has a degree-5 centre
    let leaves = 5;
    let mut factors: Vec<Factor> = (1..=leaves)
        .map(|l| Factor::pairwise(0, l, PairwiseExpFactor { a: 0.7, b: 0.1, c: -0.2 }))
        .collect();
    factors.push(Factor::unary(0, 0.3));
    let star = FactorGraph::new(leaves + 1, factors)?;
    let p = star.visible_distribution()?;
    println!("\nstar with {leaves} leaves, max degree {}", star.max_degree());
    for a in [5.0, 10.0, 20.0, 30.0] {
        let red = reduce_degree(&star, a)?;
        let tv = total_variation(&p, &red.visible_distribution()?);
        println!("  sharpness {a:>4}: {} vars, max degree {}, TV {tv:.3e}", red.n_vars(), red.max_degree());
    }

    // a 3-ary clique potential becomes pairwise factors plus hidden selectors
    let mrf = from_markov_random_field(3, &[vec![0, 1, 2]], &[vec![1.0, 2.0, 0.5, 1.5, 3.0, 0.7, 1.1, 2.2]])?;
    for a in [8.0, 14.0, 20.0] {
        let pw = to_pairwise(&mrf, a)?;
        let tv = total_variation(&mrf.visible_distribution()?, &pw.visible_distribution()?);
        println!("3-ary clique at sharpness {a:>4}: {} vars after decomposition, TV {tv:.3e}", pw.n_vars());
    }
    Ok(())
}
