//! Clock-encoded history states: overlaps, projector ranks, gap and the gradient encoding.
//!
//! cargo run --example history_state_demo

use qgm::history::{clock_gap, gradient_demo_fd, gradient_encoding_demo, pi_parts, psd_rank, verify_eta, Circuit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qgm::Result<()> {
    let c = Circuit::random_chain(5, &mut ChaCha8Rng::seed_from_u64(3));
    println!("random chain circuit with T = {} on {} qubits", c.t(), c.n_qubits());
    println!("t  eta                 1 - 1/t");
    for row in verify_eta(&c)? {
        println!("{}  {:<18.15}  {:.15}{}", row.t, row.eta, row.expected, if row.boundary { "  (boundary)" } else { "" });
    }
    let ranks: Vec<usize> = pi_parts(&c.gates[1].matrix).iter().map(psd_rank).collect();
    println!("projector ranks {ranks:?}");
    let gap = clock_gap(&c)?;
    println!("E0 = {:.2e}, gap = {:.6}, degeneracy {}, fidelity {:.12}", gap.ground_energy, gap.gap, gap.degeneracy, gap.fidelity);
    let demo = gradient_encoding_demo(&c)?;
    println!(
        "gradient at M = I: {:.12} = p0 - 1/2 with p0 = {:.12}; finite difference of the raw gradient {:.3e} away",
        demo.value,
        demo.p0,
        (gradient_demo_fd(&c, 1e-5)? - demo.raw).abs()
    );
    Ok(())
}
