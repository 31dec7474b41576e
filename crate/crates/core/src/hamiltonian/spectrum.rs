use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ParentHamiltonian;
use crate::error::{Error, Result};
use crate::tensor::statevec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    /// Largest register diagonalized densely; Lanczos above.
    pub dense_max_qubits: usize,
    pub max_qubits: usize,
    /// Relative degeneracy threshold, multiplied by the Hamiltonian's term scale.
    pub degeneracy_tol: f64,
    /// Most eigenpairs Lanczos extracts while resolving the ground cluster.
    pub max_levels: usize,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            dense_max_qubits: 10,
            max_qubits: crate::model::DEFAULT_QUBIT_CAP,
            degeneracy_tol: 1e-8,
            max_levels: 24,
            krylov_dim: 80,
            max_restarts: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub ground_energy: f64,
    /// Distance from E₀ to the first level outside the degenerate ground cluster
    /// (infinite when the cluster fills the space).
    pub gap: f64,
    /// Normalized vector in the ground space.
    pub ground_vector: Vec<C64>,
    pub degeneracy: usize,
    pub dense: bool,
}

pub fn spectrum(h: &ParentHamiltonian) -> Result<Spectrum> {
    spectrum_with(h, SpectrumOptions::default())
}

pub fn spectrum_with(h: &ParentHamiltonian, opts: SpectrumOptions) -> Result<Spectrum> {
    if h.n_qubits > opts.max_qubits {
        return Err(Error::TooManyQubits {
            requested: h.n_qubits,
            cap: opts.max_qubits,
        });
    }
    let tol = opts.degeneracy_tol * h.term_scale();
    if h.n_qubits <= opts.dense_max_qubits {
        Ok(dense(h, tol))
    } else {
        lanczos_spectrum(h, tol, &opts)
    }
}

fn dense(h: &ParentHamiltonian, tol: f64) -> Spectrum {
    let m = h.to_dense();
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e0 = eig.eigenvalues[order[0]];
    let degeneracy = order.iter().take_while(|&&i| eig.eigenvalues[i] - e0 <= tol).count();
    let gap = order
        .get(degeneracy)
        .map_or(f64::INFINITY, |&i| eig.eigenvalues[i] - e0);
    let ground_vector = eig.eigenvectors.column(order[0]).iter().copied().collect();
    Spectrum {
        ground_energy: e0,
        gap,
        ground_vector,
        degeneracy,
        dense: true,
    }
}

fn lanczos_spectrum(h: &ParentHamiltonian, tol: f64, opts: &SpectrumOptions) -> Result<Spectrum> {
    let dim = 1usize << h.n_qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut found: Vec<(f64, Vec<C64>)> = vec![];
    let resid_tol = 1e-10 * h.term_scale();
    loop {
        if found.len() == dim || found.len() >= opts.max_levels {
            break;
        }
        let start: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let deflate: Vec<&[C64]> = found.iter().map(|f| f.1.as_slice()).collect();
        let pair = lowest_pair(h, start, &deflate, resid_tol, opts)?;
        let e = pair.0;
        found.push(pair);
        let e0 = found.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
        if e - e0 > tol {
            break;
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let e0 = found[0].0;
    let degeneracy = found.iter().take_while(|f| f.0 - e0 <= tol).count();
    if degeneracy == found.len() && found.len() < dim {
        return Err(Error::Solver(format!(
            "ground cluster exceeds {} resolved levels",
            opts.max_levels
        )));
    }
    let gap = found.get(degeneracy).map_or(f64::INFINITY, |f| f.0 - e0);
    Ok(Spectrum {
        ground_energy: e0,
        gap,
        ground_vector: found.swap_remove(0).1,
        degeneracy,
        dense: false,
    })
}

fn project_out(w: &mut [C64], basis: &[&[C64]]) {
    for b in basis {
        let c = statevec::inner(b, w);
        for (x, y) in w.iter_mut().zip(b.iter()) {
            *x -= c * y;
        }
    }
}

fn normalize(w: &mut [C64]) -> f64 {
    let n = statevec::norm_sqr(w).sqrt();
    if n > 0.0 {
        for x in w.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Lowest eigenpair of H restricted to the orthogonal complement of `deflate`,
/// by restarted Lanczos with full reorthogonalization.
fn lowest_pair(
    h: &ParentHamiltonian,
    start: Vec<C64>,
    deflate: &[&[C64]],
    resid_tol: f64,
    opts: &SpectrumOptions,
) -> Result<(f64, Vec<C64>)> {
    let dim = start.len();
    let kmax = opts.krylov_dim.min(dim - deflate.len()).max(1);
    let mut v0 = start;
    project_out(&mut v0, deflate);
    if normalize(&mut v0) == 0.0 {
        return Err(Error::Solver("start vector lies in the deflated space".into()));
    }
    let mut last = (f64::NAN, f64::INFINITY);
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<Vec<C64>> = vec![v0.clone()];
        let mut alpha = vec![];
        let mut beta: Vec<f64> = vec![];
        for j in 0..kmax {
            let mut w = h.apply(&basis[j]);
            project_out(&mut w, deflate);
            alpha.push(statevec::inner(&basis[j], &w).re);
            for _ in 0..2 {
                let refs: Vec<&[C64]> = basis.iter().map(|b| b.as_slice()).collect();
                project_out(&mut w, &refs);
                project_out(&mut w, deflate);
            }
            let b = normalize(&mut w);
            if j + 1 == kmax || b < 1e-12 {
                break;
            }
            beta.push(b);
            basis.push(w);
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = t.symmetric_eigen();
        let imin = (0..k)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .expect("nonempty");
        let mut x = vec![C64::new(0.0, 0.0); dim];
        for (i, b) in basis.iter().enumerate().take(k) {
            let c = eig.eigenvectors[(i, imin)];
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += bi * c;
            }
        }
        project_out(&mut x, deflate);
        normalize(&mut x);
        let mut r = h.apply(&x);
        project_out(&mut r, deflate);
        let theta = statevec::inner(&x, &r).re;
        for (ri, xi) in r.iter_mut().zip(&x) {
            *ri -= xi * theta;
        }
        let res = statevec::norm_sqr(&r).sqrt();
        if res <= resid_tol * theta.abs().max(1.0) {
            return Ok((theta, x));
        }
        last = (theta, res);
        v0 = x;
    }
    Err(Error::Solver(format!(
        "Lanczos did not converge (θ = {:e}, residual {:e})",
        last.0, last.1
    )))
}
