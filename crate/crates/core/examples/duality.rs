//! The active input subspace of a system is the optimal output subspace of
//! its adjoint realization (Aᵀ, Cᵀ, Bᵀ, Dᵀ).

use hankel_nwidth::system::{generate, Model};
use hankel_nwidth::widths::duality_check;

fn main() -> hankel_nwidth::Result<()> {
    let sys = generate(
        &Model::RandomStable { inputs: 2, outputs: 1, margin: 0.5 },
        6,
        5,
    )?
    .into_lti()
    .unwrap();
    for n in 1..=5 {
        let r = duality_check(&sys, n)?;
        println!(
            "n = {n}: compared {} dims, largest principal sine {:.2e}, max |Δσ| {:.2e}",
            r.compared, r.max_sine, r.sigma_difference
        );
    }
    Ok(())
}
