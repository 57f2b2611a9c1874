//! The greedy sequence g_1, g_2, … attains the Kolmogorov n-width σ_{n+1}, and
//! no random subspace does better.

use hankel_nwidth::hankel::HankelSpectrum;
use hankel_nwidth::system::{generate, Model};
use hankel_nwidth::widths::{greedy_sequence, nwidth};

fn main() -> hankel_nwidth::Result<()> {
    let sys = generate(&Model::random_stable(), 6, 3)?.into_lti().unwrap();
    let spec = HankelSpectrum::compute(&sys)?;

    let greedy = greedy_sequence(&spec, 5, 300, 42)?;
    println!(" n   greedy error        σ_(n+1)");
    for (n, e) in greedy.errors.iter().enumerate() {
        println!("{n:2}   {e:.12e}  {:.12e}", spec.sigma_after(n));
    }
    println!("stepwise certificate holds: {}", greedy.certified());

    let report = nwidth(&spec, 2, 5000, 42)?;
    println!(
        "\nn = 2: best of {} random subspaces {:.6e} ≥ σ_3 = {:.6e}",
        report.probes,
        report.empirical_min.unwrap(),
        report.reference
    );
    Ok(())
}
