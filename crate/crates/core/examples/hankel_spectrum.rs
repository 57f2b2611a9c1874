//! Hankel singular values and Schmidt pairs of a small RC ladder.

use hankel_nwidth::hankel::HankelSpectrum;
use hankel_nwidth::system::{generate, Model};

fn main() -> hankel_nwidth::Result<()> {
    let sys = generate(&Model::RcLadder, 8, 0)?.into_lti().expect("rc_ladder is an LTI model");
    let spec = HankelSpectrum::compute(&sys)?;

    println!("Hankel norm ‖H‖ = σ_1 = {:.6e}", spec.hankel_norm());
    for (i, s) in spec.sigma.iter().enumerate() {
        println!("  σ_{:<2} = {s:.6e}", i + 1);
    }

    // The first Schmidt pair: H f_1 = σ_1 g_1, sampled at a few times.
    let pair = spec.schmidt_pair(1)?;
    println!("\n   t      g_1(t)        f_1(-t)");
    for t in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!("{t:5.1}  {:+.6e}  {:+.6e}", pair.output(t)?[0], pair.input(-t)?[0]);
    }
    let check = spec.apply_hankel_to_f(1)?;
    println!("\nrelative defect of H f_1 = σ_1 g_1: {:.2e}", check.output_defect);
    Ok(())
}
