//! Glover's optimal Hankel-norm approximation against balanced truncation.

use hankel_nwidth::hankel::HankelSpectrum;
use hankel_nwidth::reduction::{balanced_truncation, optimal_hankel};
use hankel_nwidth::system::{generate, Model};

fn main() -> hankel_nwidth::Result<()> {
    let sys = generate(&Model::random_stable(), 10, 21)?.into_lti().unwrap();
    let spec = HankelSpectrum::compute(&sys)?;
    println!(" n   σ_(n+1)        optimal        truncation     2Σ tail");
    for n in 1..6 {
        let ohna = optimal_hankel(&sys, n)?;
        let bt = balanced_truncation(&sys, n)?;
        let tail: f64 = 2.0 * spec.sigma[n..].iter().sum::<f64>();
        println!(
            "{n:2}   {:.6e}   {:.6e}   {:.6e}   {tail:.6e}",
            spec.sigma[n], ohna.hankel_error, bt.hankel_error
        );
    }
    Ok(())
}
