//! An independent check of the Hankel singular values: discretize the
//! operator with graded Gauss–Legendre quadrature and take an SVD.

use hankel_nwidth::hankel::{discretize, HankelSpectrum};
use hankel_nwidth::system::{generate, Model};

fn main() -> hankel_nwidth::Result<()> {
    let sys = generate(&Model::random_stable(), 5, 2)?.into_lti().unwrap();
    let exact = HankelSpectrum::compute(&sys)?.sigma;
    for (panels, nodes) in [(6, 4), (12, 8), (24, 16)] {
        let d = discretize(&sys, nodes, panels)?;
        let sv = d.singular_values()?;
        let worst = exact
            .iter()
            .zip(&sv)
            .map(|(s, q)| (s - q).abs() / s)
            .fold(0.0, f64::max);
        println!("{panels:2} panels × {nodes:2} nodes: worst relative error {worst:.2e}");
    }
    Ok(())
}
