//! Projecting inputs onto span{f_1, …, f_n} loses exactly σ_{n+1}.

use hankel_nwidth::hankel::HankelSpectrum;
use hankel_nwidth::system::{generate, Model};
use hankel_nwidth::widths::{active_subspace, worst_error_input, Side, SubspaceCoords};
use hankel_nwidth::Matrix;

fn main() -> hankel_nwidth::Result<()> {
    let sys = generate(
        &Model::RandomStable { inputs: 2, outputs: 2, margin: 0.5 },
        8,
        11,
    )?
    .into_lti()
    .unwrap();
    let spec = HankelSpectrum::compute(&sys)?;

    for n in 0..=4 {
        let r = active_subspace(&spec, n, 2000, 1)?;
        println!("n = {n}: active error {:.6e}, σ_(n+1) {:.6e}", r.error, r.reference);
    }

    // Any other input subspace is worse: swap f_2 for f_3.
    let mut basis = Matrix::zeros(8, 2);
    basis[(0, 0)] = 1.0;
    basis[(2, 1)] = 1.0;
    let other = SubspaceCoords::new(basis, Side::Input)?;
    println!("span{{f_1, f_3}}: error {:.6e} (= σ_2)", worst_error_input(&spec, &other)?);
    Ok(())
}
