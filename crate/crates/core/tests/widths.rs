use hankel_nwidth::hankel::HankelSpectrum;
use hankel_nwidth::system::{corpus, generate, LtiSystem, Model};
use hankel_nwidth::widths::{
    duality_check, evaluate_subspace, greedy_sequence, nwidth, worst_error_input, worst_error_output, Side,
    SubspaceCoords,
};
use hankel_nwidth::Matrix;

#[test]
fn greedy_errors_are_the_tail_singular_values() {
    for sys in corpus(10, 7).unwrap() {
        let spec = HankelSpectrum::compute(&sys).unwrap();
        let n = sys.states();
        let g = greedy_sequence(&spec, n, 100, 3).unwrap();
        assert!(g.certified());
        for (k, e) in g.errors.iter().enumerate() {
            assert!((e - spec.sigma_after(k)).abs() <= 1e-10 * spec.hankel_norm());
        }
    }
}

#[test]
fn input_and_output_widths_coincide() {
    for sys in corpus(10, 8).unwrap() {
        let spec = HankelSpectrum::compute(&sys).unwrap();
        let n = sys.states();
        for k in 0..=n {
            let o = worst_error_output(&spec, &SubspaceCoords::leading(n, k, Side::Output)).unwrap();
            let i = worst_error_input(&spec, &SubspaceCoords::leading(n, k, Side::Input)).unwrap();
            assert!((o - i).abs() <= 1e-12 * spec.hankel_norm());
        }
    }
}

#[test]
fn frames_must_match() {
    let sys = corpus(1, 2).unwrap().remove(0);
    let spec = HankelSpectrum::compute(&sys).unwrap();
    let s = SubspaceCoords::leading(2, 1, Side::Input);
    assert!(worst_error_output(&spec, &s).is_err());
    let wrong_dim = SubspaceCoords::leading(3, 1, Side::Output);
    assert!(worst_error_output(&spec, &wrong_dim).is_err());
}

#[test]
fn rank_deficient_image_has_zero_width_beyond_its_rank() {
    // Two decoupled states, only one of them driven: the image is one-dimensional.
    let sys = LtiSystem::without_feedthrough(
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0])),
        Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
    )
    .unwrap();
    let spec = HankelSpectrum::compute(&sys).unwrap();
    assert_eq!(spec.rank, 1);
    let r = nwidth(&spec, 1, 500, 1).unwrap();
    assert_eq!(r.reference, 0.0);
    assert!(r.error <= 1e-15);
}

#[test]
fn zero_input_matrix_gives_zero_spectrum() {
    let sys = LtiSystem::without_feedthrough(
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -3.0])),
        Matrix::zeros(2, 1),
        Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
    )
    .unwrap();
    let spec = HankelSpectrum::compute(&sys).unwrap();
    assert_eq!(spec.sigma, vec![0.0, 0.0]);
}

#[test]
fn user_subspace_is_scored_against_sigma() {
    let sys = generate(&Model::RcLadder, 5, 0).unwrap().into_lti().unwrap();
    let spec = HankelSpectrum::compute(&sys).unwrap();
    let mut basis = Matrix::zeros(5, 2);
    basis[(1, 0)] = 1.0;
    basis[(2, 1)] = 1.0;
    let r = evaluate_subspace(&spec, &SubspaceCoords::new(basis, Side::Output).unwrap()).unwrap();
    assert!((r.error - spec.sigma[0]).abs() <= 1e-12 * spec.sigma[0]);
    assert!(r.gap > 0.0 && r.lower_bound_holds);
}

#[test]
fn adjoint_output_subspaces_are_input_subspaces() {
    for sys in corpus(10, 9).unwrap() {
        let spec = HankelSpectrum::compute(&sys).unwrap();
        for n in 1..=spec.rank.min(4) {
            let r = duality_check(&sys, n).unwrap();
            assert!(r.max_sine <= 1e-6, "{r:?}");
            assert!(r.sigma_difference <= 1e-10 * spec.hankel_norm());
        }
    }
}
