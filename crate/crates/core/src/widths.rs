//! Kolmogorov n-widths of the Hankel image of the unit input ball, greedy
//! sequences, active subspaces, and the input/output duality.
//!
//! All computations happen in Schmidt coordinates. In the orthonormal
//! frames `{f_i}` (inputs) and `{g_i}` (outputs) the Hankel operator is
//! `diag(σ)`, and it annihilates everything outside `span{f_i}`, so a
//! candidate subspace is an `N × n` coordinate matrix and every worst-case
//! error is the largest singular value of an `N × N` matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::HankelSpectrum;
use crate::linalg::{self, Matrix};
use crate::system::LtiSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Coordinates in the `{g_i}` frame of the output space.
    Output,
    /// Coordinates in the `{f_i}` frame of the input space.
    Input,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Greedy,
    Random,
    User,
}

/// Orthonormal coordinates of an `n`-dimensional subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCoords {
    pub basis: Matrix,
    pub side: Side,
}

impl SubspaceCoords {
    /// Orthonormalize the columns of `basis`; fails if they are rank deficient.
    pub fn new(basis: Matrix, side: Side) -> Result<Self> {
        if basis.ncols() == 0 {
            return Ok(Self { basis, side });
        }
        linalg::check_finite(&basis)?;
        let q = linalg::orthonormal_columns(&basis).ok_or_else(|| {
            Error::BadParameter(format!(
                "subspace basis ({}x{}) is rank deficient",
                basis.nrows(),
                basis.ncols()
            ))
        })?;
        Ok(Self { basis: q, side })
    }

    /// `span{e_1, …, e_n}` in an `order`-dimensional frame.
    pub fn leading(order: usize, n: usize, side: Side) -> Self {
        Self {
            basis: Matrix::identity(order, n),
            side,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn complement_projector(&self) -> Matrix {
        let n = self.basis.nrows();
        Matrix::identity(n, n) - &self.basis * self.basis.transpose()
    }
}

fn check_frame(spec: &HankelSpectrum, s: &SubspaceCoords, side: Side) -> Result<()> {
    if s.side != side {
        return Err(Error::DimensionMismatch(format!(
            "expected {side:?}-side coordinates, got {:?}",
            s.side
        )));
    }
    if s.basis.nrows() != spec.order() {
        return Err(Error::DimensionMismatch(format!(
            "subspace lives in dimension {}, Schmidt frame has {}",
            s.basis.nrows(),
            spec.order()
        )));
    }
    Ok(())
}

fn sigma_diag(spec: &HankelSpectrum) -> Matrix {
    Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&spec.sigma))
}

/// `sup_{‖u‖≤1} ‖(I − π_S) H u‖ = σ_max((I − ΠΠᵀ) diag(σ))`.
pub fn worst_error_output(spec: &HankelSpectrum, s: &SubspaceCoords) -> Result<f64> {
    check_frame(spec, s, Side::Output)?;
    Ok(linalg::norm_two(&(s.complement_projector() * sigma_diag(spec)))?)
}

/// `sup_{‖u‖≤1} ‖H u − H π_S u‖ = σ_max(diag(σ) (I − ΠΠᵀ))`.
pub fn worst_error_input(spec: &HankelSpectrum, s: &SubspaceCoords) -> Result<f64> {
    check_frame(spec, s, Side::Input)?;
    Ok(linalg::norm_two(&(sigma_diag(spec) * s.complement_projector()))?)
}

fn worst_error(spec: &HankelSpectrum, s: &SubspaceCoords) -> Result<f64> {
    match s.side {
        Side::Output => worst_error_output(spec, s),
        Side::Input => worst_error_input(spec, s),
    }
}

/// Random generator for probe `index` of a run seeded with `seed`.
///
/// Every probe owns its own stream, so results do not depend on how probes
/// are scheduled across threads.
pub fn probe_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Draw a random `n`-dimensional coordinate subspace.
///
/// Probes alternate between three families: isotropic Gaussian subspaces,
/// perturbations of the leading span at log-uniform scales in `[1e-6, 1]`,
/// and spans of randomly chosen coordinate axes with a small perturbation.
pub fn random_subspace(order: usize, n: usize, side: Side, index: u64, rng: &mut ChaCha8Rng) -> SubspaceCoords {
    loop {
        let basis = match index % 3 {
            0 => gaussian(order, n, rng),
            1 => {
                let scale = 10f64.powf(-6.0 * rng.gen::<f64>());
                Matrix::identity(order, n) + gaussian(order, n, rng) * scale
            }
            _ => {
                let mut axes: Vec<usize> = (0..order).collect();
                for k in 0..n {
                    let pick = rng.gen_range(k..order);
                    axes.swap(k, pick);
                }
                let mut b = gaussian(order, n, rng) * 1e-3;
                for (col, &ax) in axes[..n].iter().enumerate() {
                    b[(ax, col)] += 1.0;
                }
                b
            }
        };
        if let Ok(s) = SubspaceCoords::new(basis, side) {
            return s;
        }
    }
}

/// Minimum worst-case error over `probes` random `n`-dimensional subspaces.
pub fn probe_minimum(spec: &HankelSpectrum, n: usize, side: Side, probes: usize, seed: u64) -> Result<Option<f64>> {
    if probes == 0 || n == 0 || n >= spec.order() {
        return Ok(None);
    }
    let errors = (0..probes as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(seed, k);
            let s = random_subspace(spec.order(), n, side, k, &mut rng);
            worst_error(spec, &s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.into_iter().reduce(f64::min))
}

/// Evidence attached to one greedy step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepCertificate {
    /// Step `i`: the span grows from dimension `i − 1` to `i`.
    pub step: usize,
    /// Worst-case error of `span{g_1, …, g_i}`.
    pub greedy_error: f64,
    /// Best error among the random one-dimensional enlargements of `span{g_1, …, g_{i−1}}`.
    pub best_probe_error: f64,
    /// No probe beat the greedy choice by more than the certificate slack.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySequence {
    pub coords: SubspaceCoords,
    /// `errors[i]` is the worst-case error of the first `i` greedy elements, `i = 0..=n`.
    pub errors: Vec<f64>,
    pub certificate: Vec<StepCertificate>,
}

impl GreedySequence {
    pub fn certified(&self) -> bool {
        self.certificate.iter().all(|c| c.holds)
    }
}

pub const DEFAULT_GREEDY_PROBES: usize = 500;

/// The greedy sequence `g_1, …, g_n` with a randomized stepwise optimality certificate.
///
/// The certificate is evidence, not proof: at each step a finite number of
/// random one-dimensional enlargements is tried.
pub fn greedy_sequence(spec: &HankelSpectrum, n: usize, probes: usize, seed: u64) -> Result<GreedySequence> {
    let order = spec.order();
    if n > order {
        return Err(Error::BadOrder { order: n, states: order });
    }
    let slack = spec.tolerances().certificate * spec.hankel_norm();
    let mut errors = Vec::with_capacity(n + 1);
    let mut certificate = Vec::with_capacity(n);
    errors.push(worst_error_output(spec, &SubspaceCoords::leading(order, 0, Side::Output))?);
    for step in 1..=n {
        let greedy = worst_error_output(spec, &SubspaceCoords::leading(order, step, Side::Output))?;
        errors.push(greedy);
        let step_seed = seed.wrapping_add(step as u64);
        let best = (0..probes as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = probe_rng(step_seed, k);
                let mut basis = Matrix::identity(order, step);
                let mut phi = gaussian(order, 1, &mut rng);
                if k % 2 == 1 {
                    // Perturb the greedy direction instead of drawing it freely.
                    let scale = 10f64.powf(-6.0 * rng.gen::<f64>());
                    phi *= scale;
                    phi[(step - 1, 0)] += 1.0;
                }
                basis.set_column(step - 1, &phi.column(0));
                match SubspaceCoords::new(basis, Side::Output) {
                    Ok(s) => worst_error_output(spec, &s),
                    Err(_) => Ok(f64::INFINITY),
                }
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        certificate.push(StepCertificate {
            step,
            greedy_error: greedy,
            best_probe_error: best,
            holds: best >= greedy - slack,
        });
    }
    Ok(GreedySequence {
        coords: SubspaceCoords::leading(order, n, Side::Output),
        errors,
        certificate,
    })
}

/// Worst-case error of a subspace compared with the optimal value `σ_{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthReport {
    pub side: Side,
    pub n: usize,
    /// Achieved worst-case error.
    pub error: f64,
    /// `σ_{n+1}` (zero for `n ≥ N`).
    pub reference: f64,
    /// `error − reference`.
    pub gap: f64,
    pub provenance: Provenance,
    /// Smallest error found among random candidate subspaces, if any were probed.
    pub empirical_min: Option<f64>,
    pub probes: usize,
    /// Every probed subspace respected `error ≥ σ_{n+1} − slack`.
    pub lower_bound_holds: bool,
}

fn width_report(spec: &HankelSpectrum, n: usize, probes: usize, seed: u64, side: Side) -> Result<WidthReport> {
    let order = spec.order();
    let n_eff = n.min(order);
    let error = worst_error(spec, &SubspaceCoords::leading(order, n_eff, side))?;
    let reference = spec.sigma_after(n);
    let empirical_min = probe_minimum(spec, n_eff, side, probes, seed)?;
    let slack = spec.tolerances().certificate * spec.hankel_norm();
    let lower_bound_holds = empirical_min.is_none_or(|m| m >= reference - slack);
    Ok(WidthReport {
        side,
        n,
        error,
        reference,
        gap: error - reference,
        provenance: Provenance::Greedy,
        empirical_min,
        probes: if empirical_min.is_some() { probes } else { 0 },
        lower_bound_holds,
    })
}

/// Kolmogorov n-width of `H(unit ball)`, attained by `span{g_1, …, g_n}`.
pub fn nwidth(spec: &HankelSpectrum, n: usize, probes: usize, seed: u64) -> Result<WidthReport> {
    width_report(spec, n, probes, seed, Side::Output)
}

/// Active-subspace error of `span{f_1, …, f_n}`.
pub fn active_subspace(spec: &HankelSpectrum, n: usize, probes: usize, seed: u64) -> Result<WidthReport> {
    width_report(spec, n, probes, seed, Side::Input)
}

/// Evaluate a user-supplied subspace against `σ_{n+1}`.
pub fn evaluate_subspace(spec: &HankelSpectrum, s: &SubspaceCoords) -> Result<WidthReport> {
    let error = worst_error(spec, s)?;
    let reference = spec.sigma_after(s.dim());
    let slack = spec.tolerances().certificate * spec.hankel_norm();
    Ok(WidthReport {
        side: s.side,
        n: s.dim(),
        error,
        reference,
        gap: error - reference,
        provenance: Provenance::User,
        empirical_min: None,
        probes: 0,
        lower_bound_holds: error >= reference - slack,
    })
}

/// Comparison of the input singular subspace of a system with the output
/// singular subspace of its adjoint realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub requested: usize,
    /// Dimension actually compared (extended to the end of a σ cluster straddling `requested`).
    pub compared: usize,
    pub multiplicity_warning: bool,
    /// Sine of the largest principal angle between the two subspaces.
    pub max_sine: f64,
    /// `max_i |σ_i(Σ) − σ_i(Σ*)|`.
    pub sigma_difference: f64,
}

/// Verify that `span{f_1, …, f_n}` of `sys` coincides with the minimizing output
/// subspace of the adjoint realization `(Aᵀ, Cᵀ, Bᵀ, Dᵀ)`.
///
/// The adjoint's outputs are `Bᵀ e^{Aᵀt} x`, the time mirror of the input
/// singular functions, and its observability Gramian is `P`; the angles are
/// measured in that inner product.
pub fn duality_check(sys: &LtiSystem, n: usize) -> Result<DualityReport> {
    let spec = HankelSpectrum::compute(sys)?;
    let adj = HankelSpectrum::compute(&sys.adjoint())?;
    duality_from_spectra(&spec, &adj, n)
}

pub fn duality_from_spectra(spec: &HankelSpectrum, adj: &HankelSpectrum, n: usize) -> Result<DualityReport> {
    if n == 0 || n > spec.rank {
        return Err(Error::ZeroSingularValue { index: n });
    }
    let sigma_difference = spec
        .sigma
        .iter()
        .zip(&adj.sigma)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let cluster = spec
        .clusters()
        .into_iter()
        .find(|r| r.contains(&(n - 1)))
        .expect("every index lies in a cluster");
    let compared = cluster.end.min(spec.rank);
    let multiplicity_warning = compared != n;
    if multiplicity_warning {
        log::info!("σ_{n} and σ_{} coincide; comparing {compared}-dimensional subspaces", n + 1);
    }
    let lp_t = spec.p_factor().transpose();
    let order = spec.order();
    let mut inputs = Matrix::zeros(order, compared);
    for i in 1..=compared {
        inputs.set_column(i - 1, &(&lp_t * spec.input_coefficients(i)));
    }
    let adj_outputs = &lp_t * adj.v.columns(0, compared);
    let max_sine = linalg::max_principal_sine(&inputs, &adj_outputs)
        .ok_or(Error::ZeroSingularValue { index: compared })?;
    Ok(DualityReport {
        requested: n,
        compared,
        multiplicity_warning,
        max_sine,
        sigma_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{generate, Model};

    fn two_state() -> HankelSpectrum {
        let sys = generate(
            &Model::Diag {
                lambda: vec![-1.0, -2.0],
                b: vec![1.0, 1.0],
                c: vec![1.0, 1.0],
            },
            2,
            0,
        )
        .unwrap()
        .into_lti()
        .unwrap();
        HankelSpectrum::compute(&sys).unwrap()
    }

    #[test]
    fn leading_span_attains_next_singular_value() {
        let spec = two_state();
        let e1 = worst_error_output(&spec, &SubspaceCoords::leading(2, 1, Side::Output)).unwrap();
        assert!((e1 - spec.sigma[1]).abs() < 1e-15);
        let full = worst_error_output(&spec, &SubspaceCoords::leading(2, 2, Side::Output)).unwrap();
        assert!(full <= 1e-15);
        let none = worst_error_output(&spec, &SubspaceCoords::leading(2, 0, Side::Output)).unwrap();
        assert!((none - spec.hankel_norm()).abs() < 1e-15);
    }

    #[test]
    fn wrong_side_or_dimension_is_rejected() {
        let spec = two_state();
        let s = SubspaceCoords::leading(2, 1, Side::Input);
        assert!(matches!(worst_error_output(&spec, &s), Err(Error::DimensionMismatch(_))));
        let s = SubspaceCoords::leading(3, 1, Side::Output);
        assert!(matches!(worst_error_output(&spec, &s), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rank_deficient_basis_is_rejected() {
        let b = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(SubspaceCoords::new(b, Side::Output).is_err());
    }

    #[test]
    fn random_probe_never_beats_sigma_two() {
        let spec = two_state();
        let min = probe_minimum(&spec, 1, Side::Output, 1000, 3).unwrap().unwrap();
        assert!(min >= spec.sigma[1] - 1e-8 * spec.sigma[0]);
        let min = probe_minimum(&spec, 1, Side::Input, 1000, 3).unwrap().unwrap();
        assert!(min >= spec.sigma[1] - 1e-8 * spec.sigma[0]);
    }

    #[test]
    fn greedy_steps_for_two_state_example() {
        let spec = two_state();
        let g = greedy_sequence(&spec, 2, 200, 1).unwrap();
        assert_eq!(g.errors.len(), 3);
        assert!((g.errors[0] - spec.sigma[0]).abs() < 1e-15);
        assert!((g.errors[1] - spec.sigma[1]).abs() < 1e-15);
        assert!(g.errors[2] <= 1e-10);
        assert!(g.certified());
    }

    #[test]
    fn nwidth_reports_for_two_state_example() {
        let spec = two_state();
        let r = nwidth(&spec, 1, 500, 9).unwrap();
        assert!(r.gap.abs() <= 1e-10);
        assert!(r.lower_bound_holds);
        let full = nwidth(&spec, 2, 0, 9).unwrap();
        assert!(full.error <= 1e-10 * spec.sigma[0]);
        assert_eq!(full.reference, 0.0);
        let a = active_subspace(&spec, 1, 500, 9).unwrap();
        assert!((a.error - r.error).abs() <= 1e-10);
    }

    #[test]
    fn probe_results_are_reproducible() {
        let spec = two_state();
        let a = probe_minimum(&spec, 1, Side::Output, 64, 77).unwrap();
        let b = probe_minimum(&spec, 1, Side::Output, 64, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_realization_is_self_dual() {
        let sys = generate(&Model::RcLadder, 5, 0).unwrap().into_lti().unwrap();
        let r = duality_check(&sys, 2).unwrap();
        assert!(r.max_sine <= 1e-10, "{}", r.max_sine);
        assert!(r.sigma_difference <= 1e-12);
    }

    #[test]
    fn duality_two_state() {
        let sys = two_state().system;
        let r = duality_check(&sys, 1).unwrap();
        assert!(r.max_sine <= 1e-6);
        assert!(!r.multiplicity_warning);
    }

    #[test]
    fn duality_extends_over_clusters() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -1.0, -3.0]));
        let b = Matrix::identity(3, 3);
        let sys = LtiSystem::without_feedthrough(a, b.clone(), b).unwrap();
        let r = duality_check(&sys, 1).unwrap();
        assert!(r.multiplicity_warning);
        assert_eq!(r.compared, 2);
        assert!(r.max_sine <= 1e-10);
    }
}
