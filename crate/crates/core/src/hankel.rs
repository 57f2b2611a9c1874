//! Hankel singular values, Schmidt pairs, and a quadrature-discretized
//! Hankel operator.
//!
//! The Hankel operator maps past inputs `u ∈ L²(−∞,0]` to future outputs
//! `y ∈ L²[0,∞)`, `(Hu)(t) = ∫_{−∞}^0 C e^{A(t−s)} B u(s) ds`. It factors as
//! `H = Ψ_o Ψ_c` through the state at `t = 0`, with
//! `Ψ_c u = ∫_{−∞}^0 e^{−As} B u(s) ds` and `(Ψ_o x)(t) = C e^{At} x`, so
//! `Ψ_c Ψ_c* = P` and `Ψ_o* Ψ_o = Q`. Writing the Schmidt pairs as
//!
//! ```text
//! g_i(t) = C e^{At} v_i,        f_i(s) = σ_i⁻¹ Bᵀ e^{−Aᵀs} Q v_i,
//! ```
//!
//! with `PQ v_i = σ_i² v_i` and `v_iᵀ Q v_j = δ_ij`, gives `H f_i = σ_i g_i`
//! and `H* g_i = σ_i f_i`, and every L² inner product reduces to a Gramian
//! quadratic form. The feedthrough `D` never enters: for `t > 0 > s` the
//! impulse at `t − s = 0` does not fire.

use std::ops::Range;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gramian::{gramians_with, GramianPair};
use crate::linalg::{self, Matrix, Tolerances};
use crate::quadrature::CompositeRule;
use crate::system::LtiSystem;

/// Hankel singular values and Schmidt coefficient vectors of a stable system.
#[derive(Debug, Clone)]
pub struct HankelSpectrum {
    /// `σ_1 ≥ σ_2 ≥ … ≥ σ_N ≥ 0`.
    pub sigma: Vec<f64>,
    /// Column `i` is `v_i`, normalized so that `v_iᵀ Q v_i = 1` whenever `σ_i > 0`.
    pub v: Matrix,
    pub system: LtiSystem,
    pub gramians: GramianPair,
    /// Number of singular values above `zero_sigma · σ_1`.
    pub rank: usize,
    p_factor: Matrix,
    q_factor: Matrix,
    tol: Tolerances,
}

impl HankelSpectrum {
    pub fn compute(sys: &LtiSystem) -> Result<Self> {
        Self::compute_with(sys, &Tolerances::default())
    }

    pub fn compute_with(sys: &LtiSystem, tol: &Tolerances) -> Result<Self> {
        let gramians = gramians_with(sys, tol)?;
        let n = sys.states();
        let lp = gramians.p_factor().clone();
        let lq = gramians.q_factor().clone();
        // Singular values of L_Qᵀ L_P are the square roots of the eigenvalues of
        // L_Qᵀ P L_Q, i.e. of PQ, without ever forming the product. The factors
        // may have fewer than N columns; the missing singular values are zero.
        let cross = linalg::svd(&(lq.transpose() * &lp))?;
        let mut sigma: Vec<f64> = cross.s.iter().copied().collect();
        sigma.resize(n, 0.0);
        let top = sigma[0];
        let rank = sigma
            .iter()
            .take_while(|&&s| top > 0.0 && s > tol.zero_sigma * top)
            .count();

        let mut v = Matrix::zeros(n, n);
        for i in 0..rank {
            // PQ (L_P z) = L_P Kᵀ K z = σ² L_P z, and (L_P z)ᵀ Q (L_P z) = σ² in exact arithmetic;
            // the explicit Q-norm keeps the normalization exact for tiny σ.
            let col = &lp * cross.v.column(i);
            let qnorm = (lq.transpose() * &col).norm();
            v.set_column(i, &(col / qnorm));
        }
        // Schmidt vectors of tiny singular values are only accurate to about
        // ε σ_1 / σ_i, so orthonormalize the whole nonzero block (twice) in the Q
        // inner product. This also fixes an orthonormal basis inside clusters of
        // repeated singular values; for well-separated σ the update is at roundoff level.
        q_gram_schmidt(&mut v, &lq, 0..rank);
        q_gram_schmidt(&mut v, &lq, 0..rank);
        if rank < n {
            complete_basis(&mut v, &gramians.q, rank)?;
        }

        Ok(Self {
            sigma,
            v,
            system: sys.clone(),
            gramians,
            rank,
            p_factor: lp,
            q_factor: lq,
            tol: *tol,
        })
    }

    pub fn order(&self) -> usize {
        self.sigma.len()
    }

    /// Hankel norm `σ_1`.
    pub fn hankel_norm(&self) -> f64 {
        self.sigma[0]
    }

    /// `σ_{n+1}` with the convention `σ_{N+1} = 0`.
    pub fn sigma_after(&self, n: usize) -> f64 {
        self.sigma.get(n).copied().unwrap_or(0.0)
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Factor `L_P` of the controllability Gramian, `P = L_P L_Pᵀ`.
    pub fn p_factor(&self) -> &Matrix {
        &self.p_factor
    }

    /// Factor `L_Q` of the observability Gramian, `Q = L_Q L_Qᵀ`.
    pub fn q_factor(&self) -> &Matrix {
        &self.q_factor
    }

    /// Index ranges of singular values that coincide within the cluster tolerance.
    pub fn clusters(&self) -> Vec<Range<usize>> {
        clusters(&self.sigma, self.tol.cluster * self.hankel_norm())
    }

    /// `⟨g_i, g_j⟩ = v_iᵀ Q v_j` in `L²[0,∞)` (1-based indices).
    ///
    /// Quadratic forms are evaluated through the Gramian factors; forming
    /// `Q v` explicitly loses all accuracy for singular values near `ε σ_1`.
    pub fn output_inner(&self, i: usize, j: usize) -> f64 {
        let lq = self.q_factor.transpose();
        (&lq * self.v.column(i - 1)).dot(&(&lq * self.v.column(j - 1)))
    }

    /// `⟨f_i, f_j⟩ = (Q v_i)ᵀ P (Q v_j) / (σ_i σ_j)` in `L²(−∞,0]` (1-based, nonzero σ).
    pub fn input_inner(&self, i: usize, j: usize) -> f64 {
        let lp = self.p_factor.transpose();
        (&lp * self.input_coefficients(i)).dot(&(&lp * self.input_coefficients(j)))
    }

    /// `Q v_i / σ_i`: `f_i(s) = Bᵀ e^{−Aᵀ s}` applied to this vector.
    pub fn input_coefficients(&self, i: usize) -> DVector<f64> {
        &self.q_factor * (self.q_factor.transpose() * self.v.column(i - 1)) / self.sigma[i - 1]
    }

    /// Relative residual `‖PQ v_i − σ_i² v_i‖ / (‖P‖‖Q‖‖v_i‖)` (1-based).
    pub fn eigen_residual(&self, i: usize) -> f64 {
        let g = &self.gramians;
        let vi = self.v.column(i - 1);
        let lhs = &g.p * (&g.q * vi);
        let s2 = self.sigma[i - 1] * self.sigma[i - 1];
        let denom = linalg::norm_two(&g.p).unwrap_or(0.0)
            * linalg::norm_two(&g.q).unwrap_or(0.0)
            * vi.norm();
        if denom == 0.0 {
            0.0
        } else {
            (lhs - vi * s2).norm() / denom
        }
    }

    /// Evaluators for the `i`-th Schmidt pair (1-based).
    pub fn schmidt_pair(&self, i: usize) -> Result<SingularFunctions<'_>> {
        if i == 0 || i > self.order() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.order(),
            });
        }
        if i > self.rank {
            return Err(Error::ZeroSingularValue { index: i });
        }
        Ok(SingularFunctions {
            index: i,
            sigma: self.sigma[i - 1],
            v: self.v.column(i - 1).clone_owned(),
            input_coeff: self.input_coefficients(i),
            system: &self.system,
        })
    }

    /// Check `Ψ_c f_i = σ_i v_i`, i.e. `H f_i = σ_i g_i`, through `Ψ_c f_i = σ_i⁻¹ P Q v_i`.
    pub fn apply_hankel_to_f(&self, i: usize) -> Result<HankelActionCheck> {
        let pair = self.schmidt_pair(i)?;
        let image = &self.gramians.p * &pair.input_coeff;
        let target = &pair.v * pair.sigma;
        let diff = &image - &target;
        Ok(HankelActionCheck {
            index: i,
            sigma: pair.sigma,
            state_defect: diff.norm() / target.norm(),
            output_defect: diff.dot(&(&self.gramians.q * &diff)).max(0.0).sqrt() / pair.sigma,
        })
    }
}

/// Result of [`HankelSpectrum::apply_hankel_to_f`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HankelActionCheck {
    pub index: usize,
    pub sigma: f64,
    /// `‖Ψ_c f_i − σ_i v_i‖ / ‖σ_i v_i‖` (Euclidean, state space).
    pub state_defect: f64,
    /// `‖H f_i − σ_i g_i‖_{L²} / σ_i`.
    pub output_defect: f64,
}

pub fn hankel_spectrum(sys: &LtiSystem) -> Result<HankelSpectrum> {
    HankelSpectrum::compute(sys)
}

/// Hankel norm `‖Σ‖_H = σ_1(Σ)`.
pub fn hankel_norm(sys: &LtiSystem) -> Result<f64> {
    hankel_norm_with(sys, &Tolerances::default())
}

pub fn hankel_norm_with(sys: &LtiSystem, tol: &Tolerances) -> Result<f64> {
    let g = gramians_with(sys, tol)?;
    let cross = g.q_factor().transpose() * g.p_factor();
    linalg::norm_two(&cross).map_err(Error::from)
}

/// Evaluators for one Schmidt pair `(f_i, g_i)`.
#[derive(Debug, Clone)]
pub struct SingularFunctions<'a> {
    pub index: usize,
    pub sigma: f64,
    pub v: DVector<f64>,
    /// `Q v_i / σ_i`.
    pub input_coeff: DVector<f64>,
    system: &'a LtiSystem,
}

impl SingularFunctions<'_> {
    /// `g_i(t) = C e^{At} v_i` for `t ≥ 0`.
    pub fn output(&self, t: f64) -> Result<DVector<f64>> {
        if t < 0.0 {
            return Err(Error::BadParameter(format!("output time must be >= 0, got {t}")));
        }
        let e = linalg::expm(&(&self.system.a * t))?;
        Ok(&self.system.c * (e * &self.v))
    }

    /// `f_i(s) = σ_i⁻¹ Bᵀ e^{−Aᵀs} Q v_i` for `s ≤ 0`.
    pub fn input(&self, s: f64) -> Result<DVector<f64>> {
        if s > 0.0 {
            return Err(Error::BadParameter(format!("input time must be <= 0, got {s}")));
        }
        let e = linalg::expm(&(self.system.a.transpose() * (-s)))?;
        Ok(self.system.b.transpose() * (e * &self.input_coeff))
    }
}

/// Default panel grading ratio for [`discretize`].
pub const DEFAULT_GRADING: f64 = 1.5;
pub const DEFAULT_PANELS: usize = 12;
pub const DEFAULT_NODES_PER_PANEL: usize = 8;

/// Nyström discretization of the Hankel operator on truncated, graded grids.
#[derive(Debug, Clone)]
pub struct DiscretizedHankel {
    pub horizon: f64,
    /// Future grid `t_k`; the past grid is its mirror image `−t_j`.
    pub rule: CompositeRule,
    /// `M[(k,o),(j,c)] = √w_k h_{oc}(t_k + t_j) √w_j`, rows `k·p + o`, columns `j·m + c`.
    pub matrix: Matrix,
    pub outputs: usize,
    pub inputs: usize,
}

impl DiscretizedHankel {
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        Ok(linalg::svd(&self.matrix)?.s.iter().copied().collect())
    }

    /// Columns `√w_k g_i(t_k)` for `i = 1..=n`, stacked like the rows of `matrix`.
    pub fn sample_outputs(&self, spec: &HankelSpectrum, n: usize) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.matrix.nrows(), n);
        for i in 1..=n {
            let pair = spec.schmidt_pair(i)?;
            for (k, (&t, &w)) in self.rule.nodes.iter().zip(&self.rule.weights).enumerate() {
                let g = pair.output(t)?;
                for o in 0..self.outputs {
                    out[(k * self.outputs + o, i - 1)] = w.sqrt() * g[o];
                }
            }
        }
        Ok(out)
    }

    /// Columns `√w_j f_i(−t_j)` for `i = 1..=n`, stacked like the columns of `matrix`.
    pub fn sample_inputs(&self, spec: &HankelSpectrum, n: usize) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.matrix.ncols(), n);
        for i in 1..=n {
            let pair = spec.schmidt_pair(i)?;
            for (j, (&s, &w)) in self.rule.nodes.iter().zip(&self.rule.weights).enumerate() {
                let f = pair.input(-s)?;
                for c in 0..self.inputs {
                    out[(j * self.inputs + c, i - 1)] = w.sqrt() * f[c];
                }
            }
        }
        Ok(out)
    }
}

/// Truncation horizon `ln(10¹²) / |α|` with `α` the spectral abscissa.
pub fn truncation_horizon(abscissa: f64) -> f64 {
    (1e12f64).ln() / abscissa.abs()
}

pub fn discretize(sys: &LtiSystem, nodes_per_panel: usize, panels: usize) -> Result<DiscretizedHankel> {
    discretize_graded(sys, nodes_per_panel, panels, DEFAULT_GRADING, &Tolerances::default())
}

pub fn discretize_graded(
    sys: &LtiSystem,
    nodes_per_panel: usize,
    panels: usize,
    grading: f64,
    tol: &Tolerances,
) -> Result<DiscretizedHankel> {
    let abscissa = sys.require_stable(tol)?;
    let horizon = truncation_horizon(abscissa);
    let rule = CompositeRule::graded(horizon, panels, nodes_per_panel, grading)?;
    let (p, m, len) = (sys.outputs(), sys.inputs(), rule.len());

    let blocks: Vec<Matrix> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&t, &wt)| -> Result<Matrix> {
            let mut row = Matrix::zeros(p, m * len);
            for (j, (&s, &ws)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                let h = &sys.c * linalg::expm(&(&sys.a * (t + s)))? * &sys.b;
                row.view_mut((0, j * m), (p, m))
                    .copy_from(&(h * (wt * ws).sqrt()));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut matrix = Matrix::zeros(p * len, m * len);
    for (k, block) in blocks.iter().enumerate() {
        matrix.view_mut((k * p, 0), (p, m * len)).copy_from(block);
    }
    Ok(DiscretizedHankel {
        horizon,
        rule,
        matrix,
        outputs: p,
        inputs: m,
    })
}

/// Maximal runs of consecutive values whose neighbours differ by at most `gap`.
pub fn clusters(sigma: &[f64], gap: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=sigma.len() {
        if i == sigma.len() || sigma[i - 1] - sigma[i] > gap {
            if start < i {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Modified Gram–Schmidt in the `Q = L Lᵀ` inner product on the columns in `range`.
fn q_gram_schmidt(v: &mut Matrix, lq: &Matrix, range: Range<usize>) {
    let lt = lq.transpose();
    for i in range.clone() {
        for j in range.start..i {
            let vj = v.column(j).clone_owned();
            let coeff = (&lt * v.column(i)).dot(&(&lt * &vj));
            let updated = v.column(i) - vj * coeff;
            v.set_column(i, &updated);
        }
        let norm = (&lt * v.column(i)).norm();
        if norm > 0.0 {
            let scaled = v.column(i) / norm;
            v.set_column(i, &scaled);
        }
    }
}

/// Fill columns `rank..N` with vectors `Q`-orthogonal to the first `rank` columns.
/// Directions with positive `Q`-norm are `Q`-normalized; kernel directions of `Q`
/// are left Euclidean-normalized.
fn complete_basis(v: &mut Matrix, q: &Matrix, rank: usize) -> Result<()> {
    let n = v.nrows();
    let complement = if rank == 0 {
        Matrix::identity(n, n)
    } else {
        let constraints = (q * v.columns(0, rank)).transpose();
        let dec = linalg::svd(&Matrix::from_fn(n, n, |i, j| {
            if i < rank {
                constraints[(i, j)]
            } else {
                0.0
            }
        }))?;
        dec.v.columns(rank, n - rank).clone_owned()
    };
    let gram = linalg::symmetrize(&(complement.transpose() * q * &complement));
    let eig = linalg::symmetric_eig(&gram)?;
    let scale = eig.values.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    for k in 0..(n - rank) {
        let mut col = &complement * eig.vectors.column(k);
        let lam = eig.values[k];
        if lam > 1e-14 * scale.max(f64::MIN_POSITIVE) && lam > 0.0 {
            col /= lam.sqrt();
        } else {
            col /= col.norm();
        }
        v.set_column(rank + k, &col);
    }
    Ok(())
}
