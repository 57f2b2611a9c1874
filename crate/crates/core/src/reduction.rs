//! Balanced realizations, balanced truncation, and Glover's optimal
//! Hankel-norm approximation.
//!
//! The optimal approximation is the one whose Hankel error equals the
//! Kolmogorov n-width `σ_{n+1}`; balanced truncation is kept as the classical
//! baseline it is compared against.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramian::{self, sylvester_with};
use crate::hankel::{self, clusters};
use crate::linalg::{self, LinalgError, Matrix, Tolerances};
use crate::system::LtiSystem;

/// A realization with `P = Q = diag(σ)`.
#[derive(Debug, Clone)]
pub struct BalancedRealization {
    pub system: LtiSystem,
    /// `x = T z`; `N × k` when non-minimal states were removed.
    pub t: Matrix,
    /// Left inverse of `T` (`T⁻¹ T = I`).
    pub t_inv: Matrix,
    /// Diagonal of the balanced Gramian, nonincreasing.
    pub sigma: Vec<f64>,
    /// Number of near-uncontrollable or near-unobservable states removed.
    pub removed_states: usize,
}

impl BalancedRealization {
    pub fn order(&self) -> usize {
        self.sigma.len()
    }
}

/// Square-root balancing.
///
/// With `P = L_P L_Pᵀ`, `Q = L_Q L_Qᵀ` and `L_Qᵀ L_P = W S Vᵀ`, the transform is
/// `T = L_P V S^{-1/2}`, `T⁻¹ = S^{-1/2} Wᵀ L_Qᵀ`.
pub fn balance(sys: &LtiSystem) -> Result<BalancedRealization> {
    balance_with(sys, &Tolerances::default())
}

pub fn balance_with(sys: &LtiSystem, tol: &Tolerances) -> Result<BalancedRealization> {
    let gram = gramian::gramians_with(sys, tol)?;
    let lp = gram.p_factor();
    let lq = gram.q_factor();
    let svd = linalg::svd(&(lq.transpose() * lp))?;
    let top = svd.s.iter().next().copied().unwrap_or(0.0);
    let k = svd.s.iter().take_while(|&&s| s > tol.minimality * top && s > 0.0).count();
    let removed_states = sys.states() - k;
    if removed_states > 0 {
        log::info!("removing {removed_states} non-minimal state(s) before balancing");
    }
    let inv_sqrt = nalgebra::DVector::from_iterator(k, svd.s.iter().take(k).map(|s| s.sqrt().recip()));
    let inv_sqrt = Matrix::from_diagonal(&inv_sqrt);
    let t = lp * svd.v.columns(0, k) * &inv_sqrt;
    let t_inv = &inv_sqrt * svd.u.columns(0, k).transpose() * lq.transpose();
    Ok(BalancedRealization {
        system: sys.transform(&t, &t_inv),
        t,
        t_inv,
        sigma: svd.s.iter().take(k).copied().collect(),
        removed_states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BalancedTruncation,
    OptimalHankel,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bt" | "balanced_truncation" => Ok(Method::BalancedTruncation),
            "ohna" | "optimal_hankel" => Ok(Method::OptimalHankel),
            other => Err(Error::BadParameter(format!("unknown reduction method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub system: LtiSystem,
    pub method: Method,
    pub requested_order: usize,
    /// `‖Σ − Σ̃‖_H`.
    pub hankel_error: f64,
}

impl ReducedModel {
    pub fn order(&self) -> usize {
        self.system.states()
    }
}

fn check_order(n: usize, states: usize) -> Result<()> {
    if n == 0 || n > states {
        return Err(Error::BadOrder { order: n, states });
    }
    Ok(())
}

fn sub_system(sys: &LtiSystem, idx: &[usize]) -> LtiSystem {
    let k = idx.len();
    LtiSystem {
        a: Matrix::from_fn(k, k, |i, j| sys.a[(idx[i], idx[j])]),
        b: Matrix::from_fn(k, sys.inputs(), |i, j| sys.b[(idx[i], j)]),
        c: Matrix::from_fn(sys.outputs(), k, |i, j| sys.c[(i, idx[j])]),
        d: sys.d.clone(),
    }
}

/// Minimum relative gap `(σ_n − σ_{n+1})/σ_1` at a balanced-truncation cut.
pub const BT_GAP: f64 = 1e-10;

/// Keep the leading `n` balanced states.
///
/// When `σ_n` and `σ_{n+1}` are closer than `1e-10·σ_1` the cut is moved to
/// the end of their cluster so the reduced model stays stable.
pub fn balanced_truncation(sys: &LtiSystem, n: usize) -> Result<ReducedModel> {
    balanced_truncation_with(sys, n, &Tolerances::default())
}

pub fn balanced_truncation_with(sys: &LtiSystem, n: usize, tol: &Tolerances) -> Result<ReducedModel> {
    check_order(n, sys.states())?;
    let bal = balance_with(sys, tol)?;
    let mut keep = n.min(bal.order());
    if keep > 0 && keep < bal.order() {
        let gap = BT_GAP * bal.sigma[0];
        if let Some(c) = clusters(&bal.sigma, gap).into_iter().find(|c| c.contains(&(keep - 1))) {
            if c.end != keep {
                log::warn!("σ_{keep} ≈ σ_{}; truncating at order {} instead", keep + 1, c.end);
                keep = c.end;
            }
        }
    }
    let idx: Vec<usize> = (0..keep).collect();
    finish(sys, sub_system(&bal.system, &idx), Method::BalancedTruncation, n)
}

fn finish(sys: &LtiSystem, reduced: LtiSystem, method: Method, n: usize) -> Result<ReducedModel> {
    if reduced.states() > 0 {
        reduced.require_stable(&Tolerances::default())?;
    }
    let hankel_error = hankel_error_of(sys, &reduced)?;
    Ok(ReducedModel {
        system: reduced,
        method,
        requested_order: n,
        hankel_error,
    })
}

/// `‖Σ − Σ̃‖_H`.
pub fn hankel_error(sys: &LtiSystem, red: &ReducedModel) -> Result<f64> {
    hankel_error_of(sys, &red.system)
}

fn hankel_error_of(sys: &LtiSystem, reduced: &LtiSystem) -> Result<f64> {
    if reduced.states() == 0 {
        if reduced.inputs() != sys.inputs() || reduced.outputs() != sys.outputs() {
            return Err(Error::DimensionMismatch("reduced model has different i/o dimensions".into()));
        }
        // A static gain has no Hankel operator.
        return hankel::hankel_norm(sys);
    }
    hankel::hankel_norm(&sys.error_system(reduced)?)
}

/// Glover's optimal Hankel-norm approximation of order at most `n`.
///
/// The achieved Hankel error equals `σ_{n+1}`. If `σ_{n+1}` belongs to a
/// cluster that also contains `σ_n`, the returned model has the order of the
/// states strictly above the cluster, which attains the same error.
pub fn optimal_hankel(sys: &LtiSystem, n: usize) -> Result<ReducedModel> {
    optimal_hankel_with(sys, n, &Tolerances::default())
}

pub fn optimal_hankel_with(sys: &LtiSystem, n: usize, tol: &Tolerances) -> Result<ReducedModel> {
    check_order(n, sys.states())?;
    let bal = balance_with(sys, tol)?;
    let k = bal.order();
    if n >= k {
        return finish(sys, bal.system, Method::OptimalHankel, n);
    }
    let cluster = clusters(&bal.sigma, tol.cluster * bal.sigma[0])
        .into_iter()
        .find(|c| c.contains(&n))
        .expect("every index lies in a cluster");
    if cluster.start < n {
        log::warn!(
            "σ_{n} ≈ σ_{}; the optimal approximant has order {}",
            n + 1,
            cluster.start
        );
    }
    let reduced = glover(&bal, cluster, tol)?;
    finish(sys, reduced, Method::OptimalHankel, n)
}

/// All-pass dilation for the balanced realization with the states in `cut` sharing `σ`.
fn glover(bal: &BalancedRealization, cut: Range<usize>, tol: &Tolerances) -> Result<LtiSystem> {
    let k = bal.order();
    let sigma = bal.sigma[cut.start];
    let outer: Vec<usize> = (0..cut.start).chain(cut.end..k).collect();
    let r = cut.len();
    let k1 = outer.len();
    let sys = &bal.system;
    let (m, p) = (sys.inputs(), sys.outputs());
    let q = m.max(p);

    // Zero-pad to a square system.
    let mut b = Matrix::zeros(k, q);
    b.view_mut((0, 0), (k, m)).copy_from(&sys.b);
    let mut c = Matrix::zeros(q, k);
    c.view_mut((0, 0), (p, k)).copy_from(&sys.c);
    let mut d = Matrix::zeros(q, q);
    d.view_mut((0, 0), (p, m)).copy_from(&sys.d);

    let pick = |rows: &[usize], cols: &[usize], x: &Matrix| Matrix::from_fn(rows.len(), cols.len(), |i, j| x[(rows[i], cols[j])]);
    let inner: Vec<usize> = cut.clone().collect();
    let all_q: Vec<usize> = (0..q).collect();
    let a11 = pick(&outer, &outer, &sys.a);
    let b1 = pick(&outer, &all_q, &b);
    let b2 = pick(&inner, &all_q, &b);
    let c1 = pick(&all_q, &outer, &c);
    let c2 = pick(&all_q, &inner, &c);
    debug_assert_eq!(b2.nrows(), r);

    let u = dilation_unitary(&b2, &c2)?;

    let s1: Vec<f64> = outer.iter().map(|&i| bal.sigma[i]).collect();
    let gamma: Vec<f64> = s1.iter().map(|s| s * s - sigma * sigma).collect();
    let min_gap = s1.iter().fold(f64::INFINITY, |a, s| a.min((s - sigma).abs()));
    if k1 > 0 && min_gap <= tol.cluster * bal.sigma[0] {
        return Err(Error::DegenerateGamma(format!(
            "a retained singular value lies within {min_gap:.3e} of σ = {sigma:.6e}"
        )));
    }
    let sigma1 = Matrix::from_diagonal(&nalgebra::DVector::from_vec(s1));
    let gamma_inv = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(k1, gamma.iter().map(|g| g.recip())));

    let a_hat = &gamma_inv
        * (a11.transpose() * (sigma * sigma) + &sigma1 * &a11 * &sigma1 - c1.transpose() * &u * b1.transpose() * sigma);
    let b_hat = &gamma_inv * (&sigma1 * &b1 + c1.transpose() * &u * sigma);
    let c_hat = &c1 * &sigma1 + &u * b1.transpose() * sigma;
    let d_hat = &d - &u * sigma;

    let (a_s, b_s, c_s) = stable_part(&a_hat, &b_hat, &c_hat, cut.start, tol)?;
    // Built directly: an order-0 result (static gain) is legitimate here.
    Ok(LtiSystem {
        a: a_s,
        b: b_s.columns(0, m).clone_owned(),
        c: c_s.rows(0, p).clone_owned(),
        d: d_hat.view((0, 0), (p, m)).clone_owned(),
    })
}

/// Orthogonal `U` with `B₂ = −C₂ᵀ U`.
///
/// Balancing gives `B₂B₂ᵀ = C₂ᵀC₂`, so with `C₂ᵀ = X₁ S₁ Y₁ᵀ` the rows of
/// `Z₁ᵀ = −S₁⁻¹ X₁ᵀ B₂` are orthonormal and `U = Y₁Z₁ᵀ + Y⊥Z⊥ᵀ`.
fn dilation_unitary(b2: &Matrix, c2: &Matrix) -> Result<Matrix> {
    let q = b2.ncols();
    let c2t = c2.transpose();
    let svd = linalg::svd(&c2t)?;
    let scale = svd.s.iter().next().copied().unwrap_or(0.0).max(linalg::norm_two(b2)?);
    if scale == 0.0 {
        return Ok(Matrix::identity(q, q));
    }
    let rho = svd.s.iter().take_while(|&&s| s > 1e-10 * scale).count();
    let y1 = svd.v.columns(0, rho).clone_owned();
    let s_inv = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(rho, svd.s.iter().take(rho).map(|s| s.recip())));
    let z1t = -(s_inv * svd.u.columns(0, rho).transpose() * b2);
    let z1 = z1t.transpose();
    let y_perp = orthonormal_complement(&y1)?;
    let z_perp = orthonormal_complement(&z1)?;
    Ok(y1 * z1t + y_perp * z_perp.transpose())
}

/// Orthonormal basis of the orthogonal complement of the column space of `x`.
fn orthonormal_complement(x: &Matrix) -> Result<Matrix> {
    let n = x.nrows();
    let k = x.ncols();
    if k == 0 {
        return Ok(Matrix::identity(n, n));
    }
    let proj = Matrix::identity(n, n) - x * x.transpose();
    let eig = linalg::symmetric_eig(&linalg::symmetrize(&proj))?;
    Ok(eig.vectors.columns(0, n - k).clone_owned())
}

/// Matrix sign function by scaled Newton iteration.
pub fn matrix_sign(a: &Matrix) -> Result<Matrix> {
    const BUDGET: usize = 100;
    let mut x = a.clone();
    for _ in 0..BUDGET {
        let x_inv = x
            .clone()
            .try_inverse()
            .ok_or(LinalgError::Singular { condition: f64::INFINITY })?;
        let scale = (x_inv.norm() / x.norm()).sqrt();
        let next = (&x * scale + x_inv / scale) * 0.5;
        let change = (&next - &x).norm();
        x = next;
        linalg::check_finite(&x)?;
        if change <= 1e-13 * x.norm() {
            return Ok(x);
        }
    }
    Err(LinalgError::NonConvergence {
        op: "matrix sign function",
        budget: BUDGET,
    }
    .into())
}

/// Stable part `(A₁₁, B₁ − X B₂, C₁)` of `(A, B, C)`, which must have exactly `stable` stable eigenvalues.
///
/// An orthonormal basis of the stable invariant subspace (from the matrix sign
/// function) block-triangularizes `A`; a Sylvester solve removes the coupling.
fn stable_part(a: &Matrix, b: &Matrix, c: &Matrix, stable: usize, tol: &Tolerances) -> Result<(Matrix, Matrix, Matrix)> {
    let k = a.nrows();
    if stable == k {
        return Ok((a.clone(), b.clone(), c.clone()));
    }
    if stable == 0 {
        return Ok((Matrix::zeros(0, 0), Matrix::zeros(0, b.ncols()), Matrix::zeros(c.nrows(), 0)));
    }
    let sign = matrix_sign(a)?;
    let proj = (Matrix::identity(k, k) - &sign) * 0.5;
    let svd = linalg::svd(&proj)?;
    if !(svd.s[stable - 1] > 0.5 && svd.s.get(stable).is_none_or(|&s| s < 0.5)) {
        return Err(LinalgError::NonConvergence {
            op: "stable/anti-stable splitting",
            budget: 0,
        }
        .into());
    }
    let vs = svd.u.columns(0, stable).clone_owned();
    let w = {
        let mut w = Matrix::zeros(k, k);
        w.view_mut((0, 0), (k, stable)).copy_from(&vs);
        w.view_mut((0, stable), (k, k - stable)).copy_from(&orthonormal_complement(&vs)?);
        w
    };
    let at = w.transpose() * a * &w;
    let bt = w.transpose() * b;
    let ct = c * &w;
    let ua = k - stable;
    let a11 = at.view((0, 0), (stable, stable)).clone_owned();
    let a12 = at.view((0, stable), (stable, ua)).clone_owned();
    let a22 = at.view((stable, stable), (ua, ua)).clone_owned();
    let x = sylvester_with(&a11, &(-&a22), &a12, tol)?;
    let b_s = bt.rows(0, stable) - x * bt.rows(stable, ua);
    Ok((a11, b_s, ct.columns(0, stable).clone_owned()))
}
