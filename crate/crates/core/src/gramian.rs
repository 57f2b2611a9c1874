//! Lyapunov and Sylvester solvers and certified Gramians.
//!
//! Gramians are computed twice: explicitly by Bartels–Stewart, which carries
//! the residual certificate, and in factored form `P = L Lᵀ` by the
//! sign-function Newton iteration. The factors resolve small Hankel singular
//! values to about `ε σ_1` absolute accuracy; square roots of an explicitly
//! formed Gramian only reach `√ε`.

use crate::error::{Error, Result};
use crate::linalg::{self, real_schur, schur_blocks, symmetrize, Matrix, Tolerances};
use crate::system::LtiSystem;

/// Solve `A X + X B + C = 0`.
///
/// Both coefficients are reduced to real Schur form and the transformed
/// equation is solved block by block (1×1 and 2×2 diagonal blocks), so the
/// cost is O(n³) and the solve is backward stable. Fails with
/// [`Error::SylvesterSingular`] when an eigenvalue of `A` is (numerically)
/// the negative of an eigenvalue of `B`.
pub fn sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    sylvester_with(a, b, c, &Tolerances::default())
}

pub fn sylvester_with(a: &Matrix, b: &Matrix, c: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let (m, n) = (a.nrows(), b.nrows());
    if a.ncols() != m || b.ncols() != n || c.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!(
            "sylvester: A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    let sa = real_schur(a)?;
    let sb = real_schur(b)?;
    let s = &sa.t;
    let t = &sb.t;
    let ct = sa.q.transpose() * c * &sb.q;
    let row_blocks = schur_blocks(s);
    let col_blocks = schur_blocks(t);
    let scale = s.norm() + t.norm();
    let mut y = Matrix::zeros(m, n);

    for &(j0, q) in &col_blocks {
        for &(i0, p) in row_blocks.iter().rev() {
            let mut rhs = -ct.view((i0, j0), (p, q)).clone_owned();
            let tail = m - (i0 + p);
            if tail > 0 {
                rhs -= s.view((i0, i0 + p), (p, tail)) * y.view((i0 + p, j0), (tail, q));
            }
            if j0 > 0 {
                rhs -= y.view((i0, 0), (p, j0)) * t.view((0, j0), (j0, q));
            }
            let sii = s.view((i0, i0), (p, p));
            let tjj = t.view((j0, j0), (q, q));
            // (I_q ⊗ S_ii + T_jjᵀ ⊗ I_p) vec(Y) = vec(rhs)
            let k = p * q;
            let mut kron = Matrix::zeros(k, k);
            for cj in 0..q {
                for ri in 0..p {
                    let row = cj * p + ri;
                    for rr in 0..p {
                        kron[(row, cj * p + rr)] += sii[(ri, rr)];
                    }
                    for cc in 0..q {
                        kron[(row, cc * p + ri)] += tjj[(cc, cj)];
                    }
                }
            }
            let small = linalg::svd(&kron)?;
            if small.s[k - 1] <= scale / tol.max_condition {
                return Err(Error::SylvesterSingular);
            }
            let vec_rhs = Matrix::from_column_slice(k, 1, rhs.as_slice());
            let sol = kron
                .lu()
                .solve(&vec_rhs)
                .ok_or(Error::SylvesterSingular)?;
            for cj in 0..q {
                for ri in 0..p {
                    y[(i0 + ri, j0 + cj)] = sol[(cj * p + ri, 0)];
                }
            }
        }
    }
    Ok(&sa.q * y * sb.q.transpose())
}

/// Relative residual of `A X + X B + C = 0`, normalized by `‖A‖‖X‖ + ‖X‖‖B‖ + ‖C‖` (Frobenius).
pub fn sylvester_residual(a: &Matrix, b: &Matrix, c: &Matrix, x: &Matrix) -> f64 {
    let r = a * x + x * b + c;
    let denom = a.norm() * x.norm() + x.norm() * b.norm() + c.norm();
    if denom == 0.0 {
        0.0
    } else {
        r.norm() / denom
    }
}

/// Solve `A X + X Aᵀ + W = 0` for symmetric `W`; requires `A` stable.
pub fn lyapunov(a: &Matrix, w: &Matrix) -> Result<Matrix> {
    lyapunov_with(a, w, &Tolerances::default())
}

pub fn lyapunov_with(a: &Matrix, w: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let abscissa = crate::system::spectral_abscissa(a)?;
    if abscissa >= -tol.stability_margin {
        return Err(Error::Unstable { abscissa });
    }
    let x = sylvester_with(a, &a.transpose(), w, tol)?;
    Ok(symmetrize(&x))
}

/// Controllability and observability Gramians with residual certificates.
#[derive(Debug, Clone)]
pub struct GramianPair {
    /// Controllability Gramian: `AP + PAᵀ + BBᵀ = 0`.
    pub p: Matrix,
    /// Observability Gramian: `AᵀQ + QA + CᵀC = 0`.
    pub q: Matrix,
    pub resid_p: f64,
    pub resid_q: f64,
    lp: Matrix,
    lq: Matrix,
}

impl GramianPair {
    /// Factor `L` with `P = L Lᵀ` (`N × r`, full column rank unless `P = 0`).
    pub fn p_factor(&self) -> &Matrix {
        &self.lp
    }

    /// Factor `L` with `Q = L Lᵀ`.
    pub fn q_factor(&self) -> &Matrix {
        &self.lq
    }
}

/// Low-rank factor `Z` with `A X + X Aᵀ + B Bᵀ = 0`, `X = Z Zᵀ`, for stable `A`.
///
/// Newton iteration for the matrix sign function with determinant-free norm
/// scaling, `A ← (A/c + c A⁻¹)/2`, `Z ← [Z/√c, √c A⁻¹Z]/√2`, recompressing `Z`
/// by an SVD after each step. `A_k → −I` and `X = Z_∞ Z_∞ᵀ / 2`.
pub fn lyapunov_factor(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    const BUDGET: usize = 100;
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "lyapunov_factor: A {:?}, B {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut ak = a.clone();
    let mut z = compress(b)?;
    let mut scaling = true;
    for _ in 0..BUDGET {
        let inv = ak
            .clone()
            .try_inverse()
            .ok_or(linalg::LinalgError::Singular { condition: f64::INFINITY })?;
        let c = if scaling { (ak.norm() / inv.norm()).sqrt() } else { 1.0 };
        let next = (&ak / c + &inv * c) * 0.5;
        let wide = {
            let r = z.ncols();
            let mut w = Matrix::zeros(n, 2 * r);
            w.view_mut((0, 0), (n, r)).copy_from(&(&z / c.sqrt()));
            w.view_mut((0, r), (n, r)).copy_from(&(&inv * &z * c.sqrt()));
            w / std::f64::consts::SQRT_2
        };
        z = compress(&wide)?;
        let change = (&next - &ak).norm();
        ak = next;
        linalg::check_finite(&ak)?;
        if change <= 1e-2 {
            // Close to −I: finish with unscaled, quadratically convergent steps.
            scaling = false;
        }
        if change <= 1e-14 * (n as f64).sqrt() {
            return Ok(z / std::f64::consts::SQRT_2);
        }
    }
    Err(linalg::LinalgError::NonConvergence {
        op: "sign-function Lyapunov factor",
        budget: BUDGET,
    }
    .into())
}

/// Column compression `Z ↦ U S` keeping singular values above `ε s_1`.
fn compress(z: &Matrix) -> Result<Matrix> {
    let n = z.nrows();
    if z.ncols() == 0 || z.iter().all(|&x| x == 0.0) {
        return Ok(Matrix::zeros(n, 1));
    }
    let svd = linalg::svd(z)?;
    let keep = svd.s.iter().take_while(|&&x| x > f64::EPSILON * svd.s[0]).count().max(1);
    let mut out = svd.u.columns(0, keep).clone_owned();
    for j in 0..keep {
        out.column_mut(j).scale_mut(svd.s[j]);
    }
    Ok(out)
}

pub fn gramians(sys: &LtiSystem) -> Result<GramianPair> {
    gramians_with(sys, &Tolerances::default())
}

pub fn gramians_with(sys: &LtiSystem, tol: &Tolerances) -> Result<GramianPair> {
    sys.require_stable(tol)?;
    let bbt = &sys.b * sys.b.transpose();
    let ctc = sys.c.transpose() * &sys.c;
    let at = sys.a.transpose();
    let p = repair_psd(lyapunov_with(&sys.a, &bbt, tol)?, tol)?;
    let q = repair_psd(lyapunov_with(&at, &ctc, tol)?, tol)?;
    let resid_p = sylvester_residual(&sys.a, &at, &bbt, &p);
    let resid_q = sylvester_residual(&at, &sys.a, &ctc, &q);
    for r in [resid_p, resid_q] {
        if r > tol.lyapunov_residual {
            return Err(Error::Linalg(linalg::LinalgError::Singular {
                condition: r / f64::EPSILON,
            }));
        }
    }
    let lp = lyapunov_factor(&sys.a, &sys.b)?;
    let lq = lyapunov_factor(&at, &sys.c.transpose())?;
    Ok(GramianPair {
        p,
        q,
        resid_p,
        resid_q,
        lp,
        lq,
    })
}

/// Clip roundoff-level negative eigenvalues; larger negativity is an error.
fn repair_psd(x: Matrix, tol: &Tolerances) -> Result<Matrix> {
    if x.iter().all(|&v| v == 0.0) {
        return Ok(x);
    }
    let eig = linalg::symmetric_eig(&x)?;
    let n = x.nrows();
    let top = eig.values.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let lowest = eig.values[n - 1];
    if lowest >= 0.0 {
        return Ok(x);
    }
    if lowest < -tol.psd_clip * top {
        return Err(Error::Indefinite {
            min_eigenvalue: lowest,
        });
    }
    let clipped = eig.values.map(|v| v.max(0.0));
    let rebuilt = &eig.vectors * Matrix::from_diagonal(&clipped) * eig.vectors.transpose();
    Ok(symmetrize(&rebuilt))
}
