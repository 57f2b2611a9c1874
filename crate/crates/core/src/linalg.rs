//! Dense real linear algebra.
//!
//! Checked layer over `nalgebra` (Schur, SVD, LU, Padé exponential) plus a
//! cyclic Jacobi symmetric eigensolver. Every factorization validates its
//! input, enforces an iteration budget, and reports failures through
//! [`LinalgError`] instead of panicking. Complex arithmetic never leaves
//! this module; eigenvalues of real Schur blocks are reported as
//! `(re, im)` pairs.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Dense real matrix. Storage is column-major; the interface is index based.
pub type Matrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{op} did not converge within {budget} iterations")]
    NonConvergence { op: &'static str, budget: usize },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is singular to working precision (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("matrix exponential overflowed")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Numerical tolerance policy shared by all analysis routines.
///
/// The defaults are the bounds every routine in the crate is tested
/// against; callers may tighten or relax them per run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// `A` counts as asymptotically stable when its spectral abscissa is below `-stability_margin`.
    pub stability_margin: f64,
    /// Relative asymmetry accepted by [`symmetric_eig`].
    pub symmetry: f64,
    /// Condition estimate above which a linear system is declared singular.
    pub max_condition: f64,
    /// Relative residual required from Lyapunov/Sylvester solves.
    pub lyapunov_residual: f64,
    /// Negative eigenvalues of a Gramian down to `-psd_clip * ||X||` are clipped to zero.
    pub psd_clip: f64,
    /// Hankel singular values below `zero_sigma * sigma_1` are treated as zero.
    pub zero_sigma: f64,
    /// Singular values within `cluster * sigma_1` of each other form one multiplicity cluster.
    pub cluster: f64,
    /// Slack for lower-bound certificates, relative to `sigma_1`.
    pub certificate: f64,
    /// Balancing removes states whose balanced singular value is below `minimality * sigma_1`.
    pub minimality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stability_margin: 1e-8,
            symmetry: 1e-10,
            max_condition: 1e14,
            lyapunov_residual: 1e-10,
            psd_clip: 1e-10,
            zero_sigma: 1e-12,
            cluster: 1e-8,
            certificate: 1e-8,
            minimality: 1e-12,
        }
    }
}

/// Build a matrix from row slices, rejecting ragged, empty, or non-finite input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(LinalgError::Empty);
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(LinalgError::DimensionMismatch(format!(
            "row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    check_finite(&m)?;
    Ok(m)
}

/// Row-major nested vectors, the inverse of [`matrix_from_rows`].
pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LinalgError::Empty);
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_square(m: &Matrix) -> Result<usize> {
    check_finite(m)?;
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Real Schur form `M = Q T Qᵀ` with `T` quasi-upper-triangular.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: Matrix,
    pub t: Matrix,
}

impl RealSchur {
    /// Diagonal blocks of `T` as `(start, size)` with size 1 or 2.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        schur_blocks(&self.t)
    }

    /// Eigenvalues `(re, im)` in block order; complex pairs appear conjugate-adjacent.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let t = &self.t;
        let mut out = Vec::with_capacity(t.nrows());
        for (k, size) in self.blocks() {
            if size == 1 {
                out.push((t[(k, k)], 0.0));
            } else {
                let (a, b, c, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
                let mean = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                if disc >= 0.0 {
                    let r = disc.sqrt();
                    out.push((mean + r, 0.0));
                    out.push((mean - r, 0.0));
                } else {
                    let r = (-disc).sqrt();
                    out.push((mean, r));
                    out.push((mean, -r));
                }
            }
        }
        out
    }
}

/// Partition a quasi-triangular matrix into its 1×1 and 2×2 diagonal blocks.
pub fn schur_blocks(t: &Matrix) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)] != 0.0 {
            blocks.push((k, 2));
            k += 2;
        } else {
            blocks.push((k, 1));
            k += 1;
        }
    }
    blocks
}

pub fn real_schur(m: &Matrix) -> Result<RealSchur> {
    let n = check_square(m)?;
    let budget = 30 * n.max(1);
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, budget).ok_or(
        LinalgError::NonConvergence {
            op: "real Schur QR iteration",
            budget,
        },
    )?;
    let (q, mut t) = schur.unpack();
    // Clear roundoff below the block structure so block detection is exact.
    for j in 0..n {
        for i in (j + 2)..n {
            t[(i, j)] = 0.0;
        }
    }
    for k in 0..n.saturating_sub(1) {
        let scale = t[(k, k)].abs() + t[(k + 1, k + 1)].abs();
        if t[(k + 1, k)].abs() <= f64::EPSILON * scale {
            t[(k + 1, k)] = 0.0;
        }
    }
    for k in 0..n.saturating_sub(2) {
        if t[(k + 1, k)] != 0.0 && t[(k + 2, k + 1)] != 0.0 {
            return Err(LinalgError::NonConvergence {
                op: "real Schur QR iteration",
                budget,
            });
        }
    }
    Ok(RealSchur { q, t })
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ`, `s` nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: DVector<f64>,
    pub v: Matrix,
}

impl Svd {
    /// Number of singular values above `rel_tol * s[0]`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.s.get(0).copied().unwrap_or(0.0);
        self.s.iter().filter(|&&x| x > rel_tol * top).count()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Slower than bidiagonalization but accurate for rank-deficient and
/// strongly non-normal inputs, where small relative errors matter downstream.
pub fn svd(m: &Matrix) -> Result<Svd> {
    check_finite(m)?;
    if m.nrows() < m.ncols() {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (rows, cols) = m.shape();
    let scale = m.norm();
    if scale == 0.0 {
        let mut u = Matrix::zeros(rows, cols);
        let s = DVector::zeros(cols);
        complete_zero_columns(&mut u, &s);
        return Ok(Svd {
            u,
            s,
            v: Matrix::identity(cols, cols),
        });
    }
    // Work at unit scale; columns below `NEGLIGIBLE` are treated as exact
    // zeros, far from the underflow range where rotations lose accuracy.
    const NEGLIGIBLE: f64 = 1e-200;
    let mut a = m / scale;
    let mut v = Matrix::identity(cols, cols);
    let budget = 60;
    let tol = f64::EPSILON * rows as f64;
    let mut converged = false;
    for _sweep in 0..budget {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (a.column(p), a.column(q));
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if alpha < NEGLIGIBLE
                    || beta < NEGLIGIBLE
                    || gamma.abs() <= tol * alpha.sqrt() * beta.sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NonConvergence {
            op: "singular value decomposition",
            budget,
        });
    }
    let norms: Vec<f64> = (0..cols)
        .map(|j| a.column(j).norm_squared())
        .map(|x| if x < NEGLIGIBLE { 0.0 } else { x.sqrt() * scale })
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s = DVector::from_iterator(cols, order.iter().map(|&j| norms[j]));
    let v = Matrix::from_fn(cols, cols, |i, j| v[(i, order[j])]);
    let mut u = Matrix::zeros(rows, cols);
    for (j, &k) in order.iter().enumerate() {
        if norms[k] > 0.0 {
            u.set_column(j, &(a.column(k) * (scale / norms[k])));
        }
    }
    complete_zero_columns(&mut u, &s);
    Ok(Svd { u, s, v })
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.nrows() {
        let (x, y) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * x - s * y;
        m[(k, q)] = s * x + c * y;
    }
}

/// Fill the left singular vectors of exactly-zero singular values with an
/// orthonormal completion, drawn from coordinate axes.
fn complete_zero_columns(u: &mut Matrix, s: &DVector<f64>) {
    let rows = u.nrows();
    let mut axis = 0;
    for j in 0..u.ncols() {
        if s[j] > 0.0 {
            continue;
        }
        while axis < rows {
            let mut cand = DVector::<f64>::zeros(rows);
            cand[axis] = 1.0;
            axis += 1;
            for _ in 0..2 {
                for k in 0..u.ncols() {
                    if k == j {
                        continue;
                    }
                    let coeff = u.column(k).dot(&cand);
                    cand -= u.column(k) * coeff;
                }
            }
            let norm = cand.norm();
            if norm > 0.5 {
                u.set_column(j, &(cand / norm));
                break;
            }
        }
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues nonincreasing.
#[derive(Debug, Clone)]
pub struct SymmetricEig {
    pub values: DVector<f64>,
    pub vectors: Matrix,
}

pub fn symmetric_eig(m: &Matrix) -> Result<SymmetricEig> {
    symmetric_eig_with(m, &Tolerances::default())
}

pub fn symmetric_eig_with(m: &Matrix, tol: &Tolerances) -> Result<SymmetricEig> {
    let n = check_square(m)?;
    let norm = m.norm();
    let asym = (m - m.transpose()).norm();
    if asym > tol.symmetry * norm {
        return Err(LinalgError::NotSymmetric {
            asymmetry: asym / norm,
        });
    }
    let (values, vectors) = jacobi_eigen(symmetrize(m))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let vectors = Matrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok(SymmetricEig {
        values: sorted,
        vectors,
    })
}

/// Cyclic Jacobi rotations until every off-diagonal entry is negligible
/// relative to its diagonal pair.
fn jacobi_eigen(mut a: Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.nrows();
    let mut v = Matrix::identity(n, n);
    let budget = 60;
    for _sweep in 0..budget {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                if apq.abs() <= f64::EPSILON * 0.5 * (app.abs() * aqq.abs()).sqrt()
                    || apq.abs() < f64::MIN_POSITIVE
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
    }
    Err(LinalgError::NonConvergence {
        op: "Jacobi symmetric eigensolver",
        budget,
    })
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    check_square(m)?;
    let e = m.exp();
    if e.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::Overflow);
    }
    Ok(e)
}

/// Solve `M X = rhs` by LU with partial pivoting.
pub fn solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    solve_with(m, rhs, &Tolerances::default())
}

pub fn solve_with(m: &Matrix, rhs: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let n = check_square(m)?;
    check_finite(rhs)?;
    if rhs.nrows() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "solve: {n}x{n} system with {} right-hand-side rows",
            rhs.nrows()
        )));
    }
    let lu = m.clone().lu();
    let inv = lu.try_inverse().ok_or(LinalgError::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = norm_one(m) * norm_one(&inv);
    if !condition.is_finite() || condition > tol.max_condition {
        return Err(LinalgError::Singular { condition });
    }
    lu.solve(rhs).ok_or(LinalgError::Singular { condition })
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_one(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm via the largest singular value.
pub fn norm_two(m: &Matrix) -> Result<f64> {
    if m.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    Ok(svd(m)?.s[0])
}

/// Factor a symmetric PSD matrix as `X = L Lᵀ` using eigen square roots.
///
/// Eigenvalues in `[-clip * ||X||₂, n·ε·||X||₂]` are set to zero; anything more
/// negative is returned as an error through `Err(min_eigenvalue)`.
pub fn psd_factor(x: &Matrix, clip: f64) -> Result<std::result::Result<Matrix, f64>> {
    let eig = symmetric_eig(&symmetrize(x))?;
    let n = x.nrows();
    let top = eig.values.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let lowest = eig.values[n - 1];
    if lowest < -clip * top.max(f64::MIN_POSITIVE) {
        return Ok(Err(lowest));
    }
    // Eigenvalues below n·ε·‖X‖ are indistinguishable from rounding noise;
    // their square roots would inflate it to √ε.
    let noise = n as f64 * f64::EPSILON * top;
    let mut l = eig.vectors.clone();
    for j in 0..n {
        let v = eig.values[j];
        let s = if v > noise { v.sqrt() } else { 0.0 };
        l.column_mut(j).scale_mut(s);
    }
    Ok(Ok(l))
}

/// Orthonormal basis of the column space of `m` (thin QR), or `None` when rank deficient.
pub fn orthonormal_columns(m: &Matrix) -> Option<Matrix> {
    let qr = m.clone().qr();
    let r = qr.r();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let k = m.ncols().min(m.nrows());
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-12 * scale) || m.ncols() > m.nrows() {
        return None;
    }
    Some(qr.q())
}

/// Sine of the largest principal angle between the column spaces of `x` and `y`.
///
/// Both inputs must have full column rank; returns `None` otherwise.
pub fn max_principal_sine(x: &Matrix, y: &Matrix) -> Option<f64> {
    if x.nrows() != y.nrows() {
        return None;
    }
    let qx = orthonormal_columns(x)?;
    let qy = orthonormal_columns(y)?;
    let resid = &qy - &qx * (qx.transpose() * &qy);
    let res = norm_two(&resid).ok()?;
    if x.ncols() == y.ncols() {
        let back = &qx - &qy * (qy.transpose() * &qx);
        return Some(res.max(norm_two(&back).ok()?).min(1.0));
    }
    Some(res.min(1.0))
}
