//! State-space systems, affine parametric families, and benchmark generators.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, matrix_from_rows, matrix_to_rows, Matrix, Tolerances};

/// Continuous-time LTI system `ẋ = Ax + Bu`, `y = Cx + Du` with zero initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl LtiSystem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        for m in [&a, &b, &c, &d] {
            linalg::check_finite(m)?;
        }
        let n = a.nrows();
        let checks = [
            (a.ncols() == n, format!("A is {}x{}", n, a.ncols())),
            (b.nrows() == n, format!("B has {} rows, A has {n}", b.nrows())),
            (c.ncols() == n, format!("C has {} columns, A has {n}", c.ncols())),
            (
                d.nrows() == c.nrows() && d.ncols() == b.ncols(),
                format!(
                    "D is {}x{}, expected {}x{}",
                    d.nrows(),
                    d.ncols(),
                    c.nrows(),
                    b.ncols()
                ),
            ),
        ];
        if let Some((_, msg)) = checks.into_iter().find(|(ok, _)| !ok) {
            return Err(Error::DimensionMismatch(msg));
        }
        Ok(Self { a, b, c, d })
    }

    /// System with `D = 0`.
    pub fn without_feedthrough(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let d = Matrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Largest real part among the eigenvalues of `A`.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        spectral_abscissa(&self.a)
    }

    pub fn is_stable(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.spectral_abscissa()? < -tol.stability_margin)
    }

    /// Error unless the system is asymptotically stable; returns the spectral abscissa.
    pub fn require_stable(&self, tol: &Tolerances) -> Result<f64> {
        let abscissa = self.spectral_abscissa()?;
        if abscissa < -tol.stability_margin {
            Ok(abscissa)
        } else {
            Err(Error::Unstable { abscissa })
        }
    }

    /// Realization `(Aᵀ, Cᵀ, Bᵀ, Dᵀ)`, whose impulse response is the transpose of this one's.
    ///
    /// Its Hankel operator is the time-reversed adjoint of the original Hankel operator,
    /// so both share Hankel singular values and the output singular functions of the
    /// adjoint are the mirrored input singular functions of the original.
    pub fn adjoint(&self) -> LtiSystem {
        LtiSystem {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
            d: self.d.transpose(),
        }
    }

    /// State-space realization of the difference `self − other`.
    pub fn error_system(&self, other: &LtiSystem) -> Result<LtiSystem> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::DimensionMismatch(format!(
                "cannot subtract a {}x{} system from a {}x{} system",
                other.outputs(),
                other.inputs(),
                self.outputs(),
                self.inputs()
            )));
        }
        let (n1, n2) = (self.states(), other.states());
        let n = n1 + n2;
        let mut a = Matrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = Matrix::zeros(n, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs())).copy_from(&other.b);
        let mut c = Matrix::zeros(self.outputs(), n);
        c.view_mut((0, 0), (self.outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.outputs(), n2)).copy_from(&(-&other.c));
        Ok(LtiSystem {
            a,
            b,
            c,
            d: &self.d - &other.d,
        })
    }

    /// Similarity transform `x = T z`: `(T⁻¹AT, T⁻¹B, CT, D)`. `T` may be rectangular (projection).
    pub fn transform(&self, t: &Matrix, t_inv: &Matrix) -> LtiSystem {
        LtiSystem {
            a: t_inv * &self.a * t,
            b: t_inv * &self.b,
            c: &self.c * t,
            d: self.d.clone(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SystemFile::from(self)).expect("plain numeric data serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    let schur = linalg::real_schur(a)?;
    Ok(schur
        .eigenvalues()
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// On-disk JSON layout of an [`LtiSystem`]. A missing `D` means zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
}

impl From<&LtiSystem> for SystemFile {
    fn from(s: &LtiSystem) -> Self {
        SystemFile {
            a: matrix_to_rows(&s.a),
            b: matrix_to_rows(&s.b),
            c: matrix_to_rows(&s.c),
            d: Some(matrix_to_rows(&s.d)),
        }
    }
}

impl TryFrom<SystemFile> for LtiSystem {
    type Error = Error;

    fn try_from(f: SystemFile) -> Result<Self> {
        let a = matrix_from_rows(&f.a)?;
        let b = matrix_from_rows(&f.b)?;
        let c = matrix_from_rows(&f.c)?;
        let d = match f.d {
            Some(rows) => matrix_from_rows(&rows)?,
            None => Matrix::zeros(c.nrows(), b.ncols()),
        };
        LtiSystem::new(a, b, c, d)
    }
}

/// Coefficient matrices of one affine parameter term. Missing entries are zero.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct TermFile {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    d: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParametricFile {
    base: SystemFile,
    terms: Vec<TermFile>,
    parameters: Vec<ParameterRange>,
}

/// Affine family `A(p) = A₀ + Σ_k p_k A_k` (likewise `B`, `C`, `D`) over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricLtiSystem {
    pub base: LtiSystem,
    pub terms: Vec<LtiSystem>,
    pub parameters: Vec<ParameterRange>,
}

impl ParametricLtiSystem {
    pub fn new(
        base: LtiSystem,
        terms: Vec<LtiSystem>,
        parameters: Vec<ParameterRange>,
    ) -> Result<Self> {
        if parameters.is_empty() {
            return Err(Error::BadParameter("parameter box is empty".into()));
        }
        if terms.len() != parameters.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} affine terms for {} parameters",
                terms.len(),
                parameters.len()
            )));
        }
        for p in &parameters {
            if !(p.min.is_finite() && p.max.is_finite() && p.min <= p.max) {
                return Err(Error::BadParameter(format!(
                    "parameter '{}' has invalid range [{}, {}]",
                    p.name, p.min, p.max
                )));
            }
        }
        for (k, t) in terms.iter().enumerate() {
            let same = t.a.shape() == base.a.shape()
                && t.b.shape() == base.b.shape()
                && t.c.shape() == base.c.shape()
                && t.d.shape() == base.d.shape();
            if !same {
                return Err(Error::DimensionMismatch(format!(
                    "term {k} does not match the base system dimensions"
                )));
            }
        }
        Ok(Self {
            base,
            terms,
            parameters,
        })
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    /// Evaluate the family at `p`. Coordinates outside the box are clamped with a warning.
    pub fn instantiate(&self, p: &[f64]) -> Result<LtiSystem> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has {} entries, family has {}",
                p.len(),
                self.dim()
            )));
        }
        let mut sys = self.base.clone();
        for ((term, range), &value) in self.terms.iter().zip(&self.parameters).zip(p) {
            if !value.is_finite() {
                return Err(Error::BadParameter(format!(
                    "parameter '{}' is not finite",
                    range.name
                )));
            }
            let v = value.clamp(range.min, range.max);
            if v != value {
                log::warn!(
                    "parameter '{}' = {value} outside [{}, {}], clamped to {v}",
                    range.name,
                    range.min,
                    range.max
                );
            }
            sys.a += &term.a * v;
            sys.b += &term.b * v;
            sys.c += &term.c * v;
            sys.d += &term.d * v;
        }
        Ok(sys)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.parameters
            .iter()
            .map(|r| 0.5 * (r.min + r.max))
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let term = |t: &LtiSystem| TermFile {
            a: Some(matrix_to_rows(&t.a)),
            b: Some(matrix_to_rows(&t.b)),
            c: Some(matrix_to_rows(&t.c)),
            d: Some(matrix_to_rows(&t.d)),
        };
        let file = ParametricFile {
            base: SystemFile::from(&self.base),
            terms: self.terms.iter().map(term).collect(),
            parameters: self.parameters.clone(),
        };
        serde_json::to_value(file).expect("plain numeric data serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ParametricFile = serde_json::from_str(s)?;
        let base = LtiSystem::try_from(file.base)?;
        let coeff = |rows: Option<Vec<Vec<f64>>>, like: &Matrix| -> Result<Matrix> {
            match rows {
                Some(r) => Ok(matrix_from_rows(&r)?),
                None => Ok(Matrix::zeros(like.nrows(), like.ncols())),
            }
        };
        let terms = file
            .terms
            .into_iter()
            .map(|t| {
                Ok(LtiSystem {
                    a: coeff(t.a, &base.a)?,
                    b: coeff(t.b, &base.b)?,
                    c: coeff(t.c, &base.c)?,
                    d: coeff(t.d, &base.d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, terms, file.parameters)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Benchmark model families.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `A = R − (ρ(R) + margin) I` with Gaussian `R`, Gaussian `B`, `C`, and `D = 0`.
    RandomStable {
        inputs: usize,
        outputs: usize,
        margin: f64,
    },
    /// SISO RC transmission line: driven and observed at the first node, open far end.
    RcLadder,
    /// 1-D heat equation with diffusivity `p ∈ [0.1, 10]`, source near the left boundary,
    /// average-temperature output. Produces a parametric family.
    Heat1d,
    /// `A = diag(λ)`, `B = b` (column), `C = cᵀ` (row).
    Diag {
        lambda: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
    },
}

impl Model {
    pub fn random_stable() -> Self {
        Model::RandomStable {
            inputs: 1,
            outputs: 1,
            margin: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Generated {
    Lti(LtiSystem),
    Parametric(ParametricLtiSystem),
}

impl Generated {
    pub fn into_lti(self) -> Option<LtiSystem> {
        match self {
            Generated::Lti(s) => Some(s),
            Generated::Parametric(_) => None,
        }
    }

    pub fn into_parametric(self) -> Option<ParametricLtiSystem> {
        match self {
            Generated::Parametric(p) => Some(p),
            Generated::Lti(_) => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Generated::Lti(s) => s.to_json(),
            Generated::Parametric(p) => p.to_json(),
        }
    }
}

pub fn generate(model: &Model, order: usize, seed: u64) -> Result<Generated> {
    if order == 0 {
        return Err(Error::BadParameter("model order must be at least 1".into()));
    }
    let n = order;
    match model {
        Model::RandomStable {
            inputs,
            outputs,
            margin,
        } => {
            if *inputs == 0 || *outputs == 0 {
                return Err(Error::BadParameter(
                    "random_stable needs at least one input and one output".into(),
                ));
            }
            if !(margin.is_finite() && *margin > 0.0) {
                return Err(Error::BadParameter(format!(
                    "stability margin must be positive, got {margin}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gauss = |r: usize, c: usize| -> Matrix {
                Matrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
            };
            let r = gauss(n, n);
            let b = gauss(n, *inputs);
            let c = gauss(*outputs, n);
            let rho = linalg::real_schur(&r)?
                .eigenvalues()
                .iter()
                .map(|(re, im)| re.hypot(*im))
                .fold(0.0, f64::max);
            let a = r - Matrix::identity(n, n) * (rho + margin);
            Ok(Generated::Lti(LtiSystem::without_feedthrough(a, b, c)?))
        }
        Model::RcLadder => {
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                a[(i, i)] = -2.0;
                if i + 1 < n {
                    a[(i, i + 1)] = 1.0;
                    a[(i + 1, i)] = 1.0;
                }
            }
            if n > 1 {
                a[(n - 1, n - 1)] = -1.0;
            }
            let mut b = Matrix::zeros(n, 1);
            b[(0, 0)] = 1.0;
            let c = b.transpose();
            Ok(Generated::Lti(LtiSystem::without_feedthrough(a, b, c)?))
        }
        Model::Heat1d => {
            let inv_h = (n + 1) as f64;
            let mut lap = Matrix::zeros(n, n);
            for i in 0..n {
                lap[(i, i)] = -2.0 * inv_h * inv_h;
                if i + 1 < n {
                    lap[(i, i + 1)] = inv_h * inv_h;
                    lap[(i + 1, i)] = inv_h * inv_h;
                }
            }
            let mut b = Matrix::zeros(n, 1);
            b[(0, 0)] = inv_h;
            let c = Matrix::from_element(1, n, 1.0 / n as f64);
            let base = LtiSystem::without_feedthrough(Matrix::zeros(n, n), b, c)?;
            let term = LtiSystem {
                a: lap,
                b: Matrix::zeros(n, 1),
                c: Matrix::zeros(1, n),
                d: Matrix::zeros(1, 1),
            };
            let range = ParameterRange {
                name: "diffusivity".into(),
                min: 0.1,
                max: 10.0,
            };
            Ok(Generated::Parametric(ParametricLtiSystem::new(
                base,
                vec![term],
                vec![range],
            )?))
        }
        Model::Diag { lambda, b, c } => {
            if lambda.len() != n || b.len() != n || c.len() != n {
                return Err(Error::BadParameter(format!(
                    "diag model of order {n} needs {n} eigenvalues and {n} B/C entries"
                )));
            }
            let a = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambda));
            let bm = Matrix::from_column_slice(n, 1, b);
            let cm = Matrix::from_row_slice(1, n, c);
            Ok(Generated::Lti(LtiSystem::without_feedthrough(a, bm, cm)?))
        }
    }
}

/// Seeded benchmark corpus: `count` random stable systems cycling through
/// orders 2, 5, 10, 20 and input/output shapes 1×1, 1×1, 1×1, 2×2, 1×2.
pub fn corpus(count: usize, seed: u64) -> Result<Vec<LtiSystem>> {
    const ORDERS: [usize; 4] = [2, 5, 10, 20];
    (0..count)
        .map(|k| {
            let (inputs, outputs) = match k % 5 {
                3 => (2, 2),
                4 => (2, 1),
                _ => (1, 1),
            };
            let model = Model::RandomStable {
                inputs,
                outputs,
                margin: 0.5,
            };
            let sys = generate(&model, ORDERS[k % 4], seed.wrapping_add(k as u64))?;
            Ok(sys.into_lti().expect("random_stable is not parametric"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64) -> LtiSystem {
        let m = |x| Matrix::from_element(1, 1, x);
        LtiSystem::without_feedthrough(m(a), m(b), m(c)).unwrap()
    }

    #[test]
    fn constructor_checks_dimensions() {
        let err = LtiSystem::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(3, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn spectral_abscissa_examples() {
        let s = generate(
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
        assert_eq!(s.spectral_abscissa().unwrap(), -1.0);
        let z = scalar(0.0, 1.0, 1.0);
        assert_eq!(z.spectral_abscissa().unwrap(), 0.0);
        assert!(matches!(
            z.require_stable(&Tolerances::default()),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn rc_ladder_is_stable_tridiagonal_siso() {
        let s = generate(&Model::RcLadder, 5, 0).unwrap().into_lti().unwrap();
        assert_eq!((s.inputs(), s.outputs()), (1, 1));
        for i in 0..5usize {
            for j in 0..5usize {
                if i.abs_diff(j) > 1 {
                    assert_eq!(s.a[(i, j)], 0.0);
                }
            }
        }
        // Eigenvalues of the ladder are -4 sin²((2k-1)π / (2(2N+1))), k = 1..N.
        let expected = -4.0 * (std::f64::consts::PI / 22.0).sin().powi(2);
        assert!((s.spectral_abscissa().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn random_stable_respects_margin() {
        let s = generate(&Model::random_stable(), 8, 7).unwrap().into_lti().unwrap();
        assert!(s.spectral_abscissa().unwrap() <= -0.5 + 1e-12);
    }

    #[test]
    fn adjoint_is_involution_and_self_adjoint_for_symmetric() {
        let s = generate(&Model::random_stable(), 4, 1).unwrap().into_lti().unwrap();
        assert_eq!(s.adjoint().adjoint(), s);
        let rc = generate(&Model::RcLadder, 4, 0).unwrap().into_lti().unwrap();
        assert_eq!(rc.adjoint(), rc);
    }

    #[test]
    fn error_system_shapes() {
        let s1 = generate(&Model::random_stable(), 3, 1).unwrap().into_lti().unwrap();
        let s2 = generate(&Model::random_stable(), 2, 2).unwrap().into_lti().unwrap();
        let e = s1.error_system(&s2).unwrap();
        assert_eq!(e.states(), 5);
        assert_eq!(e.c[(0, 3)], -s2.c[(0, 0)]);
        let mimo = generate(
            &Model::RandomStable {
                inputs: 2,
                outputs: 1,
                margin: 0.5,
            },
            2,
            3,
        )
        .unwrap()
        .into_lti()
        .unwrap();
        assert!(matches!(s1.error_system(&mimo), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn instantiate_scalar_family_and_clamping() {
        let fam = ParametricLtiSystem::new(
            scalar(0.0, 1.0, 1.0),
            vec![scalar(-1.0, 0.0, 0.0)],
            vec![ParameterRange {
                name: "p".into(),
                min: 1.0,
                max: 2.0,
            }],
        )
        .unwrap();
        assert_eq!(fam.instantiate(&[2.0]).unwrap().a[(0, 0)], -2.0);
        assert_eq!(fam.instantiate(&[5.0]).unwrap().a[(0, 0)], -2.0);
        assert!(matches!(fam.instantiate(&[1.0, 1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn heat1d_midpoint_is_stable() {
        let fam = generate(&Model::Heat1d, 10, 0).unwrap().into_parametric().unwrap();
        let mid = fam.instantiate(&fam.midpoint()).unwrap();
        assert!(mid.spectral_abscissa().unwrap() < 0.0);
    }

    #[test]
    fn json_round_trip_and_missing_d() {
        let s = LtiSystem::from_json_str(r#"{"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]]}"#).unwrap();
        assert_eq!(s.d, Matrix::zeros(1, 1));
        let text = serde_json::to_string(&s.to_json()).unwrap();
        assert_eq!(text, r#"{"A":[[-1.0]],"B":[[1.0]],"C":[[1.0]],"D":[[0.0]]}"#);
        assert!(matches!(LtiSystem::from_json_str("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn parametric_json_missing_term_entries_are_zero() {
        let text = r#"{"base": {"A": [[0.0]], "B": [[1.0]], "C": [[1.0]]},
                       "terms": [{"A": [[-1.0]]}],
                       "parameters": [{"name": "p", "min": 1.0, "max": 2.0}]}"#;
        let fam = ParametricLtiSystem::from_json_str(text).unwrap();
        assert_eq!(fam.terms[0].b, Matrix::zeros(1, 1));
        let again = ParametricLtiSystem::from_json_str(&fam.to_json().to_string()).unwrap();
        assert_eq!(again, fam);
    }

    #[test]
    fn bad_generator_parameters() {
        assert!(matches!(
            generate(&Model::RcLadder, 0, 0),
            Err(Error::BadParameter(_))
        ));
        let diag = Model::Diag {
            lambda: vec![-1.0],
            b: vec![1.0, 2.0],
            c: vec![1.0],
        };
        assert!(matches!(generate(&diag, 1, 0), Err(Error::BadParameter(_))));
    }
}
