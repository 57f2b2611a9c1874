use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("system is not asymptotically stable (spectral abscissa {abscissa:.6e})")]
    Unstable { abscissa: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("singular value {index} is zero to working precision")]
    ZeroSingularValue { index: usize },
    #[error("bad reduction order {order} for a system of order {states}")]
    BadOrder { order: usize, states: usize },
    #[error("Glover construction degenerate: {0}")]
    DegenerateGamma(String),
    #[error("Gramian is indefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    Indefinite { min_eigenvalue: f64 },
    #[error("no stable point in the parameter grid")]
    AllPointsUnstable,
    #[error("Sylvester equation is singular: spectra of the coefficients overlap")]
    SylvesterSingular,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 domain errors, 3 i/o or parse errors, 4 numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Parse(_) => 3,
            Error::Linalg(LinalgError::NonConvergence { .. })
            | Error::Linalg(LinalgError::Overflow)
            | Error::Linalg(LinalgError::Singular { .. })
            | Error::SylvesterSingular
            | Error::Indefinite { .. }
            | Error::DegenerateGamma(_) => 4,
            _ => 2,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
