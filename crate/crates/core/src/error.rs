use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("eigensolver failed on a {dim}x{dim} matrix (info = {info}){context}")]
    Solver {
        dim: usize,
        info: i32,
        context: String,
    },

    #[error("ambiguous left/right pairing: {first} and {second} both lie within {tol:e} of target {target}")]
    PairingAmbiguity {
        target: Complex64,
        first: Complex64,
        second: Complex64,
        tol: f64,
    },

    #[error("ill-conditioned eigenpair at E = {energy}: |<l, r>| = {overlap:e} before rescaling")]
    IllConditioned { energy: Complex64, overlap: f64 },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("vector length {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("left/right vectors are not biorthogonally paired: <l, r> = {overlap}")]
    Unpaired { overlap: Complex64 },

    #[error("profile has only {usable} usable points above the noise floor; need {required}")]
    InsufficientPoints { usable: usize, required: usize },

    #[error("chain {chain} carries no amplitude (max = {max:e})")]
    EmptyChain { chain: char, max: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("grid is not uniform: {0}")]
    NonUniformGrid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
