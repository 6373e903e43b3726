use thiserror::Error;

use crate::device::Violation;
use crate::linalg::Party;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("matrix is not Hermitian (max |M - M†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("Hermitian eigendecomposition did not converge")]
    EigenConvergence,

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("{party} has no observable named `{name}`")]
    UnknownObservable { party: Party, name: String },

    #[error("expectation value has imaginary part {imag:.3e} above tolerance")]
    NonRealExpectation { imag: f64 },

    #[error("epsilon = {value} outside the admissible range {domain}")]
    EpsilonOutOfRange { value: f64, domain: &'static str },

    #[error("bound argument `{name}` must be nonnegative, got {value}")]
    NegativeArgument { name: &'static str, value: f64 },

    #[error("degenerate extraction: junk norm {raw_norm:.3e} below tolerance {tolerance:.1e}")]
    DegenerateExtraction { raw_norm: f64, tolerance: f64 },

    #[error("device fails validation: {}", join_violations(.0))]
    InvalidDevice(Vec<Violation>),

    #[error("invalid family spec: {0}")]
    InvalidFamily(String),

    #[error("invalid search configuration: {0}")]
    InvalidSearch(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
