//! Numerical robust self-testing of the maximally entangled two-qubit state.
//!
//! Given a finite-dimensional bipartite device (state plus local ±1
//! observables) the crate measures how far it is from the ideal CHSH or
//! Mayers-Yao correlations, builds the local extraction isometry, measures the
//! actual extraction error, and checks every closed-form robustness bound.

pub mod bounds;
pub mod derive;
pub mod device;
pub mod error;
pub mod explorer;
pub mod isometry;
pub mod linalg;

pub use bounds::{certify, CertificationReport, ReportRow, DEFAULT_CERT_TOL};
pub use device::{DeviceModel, Mode};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Party, StateVector};
