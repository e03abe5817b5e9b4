//! Asymptotic mean-square stability of stochastic linear two-step Maruyama
//! methods (AB2, AM2, BDF2 and their improved variants) applied to scalar
//! and multi-dimensional linear test SDEs.
//!
//! The crate provides:
//! - exact Schur-Cohn root-location criteria for the degree-4 characteristic
//!   polynomial of the scalar stability matrix ([`polystab`]);
//! - the catalog of two-step schemes and the reduction maps from test
//!   equation parameters to recurrence coefficients ([`schemes`]);
//! - necessary-and-sufficient scalar stability conditions, closed-form
//!   stability regions and conditional step-size bounds ([`scalar`]);
//! - Kronecker-product stability matrices and spectral-radius verdicts for
//!   systems with multi-dimensional noise ([`system`]);
//! - a seedable Monte Carlo engine reproducing the moment experiments
//!   ([`simulate`]).

pub mod error;
pub mod linalg;
pub mod polystab;
pub mod scalar;
pub mod schemes;
pub mod simulate;
pub mod system;

pub use error::{Error, Result};
pub use polystab::{QuarticCoeffs, StabilityStatus, StabilityVerdict};
pub use schemes::{ReducedCoeffs, ScalarTestEq, SchemeName, SystemTestEq};
pub use simulate::{MsTrace, SimConfig, SystemTrace};
