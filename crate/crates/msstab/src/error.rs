//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A denominator in the Schur coefficient recursion underflowed the
    /// configured floor; the criterion must fall back to the root oracle.
    #[error("degenerate denominator {index} in Schur coefficient recursion")]
    DegenerateDenominator { index: usize },

    /// Iterative solver hit its iteration cap.
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    /// The Jury form and the Elaydi form of the third Schur-Cohn condition
    /// disagree beyond tolerance; signals a conditioning problem.
    #[error("criterion disagreement: jury margin {jury:e}, elaydi margin {elaydi:e}")]
    CriterionDisagreement { jury: f64, elaydi: f64 },

    /// `1 - beta0 * h * lambda` vanished; the implicit scheme is not solvable
    /// at this step size.
    #[error("singular denominator 1 - beta0*h*lambda (|.| = {magnitude:e})")]
    SingularDenominator { magnitude: f64 },

    /// `alpha0*I - h*beta0*F` is singular or too ill-conditioned to invert.
    #[error("singular resolvent alpha0*I - h*beta0*F (cond estimate {cond:e})")]
    SingularResolvent { cond: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// An operation was called outside its stated domain (e.g. the
    /// Adams-Bashforth/Moulton conditions with d != 0).
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),

    /// Step-size bounds require parameters inside the SDE stability domain.
    #[error("parameters outside the mean-square stability domain of the SDE")]
    OutsideDomain,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
