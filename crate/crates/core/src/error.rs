use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("matrix is not hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("matrix is not unitary: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{what} did not converge: achieved {achieved:.3e}, target {target:.3e}")]
    Convergence {
        what: String,
        achieved: f64,
        target: f64,
    },

    #[error("consistency check '{what}' failed: discrepancy {discrepancy:.3e} exceeds {threshold:.3e}")]
    Consistency {
        what: String,
        discrepancy: f64,
        threshold: f64,
    },
}

impl Error {
    /// True for failures that come from running out of budget rather than bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::Consistency { .. } | Error::Numerical(_)
        )
    }
}
