use thiserror::Error;

#[derive(Debug, Error)]
pub enum SlerbError {
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("channel trace has imaginary part {0:.3e}")]
    ComplexTrace(f64),
    #[error("catalogue search failed: found {found} distinct Cliffords by word length {max_len}")]
    CatalogueIncomplete { found: usize, max_len: usize },
    #[error("group closure exceeded {0} elements")]
    GroupTooLarge(usize),
    #[error("trivial block has no eigenvalue near 1 (closest {0:.6})")]
    NotTracePreserving(f64),
    #[error("invalid transfer rates: {0}")]
    InvalidRates(String),
    #[error("Fock truncation too small: top-level population {0:.3e}")]
    FockTruncation(f64),
    #[error("integrator did not converge after {0} steps per half gate")]
    Integrator(usize),
    #[error("invalid error injection: {0}")]
    Injection(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("fit did not converge: {0}")]
    FitFailed(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SlerbError>;
