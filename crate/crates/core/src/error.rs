use thiserror::Error;

/// Errors raised by samplers, integrators and the study harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A distribution or model parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A state value lies outside the domain of the sampler or model.
    #[error("state outside domain: {0}")]
    Domain(String),
    /// A run or study configuration is inconsistent (grids, stability bounds, brackets).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The requested computation needs information the model does not provide.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// An order fit could not be performed.
    #[error("fit rejected: {0}")]
    Fit(String),
    /// An implicit stage failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// A sub-step failed while advancing a path.
    #[error("path aborted at step {step} (t = {t}): {source}")]
    PathAborted {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips any [`Error::PathAborted`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::PathAborted { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors that describe a bad configuration rather than a runtime failure.
    pub fn is_configuration(&self) -> bool {
        matches!(self, Error::Parameter(_) | Error::Config(_) | Error::Unsupported(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
