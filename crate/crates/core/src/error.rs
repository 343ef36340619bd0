//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model evaluation, control synthesis, and simulation.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A state or parameter contained NaN/inf or violated a model bound.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The inertia matrix could not be factored at this configuration.
    #[error("singular configuration in coordinate `{coordinate}`: {detail}")]
    SingularConfiguration { coordinate: String, detail: String },

    /// The operation needs a different path parameterization.
    #[error("unsupported path mode: {0}")]
    UnsupportedMode(String),

    /// The transversality scalar fell below the usable tolerance.
    #[error(
        "transversality scalar {value:e} vanishes near q_n = {location} (tolerance {tol:e})"
    )]
    VanishingTransversality { value: f64, location: f64, tol: f64 },

    /// The output decoupling matrix is not invertible.
    #[error("singular decoupling matrix: {0}")]
    SingularDecoupling(String),

    /// A fixed-step integration produced a non-finite value or an invalid state.
    #[error("integration failure at t = {t}: {detail}")]
    IntegrationFailure { t: f64, detail: String },

    /// Inconsistent dimensions or malformed construction data.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<V> = std::result::Result<V, CoreError>;
