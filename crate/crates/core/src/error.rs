use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("component index {index} out of range for {n} components")]
    ComponentIndex { index: usize, n: usize },

    #[error("non-finite input")]
    NonFiniteInput,

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("matrix not symmetric: max asymmetry {max_asym:.3e} exceeds {tol:.3e}")]
    NotSymmetric { max_asym: f64, tol: f64 },

    #[error("{0}")]
    Msg(String),

    #[error("no batching regime: gamma {gamma:.6e} exceeds gamma* {gamma_star:.6e}, u* is identically 0")]
    NoBatchingRegime { gamma: f64, gamma_star: f64 },

    #[error("checkpoint grids do not match")]
    GridMismatch,

    #[error("fixed-step integration failed to reach tolerance {tol:.1e} (best {achieved:.3e})")]
    StepSize { tol: f64, achieved: f64 },

    #[error("sample {sample} diverged at step {step}")]
    SampleDiverged { sample: u64, step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn msg(s: impl Into<String>) -> Self {
        Error::Msg(s.into())
    }
}
