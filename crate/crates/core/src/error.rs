use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate channel: smallest singular value {sigma_f:e} below rank tolerance (largest {sigma_1:e})")]
    DegenerateChannel { sigma_1: f64, sigma_f: f64 },

    #[error("ill-conditioned singular-value gap {gap:e} (relative to sigma_1^2 = {sigma_1_sq:e})")]
    IllConditionedGap { gap: f64, sigma_1_sq: f64 },

    #[error("orientation error: analysis needs rows <= cols, got {rows}x{cols}; pass the transpose")]
    Orientation { rows: usize, cols: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("prediction outside validity region: {0}")]
    ValidityRange(String),

    #[error("config error: {0}")]
    Config(String),
}
