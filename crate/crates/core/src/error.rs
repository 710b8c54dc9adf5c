use thiserror::Error;

/// Which admissibility inequality failed at a state point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `h < 1/2` (or below the configured margin).
    HBelowThreshold,
    /// `h^2 >= 3`, i.e. non-positive isentropic pressure.
    PressureNonPositive,
    /// `theta <= 0` (or below margin).
    ThetaNonPositive,
    /// `q <= 0` (or below margin).
    QNonPositive,
    /// `P - q <= 0` (or below margin).
    PMinusQNonPositive,
    /// `Q = P + (1 - 2a) q <= 0`.
    QTotalNonPositive,
    /// A non-finite value was produced.
    NonFinite,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Violation::HBelowThreshold => "h >= h_min",
            Violation::PressureNonPositive => "h^2 < 3 (pressure positivity)",
            Violation::ThetaNonPositive => "theta > 0",
            Violation::QNonPositive => "q > 0",
            Violation::PMinusQNonPositive => "P - q > 0",
            Violation::QTotalNonPositive => "Q = P + (1-2a)q > 0",
            Violation::NonFinite => "finite state",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("admissibility violated: {violation} (value {value:.6e})")]
    Admissibility { violation: Violation, value: f64 },

    #[error(
        "degenerate transform: h = {value:.6e} below {threshold} at column {column}, row {row}"
    )]
    DegenerateTransform {
        column: usize,
        row: usize,
        value: f64,
        threshold: f64,
    },

    #[error("unsupported outflow family: {0}")]
    UnsupportedFamily(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("degenerate diffusion: coefficient {value:.3e} below {floor:.3e}")]
    DegenerateDiffusion { value: f64, floor: f64 },

    #[error("singular tridiagonal system at row {row} (pivot {pivot:.3e})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("config syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn violation(violation: Violation, value: f64) -> Error {
    Error::Admissibility { violation, value }
}
