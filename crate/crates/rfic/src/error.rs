use thiserror::Error;

/// Everything that can go wrong across the toolkit.
///
/// The variants split into two families that callers treat differently:
/// description problems (`Config`, `Domain`, `Dimension`, `Json`, `Io`,
/// `Csv`) which mean the input never made sense, and numerical problems
/// (`Singular`, `RankDeficient`, `Regime`) which mean a well-formed
/// instance defeated a solver. The CLI maps the first family to exit
/// code 1 and the second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario, geometry, or experiment description failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A numeric argument is outside the domain of the function it was
    /// passed to (for example a non-positive link distance).
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix shapes do not match the scenario they were built for.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// The stacked cancellation matrix is numerically singular, so the
    /// exactly-determined closed form has no stable answer.
    #[error("singular stacked system: |det| = {det_magnitude:.3e} is at or below floor {floor:.3e}")]
    Singular { det_magnitude: f64, floor: f64 },

    /// The stacked cancellation matrix lost row rank, so exact
    /// cancellation of every receive dimension is impossible.
    #[error("rank-deficient stacked system: rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    /// A regime-specific solver was handed an instance from a different
    /// regime (wrong relation between surface size and receive count).
    #[error("regime error: {0}")]
    Regime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for the variants that indicate a numerical failure on a
    /// well-formed instance rather than a bad description.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::RankDeficient { .. } | Error::Regime(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
