use thiserror::Error;

/// Which of the two rolling manifolds an event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Source => f.write_str("M"),
            Side::Target => f.write_str("M_hat"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {coords:?} lies outside the chart domain")]
    OutOfDomain { coords: Vec<f64> },

    #[error("trajectory left the chart of {side} at t = {time}")]
    DomainExit { side: Side, time: f64 },

    #[error("curve left the chart domain at t = {time}")]
    ChartExit { time: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient (smallest/largest singular value {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("square state matrix must preserve orientation (det = {det})")]
    Orientation { det: f64 },

    #[error("vectors span a degenerate plane")]
    DegeneratePlane,

    #[error("covariant derivative order {0} is not supported (0..=2)")]
    UnsupportedOrder(usize),

    #[error("invalid manifold description: {0}")]
    InvalidManifold(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("isometry is not defined at {coords:?} in this chart")]
    IsometryUndefined { coords: Vec<f64> },

    #[error("controllability verdict requires simply connected manifolds")]
    NotSimplyConnected,
}

impl Error {
    /// Stable machine-readable code, used in CLI reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::DomainExit { .. } => "domain_exit",
            Error::ChartExit { .. } => "chart_exit",
            Error::Dimension(_) => "dimension_mismatch",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::Orientation { .. } => "orientation",
            Error::DegeneratePlane => "degenerate_plane",
            Error::UnsupportedOrder(_) => "unsupported_order",
            Error::InvalidManifold(_) => "invalid_manifold",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::IsometryUndefined { .. } => "isometry_undefined",
            Error::NotSimplyConnected => "not_simply_connected",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
