use thiserror::Error;

pub type Result<T> = std::result::Result<T, GeonetError>;

#[derive(Debug, Error)]
pub enum GeonetError {
    #[error("point ({x}, {y}) lies outside the domain of chart {chart}")]
    PointOutsideChart { chart: usize, x: f64, y: f64 },

    #[error("metric is not positive definite in chart {chart} at ({x}, {y})")]
    MetricNotPositiveDefinite { chart: usize, x: f64, y: f64 },

    #[error("no transition carries the point out of chart {chart}")]
    NoTransition { chart: usize },

    #[error("geodesic integration failed: {0}")]
    Integration(String),

    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    BvpNoConvergence { iterations: usize, residual: f64 },

    #[error("geodesic of length {length} is outside the uniqueness regime (injectivity radius bound {bound})")]
    OutsideUniqueness { length: f64, bound: f64 },

    #[error("degenerate edge{}: endpoints coincide or length vanishes", .edge.map(|e| format!(" {e}")).unwrap_or_default())]
    DegenerateEdge { edge: Option<usize> },

    #[error("metric fields are defined on incompatible atlases")]
    IncompatibleAtlases,

    #[error("charts do not cover the manifold: {0}")]
    PartitionGap(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("net is not stationary: defect {defect:e} exceeds {tol:e}")]
    NotStationary { defect: f64, tol: f64 },

    #[error("edge {edge} collapsed to length {length:e}")]
    EdgeCollapse { edge: usize, length: f64 },

    #[error("no convergence within {iterations} iterations (defect {defect:e})")]
    NonConvergence { iterations: usize, defect: f64 },

    #[error("ambiguous geometry between {what}: separation {distance:e} inside the refusal band")]
    AmbiguousGeometry { what: String, distance: f64 },

    #[error("continuation failed at t = {t}: step fell below {min_step:e}")]
    ContinuationFailure { t: f64, min_step: f64 },

    #[error("total length is zero")]
    ZeroTotalLength,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GeonetError {
    /// Short machine-readable tag used in failure records.
    pub fn kind(&self) -> &'static str {
        match self {
            GeonetError::PointOutsideChart { .. } => "point_outside_chart",
            GeonetError::MetricNotPositiveDefinite { .. } => "metric_not_positive_definite",
            GeonetError::NoTransition { .. } => "no_transition",
            GeonetError::Integration(_) => "integration_failure",
            GeonetError::BvpNoConvergence { .. } => "bvp_no_convergence",
            GeonetError::OutsideUniqueness { .. } => "outside_uniqueness_regime",
            GeonetError::DegenerateEdge { .. } => "degenerate edge",
            GeonetError::IncompatibleAtlases => "incompatible_atlases",
            GeonetError::PartitionGap(_) => "partition_gap",
            GeonetError::Graph(_) => "invalid_graph",
            GeonetError::NotStationary { .. } => "not_stationary",
            GeonetError::EdgeCollapse { .. } => "edge_collapse",
            GeonetError::NonConvergence { .. } => "non_convergence",
            GeonetError::AmbiguousGeometry { .. } => "ambiguous_geometry",
            GeonetError::ContinuationFailure { .. } => "continuation_failure",
            GeonetError::ZeroTotalLength => "zero_total_length",
            GeonetError::InvalidInput(_) => "invalid_input",
            GeonetError::Io(_) => "io",
            GeonetError::Json(_) => "invalid_input",
        }
    }

    /// Input validation failures, as opposed to numerical ones.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            GeonetError::PointOutsideChart { .. }
                | GeonetError::MetricNotPositiveDefinite { .. }
                | GeonetError::DegenerateEdge { .. }
                | GeonetError::IncompatibleAtlases
                | GeonetError::PartitionGap(_)
                | GeonetError::Graph(_)
                | GeonetError::InvalidInput(_)
                | GeonetError::Io(_)
                | GeonetError::Json(_)
        )
    }
}
