//! Geometry kernel: charts and metrics, Christoffel symbols, geodesics, parallel
//! transport, curve lengths, volume integrals and the distance between metrics.

pub mod expr;
pub mod family;
pub mod geodesic;
pub mod manifold;
pub mod metric_space;
pub mod quadrature;

pub use family::{Bump, BumpProfile, MetricFamily};
pub use geodesic::{
    geodesic_bvp, geodesic_bvp_with, geodesic_ivp, parallel_transport, BvpOptions, GeodesicSegment, Sample,
};
pub use manifold::{
    Ambient, Builtin, Chart, ChartManifold, ChartPoint, Christoffel, ConformalFactor, Geometry, Mat2,
    MetricField, Region, Transition, TransitionMap, Vec2,
};
pub use metric_space::{metric_distance, metric_distance_with, MetricDistance};
pub use quadrature::{volume, volume_integral, volume_integral_with, ScalarField};
