//! Distance between metric fields and lengths of sampled curves.

use std::f64::consts::PI;

use super::geodesic::{simpson, Sample};
use super::manifold::{region_grid, ChartManifold, ChartPoint, Vec2};
use crate::error::{GeonetError, Result};

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_DIRECTIONS: usize = 32;

/// Sampled estimate of `sup_{v≠0} |g1(v,v) - g2(v,v)| / gref(v,v)`; a lower bound for
/// the true supremum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricDistance {
    pub value: f64,
    pub grid_per_dim: usize,
    pub directions: usize,
    /// Sample point attaining the estimate.
    pub argmax: ChartPoint,
}

pub fn metric_distance(gref: &ChartManifold, g1: &ChartManifold, g2: &ChartManifold) -> Result<MetricDistance> {
    metric_distance_with(gref, g1, g2, DEFAULT_GRID, DEFAULT_DIRECTIONS)
}

pub fn metric_distance_with(
    gref: &ChartManifold,
    g1: &ChartManifold,
    g2: &ChartManifold,
    grid: usize,
    directions: usize,
) -> Result<MetricDistance> {
    if !gref.same_atlas(g1) || !gref.same_atlas(g2) {
        return Err(GeonetError::IncompatibleAtlases);
    }
    let dirs: Vec<Vec2> = (0..directions)
        .map(|k| {
            // quadratic forms are even, so half a circle of directions suffices
            let th = PI * k as f64 / directions as f64;
            Vec2::new(th.cos(), th.sin())
        })
        .collect();
    let mut best = MetricDistance {
        value: 0.0,
        grid_per_dim: grid,
        directions,
        argmax: ChartPoint::new(0, 0.0, 0.0),
    };
    for (id, chart) in gref.charts().iter().enumerate() {
        for x in region_grid(&chart.region, grid) {
            let a = g1.metric_unchecked(id, &x);
            let b = g2.metric_unchecked(id, &x);
            let r = gref.metric_unchecked(id, &x);
            for v in &dirs {
                let ratio = ((a * v).dot(v) - (b * v).dot(v)).abs() / (r * v).dot(v);
                if ratio > best.value {
                    best.value = ratio;
                    best.argmax = ChartPoint { chart: id, x };
                }
            }
        }
    }
    Ok(best)
}

/// Length of a uniformly parametrized sampled curve under the metric of `m`, by
/// composite Simpson on the speed.
pub fn sampled_length(m: &ChartManifold, samples: &[Sample]) -> f64 {
    let speeds: Vec<f64> = samples.iter().map(|s| m.norm(&s.point, &s.velocity)).collect();
    simpson(&speeds, 1.0)
}

/// Length of a chart polyline whose vertices are joined by coordinate-straight pieces.
pub fn polyline_length(m: &ChartManifold, points: &[ChartPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let d = m.chart(a.chart).wrap_delta(b.x - a.x);
            let at = |s: f64| m.norm(&ChartPoint { chart: a.chart, x: a.x + d * s }, &d);
            (at(0.0) + 4.0 * at(0.5) + at(1.0)) / 6.0
        })
        .sum()
}
