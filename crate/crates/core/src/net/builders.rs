//! Standard nets used by tests, examples and seeding.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use super::GammaNet;
use crate::error::{GeonetError, Result};
use crate::multigraph::WeightedMultigraph;
use crate::riemann::{geodesic_ivp, ChartManifold, ChartPoint, Vec2};

/// A closed geodesic as a one-vertex loop: start at `start`, follow `direction` for
/// `length`, and place `breaks - 1` waypoints at equal parameter spacing.
pub fn closed_geodesic_net(
    m: &ChartManifold,
    start: ChartPoint,
    direction: Vec2,
    length: f64,
    breaks: usize,
    multiplicity: u32,
) -> Result<GammaNet> {
    if breaks < 3 {
        return Err(GeonetError::InvalidInput("a closed geodesic needs at least 3 break points".into()));
    }
    let unit = direction / m.norm(&start, &direction);
    let seg = geodesic_ivp(m, start, unit, length)?;
    let mut waypoints = Vec::with_capacity(breaks - 1);
    for j in 1..breaks {
        waypoints.push(m.canonical(&seg.point_at(m, j as f64 / breaks as f64)?));
    }
    let mut g = WeightedMultigraph::new();
    let v = g.add_vertex();
    let e = g.add_edge(v, v, multiplicity)?;
    GammaNet::build(
        m.clone(),
        g,
        BTreeMap::from([(v, start)]),
        BTreeMap::from([(e, waypoints)]),
        BTreeSet::new(),
    )
}

/// Three meridians of the round sphere at 120° joining the poles; each meridian has a
/// waypoint on the equator.
pub fn theta_sphere(radius: f64) -> Result<GammaNet> {
    theta_sphere_rotated(radius, 0.0)
}

/// As [`theta_sphere`] with the meridians turned by `phase` about the polar axis.
pub fn theta_sphere_rotated(radius: f64, phase: f64) -> Result<GammaNet> {
    let m = ChartManifold::round_sphere(radius);
    let mut g = WeightedMultigraph::new();
    let south = g.add_vertex();
    let north = g.add_vertex();
    let mut waypoints = BTreeMap::new();
    for k in 0..3 {
        let th = phase + 2.0 * PI * k as f64 / 3.0;
        let e = g.add_edge(south, north, 1)?;
        waypoints.insert(e, vec![ChartPoint::new(0, th.cos(), th.sin())]);
    }
    let positions = BTreeMap::from([(south, ChartPoint::new(0, 0.0, 0.0)), (north, ChartPoint::new(1, 0.0, 0.0))]);
    GammaNet::build(m, g, positions, waypoints, BTreeSet::new())
}

/// The same as [`closed_geodesic_net`] for a great circle of the round sphere with
/// `breaks` pieces.
pub fn great_circle_net(m: &ChartManifold, start: ChartPoint, direction: Vec2, breaks: usize) -> Result<GammaNet> {
    let radius = match m.builtin() {
        crate::riemann::Builtin::RoundSphere { radius } => radius,
        _ => return Err(GeonetError::InvalidInput("great circles need the round sphere".into())),
    };
    closed_geodesic_net(m, start, direction, 2.0 * PI * radius, breaks, 1)
}

/// Three pinned corners joined to one free center vertex.
pub fn fermat_tripod(m: &ChartManifold, corners: [ChartPoint; 3], center: ChartPoint) -> Result<GammaNet> {
    let mut g = WeightedMultigraph::new();
    let c = g.add_vertex();
    let mut positions = BTreeMap::from([(c, center)]);
    let mut pinned = BTreeSet::new();
    for p in corners {
        let v = g.add_vertex();
        g.add_edge(c, v, 1)?;
        positions.insert(v, p);
        pinned.insert(v);
    }
    GammaNet::build(m.clone(), g, positions, BTreeMap::new(), pinned)
}
