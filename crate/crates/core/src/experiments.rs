//! Desk-scale harnesses: coverage of a ball cover by found nets, the
//! equidistribution ratio of weighted line integrals, and the length comparison under
//! nearby metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeonetError, Result};
use crate::multigraph::WeightedMultigraph;
use crate::net::{hessian_and_classify, Classification, GammaNet, HessianOptions};
use crate::riemann::geodesic::simpson;
use crate::riemann::{
    geodesic_ivp, metric_distance, Ambient, Builtin, Bump, ChartManifold, ChartPoint, GeodesicSegment, Sample, ScalarField, Vec2,
};
use crate::riemann::{volume, volume_integral};
use crate::solver::{multistart, AreaSampler, MultistartOptions};

/// Coordinate ball in the chart of its center; periodic directions wrap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub chart: usize,
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: ChartPoint, radius: f64) -> Self {
        Ball { chart: center.chart, center: [center.x[0], center.x[1]], radius }
    }

    pub fn contains(&self, m: &ChartManifold, p: &ChartPoint, tol: f64) -> bool {
        let Some(q) = m.to_chart(p, self.chart) else { return false };
        let d = m.chart(self.chart).wrap_delta(q.x - Vec2::new(self.center[0], self.center[1]));
        d.norm() <= self.radius + tol
    }
}

/// `k × k` balls centered on a uniform grid over a rectangular chart region.
pub fn grid_cover(m: &ChartManifold, k: usize, radius: f64) -> Result<Vec<Ball>> {
    let chart = m.chart(0);
    let crate::riemann::Region::Rect(b) = chart.region else {
        return Err(GeonetError::InvalidInput("grid covers need a rectangular chart region".into()));
    };
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let x = b[0][0] + (i as f64 + 0.5) * (b[0][1] - b[0][0]) / k as f64;
            let y = b[1][0] + (j as f64 + 0.5) * (b[1][1] - b[1][0]) / k as f64;
            out.push(Ball::new(ChartPoint::new(0, x, y), radius));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct FoundNet {
    pub graph: usize,
    pub length: f64,
    pub classification: Classification,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallCoverage {
    pub ball: Ball,
    pub hit: bool,
    /// Indices into `CoverageReport::nets`.
    pub nets: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub seeds: usize,
    pub rng_seed: u64,
    pub nets: Vec<FoundNet>,
    pub balls: Vec<BallCoverage>,
    pub fraction: f64,
    /// Evidence only: a finite scan says nothing about density.
    pub caveat: &'static str,
}

pub const DENSITY_CAVEAT: &str = "coverage by nets found from finitely many seeds; evidence, not a density certificate";

#[derive(Clone, Copy, Debug)]
pub struct ScanOptions {
    pub seeds: usize,
    pub rng_seed: u64,
    pub workers: usize,
    pub tol_geo: f64,
    pub hessian: HessianOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { seeds: 20, rng_seed: 0, workers: 1, tol_geo: 1e-5, hessian: HessianOptions::default() }
    }
}

/// Multistart on every graph, then records which balls meet the image of which net.
pub fn density_scan(
    m: &ChartManifold,
    graphs: &[WeightedMultigraph],
    cover: &[Ball],
    opts: &ScanOptions,
) -> Result<(CoverageReport, Vec<GammaNet>)> {
    if let Some(k) = graphs.iter().position(|g| !g.is_good()) {
        return Err(GeonetError::Graph(format!("graph {k} is not good")));
    }
    for b in cover {
        m.check_point(&ChartPoint::new(b.chart, b.center[0], b.center[1]))?;
    }
    let mut found = Vec::new();
    let mut nets = Vec::new();
    for (k, g) in graphs.iter().enumerate() {
        let ms = MultistartOptions { seeds: opts.seeds, rng_seed: opts.rng_seed, workers: opts.workers, ..Default::default() };
        for net in multistart(m, g, &ms)?.nets {
            let classification = match hessian_and_classify(&net, &opts.hessian) {
                Ok(r) => r.classification,
                Err(_) => Classification::Indeterminate,
            };
            found.push(FoundNet { graph: k, length: net.length(), classification });
            nets.push(net);
        }
    }
    let samples: Vec<Vec<ChartPoint>> =
        nets.iter().map(|n| n.edges().keys().flat_map(|e| n.edge_samples(*e)).collect()).collect();
    let balls: Vec<BallCoverage> = cover
        .iter()
        .map(|b| {
            let hits: Vec<usize> = samples
                .iter()
                .enumerate()
                .filter(|(_, pts)| pts.iter().any(|p| b.contains(m, p, opts.tol_geo)))
                .map(|(i, _)| i)
                .collect();
            BallCoverage { ball: *b, hit: !hits.is_empty(), nets: hits }
        })
        .collect();
    let fraction = if balls.is_empty() { 0.0 } else { balls.iter().filter(|b| b.hit).count() as f64 / balls.len() as f64 };
    let report =
        CoverageReport { seeds: opts.seeds, rng_seed: opts.rng_seed, nets: found, balls, fraction, caveat: DENSITY_CAVEAT };
    Ok((report, nets))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Equidistribution {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// `∫ f dl` over a piece by Simpson on its samples.
fn piece_integral<F: ScalarField + ?Sized>(m: &ChartManifold, seg: &GeodesicSegment, f: &F) -> (f64, f64) {
    let speeds: Vec<f64> = seg.samples.iter().map(|s| m.norm(&s.point, &s.velocity)).collect();
    let weighted: Vec<f64> = seg.samples.iter().zip(&speeds).map(|(s, v)| f.value(m, &s.point) * v).collect();
    (simpson(&weighted, 1.0), simpson(&speeds, 1.0))
}

/// Weighted line average of `f` over the nets against its volume average. All nets
/// must live on the same atlas; the volume side uses the first net's metric.
pub fn equidistribution_ratio<F: ScalarField + ?Sized>(nets: &[GammaNet], f: &F) -> Result<Equidistribution> {
    let first = nets.first().ok_or_else(|| GeonetError::InvalidInput("no nets given".into()))?;
    let m = first.manifold();
    let (mut num, mut den) = (0.0, 0.0);
    for net in nets {
        for (e, ne) in net.edges() {
            let n = net.multiplicity(*e) as f64;
            for seg in &ne.pieces {
                let (a, l) = piece_integral(net.manifold(), seg, f);
                num += n * a;
                den += n * l;
            }
        }
    }
    if !(den > 0.0) {
        return Err(GeonetError::ZeroTotalLength);
    }
    let lhs = num / den;
    let rhs = volume_integral(m, f)? / volume(m)?;
    Ok(Equidistribution { lhs, rhs, gap: (lhs - rhs).abs() })
}

/// Uniformly random rotation (Shoemake's construction).
fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = Quaternion::new(a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    UnitQuaternion::from_quaternion(q)
}

/// The theta net of a round sphere turned by a rotation of the ambient space. Each
/// meridian carries five waypoints so that every piece is a sixth of a half circle
/// whatever chart its ends land in.
pub fn rotated_theta(radius: f64, rotation: &UnitQuaternion<f64>) -> Result<GammaNet> {
    let m = ChartManifold::round_sphere(radius);
    let at = |phi: f64, alpha: f64| -> Result<ChartPoint> {
        let a = rotation * Vector3::new(phi.sin() * alpha.cos(), phi.sin() * alpha.sin(), -phi.cos()) * radius;
        m.from_ambient(&Ambient::new(a[0], a[1], a[2], 0.0))
            .ok_or_else(|| GeonetError::InvalidInput("rotated point has no chart".into()))
    };
    let mut g = WeightedMultigraph::new();
    let (south, north) = (g.add_vertex(), g.add_vertex());
    let mut waypoints = BTreeMap::new();
    for k in 0..3 {
        let alpha = 2.0 * PI * k as f64 / 3.0;
        let e = g.add_edge(south, north, 1)?;
        waypoints.insert(e, (1..6).map(|j| at(PI * j as f64 / 6.0, alpha)).collect::<Result<Vec<_>>>()?);
    }
    let positions = BTreeMap::from([(south, at(0.0, 0.0)?), (north, at(PI, 0.0)?)]);
    GammaNet::build(m, g, positions, waypoints, BTreeSet::new())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrendRow {
    pub k: usize,
    pub mean_gap: f64,
    pub trials: usize,
}

/// Mean equidistribution gap of `k` random rotations of the theta net, per `k`.
/// Deterministic in `rng_seed`: trial `i` of size `k` uses stream `k·2³² + i`.
pub fn theta_trend<F: ScalarField + ?Sized>(ks: &[usize], trials: usize, rng_seed: u64, f: &F) -> Result<Vec<TrendRow>> {
    let mut rows = Vec::new();
    for &k in ks {
        let mut total = 0.0;
        for i in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(((k as u64) << 32) + i as u64);
            let nets = (0..k).map(|_| rotated_theta(1.0, &random_rotation(&mut rng))).collect::<Result<Vec<_>>>()?;
            total += equidistribution_ratio(&nets, f)?.gap;
        }
        rows.push(TrendRow { k, mean_gap: total / trials.max(1) as f64, trials });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzRow {
    pub curve: usize,
    pub l1: f64,
    pub l2: f64,
    pub s: f64,
    pub bound: f64,
    /// `bound − (l1 − l2)`; negative beyond the tolerance is a violation.
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    /// Grid supremum of `|g1(v,v) − g2(v,v)| / gref(v,v)`.
    pub grid_s: f64,
    pub rows: Vec<LipschitzRow>,
    pub min_slack: f64,
    pub max_slack: f64,
    pub violations: Vec<usize>,
    pub tolerance: f64,
}

pub const LIPSCHITZ_TOL: f64 = 1e-6;

/// Checks `L₁ − L₂ ≤ ((1+s)^{1/2} − 1)·L₂` on sampled curves. `s` is the larger of the
/// grid supremum and the supremum over the curve's own samples, so the inequality holds
/// pointwise along every curve and its Simpson sums.
pub fn lipschitz_check(
    gref: &ChartManifold,
    g1: &ChartManifold,
    g2: &ChartManifold,
    curves: &[Vec<Sample>],
) -> Result<LipschitzReport> {
    let grid_s = metric_distance(gref, g1, g2)?.value;
    let rows: Vec<LipschitzRow> = curves
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut s = grid_s;
            let mut sp1 = Vec::with_capacity(c.len());
            let mut sp2 = Vec::with_capacity(c.len());
            for smp in c {
                let a = g1.inner(&smp.point, &smp.velocity, &smp.velocity);
                let b = g2.inner(&smp.point, &smp.velocity, &smp.velocity);
                let r = gref.inner(&smp.point, &smp.velocity, &smp.velocity);
                if r > 0.0 {
                    s = s.max((a - b).abs() / r);
                }
                sp1.push(a.max(0.0).sqrt());
                sp2.push(b.max(0.0).sqrt());
            }
            let (l1, l2) = (simpson(&sp1, 1.0), simpson(&sp2, 1.0));
            let bound = ((1.0 + s).sqrt() - 1.0) * l2;
            LipschitzRow { curve: i, l1, l2, s, bound, slack: bound - (l1 - l2) }
        })
        .collect();
    let violations = rows.iter().filter(|r| r.slack < -LIPSCHITZ_TOL).map(|r| r.curve).collect();
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let max_slack = rows.iter().map(|r| r.slack).fold(f64::NEG_INFINITY, f64::max);
    Ok(LipschitzReport { grid_s, rows, min_slack, max_slack, violations, tolerance: LIPSCHITZ_TOL })
}

/// Random geodesic segments of `m`: area-uniform starts, uniform directions, lengths
/// uniform in `(0.05, 0.9)·inj`. Deterministic in `rng_seed`.
pub fn random_segments(m: &ChartManifold, count: usize, rng_seed: u64) -> Result<Vec<Vec<Sample>>> {
    let sampler = AreaSampler::new(m)?;
    let inj = m.inj_radius_lb();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i as u64);
            let p = sampler.sample(m, &mut rng);
            let th = rng.random_range(0.0..2.0 * PI);
            let v = Vec2::new(th.cos(), th.sin());
            let v = v / m.norm(&p, &v);
            let len = rng.random_range(0.05..0.9) * inj;
            Ok(geodesic_ivp(m, p, v, len)?.samples)
        })
        .collect()
}

/// Random smooth bumps: area-uniform centers, coordinate radii uniform in
/// `(0.2, 0.8)·min(inj, 1.5)`, amplitudes uniform in `(0.5, 2)`. Deterministic in `rng_seed`.
pub fn random_bumps(m: &ChartManifold, count: usize, rng_seed: u64) -> Result<Vec<Bump>> {
    let sampler = AreaSampler::new(m)?;
    let scale = m.inj_radius_lb().min(1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(u64::MAX);
    (0..count)
        .map(|_| {
            let c = sampler.sample(m, &mut rng);
            Bump::new(c, rng.random_range(0.2..0.8) * scale, rng.random_range(0.5..2.0))
        })
        .collect()
}

/// Whether `m` is one of the surfaces with an ambient embedding.
pub fn has_embedding(m: &ChartManifold) -> bool {
    !matches!(m.builtin(), Builtin::Custom)
}
