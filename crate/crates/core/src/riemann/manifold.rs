use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2, Vector4};

use super::expr::Expr;
use super::family::BumpProfile;
use crate::error::{GeonetError, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;
/// Comparison coordinates used for distances between points in different charts.
pub type Ambient = Vector4<f64>;

/// Christoffel symbols `gamma[k][i][j]` = Γ^k_ij.
pub type Christoffel = [[[f64; 2]; 2]; 2];

/// Stereographic charts hop to the opposite pole chart beyond this coordinate radius.
const STEREO_HOP_RADIUS: f64 = 1.25;
const STEREO_DOMAIN: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint {
    pub chart: usize,
    pub x: Vec2,
}

impl ChartPoint {
    pub fn new(chart: usize, x: f64, y: f64) -> Self {
        ChartPoint { chart, x: Vec2::new(x, y) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    FlatTorus { a: f64, b: f64 },
    RoundSphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    Custom,
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::FlatTorus { .. } => "flat_torus",
            Builtin::RoundSphere { .. } => "round_sphere",
            Builtin::Ellipsoid { .. } => "ellipsoid",
            Builtin::Custom => "custom",
        }
    }
}

#[derive(Clone, Debug)]
pub enum MetricField {
    Euclidean,
    /// Pullback of the round sphere of the given radius by a stereographic projection.
    SphereStereo { radius: f64 },
    /// Pullback of the ellipsoid with semi-axes `axes` by the unit-sphere stereographic
    /// parametrization; `sign` is +1 for projection from the north pole, -1 from the south.
    EllipsoidStereo { axes: [f64; 3], sign: f64 },
    /// Entries `g_ij` as expressions in `x1, x2`.
    Expr(Arc<[[Expr; 2]; 2]>),
}

/// Region of a chart used for quadrature and seeding; the regions of all charts
/// partition the manifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Rect([[f64; 2]; 2]),
    Disk { radius: f64 },
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub domain: [[f64; 2]; 2],
    pub periodic: [bool; 2],
    pub metric: MetricField,
    pub region: Region,
    stereo: bool,
}

impl Chart {
    pub fn new(domain: [[f64; 2]; 2], periodic: [bool; 2], metric: MetricField, region: Region) -> Self {
        Chart { domain, periodic, metric, region, stereo: false }
    }

    /// Factor by which uniform arc-length steps must be refined to keep the relative
    /// chart step near `x` as fine as at the unit circle. 1 for non-stereographic charts.
    pub fn distortion(&self, x: &Vec2) -> f64 {
        if !self.stereo {
            return 1.0;
        }
        let r = x.norm();
        ((1.0 + r * r) / (2.0 * r.max(1.0))).max(1.0)
    }

    pub fn period(&self, i: usize) -> Option<f64> {
        self.periodic[i].then(|| self.domain[i][1] - self.domain[i][0])
    }

    pub fn contains(&self, x: &Vec2) -> bool {
        (0..2).all(|i| self.periodic[i] || (x[i] >= self.domain[i][0] && x[i] <= self.domain[i][1]))
    }

    /// Reduce a coordinate difference to its shortest periodic representative.
    pub fn wrap_delta(&self, mut d: Vec2) -> Vec2 {
        for i in 0..2 {
            if let Some(p) = self.period(i) {
                d[i] -= (d[i] / p).round() * p;
            }
        }
        d
    }

    fn base_metric(&self, x: &Vec2) -> Mat2 {
        match &self.metric {
            MetricField::Euclidean => Mat2::identity(),
            MetricField::SphereStereo { radius } => {
                let w = 1.0 + x.norm_squared();
                Mat2::identity() * (4.0 * radius * radius / (w * w))
            }
            MetricField::EllipsoidStereo { axes, sign } => {
                let j = stereo_jacobian(x, *sign);
                let mut g = Mat2::zeros();
                for r in 0..3 {
                    let a2 = axes[r] * axes[r];
                    for i in 0..2 {
                        for k in 0..2 {
                            g[(i, k)] += a2 * j[r][i] * j[r][k];
                        }
                    }
                }
                g
            }
            MetricField::Expr(e) => {
                let v = [x[0], x[1]];
                Mat2::new(e[0][0].eval(&v), e[0][1].eval(&v), e[1][0].eval(&v), e[1][1].eval(&v))
            }
        }
    }
}

/// Unit-sphere point for stereographic coordinates `u`.
fn stereo_point(u: &Vec2, sign: f64) -> [f64; 3] {
    let w = 1.0 + u.norm_squared();
    [2.0 * u[0] / w, 2.0 * u[1] / w, sign * (u.norm_squared() - 1.0) / w]
}

/// `j[r][i]` = ∂ s_r / ∂ u_i for the unit-sphere stereographic parametrization.
fn stereo_jacobian(u: &Vec2, sign: f64) -> [[f64; 2]; 3] {
    let w = 1.0 + u.norm_squared();
    let w2 = w * w;
    [
        [2.0 / w - 4.0 * u[0] * u[0] / w2, -4.0 * u[0] * u[1] / w2],
        [-4.0 * u[0] * u[1] / w2, 2.0 / w - 4.0 * u[1] * u[1] / w2],
        [sign * 4.0 * u[0] / w2, sign * 4.0 * u[1] / w2],
    ]
}

#[derive(Clone, Debug)]
pub enum TransitionMap {
    /// u ↦ u / |u|², the change between opposite stereographic projections.
    Inversion,
    Expr(Arc<[Expr; 2]>),
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub map: TransitionMap,
}

impl Transition {
    fn apply(&self, x: &Vec2) -> Option<Vec2> {
        match &self.map {
            TransitionMap::Inversion => {
                let r2 = x.norm_squared();
                (r2 > 1e-300).then(|| x / r2)
            }
            TransitionMap::Expr(e) => {
                let v = [x[0], x[1]];
                let y = Vec2::new(e[0].eval(&v), e[1].eval(&v));
                y.iter().all(|c| c.is_finite()).then_some(y)
            }
        }
    }

    fn jacobian(&self, x: &Vec2) -> Option<Mat2> {
        match &self.map {
            TransitionMap::Inversion => {
                let r2 = x.norm_squared();
                if r2 < 1e-300 {
                    return None;
                }
                Some((Mat2::identity() * r2 - 2.0 * x * x.transpose()) / (r2 * r2))
            }
            TransitionMap::Expr(_) => {
                let mut j = Mat2::zeros();
                for k in 0..2 {
                    let h = 1e-6 * (1.0 + x[k].abs());
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[k] += h;
                    xm[k] -= h;
                    let d = (self.apply(&xp)? - self.apply(&xm)?) / (2.0 * h);
                    j.set_column(k, &d);
                }
                Some(j)
            }
        }
    }
}

/// Multiplicative modification of the base metric.
#[derive(Clone, Debug)]
pub enum ConformalFactor {
    Constant(f64),
    /// `1 + t φ`.
    Bump { t: f64, profile: BumpProfile },
}

#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub metric: Mat2,
    pub inverse: Mat2,
    pub christoffel: Christoffel,
}

/// A surface presented by coordinate charts carrying metric tensor fields.
#[derive(Clone, Debug)]
pub struct ChartManifold {
    builtin: Builtin,
    charts: Vec<Chart>,
    transitions: Vec<Transition>,
    inj_radius_lb: f64,
    conformal: Vec<ConformalFactor>,
}

impl ChartManifold {
    /// Flat torus `ℝ² / (aℤ × bℤ)` in one periodic chart.
    pub fn flat_torus(a: f64, b: f64) -> Self {
        let chart = Chart::new(
            [[0.0, a], [0.0, b]],
            [true, true],
            MetricField::Euclidean,
            Region::Rect([[0.0, a], [0.0, b]]),
        );
        ChartManifold {
            builtin: Builtin::FlatTorus { a, b },
            charts: vec![chart],
            transitions: vec![],
            inj_radius_lb: 0.5 * a.min(b),
            conformal: vec![],
        }
    }

    /// Round sphere in two stereographic charts; chart 0 projects from the north
    /// pole (its unit disk is the southern hemisphere), chart 1 from the south pole.
    pub fn round_sphere(radius: f64) -> Self {
        let charts = (0..2)
            .map(|_| stereo_chart(MetricField::SphereStereo { radius }))
            .collect();
        ChartManifold {
            builtin: Builtin::RoundSphere { radius },
            charts,
            transitions: inversion_pair(),
            inj_radius_lb: PI * radius,
            conformal: vec![],
        }
    }

    /// Ellipsoid `x²/a² + y²/b² + z²/c² = 1`. The injectivity-radius bound defaults to
    /// `π / sqrt(K_max)` with `K_max` the largest Gaussian curvature (at an axis end).
    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        let charts = [1.0, -1.0]
            .iter()
            .map(|&sign| stereo_chart(MetricField::EllipsoidStereo { axes: [a, b, c], sign }))
            .collect();
        let k_max = [a * a / (b * b * c * c), b * b / (a * a * c * c), c * c / (a * a * b * b)]
            .into_iter()
            .fold(0.0, f64::max);
        ChartManifold {
            builtin: Builtin::Ellipsoid { a, b, c },
            charts,
            transitions: inversion_pair(),
            inj_radius_lb: PI / k_max.sqrt(),
            conformal: vec![],
        }
    }

    pub fn custom(charts: Vec<Chart>, transitions: Vec<Transition>, inj_radius_lb: f64) -> Result<Self> {
        if charts.is_empty() {
            return Err(GeonetError::InvalidInput("custom manifold needs at least one chart".into()));
        }
        if !(inj_radius_lb > 0.0) {
            return Err(GeonetError::InvalidInput("inj_radius_lb must be positive".into()));
        }
        for t in &transitions {
            if t.from >= charts.len() || t.to >= charts.len() || t.from == t.to {
                return Err(GeonetError::InvalidInput(format!(
                    "transition {} -> {} does not connect two declared charts",
                    t.from, t.to
                )));
            }
        }
        let m = ChartManifold {
            builtin: Builtin::Custom,
            charts,
            transitions,
            inj_radius_lb,
            conformal: vec![],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_inj_radius_lb(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(GeonetError::InvalidInput("inj_radius_lb must be positive".into()));
        }
        self.inj_radius_lb = r;
        Ok(self)
    }

    /// The same atlas with the metric multiplied by `factor`.
    pub fn with_conformal(&self, factor: ConformalFactor) -> Self {
        let mut m = self.clone();
        if let ConformalFactor::Constant(c) = factor {
            m.inj_radius_lb *= c.sqrt();
        }
        m.conformal.push(factor);
        m
    }

    /// Metric `c·g` for a constant `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        self.with_conformal(ConformalFactor::Constant(c))
    }

    pub fn builtin(&self) -> Builtin {
        self.builtin
    }

    pub fn dimension(&self) -> usize {
        2
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, id: usize) -> &Chart {
        &self.charts[id]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn inj_radius_lb(&self) -> f64 {
        self.inj_radius_lb
    }

    pub fn conformal_factors(&self) -> &[ConformalFactor] {
        &self.conformal
    }

    /// True when both manifolds use the same charts and transitions (metrics may differ).
    pub fn same_atlas(&self, other: &ChartManifold) -> bool {
        self.charts.len() == other.charts.len()
            && self
                .charts
                .iter()
                .zip(&other.charts)
                .all(|(a, b)| a.domain == b.domain && a.periodic == b.periodic && a.region == b.region)
            && self.transitions.len() == other.transitions.len()
            && self
                .transitions
                .iter()
                .zip(&other.transitions)
                .all(|(a, b)| a.from == b.from && a.to == b.to)
    }

    pub fn conformal_factor(&self, p: &ChartPoint) -> f64 {
        self.conformal.iter().fold(1.0, |acc, f| {
            acc * match f {
                ConformalFactor::Constant(c) => *c,
                ConformalFactor::Bump { t, profile } => 1.0 + t * profile.value(self, p),
            }
        })
    }

    /// Metric matrix without domain or definiteness checks.
    pub fn metric_unchecked(&self, chart: usize, x: &Vec2) -> Mat2 {
        let g = self.charts[chart].base_metric(x);
        if self.conformal.is_empty() {
            g
        } else {
            g * self.conformal_factor(&ChartPoint { chart, x: *x })
        }
    }

    pub fn metric(&self, p: &ChartPoint) -> Result<Mat2> {
        self.check_point(p)?;
        let g = self.metric_unchecked(p.chart, &p.x);
        if !is_positive_definite(&g) {
            return Err(GeonetError::MetricNotPositiveDefinite { chart: p.chart, x: p.x[0], y: p.x[1] });
        }
        Ok(g)
    }

    pub fn check_point(&self, p: &ChartPoint) -> Result<()> {
        let ok = p.chart < self.charts.len()
            && p.x.iter().all(|c| c.is_finite())
            && self.charts[p.chart].contains(&p.x);
        if ok {
            Ok(())
        } else {
            Err(GeonetError::PointOutsideChart { chart: p.chart, x: p.x[0], y: p.x[1] })
        }
    }

    /// Christoffel symbols by central differences of the metric with step `1e-5·(1+|x|)`.
    pub fn christoffel_unchecked(&self, chart: usize, x: &Vec2) -> Christoffel {
        let g = self.metric_unchecked(chart, x);
        let ginv = g.try_inverse().unwrap_or_else(Mat2::zeros);
        self.christoffel_with(chart, x, &ginv)
    }

    fn christoffel_with(&self, chart: usize, x: &Vec2, ginv: &Mat2) -> Christoffel {
        let h = 1e-5 * (1.0 + x.norm());
        let mut dg = [Mat2::zeros(); 2];
        for (l, d) in dg.iter_mut().enumerate() {
            let mut xp = *x;
            let mut xm = *x;
            xp[l] += h;
            xm[l] -= h;
            *d = (self.metric_unchecked(chart, &xp) - self.metric_unchecked(chart, &xm)) / (2.0 * h);
        }
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in i..2 {
                    let mut s = 0.0;
                    for l in 0..2 {
                        s += ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                    }
                    gamma[k][i][j] = 0.5 * s;
                    gamma[k][j][i] = 0.5 * s;
                }
            }
        }
        gamma
    }

    /// Metric, inverse metric and Christoffel symbols at a chart point.
    pub fn evaluate_geometry(&self, p: &ChartPoint) -> Result<Geometry> {
        let metric = self.metric(p)?;
        let inverse = metric
            .try_inverse()
            .ok_or(GeonetError::MetricNotPositiveDefinite { chart: p.chart, x: p.x[0], y: p.x[1] })?;
        let christoffel = self.christoffel_with(p.chart, &p.x, &inverse);
        Ok(Geometry { metric, inverse, christoffel })
    }

    pub fn inner(&self, p: &ChartPoint, u: &Vec2, v: &Vec2) -> f64 {
        (self.metric_unchecked(p.chart, &p.x) * v).dot(u)
    }

    pub fn norm(&self, p: &ChartPoint, v: &Vec2) -> f64 {
        self.inner(p, v, v).max(0.0).sqrt()
    }

    /// The point expressed in chart `target`, if some transition reaches it.
    pub fn to_chart(&self, p: &ChartPoint, target: usize) -> Option<ChartPoint> {
        if p.chart == target {
            return Some(*p);
        }
        let t = self.transitions.iter().find(|t| t.from == p.chart && t.to == target)?;
        let y = t.apply(&p.x)?;
        self.charts[target].contains(&y).then_some(ChartPoint { chart: target, x: y })
    }

    /// A tangent vector at `p` pushed into chart `target`.
    pub fn map_vector(&self, p: &ChartPoint, v: &Vec2, target: usize) -> Option<(ChartPoint, Vec2)> {
        if p.chart == target {
            return Some((*p, *v));
        }
        let t = self.transitions.iter().find(|t| t.from == p.chart && t.to == target)?;
        let q = self.to_chart(p, target)?;
        Some((q, t.jacobian(&p.x)? * v))
    }

    /// Chart switch suggested while integrating: stereographic charts hop past radius
    /// 1.25, custom charts hop when the point leaves the chart box.
    pub fn hop_target(&self, p: &ChartPoint) -> Option<usize> {
        let chart = &self.charts[p.chart];
        if chart.stereo {
            if p.x.norm() > STEREO_HOP_RADIUS {
                return Some(1 - p.chart);
            }
            return None;
        }
        if chart.contains(&p.x) {
            return None;
        }
        self.transitions
            .iter()
            .filter(|t| t.from == p.chart)
            .find(|t| self.to_chart(p, t.to).is_some())
            .map(|t| t.to)
    }

    /// Preferred representation: periodic coordinates wrapped into the box, stereographic
    /// points moved to the chart in which they lie in the closed unit disk (chart 0 on ties).
    pub fn canonical(&self, p: &ChartPoint) -> ChartPoint {
        let chart = &self.charts[p.chart];
        let mut q = *p;
        for i in 0..2 {
            if let Some(per) = chart.period(i) {
                let lo = chart.domain[i][0];
                let mut v = lo + (q.x[i] - lo).rem_euclid(per);
                if v >= lo + per {
                    v = lo;
                }
                q.x[i] = v;
            }
        }
        if chart.stereo {
            let r = q.x.norm();
            if r > 1.0 || (r == 1.0 && q.chart == 1) {
                if let Some(o) = self.to_chart(&q, 1 - q.chart) {
                    return o;
                }
            }
            return q;
        }
        if !chart.contains(&q.x) {
            if let Some(t) = self.hop_target(&q) {
                if let Some(o) = self.to_chart(&q, t) {
                    return o;
                }
            }
        }
        q
    }

    /// Rough measure of how far `x` sits from the well-conditioned part of its chart;
    /// used to rank charts for boundary-value solves.
    pub fn chart_badness(&self, p: &ChartPoint) -> f64 {
        if self.charts[p.chart].stereo {
            p.x.norm()
        } else {
            0.0
        }
    }

    /// Comparison coordinates: the isometric embedding for builtins (Clifford torus,
    /// sphere and ellipsoid in ℝ³), chart-0 coordinates (periodic ones on circles) otherwise.
    pub fn ambient(&self, p: &ChartPoint) -> Ambient {
        match self.builtin {
            Builtin::RoundSphere { radius } => {
                let s = stereo_point(&p.x, if p.chart == 0 { 1.0 } else { -1.0 });
                Ambient::new(radius * s[0], radius * s[1], radius * s[2], 0.0)
            }
            Builtin::Ellipsoid { a, b, c } => {
                let s = stereo_point(&p.x, if p.chart == 0 { 1.0 } else { -1.0 });
                Ambient::new(a * s[0], b * s[1], c * s[2], 0.0)
            }
            _ => {
                let q = self.to_chart(p, 0).unwrap_or(*p);
                let chart = &self.charts[q.chart];
                let mut out = [0.0; 4];
                let mut k = 0;
                for i in 0..2 {
                    match chart.period(i) {
                        Some(per) => {
                            let r = per / (2.0 * PI);
                            let th = 2.0 * PI * (q.x[i] - chart.domain[i][0]) / per;
                            out[k] = r * th.cos();
                            out[k + 1] = r * th.sin();
                            k += 2;
                        }
                        None => {
                            out[k] = q.x[i];
                            k += 1;
                        }
                    }
                }
                Ambient::from(out)
            }
        }
    }

    /// Inverse of [`ambient`](Self::ambient) for builtin manifolds; the point is
    /// projected onto the surface first.
    pub fn from_ambient(&self, a: &Ambient) -> Option<ChartPoint> {
        let s = match self.builtin {
            Builtin::RoundSphere { .. } => nalgebra::Vector3::new(a[0], a[1], a[2]).normalize(),
            Builtin::Ellipsoid { a: ax, b, c } => {
                nalgebra::Vector3::new(a[0] / ax, a[1] / b, a[2] / c).normalize()
            }
            Builtin::FlatTorus { a: pa, b: pb } => {
                let x = a[1].atan2(a[0]).rem_euclid(2.0 * PI) * pa / (2.0 * PI);
                let y = a[3].atan2(a[2]).rem_euclid(2.0 * PI) * pb / (2.0 * PI);
                return Some(self.canonical(&ChartPoint::new(0, x, y)));
            }
            Builtin::Custom => return None,
        };
        let p = if s[2] <= 0.0 {
            ChartPoint::new(0, s[0] / (1.0 - s[2]), s[1] / (1.0 - s[2]))
        } else {
            ChartPoint::new(1, s[0] / (1.0 + s[2]), s[1] / (1.0 + s[2]))
        };
        Some(p)
    }

    /// Euclidean distance between comparison coordinates.
    pub fn separation(&self, p: &ChartPoint, q: &ChartPoint) -> f64 {
        (self.ambient(p) - self.ambient(q)).norm()
    }

    /// Checks positive definiteness and symmetry of the metric and mutual inverseness
    /// of transitions on a grid over each chart region.
    pub fn validate(&self) -> Result<()> {
        for (id, chart) in self.charts.iter().enumerate() {
            for x in region_grid(&chart.region, 9) {
                let p = ChartPoint { chart: id, x };
                let g = self.metric_unchecked(id, &x);
                if (g[(0, 1)] - g[(1, 0)]).abs() > 1e-12 * (1.0 + g.norm()) || !is_positive_definite(&g) {
                    return Err(GeonetError::MetricNotPositiveDefinite { chart: id, x: x[0], y: x[1] });
                }
                for t in self.transitions.iter().filter(|t| t.from == id) {
                    let Some(q) = self.to_chart(&p, t.to) else { continue };
                    if let Some(back) = self.to_chart(&q, id) {
                        let d = chart.wrap_delta(back.x - x).norm();
                        if d > 1e-8 * (1.0 + x.norm()) {
                            return Err(GeonetError::InvalidInput(format!(
                                "transitions {} <-> {} are not mutually inverse at ({}, {})",
                                id, t.to, x[0], x[1]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn region_grid(region: &Region, n: usize) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(n * n);
    match region {
        Region::Rect(b) => {
            for i in 0..n {
                for j in 0..n {
                    let s = (i as f64 + 0.5) / n as f64;
                    let t = (j as f64 + 0.5) / n as f64;
                    out.push(Vec2::new(
                        b[0][0] + s * (b[0][1] - b[0][0]),
                        b[1][0] + t * (b[1][1] - b[1][0]),
                    ));
                }
            }
        }
        Region::Disk { radius } => {
            for i in 0..n {
                let r = radius * (i as f64 + 0.5) / n as f64;
                for j in 0..n {
                    let th = 2.0 * PI * j as f64 / n as f64;
                    out.push(Vec2::new(r * th.cos(), r * th.sin()));
                }
            }
        }
    }
    out
}

fn stereo_chart(metric: MetricField) -> Chart {
    let mut c = Chart::new(
        [[-STEREO_DOMAIN, STEREO_DOMAIN], [-STEREO_DOMAIN, STEREO_DOMAIN]],
        [false, false],
        metric,
        Region::Disk { radius: 1.0 },
    );
    c.stereo = true;
    c
}

fn inversion_pair() -> Vec<Transition> {
    vec![
        Transition { from: 0, to: 1, map: TransitionMap::Inversion },
        Transition { from: 1, to: 0, map: TransitionMap::Inversion },
    ]
}

pub fn is_positive_definite(g: &Mat2) -> bool {
    g[(0, 0)] > 0.0 && g.determinant() > 0.0 && g.iter().all(|v| v.is_finite())
}
