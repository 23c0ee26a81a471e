//! File formats: manifold specs, graph and net files, CSV tables, SVG overlays and
//! failure records. All JSON documents carry `schema_version`.
//!
//! Net coordinates are written as decimal strings with 17 significant digits, which
//! parse back to the same `f64` bit pattern.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GeonetError, Result};
use crate::multigraph::{Edge, EdgeId, VertexId, WeightedMultigraph};
use crate::net::GammaNet;
use crate::riemann::expr::Expr;
use crate::riemann::{
    Builtin, Bump, BumpProfile, Chart, ChartManifold, ChartPoint, ConformalFactor, MetricField, Region, Transition,
    TransitionMap,
};

pub const SCHEMA_VERSION: u32 = 1;

/// A float written with 17 significant digits; reads strings or JSON numbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coord(pub f64);

impl Serialize for Coord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:.16e}", self.0))
    }
}

impl<'de> Deserialize<'de> for Coord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        let v = match Raw::deserialize(d)? {
            Raw::Text(s) => s.trim().parse::<f64>().map_err(serde::de::Error::custom)?,
            Raw::Number(x) => x,
        };
        if !v.is_finite() {
            return Err(serde::de::Error::custom("coordinates must be finite"));
        }
        Ok(Coord(v))
    }
}

fn check_version(v: u32, what: &str) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(GeonetError::InvalidInput(format!("{what}: unsupported schema_version {v}")));
    }
    Ok(())
}

// ---------------------------------------------------------------- manifolds

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub spec: ManifoldSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    #[serde(flatten)]
    pub surface: SurfaceSpec,
    /// Overrides the built-in bound; required for custom atlases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inj_radius_lb: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conformal: Vec<ConformalSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case")]
pub enum SurfaceSpec {
    FlatTorus { a: f64, b: f64 },
    RoundSphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    Custom { charts: Vec<ChartSpec>, transitions: Vec<TransitionSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub domain: [[f64; 2]; 2],
    #[serde(default)]
    pub periodic: [bool; 2],
    /// `g_ij` as expressions in `x1, x2`.
    pub metric: [[String; 2]; 2],
    /// Quadrature and seeding region; defaults to the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    Rect([[f64; 2]; 2]),
    Disk { radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub from: usize,
    pub to: usize,
    /// `"inversion"` or two expressions in `x1, x2`.
    pub map: TransitionMapSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionMapSpec {
    Named(String),
    Expr([String; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConformalSpec {
    Constant { c: f64 },
    /// `1 + t φ` with `φ` a smooth bump on a coordinate ball.
    Bump { t: f64, chart: usize, center: [f64; 2], radius: f64, amplitude: f64 },
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<ChartManifold> {
        let mut m = match &self.surface {
            SurfaceSpec::FlatTorus { a, b } => {
                positive(&[*a, *b], "flat_torus periods")?;
                ChartManifold::flat_torus(*a, *b)
            }
            SurfaceSpec::RoundSphere { radius } => {
                positive(&[*radius], "round_sphere radius")?;
                ChartManifold::round_sphere(*radius)
            }
            SurfaceSpec::Ellipsoid { a, b, c } => {
                positive(&[*a, *b, *c], "ellipsoid semi-axes")?;
                ChartManifold::ellipsoid(*a, *b, *c)
            }
            SurfaceSpec::Custom { charts, transitions } => {
                let inj = self
                    .inj_radius_lb
                    .ok_or_else(|| GeonetError::InvalidInput("custom manifolds need inj_radius_lb".into()))?;
                let charts = charts.iter().map(ChartSpec::build).collect::<Result<Vec<_>>>()?;
                let transitions = transitions.iter().map(TransitionSpec::build).collect::<Result<Vec<_>>>()?;
                ChartManifold::custom(charts, transitions, inj)?
            }
        };
        if let (Some(r), false) = (self.inj_radius_lb, matches!(self.surface, SurfaceSpec::Custom { .. })) {
            m = m.with_inj_radius_lb(r)?;
        }
        for c in &self.conformal {
            m = match c {
                ConformalSpec::Constant { c } => {
                    positive(&[*c], "conformal constant")?;
                    m.scaled(*c)
                }
                ConformalSpec::Bump { t, chart, center, radius, amplitude } => {
                    if !(*t >= 0.0) {
                        return Err(GeonetError::InvalidInput("bump parameter t must be nonnegative".into()));
                    }
                    let center = ChartPoint::new(*chart, center[0], center[1]);
                    m.check_point(&center)?;
                    let bump = Bump::new(center, *radius, *amplitude)?;
                    m.with_conformal(ConformalFactor::Bump { t: *t, profile: BumpProfile::Smooth(bump) })
                }
            };
        }
        Ok(m)
    }

    /// Inverse of [`ManifoldSpec::build`] up to the chart data it carries.
    pub fn describe(m: &ChartManifold) -> Result<ManifoldSpec> {
        let (surface, default_inj) = match m.builtin() {
            Builtin::FlatTorus { a, b } => (SurfaceSpec::FlatTorus { a, b }, Some(ChartManifold::flat_torus(a, b))),
            Builtin::RoundSphere { radius } => (SurfaceSpec::RoundSphere { radius }, Some(ChartManifold::round_sphere(radius))),
            Builtin::Ellipsoid { a, b, c } => (SurfaceSpec::Ellipsoid { a, b, c }, Some(ChartManifold::ellipsoid(a, b, c))),
            Builtin::Custom => {
                let charts = m.charts().iter().map(ChartSpec::describe).collect::<Result<Vec<_>>>()?;
                let transitions = m.transitions().iter().map(TransitionSpec::describe).collect();
                (SurfaceSpec::Custom { charts, transitions }, None)
            }
        };
        let mut conformal = Vec::new();
        let mut scale = 1.0;
        for c in m.conformal_factors() {
            conformal.push(match c {
                ConformalFactor::Constant(c) => {
                    scale *= c;
                    ConformalSpec::Constant { c: *c }
                }
                ConformalFactor::Bump { t, profile } => match profile {
                    BumpProfile::Smooth(b) => ConformalSpec::Bump {
                        t: *t,
                        chart: b.center.chart,
                        center: [b.center.x[0], b.center.x[1]],
                        radius: b.radius,
                        amplitude: b.amplitude,
                    },
                    BumpProfile::Constant(k) => ConformalSpec::Constant { c: 1.0 + t * k },
                    BumpProfile::Zero => continue,
                },
            });
        }
        // the bound written is the one before constant factors rescale it
        let base_inj = m.inj_radius_lb() / scale.sqrt();
        let inj_radius_lb = match default_inj {
            Some(d) if d.inj_radius_lb() == base_inj => None,
            _ => Some(base_inj),
        };
        Ok(ManifoldSpec { surface, inj_radius_lb, conformal })
    }
}

fn positive(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(GeonetError::InvalidInput(format!("{what} must be positive")))
    }
}

impl ChartSpec {
    fn build(&self) -> Result<Chart> {
        for i in 0..2 {
            if !(self.domain[i][0] < self.domain[i][1]) {
                return Err(GeonetError::InvalidInput("chart domain bounds must increase".into()));
            }
        }
        let parse = |s: &String| Expr::parse(s);
        let metric = [
            [parse(&self.metric[0][0])?, parse(&self.metric[0][1])?],
            [parse(&self.metric[1][0])?, parse(&self.metric[1][1])?],
        ];
        let region = match &self.region {
            None => Region::Rect(self.domain),
            Some(RegionSpec::Rect(r)) => Region::Rect(*r),
            Some(RegionSpec::Disk { radius }) => Region::Disk { radius: *radius },
        };
        Ok(Chart::new(self.domain, self.periodic, MetricField::Expr(Arc::new(metric)), region))
    }

    fn describe(c: &Chart) -> Result<ChartSpec> {
        let MetricField::Expr(e) = &c.metric else {
            return Err(GeonetError::InvalidInput("only expression metrics can be written to a custom spec".into()));
        };
        let s = |i: usize, j: usize| e[i][j].source().to_string();
        let region = match c.region {
            Region::Rect(r) if r == c.domain => None,
            Region::Rect(r) => Some(RegionSpec::Rect(r)),
            Region::Disk { radius } => Some(RegionSpec::Disk { radius }),
        };
        Ok(ChartSpec { domain: c.domain, periodic: c.periodic, metric: [[s(0, 0), s(0, 1)], [s(1, 0), s(1, 1)]], region })
    }
}

impl TransitionSpec {
    fn build(&self) -> Result<Transition> {
        let map = match &self.map {
            TransitionMapSpec::Named(n) if n == "inversion" => TransitionMap::Inversion,
            TransitionMapSpec::Named(n) => {
                return Err(GeonetError::InvalidInput(format!("unknown transition map {n:?}")));
            }
            TransitionMapSpec::Expr([a, b]) => TransitionMap::Expr(Arc::new([Expr::parse(a)?, Expr::parse(b)?])),
        };
        Ok(Transition { from: self.from, to: self.to, map })
    }

    fn describe(t: &Transition) -> TransitionSpec {
        let map = match &t.map {
            TransitionMap::Inversion => TransitionMapSpec::Named("inversion".into()),
            TransitionMap::Expr(e) => TransitionMapSpec::Expr([e[0].source().into(), e[1].source().into()]),
        };
        TransitionSpec { from: t.from, to: t.to, map }
    }
}

pub fn parse_manifold(text: &str) -> Result<ChartManifold> {
    let f: ManifoldFile = serde_json::from_str(text)?;
    check_version(f.schema_version, "manifold file")?;
    f.spec.build()
}

pub fn write_manifold(m: &ChartManifold) -> Result<String> {
    let f = ManifoldFile { schema_version: SCHEMA_VERSION, spec: ManifoldSpec::describe(m)? };
    Ok(serde_json::to_string_pretty(&f)? + "\n")
}

// ------------------------------------------------------------------- graphs

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: EdgeId,
    pub ends: [VertexId; 2],
    #[serde(default = "one")]
    pub multiplicity: u32,
}

fn one() -> u32 {
    1
}

impl GraphSection {
    pub fn build(&self) -> Result<WeightedMultigraph> {
        let edges = self.edges.iter().map(|e| Edge { id: e.id, ends: e.ends, multiplicity: e.multiplicity });
        WeightedMultigraph::from_parts(self.vertices.iter().copied(), edges)
    }

    pub fn describe(g: &WeightedMultigraph) -> GraphSection {
        GraphSection {
            vertices: g.vertices().collect(),
            edges: g.edges().map(|e| EdgeSpec { id: e.id, ends: e.ends, multiplicity: e.multiplicity }).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub schema_version: u32,
    /// Several graphs for scans; a single graph is a one-element list.
    pub graphs: Vec<GraphSection>,
}

pub fn parse_graphs(text: &str) -> Result<Vec<WeightedMultigraph>> {
    let f: GraphFile = serde_json::from_str(text)?;
    check_version(f.schema_version, "graph file")?;
    f.graphs.iter().map(GraphSection::build).collect()
}

pub fn write_graphs(graphs: &[WeightedMultigraph]) -> Result<String> {
    let f = GraphFile { schema_version: SCHEMA_VERSION, graphs: graphs.iter().map(GraphSection::describe).collect() };
    Ok(serde_json::to_string_pretty(&f)? + "\n")
}

// --------------------------------------------------------------------- nets

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub chart: usize,
    pub x: [Coord; 2],
}

impl PointSpec {
    fn of(p: &ChartPoint) -> Self {
        PointSpec { chart: p.chart, x: [Coord(p.x[0]), Coord(p.x[1])] }
    }

    fn point(&self) -> ChartPoint {
        ChartPoint::new(self.chart, self.x[0].0, self.x[1].0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexPosition {
    pub id: VertexId,
    #[serde(flatten)]
    pub at: PointSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeGeometry {
    pub id: EdgeId,
    /// Interior points the edge passes through, in edge direction.
    pub waypoints: Vec<PointSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub vertices: Vec<VertexPosition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeGeometry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetFile {
    pub schema_version: u32,
    /// Optional embedded manifold; a `--manifold` file takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldSpec>,
    pub graph: GraphSection,
    pub geometry: GeometrySection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pinned: Vec<VertexId>,
}

impl NetFile {
    pub fn describe(net: &GammaNet) -> Result<NetFile> {
        Ok(NetFile {
            schema_version: SCHEMA_VERSION,
            manifold: Some(ManifoldSpec::describe(net.manifold())?),
            graph: GraphSection::describe(net.graph()),
            geometry: GeometrySection {
                vertices: net.positions().iter().map(|(v, p)| VertexPosition { id: *v, at: PointSpec::of(p) }).collect(),
                edges: net
                    .waypoints()
                    .into_iter()
                    .filter(|(_, w)| !w.is_empty())
                    .map(|(id, w)| EdgeGeometry { id, waypoints: w.iter().map(PointSpec::of).collect() })
                    .collect(),
            },
            pinned: net.pinned().iter().copied().collect(),
        })
    }

    pub fn build(&self, manifold: Option<ChartManifold>) -> Result<GammaNet> {
        check_version(self.schema_version, "net file")?;
        let m = match (manifold, &self.manifold) {
            (Some(m), _) => m,
            (None, Some(spec)) => spec.build()?,
            (None, None) => {
                return Err(GeonetError::InvalidInput("no manifold: pass one or embed it in the net file".into()));
            }
        };
        let graph = self.graph.build()?;
        let mut positions = BTreeMap::new();
        for v in &self.geometry.vertices {
            if positions.insert(v.id, v.at.point()).is_some() {
                return Err(GeonetError::InvalidInput(format!("vertex {} positioned twice", v.id)));
            }
        }
        let mut waypoints = BTreeMap::new();
        for e in &self.geometry.edges {
            graph.edge(e.id)?;
            if waypoints.insert(e.id, e.waypoints.iter().map(PointSpec::point).collect::<Vec<_>>()).is_some() {
                return Err(GeonetError::InvalidInput(format!("edge {} has two geometry entries", e.id)));
            }
        }
        let pinned: BTreeSet<VertexId> = self.pinned.iter().copied().collect();
        if let Some(v) = pinned.iter().find(|v| !graph.has_vertex(**v)) {
            return Err(GeonetError::InvalidInput(format!("pinned vertex {v} is not in the graph")));
        }
        GammaNet::build(m, graph, positions, waypoints, pinned)
    }
}

pub fn parse_net(text: &str, manifold: Option<ChartManifold>) -> Result<GammaNet> {
    let f: NetFile = serde_json::from_str(text)?;
    f.build(manifold)
}

pub fn write_net(net: &GammaNet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&NetFile::describe(net)?)? + "\n")
}

// --------------------------------------------------------- reports and plots

/// Comma-separated table; floats in shortest round-trip form so output is stable.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let line: Vec<String> = cells.iter().map(Cell::render).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:e}"),
            Cell::I(n) => n.to_string(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
        }
    }
}

/// Machine-readable record of a failed command.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FailureRecord {
    pub schema_version: u32,
    pub module: String,
    pub operation: String,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl FailureRecord {
    pub fn new(module: &str, operation: &str, err: &GeonetError) -> Self {
        FailureRecord {
            schema_version: SCHEMA_VERSION,
            module: module.into(),
            operation: operation.into(),
            kind: err.kind().into(),
            message: err.to_string(),
            exit_code: if err.is_validation() { 2 } else { 3 },
        }
    }
}

/// A circle drawn on the overlay: chart, center, radius and whether it was hit.
pub struct Marker {
    pub chart: usize,
    pub center: [f64; 2],
    pub radius: f64,
    pub hit: bool,
}

/// One panel per chart: its rectangle (or disk region), the nets' edge polylines in
/// that chart, and markers. Polyline runs are cut where samples leave the chart or
/// jump across a period.
pub fn svg_overlay(m: &ChartManifold, nets: &[GammaNet], markers: &[Marker]) -> String {
    const PANEL: f64 = 360.0;
    const PAD: f64 = 20.0;
    let mut out = String::new();
    let width = m.charts().len() as f64 * (PANEL + PAD) + PAD;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" viewBox="0 0 {width} {}">"#,
        PANEL + 2.0 * PAD,
        PANEL + 2.0 * PAD
    );
    for (k, chart) in m.charts().iter().enumerate() {
        let view = match chart.region {
            Region::Rect(r) => r,
            Region::Disk { radius } => [[-radius * 1.2, radius * 1.2], [-radius * 1.2, radius * 1.2]],
        };
        let sx = PANEL / (view[0][1] - view[0][0]);
        let sy = PANEL / (view[1][1] - view[1][0]);
        let ox = PAD + k as f64 * (PANEL + PAD);
        let map = |x: f64, y: f64| (ox + (x - view[0][0]) * sx, PAD + PANEL - (y - view[1][0]) * sy);
        let _ = writeln!(out, r#"<g id="chart{k}">"#);
        match chart.region {
            Region::Rect(r) => {
                let (x0, y1) = map(r[0][0], r[1][0]);
                let (x1, y0) = map(r[0][1], r[1][1]);
                let _ = writeln!(
                    out,
                    r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
                    x1 - x0,
                    y1 - y0
                );
            }
            Region::Disk { radius } => {
                let (cx, cy) = map(0.0, 0.0);
                let _ = writeln!(
                    out,
                    r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="black"/>"#,
                    radius * sx
                );
            }
        }
        for net in nets {
            for e in net.edges().keys() {
                let mut run: Vec<(f64, f64)> = Vec::new();
                let mut last: Option<[f64; 2]> = None;
                let flush = |run: &mut Vec<(f64, f64)>, out: &mut String| {
                    if run.len() > 1 {
                        let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
                        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#, pts.join(" "));
                    }
                    run.clear();
                };
                for p in net.edge_samples(*e) {
                    let q = m.to_chart(&p, k).filter(|q| in_view(&q.x, &view)).map(|q| {
                        let mut x = [q.x[0], q.x[1]];
                        for i in 0..2 {
                            if let Some(per) = chart.period(i) {
                                x[i] = view[i][0] + (x[i] - view[i][0]).rem_euclid(per);
                            }
                        }
                        x
                    });
                    match q {
                        Some(x) => {
                            let jump = last.is_some_and(|l| {
                                (0..2).any(|i| chart.period(i).is_some_and(|per| (x[i] - l[i]).abs() > 0.5 * per))
                            });
                            if jump {
                                flush(&mut run, &mut out);
                            }
                            run.push(map(x[0], x[1]));
                            last = Some(x);
                        }
                        None => {
                            flush(&mut run, &mut out);
                            last = None;
                        }
                    }
                }
                flush(&mut run, &mut out);
            }
        }
        for mk in markers.iter().filter(|mk| mk.chart == k) {
            let (cx, cy) = map(mk.center[0], mk.center[1]);
            let colour = if mk.hit { "seagreen" } else { "firebrick" };
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="{colour}" stroke-dasharray="4 3"/>"#,
                mk.radius * sx
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

fn in_view(x: &crate::riemann::Vec2, view: &[[f64; 2]; 2]) -> bool {
    let pad = 0.2 * (view[0][1] - view[0][0]).max(view[1][1] - view[1][0]);
    (0..2).all(|i| x[i].is_finite() && x[i] >= view[i][0] - pad && x[i] <= view[i][1] + pad)
}
