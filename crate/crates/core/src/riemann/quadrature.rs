//! Scalar fields on a manifold and integration against the Riemannian volume.

use std::f64::consts::PI;

use super::expr::Expr;
use super::family::Bump;
use super::manifold::{ChartManifold, ChartPoint, Region, Vec2};
use crate::error::{GeonetError, Result};

pub const DEFAULT_RESOLUTION: usize = 64;

pub trait ScalarField: Sync {
    fn value(&self, m: &ChartManifold, p: &ChartPoint) -> f64;
}

impl<F> ScalarField for F
where
    F: Fn(&ChartManifold, &ChartPoint) -> f64 + Sync,
{
    fn value(&self, m: &ChartManifold, p: &ChartPoint) -> f64 {
        self(m, p)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantField(pub f64);

impl ScalarField for ConstantField {
    fn value(&self, _: &ChartManifold, _: &ChartPoint) -> f64 {
        self.0
    }
}

/// One component of the comparison coordinates (e.g. `z` on the sphere).
#[derive(Clone, Copy, Debug)]
pub struct AmbientCoordinate(pub usize);

impl ScalarField for AmbientCoordinate {
    fn value(&self, m: &ChartManifold, p: &ChartPoint) -> f64 {
        m.ambient(p)[self.0]
    }
}

/// Expression in the coordinates of chart 0 (falling back to the point's own chart).
#[derive(Clone, Debug)]
pub struct ChartExpression(pub Expr);

impl ScalarField for ChartExpression {
    fn value(&self, m: &ChartManifold, p: &ChartPoint) -> f64 {
        let q = m.to_chart(p, 0).unwrap_or(*p);
        self.0.eval(&[q.x[0], q.x[1]])
    }
}

impl ScalarField for Bump {
    fn value(&self, m: &ChartManifold, p: &ChartPoint) -> f64 {
        Bump::value(self, m, p)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature nodes `(point, weight)` over every chart region, with the weight
/// including the coordinate Jacobian but not the volume element.
fn region_nodes(m: &ChartManifold, n: usize) -> Result<Vec<(ChartPoint, f64)>> {
    let (gl, gw) = gauss_legendre(n);
    let mut out = Vec::new();
    for (id, chart) in m.charts().iter().enumerate() {
        match chart.region {
            Region::Rect(b) => {
                let axis = |i: usize| -> Result<Vec<(f64, f64)>> {
                    let (lo, hi) = (b[i][0], b[i][1]);
                    if !(hi > lo) {
                        return Err(GeonetError::PartitionGap(format!("empty region in chart {id}")));
                    }
                    if !chart.periodic[i] && (lo < chart.domain[i][0] || hi > chart.domain[i][1]) {
                        return Err(GeonetError::PartitionGap(format!(
                            "region of chart {id} exceeds its domain"
                        )));
                    }
                    let full_period = chart.period(i).is_some_and(|p| ((hi - lo) - p).abs() < 1e-12 * p);
                    Ok(if full_period {
                        (0..n).map(|k| (lo + (hi - lo) * k as f64 / n as f64, (hi - lo) / n as f64)).collect()
                    } else {
                        gl.iter()
                            .zip(&gw)
                            .map(|(t, w)| (lo + 0.5 * (t + 1.0) * (hi - lo), 0.5 * w * (hi - lo)))
                            .collect()
                    })
                };
                let (xs, ys) = (axis(0)?, axis(1)?);
                for &(x, wx) in &xs {
                    for &(y, wy) in &ys {
                        out.push((ChartPoint::new(id, x, y), wx * wy));
                    }
                }
            }
            Region::Disk { radius } => {
                if !(radius > 0.0) || radius > chart.domain[0][1].min(chart.domain[1][1]) {
                    return Err(GeonetError::PartitionGap(format!("bad disk region in chart {id}")));
                }
                for (t, w) in gl.iter().zip(&gw) {
                    let r = 0.5 * (t + 1.0) * radius;
                    let wr = 0.5 * w * radius * r;
                    for k in 0..2 * n {
                        let th = PI * k as f64 / n as f64;
                        out.push((
                            ChartPoint { chart: id, x: Vec2::new(r * th.cos(), r * th.sin()) },
                            wr * PI / n as f64,
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `∫_M f dv_g` by tensor-product quadrature over the chart partition.
pub fn volume_integral<F: ScalarField + ?Sized>(m: &ChartManifold, f: &F) -> Result<f64> {
    volume_integral_with(m, f, DEFAULT_RESOLUTION)
}

pub fn volume_integral_with<F: ScalarField + ?Sized>(m: &ChartManifold, f: &F, n: usize) -> Result<f64> {
    Ok(region_nodes(m, n)?
        .iter()
        .map(|(p, w)| {
            let vol = m.metric_unchecked(p.chart, &p.x).determinant().max(0.0).sqrt();
            w * vol * f.value(m, p)
        })
        .sum())
}

pub fn volume(m: &ChartManifold) -> Result<f64> {
    volume_integral(m, &ConstantField(1.0))
}
