//! Geodesic initial- and boundary-value problems and parallel transport.
//!
//! Segments are parametrized over `[0, 1]`, so the initial velocity has metric norm
//! equal to the segment length. Integration is fixed-step classical Runge–Kutta.

use super::manifold::{ChartManifold, ChartPoint, Christoffel, Mat2, Vec2};
use crate::error::{GeonetError, Result};

/// Arclength per integration step.
pub const ARC_STEP: f64 = 0.005;
pub const MIN_STEPS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub point: ChartPoint,
    /// Velocity with respect to the unit parameter, in `point.chart`.
    pub velocity: Vec2,
}

#[derive(Clone, Debug)]
pub struct GeodesicSegment {
    pub start: ChartPoint,
    pub end: ChartPoint,
    pub initial_velocity: Vec2,
    pub length: f64,
    /// `steps + 1` samples, uniform in the parameter.
    pub samples: Vec<Sample>,
    /// Unit tangent at the start pointing into the segment (chart of `start`).
    pub start_tangent: Vec2,
    /// Unit tangent at the end pointing into the segment (chart of `end`).
    pub end_tangent: Vec2,
    pub steps: usize,
    /// Whether the integration may switch charts.
    pub hopping: bool,
}

impl GeodesicSegment {
    pub fn chart(&self) -> usize {
        self.start.chart
    }

    /// Length recomputed by Simpson's rule on the sampled speed.
    pub fn polyline_length(&self, m: &ChartManifold) -> f64 {
        let speeds: Vec<f64> = self.samples.iter().map(|s| m.norm(&s.point, &s.velocity)).collect();
        simpson(&speeds, 1.0)
    }

    /// Largest relative deviation of the sampled speed from the initial speed.
    pub fn speed_drift(&self, m: &ChartManifold) -> f64 {
        let v0 = m.norm(&self.start, &self.initial_velocity);
        self.samples
            .iter()
            .map(|s| (m.norm(&s.point, &s.velocity) - v0).abs() / v0)
            .fold(0.0, f64::max)
    }

    /// Point at parameter `tau ∈ [0,1]`, re-integrated from the start.
    pub fn point_at(&self, m: &ChartManifold, tau: f64) -> Result<ChartPoint> {
        if tau <= 0.0 {
            return Ok(self.start);
        }
        let steps = ((self.steps as f64 * tau).ceil() as usize).max(2);
        let out = integrate(m, self.start, self.initial_velocity * tau, steps, self.hopping, &mut [], false)?;
        Ok(out.last().map(|s| s.point).unwrap_or(self.start))
    }

    /// The same geodesic traversed from its end.
    pub fn reversed(&self, m: &ChartManifold) -> Result<GeodesicSegment> {
        let last = self.samples.last().expect("segment has samples");
        build_segment(m, self.end, -last.velocity, self.steps, self.hopping)
    }
}

/// Composite Simpson rule on uniformly spaced values over an interval of width `span`.
/// Falls back to the trapezoid rule for an odd number of panels.
pub fn simpson(values: &[f64], span: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let h = span / n as f64;
    if n % 2 == 1 {
        let inner: f64 = values[1..n].iter().sum();
        return h * (0.5 * (values[0] + values[n]) + inner);
    }
    let mut s = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

pub fn steps_for_length(length: f64) -> usize {
    let n = (length / ARC_STEP).ceil() as usize;
    let n = n.max(MIN_STEPS);
    n + n % 2
}

fn contract(gamma: &Christoffel, a: &Vec2, b: &Vec2) -> Vec2 {
    let mut out = Vec2::zeros();
    for k in 0..2 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += gamma[k][i][j] * a[i] * b[j];
            }
        }
        out[k] = -s;
    }
    out
}

/// RK4 over the unit parameter interval. `transported` vectors are carried along by
/// parallel transport and overwritten with their final values (in the final chart).
/// Returns all samples when `record`, otherwise only the final one.
pub(crate) fn integrate(
    m: &ChartManifold,
    start: ChartPoint,
    velocity: Vec2,
    steps: usize,
    hopping: bool,
    transported: &mut [Vec2],
    record: bool,
) -> Result<Vec<Sample>> {
    let dt = 1.0 / steps as f64;
    let mut chart = start.chart;
    let mut x = start.x;
    let mut v = velocity;
    let nw = transported.len();
    let mut samples = Vec::with_capacity(if record { steps + 1 } else { 1 });
    if record {
        samples.push(Sample { point: start, velocity });
    }
    let mut kw = vec![[Vec2::zeros(); 4]; nw];
    let mut wt = vec![Vec2::zeros(); nw];
    for _ in 0..steps {
        let mut kx = [Vec2::zeros(); 4];
        let mut kv = [Vec2::zeros(); 4];
        for stage in 0..4 {
            let c = match stage {
                0 => 0.0,
                3 => 1.0,
                _ => 0.5,
            } * dt;
            let (xs, vs) = if stage == 0 {
                wt.copy_from_slice(transported);
                (x, v)
            } else {
                for (j, w) in transported.iter().enumerate() {
                    wt[j] = w + kw[j][stage - 1] * c;
                }
                (x + kx[stage - 1] * c, v + kv[stage - 1] * c)
            };
            let gamma = m.christoffel_unchecked(chart, &xs);
            kx[stage] = vs;
            kv[stage] = contract(&gamma, &vs, &vs);
            for j in 0..nw {
                kw[j][stage] = contract(&gamma, &vs, &wt[j]);
            }
        }
        x += (kx[0] + kx[1] * 2.0 + kx[2] * 2.0 + kx[3]) * (dt / 6.0);
        v += (kv[0] + kv[1] * 2.0 + kv[2] * 2.0 + kv[3]) * (dt / 6.0);
        for (j, w) in transported.iter_mut().enumerate() {
            *w += (kw[j][0] + kw[j][1] * 2.0 + kw[j][2] * 2.0 + kw[j][3]) * (dt / 6.0);
        }
        if !(x.iter().chain(v.iter()).all(|c| c.is_finite())) {
            return Err(GeonetError::Integration("state became non-finite".into()));
        }
        let here = ChartPoint { chart, x };
        if hopping {
            if let Some(target) = m.hop_target(&here) {
                let (q, nv) = m.map_vector(&here, &v, target).ok_or(GeonetError::NoTransition { chart })?;
                for w in transported.iter_mut() {
                    *w = m.map_vector(&here, w, target).ok_or(GeonetError::NoTransition { chart })?.1;
                }
                chart = q.chart;
                x = q.x;
                v = nv;
            }
        }
        if !m.chart(chart).contains(&x) {
            return Err(GeonetError::Integration(format!("trajectory left chart {chart}")));
        }
        if record {
            samples.push(Sample { point: ChartPoint { chart, x }, velocity: v });
        }
    }
    if !record {
        samples.push(Sample { point: ChartPoint { chart, x }, velocity: v });
    }
    Ok(samples)
}

fn build_segment(
    m: &ChartManifold,
    start: ChartPoint,
    velocity: Vec2,
    steps: usize,
    hopping: bool,
) -> Result<GeodesicSegment> {
    let length = m.norm(&start, &velocity);
    if !(length > 0.0) {
        return Err(GeonetError::DegenerateEdge { edge: None });
    }
    let samples = integrate(m, start, velocity, steps, hopping, &mut [], true)?;
    let last = *samples.last().expect("nonempty");
    let end_speed = m.norm(&last.point, &last.velocity);
    Ok(GeodesicSegment {
        start,
        end: last.point,
        initial_velocity: velocity,
        length,
        start_tangent: velocity / length,
        end_tangent: -last.velocity / end_speed,
        samples,
        steps,
        hopping,
    })
}

/// Geodesic from `x0` with velocity `v0`, followed for time `t`; charts are switched
/// through transitions as needed.
pub fn geodesic_ivp(m: &ChartManifold, x0: ChartPoint, v0: Vec2, t: f64) -> Result<GeodesicSegment> {
    m.metric(&x0)?;
    let velocity = v0 * t;
    let length = m.norm(&x0, &velocity);
    if !(length > 0.0) {
        return Err(GeonetError::InvalidInput("initial velocity and time must be nonzero".into()));
    }
    build_segment(m, x0, velocity, steps_for_length(length), true)
}

/// Geodesic IVP with an explicit step count.
pub fn geodesic_ivp_steps(
    m: &ChartManifold,
    x0: ChartPoint,
    velocity: Vec2,
    steps: usize,
) -> Result<GeodesicSegment> {
    build_segment(m, x0, velocity, steps, true)
}

#[derive(Clone, Debug)]
pub struct BvpOptions {
    /// Solve in this chart only.
    pub chart: Option<usize>,
    /// Fixed step count; chosen from the length otherwise.
    pub steps: Option<usize>,
    /// Initial velocity guess in the solve chart.
    pub guess: Option<Vec2>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions { chart: None, steps: None, guess: None, max_iter: 60, tol: 1e-13 }
    }
}

impl BvpOptions {
    /// Options reproducing the discretization of an existing segment.
    pub fn following(seg: &GeodesicSegment) -> Self {
        BvpOptions {
            chart: Some(seg.start.chart),
            steps: Some(seg.steps),
            guess: Some(seg.initial_velocity),
            ..Default::default()
        }
    }
}

/// The unique geodesic from `p` to `q` shorter than the injectivity-radius bound.
pub fn geodesic_bvp(m: &ChartManifold, p: &ChartPoint, q: &ChartPoint) -> Result<GeodesicSegment> {
    geodesic_bvp_with(m, p, q, &BvpOptions::default())
}

pub fn geodesic_bvp_with(
    m: &ChartManifold,
    p: &ChartPoint,
    q: &ChartPoint,
    opts: &BvpOptions,
) -> Result<GeodesicSegment> {
    m.check_point(p)?;
    m.check_point(q)?;
    if m.separation(p, q) <= 1e-14 * (1.0 + m.ambient(p).norm()) {
        return Err(GeonetError::DegenerateEdge { edge: None });
    }
    let mut candidates: Vec<(f64, ChartPoint, ChartPoint)> = (0..m.charts().len())
        .filter(|c| opts.chart.is_none_or(|o| o == *c))
        .filter_map(|c| {
            let pc = m.to_chart(p, c)?;
            let qc = m.to_chart(q, c)?;
            Some((m.chart_badness(&pc).max(m.chart_badness(&qc)), pc, qc))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    if candidates.is_empty() {
        return Err(GeonetError::NoTransition { chart: p.chart });
    }
    // Newton may land on a longer geodesic in one chart and the short one in another.
    let mut last_err = None;
    for (_, pc, qc) in candidates {
        match shoot(m, pc, qc, opts) {
            Ok(seg) => return Ok(seg),
            Err(e @ GeonetError::OutsideUniqueness { .. }) => last_err = Some(e),
            Err(e) if !matches!(last_err, Some(GeonetError::OutsideUniqueness { .. })) => last_err = Some(e),
            Err(_) => {}
        }
    }
    Err(last_err.expect("at least one candidate"))
}

fn shoot(m: &ChartManifold, pc: ChartPoint, qc: ChartPoint, opts: &BvpOptions) -> Result<GeodesicSegment> {
    let chart = m.chart(pc.chart);
    let target = pc.x + chart.wrap_delta(qc.x - pc.x);
    let short = |seg: &GeodesicSegment| seg.length < m.inj_radius_lb();
    let direct = newton(m, pc, target, opts.guess.unwrap_or(target - pc.x), opts)
        .and_then(|(v, steps)| build_segment(m, pc, v, steps, false));
    let failure = match direct {
        Ok(seg) if short(&seg) => return Ok(seg),
        Ok(seg) => GeonetError::OutsideUniqueness { length: seg.length, bound: m.inj_radius_lb() },
        Err(e) => e,
    };
    if opts.guess.is_some() || opts.steps.is_some() {
        return Err(failure);
    }
    // Far endpoints: walk the target in from the start along the chart segment.
    const STAGES: usize = 8;
    let mut v = (target - pc.x) / STAGES as f64;
    let mut last = None;
    for k in 1..=STAGES {
        let s = k as f64 / STAGES as f64;
        let (vk, steps) = match newton(m, pc, pc.x + (target - pc.x) * s, v, opts) {
            Ok(r) => r,
            Err(_) => return Err(failure),
        };
        v = vk * ((k + 1) as f64 / k as f64);
        last = Some((vk, steps));
    }
    let (v, steps) = last.expect("at least one stage");
    let seg = build_segment(m, pc, v, steps, false)?;
    if short(&seg) {
        Ok(seg)
    } else {
        Err(GeonetError::OutsideUniqueness { length: seg.length, bound: m.inj_radius_lb() })
    }
}

/// Damped Newton on the initial velocity so that the geodesic hits `target` at time 1.
fn newton(m: &ChartManifold, pc: ChartPoint, target: Vec2, guess: Vec2, opts: &BvpOptions) -> Result<(Vec2, usize)> {
    let scale = 1.0 + target.norm();
    let chart = m.chart(pc.chart);
    let stretch = chart.distortion(&pc.x).max(chart.distortion(&target));
    let steps_for = |v: &Vec2| steps_for_length(m.norm(&pc, v) * stretch);
    let mut v = guess;
    let mut steps = opts.steps.unwrap_or_else(|| steps_for(&v));
    let end = |v: &Vec2, steps: usize| -> Result<Vec2> {
        let s = integrate(m, pc, *v, steps, false, &mut [], false)?;
        Ok(s[0].point.x - target)
    };
    let mut residual = end(&v, steps)?;
    let mut iterations = 0;
    let mut stalled = false;
    loop {
        let r = residual.norm();
        let converged = stalled || r <= opts.tol * scale;
        stalled = false;
        if converged {
            let want = steps_for(&v);
            if opts.steps.is_none() && want != steps {
                steps = want;
                residual = end(&v, steps)?;
                continue;
            }
            break;
        }
        if iterations >= opts.max_iter {
            return Err(GeonetError::BvpNoConvergence { iterations, residual: r });
        }
        iterations += 1;
        let mut jac = Mat2::zeros();
        for k in 0..2 {
            let delta = 1e-7 * (1.0 + v.norm());
            let mut vp = v;
            vp[k] += delta;
            let rp = end(&vp, steps)?;
            jac.set_column(k, &((rp - residual) / delta));
        }
        let Some(inv) = jac.try_inverse() else {
            return Err(GeonetError::BvpNoConvergence { iterations, residual: r });
        };
        let dv = -(inv * residual);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1.0 / 1024.0 {
            let trial = v + dv * lambda;
            if let Ok(rt) = end(&trial, steps) {
                if rt.norm() < r {
                    v = trial;
                    residual = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // stalled at rounding level; still resize the steps to the length
            if r <= 1e-11 * scale {
                stalled = true;
                continue;
            }
            return Err(GeonetError::BvpNoConvergence { iterations, residual: r });
        }
    }
    Ok((v, steps))
}

/// Parallel transport of `w` (at the segment start, in its chart) to the segment end
/// (in the chart of `seg.end`).
pub fn parallel_transport(m: &ChartManifold, seg: &GeodesicSegment, w: Vec2) -> Result<Vec2> {
    let mut ws = [w];
    integrate(m, seg.start, seg.initial_velocity, seg.steps, seg.hopping, &mut ws, false)?;
    Ok(ws[0])
}
