//! Zero-finding for the balancing defect: single solves and seeded multistart.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeonetError, Result};
use crate::multigraph::WeightedMultigraph;
use crate::net::{hessian, GammaNet, HessianOptions, Node, Rebuild};
use crate::riemann::{metric_space::polyline_length, Ambient, ChartManifold, ChartPoint, Region, Vec2};

/// How the solver moves while the defect is still large.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOne {
    /// Length descent along `B` with Armijo backtracking; length never increases.
    Descent,
    /// Levenberg–Marquardt on the gradient field; reaches saddles from rough seeds.
    Residual,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol_stat: f64,
    /// Defect below which damped Newton takes over.
    pub newton_switch: f64,
    pub phase_one: PhaseOne,
    pub armijo: f64,
    /// Pieces longer than this fraction of the injectivity bound are split.
    pub max_piece_fraction: f64,
    /// Edges shorter than this fraction of the injectivity bound have collapsed.
    pub collapse_fraction: f64,
    /// Eigenvalues below this fraction of the largest are dropped from the Newton solve.
    pub pinv_cut: f64,
    /// Give up when the defect has not dropped below `stall_ratio` times its value
    /// `stall_window` iterations earlier; 0 disables the check.
    pub stall_window: usize,
    pub stall_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 200,
            tol_stat: 1e-8,
            newton_switch: 1e-3,
            phase_one: PhaseOne::Residual,
            armijo: 1e-4,
            max_piece_fraction: 0.75,
            collapse_fraction: 1e-6,
            pinv_cut: 1e-8,
            stall_window: 0,
            stall_ratio: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Verify,
    Descent,
    Residual,
    Newton,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub phase: Phase,
    pub length: f64,
    pub defect: f64,
    /// Step multiplier of the accepted move (0 for the verification entry).
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub net: GammaNet,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
}

/// Drives `max |B|_g` below `tol_stat` over the free nodes.
pub fn stationarize(net0: &GammaNet, opts: &SolverOptions) -> Result<Solved> {
    let defect0 = net0.max_defect()?;
    let mut trace =
        vec![TraceEntry { iteration: 0, phase: Phase::Verify, length: net0.length(), defect: defect0, step: 0.0 }];
    if defect0 <= opts.tol_stat {
        return Ok(Solved { net: net0.clone(), trace, iterations: 0 });
    }
    let inj = net0.manifold().inj_radius_lb();
    let mut net = tidy(&net0.canonicalized()?, opts)?;
    let mut alpha = 0.1 * inj;
    let mut mu = 1e-3;
    let mut defect = net.max_defect()?;
    for iteration in 1..=opts.max_iter {
        if defect <= opts.tol_stat {
            let verified = verify(&net, opts.tol_stat)?;
            return Ok(Solved { net: verified, trace, iterations: iteration - 1 });
        }
        let (next, phase, step) = if defect > opts.newton_switch {
            match opts.phase_one {
                PhaseOne::Descent => descent_step(&net, &mut alpha, opts)?,
                PhaseOne::Residual => residual_step(&net, &mut mu, opts)?,
            }
        } else {
            match newton_step(&net, defect, opts)? {
                Some(r) => r,
                None => match opts.phase_one {
                    PhaseOne::Descent => descent_step(&net, &mut alpha, opts)?,
                    PhaseOne::Residual => residual_step(&net, &mut mu, opts)?,
                },
            }
        };
        net = tidy(&next.canonicalized()?, opts)?;
        defect = net.max_defect()?;
        trace.push(TraceEntry { iteration, phase, length: net.length(), defect, step });
        if opts.stall_window > 0 && iteration >= opts.stall_window {
            let before = trace[iteration - opts.stall_window].defect;
            if defect > opts.stall_ratio * before {
                return Err(GeonetError::NonConvergence { iterations: iteration, defect });
            }
        }
    }
    if defect <= opts.tol_stat {
        let verified = verify(&net, opts.tol_stat)?;
        return Ok(Solved { net: verified, trace, iterations: opts.max_iter });
    }
    Err(GeonetError::NonConvergence { iterations: opts.max_iter, defect })
}

/// Independent check: rebuilds every piece from scratch and re-measures the defect.
pub fn verify(net: &GammaNet, tol_stat: f64) -> Result<GammaNet> {
    let fresh = GammaNet::build(
        net.manifold().clone(),
        net.graph().clone(),
        net.positions().clone(),
        net.waypoints(),
        net.pinned().clone(),
    )?;
    fresh.require_stationary(tol_stat)?;
    Ok(fresh)
}

fn tidy(net: &GammaNet, opts: &SolverOptions) -> Result<GammaNet> {
    let inj = net.manifold().inj_radius_lb();
    for e in net.edges().keys() {
        let len = net.edge_length(*e);
        if len < opts.collapse_fraction * inj {
            return Err(GeonetError::EdgeCollapse { edge: *e, length: len });
        }
    }
    net.subdivide_long_pieces(opts.max_piece_fraction * inj)
}

fn moved(net: &GammaNet, disp: &[(Node, Vec2)], scale: f64) -> Result<GammaNet> {
    let moves: Vec<(Node, ChartPoint)> = disp
        .iter()
        .map(|(n, d)| {
            let mut p = net.point(*n);
            p.x += d * scale;
            (*n, p)
        })
        .collect();
    net.with_points(&moves, Rebuild::Warm)
}

fn descent_step(net: &GammaNet, alpha: &mut f64, opts: &SolverOptions) -> Result<(GammaNet, Phase, f64)> {
    let m = net.manifold();
    let defects = net.balancing_defect()?;
    let dir: Vec<(Node, Vec2)> = net.free_nodes().into_iter().map(|n| (n, defects[&n])).collect();
    let slope: f64 = dir.iter().map(|(n, b)| m.inner(&net.point(*n), b, b)).sum();
    let largest = dir.iter().map(|(n, b)| m.norm(&net.point(*n), b)).fold(0.0f64, f64::max);
    let cap = 0.25 * m.inj_radius_lb() / largest.max(1e-300);
    let l0 = net.length();
    let mut a = (*alpha * 2.0).min(cap);
    for _ in 0..60 {
        if let Ok(trial) = moved(net, &dir, a) {
            if trial.length() <= l0 - opts.armijo * a * slope {
                *alpha = a;
                return Ok((trial, Phase::Descent, a));
            }
        }
        a *= 0.5;
    }
    Err(GeonetError::NonConvergence { iterations: 0, defect: largest })
}

/// Pseudo-inverse solve `H x = -g` dropping eigenvalues below `cut·λ_max`.
fn pinv_solve(h: &DMatrix<f64>, g: &DVector<f64>, cut: f64, shift: f64) -> DVector<f64> {
    let eig = SymmetricEigen::new(h.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let mut x = DVector::zeros(g.len());
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() <= cut * lmax {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        // shift > 0 gives the Levenberg–Marquardt step on ½|g|²
        let coef = if shift > 0.0 { -l / (l * l + shift) } else { -1.0 / l };
        x += v * (coef * v.dot(g));
    }
    x
}

fn newton_step(net: &GammaNet, defect: f64, opts: &SolverOptions) -> Result<Option<(GammaNet, Phase, f64)>> {
    let hess = hessian(net, &HessianOptions::default())?;
    let delta = pinv_solve(&hess.matrix, &hess.gradient, opts.pinv_cut, 0.0);
    let disp = hess.displacement(&delta);
    let mut lambda = 1.0;
    for _ in 0..8 {
        if let Ok(trial) = moved(net, &disp, lambda) {
            if trial.max_defect()? <= 0.5 * defect {
                return Ok(Some((trial, Phase::Newton, lambda)));
            }
        }
        lambda *= 0.5;
    }
    Ok(None)
}

fn residual_step(net: &GammaNet, mu: &mut f64, opts: &SolverOptions) -> Result<(GammaNet, Phase, f64)> {
    let hess = hessian(net, &HessianOptions::default())?;
    let phi0 = hess.gradient.norm_squared();
    let lmax = hess.matrix.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
    let inj = net.manifold().inj_radius_lb();
    for _ in 0..40 {
        let shift = *mu * lmax * lmax;
        let delta = pinv_solve(&hess.matrix, &hess.gradient, opts.pinv_cut, shift);
        let size = delta.amax();
        let scale = if size > 0.25 * inj { 0.25 * inj / size } else { 1.0 };
        let disp = hess.displacement(&delta);
        if let Ok(trial) = moved(net, &disp, scale) {
            let g = trial.gradient_vector()?;
            // the coordinate gradient of the trial measured in the old frame is close enough
            // for acceptance; the exact reduced norm is recomputed next iteration
            let phi: f64 = reduced_norm2(&trial, &g);
            if phi < phi0 {
                *mu = (*mu / 3.0).max(1e-12);
                return Ok((trial, Phase::Residual, scale));
            }
        }
        *mu *= 4.0;
    }
    Err(GeonetError::NonConvergence { iterations: 0, defect: phi0.sqrt() })
}

/// `Σ |∇L|²_g` over free nodes, from a coordinate gradient.
fn reduced_norm2(net: &GammaNet, grad: &[f64]) -> f64 {
    let m = net.manifold();
    net.free_nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let p = net.point(*n);
            let c = Vec2::new(grad[2 * i], grad[2 * i + 1]);
            let ginv = m.metric_unchecked(p.chart, &p.x).try_inverse().unwrap_or_default();
            c.dot(&(ginv * c))
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct MultistartOptions {
    pub seeds: usize,
    pub rng_seed: u64,
    /// Vertices are seeded inside this coordinate ball when given.
    pub region: Option<(ChartPoint, f64)>,
    pub workers: usize,
    pub solver: SolverOptions,
    pub length_tol: f64,
    pub hausdorff_tol: f64,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        MultistartOptions {
            seeds: 20,
            rng_seed: 0,
            region: None,
            workers: 1,
            solver: SolverOptions { max_iter: 80, stall_window: 10, ..Default::default() },
            length_tol: 1e-6,
            hausdorff_tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MultistartReport {
    /// Distinct stationary nets sorted by length, then by vertex coordinates.
    pub nets: Vec<GammaNet>,
    /// Per seed index: the error kind, or `None` when the seed converged.
    pub outcomes: Vec<Option<&'static str>>,
}

impl MultistartReport {
    pub fn converged(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_none()).count()
    }

    pub fn failure_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for k in self.outcomes.iter().flatten() {
            *out.entry(*k).or_insert(0) += 1;
        }
        out
    }
}

/// Solves from `seeds` random realizations of `graph`; deterministic in `rng_seed`
/// regardless of the worker count.
pub fn multistart(m: &ChartManifold, graph: &WeightedMultigraph, opts: &MultistartOptions) -> Result<MultistartReport> {
    if !graph.is_good() {
        return Err(GeonetError::Graph("multistart needs a good multigraph".into()));
    }
    if opts.seeds == 0 {
        return Err(GeonetError::InvalidInput("at least one seed is required".into()));
    }
    let sampler = AreaSampler::new(m)?;
    let run = |s: usize| -> Result<GammaNet> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
        rng.set_stream(s as u64);
        let seed = seed_net(m, graph, &sampler, opts.region, &mut rng)?;
        let solved = stationarize(&seed, &opts.solver)?;
        Ok(solved.net)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| GeonetError::InvalidInput(format!("worker pool: {e}")))?;
    let results: Vec<Result<GammaNet>> = pool.install(|| (0..opts.seeds).into_par_iter().map(run).collect());
    let outcomes = results.iter().map(|r| r.as_ref().err().map(|e| e.kind())).collect();
    let mut found: Vec<GammaNet> = results.into_iter().filter_map(|r| r.ok()).collect();
    found.sort_by(|a, b| net_order(a, b));
    let mut nets: Vec<GammaNet> = Vec::new();
    for net in found {
        if !nets.iter().any(|k| same_net(k, &net, opts.length_tol, opts.hausdorff_tol)) {
            nets.push(net);
        }
    }
    Ok(MultistartReport { nets, outcomes })
}

fn net_order(a: &GammaNet, b: &GammaNet) -> std::cmp::Ordering {
    let key = |n: &GammaNet| -> Vec<f64> {
        n.positions().values().flat_map(|p| n.manifold().ambient(p).iter().copied().collect::<Vec<_>>()).collect()
    };
    a.length().total_cmp(&b.length()).then_with(|| {
        key(a)
            .iter()
            .zip(key(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Equal lengths and every node of each net within `tol` of the other's image.
pub fn same_net(a: &GammaNet, b: &GammaNet, length_tol: f64, tol: f64) -> bool {
    (a.length() - b.length()).abs() <= length_tol && nodes_near_image(a, b, tol) && nodes_near_image(b, a, tol)
}

fn nodes_near_image(a: &GammaNet, b: &GammaNet, tol: f64) -> bool {
    let pts: Vec<Ambient> = a.nodes().iter().map(|n| a.manifold().ambient(&a.point(*n))).collect();
    let polylines: Vec<Vec<Ambient>> = b
        .edges()
        .keys()
        .map(|e| b.edge_samples(*e).iter().map(|p| b.manifold().ambient(p)).collect())
        .collect();
    pts.iter().all(|p| polylines.iter().any(|line| point_polyline_distance(p, line) <= tol))
}

pub(crate) fn point_polyline_distance(p: &Ambient, line: &[Ambient]) -> f64 {
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        let d = w[1] - w[0];
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 { ((p - w[0]).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min((w[0] + d * t - p).norm());
    }
    if line.len() == 1 {
        best = (line[0] - p).norm();
    }
    best
}

/// Rejection sampler for the Riemannian area measure over the chart partition.
pub struct AreaSampler {
    weights: Vec<f64>,
    bounds: Vec<f64>,
}

impl AreaSampler {
    pub fn new(m: &ChartManifold) -> Result<Self> {
        let mut weights = Vec::new();
        let mut bounds = Vec::new();
        for (id, chart) in m.charts().iter().enumerate() {
            let grid = crate::riemann::manifold::region_grid(&chart.region, 32);
            let dens: Vec<f64> = grid.iter().map(|x| m.metric_unchecked(id, x).determinant().max(0.0).sqrt()).collect();
            let mean = dens.iter().sum::<f64>() / dens.len() as f64;
            let area = match chart.region {
                Region::Rect(b) => (b[0][1] - b[0][0]) * (b[1][1] - b[1][0]),
                Region::Disk { radius } => std::f64::consts::PI * radius * radius,
            };
            weights.push(mean * area);
            bounds.push(1.5 * dens.iter().fold(0.0f64, |a, d| a.max(*d)));
        }
        Ok(AreaSampler { weights, bounds })
    }

    pub fn sample(&self, m: &ChartManifold, rng: &mut impl Rng) -> ChartPoint {
        let total: f64 = self.weights.iter().sum();
        loop {
            let mut r = rng.random::<f64>() * total;
            let mut id = 0;
            while id + 1 < self.weights.len() && r >= self.weights[id] {
                r -= self.weights[id];
                id += 1;
            }
            let x = match m.chart(id).region {
                Region::Rect(b) => Vec2::new(
                    b[0][0] + rng.random::<f64>() * (b[0][1] - b[0][0]),
                    b[1][0] + rng.random::<f64>() * (b[1][1] - b[1][0]),
                ),
                Region::Disk { radius } => loop {
                    let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    if v.norm_squared() <= 1.0 {
                        break v * radius;
                    }
                },
            };
            let dens = m.metric_unchecked(id, &x).determinant().max(0.0).sqrt();
            if rng.random::<f64>() * self.bounds[id] <= dens {
                return m.canonical(&ChartPoint { chart: id, x });
            }
        }
    }
}

fn sample_in_ball(m: &ChartManifold, center: &ChartPoint, radius: f64, rng: &mut impl Rng) -> ChartPoint {
    loop {
        let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            let p = ChartPoint { chart: center.chart, x: center.x + v * radius };
            if m.check_point(&p).is_ok() {
                return m.canonical(&p);
            }
        }
    }
}

/// Random realization: vertices area-uniform (or in the ball), each edge routed through
/// random anchors (one for ordinary edges, two to five for loops) joined chart-linearly,
/// with waypoints so every piece is short.
pub fn seed_net(
    m: &ChartManifold,
    graph: &WeightedMultigraph,
    sampler: &AreaSampler,
    region: Option<(ChartPoint, f64)>,
    rng: &mut impl Rng,
) -> Result<GammaNet> {
    let mut positions = BTreeMap::new();
    for v in graph.vertices() {
        let p = match &region {
            Some((c, r)) => sample_in_ball(m, c, *r, rng),
            None => sampler.sample(m, rng),
        };
        positions.insert(v, p);
    }
    let max_piece = 0.4 * m.inj_radius_lb();
    let mut waypoints = BTreeMap::new();
    for e in graph.edges() {
        let anchors = if e.is_loop() { rng.random_range(2..=5) } else { 1 };
        let mut chain = vec![positions[&e.ends[0]]];
        for _ in 0..anchors {
            chain.push(sampler.sample(m, rng));
        }
        chain.push(positions[&e.ends[1]]);
        let mut wps = Vec::new();
        for (k, w) in chain.windows(2).enumerate() {
            if k > 0 {
                wps.push(w[0]);
            }
            wps.extend(linear_fill(m, &w[0], &w[1], max_piece)?);
        }
        waypoints.insert(e.id, wps);
    }
    GammaNet::build(m.clone(), graph.clone(), positions, waypoints, Default::default())
}

/// Interior points of the chart-straight path from `a` to `b` (in the chart of `a`)
/// spaced so each piece is at most `max_piece` long.
fn linear_fill(m: &ChartManifold, a: &ChartPoint, b: &ChartPoint, max_piece: f64) -> Result<Vec<ChartPoint>> {
    let bc = m.to_chart(b, a.chart).ok_or(GeonetError::NoTransition { chart: b.chart })?;
    let d = m.chart(a.chart).wrap_delta(bc.x - a.x);
    let probe: Vec<ChartPoint> =
        (0..=16).map(|k| ChartPoint { chart: a.chart, x: a.x + d * (k as f64 / 16.0) }).collect();
    let len = polyline_length(m, &probe);
    let parts = ((len / max_piece).ceil() as usize).max(1);
    Ok((1..parts)
        .map(|k| m.canonical(&ChartPoint { chart: a.chart, x: a.x + d * (k as f64 / parts as f64) }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{fermat_tripod, theta_sphere};
    use std::f64::consts::PI;

    #[test]
    fn stationary_input_is_returned_unchanged() {
        let net = theta_sphere(1.0).unwrap();
        let s = stationarize(&net, &SolverOptions::default()).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.net.positions(), net.positions());
    }

    #[test]
    fn tripod_reaches_fermat_angles() {
        let m = ChartManifold::flat_torus(10.0, 10.0);
        let corners = [ChartPoint::new(0, 1.0, 1.0), ChartPoint::new(0, 4.0, 1.5), ChartPoint::new(0, 2.0, 3.5)];
        let net = fermat_tripod(&m, corners, ChartPoint::new(0, 3.0, 2.5)).unwrap();
        let descent = SolverOptions { phase_one: PhaseOne::Descent, ..Default::default() };
        let s = stationarize(&net, &descent).unwrap();
        let defects = s.net.balancing_defect().unwrap();
        assert!(defects[&Node::Vertex(0)].norm() < 1e-8);
        let ends = &s.net.incidence()[&Node::Vertex(0)];
        let u: Vec<Vec2> = ends.iter().map(|e| s.net.inward_tangent(e).unwrap()).collect();
        for i in 0..3 {
            let ang = u[i].dot(&u[(i + 1) % 3]).clamp(-1.0, 1.0).acos();
            assert!((ang - 2.0 * PI / 3.0).abs() < 1e-5);
        }
        assert!(s.trace.windows(2).all(|w| w[1].phase != Phase::Descent || w[1].length <= w[0].length));
    }

    #[test]
    fn perturbed_theta_returns_to_three_pi() {
        let net = theta_sphere(1.0).unwrap();
        let moves: Vec<(Node, ChartPoint)> = net
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut p = net.point(*n);
                p.x += Vec2::new(0.05 * (i as f64 * 1.7).cos(), 0.05 * (i as f64 * 2.3).sin());
                (*n, p)
            })
            .collect();
        let start = net.with_points(&moves, Rebuild::Warm).unwrap();
        assert!(start.max_defect().unwrap() > 1e-2);
        let s = stationarize(&start, &SolverOptions::default()).unwrap();
        assert!((s.net.length() - 3.0 * PI).abs() < 1e-6);
        assert!(s.net.max_defect().unwrap() < 1e-8);
    }
}
