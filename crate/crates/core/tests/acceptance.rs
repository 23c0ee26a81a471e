//! Acceptance criteria, run sequentially with their own timing. Prints one line per
//! criterion and exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geonet::continuation::{continue_net, uniform_grid, ContinuationOptions};
use geonet::experiments::{
    equidistribution_ratio, lipschitz_check, random_bumps, random_segments, rotated_theta, theta_trend, LIPSCHITZ_TOL,
};
use geonet::io;
use geonet::multigraph::WeightedMultigraph;
use geonet::net::{
    closed_geodesic_net, fermat_tripod, great_circle_net, hessian_and_classify, theta_sphere, theta_sphere_rotated,
    Classification, GammaNet, HessianOptions, Node, Rebuild,
};
use geonet::riemann::quadrature::ConstantField;
use geonet::riemann::{geodesic_ivp, Bump, BumpProfile, ChartManifold, ChartPoint, ConformalFactor, MetricFamily, Vec2};
use geonet::solver::{multistart, seed_net, stationarize, AreaSampler, MultistartOptions, SolverOptions};
use geonet::surgery::{regularize, SurgeryOp, SurgeryOptions};

use common::*;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>, what: &str) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn main() {
    let criteria: Vec<(u32, &str, u64, fn() -> Check)> = vec![
        (1, "stationarity of symmetric configurations", 10, c1_symmetric),
        (2, "first-variation identity on random nets", 60, c2_first_variation),
        (3, "non-degeneracy classification", 60, c3_classification),
        (4, "surgery conservation", 30, c4_surgery),
        (5, "surgery idempotence and termination", 30, c5_idempotence),
        (6, "continuation along conformal families", 120, c6_continuation),
        (7, "Lipschitz length comparison", 60, c7_lipschitz),
        (8, "equidistribution harness", 60, c8_equidistribution),
        (9, "multistart spectrum on the square torus", 120, c9_spectrum),
        (10, "determinism and round-trip", 120, c10_determinism),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > Duration::from_secs(budget) => Err(format!("{detail}; over the {budget} s budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name} ({:.1} s): {detail}", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name} ({:.1} s): {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn torus() -> ChartManifold {
    ChartManifold::flat_torus(2.0 * PI, 2.0 * PI)
}

// ------------------------------------------------------------------------ 1

fn c1_symmetric() -> Check {
    let theta = ok(theta_sphere(1.0), "theta")?;
    let defect = ok(theta.max_defect(), "defect")?;
    ensure!(defect < 1e-8, "theta defect {defect:e}");
    ensure!((theta.length() - 3.0 * PI).abs() < 1e-6, "theta length {}", theta.length());

    let m = ChartManifold::flat_torus(10.0, 10.0);
    let triangles = [
        [[1.0, 1.0], [4.0, 1.5], [2.0, 3.5]],
        [[2.0, 2.0], [6.0, 2.0], [3.0, 5.0]],
        [[1.5, 4.0], [3.0, 1.0], [4.5, 3.8]],
    ];
    let mut worst_angle: f64 = 0.0;
    let mut worst_pos: f64 = 0.0;
    for c in triangles {
        let oracle = fermat_point(c);
        let corners = c.map(|p| ChartPoint::new(0, p[0], p[1]));
        let guess = ChartPoint::new(0, (c[0][0] + c[1][0] + c[2][0]) / 3.0 + 0.3, (c[0][1] + c[1][1] + c[2][1]) / 3.0 - 0.2);
        let net = ok(fermat_tripod(&m, corners, guess), "tripod")?;
        let solved = ok(stationarize(&net, &SolverOptions::default()), "stationarize")?.net;
        let x = solved.positions()[&0].x;
        worst_pos = worst_pos.max(((x[0] - oracle[0]).powi(2) + (x[1] - oracle[1]).powi(2)).sqrt());
        let dirs: Vec<[f64; 2]> = c
            .iter()
            .map(|p| {
                let d = [p[0] - x[0], p[1] - x[1]];
                let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
                [d[0] / n, d[1] / n]
            })
            .collect();
        for i in 0..3 {
            let (a, b) = (dirs[i], dirs[(i + 1) % 3]);
            let ang = (a[0] * b[0] + a[1] * b[1]).clamp(-1.0, 1.0).acos();
            worst_angle = worst_angle.max((ang - 2.0 * PI / 3.0).abs());
        }
    }
    ensure!(worst_angle < 1e-5, "tripod angle off by {worst_angle:e}");
    ensure!(worst_pos < 1e-6, "tripod center {worst_pos:e} from the grid oracle");
    Ok(format!("theta defect {defect:.1e}; tripod angle error {worst_angle:.1e}, oracle distance {worst_pos:.1e}"))
}

// ------------------------------------------------------------------------ 2

fn graph_of(edges: &[(usize, usize)], vertices: usize) -> WeightedMultigraph {
    let mut g = WeightedMultigraph::new();
    for _ in 0..vertices {
        g.add_vertex();
    }
    for (a, b) in edges {
        g.add_edge(*a, *b, 1).unwrap();
    }
    g
}

/// `-g·B` from the stored samples at each piece end.
fn gradient_from_samples(net: &GammaNet) -> std::result::Result<BTreeMap<Node, Vec2>, String> {
    let m = net.manifold();
    let mut out: BTreeMap<Node, Vec2> = BTreeMap::new();
    for (e, ne) in net.edges() {
        let n = net.multiplicity(*e) as f64;
        for (k, seg) in ne.pieces.iter().enumerate() {
            for side in 0..2 {
                let s = if side == 0 { seg.samples.first() } else { seg.samples.last() }.unwrap();
                let v = if side == 0 { s.velocity } else { -s.velocity };
                let u = v / m.norm(&s.point, &v);
                let node = net.piece_node(*e, k, side);
                let at = net.point(node);
                let (_, u) = m.map_vector(&s.point, &u, at.chart).ok_or("no chart change")?;
                *out.entry(node).or_insert_with(Vec2::zeros) += u * n;
            }
        }
    }
    Ok(out
        .into_iter()
        .filter(|(n, _)| net.free_nodes().contains(n))
        .map(|(n, b)| {
            let p = net.point(n);
            (n, -(m.metric(&p).unwrap() * b))
        })
        .collect())
}

fn c2_first_variation() -> Check {
    let manifolds = [torus(), ChartManifold::round_sphere(1.0), ChartManifold::ellipsoid(1.0, 1.2, 1.5)];
    let graphs = [
        graph_of(&[(0, 1), (0, 1), (0, 1)], 2),
        graph_of(&[(0, 0), (0, 0)], 1),
        graph_of(&[(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)], 4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_fd, mut worst_b) = (0.0f64, 0.0f64);
    let mut built = 0;
    let mut attempts = 0;
    while built < 100 {
        attempts += 1;
        ensure!(attempts < 400, "only {built} random nets could be built");
        let m = &manifolds[built % 3];
        let g = &graphs[rng.random_range(0..graphs.len())];
        let sampler = ok(AreaSampler::new(m), "sampler")?;
        let Ok(net) = seed_net(m, g, &sampler, None, &mut rng) else { continue };
        let grad = ok(net.gradient_vector(), "gradient")?;
        let vars = net.variables();
        let mut fd = Vec::with_capacity(vars.len());
        for (node, axis) in &vars {
            let p = net.point(*node);
            let h = 1e-6 * (1.0 + p.x[axis.to_owned()].abs());
            let mut plus = p;
            let mut minus = p;
            plus.x[*axis] += h;
            minus.x[*axis] -= h;
            let lp = ok(net.with_points(&[(*node, plus)], Rebuild::Frozen), "perturb")?.length();
            let lm = ok(net.with_points(&[(*node, minus)], Rebuild::Frozen), "perturb")?.length();
            fd.push((lp - lm) / (2.0 * h));
        }
        let norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_fd = worst_fd.max(diff / norm.max(1e-300));
        let oracle = gradient_from_samples(&net)?;
        let analytic = ok(net.length_gradient(), "gradient")?;
        for (n, g) in &analytic {
            worst_b = worst_b.max((g - oracle[n]).norm());
        }
        built += 1;
    }
    ensure!(worst_fd < 1e-4, "finite differences disagree: relative {worst_fd:e}");
    ensure!(worst_b < 1e-6, "gradient differs from the lowered defect by {worst_b:e}");
    Ok(format!("100 nets; FD relative error {worst_fd:.1e}; defect identity {worst_b:.1e}"))
}

// ------------------------------------------------------------------------ 3

fn c3_classification() -> Check {
    let hess = HessianOptions::default();
    let tol_par = hess.tol_par;
    let ell = ChartManifold::ellipsoid(1.0, 1.2, 1.5);
    let cases: Vec<(&str, GammaNet, Classification)> = vec![
        (
            "torus loop",
            ok(closed_geodesic_net(&torus(), ChartPoint::new(0, 0.5, 1.0), Vec2::new(1.0, 0.0), 2.0 * PI, 6, 1), "loop")?,
            Classification::Nondegenerate,
        ),
        (
            "sphere equator",
            ok(
                closed_geodesic_net(&ChartManifold::round_sphere(1.0), ChartPoint::new(0, 1.0, 0.0), Vec2::new(0.0, 1.0), 2.0 * PI, 6, 1),
                "equator",
            )?,
            Classification::Degenerate,
        ),
        (
            "ellipsoid equator",
            ok(
                closed_geodesic_net(&ell, ChartPoint::new(0, 1.0, 0.0), Vec2::new(0.0, 1.0), ellipse_perimeter(1.0, 1.2), 8, 1),
                "ellipsoid equator",
            )?,
            Classification::Nondegenerate,
        ),
    ];
    let mut notes = Vec::new();
    for (name, net, expected) in cases {
        let a = ok(hessian_and_classify(&net, &hess), name)?;
        let b = ok(hessian_and_classify(&net, &HessianOptions { step_scale: 0.5, ..hess }), name)?;
        ensure!(a.classification == expected, "{name}: {:?}, expected {:?}", a.classification, expected);
        ensure!(b.classification == expected, "{name} at half step: {:?}", b.classification);
        if expected == Classification::Degenerate {
            let worst = a.null_vectors.iter().map(|n| n.parallel_residual).fold(0.0, f64::max);
            ensure!(worst > 10.0 * tol_par, "{name}: null vectors look parallel ({worst:e})");
            notes.push(format!("{name} residual {worst:.2}"));
        } else {
            notes.push(format!("{name} min |λ| {:.2e}", a.min_nontrivial));
        }
    }
    Ok(notes.join("; "))
}

// ------------------------------------------------------------------------ 4, 5

/// Disjoint union of nets on one manifold.
fn union(nets: &[&GammaNet]) -> GammaNet {
    let mut g = WeightedMultigraph::new();
    let mut positions = BTreeMap::new();
    let mut waypoints = BTreeMap::new();
    for net in nets {
        let mut vmap = BTreeMap::new();
        for v in net.graph().vertices() {
            let w = g.add_vertex();
            vmap.insert(v, w);
            positions.insert(w, net.positions()[&v]);
        }
        for e in net.graph().edges() {
            let f = g.add_edge(vmap[&e.ends[0]], vmap[&e.ends[1]], e.multiplicity).unwrap();
            waypoints.insert(f, net.edge(e.id).waypoints.clone());
        }
    }
    GammaNet::build(nets[0].manifold().clone(), g, positions, waypoints, BTreeSet::new()).unwrap()
}

/// A closed geodesic from `start` along `dir` with vertices at the given fractions of
/// its length and waypoints so that no piece exceeds one unit.
fn loop_with_vertices(m: &ChartManifold, start: ChartPoint, dir: Vec2, length: f64, fractions: &[f64], mult: u32) -> GammaNet {
    let unit = dir / m.norm(&start, &dir);
    let seg = geodesic_ivp(m, start, unit, length).unwrap();
    let at = |f: f64| m.canonical(&seg.point_at(m, f.rem_euclid(1.0)).unwrap());
    let mut g = WeightedMultigraph::new();
    let vs: Vec<usize> = fractions.iter().map(|_| g.add_vertex()).collect();
    let positions: BTreeMap<_, _> = vs.iter().zip(fractions).map(|(v, f)| (*v, at(*f))).collect();
    let mut waypoints = BTreeMap::new();
    for i in 0..fractions.len() {
        let (f0, mut f1) = (fractions[i], fractions[(i + 1) % fractions.len()]);
        if f1 <= f0 {
            f1 += 1.0;
        }
        let pieces = ((f1 - f0) * length).ceil().max(2.0) as usize;
        let e = g.add_edge(vs[i], vs[(i + 1) % vs.len()], mult).unwrap();
        waypoints.insert(e, (1..pieces).map(|k| at(f0 + (f1 - f0) * k as f64 / pieces as f64)).collect());
    }
    GammaNet::build(m.clone(), g, positions, waypoints, BTreeSet::new()).unwrap()
}

fn torus_line(x: f64, y: f64, p: f64, q: f64, fractions: &[f64], mult: u32) -> GammaNet {
    let len = 2.0 * PI * (p * p + q * q).sqrt();
    loop_with_vertices(&torus(), ChartPoint::new(0, x, y), Vec2::new(p, q), len, fractions, mult)
}

struct Case {
    name: &'static str,
    net: GammaNet,
    /// Vertices, edges and length of the output.
    expect: (usize, usize, f64),
}

fn surgery_suite() -> Vec<Case> {
    let sphere = ChartManifold::round_sphere(1.0);
    let ell = ChartManifold::ellipsoid(1.0, 1.2, 1.5);
    let r2 = 2.0f64.sqrt();
    let r5 = 5.0f64.sqrt();
    let eq = {
        let a = 0.25 * PI;
        let n = closed_geodesic_net(&ell, ChartPoint::new(0, a.cos(), a.sin()), Vec2::new(-a.sin(), a.cos()), ellipse_perimeter(1.0, 1.2), 7, 1).unwrap();
        stationarize(&n, &SolverOptions::default()).unwrap().net
    };
    let xz = {
        let n = closed_geodesic_net(&ell, ChartPoint::new(0, 0.0, 0.0), Vec2::new(1.0, 0.0), ellipse_perimeter(1.0, 1.5), 7, 1).unwrap();
        stationarize(&n, &SolverOptions::default()).unwrap().net
    };
    let ell_len = eq.length() + xz.length();
    let tilted = {
        let a = PI / 6.0;
        great_circle_net(&sphere, ChartPoint::new(0, a.cos(), a.sin()), Vec2::new(-a.sin() + 0.8 * a.cos() * 0.0, a.cos()) + Vec2::new(0.6 * a.cos(), 0.6 * a.sin()), 5).unwrap()
    };
    vec![
        Case {
            name: "two great circles",
            net: union(&[
                &great_circle_net(&sphere, ChartPoint::new(0, 0.3, 0.2), Vec2::new(1.0, 0.4), 5).unwrap(),
                &great_circle_net(&sphere, ChartPoint::new(0, -0.2, 0.4), Vec2::new(0.3, -1.0), 4).unwrap(),
            ]),
            expect: (2, 4, 4.0 * PI),
        },
        Case {
            name: "torus crossing (1,0)x(0,1)",
            net: union(&[&torus_line(0.5, 1.0, 1.0, 0.0, &[0.0], 1), &torus_line(2.0, 3.0, 0.0, 1.0, &[0.0], 1)]),
            expect: (1, 2, 4.0 * PI),
        },
        Case {
            name: "torus crossing (1,0)x(1,1)",
            net: union(&[&torus_line(0.5, 1.0, 1.0, 0.0, &[0.0], 1), &torus_line(2.0, 3.0, 1.0, 1.0, &[0.0], 2)]),
            expect: (1, 2, 2.0 * PI + 2.0 * 2.0 * PI * r2),
        },
        Case {
            name: "torus double crossing (1,0)x(1,2)",
            net: union(&[&torus_line(0.5, 1.0, 1.0, 0.0, &[0.0], 1), &torus_line(2.0, 3.3, 1.0, 2.0, &[0.0], 1)]),
            expect: (2, 4, 2.0 * PI + 2.0 * PI * r5),
        },
        Case {
            name: "staggered overlap",
            net: union(&[&torus_line(0.0, 1.0, 1.0, 0.0, &[0.0], 1), &torus_line(3.0, 1.0, 1.0, 0.0, &[0.0], 2)]),
            expect: (1, 1, 3.0 * 2.0 * PI),
        },
        Case {
            name: "containment overlap",
            net: union(&[&torus_line(0.0, 1.0, 1.0, 0.0, &[0.0], 1), &torus_line(1.0, 1.0, 1.0, 0.0, &[0.0, 1.0 / 3.0], 1)]),
            expect: (1, 1, 2.0 * 2.0 * PI),
        },
        Case {
            name: "two-component overlap",
            net: union(&[&torus_line(0.0, 1.0, 1.0, 0.0, &[0.0], 1), &torus_line(2.0, 1.0, 1.0, 0.0, &[0.0, 0.8], 2)]),
            expect: (1, 1, 3.0 * 2.0 * PI),
        },
        Case {
            name: "colinear degree-two vertices",
            net: torus_line(0.3, 0.7, 1.0, 1.0, &[0.0, 0.3, 0.65], 1),
            expect: (1, 1, 2.0 * PI * r2),
        },
        Case {
            name: "coincident vertices",
            net: union(&[&theta_sphere(1.0).unwrap(), &theta_sphere_rotated(1.0, PI / 3.0).unwrap()]),
            expect: (2, 6, 6.0 * PI),
        },
        Case {
            name: "theta and a tilted great circle",
            net: union(&[&theta_sphere(1.0).unwrap(), &tilted]),
            expect: (5, 9, 5.0 * PI),
        },
        Case {
            name: "vertex on an edge",
            net: union(&[&torus_line(0.5, 1.0, 1.0, 0.0, &[0.0], 1), &torus_line(2.0, 1.0, 0.0, 1.0, &[0.0], 1)]),
            expect: (1, 2, 4.0 * PI),
        },
        Case { name: "ellipsoid principal sections", net: union(&[&eq, &xz]), expect: (2, 4, ell_len) },
    ]
}

fn c4_surgery() -> Check {
    let opts = SurgeryOptions::default();
    let suite = surgery_suite();
    let mut worst_h: f64 = 0.0;
    let mut worst_l: f64 = 0.0;
    let mut staggered = 0;
    for case in &suite {
        let name = case.name;
        let out = ok(regularize(&case.net, &opts), name)?;
        let g = out.net.graph();
        ensure!(components_good(g), "{name}: a component is not good");
        ok(embedded(&out.net, opts.tol_geo), name)?;
        let (l0, l1) = (case.net.length(), out.net.length());
        worst_l = worst_l.max((l1 - l0).abs() / l0);
        ensure!((l1 - l0).abs() <= 1e-8 * l0, "{name}: length {l0} -> {l1}");
        let h = smooth_hausdorff(&case.net, &out.net);
        worst_h = worst_h.max(h);
        ensure!(h < opts.tol_geo, "{name}: Hausdorff distance {h:e}");
        ok(same_multiplicity(&case.net, &out.net, 2e-5, 5), name)?;
        for op in &out.log.ops {
            if let SurgeryOp::MergeOverlap { pattern, multiplicities: m, .. } = op {
                if pattern == "staggered" {
                    ensure!(m.len() == 3 && m[1] == m[0] + m[2], "{name}: staggered multiplicities {m:?}");
                    staggered += 1;
                }
            }
        }
        if name == "staggered overlap" {
            let found = out.log.ops.iter().any(|op| {
                matches!(op, SurgeryOp::MergeOverlap { pattern, multiplicities, .. } if pattern == "staggered" && multiplicities == &vec![1, 3, 2])
            });
            ensure!(found, "{name}: no (1, 3, 2) merge in the log");
        }
        let (v, e, len) = case.expect;
        ensure!(
            g.vertex_count() == v && g.edge_count() == e,
            "{name}: {} vertices, {} edges; expected {v}, {e}",
            g.vertex_count(),
            g.edge_count()
        );
        ensure!((l1 - len).abs() <= 1e-8 * len.max(1.0) + 1e-6 * f64::from(u8::from(name.starts_with("ellipsoid"))), "{name}: length {l1}, expected {len}");
        if name == "two great circles" {
            ensure!(g.is_good_star() && (l1 - 4.0 * PI).abs() < 1e-8, "two great circles: not 4π or not good*");
        }
        let d = ok(out.net.max_defect(), name)?;
        ensure!(d < 1e-8, "{name}: output defect {d:e}");
    }
    Ok(format!("{} inputs; worst Hausdorff {worst_h:.1e}, worst relative length change {worst_l:.1e}, {staggered} staggered merges", suite.len()))
}

fn c5_idempotence() -> Check {
    let opts = SurgeryOptions::default();
    let suite = surgery_suite();
    let mut rewrites = 0;
    for case in &suite {
        let name = case.name;
        let once = ok(regularize(&case.net, &opts), name)?;
        let twice = ok(regularize(&once.net, &opts), name)?;
        ok(same_net(&once.net, &twice.net, 1e-9), name)?;
        for log in [&once.log, &twice.log] {
            for c in &log.counters {
                ensure!(c.strictly_decreasing(), "{name}: counter {} not strictly decreasing: {:?}", c.step, c.counts);
            }
        }
        let mut added = 0;
        let mut erased = 0;
        for op in &twice.log.ops {
            match op {
                SurgeryOp::Subdivide { pieces, .. } => added += pieces - 1,
                SurgeryOp::Erase { .. } => erased += 1,
                other => return Err(format!("{name}: second pass rewrote the net: {other:?}")),
            }
        }
        ensure!(added == erased, "{name}: second pass erased {erased} vertices but subdivision added {added}");
        rewrites += once.log.ops.len();
    }
    Ok(format!("{} inputs, {rewrites} rewrites on the first pass, only waypoint round trips on the second", suite.len()))
}

// ------------------------------------------------------------------------ 6

/// Hausdorff distance, plus the displacement of vertices of degree at least three. Loop
/// vertices of degree two may slide along the curve.
fn max_shift(a: &GammaNet, b: &GammaNet) -> f64 {
    let (pa, pb) = (vertex_points(a), vertex_points(b));
    let mut worst = smooth_hausdorff(a, b);
    for (v, p) in &pa {
        if a.graph().degree(*v) >= 3 {
            worst = worst.max(dist(p, &pb[v]));
        }
    }
    worst
}

fn c6_continuation() -> Check {
    let theta = ok(theta_sphere(1.0), "theta")?;
    let allow = ContinuationOptions { allow_degenerate_start: true, ..ContinuationOptions::default() };

    // The theta net is degenerate, so only the symmetric bump is continuable from it. The
    // nondegenerate ellipsoid equator takes an asymmetric bump and has to move.
    let ell = ChartManifold::ellipsoid(1.0, 1.2, 1.5);
    let equator = ok(closed_geodesic_net(&ell, ChartPoint::new(0, 1.0, 0.0), Vec2::new(0.0, 1.0), ellipse_perimeter(1.0, 1.2), 8, 1), "equator")?;
    let a = PI / 8.0;
    let cases = [
        (&theta, ChartPoint::new(0, 1.0, 0.0), &allow),
        (&equator, ChartPoint::new(0, 0.9 * a.cos(), 0.9 * a.sin()), &ContinuationOptions::default()),
    ];
    let mut worst_fresh: f64 = 0.0;
    let mut moved: f64 = 0.0;
    for (start, center, opts) in cases {
        let bump = ok(Bump::new(center, 0.4, 1.0), "bump")?;
        let fam = ok(MetricFamily::new(start.manifold().clone(), BumpProfile::Smooth(bump), 0.1), "family")?;
        let out = ok(continue_net(start, &fam, &uniform_grid(0.1, 20), opts), "continue")?;
        ensure!(out.steps.len() == 21, "only {} of 21 steps emitted", out.steps.len());
        for s in &out.steps {
            ensure!(s.report.max_defect < 1e-8, "defect {:e} at t = {}", s.report.max_defect, s.t);
            let fresh = ok(stationarize(&ok(start.with_manifold(fam.at(s.t)), "metric")?, &SolverOptions::default()), "fresh solve")?;
            worst_fresh = worst_fresh.max(max_shift(&s.net, &fresh.net));
            moved = moved.max(max_shift(start, &s.net));
        }
    }
    ensure!(moved > 1e-4, "the asymmetric bump did not move the equator");
    ensure!(worst_fresh < 1e-6, "continued nets differ from fresh solves by {worst_fresh:e}");

    let lp = torus_line(0.0, 1.0, 1.0, 0.0, &[0.0], 1);
    let far = ok(Bump::new(ChartPoint::new(0, 2.0, 4.0), 1.0, 1.0), "bump")?;
    let off_theta = ok(Bump::new(ChartPoint::new(0, 0.5 * (PI / 3.0).cos(), 0.5 * (PI / 3.0).sin()), 0.2, 1.0), "bump")?;
    let fixed_cases: Vec<(&str, &GammaNet, BumpProfile)> = vec![
        ("zero family on the torus loop", &lp, BumpProfile::Zero),
        ("disjoint bump on the torus loop", &lp, BumpProfile::Smooth(far)),
        ("zero family on the theta net", &theta, BumpProfile::Zero),
        ("disjoint bump on the theta net", &theta, BumpProfile::Smooth(off_theta)),
    ];
    let mut worst_fixed: f64 = 0.0;
    for (name, net, profile) in fixed_cases {
        let fam = ok(MetricFamily::new(net.manifold().clone(), profile, 0.2), name)?;
        let out = ok(continue_net(net, &fam, &uniform_grid(0.2, 4), &allow), name)?;
        for s in &out.steps {
            let shift = max_shift(net, &s.net);
            worst_fixed = worst_fixed.max(shift).max((s.net.length() - net.length()).abs());
        }
    }
    ensure!(worst_fixed < 1e-10, "fixed families moved the net by {worst_fixed:e}");

    let mut worst_scale: f64 = 0.0;
    for net in [&lp, &theta] {
        let fam = ok(MetricFamily::new(net.manifold().clone(), BumpProfile::Constant(1.0), 0.5), "constant")?;
        let out = ok(continue_net(net, &fam, &uniform_grid(0.5, 5), &allow), "constant")?;
        for s in &out.steps {
            worst_scale = worst_scale.max((s.net.length() - net.length() * (1.0 + s.t).sqrt()).abs());
        }
    }
    ensure!(worst_scale < 1e-9, "constant factor: length off by {worst_scale:e}");
    Ok(format!("bumps: fresh-solve distance {worst_fresh:.1e}, largest displacement {moved:.1e}; fixed families {worst_fixed:.1e}; √(1+t) error {worst_scale:.1e}"))
}

// ------------------------------------------------------------------------ 7

fn c7_lipschitz() -> Check {
    let mut worst_slack = f64::INFINITY;
    let mut worst_tight: f64 = 0.0;
    let mut checked = 0usize;
    for (k, g2) in [torus(), ChartManifold::round_sphere(1.0), ChartManifold::ellipsoid(1.0, 1.2, 1.5)].into_iter().enumerate() {
        let curves = ok(random_segments(&g2, 1000, 100 + k as u64), "segments")?;
        let bumps = ok(random_bumps(&g2, 20, 200 + k as u64), "bumps")?;
        for bump in bumps {
            let g1 = g2.with_conformal(ConformalFactor::Bump { t: 0.5, profile: BumpProfile::Smooth(bump) });
            let report = ok(lipschitz_check(&g2, &g1, &g2, &curves), "lipschitz")?;
            ensure!(report.violations.is_empty(), "{} violations", report.violations.len());
            for (row, c) in report.rows.iter().zip(&curves) {
                let (l1, l2) = (curve_length(&g1, c), curve_length(&g2, c));
                let s = c
                    .iter()
                    .map(|smp| {
                        let a = g1.metric(&smp.point).unwrap();
                        let b = g2.metric(&smp.point).unwrap();
                        let v = smp.velocity;
                        ((v.transpose() * (a - b) * v)[(0, 0)] / (v.transpose() * b * v)[(0, 0)]).abs()
                    })
                    .fold(0.0, f64::max);
                ensure!(row.s >= s * (1.0 - 1e-12), "reported sup {} below the sampled {s}", row.s);
                let slack = ((1.0 + s).sqrt() - 1.0) * l2 - (l1 - l2);
                ensure!(slack >= -LIPSCHITZ_TOL, "violation with slack {slack:e}");
                ensure!((row.l1 - l1).abs() < 1e-9 && (row.l2 - l2).abs() < 1e-9, "lengths disagree with the oracle");
                worst_slack = worst_slack.min(slack);
                checked += 1;
            }
        }
        for c in [0.3, 1.0] {
            let g1 = g2.scaled(1.0 + c);
            let report = ok(lipschitz_check(&g2, &g1, &g2, &curves), "lipschitz")?;
            for row in &report.rows {
                worst_tight = worst_tight.max(row.slack.abs());
            }
        }
        let same = ok(lipschitz_check(&g2, &g2, &g2, &curves), "lipschitz")?;
        ensure!(same.rows.iter().all(|r| r.l1 == r.l2 && r.bound == 0.0 && r.slack == 0.0), "g1 = g2 is not zero on both sides");
    }
    ensure!(worst_tight < 1e-9, "constant factor not tight: {worst_tight:e}");
    Ok(format!("{checked} curve checks, min slack {worst_slack:.2e}; constant-factor tightness {worst_tight:.1e}"))
}

// ------------------------------------------------------------------------ 8

fn c8_equidistribution() -> Check {
    let ell = ChartManifold::ellipsoid(1.0, 1.2, 1.5);
    let nets = vec![
        ok(theta_sphere(1.0), "theta")?,
        torus_line(0.0, 1.0, 1.0, 0.0, &[0.0], 2),
        ok(closed_geodesic_net(&ell, ChartPoint::new(0, 1.0, 0.0), Vec2::new(0.0, 1.0), ellipse_perimeter(1.0, 1.2), 8, 1), "ellipse")?,
    ];
    let mut worst_const: f64 = 0.0;
    for n in &nets {
        for c in [1.0, -2.5, 7.25] {
            let r = ok(equidistribution_ratio(std::slice::from_ref(n), &ConstantField(c)), "ratio")?;
            worst_const = worst_const.max(r.gap);
        }
    }
    ensure!(worst_const <= 1e-12, "constant gap {worst_const:e}");

    let a = torus_line(0.0, 0.0, 1.0, 0.0, &[0.0], 1);
    let b = torus_line(0.0, 0.0, 0.0, 1.0, &[0.0], 1);
    let f = |m: &ChartManifold, p: &ChartPoint| {
        let q = m.canonical(p);
        q.x[0].sin() * q.x[1].sin()
    };
    let r = ok(equidistribution_ratio(&[a, b], &f), "odd")?;
    ensure!(r.lhs.abs() <= 1e-8 && r.rhs.abs() <= 1e-8 && r.gap <= 1e-8, "odd symmetry: {r:?}");

    let bump = ok(Bump::new(ChartPoint::new(0, 0.3, 0.2), 0.8, 1.0), "bump")?;
    let ks = [1, 2, 4, 8, 16];
    let first = ok(theta_trend(&ks, 8, 7, &bump), "trend")?;
    let again = ok(theta_trend(&ks, 8, 7, &bump), "trend")?;
    ensure!(
        first.iter().zip(&again).all(|(x, y)| x.mean_gap.to_bits() == y.mean_gap.to_bits()),
        "trend is not deterministic"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = nalgebra::UnitQuaternion::from_euler_angles(rng.random(), rng.random(), rng.random());
    let turned = ok(rotated_theta(1.0, &q), "rotated theta")?;
    ensure!(ok(turned.max_defect(), "defect")? < 1e-8, "rotated theta is not stationary");
    let trend: Vec<String> = first.iter().map(|r| format!("k={} {:.2e}", r.k, r.mean_gap)).collect();
    Ok(format!("constant {worst_const:.1e}; odd {:.1e}; trend {}", r.gap, trend.join(", ")))
}

// ------------------------------------------------------------------------ 9

fn c9_spectrum() -> Check {
    let spectrum = torus_spectrum(20.0);
    let mut g = WeightedMultigraph::new();
    let v = g.add_vertex();
    g.add_edge(v, v, 1).unwrap();
    let opts = MultistartOptions { seeds: 200, rng_seed: 0, ..MultistartOptions::default() };
    let report = ok(multistart(&torus(), &g, &opts), "multistart")?;
    ensure!(!report.nets.is_empty(), "no closed geodesic found");
    let mut found = BTreeMap::new();
    for net in &report.nets {
        let l = net.length();
        let d = ok(net.max_defect(), "defect")?;
        ensure!(d < 1e-8, "found net with defect {d:e}");
        let nearest = spectrum.iter().map(|s| (s - l).abs()).fold(f64::INFINITY, f64::min);
        ensure!(l <= 20.0, "length {l} lies beyond the enumerated spectrum");
        ensure!(nearest < 1e-5, "length {l} is {nearest:e} from the lattice spectrum");
        *found.entry(format!("{:.4}", l)).or_insert(0) += 1;
    }
    let summary: Vec<String> = found.iter().map(|(l, n)| format!("{l}×{n}")).collect();
    Ok(format!("{} distinct nets from {} converged seeds: {}", report.nets.len(), report.converged(), summary.join(", ")))
}

// ------------------------------------------------------------------------ 10

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn cli(args: &[&str], out: &Path) -> std::result::Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_geonet"))
        .args(args)
        .arg("--out")
        .arg(out)
        .current_dir(workspace())
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)));
    }
    Ok(())
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn c10_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("density", vec!["density-scan", "--config", "data/density_torus.json", "--seeds", "12", "--seed", "3"]),
        ("lipschitz", vec!["lipschitz", "--config", "data/lipschitz_torus.json"]),
        ("equidist", vec!["equidist", "--config", "data/equidist_trend.json"]),
        ("continue", vec!["continue", "--config", "data/continue_theta.json", "--t-steps", "5", "--t-max", "0.05"]),
        ("regularize", vec!["regularize", "--net", "data/two_circles.json"]),
        ("solve", vec!["solve", "--manifold", "data/torus.json", "--graph", "data/loop_graph.json", "--seeds", "20"]),
    ];
    let mut compared = 0;
    let mut nets = 0;
    for (name, args) in &runs {
        let (a, b) = (tmp.path().join(format!("{name}_a")), tmp.path().join(format!("{name}_b")));
        cli(args, &a)?;
        cli(args, &b)?;
        let (fa, fb) = (files(&a), files(&b));
        ensure!(fa.len() == fb.len(), "{name}: different file sets");
        for (x, y) in fa.iter().zip(&fb) {
            if x.file_name().is_some_and(|n| n == "metadata.json") {
                continue;
            }
            let (bx, by) = (std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
            ensure!(bx == by, "{name}: {} differs between identical runs", x.display());
            compared += 1;
            let text = String::from_utf8_lossy(&bx);
            if x.extension().is_some_and(|e| e == "json") && text.contains("\"geometry\"") {
                let net = ok(io::parse_net(&text, None), "re-parse")?;
                let again = ok(io::write_net(&net), "rewrite")?;
                ensure!(again == text, "{}: net file does not round-trip", x.display());
                nets += 1;
            }
        }
    }
    ensure!(nets >= 3, "only {nets} net files were emitted");
    Ok(format!("{compared} report files byte-identical across runs; {nets} net files round-trip"))
}
