use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use geonet::continuation::{continue_net, length_along_family, uniform_grid, ContinuationOptions};
use geonet::experiments::{
    density_scan, equidistribution_ratio, grid_cover, lipschitz_check, random_bumps, random_segments, theta_trend, Ball,
    ScanOptions,
};
use geonet::io::{self, Cell, Csv, FailureRecord, Marker, SCHEMA_VERSION};
use geonet::net::{hessian_and_classify, GammaNet, HessianOptions};
use geonet::riemann::expr::Expr;
use geonet::riemann::quadrature::{ChartExpression, ConstantField};
use geonet::riemann::{Bump, BumpProfile, ChartManifold, ChartPoint, ConformalFactor, MetricFamily, ScalarField};
use geonet::solver::{multistart, stationarize, MultistartOptions, SolverOptions};
use geonet::surgery::{regularize, SurgeryOptions};
use geonet::{GeonetError, Result};

#[derive(Parser)]
#[command(name = "geonet", version, about = "Stationary geodesic nets on surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a net file to stationarity, or multistart a graph file.
    Solve(Flags),
    /// Defect, length and non-degeneracy classification of a net.
    Verify(Flags),
    /// Surgery to a good embedded net with the same image and length.
    Regularize(Flags),
    /// Follow a net along a conformal bump family.
    Continue(Flags),
    /// Which balls of a cover are met by nets found from random seeds.
    DensityScan(Flags),
    /// Line average of a field over nets against its volume average.
    Equidist(Flags),
    /// Length comparison under perturbed metrics on random geodesic segments.
    Lipschitz(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Solve(f) => ("solve", f),
            Command::Verify(f) => ("verify", f),
            Command::Regularize(f) => ("regularize", f),
            Command::Continue(f) => ("continue", f),
            Command::DensityScan(f) => ("density-scan", f),
            Command::Equidist(f) => ("equidist", f),
            Command::Lipschitz(f) => ("lipschitz", f),
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
struct Flags {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifold spec file.
    #[arg(long)]
    manifold: Option<PathBuf>,
    /// Net file.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Graph file.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: 1].
    #[arg(long)]
    workers: Option<usize>,
    /// Stationarity tolerance on the defect [default: 1e-8].
    #[arg(long)]
    tol_stat: Option<f64>,
    /// Geometric coincidence tolerance [default: 1e-5].
    #[arg(long)]
    tol_geo: Option<f64>,
    /// Largest family parameter.
    #[arg(long)]
    t_max: Option<f64>,
    /// Uniform steps up to t_max [default: 20].
    #[arg(long)]
    t_steps: Option<usize>,
    /// Random starts per graph.
    #[arg(long)]
    seeds: Option<usize>,
}

/// Config file. Paths are relative to the working directory.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Config {
    schema_version: u32,
    manifold: Option<PathBuf>,
    net: Option<PathBuf>,
    /// Further nets for `equidist`.
    #[serde(default)]
    nets: Vec<PathBuf>,
    graph: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    tol_stat: Option<f64>,
    tol_geo: Option<f64>,
    t_max: Option<f64>,
    t_steps: Option<usize>,
    seeds: Option<usize>,
    /// Perturbation profile for `continue`.
    profile: Option<ProfileSpec>,
    allow_degenerate_start: Option<bool>,
    cover: Option<CoverSpec>,
    field: Option<FieldSpec>,
    trend: Option<TrendSpec>,
    segments: Option<usize>,
    bumps: Option<usize>,
    svg: Option<bool>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ProfileSpec {
    Zero,
    Constant { c: f64 },
    Bump { chart: usize, center: [f64; 2], radius: f64, amplitude: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CoverSpec {
    /// `grid × grid` balls over the chart-0 rectangle.
    grid: Option<usize>,
    #[serde(default = "unit")]
    radius: f64,
    #[serde(default)]
    balls: Vec<BallSpec>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BallSpec {
    chart: usize,
    center: [f64; 2],
    radius: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FieldSpec {
    Constant { c: f64 },
    /// Expression in the chart-0 coordinates `x1, x2`.
    Expr { expr: String },
    Bump { chart: usize, center: [f64; 2], radius: f64, amplitude: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TrendSpec {
    ks: Vec<usize>,
    trials: usize,
}

/// Flags merged over the config file.
struct Settings {
    cfg: Config,
    out: PathBuf,
    seed: u64,
    workers: usize,
    tol_stat: f64,
    tol_geo: f64,
    t_max: Option<f64>,
    t_steps: usize,
    seeds: Option<usize>,
}

/// An error with the module and operation it came from.
struct Failure {
    module: &'static str,
    operation: &'static str,
    err: GeonetError,
}

trait At<T> {
    fn at(self, module: &'static str, operation: &'static str) -> std::result::Result<T, Failure>;
}

impl<T> At<T> for Result<T> {
    fn at(self, module: &'static str, operation: &'static str) -> std::result::Result<T, Failure> {
        self.map_err(|err| Failure { module, operation, err })
    }
}

type Outcome = std::result::Result<(), Failure>;

fn invalid(module: &'static str, operation: &'static str, msg: impl Into<String>) -> Failure {
    Failure { module, operation, err: GeonetError::InvalidInput(msg.into()) }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = cli.command.parts();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let settings = match settings(flags) {
        Ok(s) => s,
        Err(f) => return fail(flags.out.as_deref().unwrap_or(Path::new("out")), f),
    };
    if let Err(e) = fs::create_dir_all(&settings.out) {
        return fail(&settings.out, Failure { module: "cli", operation: "create output directory", err: e.into() });
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(settings.workers.max(1)).build();
    let result = match pool {
        Ok(pool) => pool.install(|| match &cli.command {
            Command::Solve(_) => solve(&settings),
            Command::Verify(_) => verify(&settings),
            Command::Regularize(_) => regularize_cmd(&settings),
            Command::Continue(_) => continue_cmd(&settings),
            Command::DensityScan(_) => density(&settings),
            Command::Equidist(_) => equidist(&settings),
            Command::Lipschitz(_) => lipschitz(&settings),
        }),
        Err(e) => Err(invalid("cli", "thread pool", e.to_string())),
    };
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "command": name,
        "argv": std::env::args().collect::<Vec<_>>(),
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "elapsed_s": clock.elapsed().as_secs_f64(),
        "ok": result.is_ok(),
    });
    let _ = fs::write(settings.out.join("metadata.json"), format!("{meta:#}\n"));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(&settings.out, f),
    }
}

fn fail(out: &Path, f: Failure) -> ExitCode {
    let record = FailureRecord::new(f.module, f.operation, &f.err);
    let text = serde_json::to_string_pretty(&record).unwrap_or_default() + "\n";
    let _ = fs::create_dir_all(out);
    let _ = fs::write(out.join("failure.json"), &text);
    eprintln!("error in {}::{}: {}", f.module, f.operation, f.err);
    ExitCode::from(record.exit_code as u8)
}

fn settings(flags: &Flags) -> std::result::Result<Settings, Failure> {
    let cfg = match &flags.config {
        Some(p) => {
            let text = read(p)?;
            let cfg: Config = serde_json::from_str(&text).map_err(GeonetError::from).at("cli", "parse config")?;
            if cfg.schema_version != SCHEMA_VERSION {
                return Err(invalid("cli", "parse config", format!("unsupported schema_version {}", cfg.schema_version)));
            }
            cfg
        }
        None => Config { schema_version: SCHEMA_VERSION, ..Config::default() },
    };
    let mut cfg = cfg;
    cfg.manifold = flags.manifold.clone().or(cfg.manifold);
    cfg.net = flags.net.clone().or(cfg.net);
    cfg.graph = flags.graph.clone().or(cfg.graph);
    let s = Settings {
        out: flags.out.clone().or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed: flags.seed.or(cfg.seed).unwrap_or(0),
        workers: flags.workers.or(cfg.workers).unwrap_or(1),
        tol_stat: flags.tol_stat.or(cfg.tol_stat).unwrap_or(1e-8),
        tol_geo: flags.tol_geo.or(cfg.tol_geo).unwrap_or(1e-5),
        t_max: flags.t_max.or(cfg.t_max),
        t_steps: flags.t_steps.or(cfg.t_steps).unwrap_or(20),
        seeds: flags.seeds.or(cfg.seeds),
        cfg,
    };
    if !(s.tol_stat > 0.0) || !(s.tol_geo > 0.0) {
        return Err(invalid("cli", "parse flags", "tolerances must be positive"));
    }
    Ok(s)
}

fn read(p: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(p).map_err(GeonetError::from).at("io", "read file")
}

fn write(s: &Settings, name: &str, text: &str) -> Outcome {
    fs::write(s.out.join(name), text).map_err(GeonetError::from).at("io", "write file")
}

fn write_json<T: Serialize>(s: &Settings, name: &str, v: &T) -> Outcome {
    let text = serde_json::to_string_pretty(v).map_err(GeonetError::from).at("io", "serialize report")?;
    write(s, name, &(text + "\n"))
}

fn load_manifold(s: &Settings) -> std::result::Result<Option<ChartManifold>, Failure> {
    s.cfg.manifold.as_ref().map(|p| io::parse_manifold(&read(p)?).at("io", "parse manifold")).transpose()
}

fn require_manifold(s: &Settings) -> std::result::Result<ChartManifold, Failure> {
    load_manifold(s)?.ok_or_else(|| invalid("cli", "parse flags", "--manifold is required"))
}

fn load_net_at(path: &Path, m: Option<ChartManifold>) -> std::result::Result<GammaNet, Failure> {
    io::parse_net(&read(path)?, m).at("io", "parse net")
}

fn load_net(s: &Settings) -> std::result::Result<GammaNet, Failure> {
    let path = s.cfg.net.as_ref().ok_or_else(|| invalid("cli", "parse flags", "--net is required"))?;
    load_net_at(path, load_manifold(s)?)
}

fn solver_options(s: &Settings) -> SolverOptions {
    SolverOptions { tol_stat: s.tol_stat, ..SolverOptions::default() }
}

fn hessian_options(s: &Settings) -> HessianOptions {
    HessianOptions { tol_stat: s.tol_stat, ..HessianOptions::default() }
}

fn solve(s: &Settings) -> Outcome {
    if s.cfg.graph.is_some() && s.cfg.net.is_none() {
        let m = require_manifold(s)?;
        let graphs = io::parse_graphs(&read(s.cfg.graph.as_ref().unwrap())?).at("io", "parse graph")?;
        let mut table = Csv::new(&["graph", "net", "length", "defect"]);
        let mut counts = Vec::new();
        fs::create_dir_all(s.out.join("nets")).map_err(GeonetError::from).at("io", "write file")?;
        for (k, g) in graphs.iter().enumerate() {
            let opts = MultistartOptions {
                seeds: s.seeds.unwrap_or(20),
                rng_seed: s.seed,
                workers: s.workers,
                solver: SolverOptions { tol_stat: s.tol_stat, ..MultistartOptions::default().solver },
                ..MultistartOptions::default()
            };
            let report = multistart(&m, g, &opts).at("solver", "multistart")?;
            for (i, net) in report.nets.iter().enumerate() {
                let defect = net.max_defect().at("net", "balancing defect")?;
                table.row(&[Cell::I(k as i64), Cell::I(i as i64), Cell::F(net.length()), Cell::F(defect)]);
                write(s, &format!("nets/graph{k}_net{i}.json"), &io::write_net(net).at("io", "write net")?)?;
            }
            counts.push(json!({ "graph": k, "converged": report.nets.len(), "failures": report.failure_counts() }));
        }
        write(s, "multistart.csv", &table.finish())?;
        return write_json(s, "report.json", &json!({ "seeds": s.seeds.unwrap_or(20), "rng_seed": s.seed, "graphs": counts }));
    }
    let net = load_net(s)?;
    let solved = stationarize(&net, &solver_options(s)).at("solver", "stationarize")?;
    let mut trace = Csv::new(&["iteration", "phase", "length", "defect", "step"]);
    for t in &solved.trace {
        trace.row(&[
            Cell::I(t.iteration as i64),
            Cell::S(format!("{:?}", t.phase).to_lowercase()),
            Cell::F(t.length),
            Cell::F(t.defect),
            Cell::F(t.step),
        ]);
    }
    write(s, "trace.csv", &trace.finish())?;
    write(s, "net.json", &io::write_net(&solved.net).at("io", "write net")?)?;
    let defect = solved.net.max_defect().at("net", "balancing defect")?;
    write_json(
        s,
        "report.json",
        &json!({ "iterations": solved.iterations, "length": solved.net.length(), "max_defect": defect }),
    )
}

fn verify(s: &Settings) -> Outcome {
    let net = load_net(s)?;
    net.check().at("net", "check")?;
    let report = hessian_and_classify(&net, &hessian_options(s)).at("net", "hessian_and_classify")?;
    write_json(
        s,
        "report.json",
        &json!({
            "length": report.length,
            "max_defect": report.max_defect,
            "stationary": report.max_defect <= s.tol_stat,
            "classification": report.classification,
            "eigenvalues": report.eigenvalues,
            "lambda_max": report.lambda_max,
            "min_nontrivial": report.min_nontrivial,
            "null_vectors": report.null_vectors.len(),
            "tol_null": report.tol_null,
            "tol_par": report.tol_par,
            "caveat": report.caveat,
        }),
    )
}

fn regularize_cmd(s: &Settings) -> Outcome {
    let net = load_net(s)?;
    let opts = SurgeryOptions { tol_geo: s.tol_geo, tol_stat: s.tol_stat, ..SurgeryOptions::default() };
    let out = regularize(&net, &opts).at("surgery", "regularize")?;
    write(s, "net.json", &io::write_net(&out.net).at("io", "write net")?)?;
    write_json(s, "surgery.json", &out.log)?;
    let g = out.net.graph();
    write_json(
        s,
        "report.json",
        &json!({
            "vertices": g.vertex_count(),
            "edges": g.edge_count(),
            "good_star": g.is_good_star(),
            "good": g.is_good(),
            "length_before": net.length(),
            "length": out.net.length(),
        }),
    )
}

fn continue_cmd(s: &Settings) -> Outcome {
    let net = load_net(s)?;
    let m = net.manifold().clone();
    let profile = match &s.cfg.profile {
        None => return Err(invalid("cli", "parse config", "continue needs a \"profile\" in the config")),
        Some(ProfileSpec::Zero) => BumpProfile::Zero,
        Some(ProfileSpec::Constant { c }) => BumpProfile::Constant(*c),
        Some(ProfileSpec::Bump { chart, center, radius, amplitude }) => {
            let c = ChartPoint::new(*chart, center[0], center[1]);
            m.check_point(&c).at("riemann", "bump center")?;
            BumpProfile::Smooth(Bump::new(c, *radius, *amplitude).at("riemann", "bump")?)
        }
    };
    let t_max = s.t_max.ok_or_else(|| invalid("cli", "parse flags", "--t-max is required"))?;
    if s.t_steps == 0 {
        return Err(invalid("cli", "parse flags", "--t-steps must be positive"));
    }
    let fam = MetricFamily::new(m, profile, t_max).at("riemann", "metric family")?;
    let opts = ContinuationOptions {
        corrector: SolverOptions { tol_stat: s.tol_stat, ..ContinuationOptions::default().corrector },
        hessian: hessian_options(s),
        allow_degenerate_start: s.cfg.allow_degenerate_start.unwrap_or(false),
        ..ContinuationOptions::default()
    };
    let out = continue_net(&net, &fam, &uniform_grid(t_max, s.t_steps), &opts).at("continuation", "continue_net")?;
    let mut table = Csv::new(&["t", "length", "defect", "min_eigenvalue", "classification"]);
    for r in length_along_family(&out) {
        table.row(&[
            Cell::F(r.t),
            Cell::F(r.length),
            Cell::F(r.defect),
            Cell::F(r.min_nontrivial),
            Cell::S(r.classification.as_str().into()),
        ]);
    }
    write(s, "family.csv", &table.finish())?;
    let last = out.steps.last().expect("the start is always emitted");
    write(s, "net_final.json", &io::write_net(&last.net).at("io", "write net")?)?;
    write_json(
        s,
        "report.json",
        &json!({ "steps": out.steps.len(), "last_t": last.t, "halted": out.halted, "caveat": last.report.caveat }),
    )
}

fn cover(s: &Settings, m: &ChartManifold) -> std::result::Result<Vec<Ball>, Failure> {
    let spec = s.cfg.cover.clone().unwrap_or(CoverSpec { grid: Some(4), radius: 1.0, balls: vec![] });
    let mut balls = match spec.grid {
        Some(k) => grid_cover(m, k, spec.radius).at("experiments", "grid cover")?,
        None => vec![],
    };
    balls.extend(spec.balls.iter().map(|b| Ball { chart: b.chart, center: b.center, radius: b.radius }));
    if balls.is_empty() {
        return Err(invalid("cli", "parse config", "the cover is empty"));
    }
    Ok(balls)
}

fn density(s: &Settings) -> Outcome {
    let m = require_manifold(s)?;
    let path = s.cfg.graph.as_ref().ok_or_else(|| invalid("cli", "parse flags", "--graph is required"))?;
    let graphs = io::parse_graphs(&read(path)?).at("io", "parse graph")?;
    let balls = cover(s, &m)?;
    let opts = ScanOptions {
        seeds: s.seeds.unwrap_or(20),
        rng_seed: s.seed,
        workers: s.workers,
        tol_geo: s.tol_geo,
        hessian: hessian_options(s),
    };
    let (report, nets) = density_scan(&m, &graphs, &balls, &opts).at("experiments", "density_scan")?;
    let mut cov = Csv::new(&["ball", "chart", "x1", "x2", "radius", "hit", "nets"]);
    for (i, b) in report.balls.iter().enumerate() {
        let ids: Vec<String> = b.nets.iter().map(|n| n.to_string()).collect();
        cov.row(&[
            Cell::I(i as i64),
            Cell::I(b.ball.chart as i64),
            Cell::F(b.ball.center[0]),
            Cell::F(b.ball.center[1]),
            Cell::F(b.ball.radius),
            Cell::I(b.hit as i64),
            Cell::S(ids.join(" ")),
        ]);
    }
    write(s, "coverage.csv", &cov.finish())?;
    let mut found = Csv::new(&["net", "graph", "length", "classification"]);
    for (i, n) in report.nets.iter().enumerate() {
        found.row(&[Cell::I(i as i64), Cell::I(n.graph as i64), Cell::F(n.length), Cell::S(n.classification.as_str().into())]);
    }
    write(s, "nets.csv", &found.finish())?;
    write_json(s, "report.json", &report)?;
    if s.cfg.svg.unwrap_or(true) {
        let markers: Vec<Marker> = report
            .balls
            .iter()
            .map(|b| Marker { chart: b.ball.chart, center: b.ball.center, radius: b.ball.radius, hit: b.hit })
            .collect();
        write(s, "overlay.svg", &io::svg_overlay(&m, &nets, &markers))?;
    }
    Ok(())
}

fn field(spec: &FieldSpec, m: &ChartManifold) -> std::result::Result<Box<dyn ScalarField>, Failure> {
    Ok(match spec {
        FieldSpec::Constant { c } => Box::new(ConstantField(*c)),
        FieldSpec::Expr { expr } => Box::new(ChartExpression(Expr::parse(expr).at("riemann", "parse expression")?)),
        FieldSpec::Bump { chart, center, radius, amplitude } => {
            let c = ChartPoint::new(*chart, center[0], center[1]);
            m.check_point(&c).at("riemann", "bump center")?;
            Box::new(Bump::new(c, *radius, *amplitude).at("riemann", "bump")?)
        }
    })
}

fn equidist(s: &Settings) -> Outcome {
    let spec = s.cfg.field.as_ref().ok_or_else(|| invalid("cli", "parse config", "equidist needs a \"field\""))?;
    let m = load_manifold(s)?;
    let mut paths: Vec<&PathBuf> = s.cfg.net.iter().collect();
    paths.extend(&s.cfg.nets);
    let nets = paths.iter().map(|p| load_net_at(p, m.clone())).collect::<std::result::Result<Vec<_>, _>>()?;
    if nets.is_empty() && s.cfg.trend.is_none() {
        return Err(invalid("cli", "parse flags", "equidist needs --net or a \"trend\" section"));
    }
    if let Some(first) = nets.first() {
        if nets.iter().any(|n| !n.manifold().same_atlas(first.manifold())) {
            return Err(Failure { module: "experiments", operation: "equidistribution_ratio", err: GeonetError::IncompatibleAtlases });
        }
        let f = field(spec, first.manifold())?;
        let r = equidistribution_ratio(&nets, f.as_ref()).at("experiments", "equidistribution_ratio")?;
        let mut t = Csv::new(&["nets", "lhs", "rhs", "gap"]);
        t.row(&[Cell::I(nets.len() as i64), Cell::F(r.lhs), Cell::F(r.rhs), Cell::F(r.gap)]);
        write(s, "ratio.csv", &t.finish())?;
    }
    if let Some(trend) = &s.cfg.trend {
        let sphere = ChartManifold::round_sphere(1.0);
        let f = field(spec, &sphere)?;
        let rows = theta_trend(&trend.ks, trend.trials, s.seed, f.as_ref()).at("experiments", "theta_trend")?;
        let mut t = Csv::new(&["k", "trials", "mean_gap"]);
        for r in rows {
            t.row(&[Cell::I(r.k as i64), Cell::I(r.trials as i64), Cell::F(r.mean_gap)]);
        }
        write(s, "trend.csv", &t.finish())?;
    }
    Ok(())
}

fn lipschitz(s: &Settings) -> Outcome {
    let g2 = require_manifold(s)?;
    let t = s.t_max.unwrap_or(0.5);
    if !(t >= 0.0) {
        return Err(invalid("cli", "parse flags", "--t-max must be nonnegative"));
    }
    let curves = random_segments(&g2, s.cfg.segments.unwrap_or(1000), s.seed).at("experiments", "random segments")?;
    let bumps = random_bumps(&g2, s.cfg.bumps.unwrap_or(20), s.seed).at("experiments", "random bumps")?;
    let mut table = Csv::new(&["bump", "curve", "l1", "l2", "s", "bound", "slack"]);
    let (mut violations, mut min_slack, mut max_slack) = (0usize, f64::INFINITY, f64::NEG_INFINITY);
    for (b, bump) in bumps.into_iter().enumerate() {
        let g1 = g2.with_conformal(ConformalFactor::Bump { t, profile: BumpProfile::Smooth(bump) });
        let r = lipschitz_check(&g2, &g1, &g2, &curves).at("experiments", "lipschitz_check")?;
        violations += r.violations.len();
        min_slack = min_slack.min(r.min_slack);
        max_slack = max_slack.max(r.max_slack);
        for row in r.rows {
            table.row(&[
                Cell::I(b as i64),
                Cell::I(row.curve as i64),
                Cell::F(row.l1),
                Cell::F(row.l2),
                Cell::F(row.s),
                Cell::F(row.bound),
                Cell::F(row.slack),
            ]);
        }
    }
    write(s, "lipschitz.csv", &table.finish())?;
    write_json(
        s,
        "report.json",
        &json!({ "t": t, "violations": violations, "min_slack": min_slack, "max_slack": max_slack, "tolerance": geonet::experiments::LIPSCHITZ_TOL }),
    )
}
