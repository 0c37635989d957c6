//! The `mk` command line.
//!
//! Every subcommand writes its outputs, then prints one JSON line to stdout. Exit codes:
//! 0 on success, 2 for validation and usage errors, 3 for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cconvex::{
    c_convexity_defect, c_transform, disk_shape, extract_map_with, isoperimetric_check_with, monge_ampere_residual,
    rectangle_shape, Direction, IsoperimetricOptions, Lattice, MaskReason, ResidualStats, Support,
};
use crate::error::{MkError, Result};
use crate::io::{self, read_discrete, read_grid, read_json, read_potential, write_json};
use crate::kantorovich::{solve_plan, wasserstein_p, TransportSolution, TransportSolutionJson};
use crate::measures::{Chart, CostFunction, CostKind, DiscreteMeasureJson, GridMeasureJson, Point};
use crate::mtw::{certify_conditions, loeper_max_principle_check, trace_c_segment, CSegment, CertifyOptions, Domain, MaxPrincipleReport, Verdict};
use crate::screening::{
    check_exclusion, solve_rochet_chone, solve_welfare, ProductCost, Region, ScreeningProblem, ScreeningSolution, SolverOptions,
    Welfare, WelfareStatus,
};
use crate::semidiscrete::{loeper_demo, loeper_scan, solve_semidiscrete, Geometry};

#[derive(Parser, Debug)]
#[command(name = "mk", version, about = "Monge-Kantorovich workbench")]
struct Cli {
    /// JSON file with a "command" key and the subcommand's flags as keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal discrete plan with dual certificate.
    Transport(TransportArgs),
    /// Wasserstein distance in the chart metric.
    Wasserstein(WassersteinArgs),
    /// Discrete c-transform of a potential.
    Ctransform(CtransformArgs),
    /// Read a map off a transport solution.
    Map(MapArgs),
    /// Monge-Ampere residual of a grid potential.
    Residual(ResidualArgs),
    /// Transport proof of the isoperimetric inequality on a planar shape.
    Isoperimetric(IsoperimetricArgs),
    /// Sampled cross-curvature and condition verdicts.
    Curvature(CurvatureArgs),
    /// Trace a c-segment.
    Csegment(SegmentArgs),
    /// Maximum principle along a c-segment.
    Maxprinciple(MaxPrincipleArgs),
    /// Semi-discrete transport from a grid to atoms.
    Semidiscrete(SemidiscreteArgs),
    /// Three-target cell connectivity demo.
    Loeper(LoeperArgs),
    /// Monopolist screening on the unit square or interval.
    Screening(ScreeningArgs),
    /// Welfare-weighted screening.
    Welfare(WelfareArgs),
}

#[derive(Args, Debug)]
struct TransportArgs {
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: PathBuf,
    #[arg(long, default_value = "quadratic")]
    cost: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plan as `i,j,mass` lines.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WassersteinArgs {
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CtransformArgs {
    /// Potential field JSON.
    #[arg(long)]
    field: PathBuf,
    /// Measure or grid JSON whose atoms or cell centres receive the transform.
    #[arg(long)]
    onto: PathBuf,
    #[arg(long, default_value = "quadratic")]
    cost: String,
    /// `x-to-y` or `y-to-x`.
    #[arg(long, default_value = "x-to-y")]
    direction: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MapArgs {
    /// Output of `mk transport`.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = crate::cconvex::SPLIT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ResidualArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    f_plus: PathBuf,
    #[arg(long)]
    f_minus: PathBuf,
    #[arg(long, default_value = "quadratic")]
    cost: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    raster: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IsoperimetricArgs {
    /// `disk`, `rectangle:<aspect>`, or a grid JSON file.
    #[arg(long, default_value = "disk")]
    shape: String,
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    #[arg(long, default_value_t = 40)]
    coarse: usize,
    #[arg(long, default_value_t = 12)]
    neighbours: usize,
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvatureArgs {
    #[arg(long)]
    cost: String,
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1e-4)]
    margin: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[arg(long)]
    cost: String,
    /// Comma-separated chart coordinates.
    #[arg(long, allow_hyphen_values = true)]
    x0: String,
    #[arg(long, allow_hyphen_values = true)]
    y0: String,
    #[arg(long, allow_hyphen_values = true)]
    y1: String,
    #[arg(long, default_value_t = 32)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MaxPrincipleArgs {
    #[command(flatten)]
    segment: SegmentArgs,
    /// Random points x drawn from the cost's default domain.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SemidiscreteArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value = "quadratic")]
    cost: String,
    #[arg(long, default_value_t = crate::semidiscrete::DEFAULT_MASS_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    raster: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LoeperArgs {
    #[arg(long, default_value = "hyperbolic")]
    geometry: String,
    #[arg(long, default_value_t = 512)]
    resolution: usize,
    /// Intrinsic radius of the source ball.
    #[arg(long)]
    radius: Option<f64>,
    /// Intrinsic spacing of the targets.
    #[arg(long)]
    spacing: Option<f64>,
    /// Try the built-in hyperbolic radii and spacings until the middle cell splits.
    #[arg(long)]
    scan: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    raster: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScreeningArgs {
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    /// 1 for the interval, 2 for the square.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Weight of the `|y|` term in the product cost.
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    kkt_samples: usize,
    /// Enforce convexity along the axes only.
    #[arg(long)]
    no_diagonals: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    raster: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WelfareArgs {
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// `linear` or `capped:<cap>`.
    #[arg(long, default_value = "linear")]
    welfare: String,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs `mk` with the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => return usage(e, out, err),
    };
    let command = match (cli.config, cli.command) {
        (Some(_), Some(_)) => {
            let _ = writeln!(err, "--config replaces the subcommand and its flags; give one or the other");
            return 2;
        }
        (None, None) => {
            let _ = writeln!(err, "{}", <Cli as clap::CommandFactory>::command().render_help());
            return 2;
        }
        (None, Some(c)) => c,
        (Some(path), None) => match config_argv(&path) {
            Ok(args) => match Cli::try_parse_from(args) {
                Ok(Cli { command: Some(c), .. }) => c,
                Ok(_) => return 2,
                Err(e) => return usage(e, out, err),
            },
            Err(e) => return failure("config", e, out, err),
        },
    };
    if let Err(e) = configure_threads() {
        return failure(name(&command), e, out, err);
    }
    let label = name(&command);
    match dispatch(command) {
        Ok(mut summary) => {
            summary.insert("command".into(), json!(label));
            summary.insert("status".into(), json!("ok"));
            let _ = writeln!(out, "{}", Value::Object(summary));
            0
        }
        Err(e) => failure(label, e, out, err),
    }
}

fn usage(e: clap::Error, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = write!(out, "{}", e.render());
            0
        }
        _ => {
            let _ = write!(err, "{}", e.render());
            2
        }
    }
}

fn failure(label: &str, e: MkError, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let code = e.exit_code();
    let _ = writeln!(err, "mk {label}: {e}");
    let _ = writeln!(out, "{}", json!({"command": label, "status": "error", "exit_code": code, "message": e.to_string()}));
    code
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("MK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| MkError::Validation(format!("MK_THREADS must be a positive integer, got `{v}`")))?;
    // a pool built earlier in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Turns a config object into `mk <command> --key value ...`.
fn config_argv(path: &Path) -> Result<Vec<OsString>> {
    let obj: Map<String, Value> = read_json(path)?;
    let command = obj
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| MkError::Validation("config needs a string \"command\"".into()))?
        .to_string();
    let mut args: Vec<OsString> = vec!["mk".into(), command.into()];
    for (k, v) in &obj {
        if k == "command" {
            continue;
        }
        let flag = format!("--{}", k.replace('_', "-"));
        let text = match v {
            Value::Null | Value::Bool(false) => continue,
            Value::Bool(true) => {
                args.push(flag.into());
                continue;
            }
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(MkError::Validation(format!("`{k}` must be a list of numbers"))),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
            Value::Object(_) => return Err(MkError::Validation(format!("`{k}` cannot be an object"))),
        };
        args.push(flag.into());
        args.push(text.into());
    }
    Ok(args)
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Transport(_) => "transport",
        Command::Wasserstein(_) => "wasserstein",
        Command::Ctransform(_) => "ctransform",
        Command::Map(_) => "map",
        Command::Residual(_) => "residual",
        Command::Isoperimetric(_) => "isoperimetric",
        Command::Curvature(_) => "curvature",
        Command::Csegment(_) => "csegment",
        Command::Maxprinciple(_) => "maxprinciple",
        Command::Semidiscrete(_) => "semidiscrete",
        Command::Loeper(_) => "loeper",
        Command::Screening(_) => "screening",
        Command::Welfare(_) => "welfare",
    }
}

fn inputs(c: &Command) -> Vec<&Path> {
    match c {
        Command::Transport(a) => vec![&a.mu, &a.nu],
        Command::Wasserstein(a) => vec![&a.mu, &a.nu],
        Command::Ctransform(a) => vec![&a.field, &a.onto],
        Command::Map(a) => vec![&a.solution],
        Command::Residual(a) => vec![&a.field, &a.f_plus, &a.f_minus],
        Command::Semidiscrete(a) => vec![&a.source, &a.targets],
        _ => vec![],
    }
    .into_iter()
    .map(PathBuf::as_path)
    .collect()
}

type Summary = Map<String, Value>;

fn summary(v: Value) -> Summary {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn dispatch(c: Command) -> Result<Summary> {
    for p in inputs(&c) {
        if !p.is_file() {
            return Err(MkError::Validation(format!("input {} does not exist", p.display())));
        }
    }
    match c {
        Command::Transport(a) => transport(a),
        Command::Wasserstein(a) => wasserstein(a),
        Command::Ctransform(a) => ctransform(a),
        Command::Map(a) => map(a),
        Command::Residual(a) => residual(a),
        Command::Isoperimetric(a) => isoperimetric(a),
        Command::Curvature(a) => curvature(a),
        Command::Csegment(a) => csegment(a),
        Command::Maxprinciple(a) => maxprinciple(a),
        Command::Semidiscrete(a) => semidiscrete(a),
        Command::Loeper(a) => loeper(a),
        Command::Screening(a) => screening(a),
        Command::Welfare(a) => welfare(a),
    }
}

fn cost_on(name: &str, chart: Option<Chart>) -> Result<CostFunction> {
    let c = CostFunction::new(CostKind::parse(name)?);
    match chart {
        Some(ch) => c.on_chart(ch),
        None => Ok(c),
    }
}

fn parse_point(s: &str, chart: Chart) -> Result<Point> {
    let coords = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| MkError::Validation(format!("bad coordinate list `{s}`"))))
        .collect::<Result<Vec<f64>>>()?;
    Point::new(coords, chart)
}

fn maybe_write<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    if let Some(p) = path {
        write_json(p, value)?;
    }
    Ok(())
}

fn transport(a: TransportArgs) -> Result<Summary> {
    let mu = read_discrete(&a.mu)?;
    let nu = read_discrete(&a.nu)?;
    let c = cost_on(&a.cost, Some(mu.chart()))?;
    let sol = solve_plan(&mu, &nu, &c)?;
    maybe_write(&a.out, &sol.to_json())?;
    if let Some(p) = &a.csv {
        std::fs::write(p, sol.plan_csv())?;
    }
    Ok(summary(json!({
        "primal_cost": sol.primal_cost,
        "dual_value": sol.dual_value,
        "gap": sol.gap,
        "plan_entries": sol.plan.len(),
        "slackness_defect": sol.slackness_defect(),
    })))
}

#[derive(Serialize, Deserialize)]
pub struct WassersteinOutput {
    pub p: f64,
    pub chart: String,
    pub d_p: f64,
}

fn wasserstein(a: WassersteinArgs) -> Result<Summary> {
    let mu = read_discrete(&a.mu)?;
    let nu = read_discrete(&a.nu)?;
    let d = wasserstein_p(&mu, &nu, a.p, mu.chart())?;
    maybe_write(&a.out, &WassersteinOutput { p: a.p, chart: mu.chart().name().into(), d_p: d })?;
    Ok(summary(json!({"d_p": d, "p": a.p})))
}

/// Atoms of a measure file, or cell centres of a grid file.
fn read_support(path: &Path) -> Result<Support> {
    if let Ok(j) = read_json::<DiscreteMeasureJson>(path) {
        return Ok(Support::Atoms(crate::measures::DiscreteMeasure::from_json(j)?.atoms().to_vec()));
    }
    if let Ok(j) = read_json::<GridMeasureJson>(path) {
        let g = crate::measures::GridMeasure::from_json(j)?;
        return Ok(Support::Grid(Lattice::of(&g), g.chart()));
    }
    Err(MkError::Validation(format!("{} is neither a measure nor a grid", path.display())))
}

fn ctransform(a: CtransformArgs) -> Result<Summary> {
    let u = read_potential(&a.field)?;
    let onto = read_support(&a.onto)?;
    let c = cost_on(&a.cost, Some(u.chart()))?;
    let dir = match a.direction.as_str() {
        "x-to-y" => Direction::XToY,
        "y-to-x" => Direction::YToX,
        d => return Err(MkError::Validation(format!("unknown direction `{d}`"))),
    };
    let t = c_transform(&u, &c, dir, &onto)?;
    let defect = c_convexity_defect(&u, &c, dir, &onto)?;
    maybe_write(&a.out, &t.to_json())?;
    let lo = t.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(summary(json!({"nodes": t.len(), "min": lo, "max": hi, "double_transform_defect": defect})))
}

fn map(a: MapArgs) -> Result<Summary> {
    let sol = TransportSolution::from_json(read_json::<TransportSolutionJson>(&a.solution)?)?;
    let table = extract_map_with(&sol, a.threshold);
    maybe_write(&a.out, &table)?;
    Ok(summary(json!({"rows": table.rows.len(), "split_rows": table.split_rows.len(), "is_monge": table.is_monge()})))
}

/// Residual on the potential's grid; masked nodes carry `null`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualOutput {
    pub chart: String,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub shape: Vec<usize>,
    pub values: Vec<Option<f64>>,
    pub mask: Vec<MaskReason>,
    pub stats: ResidualStats,
}

fn residual(a: ResidualArgs) -> Result<Summary> {
    let u = read_potential(&a.field)?;
    let fp = read_grid(&a.f_plus)?;
    let fm = read_grid(&a.f_minus)?;
    let c = cost_on(&a.cost, Some(u.chart()))?;
    let r = monge_ampere_residual(&u, &c, &fp, &fm)?;
    let values: Vec<Option<f64>> = r.values.iter().map(|v| v.is_finite().then_some(*v)).collect();
    if let Some(p) = &a.raster {
        io::write_scalar_raster(p, &r.lattice.shape, &values)?;
    }
    let out = ResidualOutput {
        chart: u.chart().name().into(),
        bounds: r.lattice.lo.iter().zip(&r.lattice.hi).map(|(l, h)| [*l, *h]).collect(),
        shape: r.lattice.shape.clone(),
        values,
        mask: r.mask,
        stats: r.stats.clone(),
    };
    maybe_write(&a.out, &out)?;
    Ok(summary(json!({
        "evaluated": r.stats.evaluated,
        "median_abs": r.stats.median_abs,
        "max_abs": r.stats.max_abs,
    })))
}

fn isoperimetric(a: IsoperimetricArgs) -> Result<Summary> {
    let shape = if a.shape == "disk" {
        disk_shape(a.resolution)?
    } else if let Some(r) = a.shape.strip_prefix("rectangle:") {
        let aspect: f64 = r.parse().map_err(|_| MkError::Validation(format!("bad aspect `{r}`")))?;
        if !(aspect > 0.0) {
            return Err(MkError::Validation("aspect must be positive".into()));
        }
        rectangle_shape(aspect, a.resolution)?
    } else {
        let p = Path::new(&a.shape);
        if !p.is_file() {
            return Err(MkError::Validation(format!("unknown shape `{}`", a.shape)));
        }
        read_grid(p)?
    };
    let opts = IsoperimetricOptions { coarse: a.coarse, fit_neighbours: a.neighbours, tolerance: a.tolerance };
    let rep = isoperimetric_check_with(&shape, &opts)?;
    maybe_write(&a.out, &rep)?;
    Ok(summary(json!({"lhs": rep.lhs, "flux": rep.flux, "rhs": rep.rhs, "ratio": rep.ratio, "chain_holds": rep.chain_holds})))
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Holds { .. } => "holds",
        Verdict::Violated { .. } => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn curvature(a: CurvatureArgs) -> Result<Summary> {
    let c = cost_on(&a.cost, None)?;
    let domain = Domain::default_for(&c, a.dim);
    let opts = CertifyOptions { samples: a.samples, margin: a.margin, seed: a.seed, ..CertifyOptions::default() };
    let rep = certify_conditions(&c, &domain, &opts)?;
    maybe_write(&a.out, &rep)?;
    let verdicts: Map<String, Value> = rep.verdicts.iter().map(|(k, v)| (k.clone(), json!(verdict_name(v)))).collect();
    Ok(summary(json!({
        "cost": rep.cost,
        "seed": rep.seed,
        "samples": rep.requested,
        "degenerate": rep.degenerate,
        "verdicts": verdicts,
        "min_orthogonal": rep.min_orthogonal,
    })))
}

fn segment_of(a: &SegmentArgs) -> Result<(CostFunction, CSegment)> {
    let c = cost_on(&a.cost, None)?;
    let x0 = parse_point(&a.x0, c.chart)?;
    let y0 = parse_point(&a.y0, c.chart)?;
    let y1 = parse_point(&a.y1, c.chart)?;
    let seg = trace_c_segment(&c, &x0, &y0, &y1, a.steps)?;
    Ok((c, seg))
}

fn csegment(a: SegmentArgs) -> Result<Summary> {
    let (_, seg) = segment_of(&a)?;
    maybe_write(&a.out, &seg)?;
    Ok(summary(json!({"points": seg.ys.len(), "max_residual": seg.max_residual()})))
}

#[derive(Serialize, Deserialize)]
pub struct MaxPrincipleOutput {
    pub seed: u64,
    pub samples: usize,
    pub segment: CSegment,
    pub report: MaxPrincipleReport,
}

fn maxprinciple(a: MaxPrincipleArgs) -> Result<Summary> {
    let (c, seg) = segment_of(&a.segment)?;
    let domain = Domain::default_for(&c, seg.x0.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let xs = (0..a.samples).map(|_| Point::new(domain.sample(&mut rng, false), c.chart)).collect::<Result<Vec<_>>>()?;
    let report = loeper_max_principle_check(&c, &seg, &xs);
    let out = MaxPrincipleOutput { seed: a.seed, samples: a.samples, segment: seg, report };
    maybe_write(&a.segment.out, &out)?;
    Ok(summary(json!({
        "seed": a.seed,
        "max_defect": out.report.max_defect,
        "convexity_defect": out.report.convexity_defect,
        "evaluated": out.report.evaluated,
        "skipped": out.report.skipped,
    })))
}

fn semidiscrete(a: SemidiscreteArgs) -> Result<Summary> {
    let g = read_grid(&a.source)?;
    let t = read_discrete(&a.targets)?;
    let c = cost_on(&a.cost, Some(g.chart()))?;
    let sol = solve_semidiscrete(&g, &t, &c, a.tol)?;
    maybe_write(&a.out, &sol)?;
    if let Some(p) = &a.raster {
        let palette = (0..t.len()).map(|i| format!("target {i}")).collect();
        io::write_label_raster(p, &sol.shape, &sol.labels, palette)?;
    }
    Ok(summary(json!({
        "targets": t.len(),
        "iterations": sol.iterations,
        "max_mass_error": sol.max_mass_error,
        "transport_cost": sol.transport_cost,
    })))
}

fn loeper(a: LoeperArgs) -> Result<Summary> {
    let geometry = Geometry::parse(&a.geometry)?;
    let rep = if a.scan {
        if geometry != Geometry::Hyperbolic {
            return Err(MkError::Validation("--scan applies to the hyperbolic geometry".into()));
        }
        loeper_scan(a.resolution)?.ok_or_else(|| MkError::Numerical("no scanned configuration split the middle cell".into()))?
    } else {
        let (r, s) = geometry.defaults();
        loeper_demo(geometry, a.radius.unwrap_or(r), a.spacing.unwrap_or(s), a.resolution)?
    };
    maybe_write(&a.out, &rep)?;
    if let (Some(p), Some(sol)) = (&a.raster, &rep.solution) {
        let palette = (0..3).map(|i| format!("target {i}")).collect();
        io::write_label_raster(p, &sol.shape, &sol.labels, palette)?;
    }
    let counts: Vec<usize> = rep.components.iter().map(|c| c.significant).collect();
    Ok(summary(json!({
        "geometry": a.geometry,
        "ball_radius": rep.ball_radius,
        "spacing": rep.spacing,
        "middle_components": rep.middle_components,
        "components": counts,
        "convex": rep.convex,
        "max_mass_error": rep.max_mass_error,
    })))
}

fn screening_problem(resolution: usize, dim: usize, kappa: f64) -> Result<ScreeningProblem> {
    let mut p = match dim {
        1 => ScreeningProblem::interval(resolution)?,
        2 => ScreeningProblem::rochet_chone(resolution)?,
        _ => return Err(MkError::Validation("screening runs in 1 or 2 dimensions".into())),
    };
    if kappa != 0.0 {
        p.cost = ProductCost::QuadraticPlusNorm { kappa };
        p.validate()?;
    }
    Ok(p)
}

const REGION_PALETTE: [&str; 3] = ["exclusion", "bunching", "full_rank"];

fn region_index(r: Region) -> usize {
    match r {
        Region::Exclusion => 0,
        Region::Bunching => 1,
        Region::FullRank => 2,
    }
}

fn screening(a: ScreeningArgs) -> Result<Summary> {
    let p = screening_problem(a.resolution, a.dim, a.kappa)?;
    let opts = SolverOptions { tol: a.tol, diagonals: !a.no_diagonals, kkt_samples: a.kkt_samples, seed: a.seed, ..SolverOptions::default() };
    let sol = solve_rochet_chone(&p, &opts)?;
    maybe_write(&a.out, &sol)?;
    if let Some(path) = &a.raster {
        let labels: Vec<Option<usize>> = sol.labels.iter().map(|r| Some(region_index(*r))).collect();
        io::write_label_raster(path, &sol.lattice.shape, &labels, REGION_PALETTE.iter().map(|s| s.to_string()).collect())?;
    }
    let excl = check_exclusion(&sol);
    Ok(summary(json!({
        "resolution": a.resolution,
        "seed": a.seed,
        "energy": sol.energy,
        "strata": sol.strata.as_array(),
        "iterations": sol.iterations,
        "exclusion": excl.positive,
        "kkt_violations": sol.kkt.as_ref().map(|k| k.violations),
    })))
}

fn parse_welfare(s: &str) -> Result<Welfare> {
    if s == "linear" {
        return Ok(Welfare::Linear);
    }
    if let Some(c) = s.strip_prefix("capped:") {
        let cap: f64 = c.parse().map_err(|_| MkError::Validation(format!("bad cap `{c}`")))?;
        return Ok(Welfare::Capped { cap });
    }
    Err(MkError::Validation(format!("unknown welfare `{s}`")))
}

fn welfare(a: WelfareArgs) -> Result<Summary> {
    let p = screening_problem(a.resolution, a.dim, a.kappa)?;
    let w = parse_welfare(&a.welfare)?;
    let opts = SolverOptions { tol: a.tol, kkt_samples: 0, seed: a.seed, ..SolverOptions::default() };
    let out = solve_welfare(&p, &w, a.lambda, &opts)?;
    maybe_write(&a.out, &out)?;
    Ok(summary(json!({
        "lambda": a.lambda,
        "seed": a.seed,
        "outcome": match out.status { WelfareStatus::Optimal => "optimal", WelfareStatus::Unbounded => "unbounded" },
        "objective": out.objective,
        "losses": out.losses,
        "strata": out.solution.as_ref().map(|s| s.strata.as_array()),
    })))
}

/// Reads back a screening solution written by `mk screening`.
pub fn read_screening(path: &Path) -> Result<ScreeningSolution> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_is_consistent() {
        <Cli as clap::CommandFactory>::command().debug_assert();
    }
}
