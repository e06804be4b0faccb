mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use modesub::cmsolver::{ClassifyOptions, DEFAULT_CLUSTER_TOL, DEFAULT_TRUNCATION};
use modesub::io::{
    read_json, read_matrix, read_snapshot_dir, read_vectors_csv, write_json, write_sphere_csv,
    write_traces_csv, ActionJson, ModesJson, TracesJson,
};
use modesub::pointgroup::builtin_names;
use modesub::sphwave::{linspace, sample_trace};
use modesub::subduction::{format_table_one, format_table_two, table_one, table_two};
use modesub::symaction::CLASSIFY_THRESHOLD;
use modesub::tracker::{DEFAULT_GAP_THRESHOLD, DEFAULT_POLE_THRESHOLD};
use modesub::{
    builtin_group, chain_subduce, classify_modes, detect_avoidances, find_crossings, parity_check,
    predict_avoidances, project, solve_cm, subduce, track, ImpedancePair, Keep, O3IrrepId, Parent,
    ParityFilter, PlaneOp, PointGroup, Polarization, TrackOptions,
};

#[derive(Parser)]
#[command(name = "modesub", version, about = "Point-group subduction for characteristic modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the O(3) -> O_h and O_h -> D_4h -> C_4v -> C_2v tables
    Tables(TablesArgs),
    /// Decompose one irrep restricted to a subgroup
    Subduce(SubduceArgs),
    /// Subduce along a chain of groups
    Chain(ChainArgs),
    /// Sample spherical-shell eigenvalue traces
    Sphere(SphereArgs),
    /// Label analytic traces and predict crossing avoidances
    Predict(PredictArgs),
    /// Solve X I = lambda R I for matrices read from files
    Solve(SolveArgs),
    /// Assign irreps to vectors or solved modes
    Classify(ClassifyArgs),
    /// Connect per-frequency mode sets into traces
    Track(TrackArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    One,
    Two,
    All,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long, value_enum, default_value = "all")]
    table: Which,
    /// Largest multipole order in the first table
    #[arg(long, default_value_t = 6)]
    tmax: u32,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SubduceArgs {
    /// `O3:t=5,s=TE` or `GROUP:IRREP` such as `Oh:T_1u`
    #[arg(long)]
    from: String,
    /// Target group
    #[arg(long)]
    to: String,
    /// Mirror parity to keep at IC_2z: odd | even | none
    #[arg(long, default_value = "none")]
    parity: Keep,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long)]
    from: String,
    /// Comma-separated groups, e.g. `Oh,D4h,C4v`
    #[arg(long)]
    path: String,
    #[arg(long, default_value = "none")]
    parity: Keep,
    /// Group at which the parity filter applies (default: the first group
    /// where IC_2z is a class on its own)
    #[arg(long)]
    filter_at: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct SphereArgs {
    #[arg(long, default_value_t = 3)]
    tmax: u32,
    /// Lower end of kR/pi
    #[arg(long, default_value_t = 0.05)]
    kmin: f64,
    /// Upper end of kR/pi
    #[arg(long, default_value_t = 2.0)]
    kmax: f64,
    #[arg(long, default_value_t = 400)]
    steps: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, default_value = "Oh")]
    group: String,
    #[arg(long, default_value_t = 3)]
    tmax: u32,
    #[arg(long, default_value_t = 0.05)]
    kmin: f64,
    #[arg(long, default_value_t = 2.0)]
    kmax: f64,
    #[arg(long, default_value_t = 800)]
    steps: usize,
    #[arg(long, default_value = "none")]
    parity: Keep,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG trace diagram
    #[arg(long)]
    emit_svg: Option<PathBuf>,
    /// Eigenvalue range shown in the SVG
    #[arg(long, default_value_t = 10.0)]
    svg_ylim: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Reactance matrix (CSV or binary grid)
    #[arg(long)]
    x: PathBuf,
    /// Resistance matrix (CSV or binary grid)
    #[arg(long)]
    r: PathBuf,
    /// Frequency tag copied to the output
    #[arg(long, default_value_t = 0.0)]
    frequency: f64,
    /// Relative cutoff for eigenvalues of R
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    truncation: f64,
    /// Label modes with this action
    #[arg(long)]
    action: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Coefficient vectors, one per column
    #[arg(long, conflicts_with = "modes", required_unless_present = "modes")]
    vectors: Option<PathBuf>,
    /// Solved modes; degenerate clusters are labeled jointly
    #[arg(long)]
    modes: Option<PathBuf>,
    #[arg(long)]
    action: PathBuf,
    /// Report the IC_2z mirror parity of every vector
    #[arg(long)]
    parity: bool,
    #[arg(long, default_value_t = CLASSIFY_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
    cluster_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrackArgs {
    /// Directory of modes.json snapshots
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    enforce_vnw: bool,
    #[arg(long, default_value_t = DEFAULT_GAP_THRESHOLD)]
    gap_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_POLE_THRESHOLD)]
    pole_threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one CSV row per (trace, frequency)
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum Failure {
    Usage { command: &'static str, reason: String },
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn usage(command: &'static str, reason: impl Into<String>) -> Failure {
    Failure::Usage {
        command,
        reason: reason.into(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    match out {
        Some(p) => Ok(write_json(p, value)?),
        None => {
            let mut s = serde_json::to_string_pretty(value)?;
            s.push('\n');
            emit(None, &s)
        }
    }
}

fn group(command: &'static str, name: &str) -> Result<PointGroup, Failure> {
    builtin_group(name).map_err(|_| {
        usage(
            command,
            format!("unknown group `{name}` (known: {})", builtin_names().join(", ")),
        )
    })
}

fn parse_polarization(s: &str) -> Option<Polarization> {
    match s.to_ascii_uppercase().as_str() {
        "TE" | "1" => Some(Polarization::TE),
        "TM" | "2" => Some(Polarization::TM),
        _ => None,
    }
}

fn parse_o3(spec: &str) -> Option<O3IrrepId> {
    let (mut t, mut s) = (None, None);
    for part in spec.split(',') {
        let (k, v) = part.split_once('=')?;
        match k.trim() {
            "t" => t = v.trim().parse::<u32>().ok(),
            "s" => s = parse_polarization(v.trim()),
            _ => return None,
        }
    }
    O3IrrepId::try_new(t?, s?)
}

enum ParentSpec {
    O3(O3IrrepId),
    Finite(PointGroup, String),
}

impl ParentSpec {
    fn parse(command: &'static str, spec: &str) -> Result<Self, Failure> {
        let bad = || usage(command, format!("cannot read `--from {spec}` (expected O3:t=5,s=TE or Oh:T_1u)"));
        let (head, rest) = spec.split_once(':').ok_or_else(bad)?;
        if head.eq_ignore_ascii_case("O3") {
            return parse_o3(rest).map(ParentSpec::O3).ok_or_else(bad);
        }
        let g = group(command, head)?;
        if g.irrep_index(rest).is_err() {
            return Err(usage(command, format!("{} has no irrep `{rest}`", g.name())));
        }
        Ok(ParentSpec::Finite(g, rest.to_string()))
    }

    fn parent(&self) -> Parent<'_> {
        match self {
            ParentSpec::O3(id) => Parent::O3(*id),
            ParentSpec::Finite(g, name) => Parent::irrep(g, name).expect("checked on parse"),
        }
    }
}

fn run_tables(a: &TablesArgs) -> Result<(), Failure> {
    if a.tmax == 0 {
        return Err(usage("tables", "--tmax must be at least 1"));
    }
    let one = matches!(a.table, Which::One | Which::All);
    let two = matches!(a.table, Which::Two | Which::All);
    let t1 = if one { Some(table_one(a.tmax).map_err(anyhow::Error::from)?) } else { None };
    let t2 = if two { Some(table_two().map_err(anyhow::Error::from)?) } else { None };
    match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                t: u32,
                s: String,
                dimension: usize,
                irreps: String,
                result: modesub::subduction::SubductionJson,
            }
            #[derive(Serialize)]
            struct Tables {
                #[serde(skip_serializing_if = "Option::is_none")]
                table_one: Option<Vec<Row>>,
                #[serde(skip_serializing_if = "Option::is_none")]
                table_two: Option<Vec<modesub::subduction::TableTwoRow>>,
            }
            let table_one = t1.map(|rows| {
                rows.iter()
                    .map(|r| Row {
                        t: r.id.t,
                        s: r.id.s.to_string(),
                        dimension: r.dimension,
                        irreps: r.result.table_cell(),
                        result: r.result.to_json(),
                    })
                    .collect()
            });
            emit_json(None, &Tables { table_one, table_two: t2 })?;
        }
        _ => {
            let mut text = String::new();
            if let Some(rows) = &t1 {
                text.push_str(&format_table_one(rows));
            }
            if let Some(rows) = &t2 {
                if !text.is_empty() {
                    text.push('\n');
                }
                text.push_str(&format_table_two(rows));
            }
            emit(None, &text)?;
        }
    }
    Ok(())
}

fn run_subduce(a: &SubduceArgs) -> Result<(), Failure> {
    let spec = ParentSpec::parse("subduce", &a.from)?;
    let child = group("subduce", &a.to)?;
    let result = subduce(&spec.parent(), &child, &ParityFilter::new(a.parity)).map_err(anyhow::Error::from)?;
    match a.format {
        Format::Json => emit_json(None, &result.to_json())?,
        _ => emit(None, &format!("{result}\n"))?,
    }
    Ok(())
}

fn run_chain(a: &ChainArgs) -> Result<(), Failure> {
    let spec = ParentSpec::parse("chain", &a.from)?;
    let groups = a
        .path
        .split(',')
        .map(|n| group("chain", n.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if groups.is_empty() {
        return Err(usage("chain", "--path needs at least one group"));
    }
    let filter = ParityFilter::new(a.parity);
    let stage = if !filter.is_active() {
        None
    } else if let Some(name) = &a.filter_at {
        let g = group("chain", name)?;
        Some(
            groups
                .iter()
                .position(|x| x.name() == g.name())
                .ok_or_else(|| usage("chain", format!("--filter-at {name} is not on the path")))?,
        )
    } else {
        let pos = groups.iter().position(|g| {
            g.sigma_h_index()
                .is_some_and(|e| g.classes()[g.class_of(e)].size == 1)
        });
        Some(pos.ok_or_else(|| {
            usage("chain", "no group on the path has IC_2z as a class of its own; pass --filter-at")
        })?)
    };
    let refs: Vec<&PointGroup> = groups.iter().collect();
    let stages = chain_subduce(&spec.parent(), &refs, &filter, stage).map_err(anyhow::Error::from)?;
    match a.format {
        Format::Json => {
            let v: Vec<_> = stages.iter().map(|s| s.to_json()).collect();
            emit_json(None, &v)?;
        }
        _ => {
            let text: String = stages
                .iter()
                .map(|s| format!("{}: {}\n", s.child_group, s))
                .collect();
            emit(None, &text)?;
        }
    }
    Ok(())
}

fn check_range(command: &'static str, kmin: f64, kmax: f64, steps: usize) -> Result<(), Failure> {
    if !(kmin > 0.0 && kmax >= kmin) {
        return Err(usage(command, format!("need 0 < --kmin <= --kmax (got {kmin}, {kmax})")));
    }
    if steps < 1 {
        return Err(usage(command, "--steps must be positive"));
    }
    Ok(())
}

fn run_sphere(a: &SphereArgs) -> Result<(), Failure> {
    check_range("sphere", a.kmin, a.kmax, a.steps)?;
    if a.tmax == 0 || a.tmax > modesub::sphwave::MAX_ORDER {
        return Err(usage("sphere", format!("--tmax must be in 1..={}", modesub::sphwave::MAX_ORDER)));
    }
    let grid = linspace(a.kmin, a.kmax, a.steps);
    let rows = (1..=a.tmax)
        .flat_map(|t| [O3IrrepId::te(t), O3IrrepId::tm(t)])
        .map(|id| sample_trace(id, &grid).map(|(s, p)| (id, s, p)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(anyhow::Error::from)?;
    match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Trace {
                t: u32,
                s: String,
                poles_kr_over_pi: Vec<f64>,
                samples: Vec<modesub::sphwave::TraceSample>,
            }
            let v: Vec<Trace> = rows
                .into_iter()
                .map(|(id, samples, poles)| Trace {
                    t: id.t,
                    s: id.s.to_string(),
                    poles_kr_over_pi: poles,
                    samples,
                })
                .collect();
            emit_json(a.out.as_deref(), &v)?;
        }
        _ => {
            let rows: Vec<_> = rows.into_iter().map(|(id, s, _)| (id, s)).collect();
            let mut buf = Vec::new();
            write_sphere_csv(&mut buf, &rows).map_err(anyhow::Error::from)?;
            emit(a.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))?;
        }
    }
    Ok(())
}

fn run_predict(a: &PredictArgs) -> Result<(), Failure> {
    check_range("predict", a.kmin, a.kmax, a.steps)?;
    if a.steps < 2 || a.kmax <= a.kmin {
        return Err(usage("predict", "need --kmax > --kmin and at least 2 --steps"));
    }
    if a.svg_ylim <= 0.0 {
        return Err(usage("predict", "--svg-ylim must be positive"));
    }
    let g = group("predict", &a.group)?;
    let filter = ParityFilter::new(a.parity);
    let diagram = modesub::build_diagram(a.tmax, a.kmin, a.kmax, a.steps, &g, &filter)
        .map_err(|e| match e {
            modesub::tracediagram::DiagramError::Invalid(r) => usage("predict", r),
            other => Failure::Data(other.into()),
        })?;
    let crossings = find_crossings(&diagram);
    let avoidances = predict_avoidances(&crossings);
    emit_json(a.out.as_deref(), &diagram.to_json(&crossings, &avoidances))?;
    if let Some(path) = &a.emit_svg {
        let svg = svg::render(&diagram, &avoidances, a.svg_ylim);
        fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn load_action(path: &Path) -> anyhow::Result<modesub::GroupAction> {
    let spec: ActionJson = read_json(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(spec.to_action()?)
}

fn run_solve(a: &SolveArgs) -> Result<(), Failure> {
    if a.truncation < 0.0 {
        return Err(usage("solve", "--truncation must be non-negative"));
    }
    let x = read_matrix(&a.x).map_err(anyhow::Error::from)?;
    let r = read_matrix(&a.r).map_err(anyhow::Error::from)?;
    let action = a.action.as_deref().map(load_action).transpose()?;
    let pair = ImpedancePair::new(x, r, a.frequency).map_err(anyhow::Error::from)?;
    let modes = solve_cm(&pair, a.truncation).map_err(anyhow::Error::from)?;
    let labels = match &action {
        Some(act) => Some(
            classify_modes(&modes, act, &ClassifyOptions::default())
                .map_err(anyhow::Error::from)?
                .into_iter()
                .map(|l| l.irrep)
                .collect(),
        ),
        None => None,
    };
    emit_json(a.out.as_deref(), &ModesJson::from_modes(&modes, labels))?;
    Ok(())
}

#[derive(Serialize)]
struct WeightJson {
    irrep: String,
    weight: f64,
}

#[derive(Serialize)]
struct VectorReport {
    index: usize,
    dominant: String,
    /// Set when the dominant weight reaches the threshold.
    label: Option<String>,
    weights: Vec<WeightJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parity: Option<f64>,
}

fn run_classify(a: &ClassifyArgs) -> Result<(), Failure> {
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(usage("classify", "--threshold must be in (0, 1]"));
    }
    if a.cluster_tol < 0.0 {
        return Err(usage("classify", "--cluster-tol must be non-negative"));
    }
    let action = load_action(&a.action)?;
    let plane = PlaneOp::default();
    let parity = |v: &nalgebra::DVector<f64>| -> anyhow::Result<Option<f64>> {
        if !a.parity {
            return Ok(None);
        }
        Ok(Some(parity_check(&v.normalize(), &action, &plane, None)?))
    };
    let mut reports = Vec::new();
    if let Some(path) = &a.modes {
        let modes = read_json::<ModesJson>(path)
            .with_context(|| format!("reading {}", path.display()))?
            .to_modes()
            .map_err(anyhow::Error::from)?;
        let opts = ClassifyOptions {
            cluster_tol: a.cluster_tol,
            threshold: a.threshold,
        };
        let labels = classify_modes(&modes, &action, &opts).map_err(anyhow::Error::from)?;
        for (i, l) in labels.into_iter().enumerate() {
            let v = modes.vectors.column(i).into_owned();
            reports.push(VectorReport {
                index: i,
                label: l.pure.then(|| l.irrep.clone()),
                dominant: l.irrep,
                weights: l
                    .cluster_weights
                    .into_iter()
                    .map(|(irrep, weight)| WeightJson { irrep, weight })
                    .collect(),
                cluster: Some(l.cluster),
                parity: parity(&v)?,
            });
        }
    } else if let Some(path) = &a.vectors {
        let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
        let vectors = read_vectors_csv(file).map_err(anyhow::Error::from)?;
        for (i, v) in vectors.iter().enumerate() {
            let r = project(v, &action).map_err(anyhow::Error::from)?;
            reports.push(VectorReport {
                index: i,
                label: r.classify(a.threshold).map(str::to_string),
                dominant: r.dominant.clone(),
                weights: r
                    .weights
                    .iter()
                    .map(|(irrep, weight)| WeightJson {
                        irrep: irrep.clone(),
                        weight: *weight,
                    })
                    .collect(),
                cluster: None,
                parity: parity(v)?,
            });
        }
    }
    emit_json(a.out.as_deref(), &reports)?;
    Ok(())
}

fn run_track(a: &TrackArgs) -> Result<(), Failure> {
    if a.gap_threshold < 0.0 || a.pole_threshold <= 0.0 {
        return Err(usage("track", "thresholds must be positive"));
    }
    if !a.snapshots.is_dir() {
        return Err(usage("track", format!("{} is not a directory", a.snapshots.display())));
    }
    let snaps = read_snapshot_dir(&a.snapshots).map_err(anyhow::Error::from)?;
    if snaps.is_empty() {
        return Err(Failure::Data(anyhow!("no *.json snapshots in {}", a.snapshots.display())));
    }
    let opts = TrackOptions {
        enforce_vnw: a.enforce_vnw,
        split_poles: true,
        pole_threshold: a.pole_threshold,
    };
    let traces = track(&snaps, &opts).map_err(anyhow::Error::from)?;
    let avoidances = detect_avoidances(&traces, a.gap_threshold);
    if let Some(path) = &a.csv {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_traces_csv(file, &traces).map_err(anyhow::Error::from)?;
    }
    emit_json(
        a.out.as_deref(),
        &TracesJson {
            enforce_vnw: a.enforce_vnw,
            gap_threshold: a.gap_threshold,
            traces,
            avoidances,
        },
    )?;
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MODESUB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow!("MODESUB_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Tables(a) => run_tables(a),
        Command::Subduce(a) => run_subduce(a),
        Command::Chain(a) => run_chain(a),
        Command::Sphere(a) => run_sphere(a),
        Command::Predict(a) => run_predict(a),
        Command::Solve(a) => run_solve(a),
        Command::Classify(a) => run_classify(a),
        Command::Track(a) => run_track(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage { command, reason }) => {
            eprintln!("error: {reason}");
            let mut cmd = Cli::command();
            cmd.build();
            if let Some(sub) = cmd.find_subcommand_mut(command) {
                eprintln!("{}", sub.render_usage());
            }
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
