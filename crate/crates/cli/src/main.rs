use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use monodyn::dynamics::{classify_global, detect_period, search_fixed_point, simulate, OrbitStatus};
use monodyn::fixed_points::{fixed_point_report, is_tstable_fixed, map_critical_graph, meet, omega_limit};
use monodyn::homogeneous::Outcome;
use monodyn::io::{self, to_json};
use monodyn::map_model::MapSpec;
use monodyn::nonneg_matrix::{critical_graph, decompose, digraph, normal_form};
use monodyn::suites::run_suite;
use monodyn::{AnalysisConfig, Error};

#[derive(Parser)]
#[command(name = "monodyn", version, about = "Fixed points, critical graphs and periodic orbits of convex monotone maps")]
struct Cli {
    /// JSON analysis configuration; missing fields take their defaults.
    #[arg(long, env = "MONODYN_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a nonnegative matrix.
    Matrix { path: PathBuf, analysis: MatrixCmd },
    /// Analyze a convex monotone map.
    Map {
        path: PathBuf,
        analysis: MapCmd,
        /// Start vector, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        /// Number of steps.
        #[arg(long)]
        k: Option<usize>,
        /// Point (a fixed point, or the first argument of meet).
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        /// Second argument of meet.
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        pmax: Option<usize>,
    },
    /// Run a seeded property suite.
    Suite {
        name: String,
        #[arg(long, default_value_t = 100)]
        count: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixCmd {
    Stable,
    NormalForm,
    Critical,
    Cyclicity,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapCmd {
    Simulate,
    FixedPoint,
    CriticalGraph,
    Certify,
    Meet,
    Period,
    Global,
}

enum Failure {
    Analysis(Error),
    Input(String),
    Inconclusive(String),
    Suite(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Analysis(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Inconclusive(_) => 4,
            Failure::Suite(_) => 1,
            Failure::Analysis(e) => match e {
                Error::Schema(_) | Error::InvalidInput(_) | Error::DimensionMismatch { .. } => 2,
                Error::NotConverged { .. } | Error::NoPeriod { .. } => 4,
                Error::Internal(_) => 1,
                _ => 3,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Analysis(e) => e.to_string(),
            Failure::Input(m) | Failure::Inconclusive(m) | Failure::Suite(m) => m.clone(),
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// Files produced by a command. The first one matching `--format` is printed.
struct Output {
    files: Vec<(String, Format, String)>,
    /// Set when the result is valid but inconclusive.
    inconclusive: Option<String>,
}

impl Output {
    fn json(name: &str, body: String) -> Self {
        Output { files: vec![(format!("{name}.json"), Format::Json, body)], inconclusive: None }
    }

    fn with(mut self, file: String, format: Format, body: String) -> Self {
        self.files.push((file, format, body));
        self
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("monodyn: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Run<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let output = match &cli.command {
        Command::Matrix { path, analysis } => matrix_command(path, *analysis, &cfg)?,
        Command::Map { path, analysis, start, k, x, y, pmax } => {
            if let Some(p) = pmax {
                cfg.caps.pmax = *p;
            }
            cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
            let args = MapArgs { start: vector(start)?, k: *k, x: vector(x)?, y: vector(y)? };
            map_command(path, *analysis, &args, &cfg)?
        }
        Command::Suite { name, count } => return suite_command(name, *count, cli.out.as_deref(), &cfg),
    };
    emit(&output, cli.format, cli.out.as_deref())?;
    match output.inconclusive {
        Some(reason) => Err(Failure::Inconclusive(reason)),
        None => Ok(()),
    }
}

fn load_config(path: Option<&Path>) -> Run<AnalysisConfig> {
    let cfg = match path {
        None => AnalysisConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Input(format!("config: {e}")))?
        }
    };
    cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(cfg)
}

fn read(path: &Path) -> Run<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn vector(arg: &Option<String>) -> Run<Option<Vec<f64>>> {
    arg.as_deref().map(io::parse_vector).transpose().map_err(Failure::from)
}

fn emit(output: &Output, format: Format, out: Option<&Path>) -> Run<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
        for (name, _, body) in &output.files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        }
    }
    match output.files.iter().find(|(_, f, _)| *f == format) {
        Some((_, _, body)) => {
            print!("{body}");
            Ok(())
        }
        None => Err(Failure::Input("this analysis has no output in the requested format".into())),
    }
}

fn matrix_command(path: &Path, cmd: MatrixCmd, cfg: &AnalysisConfig) -> Run<Output> {
    let p = io::parse_matrix(&read(path)?)?;
    Ok(match cmd {
        MatrixCmd::Stable => {
            let dec = decompose(&p, cfg)?;
            let report = io::StableReport {
                stable: dec.is_stable(cfg.tol.eps_rho),
                spectral_radius: dec.spectral_radius(),
                critical_classes: dec.critical_classes().iter().map(|c| c.iter().map(|i| i + 1).collect()).collect(),
            };
            Output::json("stable", to_json(&report))
        }
        MatrixCmd::NormalForm => {
            let nf = normal_form(&p, cfg)?;
            let labels = nf.labels(p.n());
            let dot = io::dot(&digraph(&p, cfg.tol.arc), &nf.c, Some(&labels));
            Output::json("normal-form", to_json(&io::NormalFormJson::from(&nf))).with(
                "normal-form.dot".into(),
                Format::Dot,
                dot,
            )
        }
        MatrixCmd::Critical => {
            let (g, nodes) = critical_graph(&p, cfg)?;
            let report = io::GraphReport::new(&nodes, &g, g.cyclicity(), None);
            let dot = io::dot(&g, &nodes, None);
            Output::json("critical", to_json(&report)).with("critical.dot".into(), Format::Dot, dot)
        }
        MatrixCmd::Cyclicity => {
            let (g, _) = critical_graph(&p, cfg)?;
            Output::json("cyclicity", to_json(&io::CyclicityReport { cyclicity: g.cyclicity() }))
        }
    })
}

struct MapArgs {
    start: Option<Vec<f64>>,
    k: Option<usize>,
    x: Option<Vec<f64>>,
    y: Option<Vec<f64>>,
}

fn sized(v: &Option<Vec<f64>>, n: usize, name: &str) -> Run<Option<Vec<f64>>> {
    match v {
        Some(v) if v.len() != n => Err(Failure::Input(format!("--{name} needs {n} entries, got {}", v.len()))),
        _ => Ok(v.clone()),
    }
}

/// The point given with `--x`, else the omega limit of `--start`, else a
/// fixed point reached from the origin.
fn fixed_point(f: &MapSpec, args: &MapArgs, cfg: &AnalysisConfig) -> Run<Vec<f64>> {
    let n = f.n();
    if let Some(x) = sized(&args.x, n, "x")? {
        return Ok(x);
    }
    if let Some(z) = sized(&args.start, n, "start")? {
        return Ok(omega_limit(f, &z, cfg)?);
    }
    search_fixed_point(f, cfg).ok_or_else(|| Failure::Inconclusive("no fixed point found".into()))
}

fn map_command(path: &Path, cmd: MapCmd, args: &MapArgs, cfg: &AnalysisConfig) -> Run<Output> {
    let f = io::parse_map(&read(path)?)?;
    let n = f.n();
    let steps = args.k.unwrap_or(cfg.caps.iterations);
    let start = sized(&args.start, n, "start")?.unwrap_or_else(|| vec![0.0; n]);
    Ok(match cmd {
        MapCmd::Simulate => {
            let orbit = simulate(&f, &start, steps, cfg);
            let mut out = Output::json("simulate", to_json(&io::OrbitJson::from(&orbit))).with(
                "trajectory.csv".into(),
                Format::Csv,
                io::trajectory_csv(&orbit.states),
            );
            if orbit.status == OrbitStatus::Capped {
                out.inconclusive = Some(format!("no convergence or recurrence within {steps} steps"));
            }
            out
        }
        MapCmd::FixedPoint => {
            let v = fixed_point(&f, args, cfg)?;
            let report = fixed_point_report(&f, &v, cfg)?;
            let mut out = Output::json("fixed-point", to_json(&io::FixedPointJson::from(&report)));
            if let Some(g) = &report.critical_graph {
                out = out.with("critical-graph.dot".into(), Format::Dot, io::dot(g, &report.critical_nodes, None));
            }
            if report.tstable == Outcome::NecessaryOnly {
                out.inconclusive = Some("t-stability only partially verified".into());
            }
            out
        }
        MapCmd::CriticalGraph => {
            let v = fixed_point(&f, args, cfg)?;
            let g = map_critical_graph(&f, &v, cfg)?;
            let report = io::GraphReport::new(&g.nodes, &g.graph, g.cyclicity, Some(&g.verification));
            let mut out = Output::json("critical-graph", to_json(&report)).with(
                "critical-graph.dot".into(),
                Format::Dot,
                io::dot(&g.graph, &g.nodes, None),
            );
            if !g.verification.is_exhaustive() {
                out.inconclusive = Some("selection enumeration capped".into());
            }
            out
        }
        MapCmd::Certify => {
            let v = sized(&args.x, n, "x")?.unwrap_or_else(|| vec![0.0; n]);
            let cert = is_tstable_fixed(&f, &v, cfg)?;
            let mut out = Output::json("certify", to_json(&io::CertifyReport::from(&cert)));
            if cert.outcome == Outcome::NecessaryOnly {
                out.inconclusive = Some(cert.detail.unwrap_or_else(|| "certificate incomplete".into()));
            }
            out
        }
        MapCmd::Meet => {
            let (Some(x), Some(y)) = (sized(&args.x, n, "x")?, sized(&args.y, n, "y")?) else {
                return Err(Failure::Input("meet needs --x and --y".into()));
            };
            Output::json("meet", to_json(&io::MeetReport { meet: meet(&f, &x, &y, cfg)? }))
        }
        MapCmd::Period => {
            let orbit = simulate(&f, &start, steps, cfg);
            if orbit.status == OrbitStatus::Diverged {
                return Err(Failure::Analysis(Error::Divergence { step: orbit.states.len() - 1 }));
            }
            let x = sized(&args.x, n, "x")?;
            let report = detect_period(&f, &orbit.states, x.as_deref(), cfg)?;
            Output::json("period", to_json(&io::PeriodJson::from(&report)))
        }
        MapCmd::Global => {
            let report = classify_global(&f, cfg);
            let mut out = Output::json("global", to_json(&io::GlobalJson::from(&report)));
            if report.outcome == Outcome::NecessaryOnly {
                out.inconclusive = Some(report.conclusion.clone());
            }
            out
        }
    })
}

fn suite_command(name: &str, count: u64, out: Option<&Path>, cfg: &AnalysisConfig) -> Run<()> {
    let summary = run_suite(name, cfg.seed, count, cfg)
        .ok_or_else(|| Failure::Input(format!("unknown suite {name:?}")))?;
    println!("suite {}: {} passed, {} failed", summary.suite, summary.passed, summary.failed);
    for (key, value) in &summary.counters {
        println!("  {key}: {value}");
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
        fs::write(dir.join(format!("suite-{name}.json")), to_json(&summary))
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    if summary.ok() {
        return Ok(());
    }
    let dir = out.map(|d| d.join("failures")).unwrap_or_else(|| PathBuf::from("monodyn-failures"));
    fs::create_dir_all(&dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    for failure in &summary.failures {
        let path = dir.join(format!("{name}-{}.json", failure.index));
        fs::write(&path, to_json(&failure.fixture)).map_err(|e| Failure::Input(e.to_string()))?;
        println!("  failure {}: {} ({})", failure.index, failure.reason, path.display());
    }
    Err(Failure::Suite(format!("{} of {} instances failed", summary.failed, summary.count)))
}
