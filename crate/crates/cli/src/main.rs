//! Command-line driver for anisotropic Allen-Cahn optimal control experiments.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use aniso_ac::fem::io::write_atomic;
use aniso_ac::fem::{set_parallel, StructuredTriMesh};
use aniso_ac::scenarios::{
    delta_study, granularity_study, make_field, preset, run_scenario, wulff_csv, wulff_shape, AnisotropyConfig,
    AnisotropyKind, GranularityAxis, ScenarioConfig, ScenarioError, ShapeSpec, PRESETS,
};
use aniso_ac::state::defaults;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use manifest::{Artifact, RunManifest};

const THREADS_ENV: &str = "ANISO_AC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "aniso-ac", version, about = "Optimal control of anisotropic Allen-Cahn equations")]
struct Cli {
    /// Single-threaded, bitwise reproducible execution.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads (default: $ANISO_AC_THREADS, else all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// Output directory (default: the config's output_dir, else ./out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use the full resolution and horizon (n_div = 128, T = 1.625e-2, tau = 1.625e-4).
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Increase log verbosity (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a scenario and write controls, states, norms, costs and the report.
    Run {
        /// Scenario TOML file, or `preset:<name>` for a built-in scenario.
        config: String,
    },
    /// Uncontrolled terminal-state error against a reference shift.
    DeltaStudy {
        /// Scenario TOML file, or `preset:<name>`.
        config: String,
        /// Comma separated shifts.
        #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-4,1e-5,1e-6,1e-7,1e-8")]
        deltas: Vec<f64>,
        /// Shift of the reference solution.
        #[arg(long, default_value_t = 0.0)]
        reference_delta: f64,
    },
    /// Optimizer iteration counts across meshes or time steps.
    GranularityStudy {
        /// Scenario TOML file, or `preset:<name>`.
        config: String,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma separated divisions per axis or time steps.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Sample the Wulff shape of a named anisotropy.
    Wulff {
        #[arg(value_enum)]
        aniso: AnisoArg,
        /// Number of boundary directions.
        #[arg(long, default_value_t = 720)]
        n: usize,
        #[arg(long, default_value_t = defaults::ANISO_EPS)]
        eps_aniso: f64,
    },
    /// Write a phase-field snapshot of a shape.
    MakeField(ShapeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Mesh,
    Tau,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnisoArg {
    Isotropic,
    L1,
    Hexagon,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShapeKind {
    Circle,
    Square,
    Hexagon,
    Star,
    FullDomain,
}

#[derive(Debug, Args)]
struct ShapeArgs {
    #[arg(long, value_enum)]
    kind: ShapeKind,
    /// Center as `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 0.0])]
    center: Vec<f64>,
    /// Circle radius or hexagon circumradius.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    #[arg(long, default_value_t = 0.5)]
    half_width: f64,
    #[arg(long, default_value_t = 4)]
    petals: u32,
    #[arg(long, default_value_t = 0.35)]
    r_inner: f64,
    #[arg(long, default_value_t = 0.65)]
    r_outer: f64,
    #[arg(long, default_value_t = 0.0)]
    rotation: f64,
    #[arg(long, default_value_t = defaults::DESK_N_DIV)]
    n_div: usize,
    #[arg(long, default_value_t = defaults::EPS)]
    eps: f64,
    /// Also write a VTK file.
    #[arg(long)]
    vtk: bool,
}

impl ShapeArgs {
    fn shape(&self) -> ShapeSpec {
        let center = [self.center[0], self.center[1]];
        match self.kind {
            ShapeKind::Circle => ShapeSpec::Circle { center, radius: self.radius },
            ShapeKind::Square => ShapeSpec::Square { center, half_width: self.half_width },
            ShapeKind::Hexagon => ShapeSpec::Hexagon { center, radius: self.radius, rotation: self.rotation },
            ShapeKind::Star => ShapeSpec::Star {
                center,
                petals: self.petals,
                r_inner: self.r_inner,
                r_outer: self.r_outer,
                rotation: self.rotation,
            },
            ShapeKind::FullDomain => ShapeSpec::FullDomain,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Solver(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(_) | ScenarioError::Io(_) => Failure::Config(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_config(arg: &str, paper_scale: bool) -> Result<ScenarioConfig, Failure> {
    let cfg = match arg.strip_prefix("preset:") {
        Some(name) => preset(name)
            .ok_or_else(|| Failure::Config(format!("unknown preset {name:?}; available: {}", PRESETS.join(", "))))?,
        None => ScenarioConfig::load(Path::new(arg))?,
    };
    let cfg = if paper_scale { cfg.paper_scale() } else { cfg };
    cfg.validate()?;
    Ok(cfg)
}

fn threads_requested(cli: &Cli) -> Result<Option<usize>, Failure> {
    if cli.deterministic {
        return Ok(Some(1));
    }
    if let Some(k) = cli.threads {
        return Ok(Some(k.max(1)));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|k| Some(k.max(1)))
            .map_err(|_| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

struct Session {
    argv: Vec<String>,
    threads: usize,
    deterministic: bool,
    start: Instant,
}

impl Session {
    fn finish(&self, command: &str, dir: &Path, config: serde_json::Value, files: &[PathBuf]) -> Result<(), Failure> {
        let artifacts = files.iter().map(|p| Artifact::hash(p)).collect::<Result<Vec<_>, _>>()?;
        let manifest = RunManifest {
            tool: "aniso-ac",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv: self.argv.clone(),
            deterministic: self.deterministic,
            threads: self.threads,
            config,
            artifacts,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        let path = manifest.write(dir)?;
        info!("wrote {}", path.display());
        Ok(())
    }
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    write_atomic(&path, contents)?;
    files.push(path);
    Ok(())
}

fn config_json(cfg: &ScenarioConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn execute(cli: &Cli, session: &Session) -> Result<(), Failure> {
    let out_for = |cfg: Option<&ScenarioConfig>| -> PathBuf {
        cli.out.clone().or_else(|| cfg.map(|c| c.output_dir.clone())).unwrap_or_else(|| PathBuf::from("out"))
    };
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(config, cli.paper_scale)?;
            let dir = out_for(Some(&cfg));
            info!("running {} (n_div {}, {} steps) into {}", cfg.name, cfg.n_div, cfg.grid()?.len(), dir.display());
            let outcome = run_scenario(&cfg, &dir)?;
            let r = &outcome.report;
            info!(
                "j = {:.6e} = {:.6e} + {:.6e}; TR steps {}, mean CG {:.1}, max CG {}",
                outcome.cost.j,
                outcome.cost.j1,
                outcome.cost.j2,
                r.tr_steps(),
                r.mean_cg(),
                r.max_cg()
            );
            session.finish("run", &dir, config_json(&cfg), &outcome.artifacts)
        }
        Command::DeltaStudy { config, deltas, reference_delta } => {
            let cfg = load_config(config, cli.paper_scale)?;
            let dir = out_for(Some(&cfg));
            let study = delta_study(&cfg, deltas, *reference_delta)?;
            let mut files = Vec::new();
            write(&dir, "delta_study.csv", &study.to_csv(), &mut files)?;
            write(&dir, "delta_study_summary.txt", &study.summary(), &mut files)?;
            info!("L2 slope {:.4}, H1 slope {:.4}", study.slope_l2, study.slope_h1);
            session.finish("delta-study", &dir, config_json(&cfg), &files)
        }
        Command::GranularityStudy { config, axis, values } => {
            let cfg = load_config(config, cli.paper_scale)?;
            let dir = out_for(Some(&cfg));
            let axis = match axis {
                AxisArg::Mesh => GranularityAxis::Mesh,
                AxisArg::Tau => GranularityAxis::Tau,
            };
            let study = granularity_study(&cfg, axis, values);
            let mut files = Vec::new();
            write(&dir, "granularity_study.csv", &study.to_csv(), &mut files)?;
            session.finish("granularity-study", &dir, config_json(&cfg), &files)
        }
        Command::Wulff { aniso, n, eps_aniso } => {
            let kind = match aniso {
                AnisoArg::Isotropic => AnisotropyKind::Isotropic,
                AnisoArg::L1 => AnisotropyKind::L1,
                AnisoArg::Hexagon => AnisotropyKind::Hexagon,
            };
            let acfg = AnisotropyConfig { eps_aniso: *eps_aniso, delta: 0.0, ..AnisotropyConfig::named(kind) };
            let a = acfg.build()?;
            if *n < 3 {
                return Err(Failure::Config("--n must be at least 3".into()));
            }
            let dir = out_for(None);
            let mut files = Vec::new();
            write(&dir, "wulff.csv", &wulff_csv(&wulff_shape(&a, *n)), &mut files)?;
            let cfg = serde_json::json!({ "anisotropy": acfg, "n_angles": n });
            session.finish("wulff", &dir, cfg, &files)
        }
        Command::MakeField(args) => {
            let mesh = StructuredTriMesh::new(args.n_div).map_err(|e| Failure::Config(e.to_string()))?;
            let shape = args.shape();
            let field = make_field(&shape, &mesh, args.eps).map_err(|e| Failure::Config(e.to_string()))?;
            let dir = out_for(None);
            let mut files = Vec::new();
            let snapshot = aniso_ac::fem::io::format_snapshot(args.n_div, 0.0, &field);
            write(&dir, "field.txt", &snapshot, &mut files)?;
            if args.vtk {
                write(&dir, "field.vtk", &aniso_ac::fem::io::format_vtk(args.n_div, "field", &field), &mut files)?;
            }
            let cfg = serde_json::json!({ "shape": shape, "n_div": args.n_div, "eps": args.eps });
            session.finish("make-field", &dir, cfg, &files)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).target(env_logger::Target::Stderr).init();

    let result = threads_requested(&cli).and_then(|threads| {
        if let Some(k) = threads {
            rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Failure::Config(e.to_string()))?;
        }
        let threads = rayon::current_num_threads();
        set_parallel(!cli.deterministic && threads > 1);
        let session = Session { argv: std::env::args().collect(), threads, deterministic: cli.deterministic, start: Instant::now() };
        execute(&cli, &session)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            error!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            error!("{msg}");
            ExitCode::from(2)
        }
    }
}
