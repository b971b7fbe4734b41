use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use weaksync::experiment::{self, ExperimentConfig, Overrides};
use weaksync::generate::{generate_structured, StructuredGraphSpec};
use weaksync::{io, sim, Error};

const FIG4_CONFIG: &str = include_str!("../examples/fig4-like.json");

/// Exit codes: 0 pass, 1 verdict failure, 2 configuration error, 3 runtime error.
#[derive(Debug, Clone, Copy)]
enum Exit {
    Pass = 0,
    Fail = 1,
    Config = 2,
    Runtime = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "weaksync", version, about = "Weak synchronization analysis of multi-agent networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for graph generators and random initial states.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for emitted files.
    #[arg(long, global = true, env = "WEAKSYNC_OUT", default_value = "weaksync-out")]
    out_dir: PathBuf,

    /// Tail tolerance for convergence verdicts.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Final time (continuous) or step count (discrete).
    #[arg(long, global = true)]
    horizon: Option<f64>,

    /// Integration step (continuous time).
    #[arg(long, global = true)]
    step: Option<f64>,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bicomponents, beta coefficients and kernel basis of a graph file.
    Analyze { graph: PathBuf },
    /// Generate a graph with prescribed bicomponent sizes.
    Generate {
        spec: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Simulate a configured network and write its trajectory.
    Simulate { config: PathBuf },
    /// Simulate and check the synchronization verdicts.
    Verify { config: PathBuf },
    /// Bundled scenarios.
    Demo {
        #[arg(value_enum)]
        scenario: Demo,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Demo {
    Fig4,
}

fn exit_for(err: &Error) -> Exit {
    match err {
        Error::Config { .. }
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::Dimension { .. }
        | Error::UnknownModel(_) => Exit::Config,
        Error::Io { .. } | Error::Structural(_) | Error::Diverged { .. } | Error::Precondition(_) => {
            Exit::Runtime
        }
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        seed: cli.seed,
        epsilon: cli.epsilon,
        horizon: cli.horizon,
        step: cli.step,
    }
}

fn load_config(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides(cli).apply(&mut cfg);
    Ok(cfg)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_analyze(graph: &Path) -> Result<Exit, Error> {
    let g = io::load_graph(graph)?;
    print_json(&experiment::analyze(&g)?);
    Ok(Exit::Pass)
}

fn cmd_generate(cli: &Cli, spec_path: &Path, output: &Path) -> Result<Exit, Error> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::Io {
        path: spec_path.to_path_buf(),
        source: e,
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: spec_path.display().to_string(),
        message: e.to_string(),
    })?;
    let file_seed = value
        .as_object_mut()
        .and_then(|o| o.remove("seed"))
        .and_then(|s| s.as_u64());
    let spec: StructuredGraphSpec = serde_json::from_value(value).map_err(|e| Error::Config {
        path: spec_path.display().to_string(),
        message: e.to_string(),
    })?;
    let seed = cli.seed.or(file_seed).ok_or_else(|| Error::Config {
        path: "seed".into(),
        message: "pass --seed or put a `seed` field in the spec".into(),
    })?;
    let g = generate_structured(&spec, seed)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(output, io::graph_to_json(&g)).map_err(|e| Error::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    eprintln!("wrote {} ({} nodes)", output.display(), g.node_count());
    Ok(Exit::Pass)
}

fn cmd_simulate(cli: &Cli, config: &Path) -> Result<Exit, Error> {
    let cfg = load_config(cli, config)?;
    let prep = experiment::prepare(&cfg, &base_dir(config))?;
    let tr = sim::simulate(&prep.system, &prep.sim)?;
    fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io {
        path: cli.out_dir.clone(),
        source: e,
    })?;
    let path = match cli.format {
        Format::Csv => {
            let path = cli.out_dir.join("trajectory.csv");
            let f = fs::File::create(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            io::write_trajectory_csv(&tr, std::io::BufWriter::new(f))?;
            path
        }
        Format::Json => {
            let path = cli.out_dir.join("trajectory.json");
            let text = serde_json::to_string(&tr).expect("trajectory serializes");
            fs::write(&path, text).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            path
        }
    };
    eprintln!("wrote {} ({} samples)", path.display(), tr.len());
    Ok(Exit::Pass)
}

fn run_and_report(cfg: &ExperimentConfig, base: &Path, out_dir: &Path) -> Result<Exit, Error> {
    let outcome = experiment::run_experiment(cfg, base, out_dir)?;
    let sync = &outcome.report.sync;
    let summary = serde_json::json!({
        "passed": outcome.passed(),
        "k": outcome.report.analysis.k,
        "has_spanning_tree": outcome.report.analysis.has_spanning_tree,
        "network_stable": sync.network_stable.passed,
        "max_tail_zeta": sync.network_stable.tail_norms.iter().copied().fold(0.0, f64::max),
        "basic_bicomponents_synchronized": sync.groups.iter().map(|g| g.passed).collect::<Vec<_>>(),
        "global_output_sync": sync.global_output_sync.passed,
        "convex_limits_passed": sync.convex_limits.as_ref().map(|v| v.iter().all(|l| l.passed)),
        "max_convex_residual": sync.convex_limits.as_ref().map(|v| v.iter().map(|l| l.residual).fold(0.0, f64::max)),
        "superposition_deviation": outcome.report.superposition_deviation,
        "files": outcome.files,
    });
    print_json(&summary);
    Ok(if outcome.passed() { Exit::Pass } else { Exit::Fail })
}

fn run(cli: &Cli) -> Result<Exit, Error> {
    match &cli.command {
        Command::Analyze { graph } => cmd_analyze(graph),
        Command::Generate { spec, output } => cmd_generate(cli, spec, output),
        Command::Simulate { config } => cmd_simulate(cli, config),
        Command::Verify { config } => {
            let cfg = load_config(cli, config)?;
            run_and_report(&cfg, &base_dir(config), &cli.out_dir)
        }
        Command::Demo { scenario: Demo::Fig4 } => {
            let mut cfg = ExperimentConfig::from_json(FIG4_CONFIG)?;
            overrides(cli).apply(&mut cfg);
            run_and_report(&cfg, Path::new("."), &cli.out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_for(&err)
        }
    };
    ExitCode::from(code as u8)
}
