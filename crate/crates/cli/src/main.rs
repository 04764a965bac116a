use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photonshift::model::KappaConvention;
use photonshift::presets;
use photonshift::report::{self, RunError, RunOutput};
use photonshift::scenario::{RawScenario, Scenario, ScenarioError};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "photonshift",
    version,
    about = "Single-photon frequency conversion in a doubly resonant χ(2) cavity"
)]
struct Cli {
    /// Shipped device preset (see `presets list`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the scenario.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Relative integrator tolerance.
    #[arg(long, global = true, value_name = "REAL")]
    tol: Option<f64>,
    /// Worker threads for sweeps and overlap integrals.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, global = true, value_name = "paper|energy")]
    kappa_convention: Option<KappaConvention>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the amplitude equations under the configured drive.
    Simulate,
    /// Efficiency landscape over pump power and overcoupling.
    Sweep,
    /// Drive that emits the configured target wavepacket.
    ShapePulse,
    /// Absorb the time-reversed shaped photon through a discretized waveguide.
    Store,
    /// g₂ from two imported mode-field files.
    Overlap,
    /// Shipped device presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: format!("config error: {e}"),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Input(m) => Failure {
                code: EXIT_CONFIG,
                message: format!("input error: {m}"),
            },
            RunError::Numerical(m) => Failure {
                code: EXIT_NUMERICAL,
                message: format!("numerical failure: {m}"),
            },
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

fn load(cli: &Cli) -> Result<(Scenario, PathBuf), Failure> {
    let (mut raw, base) = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("config error: {}: {e}", path.display()),
            })?;
            let raw = RawScenario::from_toml(&text).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("config error: {}: {e}", path.display()),
            })?;
            (
                raw,
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            )
        }
        None => (RawScenario::default(), PathBuf::from(".")),
    };
    if let Some(name) = &cli.preset {
        if raw.system.is_some() {
            return Err(ScenarioError::Invalid {
                key: "preset".into(),
                message: "--preset conflicts with the inline [system] of the config".into(),
            }
            .into());
        }
        raw.preset = Some(name.clone());
    }
    if cli.tol.is_some() {
        raw.tolerance = cli.tol;
    }
    if cli.kappa_convention.is_some() {
        raw.kappa_convention = cli.kappa_convention;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| raw.output.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((Scenario::resolve(&raw, &base)?, out))
}

/// Writes each file to a temporary sibling and renames it into place, so an
/// interrupted run never leaves a truncated file behind.
fn write_outputs(dir: &Path, output: &RunOutput) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    for (name, contents) in &output.files {
        let target = dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(dir, e))?;
        tmp.write_all(contents.as_bytes())
            .map_err(|e| io_failure(&target, e))?;
        tmp.as_file()
            .sync_all()
            .map_err(|e| io_failure(&target, e))?;
        tmp.persist(&target)
            .map_err(|e| io_failure(&target, e.error))?;
        log::info!("wrote {}", target.display());
    }
    Ok(())
}

fn presets_command(action: &PresetAction, convention: KappaConvention) -> Result<(), Failure> {
    match action {
        PresetAction::List => {
            for p in presets::all() {
                println!(
                    "{}\tv{}\t{}\t{}",
                    p.name,
                    p.version,
                    p.hash(),
                    p.description
                );
            }
        }
        PresetAction::Show { name } => {
            let p = presets::by_name(name).ok_or_else(|| Failure {
                code: EXIT_CONFIG,
                message: format!("config error: unknown preset `{name}`"),
            })?;
            print!("{}", p.describe());
            println!("hash = {}", p.hash());
            let sys = p.system(convention, p.anchor.delta).map_err(|e| Failure {
                code: EXIT_NUMERICAL,
                message: e.to_string(),
            })?;
            println!("[derived at anchor delta, {convention} convention]");
            println!("g1 = {} rad/s", photonshift::units::fmt_f64(sys.emitter.g1));
            println!(
                "gamma = {} rad/s",
                photonshift::units::fmt_f64(sys.emitter.gamma)
            );
            println!(
                "kappa_a = {} rad/s",
                photonshift::units::fmt_f64(sys.kappa_a)
            );
            println!(
                "kappa_c_in = {} rad/s",
                photonshift::units::fmt_f64(sys.kappa_c_in)
            );
            println!(
                "kappa_c = {} rad/s",
                photonshift::units::fmt_f64(sys.kappa_c())
            );
            println!("c_in = {}", photonshift::units::fmt_f64(sys.c_in()));
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure {
                code: EXIT_CONFIG,
                message: "config error: --workers must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: EXIT_IO,
                message: e.to_string(),
            })?;
    }
    if let Command::Presets { action } = &cli.command {
        return presets_command(action, cli.kappa_convention.unwrap_or_default());
    }
    if cli.config.is_none() && cli.preset.is_none() {
        return Err(Failure {
            code: EXIT_CONFIG,
            message: "config error: give --preset or --config".into(),
        });
    }
    let (scenario, out) = load(cli)?;
    let output = match cli.command {
        Command::Simulate => report::run_simulate(&scenario)?,
        Command::Sweep => report::run_sweep(&scenario)?,
        Command::ShapePulse => report::run_shape_pulse(&scenario)?,
        Command::Store => report::run_store(&scenario)?,
        Command::Overlap => report::run_overlap(&scenario)?,
        Command::Presets { .. } => unreachable!(),
    };
    write_outputs(&out, &output)?;
    println!("{}", output.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("photonshift: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
