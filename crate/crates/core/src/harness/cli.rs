//! `coopsim run | list | validate`.

use super::{emit_outputs, run_batch, HarnessError, RunOverrides, DEFAULT_EPISODES};
use crate::edge_ai::LatencyModel;
use crate::perception::PerceptionMode;
use crate::scenarios::{self, Participants, ScenarioError, BUILTIN_NAMES};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Output directory used when `--out` is absent and this variable is unset.
pub const OUT_DIR_ENV: &str = "COOPSIM_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "coopsim",
    version,
    about = "Cooperative-perception driving scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PerceptionArg {
    Oracle,
    Noisy,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a batch of seeded episodes and write CSV, JSON and SVG outputs.
    Run {
        /// Built-in name or path to a scenario document.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = DEFAULT_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `none`, `det:<s>` or `uni:<lo>:<hi>`.
        #[arg(long)]
        latency: Option<LatencyModel>,
        #[arg(long)]
        drop: Option<f64>,
        /// `ego-only`, `vehicle`, `rsu` or `both`.
        #[arg(long)]
        participants: Option<Participants>,
        #[arg(long, value_enum)]
        perception: Option<PerceptionArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    List,
    /// Check a scenario document without running it.
    Validate { path: PathBuf },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Command::List => {
            for name in BUILTIN_NAMES {
                let description = scenarios::builtin(name)
                    .map(|s| s.description)
                    .unwrap_or_default();
                let _ = writeln!(out, "{name:<10} {description}");
            }
            EXIT_OK
        }
        Command::Validate { path } => match scenarios::load_scenario_file(&path) {
            Ok(spec) => {
                let _ = writeln!(out, "{}: ok ({})", path.display(), spec.name);
                EXIT_OK
            }
            Err(e) => {
                let _ = writeln!(err, "{}: {e}", path.display());
                match e {
                    ScenarioError::Io { .. } => EXIT_RUNTIME,
                    _ => EXIT_INVALID,
                }
            }
        },
        Command::Run {
            scenario,
            episodes,
            seed,
            latency,
            drop,
            participants,
            perception,
            out: dir,
        } => {
            let spec = match scenarios::resolve(&scenario) {
                Ok(spec) => spec,
                Err(e) => {
                    let _ = writeln!(err, "{e}");
                    return match e {
                        ScenarioError::Io { .. } => EXIT_RUNTIME,
                        _ => EXIT_INVALID,
                    };
                }
            };
            let overrides = RunOverrides {
                latency,
                drop,
                participants,
                perception: perception.map(|p| match p {
                    PerceptionArg::Oracle => PerceptionMode::Oracle,
                    PerceptionArg::Noisy => PerceptionMode::Noisy,
                }),
            };
            let dir = dir
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("coopsim-out"));
            let result = run_batch(&spec, episodes, seed, &overrides)
                .and_then(|run| emit_outputs(&run, &dir).map(|_| run));
            match result {
                Ok(run) => {
                    let s = &run.stats;
                    let _ = writeln!(
                        out,
                        "{}: {}/{} collision-free ({:.2}%), min distance {} -> {}",
                        run.spec.name,
                        s.n_cf,
                        s.n_total,
                        s.success_rate,
                        match (s.min_distance_mean, s.min_distance_std) {
                            (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3} m"),
                            _ => "n/a".into(),
                        },
                        dir.display()
                    );
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(err, "{e}");
                    match e {
                        HarnessError::InvalidOverride(_) | HarnessError::Scenario(_) => {
                            EXIT_INVALID
                        }
                        _ => EXIT_RUNTIME,
                    }
                }
            }
        }
    }
}
