use clap::{Parser, Subcommand};
use speedbench::{cmd_annotate, cmd_generate, cmd_plot, cmd_run, cmd_score, CmdError, PolicySpec};
use speedbench_core::annotate::Preset;
use speedbench_core::expert::ExpertParams;
use speedbench_core::metrics::{MetricConfig, Softening};
use speedbench_core::Difficulty;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "speedbench",
    version,
    about = "Closed-loop evaluation for speed-conditioned driving policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a suite of route config files.
    Generate {
        /// easy | medium | hard
        #[arg(long)]
        difficulty: String,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, env = "SPEEDBENCH_SEED", default_value_t = 0)]
        seed: u64,
        /// Output directory for the config XMLs and index.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a policy over every route of a suite.
    Run {
        #[arg(long)]
        suite: PathBuf,
        /// expert | inert | fixed:<m/s> | replay:<path>
        #[arg(long, default_value = "expert")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
        /// Parallel route workers.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Optional key=value file overriding the expert parameters.
        #[arg(long)]
        expert_params: Option<PathBuf>,
    },
    /// Score run logs against their suite and write reports plus a rollup.
    Score {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Disable the follow-mode softening of the speed score.
        #[arg(long, default_value_t = false)]
        no_softening: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-annotate a speed trace with virtual target speeds.
    Annotate {
        /// JSONL trajectory log or CSV with a `v` column.
        #[arg(long)]
        input: PathBuf,
        /// long | short
        #[arg(long, default_value = "long")]
        preset: String,
        #[arg(long, env = "SPEEDBENCH_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot actual vs. target speed over arc-length as SVG.
    Plot {
        #[arg(long)]
        log: PathBuf,
        /// Route config the log was recorded on.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CmdError> {
    match cli.command {
        Command::Generate {
            difficulty,
            count,
            seed,
            out,
        } => {
            let difficulty = Difficulty::parse(&difficulty).ok_or_else(|| {
                CmdError::Invalid(format!("unknown difficulty '{difficulty}'"))
            })?;
            let index = cmd_generate(difficulty, count, seed, &out)?;
            println!(
                "wrote {} configs + index.json to {}",
                index.routes.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            suite,
            policy,
            out,
            jobs,
            expert_params,
        } => {
            let policy = PolicySpec::parse(&policy)?;
            let params = match expert_params {
                Some(path) => ExpertParams::from_kv(
                    &std::fs::read_to_string(&path).map_err(|e| {
                        CmdError::Invalid(format!("{}: {e}", path.display()))
                    })?,
                )
                .map_err(|e| CmdError::Invalid(e.to_string()))?,
                None => ExpertParams::default(),
            };
            let manifest = cmd_run(&suite, &policy, &out, jobs, &params)?;
            for route in &manifest.routes {
                println!("{}: {}", route.route_id, route.status);
            }
            let aborted = manifest.aborted_routes().len();
            if aborted > 0 {
                eprintln!("{aborted} route(s) aborted");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Score {
            logs,
            suite,
            alpha,
            epsilon,
            no_softening,
            out,
        } => {
            let metric_cfg = MetricConfig {
                alpha,
                epsilon,
                softening: if no_softening {
                    Softening::Off
                } else {
                    Softening::Full
                },
                ..MetricConfig::default()
            };
            let summary = cmd_score(&logs, &suite, &metric_cfg, &out)?;
            print!("{}", summary.rollup.to_csv());
            println!(
                "wrote {} reports + rollup.csv to {}",
                summary.reports.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Annotate {
            input,
            preset,
            seed,
            out,
        } => {
            let preset = Preset::parse(&preset)
                .ok_or_else(|| CmdError::Invalid(format!("unknown preset '{preset}'")))?;
            let frames = cmd_annotate(&input, preset, seed, &out)?;
            println!("annotated {frames} frames -> {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { log, config, out } => {
            cmd_plot(&log, &config, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
