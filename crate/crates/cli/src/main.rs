//! Pipeline driver. Every subcommand reads one TOML run configuration
//! (see `init`) and writes its artifacts under the configured paths.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use msfsu_core::model::Variant;
use msfsu_core::pipeline::{self, AgentKind, RunConfig};

#[derive(Parser)]
#[command(name = "msfsu", version, about = "RGBD imitation-learning driving pipeline")]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, env = "MSFSU_CONFIG", default_value = "run.toml")]
    config: PathBuf,
    /// Override the config file's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a default configuration file.
    Init,
    /// Record expert episodes with steering-noise injection.
    Collect {
        /// Override the config file's episode count.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Strip noise frames, balance the training split, index the dataset.
    Prepare,
    /// Train the configured model on the prepared dataset.
    Train {
        /// Override the config file's variant (msfsu, msf, su).
        #[arg(long)]
        variant: Option<String>,
    },
    /// Benchmark a trained model (or the scripted expert) closed-loop.
    Bench {
        /// Override the config file's variant (msfsu, msf, su).
        #[arg(long)]
        variant: Option<String>,
        /// Drive with the expert autopilot instead of a checkpoint.
        #[arg(long)]
        expert: bool,
    },
    /// Train and benchmark MSFSU, MSF and SU off one prepared dataset.
    Ablate,
    /// Export one collected episode as PNG frames plus trajectory and
    /// yaw-rate figures.
    Replay {
        /// Episode index within the dataset manifest.
        #[arg(long)]
        episode: usize,
        /// Output directory for frames and figures.
        #[arg(long)]
        out: PathBuf,
    },
}

fn apply_variant(cfg: &mut RunConfig, spec: &Option<String>) -> Result<(), String> {
    if let Some(name) = spec {
        cfg.model.variant = Variant::parse(name).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), String> {
    if matches!(cli.command, Command::Init) {
        let cfg = RunConfig::default();
        cfg.save(&cli.config).map_err(|e| e.to_string())?;
        println!("wrote {}", cli.config.display());
        return Ok(());
    }

    let mut cfg = RunConfig::load(&cli.config).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    match cli.command {
        Command::Init => unreachable!("handled above"),
        Command::Collect { episodes } => {
            if let Some(n) = episodes {
                cfg.collect.episodes = n;
            }
            let s = pipeline::collect(&cfg).map_err(|e| e.to_string())?;
            println!(
                "collected {} episodes, {} frames ({} reached goal) -> {}",
                s.episodes,
                s.frames,
                s.reached_goal,
                cfg.paths.dataset_dir.display()
            );
        }
        Command::Prepare => {
            let s = pipeline::prepare(&cfg).map_err(|e| e.to_string())?;
            println!("{}", s.report.to_text());
            println!("train samples: {}, val samples: {}", s.train_len, s.val_len);
        }
        Command::Train { variant } => {
            apply_variant(&mut cfg, &variant)?;
            let s = pipeline::train(&cfg).map_err(|e| e.to_string())?;
            println!(
                "trained {} epochs (stop: {}), best val {} at epoch {}",
                s.report.epochs.len(),
                s.report.stop_reason,
                s.report.best_val_loss,
                s.report.best_epoch
            );
            println!("checkpoint: {}", s.checkpoint.display());
            println!("report: {}", s.report_csv.display());
        }
        Command::Bench { variant, expert } => {
            apply_variant(&mut cfg, &variant)?;
            let kind = if expert {
                AgentKind::Expert
            } else {
                AgentKind::Model
            };
            let s = pipeline::bench(&cfg, kind).map_err(|e| e.to_string())?;
            print!("{}", s.report.to_csv());
            println!("report: {}", s.report_csv.display());
        }
        Command::Ablate => {
            let s = pipeline::ablate(&cfg).map_err(|e| e.to_string())?;
            for (variant, trained, benched) in &s.arms {
                println!(
                    "{}: checkpoint {} report {}",
                    variant.name(),
                    trained.checkpoint.display(),
                    benched.report_csv.display()
                );
            }
            println!("summary: {}", s.summary_csv.display());
        }
        Command::Replay { episode, out } => {
            let s = pipeline::replay(&cfg, episode, &out).map_err(|e| e.to_string())?;
            println!(
                "wrote {} frames, {} and {}",
                s.frames,
                s.trajectory_png.display(),
                s.yaw_rate_png.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
