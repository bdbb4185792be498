use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use timecma::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "timecma",
    version,
    about = "Prompt-aligned multivariate forecasting experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (flat TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render prompts for every split to JSON lines.
    GenPrompts(Common),
    /// Embed generated prompts with the deterministic stub.
    EmbedStub(Common),
    /// Train and keep the best-validation checkpoint.
    Train(Common),
    /// Test-split MSE/MAE of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to OUT/checkpoint.tcmk.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a source checkpoint on the config's (target) dataset.
    Zeroshot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Parameter count, inference speed and peak memory.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print a store's header after verifying its checksum.
    InspectStore { path: PathBuf },
}

fn checkpoint_or_default(cfg: &ExperimentConfig, ckpt: Option<PathBuf>) -> PathBuf {
    ckpt.unwrap_or_else(|| cfg.out_dir.join(harness::commands::CHECKPOINT))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenPrompts(c) => {
            let cfg = c.load()?;
            print_json(&harness::gen_prompts(&cfg, &cfg.out_dir)?)?;
        }
        Command::EmbedStub(c) => {
            let cfg = c.load()?;
            for path in harness::embed_stub(&cfg, &cfg.out_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let outcome = harness::train(&cfg, &cfg.out_dir)?;
            for row in &outcome.log {
                println!(
                    "epoch {:>3}  train {:.6}  val {:.6}",
                    row.epoch, row.train_loss, row.val_loss
                );
            }
            println!(
                "best epoch {} (val {:.6})",
                outcome.best_epoch, outcome.best_val_loss
            );
        }
        Command::Eval { common, checkpoint } => {
            let cfg = common.load()?;
            let ckpt = checkpoint_or_default(&cfg, checkpoint);
            print_json(&harness::eval(&cfg, &ckpt, Some(&cfg.out_dir))?)?;
        }
        Command::Zeroshot { common, checkpoint } => {
            let cfg = common.load()?;
            print_json(&harness::zeroshot(&checkpoint, &cfg, Some(&cfg.out_dir))?)?;
        }
        Command::Bench { common, checkpoint } => {
            let cfg = common.load()?;
            let ckpt = checkpoint_or_default(&cfg, checkpoint);
            print_json(&harness::bench_cmd(&cfg, &ckpt, Some(&cfg.out_dir))?)?;
        }
        Command::InspectStore { path } => print_json(&harness::inspect_store(&path)?)?,
    }
    Ok(())
}
