//! Trains on one ETT-style series and evaluates the frozen checkpoint on a
//! second one with the same variables, lookback and horizon.

use timecma::harness::commands::CHECKPOINT;
use timecma::harness::{eval, train, zeroshot, ExperimentConfig};

fn config(dataset: &str, out: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        dataset: dataset.into(),
        synthetic_len: 3000,
        lookback: 96,
        horizon: 48,
        hidden_dim: 32,
        embed_dim: 32,
        epochs: 5,
        lr: 1e-3,
        max_windows: 400,
        out_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn main() -> timecma::Result<()> {
    let out = std::env::temp_dir().join("timecma_zeroshot");
    let source = config("synthetic:etth1", &out);
    let target = config("synthetic:etth2", &out);
    train(&source, &out)?;
    let ckpt = out.join(CHECKPOINT);
    let in_domain = eval(&source, &ckpt, None)?;
    let transfer = zeroshot(&ckpt, &target, Some(&out))?;
    println!(
        "etth1 -> etth1  MSE {:.3}  MAE {:.3}",
        in_domain.mse, in_domain.mae
    );
    println!(
        "etth1 -> etth2  MSE {:.3}  MAE {:.3}  (persistence {:.3})",
        transfer.mse, transfer.mae, transfer.persistence_mse
    );
    println!(
        "parameter hash unchanged: {}",
        in_domain.param_hash == transfer.param_hash
    );
    Ok(())
}
