//! Trains on the illness series and reports test MSE/MAE against the
//! persistence baseline.
//!
//! ```text
//! cargo run --release --example train_ili                  # synthetic surrogate
//! cargo run --release --example train_ili -- illness.csv   # weekly CSV, date column first
//! ```

use timecma::harness::commands::CHECKPOINT;
use timecma::harness::{eval, train, ExperimentConfig};

fn main() -> timecma::Result<()> {
    let out = std::env::temp_dir().join("timecma_ili");
    let mut cfg = ExperimentConfig {
        lookback: 36,
        horizon: 24,
        hidden_dim: 64,
        embed_dim: 64,
        out_dir: out.clone(),
        ..ExperimentConfig::default()
    };
    if let Some(csv) = std::env::args().nth(1) {
        cfg.dataset = csv;
        cfg.name = Some("ili".into());
        cfg.frequency = Some("1w".into());
        cfg.split = Some("7:1:2".into());
    }
    let outcome = train(&cfg, &out)?;
    for row in &outcome.log {
        println!(
            "epoch {:>2}  train {:.4}  val {:.4}",
            row.epoch, row.train_loss, row.val_loss
        );
    }
    println!("best epoch {}", outcome.best_epoch);
    let report = eval(&cfg, &out.join(CHECKPOINT), Some(&out))?;
    println!(
        "test ({} windows): MSE {:.3}  MAE {:.3}   persistence: MSE {:.3}  MAE {:.3}",
        report.windows, report.mse, report.mae, report.persistence_mse, report.persistence_mae
    );
    println!("outputs in {}", out.display());
    Ok(())
}
