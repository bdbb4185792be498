//! Writes a synthetic hourly series to CSV, then trains from a config that
//! points at the file, the same path a real benchmark CSV takes.

use timecma::data::synthetic::ett_like;
use timecma::data::write_csv;
use timecma::data::Split;
use timecma::harness::{prepare, train, ExperimentConfig};

fn main() -> timecma::Result<()> {
    let dir = std::env::temp_dir().join("timecma_csv");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("hourly.csv");
    write_csv(&ett_like(3, 1, 1500)?, &csv)?;

    let toml = r#"
dataset = "hourly.csv"
name = "hourly"
frequency = "1h"
split = "6:2:2"
lookback = 48
horizon = 24
hidden_dim = 32
embed_dim = 32
epochs = 3
lr = 1e-3
max_windows = 200
"#;
    let config_path = dir.join("hourly.toml");
    std::fs::write(&config_path, toml)?;
    let mut cfg = ExperimentConfig::load(&config_path)?;
    cfg.out_dir = dir.join("run");

    let data = prepare(&cfg)?;
    println!(
        "{} rows, columns {:?}",
        data.dataset.len(),
        data.dataset.columns
    );
    for split in Split::ALL {
        println!(
            "{split:<5} rows {:?}, {} windows",
            data.ranges.target_range(split),
            data.windows(&cfg, split).len()
        );
    }
    let outcome = train(&cfg, &cfg.out_dir)?;
    println!(
        "best val loss {:.4} at epoch {}",
        outcome.best_val_loss, outcome.best_epoch
    );
    Ok(())
}
