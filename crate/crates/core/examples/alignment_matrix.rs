//! Dumps the channel-wise similarity matrix of the alignment step for one
//! test window of a briefly trained model, as CSV on stdout.

use timecma::data::Split;
use timecma::harness::{fit, prepare, ExperimentConfig, TrainOptions};
use timecma::model::TimeCma;
use timecma::tensor::Graph;

fn main() -> timecma::Result<()> {
    let cfg = ExperimentConfig {
        lookback: 36,
        horizon: 24,
        hidden_dim: 16,
        embed_dim: 16,
        max_windows: 64,
        ..ExperimentConfig::default()
    };
    let data = prepare(&cfg)?;
    let train = data.split_set(&cfg, Split::Train)?;
    let val = data.split_set(&cfg, Split::Val)?;
    let test = data.split_set(&cfg, Split::Test)?;
    let (model, mut params) =
        TimeCma::init(cfg.model_config(data.dataset.num_variables()), cfg.seed)?;
    let opts = TrainOptions {
        optimizer: cfg.optimizer(),
        epochs: 5,
        patience: 0,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
    };
    let outcome = fit(&model, &mut params, &train, &val, &opts, |_| {})?;

    let mut g = Graph::new();
    let trace = model.forward_window(
        &mut g,
        &outcome.best_params,
        &test.windows[0],
        &test.prompts[0],
    )?;
    let sim = trace.similarity.expect("prompt branch enabled");
    let e = g.shape(sim)[1];
    println!(
        "channel,{}",
        (0..e)
            .map(|j| format!("e{j}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    for (c, row) in g.data(sim).chunks(e).enumerate() {
        println!(
            "{c},{}",
            row.iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    Ok(())
}
