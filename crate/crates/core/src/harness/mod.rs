//! Experiment orchestration: config files, the training loop, evaluation
//! reports and the subcommands of the `timecma` binary.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod train;

pub use commands::{
    bench_cmd, embed_stub, eval, gen_prompts, inspect_store, read_train_log, train, zeroshot,
};
pub use config::{Embedder, ExperimentConfig};
pub use pipeline::{prepare, PreparedData, SplitSet};
pub use report::{persistence_forecast, BenchReport, ForecastReport, Metrics};
pub use train::{fit, mean_loss, EpochLog, TrainOptions, TrainOutcome};
