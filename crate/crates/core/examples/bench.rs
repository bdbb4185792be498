//! Parameter count and single-window inference time for a freshly
//! initialized model at the desk and full widths.

use timecma::data::Split;
use timecma::harness::report::bench;
use timecma::harness::{prepare, ExperimentConfig};
use timecma::model::TimeCma;

fn main() -> timecma::Result<()> {
    for (c, e) in [(64, 64), (256, 768)] {
        let cfg = ExperimentConfig {
            dataset: "synthetic:etth1".into(),
            synthetic_len: 2000,
            lookback: 96,
            horizon: 96,
            hidden_dim: c,
            embed_dim: e,
            max_windows: 50,
            ..ExperimentConfig::default()
        };
        let data = prepare(&cfg)?;
        let test = data.split_set(&cfg, Split::Test)?;
        let (model, params) = TimeCma::init(cfg.model_config(data.dataset.num_variables()), 0)?;
        let r = bench(&model, &params, &test, &data.name, 50, 3)?;
        println!(
            "C={c:<4} E={e:<4} params {:.3}M  {:.2} ms/window (min {:.2}, max {:.2})  peak RSS {}",
            r.params_millions,
            r.seconds_per_iter * 1e3,
            r.min_seconds_per_iter * 1e3,
            r.max_seconds_per_iter * 1e3,
            r.peak_rss_mib
                .map_or("n/a".into(), |m| format!("{m:.0} MiB"))
        );
    }
    Ok(())
}
