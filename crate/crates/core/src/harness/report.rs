use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pipeline::SplitSet;
use crate::data::TimeSeriesWindow;
use crate::error::Result;
use crate::model::TimeCma;
use crate::tensor::ParamRegistry;

/// Squared and absolute error accumulated in window order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub count: usize,
}

impl Metrics {
    /// Scores `predict` against every window's target. Both are compared on
    /// the scale the windows were cut at.
    pub fn score<F>(windows: &[TimeSeriesWindow], mut predict: F) -> Result<Self>
    where
        F: FnMut(usize, &TimeSeriesWindow) -> Result<Vec<f32>>,
    {
        let (mut se, mut ae, mut count) = (0.0f64, 0.0f64, 0usize);
        for (i, w) in windows.iter().enumerate() {
            let pred = predict(i, w)?;
            if pred.len() != w.target.len() {
                return Err(crate::Error::Shape {
                    op: "score",
                    detail: format!(
                        "window {i}: {} predictions for {} targets",
                        pred.len(),
                        w.target.len()
                    ),
                });
            }
            for (&p, &y) in pred.iter().zip(&w.target) {
                let d = p as f64 - y as f64;
                se += d * d;
                ae += d.abs();
            }
            count += w.target.len();
        }
        let n = count.max(1) as f64;
        Ok(Self {
            mse: se / n,
            mae: ae / n,
            count,
        })
    }
}

/// Repeats the last lookback row across the horizon.
pub fn persistence_forecast(window: &TimeSeriesWindow) -> Vec<f32> {
    let n = window.num_variables;
    let last = &window.lookback[window.lookback.len() - n..];
    last.repeat(window.horizon)
}

/// SHA-256 over every parameter's name and little-endian bytes.
pub fn param_hash(params: &ParamRegistry) -> String {
    let mut h = Sha256::new();
    for (name, t, _) in params.iter() {
        h.update(name.as_bytes());
        for v in &t.data {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Peak resident set size of this process, from `/proc/self/status`.
pub fn peak_rss_mib() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib / 1024.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub dataset: String,
    pub split: String,
    pub windows: usize,
    pub mse: f64,
    pub mae: f64,
    pub persistence_mse: f64,
    pub persistence_mae: f64,
    pub seconds_per_window: f64,
    pub param_count: usize,
    pub peak_rss_mib: Option<f64>,
    pub param_hash: String,
    pub config_hash: String,
}

impl ForecastReport {
    /// True when every field except timing and memory matches.
    pub fn same_results(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            seconds_per_window: 0.0,
            peak_rss_mib: None,
            config_hash: String::new(),
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

/// Forecast of every window, in window order, row-major `M × N` each.
pub fn evaluate(
    model: &TimeCma,
    params: &ParamRegistry,
    set: &SplitSet,
    dataset: &str,
    config_hash: &str,
) -> Result<(ForecastReport, Vec<Vec<f32>>)> {
    let mut predictions = Vec::with_capacity(set.len());
    let mut elapsed = 0.0f64;
    let metrics = Metrics::score(&set.windows, |i, w| {
        let start = Instant::now();
        let p = model.predict(params, w, &set.prompts[i])?;
        elapsed += start.elapsed().as_secs_f64();
        predictions.push(p.clone());
        Ok(p)
    })?;
    let baseline = Metrics::score(&set.windows, |_, w| Ok(persistence_forecast(w)))?;
    let report = ForecastReport {
        dataset: dataset.to_string(),
        split: set.split.to_string(),
        windows: set.len(),
        mse: metrics.mse,
        mae: metrics.mae,
        persistence_mse: baseline.mse,
        persistence_mae: baseline.mae,
        seconds_per_window: elapsed / set.len().max(1) as f64,
        param_count: params.count_scalars(),
        peak_rss_mib: peak_rss_mib(),
        param_hash: param_hash(params),
        config_hash: config_hash.to_string(),
    };
    Ok((report, predictions))
}

/// Long-format dump: one row per (window, step, variable).
pub fn write_predictions(
    path: impl AsRef<Path>,
    windows: &[TimeSeriesWindow],
    predictions: &[Vec<f32>],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["window_id", "step", "variable", "prediction", "target"])?;
    for (win, pred) in windows.iter().zip(predictions) {
        let n = win.num_variables;
        for (k, (&p, &y)) in pred.iter().zip(&win.target).enumerate() {
            w.write_record([
                win.window_id.to_string(),
                (k / n).to_string(),
                (k % n).to_string(),
                p.to_string(),
                y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub param_count: usize,
    pub params_millions: f64,
    pub windows_per_repeat: usize,
    pub repeats: usize,
    pub seconds_per_iter: f64,
    pub min_seconds_per_iter: f64,
    pub max_seconds_per_iter: f64,
    pub peak_rss_mib: Option<f64>,
}

/// Times single-window inference over at least `min_windows` windows
/// (cycling through `set` if it is smaller), `repeats` times.
pub fn bench(
    model: &TimeCma,
    params: &ParamRegistry,
    set: &SplitSet,
    dataset: &str,
    min_windows: usize,
    repeats: usize,
) -> Result<BenchReport> {
    if set.is_empty() {
        return Err(crate::Error::Usage("no windows to benchmark".into()));
    }
    let n = min_windows.max(1);
    // One untimed pass warms caches and the allocator.
    model.predict(params, &set.windows[0], &set.prompts[0])?;
    let mut timings = Vec::with_capacity(repeats.max(1));
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        for k in 0..n {
            let i = k % set.len();
            std::hint::black_box(model.predict(params, &set.windows[i], &set.prompts[i])?);
        }
        timings.push(start.elapsed().as_secs_f64() / n as f64);
    }
    let count = params.count_scalars();
    Ok(BenchReport {
        dataset: dataset.to_string(),
        param_count: count,
        params_millions: count as f64 / 1e6,
        windows_per_repeat: n,
        repeats: timings.len(),
        seconds_per_iter: timings.iter().sum::<f64>() / timings.len() as f64,
        min_seconds_per_iter: timings.iter().copied().fold(f64::INFINITY, f64::min),
        max_seconds_per_iter: timings.iter().copied().fold(0.0, f64::max),
        peak_rss_mib: peak_rss_mib(),
    })
}

/// Writes a single-row CSV with a header.
pub fn write_csv_row<T: Serialize>(path: impl AsRef<Path>, row: &T) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}
