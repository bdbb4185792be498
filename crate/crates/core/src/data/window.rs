use std::ops::Range;

use chrono::NaiveDateTime;

use super::{revin_normalize, Frequency, InstanceStats, SeriesDataset};

/// One `(lookback, horizon)` slice of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesWindow {
    /// Dense ordinal within the list the window was cut into.
    pub window_id: usize,
    /// Dataset row of the first lookback step.
    pub start_row: usize,
    pub lookback_len: usize,
    pub horizon: usize,
    pub num_variables: usize,
    /// Row-major `T × N`.
    pub lookback: Vec<f32>,
    /// Row-major `M × N`.
    pub target: Vec<f32>,
    pub norm_stats: InstanceStats,
    pub first_timestamp: NaiveDateTime,
    pub last_timestamp: NaiveDateTime,
    pub frequency: Frequency,
}

impl TimeSeriesWindow {
    /// Cuts the window starting at dataset row `start`.
    pub fn cut(
        ds: &SeriesDataset,
        window_id: usize,
        start: usize,
        lookback: usize,
        horizon: usize,
    ) -> Self {
        let n = ds.num_variables();
        let lb = ds.rows(start..start + lookback).to_vec();
        let target = ds
            .rows(start + lookback..start + lookback + horizon)
            .to_vec();
        let norm_stats = InstanceStats::from_block(&lb, n);
        Self {
            window_id,
            start_row: start,
            lookback_len: lookback,
            horizon,
            num_variables: n,
            lookback: lb,
            target,
            norm_stats,
            first_timestamp: ds.timestamps[start],
            last_timestamp: ds.timestamps[start + lookback - 1],
            frequency: ds.frequency,
        }
    }

    /// Dataset rows covered by the forecast target.
    pub fn target_rows(&self) -> Range<usize> {
        let s = self.start_row + self.lookback_len;
        s..s + self.horizon
    }

    pub fn normalized_lookback(&self) -> Vec<f32> {
        revin_normalize(&self.lookback, &self.norm_stats)
    }

    /// Target rescaled with the lookback's statistics.
    pub fn normalized_target(&self) -> Vec<f32> {
        revin_normalize(&self.target, &self.norm_stats)
    }

    /// The `T` lookback values of one variable.
    pub fn variable_lookback(&self, var: usize) -> Vec<f32> {
        self.lookback
            .iter()
            .skip(var)
            .step_by(self.num_variables)
            .copied()
            .collect()
    }

    pub fn normalized_variable_lookback(&self, var: usize) -> Vec<f32> {
        let m = self.norm_stats.mean[var] as f64;
        let s = self.norm_stats.std[var] as f64;
        self.variable_lookback(var)
            .into_iter()
            .map(|v| ((v as f64 - m) / s) as f32)
            .collect()
    }
}

/// Number of windows a span of `len` rows yields.
pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    let need = lookback + horizon;
    if len < need || stride == 0 {
        0
    } else {
        (len - need) / stride + 1
    }
}

/// Cuts every window lying fully inside `span`, in chronological order.
/// Returns an empty list when the span is too short.
pub fn make_windows(
    ds: &SeriesDataset,
    span: Range<usize>,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Vec<TimeSeriesWindow> {
    let count = window_count(span.len(), lookback, horizon, stride);
    (0..count)
        .map(|id| TimeSeriesWindow::cut(ds, id, span.start + id * stride, lookback, horizon))
        .collect()
}
