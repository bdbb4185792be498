use serde::{Deserialize, Serialize};

use super::InstanceStats;
use crate::error::{shape_err, Result};

/// Dataset-level z-scoring fitted on the training rows only.
///
/// This is the usual long-horizon benchmark convention: every split is
/// rescaled with training statistics before windowing, and metrics are
/// reported on that scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Standardizer {
    pub fn fit(train_rows: &[f32], n: usize) -> Self {
        let s = InstanceStats::from_block(train_rows, n);
        Self {
            mean: s.mean,
            std: s.std,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    pub fn transform(&self, values: &mut [f32]) -> Result<()> {
        let n = self.mean.len();
        if n == 0 || !values.len().is_multiple_of(n) {
            return shape_err(
                "standardize",
                format!("{} values for {n} variables", values.len()),
            );
        }
        for row in values.chunks_mut(n) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(())
    }

    pub fn inverse(&self, values: &mut [f32]) -> Result<()> {
        let n = self.mean.len();
        if n == 0 || !values.len().is_multiple_of(n) {
            return shape_err(
                "standardize",
                format!("{} values for {n} variables", values.len()),
            );
        }
        for row in values.chunks_mut(n) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(())
    }
}
