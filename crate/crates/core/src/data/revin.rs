use serde::{Deserialize, Serialize};

/// Variance guard for instance normalization.
pub const REVIN_EPS: f32 = 1e-5;

/// Per-variable mean and standard deviation of one lookback window.
///
/// `std` is the population standard deviation with the variance guarded,
/// `√(σ² + eps)`, so constant variables normalize to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl InstanceStats {
    /// Statistics of a row-major `rows × n` block, per column.
    pub fn from_block(block: &[f32], n: usize) -> Self {
        let rows = block.len() / n.max(1);
        let mut mean = vec![0.0f32; n];
        let mut std = vec![0.0f32; n];
        for j in 0..n {
            let col = || (0..rows).map(|r| block[r * n + j] as f64);
            let m = col().sum::<f64>() / rows.max(1) as f64;
            let var = col().map(|v| (v - m) * (v - m)).sum::<f64>() / rows.max(1) as f64;
            mean[j] = m as f32;
            std[j] = (var + REVIN_EPS as f64).sqrt() as f32;
        }
        Self { mean, std }
    }

    pub fn num_variables(&self) -> usize {
        self.mean.len()
    }
}

/// `(x − mean) / std` per column of a row-major block.
pub fn revin_normalize(block: &[f32], stats: &InstanceStats) -> Vec<f32> {
    let n = stats.num_variables();
    block
        .chunks(n.max(1))
        .flat_map(|row| {
            row.iter()
                .zip(stats.mean.iter().zip(&stats.std))
                .map(|(&v, (&m, &s))| ((v as f64 - m as f64) / s as f64) as f32)
        })
        .collect()
}

/// `x · std + mean` per column, inverting [`revin_normalize`].
pub fn revin_denormalize(block: &[f32], stats: &InstanceStats) -> Vec<f32> {
    let n = stats.num_variables();
    block
        .chunks(n.max(1))
        .flat_map(|row| {
            row.iter()
                .zip(stats.mean.iter().zip(&stats.std))
                .map(|(&v, (&m, &s))| (v as f64 * s as f64 + m as f64) as f32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_variable_normalizes_to_zero() {
        let block = vec![4.0f32; 5];
        let stats = InstanceStats::from_block(&block, 1);
        let z = revin_normalize(&block, &stats);
        assert!(z.iter().all(|&v| v == 0.0));
        assert_eq!(revin_denormalize(&z, &stats), block);
    }

    #[test]
    fn one_two_three() {
        let block = [1.0f32, 2.0, 3.0];
        let stats = InstanceStats::from_block(&block, 1);
        assert_eq!(stats.mean[0], 2.0);
        let expected = ((2.0f64 / 3.0) + REVIN_EPS as f64).sqrt() as f32;
        assert!((stats.std[0] - expected).abs() < 1e-7);
        let back = revin_denormalize(&revin_normalize(&block, &stats), &stats);
        for (a, b) in back.iter().zip(block) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
