use super::params::ParamRegistry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamWConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// AdamW with decoupled weight decay.
///
/// ```text
/// w ← w − lr·wd·w
/// m ← β₁m + (1−β₁)g        v ← β₂v + (1−β₂)g²
/// w ← w − lr · (m / (1−β₁ᵗ)) / (√(v / (1−β₂ᵗ)) + ε)
/// ```
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    first: Vec<Vec<f32>>,
    second: Vec<Vec<f32>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update using the gradients stored in `params`.
    pub fn step(&mut self, params: &mut ParamRegistry) -> Result<()> {
        if let Some((name, _, _)) = params.iter().find(|(_, t, _)| t.grad.is_none()) {
            return Err(Error::Usage(format!("parameter '{name}' has no gradient")));
        }
        if self.first.is_empty() {
            for (_, t, _) in params.iter() {
                self.first.push(vec![0.0; t.numel()]);
                self.second.push(vec![0.0; t.numel()]);
            }
        } else if self.first.len() != params.len() {
            return Err(Error::Usage(
                "optimizer state does not match the registry".into(),
            ));
        }

        self.step += 1;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let decay = 1.0 - lr * weight_decay;

        for (((_, t), m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = t.grad.as_ref().expect("checked above");
            for (((w, &g), m), v) in t
                .data
                .iter_mut()
                .zip(grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *w *= decay;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
