use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Role of a parameter. Only `Weight` entries enter the L2 penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ParamKind {
    Weight,
    Bias,
    Norm,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    tensor: Tensor,
    kind: ParamKind,
}

/// Ordered, named collection of trainable tensors.
///
/// Every parameter draws its initial values from a ChaCha stream seeded by
/// the registry seed and the parameter name, so a parameter's values do not
/// depend on what was registered before it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRegistry {
    entries: IndexMap<String, Entry>,
    seed: u64,
}

impl ParamRegistry {
    pub fn new(seed: u64) -> Self {
        Self {
            entries: IndexMap::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts a tensor under a new name.
    pub fn insert(&mut self, name: &str, tensor: Tensor, kind: ParamKind) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::Usage(format!("parameter '{name}' registered twice")));
        }
        let tensor = tensor.with_requires_grad(true);
        self.entries
            .insert(name.to_string(), Entry { tensor, kind });
        Ok(())
    }

    /// Weight matrix drawn from `U(−1/√fan_in, 1/√fan_in)`.
    pub fn init_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<()> {
        let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
        let mut rng = self.rng_for(name);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data)?, ParamKind::Weight)
    }

    pub fn init_zeros(&mut self, name: &str, shape: &[usize], kind: ParamKind) -> Result<()> {
        self.insert(name, Tensor::zeros(shape), kind)
    }

    pub fn init_ones(&mut self, name: &str, shape: &[usize], kind: ParamKind) -> Result<()> {
        self.insert(name, Tensor::ones(shape), kind)
    }

    fn rng_for(&self, name: &str) -> ChaCha8Rng {
        // FNV-1a over the name, folded into the registry seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        ChaCha8Rng::seed_from_u64(self.seed ^ h)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.get_index_of(name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name).map(|e| &e.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name).map(|e| &mut e.tensor)
    }

    pub fn kind(&self, name: &str) -> Option<ParamKind> {
        self.entries.get(name).map(|e| e.kind)
    }

    pub(crate) fn get_index(&self, index: usize) -> &Tensor {
        &self.entries[index].tensor
    }

    /// `(name, tensor, kind)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor, ParamKind)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.as_str(), &e.tensor, e.kind))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries
            .iter_mut()
            .map(|(k, e)| (k.as_str(), &mut e.tensor))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Total number of trainable scalars.
    pub fn count_scalars(&self) -> usize {
        self.entries.values().map(|e| e.tensor.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        for e in self.entries.values_mut() {
            e.tensor.grad = None;
        }
    }

    pub(crate) fn accumulate_grad(&mut self, index: usize, grad: &[f32]) {
        let t = &mut self.entries[index].tensor;
        match &mut t.grad {
            Some(g) => g.iter_mut().zip(grad).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(grad.to_vec()),
        }
    }

    /// Multiplies every gradient by `factor`.
    pub fn scale_grads(&mut self, factor: f32) {
        for e in self.entries.values_mut() {
            if let Some(g) = &mut e.tensor.grad {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    /// Copies values (not gradients) from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &ParamRegistry) -> Result<()> {
        self.check_layout(other)?;
        for (dst, src) in self.entries.values_mut().zip(other.entries.values()) {
            dst.tensor.data.copy_from_slice(&src.tensor.data);
        }
        Ok(())
    }

    /// Errors unless both registries hold the same names, shapes and kinds in the same order.
    pub fn check_layout(&self, other: &ParamRegistry) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Validation(format!(
                "parameter count {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for ((na, a), (nb, b)) in self.entries.iter().zip(other.entries.iter()) {
            if na != nb || a.tensor.shape != b.tensor.shape || a.kind != b.kind {
                return Err(Error::Validation(format!(
                    "parameter '{na}' {:?} does not match '{nb}' {:?}",
                    a.tensor.shape, b.tensor.shape
                )));
            }
        }
        Ok(())
    }
}
