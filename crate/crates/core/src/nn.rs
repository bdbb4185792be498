//! Pre-LN transformer building blocks over token-major `[tokens × dim]` tensors.
//!
//! Blocks hold parameter *names*; the values live in a [`ParamRegistry`] and
//! are bound into a [`Graph`] on every forward pass. None of the blocks adds
//! a positional encoding, so non-causal attention is equivariant under any
//! permutation of its tokens.

use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamKind, ParamRegistry, Var};

pub const LAYER_NORM_EPS: f32 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionConfig {
    pub model_dim: usize,
    pub num_heads: usize,
    pub causal: bool,
}

impl AttentionConfig {
    pub fn new(model_dim: usize, num_heads: usize, causal: bool) -> Result<Self> {
        if num_heads == 0 || !model_dim.is_multiple_of(num_heads) {
            return Err(Error::Config(format!(
                "model_dim {model_dim} is not divisible by num_heads {num_heads}"
            )));
        }
        Ok(Self {
            model_dim,
            num_heads,
            causal,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }
}

/// Affine map `x · W + b` with `W: [in × out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: String,
    pub bias: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn register(
        params: &mut ParamRegistry,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self> {
        let weight = format!("{prefix}.weight");
        let bias = format!("{prefix}.bias");
        params.init_uniform(&weight, &[in_dim, out_dim], in_dim)?;
        params.init_zeros(&bias, &[out_dim], ParamKind::Bias)?;
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamRegistry, x: Var) -> Result<Var> {
        let w = g.param(params, &self.weight)?;
        let b = g.param(params, &self.bias)?;
        g.linear(x, w, b)
    }

    /// Sets weight and bias to zero.
    pub fn zero(&self, params: &mut ParamRegistry) {
        for name in [&self.weight, &self.bias] {
            if let Some(t) = params.get_mut(name) {
                t.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: String,
    pub beta: String,
}

impl LayerNorm {
    pub fn register(params: &mut ParamRegistry, prefix: &str, dim: usize) -> Result<Self> {
        let gamma = format!("{prefix}.gamma");
        let beta = format!("{prefix}.beta");
        params.init_ones(&gamma, &[dim], ParamKind::Norm)?;
        params.init_zeros(&beta, &[dim], ParamKind::Norm)?;
        Ok(Self { gamma, beta })
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamRegistry, x: Var) -> Result<Var> {
        let gamma = g.param(params, &self.gamma)?;
        let beta = g.param(params, &self.beta)?;
        g.layer_norm(x, gamma, beta, LAYER_NORM_EPS)
    }
}

/// Multi-head attention with the four projections `q, k, v, o`.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub config: AttentionConfig,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

/// Attention output plus the per-head weight matrices `[queries × keys]`.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub output: Var,
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn register(
        params: &mut ParamRegistry,
        prefix: &str,
        config: AttentionConfig,
    ) -> Result<Self> {
        let d = config.model_dim;
        Ok(Self {
            config,
            query: Linear::register(params, &format!("{prefix}.q"), d, d)?,
            key: Linear::register(params, &format!("{prefix}.k"), d, d)?,
            value: Linear::register(params, &format!("{prefix}.v"), d, d)?,
            output: Linear::register(params, &format!("{prefix}.o"), d, d)?,
        })
    }

    /// Self-attention: queries, keys and values all come from `x`.
    pub fn self_attend(&self, g: &mut Graph, params: &ParamRegistry, x: Var) -> Result<Var> {
        Ok(self.attend(g, params, x, x)?.output)
    }

    /// Cross-attention: queries from `queries`, keys and values from `context`.
    pub fn cross_attend(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        queries: Var,
        context: Var,
    ) -> Result<Var> {
        Ok(self.attend(g, params, queries, context)?.output)
    }

    pub fn attend(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        queries: Var,
        context: Var,
    ) -> Result<AttentionTrace> {
        let d = self.config.model_dim;
        for v in [queries, context] {
            let (_, cols) = g.value(v).dims2("attention")?;
            if cols != d {
                return Err(Error::Shape {
                    op: "attention",
                    detail: format!("token width {cols}, model_dim {d}"),
                });
            }
        }
        let q = self.query.forward(g, params, queries)?;
        let k = self.key.forward(g, params, context)?;
        let v = self.value.forward(g, params, context)?;

        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f32).sqrt();
        let mut heads = Vec::with_capacity(self.config.num_heads);
        let mut weights = Vec::with_capacity(self.config.num_heads);
        for h in 0..self.config.num_heads {
            let (qh, kh, vh) = if self.config.num_heads == 1 {
                (q, k, v)
            } else {
                (
                    g.slice_cols(q, h * hd, hd)?,
                    g.slice_cols(k, h * hd, hd)?,
                    g.slice_cols(v, h * hd, hd)?,
                )
            };
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale);
            let attn = if self.config.causal {
                g.causal_softmax(scores)?
            } else {
                g.softmax(scores, 1)?
            };
            heads.push(g.matmul(attn, vh)?);
            weights.push(attn);
        }
        let merged = if heads.len() == 1 {
            heads[0]
        } else {
            g.concat_cols(&heads)?
        };
        let output = self.output.forward(g, params, merged)?;
        Ok(AttentionTrace { output, weights })
    }
}

/// `max(0, x·W₁ + b₁)·W₂ + b₂`
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn register(
        params: &mut ParamRegistry,
        prefix: &str,
        dim: usize,
        ffn_dim: usize,
    ) -> Result<Self> {
        Ok(Self {
            inner: Linear::register(params, &format!("{prefix}.fc1"), dim, ffn_dim)?,
            outer: Linear::register(params, &format!("{prefix}.fc2"), ffn_dim, dim)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamRegistry, x: Var) -> Result<Var> {
        let h = self.inner.forward(g, params, x)?;
        let h = g.relu(h);
        self.outer.forward(g, params, h)
    }
}

/// Pre-LN encoder layer:
///
/// ```text
/// x₁  = MHSA(LN₁(x)) + x
/// out = FFN(LN₂(x₁)) + x₁
/// ```
#[derive(Debug, Clone)]
pub struct PreLnEncoderLayer {
    pub ln_attn: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln_ffn: LayerNorm,
    pub ffn: FeedForward,
    /// When false the feed-forward sub-layer is skipped (identity), for ablations.
    pub use_ffn: bool,
}

impl PreLnEncoderLayer {
    pub fn register(
        params: &mut ParamRegistry,
        prefix: &str,
        attn: AttentionConfig,
        ffn_dim: usize,
    ) -> Result<Self> {
        let d = attn.model_dim;
        Ok(Self {
            ln_attn: LayerNorm::register(params, &format!("{prefix}.ln1"), d)?,
            attn: MultiHeadAttention::register(params, &format!("{prefix}.attn"), attn)?,
            ln_ffn: LayerNorm::register(params, &format!("{prefix}.ln2"), d)?,
            ffn: FeedForward::register(params, &format!("{prefix}.ffn"), d, ffn_dim)?,
            use_ffn: true,
        })
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamRegistry, x: Var) -> Result<Var> {
        let h = self.ln_attn.forward(g, params, x)?;
        let h = self.attn.self_attend(g, params, h)?;
        let x1 = g.add(h, x)?;
        if !self.use_ffn {
            return Ok(x1);
        }
        let h = self.ln_ffn.forward(g, params, x1)?;
        let h = self.ffn.forward(g, params, h)?;
        g.add(h, x1)
    }

    /// Zeroes the attention output projection and the second FFN layer,
    /// which turns the layer into the identity map.
    pub fn zero_residual_branches(&self, params: &mut ParamRegistry) {
        self.attn.output.zero(params);
        self.ffn.outer.zero(params);
    }
}

/// Pre-LN decoder layer:
///
/// ```text
/// x₁  = MMSA(LN₁(x)) + x
/// out = MHCA(LN₂(x₁), context) + x₁
/// ```
#[derive(Debug, Clone)]
pub struct PreLnDecoderLayer {
    pub ln_self: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln_cross: LayerNorm,
    pub cross_attn: MultiHeadAttention,
}

impl PreLnDecoderLayer {
    /// `self_attn.causal` decides whether the first sub-layer is masked.
    pub fn register(
        params: &mut ParamRegistry,
        prefix: &str,
        self_attn: AttentionConfig,
    ) -> Result<Self> {
        let d = self_attn.model_dim;
        let cross = AttentionConfig {
            causal: false,
            ..self_attn
        };
        Ok(Self {
            ln_self: LayerNorm::register(params, &format!("{prefix}.ln1"), d)?,
            self_attn: MultiHeadAttention::register(
                params,
                &format!("{prefix}.self_attn"),
                self_attn,
            )?,
            ln_cross: LayerNorm::register(params, &format!("{prefix}.ln2"), d)?,
            cross_attn: MultiHeadAttention::register(
                params,
                &format!("{prefix}.cross_attn"),
                cross,
            )?,
        })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        x: Var,
        context: Var,
    ) -> Result<Var> {
        let h = self.ln_self.forward(g, params, x)?;
        let h = self.self_attn.self_attend(g, params, h)?;
        let x1 = g.add(h, x)?;
        let h = self.ln_cross.forward(g, params, x1)?;
        let h = self.cross_attn.cross_attend(g, params, h, context)?;
        g.add(h, x1)
    }

    pub fn zero_residual_branches(&self, params: &mut ParamRegistry) {
        self.self_attn.output.zero(params);
        self.cross_attn.output.zero(params);
    }
}

/// Runs a stack of encoder layers; an empty stack is the identity.
pub fn encode_stack(
    layers: &[PreLnEncoderLayer],
    g: &mut Graph,
    params: &ParamRegistry,
    x: Var,
) -> Result<Var> {
    layers
        .iter()
        .try_fold(x, |h, layer| layer.forward(g, params, h))
}
