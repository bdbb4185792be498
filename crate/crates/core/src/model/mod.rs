//! The full forecaster.
//!
//! Matrices are token-major throughout: the series stream is `N × C` (one
//! row per variable) and the prompt stream is `N × E`, i.e. the transposes
//! of the channel-major `C × N` / `E × N` notation. Every map that the
//! channel-major view writes as `W·X` is applied here as `X·Wᵀ`.
//!
//! ```text
//! lookback T×N ──revin──► inverted embed ──► TS encoder ─────────┐ H̄ (N×C)
//! prompt embeddings N×E ──► input proj ──► prompt encoder ───────┤ L̄ (N×E)
//!                                                               ▼
//!          similarity  S = softmax_E( ψq(H̄)ᵀ · ψk(L̄) )          C×E
//!          aligned     A = ωc( (S · ψv(L̄)ᵀ)ᵀ ) + H̄              N×C
//!                                                               ▼
//!          decoder (masked self-attn, cross-attn on A) ──► projection C→M ──► denorm
//! ```

mod checkpoint;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
};

use serde::{Deserialize, Serialize};

use crate::data::{revin_denormalize, TimeSeriesWindow};
use crate::error::{shape_err, Error, Result};
use crate::nn::{encode_stack, AttentionConfig, Linear, PreLnDecoderLayer, PreLnEncoderLayer};
use crate::tensor::{Graph, ParamKind, ParamRegistry, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Variables in the training data. Every learned map is shared across
    /// variables, so a model runs on any `N`; this is informational.
    pub num_variables: usize,
    pub lookback: usize,
    pub horizon: usize,
    /// Channel width `C` of the series stream.
    pub hidden_dim: usize,
    /// Width `E` of the stored prompt embeddings.
    pub embed_dim: usize,
    pub layers_ts: usize,
    pub layers_prompt: usize,
    pub layers_dec: usize,
    pub heads: usize,
    pub ffn_ratio: usize,
    /// Weight of the L2 penalty on weight matrices.
    pub lambda: f32,
    /// Mask the decoder's self-attention over variable tokens.
    pub causal_decoder: bool,
    /// Learnable `E → E` map in front of the prompt encoder.
    pub prompt_projection: bool,
    /// When false the prompt encoder and alignment are removed and the
    /// decoder reads the series stream directly.
    pub use_prompt_branch: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_variables: 7,
            lookback: 96,
            horizon: 96,
            hidden_dim: 64,
            embed_dim: 64,
            layers_ts: 1,
            layers_prompt: 1,
            layers_dec: 1,
            heads: 8,
            ffn_ratio: 4,
            lambda: 1e-5,
            causal_decoder: true,
            prompt_projection: true,
            use_prompt_branch: true,
        }
    }
}

impl ModelConfig {
    /// Structural checks. Layer counts may be zero (an empty stack is the
    /// identity); experiment configs additionally require them to be ≥ 1.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_variables", self.num_variables),
            ("lookback", self.lookback),
            ("horizon", self.horizon),
            ("hidden_dim", self.hidden_dim),
            ("embed_dim", self.embed_dim),
            ("heads", self.heads),
            ("ffn_ratio", self.ffn_ratio),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        for (name, dim) in [
            ("hidden_dim", self.hidden_dim),
            ("embed_dim", self.embed_dim),
        ] {
            if dim % self.heads != 0 {
                return Err(Error::Config(format!(
                    "{name} {dim} is not divisible by heads {}",
                    self.heads
                )));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `ψq, ψk, ψv` and `ωc` of the channel-wise alignment.
#[derive(Debug, Clone)]
pub struct CrossModalAlignment {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl CrossModalAlignment {
    pub fn register(
        params: &mut ParamRegistry,
        prefix: &str,
        hidden_dim: usize,
        embed_dim: usize,
    ) -> Result<Self> {
        Ok(Self {
            query: Linear::register(params, &format!("{prefix}.psi_q"), hidden_dim, hidden_dim)?,
            key: Linear::register(params, &format!("{prefix}.psi_k"), embed_dim, embed_dim)?,
            value: Linear::register(params, &format!("{prefix}.psi_v"), embed_dim, embed_dim)?,
            output: Linear::register(params, &format!("{prefix}.omega_c"), hidden_dim, hidden_dim)?,
        })
    }

    /// Returns `(aligned N×C, similarity C×E)`.
    pub fn forward(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        series: Var,
        prompts: Var,
    ) -> Result<(Var, Var)> {
        let (n_series, _) = g.value(series).dims2("align")?;
        let (n_prompts, _) = g.value(prompts).dims2("align")?;
        if n_series != n_prompts {
            return shape_err(
                "align",
                format!("{n_series} series tokens vs {n_prompts} prompt tokens"),
            );
        }
        let q = self.query.forward(g, params, series)?; // N×C
        let k = self.key.forward(g, params, prompts)?; // N×E
        let v = self.value.forward(g, params, prompts)?; // N×E
        let qt = g.transpose(q)?; // C×N
        let scores = g.matmul(qt, k)?; // C×E, contracted over variables
        let similarity = g.softmax(scores, 1)?;
        let vt = g.transpose(v)?; // E×N
        let gathered = g.matmul(similarity, vt)?; // C×N
        let gathered = g.transpose(gathered)?; // N×C
        let projected = self.output.forward(g, params, gathered)?;
        let aligned = g.add(projected, series)?;
        Ok((aligned, similarity))
    }
}

/// Every intermediate of one forward pass, token-major.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `N × C`
    pub embedded: Var,
    /// `N × C`
    pub series_encoded: Var,
    /// `N × E`, absent without the prompt branch.
    pub prompt_encoded: Option<Var>,
    /// `C × E`
    pub similarity: Option<Var>,
    /// `N × C`
    pub aligned: Var,
    /// `N × C`
    pub decoded: Var,
    /// `M × N`, in normalized units.
    pub prediction: Var,
}

#[derive(Debug, Clone)]
pub struct TimeCma {
    pub config: ModelConfig,
    pub embedding: Linear,
    pub ts_encoder: Vec<PreLnEncoderLayer>,
    pub prompt_input: Option<Linear>,
    pub prompt_encoder: Vec<PreLnEncoderLayer>,
    pub alignment: Option<CrossModalAlignment>,
    pub decoder: Vec<PreLnDecoderLayer>,
    pub projection: Linear,
}

impl TimeCma {
    /// Registers every parameter in `params` and returns the model layout.
    pub fn new(config: ModelConfig, params: &mut ParamRegistry) -> Result<Self> {
        config.validate()?;
        let c = config.hidden_dim;
        let e = config.embed_dim;
        let ts_attn = AttentionConfig::new(c, config.heads, false)?;
        let prompt_attn = AttentionConfig::new(e, config.heads, false)?;
        let dec_attn = AttentionConfig::new(c, config.heads, config.causal_decoder)?;

        let embedding = Linear::register(params, "embed", config.lookback, c)?;
        let ts_encoder = (0..config.layers_ts)
            .map(|i| {
                PreLnEncoderLayer::register(
                    params,
                    &format!("ts_encoder.{i}"),
                    ts_attn,
                    c * config.ffn_ratio,
                )
            })
            .collect::<Result<_>>()?;
        let (prompt_input, prompt_encoder, alignment) = if config.use_prompt_branch {
            let input = if config.prompt_projection {
                Some(Linear::register(params, "prompt_input", e, e)?)
            } else {
                None
            };
            let encoder = (0..config.layers_prompt)
                .map(|i| {
                    PreLnEncoderLayer::register(
                        params,
                        &format!("prompt_encoder.{i}"),
                        prompt_attn,
                        e * config.ffn_ratio,
                    )
                })
                .collect::<Result<_>>()?;
            let align = CrossModalAlignment::register(params, "align", c, e)?;
            (input, encoder, Some(align))
        } else {
            (None, Vec::new(), None)
        };
        let decoder = (0..config.layers_dec)
            .map(|i| PreLnDecoderLayer::register(params, &format!("decoder.{i}"), dec_attn))
            .collect::<Result<_>>()?;
        let projection = Linear::register(params, "projection", c, config.horizon)?;

        Ok(Self {
            config,
            embedding,
            ts_encoder,
            prompt_input,
            prompt_encoder,
            alignment,
            decoder,
            projection,
        })
    }

    /// Fresh registry seeded with `seed`, plus the model.
    pub fn init(config: ModelConfig, seed: u64) -> Result<(Self, ParamRegistry)> {
        let mut params = ParamRegistry::new(seed);
        let model = Self::new(config, &mut params)?;
        Ok((model, params))
    }

    /// Shared `T → C` map applied to each variable's whole normalized
    /// lookback: `T × N` in, `N × C` out.
    pub fn inverted_embed(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        lookback: Var,
    ) -> Result<Var> {
        let (t, _) = g.value(lookback).dims2("inverted_embed")?;
        if t != self.config.lookback {
            return shape_err(
                "inverted_embed",
                format!("lookback {t}, model expects {}", self.config.lookback),
            );
        }
        let tokens = g.transpose(lookback)?;
        self.embedding.forward(g, params, tokens)
    }

    pub fn ts_encode(&self, g: &mut Graph, params: &ParamRegistry, embedded: Var) -> Result<Var> {
        encode_stack(&self.ts_encoder, g, params, embedded)
    }

    /// `N × E` stored embeddings through the optional input map and the prompt encoder.
    pub fn prompt_encode(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        prompts: Var,
    ) -> Result<Var> {
        let (_, e) = g.value(prompts).dims2("prompt_encode")?;
        if e != self.config.embed_dim {
            return shape_err(
                "prompt_encode",
                format!(
                    "embedding width {e}, model expects {}",
                    self.config.embed_dim
                ),
            );
        }
        let h = match &self.prompt_input {
            Some(lin) => lin.forward(g, params, prompts)?,
            None => prompts,
        };
        encode_stack(&self.prompt_encoder, g, params, h)
    }

    /// Decoder stack; cross-attention keys and values come from `aligned`.
    pub fn decode(&self, g: &mut Graph, params: &ParamRegistry, aligned: Var) -> Result<Var> {
        self.decoder
            .iter()
            .try_fold(aligned, |h, layer| layer.forward(g, params, h, aligned))
    }

    /// Shared `C → M` map per variable: `N × C` in, `M × N` out (normalized units).
    pub fn project(&self, g: &mut Graph, params: &ParamRegistry, decoded: Var) -> Result<Var> {
        let out = self.projection.forward(g, params, decoded)?;
        g.transpose(out)
    }

    /// Full forward pass on normalized inputs.
    ///
    /// `lookback` is the `T × N` instance-normalized lookback and
    /// `prompts` the `N × E` prompt embeddings of the same window.
    pub fn forward(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        lookback: Var,
        prompts: Var,
    ) -> Result<ForwardTrace> {
        let embedded = self.inverted_embed(g, params, lookback)?;
        let series_encoded = self.ts_encode(g, params, embedded)?;
        let (prompt_encoded, similarity, aligned) = match &self.alignment {
            Some(align) => {
                let l = self.prompt_encode(g, params, prompts)?;
                let (aligned, sim) = align.forward(g, params, series_encoded, l)?;
                (Some(l), Some(sim), aligned)
            }
            None => (None, None, series_encoded),
        };
        let decoded = self.decode(g, params, aligned)?;
        let prediction = self.project(g, params, decoded)?;
        g.value(prediction).check_finite("forward")?;
        Ok(ForwardTrace {
            embedded,
            series_encoded,
            prompt_encoded,
            similarity,
            aligned,
            decoded,
            prediction,
        })
    }

    /// Records the window's normalized lookback and prompt matrix as constants
    /// and runs the forward pass.
    pub fn forward_window(
        &self,
        g: &mut Graph,
        params: &ParamRegistry,
        window: &TimeSeriesWindow,
        prompts: &[f32],
    ) -> Result<ForwardTrace> {
        let n = window.num_variables;
        let lookback = g.constant(&[window.lookback_len, n], window.normalized_lookback())?;
        let prompts = g.constant(&[n, self.config.embed_dim], prompts.to_vec())?;
        self.forward(g, params, lookback, prompts)
    }

    /// Forecast in the window's original units (`M × N`, row-major).
    pub fn predict(
        &self,
        params: &ParamRegistry,
        window: &TimeSeriesWindow,
        prompts: &[f32],
    ) -> Result<Vec<f32>> {
        let mut g = Graph::new();
        let trace = self.forward_window(&mut g, params, window, prompts)?;
        Ok(revin_denormalize(
            g.data(trace.prediction),
            &window.norm_stats,
        ))
    }

    /// Zeroes every residual branch (encoder/decoder output projections,
    /// second FFN layers and `ψv`/`ωc`), which makes each block the identity.
    pub fn zero_residual_branches(&self, params: &mut ParamRegistry) {
        for layer in self.ts_encoder.iter().chain(&self.prompt_encoder) {
            layer.zero_residual_branches(params);
        }
        for layer in &self.decoder {
            layer.zero_residual_branches(params);
        }
        if let Some(a) = &self.alignment {
            a.value.zero(params);
            a.output.zero(params);
        }
    }
}

/// Loss terms of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub prediction: Var,
    pub regularization: Option<Var>,
}

/// `L = mean((ŷ − y)²) + λ·Σ w²` over every `Weight` parameter in `params`.
pub fn loss(
    g: &mut Graph,
    prediction: Var,
    target: Var,
    params: &ParamRegistry,
    lambda: f32,
) -> Result<LossTerms> {
    let diff = g.sub(prediction, target)?;
    let sq = g.square(diff);
    let pred_loss = g.mean(sq);
    if lambda == 0.0 {
        return Ok(LossTerms {
            total: pred_loss,
            prediction: pred_loss,
            regularization: None,
        });
    }
    let weights: Vec<String> = params
        .iter()
        .filter(|(_, _, kind)| *kind == ParamKind::Weight)
        .map(|(name, _, _)| name.to_string())
        .collect();
    let mut reg: Option<Var> = None;
    for name in &weights {
        let w = g.param(params, name)?;
        let sq = g.square(w);
        let s = g.sum(sq);
        reg = Some(match reg {
            Some(acc) => g.add(acc, s)?,
            None => s,
        });
    }
    let Some(reg) = reg else {
        return Ok(LossTerms {
            total: pred_loss,
            prediction: pred_loss,
            regularization: None,
        });
    };
    let scaled = g.scale(reg, lambda);
    let total = g.add(pred_loss, scaled)?;
    Ok(LossTerms {
        total,
        prediction: pred_loss,
        regularization: Some(reg),
    })
}

/// Number of trainable scalars.
pub fn count_params(params: &ParamRegistry) -> usize {
    params.count_scalars()
}
