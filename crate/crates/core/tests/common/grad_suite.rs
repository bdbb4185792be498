//! Finite-difference cases for every parameterized operation, five random
//! shapes each.

use rand::Rng;
use timecma::model::{loss, CrossModalAlignment, ModelConfig, TimeCma};
use timecma::nn::{
    AttentionConfig, FeedForward, LayerNorm, Linear, MultiHeadAttention, PreLnDecoderLayer,
    PreLnEncoderLayer,
};
use timecma::tensor::ParamRegistry;

use super::{grad_check, random_tensor, randomize, rng, GradCheck};

pub const SHAPES_PER_OP: usize = 5;

#[derive(Debug)]
pub struct CaseResult {
    pub op: &'static str,
    pub shape: String,
    pub check: GradCheck,
}

fn finish(op: &'static str, shape: String, check: GradCheck) -> CaseResult {
    assert!(
        check.checked > 0 && check.tensors.iter().any(|t| t.grad_norm > 1e-3),
        "{op} {shape}: the check would be vacuous: {check:?}"
    );
    CaseResult { op, shape, check }
}

pub fn linear_cases() -> Vec<CaseResult> {
    let mut r = rng(1);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let (n, i, o) = (r.gen_range(1..6), r.gen_range(1..9), r.gen_range(1..9));
            let mut p = ParamRegistry::new(case as u64);
            let lin = Linear::register(&mut p, "lin", i, o).unwrap();
            randomize(&mut p, 10 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[n, i]);
            let rep = grad_check(&p, &[x], case as u64, |g, p, v| lin.forward(g, p, v[0]));
            finish("linear", format!("{n}x{i} -> {o}"), rep)
        })
        .collect()
}

pub fn layer_norm_cases() -> Vec<CaseResult> {
    let mut r = rng(2);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let (n, d) = (r.gen_range(1..6), r.gen_range(3..10));
            let mut p = ParamRegistry::new(case as u64);
            let ln = LayerNorm::register(&mut p, "ln", d).unwrap();
            randomize(&mut p, 20 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[n, d]);
            let rep = grad_check(&p, &[x], case as u64, |g, p, v| ln.forward(g, p, v[0]));
            finish("layer_norm", format!("{n}x{d}"), rep)
        })
        .collect()
}

fn heads_for(r: &mut impl Rng) -> (usize, usize) {
    let heads = r.gen_range(1..4);
    let hd = r.gen_range(1..4);
    (heads * hd, heads)
}

pub fn mhsa_cases() -> Vec<CaseResult> {
    let mut r = rng(3);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let n = r.gen_range(2..6);
            let (d, h) = heads_for(&mut r);
            let causal = case % 2 == 1;
            let mut p = ParamRegistry::new(case as u64);
            let attn = MultiHeadAttention::register(
                &mut p,
                "mhsa",
                AttentionConfig::new(d, h, causal).unwrap(),
            )
            .unwrap();
            randomize(&mut p, 30 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[n, d]);
            let rep = grad_check(&p, &[x], case as u64, |g, p, v| {
                attn.self_attend(g, p, v[0])
            });
            finish("mhsa", format!("{n}x{d}, {h} heads, causal={causal}"), rep)
        })
        .collect()
}

pub fn mhca_cases() -> Vec<CaseResult> {
    let mut r = rng(4);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let (a, b) = if case == 0 {
                (3, 5)
            } else {
                (r.gen_range(1..6), r.gen_range(2..6))
            };
            let (d, h) = heads_for(&mut r);
            let mut p = ParamRegistry::new(case as u64);
            let attn = MultiHeadAttention::register(
                &mut p,
                "mhca",
                AttentionConfig::new(d, h, false).unwrap(),
            )
            .unwrap();
            randomize(&mut p, 40 + case as u64, 1.0);
            let q = random_tensor(&mut r, &[a, d]);
            let kv = random_tensor(&mut r, &[b, d]);
            let rep = grad_check(&p, &[q, kv], case as u64, |g, p, v| {
                attn.cross_attend(g, p, v[0], v[1])
            });
            finish(
                "mhca",
                format!("{a} queries x {b} keys, dim {d}, {h} heads"),
                rep,
            )
        })
        .collect()
}

pub fn ffn_cases() -> Vec<CaseResult> {
    let mut r = rng(5);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let (n, d, f) = (r.gen_range(1..5), r.gen_range(2..6), r.gen_range(2..9));
            let mut p = ParamRegistry::new(case as u64);
            let ffn = FeedForward::register(&mut p, "ffn", d, f).unwrap();
            randomize(&mut p, 50 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[n, d]);
            let rep = grad_check(&p, &[x], case as u64, |g, p, v| ffn.forward(g, p, v[0]));
            finish("ffn", format!("{n}x{d}, inner {f}"), rep)
        })
        .collect()
}

pub fn encoder_cases() -> Vec<CaseResult> {
    let mut r = rng(6);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let n = r.gen_range(2..5);
            let (d, h) = heads_for(&mut r);
            let mut p = ParamRegistry::new(case as u64);
            let layer = PreLnEncoderLayer::register(
                &mut p,
                "enc",
                AttentionConfig::new(d, h, false).unwrap(),
                2 * d,
            )
            .unwrap();
            randomize(&mut p, 60 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[n, d]);
            let rep = grad_check(&p, &[x], case as u64, |g, p, v| layer.forward(g, p, v[0]));
            finish("pre_ln_encoder", format!("{n}x{d}, {h} heads"), rep)
        })
        .collect()
}

pub fn decoder_cases() -> Vec<CaseResult> {
    let mut r = rng(7);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let (n, m) = (r.gen_range(2..5), r.gen_range(2..5));
            let (d, h) = heads_for(&mut r);
            let mut p = ParamRegistry::new(case as u64);
            let layer = PreLnDecoderLayer::register(
                &mut p,
                "dec",
                AttentionConfig::new(d, h, true).unwrap(),
            )
            .unwrap();
            randomize(&mut p, 70 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[n, d]);
            let ctx = random_tensor(&mut r, &[m, d]);
            let rep = grad_check(&p, &[x, ctx], case as u64, |g, p, v| {
                layer.forward(g, p, v[0], v[1])
            });
            finish(
                "pre_ln_decoder",
                format!("{n}x{d}, context {m}, {h} heads"),
                rep,
            )
        })
        .collect()
}

pub fn align_cases() -> Vec<CaseResult> {
    let mut r = rng(8);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let (n, c, e) = (r.gen_range(1..6), r.gen_range(1..7), r.gen_range(2..7));
            let mut p = ParamRegistry::new(case as u64);
            let align = CrossModalAlignment::register(&mut p, "align", c, e).unwrap();
            randomize(&mut p, 80 + case as u64, 1.0);
            let h = random_tensor(&mut r, &[n, c]);
            let l = random_tensor(&mut r, &[n, e]);
            let rep = grad_check(&p, &[h, l], case as u64, |g, p, v| {
                Ok(align.forward(g, p, v[0], v[1])?.0)
            });
            finish("align", format!("N={n}, C={c}, E={e}"), rep)
        })
        .collect()
}

fn small_model_config(r: &mut impl Rng) -> ModelConfig {
    let heads = r.gen_range(1..3);
    ModelConfig {
        num_variables: r.gen_range(1..4),
        lookback: r.gen_range(2..6),
        horizon: r.gen_range(1..4),
        hidden_dim: heads * r.gen_range(1..4),
        embed_dim: heads * r.gen_range(1..4),
        heads,
        ffn_ratio: 2,
        ..ModelConfig::default()
    }
}

pub fn project_cases() -> Vec<CaseResult> {
    let mut r = rng(9);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let cfg = small_model_config(&mut r);
            let (model, _) = TimeCma::init(cfg.clone(), case as u64).unwrap();
            let mut p = ParamRegistry::new(case as u64);
            let proj = Linear::register(&mut p, "projection", cfg.hidden_dim, cfg.horizon).unwrap();
            assert_eq!(proj.weight, model.projection.weight);
            randomize(&mut p, 90 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[cfg.num_variables, cfg.hidden_dim]);
            let rep = grad_check(&p, &[x], case as u64, |g, p, v| model.project(g, p, v[0]));
            finish(
                "project",
                format!(
                    "N={}, C={} -> M={}",
                    cfg.num_variables, cfg.hidden_dim, cfg.horizon
                ),
                rep,
            )
        })
        .collect()
}

pub fn loss_cases() -> Vec<CaseResult> {
    let mut r = rng(10);
    (0..SHAPES_PER_OP)
        .map(|case| {
            let (m, n, d) = (r.gen_range(1..5), r.gen_range(1..5), r.gen_range(1..5));
            let mut p = ParamRegistry::new(case as u64);
            p.init_uniform("w", &[d, n], d).unwrap();
            p.init_zeros("b", &[n], timecma::tensor::ParamKind::Bias)
                .unwrap();
            randomize(&mut p, 100 + case as u64, 1.0);
            let x = random_tensor(&mut r, &[m, d]);
            let y = random_tensor(&mut r, &[m, n]);
            // λ large enough that the penalty's gradient is visible.
            let lambda = 0.1;
            let rep = grad_check(&p, &[x, y], case as u64, |g, p, v| {
                let w = g.param(p, "w")?;
                let b = g.param(p, "b")?;
                let pred = g.linear(v[0], w, b)?;
                Ok(loss(g, pred, v[1], p, lambda)?.total)
            });
            finish(
                "loss",
                format!("{m}x{n} from {d} features, lambda={lambda}"),
                rep,
            )
        })
        .collect()
}

pub fn all_cases() -> Vec<CaseResult> {
    [
        linear_cases as fn() -> Vec<CaseResult>,
        layer_norm_cases,
        mhsa_cases,
        mhca_cases,
        ffn_cases,
        encoder_cases,
        decoder_cases,
        align_cases,
        project_cases,
        loss_cases,
    ]
    .iter()
    .flat_map(|f| f())
    .collect()
}

/// Full model on a 2-variable toy: every parameter against central
/// differences of the training loss.
pub fn full_model_check() -> GradCheck {
    let cfg = ModelConfig {
        num_variables: 2,
        lookback: 6,
        horizon: 3,
        hidden_dim: 4,
        embed_dim: 4,
        heads: 2,
        ffn_ratio: 2,
        lambda: 1e-2,
        ..ModelConfig::default()
    };
    let (model, mut params) = TimeCma::init(cfg.clone(), 5).unwrap();
    randomize(&mut params, 55, 0.5);
    let mut r = rng(11);
    let lookback = random_tensor(&mut r, &[cfg.lookback, 2]);
    let prompts = random_tensor(&mut r, &[2, cfg.embed_dim]);
    let target = random_tensor(&mut r, &[cfg.horizon, 2]);
    super::loss_grad_check(&params, |g, p| {
        let lb = g.leaf(lookback.clone());
        let pr = g.leaf(prompts.clone());
        let y = g.leaf(target.clone());
        let trace = model.forward(g, p, lb, pr)?;
        Ok(loss(g, trace.prediction, y, p, cfg.lambda)?.total)
    })
}
