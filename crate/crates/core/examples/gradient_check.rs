//! Compares the tape's analytic gradients for a Pre-LN encoder layer with
//! central finite differences of a random projection of its output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timecma::nn::{AttentionConfig, PreLnEncoderLayer};
use timecma::tensor::{Graph, ParamRegistry, Tensor};

fn main() -> timecma::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (tokens, dim) = (4, 8);
    let mut params = ParamRegistry::new(7);
    let layer =
        PreLnEncoderLayer::register(&mut params, "enc", AttentionConfig::new(dim, 2, false)?, 16)?;
    for (_, t) in params.iter_mut() {
        t.data
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }
    let x = Tensor::new(
        vec![tokens, dim],
        (0..tokens * dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    )?;
    let probe: Vec<f32> = (0..tokens * dim)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();

    // s = Σ probe ⊙ layer(x), a scalar whose gradient covers every output.
    let objective = |params: &ParamRegistry| -> timecma::Result<f64> {
        let mut g = Graph::new();
        let xv = g.leaf(x.clone());
        let y = layer.forward(&mut g, params, xv)?;
        Ok(g.data(y)
            .iter()
            .zip(&probe)
            .map(|(a, b)| (*a as f64) * (*b as f64))
            .sum())
    };

    let mut g = Graph::new();
    let xv = g.leaf(x.clone());
    let y = layer.forward(&mut g, &params, xv)?;
    let r = g.constant(&[tokens, dim], probe.clone())?;
    let weighted = g.mul(y, r)?;
    let s = g.sum(weighted);
    g.backward_into(s, &mut params)?;

    let h = 1e-3f32;
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let analytic = params.get(&name).unwrap().grad.clone().unwrap_or_default();
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..analytic.len() {
            let orig = params.get(&name).unwrap().data[i];
            params.get_mut(&name).unwrap().data[i] = orig + h;
            let up = objective(&params)?;
            params.get_mut(&name).unwrap().data[i] = orig - h;
            let down = objective(&params)?;
            params.get_mut(&name).unwrap().data[i] = orig;
            numeric.push((up - down) / (2.0 * h as f64));
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (*a as f64 - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        // The key bias has an exactly zero gradient, so scale by 1 + |grad|.
        println!(
            "{name:<20} |grad| {norm:>9.4}  err {:.2e}",
            diff / (1.0 + norm)
        );
    }
    Ok(())
}
