use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pipeline::SplitSet;
use crate::error::{Error, Result};
use crate::model::{loss, TimeCma};
use crate::tensor::{AdamW, AdamWConfig, Graph, ParamRegistry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub optimizer: AdamWConfig,
    pub epochs: usize,
    /// Epochs without a validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// One row of the training log. Losses are mean squared errors on the
/// instance-normalized scale; `train_loss` averages the per-window losses
/// seen during the epoch, before each optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_params: ParamRegistry,
    pub steps: u64,
}

/// Normalized-space prediction loss of one window, optionally accumulating
/// `scale · ∇L` (with the L2 term) into `params`.
pub fn window_loss(
    model: &TimeCma,
    params: &mut ParamRegistry,
    set: &SplitSet,
    index: usize,
    grad_scale: Option<f32>,
) -> Result<f64> {
    let window = &set.windows[index];
    let mut g = Graph::new();
    let trace = model.forward_window(&mut g, params, window, &set.prompts[index])?;
    let target = g.constant(
        &[window.horizon, window.num_variables],
        window.normalized_target(),
    )?;
    let lambda = if grad_scale.is_some() {
        model.config.lambda
    } else {
        0.0
    };
    let terms = loss(&mut g, trace.prediction, target, params, lambda)?;
    let value = g.data(terms.prediction)[0] as f64;
    if !value.is_finite() || !g.data(terms.total)[0].is_finite() {
        return Err(Error::NonFinite(format!(
            "loss is {value} on window {} (start row {})",
            window.window_id, window.start_row
        )));
    }
    if let Some(scale) = grad_scale {
        let scaled = g.scale(terms.total, scale);
        g.backward_into(scaled, params)?;
    }
    Ok(value)
}

/// Mean normalized-space MSE over every window of `set`.
pub fn mean_loss(model: &TimeCma, params: &ParamRegistry, set: &SplitSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Usage(format!("{} split has no windows", set.split)));
    }
    let mut scratch = params.clone();
    let mut total = 0.0;
    for i in 0..set.len() {
        total += window_loss(model, &mut scratch, set, i, None)?;
    }
    Ok(total / set.len() as f64)
}

/// Minibatch AdamW with per-epoch validation and best-checkpoint selection.
///
/// Each epoch visits the training windows in a ChaCha-seeded permutation
/// (seed `opts.seed + epoch`); a batch's gradients are the mean over its
/// windows. When `val` is empty the training loss drives selection.
pub fn fit(
    model: &TimeCma,
    params: &mut ParamRegistry,
    train: &SplitSet,
    val: &SplitSet,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Usage("training split has no windows".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut optim = AdamW::new(opts.optimizer);
    let mut log = Vec::with_capacity(opts.epochs);
    let mut best: Option<(usize, f64, ParamRegistry)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=opts.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(opts.batch_size) {
            params.zero_grad();
            let scale = 1.0 / batch.len() as f32;
            for &i in batch {
                epoch_loss +=
                    window_loss(model, params, train, i, Some(scale)).map_err(|e| match e {
                        Error::NonFinite(msg) => Error::NonFinite(format!(
                            "epoch {epoch}, step {}: {msg}",
                            optim.steps_taken() + 1
                        )),
                        other => other,
                    })?;
            }
            optim.step(params)?;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = if val.is_empty() {
            train_loss
        } else {
            mean_loss(model, params, val)?
        };
        let row = EpochLog {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&row);
        log.push(row);

        if best.as_ref().is_none_or(|(_, b, _)| val_loss < *b) {
            best = Some((epoch, val_loss, params.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if opts.patience > 0 && epoch - best_epoch >= opts.patience {
            break;
        }
    }

    let (best_epoch, best_val_loss, mut best_params) = best.expect("at least one epoch ran");
    best_params.zero_grad();
    Ok(TrainOutcome {
        log,
        best_epoch,
        best_val_loss,
        best_params,
        steps: optim.steps_taken(),
    })
}
