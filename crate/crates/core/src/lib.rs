//! TimeCMA: multivariate time-series forecasting with cross-modality alignment.
//!
//! The forecaster runs two encoders side by side. The first embeds every
//! variable's whole lookback window as one token (the "inverted" view) and
//! runs Pre-LN transformer layers over the variable tokens. The second runs
//! the same kind of encoder over last-token embeddings of per-variable text
//! prompts, precomputed once by a frozen language model and persisted in a
//! [`store::LastTokenStore`]. A channel-wise similarity between the two
//! streams retrieves prompt information into the series stream, and a Pre-LN
//! decoder plus a shared linear projection produce the forecast.
//!
//! Modules, bottom up:
//!
//! * [`tensor`]: dense f32 tensors, a reverse-mode tape, a parameter registry and AdamW.
//! * [`nn`]: attention, feed-forward and Pre-LN encoder/decoder layers.
//! * [`data`]: CSV loading, chronological splits, sliding windows, instance normalization.
//! * [`prompt`]: deterministic prompt rendering and the trend statistic.
//! * [`store`]: the binary last-token embedding store and a deterministic stub embedder.
//! * [`model`]: the full forecaster, its loss, parameter accounting and checkpoints.
//! * [`harness`]: experiment configs, training, evaluation, zero-shot transfer and benchmarking.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod prompt;
pub mod store;
pub mod tensor;

pub use error::{Error, Result};
