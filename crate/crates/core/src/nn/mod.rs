// SPDX-License-Identifier: MIT OR Apache-2.0

//! Feedforward ReLU networks: exact embeddings of contrast scans, input
//! preprocessing, Adam training and gradient checking.
//!
//! Every layer computes `W a − b`; hidden layers then apply `max(·, 0)`.

mod embed;
mod gradcheck;
mod network;
mod preprocess;
mod train;

pub use embed::{embed_cusum, embed_directions, embed_glr, CusumVariant};
pub use gradcheck::{grad_check, KINK_NUDGE, REL_FLOOR};
pub use network::{Architecture, Forward, Head, Layer, Network, NETWORK_FORMAT, NETWORK_SCHEMA_VERSION};
pub use preprocess::{preprocess, unit_scale, Channel, Preprocess, Step};
pub use train::{
    design_matrix, loss_and_gradient, train, train_from, train_logged, Gradient, InverseTimeDecay, TrainConfig,
    TrainOutcome,
};
