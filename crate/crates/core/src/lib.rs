//! Surgical workflow anticipation from instrument bounding boxes.
//!
//! Per-frame detections become a spatial graph whose nodes are the
//! instrument classes plus a fixed center-viewpoint node. A graph
//! convolution stack mixes node features inside each frame, a two-stage
//! causal dilated temporal network summarizes the history, and a
//! multi-horizon head regresses, for every class and horizon `h`, the
//! minutes remaining until the class next occurs, clipped to `[0, h]`.
//!
//! Modules:
//! - [`numerics`]: tensors, reverse-mode tape, Adam.
//! - [`graph`]: roster, adjacency and its normalization, node features.
//! - [`network`]: the model, batch and streaming.
//! - [`anticipation`]: remaining-time targets, metrics and training loss.
//! - [`pipeline`]: file formats, synthetic data, training, evaluation,
//!   ablation and checkpoints.
//! - [`cli`]: the `anticipate` executable.

pub mod anticipation;
pub mod cli;
pub mod error;
pub mod graph;
pub mod network;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
