//! Salient-unit search for fine-tuning sequential networks.
//!
//! `bwft` implements a two-phase fine-tuning protocol over a minimal
//! differentiable layer library: a search phase scores every candidate unit of
//! adaptation (single layers, blocks delimited by non-weighting layers,
//! fixed-width sliding windows, or top-k ranked layer sets) by fine-tuning it
//! on a small data subset, then the winning unit is fine-tuned on the full
//! training split.
//!
//! The crate is organised around the pieces of that protocol:
//!
//! - [`tensor`], [`layer`], [`loss`], [`optim`], [`schedule`]: the network core
//!   (dense/conv layers, Adam, categorical cross-entropy, reduce-on-plateau).
//! - [`model`]: sequential models, the miniature backbone zoo, freeze masks,
//!   and immutable parameter snapshots.
//! - [`segmentation`]: candidate-unit enumeration (blocks, windows, rankings).
//! - [`dataset`]: synthetic source/target tasks with a plantable domain shift,
//!   stratified splitting, and a binary interchange format.
//! - [`engine`]: the fine-tune/search drivers and both baselines.
//! - [`report`]: CSV emission and the mean/variance summary table.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod layer;
pub mod loss;
pub mod model;
pub mod optim;
pub mod report;
pub mod rng;
pub mod schedule;
pub mod segmentation;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
