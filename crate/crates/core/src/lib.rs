//! Hierarchical multi-task sequence tagging for dialogue understanding.
//!
//! Three stacked taggers label every token of an utterance with a dialogue
//! act, a frame and a frame argument (IOB2 encoded). Each level is a BiLSTM
//! encoder, optionally followed by self-attention, with the token embeddings
//! re-injected into the next level through shortcut connections and a
//! linear-chain CRF (or per-token softmax) on top.
//!
//! The crate is `no_std` (with `alloc`) and holds the full computational
//! stack: a small reverse-mode differentiation engine, the neural layers, the
//! assembled model, corpus handling, training and the evaluation battery.
//! File formats and the command-line interface live in the `hermit-nlu`
//! companion crate.

#![no_std]
#![cfg_attr(test, allow(clippy::needless_range_loop))]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod layers;
pub mod math;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
