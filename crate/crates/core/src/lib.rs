//! Machine-generated text detection at desk scale.
//!
//! A small RoBERTa-style encoder, LoRA adapters, bidirectional LSTM/GRU
//! heads and a causal language-model loss probe, all with hand-written
//! backward passes checked against finite differences.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `mgtd` binary exposes the same operations as subcommands.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod gradsuite;
pub mod eval;
pub mod heads;
pub mod layers;
pub mod numerics;
pub mod pipeline;
pub mod probe;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
