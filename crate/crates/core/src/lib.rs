//! Motion-tube activity recognition.
//!
//! The pipeline segments a video into overlapping snippets, tracks moving
//! regions as motion tubes (dense optical flow, trajectory clustering, action
//! boxes, greedy linking), encodes each snippet's motion as a bag of HOOF
//! words, pairs it with a static appearance descriptor, fuses the two domains
//! under a controllable contribution ratio, and classifies the fused vector
//! sequence with an LSTM (with a random-forest baseline for comparison).

pub mod clustering;
pub mod config;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod feature;
pub mod frame;
pub mod fusion;
pub mod pipeline;
pub mod rng;
pub mod segment;
pub mod synth;
pub mod temporal;
pub mod trajectory;
pub mod tubes;
pub mod vten;

pub use error::{Error, Result};
