//! Topology-aware deep joint source-channel coding.
//!
//! Persistent homology (cubical for images, Vietoris–Rips for latent point
//! clouds), Wasserstein diagram distances with gradients, a small
//! reverse-mode autodiff engine, a convolutional encoder/decoder, simulated
//! AWGN and Rayleigh channels, and the training and evaluation loops tying
//! them together.

pub mod autodiff;
pub mod channel;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod cubical;
pub mod diagram;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod net;
pub mod pgm;
pub mod rips;
pub mod rng;
pub mod synth;
pub mod topo_loss;
pub mod train;
pub(crate) mod union_find;
pub mod wasserstein;

pub use error::{Error, Result};
