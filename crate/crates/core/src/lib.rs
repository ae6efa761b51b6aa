//! Channel-estimation laboratory for rapidly time-varying OFDM.
//!
//! * [`ofdm_channel`] simulates doubly-selective fading with intercarrier
//!   interference.
//! * [`estimators`] holds LS + linear interpolation, single-tap hard
//!   decisions and a 2D LMMSE comparator.
//! * [`nn`] is a small tensor/layer engine with reverse-mode gradients and Adam.
//! * [`icinet`] builds the ICI-aware PreDNN + CasResNet estimator and its
//!   sequential and end-to-end training.
//! * [`harness`] generates datasets, runs the MSE experiments and drives the CLI.

pub mod error;
pub mod estimators;
pub mod fsutil;
pub mod grid;
pub mod harness;
pub mod icinet;
pub mod modulation;
pub mod nn;
pub mod ofdm_channel;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{ComplexGrid, Grid};
