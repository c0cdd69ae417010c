//! Diffusion-denoiser-aided gyrocompassing.
//!
//! Stationary gyro recordings carry the earth rotation rate; the heading can be read off
//! the horizontal channels. This crate simulates such recordings, trains a diffusion
//! denoiser and a recurrent heading regressor on them, and compares the learned pipeline
//! against classical averaging-based gyrocompassing.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod diffusion;
pub mod error;
pub mod geo;
pub mod heading;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod seeds;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
