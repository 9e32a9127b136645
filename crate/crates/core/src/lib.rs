//! Culture-conditioned color palette generation and palette-guided
//! colorization.
//!
//! The crate covers the whole pipeline: color math ([`color`]), dataset
//! construction and corpus statistics ([`dataset`]), the multi-modal
//! context encoders ([`fusion`]), the autoregressive palette GAN
//! ([`palette_gan`]), the colorization GAN ([`colorizer`]) and the
//! evaluation harness ([`eval`]).

pub mod checkpoint;
pub mod color;
pub mod colorizer;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod imaging;
pub mod nn;
pub mod palette_gan;
pub mod toy;

pub use color::{Color, ColorSpace, Palette};
pub use error::{Error, Result};
