//! Focused integration of multi-focus visible and infrared images.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod filter;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod ssf;
pub mod structure;
pub mod texture;

pub use error::{Error, Result};
pub use image::{BinaryMask, GrayImage, RgbImage};
