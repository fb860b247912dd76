//! Despeckling toolkit for envelope-detected ultrasound images.
//!
//! The main entry point is [`pipeline::despeckle`], which whitens the image
//! spectrum, moves to the log domain, shrinks dual-tree complex wavelet
//! coefficients with an interscale-driven adaptive threshold and maps the
//! result back to intensities. Supporting modules provide a deterministic
//! speckle simulator, two comparison filters and the quality metrics used to
//! rank them.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod dtcwt;
pub mod error;
pub mod grid;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod shrink;
pub mod specksim;
pub mod specteq;

pub use error::{Error, Result};
pub use grid::{ComplexGrid, Grid, RealGrid};
pub use image::Image;

pub use rustfft::num_complex::Complex64;
