//! Decomposition of grayscale image sequences into static background, dynamic
//! background, Gaussian noise and a TV-smooth sparse foreground, followed by
//! two-stage region-growth segmentation of the foreground into a binary
//! tubular mask, with CNR and precision/recall evaluation.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`tensor`] / [`fft`] / [`tsvd`]: third-order tensor algebra (t-product,
//!   t-SVD, tensor nuclear norm, singular value thresholding),
//! - [`tvgrad`]: circular finite-difference gradients, the TV/l1 norm and the
//!   FFT-diagonalized screened-Poisson style solve,
//! - [`solver`]: the ADMM loop producing a [`solver::Decomposition`],
//! - [`segment`]: seed selection, region growth, edge enhancement and the
//!   two-stage region growth segmentation,
//! - [`metrics`]: contrast-to-noise ratio and recall/precision/F-measure,
//! - [`phantom`]: synthetic sequences with exact ground truth,
//! - [`io`]: image-sequence and raw tensor file I/O.

pub mod error;
pub mod fft;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod segment;
pub mod solver;
pub mod tensor;
pub mod tsvd;
pub mod tvgrad;

pub use error::{Error, Result};
pub use tensor::{CTensor3, Tensor3};
