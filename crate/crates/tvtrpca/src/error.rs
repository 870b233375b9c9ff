//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by decomposition, segmentation, metrics and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// An inverse DFT that should have produced a real tensor left too much
    /// imaginary mass behind, which indicates a conjugate-symmetry bug
    /// upstream rather than ordinary rounding.
    #[error("imaginary residue {residue:.3e} exceeds bound {bound:.3e} after inverse DFT")]
    ImaginaryResidue { residue: f64, bound: f64 },

    #[error("singular value decomposition did not converge on frontal slice {slice}")]
    SvdFailed { slice: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {context} at iteration {iteration}")]
    NonFinite { context: &'static str, iteration: usize },

    #[error("foreground frame has no positive support; nothing to segment")]
    EmptyForeground,

    #[error("seed disk of radius {radius} does not fit a {rows}x{cols} image")]
    DiskTooLarge { radius: usize, rows: usize, cols: usize },

    #[error("{region} region is empty")]
    EmptyRegion { region: &'static str },

    #[error("background region is constant (zero standard deviation); CNR undefined")]
    DegenerateBackground,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("bad input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
