//! Mouth-ROI frames and the pixel-level primitives the features build on.

mod color;
mod frame;
pub(crate) use frame::lerp;
mod histogram;
pub mod ppm;

pub use color::{srgb_to_lab, srgb_to_luv, LabGrid, LuvGrid};
pub use frame::{resample_bilinear, to_grayscale, GrayGrid, RoiFrame};
pub use histogram::{intensity_histogram, Histogram256};
