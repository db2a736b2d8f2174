//! Detection and masking of single-crystal diffraction spots in 2D powder
//! X-ray diffraction images.
//!
//! Two maskers are provided:
//!
//! - [`asm::auto_spot_mask`], a statistical baseline that walks thin radial
//!   shells around the beam center and flags pixels far above the shell median.
//! - [`gbdt`], a histogram gradient-boosted tree classifier trained per pixel
//!   on intensity, scattering angle and (optionally) pixel location.
//!
//! [`synth`] generates synthetic frames with exact ground-truth masks, and
//! [`pipeline`] holds the evaluation protocol (folds, grid search, metrics,
//! a KNN reference classifier).

pub mod asm;
pub mod error;
pub mod features;
pub mod gbdt;
pub mod geometry;
pub mod imagegrid;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{DetectorGeometry, PolarMaps};
pub use imagegrid::{Image, MaskMap};
