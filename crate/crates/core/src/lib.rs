//! Rigid-motion artifact synthesis and detection for 3D brain MRI.
//!
//! The crate is organised the way data flows through it:
//!
//! - [`volume`]: volume/slice containers, NIfTI-1 and MRVOL ingestion,
//!   normalization, slice extraction, cropping and image export.
//! - [`motion`]: per-line rigid pose schedules and k-space line splicing.
//! - [`fft`]: separable 3D DFT used by the motion simulator.
//! - [`nn`]: the three-conv / five-dense slice classifier, trained with Adam.
//! - [`gradcam`]: class activation maps over the last convolutional layer.
//! - [`metrics`]: AES, Otsu, rank correlation, agreement and ROC statistics.
//! - [`pipeline`]: phantoms, dataset building, training/inference drivers
//!   and JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod error;
pub mod fft;
pub mod gradcam;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{Slice2D, Volume3D};
