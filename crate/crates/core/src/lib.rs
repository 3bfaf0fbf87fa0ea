//! Dataset engineering and detection evaluation for animal detection in
//! video.
//!
//! The crate is organised around a handful of batch operations:
//!
//! * [`geometry`]: boxes, binary masks, overlap and box-to-box transforms.
//! * [`sampling`]: dataset manifests and reproducible train/test split plans.
//! * [`compositor`]: copy-paste synthesis of training images onto new
//!   backgrounds, with either mask pasting or mask-free Gaussian blending.
//! * [`maskprop`]: propagating annotated masks along a sequence and
//!   refining masks from edge maps.
//! * [`evaluator`]: mAP, mean recall-precision (mRP) and class-agnostic
//!   recall-precision (cRP) with their operating thresholds.
//! * [`fusion`]: detection/tracker association over video and multi-model
//!   detection pooling.
//!
//! Everything is deterministic: identical inputs and seed give identical
//! outputs regardless of how many worker threads run.

pub mod compositor;
pub mod error;
pub mod evaluator;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod maskprop;
mod par;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{BinaryMask, BoundingBox, BoxTransform};

/// Tool version echoed into every artifact's provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of the on-disk formats (manifest CSV, plan JSON, report JSON,
/// detection CSV). Bumped whenever a column or key changes meaning.
pub const FORMAT_VERSION: u32 = 1;
