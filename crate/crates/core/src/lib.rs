//! Building blocks for synthetic-occlusion video datasets: overlaying
//! occluders on visible-object clips, screening candidate masks, turning still
//! images into short clips, stitching window-limited completions, and scoring
//! completions against ground truth.

pub mod check;
pub mod codec;
pub mod error;
pub mod frame;
pub mod image2video;
pub mod manifest;
pub mod mask;
pub mod metrics;
pub mod occluder;
pub mod overlay;
pub mod pipeline;
pub mod stitch;
pub mod synthetic;

pub use error::{Error, Result};
pub use frame::{DepthMap, Frame, VideoClip};
pub use mask::{BBox, Mask};
