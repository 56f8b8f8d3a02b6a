//! Class-agnostic foreground segmentation ("pixel objectness") and the tools
//! built on it: foreground-aware seam carving, object-aware image retrieval,
//! and the segmentation/localization evaluation protocol.

pub mod baseline;
pub mod error;
pub mod metrics;
pub mod net;
pub mod postprocess;
pub mod raster;
pub mod retarget;
pub mod retrieval;
pub mod seeds;
pub mod training;

pub use error::{Error, Result};
