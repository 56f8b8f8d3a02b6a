pub mod dataset;
pub mod synth;
pub mod train;

pub use dataset::*;
pub use synth::*;
pub use train::*;
