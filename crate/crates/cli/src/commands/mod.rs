pub mod diff;
pub mod eval;
pub mod retarget;
pub mod retrieve;
pub mod segment;
pub mod synth;
pub mod train;
