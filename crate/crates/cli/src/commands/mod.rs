pub mod analyze;
pub mod calibrate;
pub mod detect;
pub mod synth;
pub mod train;
