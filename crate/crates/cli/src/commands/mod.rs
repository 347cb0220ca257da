pub mod bench;
pub mod calibrate;
pub mod compare;
pub mod eval;
pub mod synth;
pub mod track;
