//! Library side of the `cmpswhe` command: error lab, benchmark, demos and
//! residue images, kept here so tests can drive them without the binary.

pub mod bench;
pub mod demo;
pub mod errorlab;
pub mod residue;
