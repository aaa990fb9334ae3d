//! Experiment harness for `jointprior-core`: config files, dataset I/O,
//! simulation, sweeps and result emission.

pub mod config;
pub mod data_io;
pub mod error;
pub mod linear;
pub mod loglinear;
pub mod output;
pub mod simulate;
pub mod tasks;
