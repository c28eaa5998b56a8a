//! Benchmark harness for the SLDG transport schemes: case registry,
//! time-stepping runner, error/order tables, and the file exporters behind
//! the command-line interface.

pub mod cases;
pub mod config;
pub mod io;
pub mod runner;
pub mod table;
