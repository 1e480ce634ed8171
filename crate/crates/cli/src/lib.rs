//! File formats, solution analysis, tournament scoring and the benchmark
//! harness behind the `memplan` binary.

pub mod analyze;
pub mod bench;
pub mod format;
pub mod score;
