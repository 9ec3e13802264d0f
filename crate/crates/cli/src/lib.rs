//! Front end for the lazy TSO reachability checker: runs one analysis on a
//! program file, or a whole corpus against expected verdicts.

pub mod bench;
pub mod check;
pub mod report;

pub use bench::{run_bench, BenchRow, Expectation};
pub use check::{check, load_program, CheckOptions, Mode};
pub use report::{exit_code, RunReport, VerdictKind};
