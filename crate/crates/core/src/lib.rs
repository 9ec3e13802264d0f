//! Lazy reachability checking for programs running under TSO.
//!
//! The crate decides whether a goal state of a concurrent program is
//! reachable under the x86 total-store-order memory model by repeatedly
//! solving SC reachability. A robustness oracle finds computations in which
//! a delayed store makes TSO behave differently from SC; the program is
//! then extended with code that emulates those delays under SC, and the
//! process repeats until the goal is reached or no witness remains.

pub mod hb;
pub mod lazy;
pub mod oracle;
pub mod program;
pub mod semantics;
