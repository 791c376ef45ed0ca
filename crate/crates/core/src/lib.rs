//! WCET bounds for loop-free programs by optimization modulo theory.
//!
//! The pipeline parses a program ([`ir`]), finds dominator-delimited
//! portions and their syntactic bounds ([`cfgkit`]), encodes semantics,
//! costs and cut constraints into a formula ([`encode`]), and maximizes the
//! total cost by binary search over an external SMT solver ([`solve`],
//! [`omt`]). [`bench`] holds the diamond generator, a path-enumeration
//! oracle and the scaling harness.

pub mod bench;
pub mod cfgkit;
pub mod encode;
pub mod ir;
pub mod omt;
pub mod par;
pub mod sexp;
pub mod solve;
