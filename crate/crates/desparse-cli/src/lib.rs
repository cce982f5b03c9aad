//! Library surface of the experiment runner, shared between the `desparse`
//! binary and the test suites.

pub mod config;
pub mod io;
pub mod runner;
