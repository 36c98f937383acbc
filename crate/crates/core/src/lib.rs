//! Core library behind the `satex` tool: solver registry, deterministic
//! container recipes, execution backends, DIMACS/proof tooling, the
//! campaign harness, and the content-addressed artifact archive.

pub mod archive;
pub mod cnf;
pub mod harness;
pub mod proof;
pub mod recipes;
pub mod registry;
pub mod runtime;
