//! Cost-minimal placement of barriers, dependency uses and
//! acquire/release modes for functions annotated with ordering
//! constraints.
//!
//! The pipeline: [`ir::parse`] and [`ir::validate`], then
//! [`compile::compile`], which normalizes the control-flow graph, resolves
//! and closes the constraints, builds the Boolean problem and solves it
//! exactly. [`verify`] re-checks plans independently.

pub mod arch;
pub mod compile;
pub mod constraints;
pub mod corpus;
pub mod deps;
pub mod emit;
pub mod encode;
pub mod graph;
pub mod ir;
pub mod solver;
pub mod verify;
