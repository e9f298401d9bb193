//! Orchestration engine that turns a hardware design specification into a
//! verified reference model and testbench pair.
//!
//! A rubric-driven planner sizes the work, two generators produce the model
//! and the testbench concurrently, a configurable toolchain compiles and runs
//! them, and an arbiter routes each failure to the artifact at fault. The
//! specification stays pinned in every prompt through [`context`].

pub mod analytics;
pub mod context;
pub mod evo;
pub mod gateway;
pub mod planner;
pub mod session;
pub mod sim;
