//! Trace-driven simulation of a Function-as-a-Service cluster together with
//! a dual-objective (carbon + SLO) container scheduler and autoscaler.
//!
//! The crate is organised bottom-up:
//!
//! * [`workload`] ingests function profiles and invocation traces and turns
//!   per-epoch forecasts into concrete requests.
//! * [`envmodel`] holds the physical models: node power, cooling, carbon,
//!   cost, water-related carbon and cold-start latency.
//! * [`simcore`] is a deterministic discrete-event simulator for one epoch.
//! * [`casa`] is the dual-objective local-search optimizer.
//! * [`baselines`] contains stand-in comparison policies and a brute-force
//!   oracle for tiny instances.
//! * [`harness`] wires everything into a multi-epoch experiment runner.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod casa;
pub mod envmodel;
pub mod harness;
mod ids;
pub mod simcore;
pub mod workload;

pub use ids::FunctionId;
