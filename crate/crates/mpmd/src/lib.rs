//! Simulation laboratory for online min-cost perfect matching with convex
//! delay costs.
//!
//! Requests arrive over time at the points of a finite metric space and
//! must be paired irrevocably; a committed pair costs the distance between
//! its endpoints plus a convex function of each request's waiting time.
//! The crate provides:
//!
//! * [`costfn`] — convex delay penalties with exact derivatives/inverses,
//! * [`metric`] — uniform and general finite metric spaces,
//! * [`instance`] — request streams, a JSON-lines codec, and generators,
//! * [`engine`] — a deterministic event-driven simulator,
//! * [`matchers`] — online policies (timer-based matcher and baselines),
//! * [`offline`] — exact offline optima and structured feasible bounds,
//! * [`adversary`] — an adaptive request source forcing high online cost,
//! * [`harness`] — experiment orchestration, ratio records, sweeps, CLI.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability; the `mpmd` binary exposes the same machinery as
//! subcommands.

pub mod adversary;
pub mod costfn;
pub mod engine;
pub mod harness;
pub mod instance;
pub mod matchers;
pub mod metric;
pub mod offline;

pub use costfn::TimeCostFunction;
pub use engine::{
    evaluate_costs, simulate, simulate_adaptive, simulate_traced, Match, MatchKind, OnlineMatcher,
    SimulationResult,
};
pub use instance::{Instance, Request};
pub use matchers::MatcherSpec;
pub use metric::MetricSpace;
