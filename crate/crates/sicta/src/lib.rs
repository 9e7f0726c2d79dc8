//! Simulator and exact analyzer for d-ary tree random-access protocols with
//! successive interference cancellation under gated access.
//!
//! The crate compares three models of the collision resolution interval on
//! identical random splitting trees — a slot-level receiver simulation, an
//! early-stop recursion that matches it exactly, and the Yu–Giannakis
//! recursion that overcounts for d > 2 — plus the classical no-SIC tree
//! algorithm. On top of the per-tree evaluators sit exact conditional
//! expectation tables (rational or double precision), throughput estimates,
//! and seeded, reproducible Monte Carlo experiments.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod evaluators;
pub mod montecarlo;
pub mod policy;
pub mod tree;
pub mod verify;

pub use analytic::{
    check_yg_relation, expected_cri_table, expected_cri_table_exact, multinomial_pmf,
    throughput_estimate, yg_closed_form_mst, ExpectedCriTable, Variant,
};
pub use error::{Error, Result};
pub use evaluators::{
    corrected_length, d_min, slot_level_cri, standard_ta_length, yg_length, CriBreakdown,
    Evaluator,
};
pub use montecarlo::{run_experiment, sweep, ExperimentConfig, RunSummary};
pub use policy::{Occupancy, SplitPolicy};
pub use tree::SplitTree;
