//! Simulation core for incentive-aligned verifiable outsourced computation.
//!
//! Users pay a fee to have a multiplication computed by a randomly drawn
//! solver and `n` verifiers. Disagreements go to a bisection game over
//! Merkleized traces, a trusted judge checks one elementary step, and
//! deposits of services caught reporting false results are burned.
//!
//! The crate is `no_std` (with `alloc`); IO, statistics and the CLI live in
//! the `vericomp` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actors;
pub mod game;
pub mod ledger;
pub mod protocol;
pub mod trace;

pub use actors::{
    assign_roles, populate_pool, produce_solution, verifier_stance, Behavior, BehaviorKind,
    ComputationService, DissentPolicy, RoleAssignment, ServicePool, SitePolicy, Solution, Stance,
};
pub use game::{
    build_matrix, dominant_strategies, expected_utility, nash_equilibria, pareto_efficient,
    GameParams, PayoffMatrix, SolverStrategy, StrategyProfile, VerifierStrategy,
};
pub use ledger::{Address, Amount, Gas, GasMeter, GasSchedule, Ledger, OpKind, Phase};
pub use protocol::{
    compare_roots, run_request, run_with_roles, settle, split_fee, Case, ComputationRequest,
    FeePolicy, Outcome, ProtocolConfig,
};
pub use trace::{bisect, judge_step, merkle_root, CorruptionSite, Decision, TraceTree};
