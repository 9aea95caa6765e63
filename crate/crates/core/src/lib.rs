//! Resource allocation for downlink OFDMA-SDMA with minimum-rate users.
//!
//! The crate computes a Lagrangian upper bound on the weighted sum rate,
//! a feasible allocation derived from the dual solution, an exact
//! enumeration oracle for small systems and a weight-adjustment baseline,
//! plus a small harness for Monte Carlo sweeps over these methods.
//!
//! Rates are handled in nats internally and reported in bits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod channel;
pub mod dual;
pub mod feasible;
pub mod numkernel;
pub mod par;
pub mod poweralloc;
pub mod zfcore;

pub use baselines::{enumerate_exact, penalty_objective, solve_unconstrained, weight_adjust_solve, WeightAdjustParams};
pub use bench::{aggregate, run_scenario, RunOptions, RunSummary, ScenarioConfig};
pub use channel::{generate_instance, InstanceSpec, ProblemInstance};
pub use dual::{dual_value, solve_dual, DualParams, DualPoint, DualSolution};
pub use feasible::{dual_feasible_solve, FeasibleSearchParams, Method, SolveReport};
pub use poweralloc::{beamformers_from_power, compute_betas, solve_power_allocation, Allocation, Assignment};
pub use zfcore::{build_catalog, enumerate_sdma_sets, SdmaSet, SetCatalog};
