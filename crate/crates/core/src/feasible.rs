//! Feasible allocations from the dual solution.
//!
//! The dual's own allocation is tried first, then the power problem is
//! re-solved on the dual's assignment. If that still misses a rate floor,
//! the rate multipliers of the short users are raised step by step at fixed
//! `λ` until the per-subcarrier argmax yields an assignment whose power
//! problem is feasible.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ProblemInstance;
use crate::dual::{dual_value, solve_dual, DualError, DualEvaluation, DualParams, DualSolution};
use crate::poweralloc::{
    beamformers_from_power, single_user_max_rate_bits, solve_power_allocation, Allocation, Assignment, PowerError,
    RATE_TOL,
};
use crate::zfcore::{SetCatalog, ZfError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Zf(#[from] ZfError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{assignments} joint assignments exceed the enumeration cap of {cap}")]
    TooLarge { assignments: f64, cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DualBound,
    DualFeasible,
    WeightAdjust,
    Exact,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::DualBound,
        Method::DualFeasible,
        Method::WeightAdjust,
        Method::Exact,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::DualBound => "dual_bound",
            Method::DualFeasible => "dual_feasible",
            Method::WeightAdjust => "weight_adjust",
            Method::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.label() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of one method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub instance_id: String,
    pub method: Method,
    /// Weighted sum rate in bits with the instance weights; `None` when the
    /// method produced no allocation.
    pub objective_bits: Option<f64>,
    pub bound_bits: Option<f64>,
    pub gap_percent: Option<f64>,
    pub feasible: bool,
    pub iterations: usize,
    pub seconds: f64,
}

impl SolveReport {
    pub fn new(instance: &ProblemInstance, method: Method, objective_bits: Option<f64>, feasible: bool) -> Self {
        SolveReport {
            instance_id: instance.instance_id.clone(),
            method,
            objective_bits,
            bound_bits: None,
            gap_percent: None,
            feasible,
            iterations: 0,
            seconds: 0.0,
        }
    }

    /// Attaches the dual bound and recomputes the gap.
    pub fn with_bound(mut self, bound_bits: f64) -> Self {
        self.bound_bits = Some(bound_bits);
        self.gap_percent = self
            .objective_bits
            .filter(|_| self.feasible)
            .map(|u| gap_percent(bound_bits, u));
        self
    }
}

/// `100 (Φ* − U) / Φ*`.
pub fn gap_percent(bound_bits: f64, objective_bits: f64) -> f64 {
    if bound_bits == 0.0 {
        return if objective_bits == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    100.0 * (bound_bits - objective_bits) / bound_bits
}

/// Allocation (when one was produced) with its report.
#[derive(Debug, Clone)]
pub struct Solved {
    pub allocation: Option<Allocation>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeasibleSearchParams {
    /// Rate-multiplier increment; default `0.1 · max_k c_k`.
    pub delta: Option<f64>,
    pub j_max: usize,
}

impl Default for FeasibleSearchParams {
    fn default() -> Self {
        FeasibleSearchParams {
            delta: None,
            j_max: 200,
        }
    }
}

impl FeasibleSearchParams {
    fn delta_for(&self, instance: &ProblemInstance) -> Result<f64, SolveError> {
        let d = self
            .delta
            .unwrap_or_else(|| 0.1 * instance.weights().iter().cloned().fold(0.0, f64::max));
        if !(d > 0.0 && d.is_finite()) || self.j_max == 0 {
            return Err(SolveError::InvalidParams(format!(
                "delta must be positive and j_max ≥ 1 (delta = {d}, j_max = {})",
                self.j_max
            )));
        }
        Ok(d)
    }
}

/// Which step of the search produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleStage {
    DualAllocation,
    PowerRefit,
    MultiplierSearch { step: usize },
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct FeasibleOutcome {
    pub solved: Solved,
    pub stage: FeasibleStage,
    pub dual: DualSolution,
    /// Rate multipliers (per user) where the search stopped.
    pub final_mu: Vec<f64>,
}

/// True when the instance is provably infeasible: a negative dual value
/// (every feasible objective is non-negative) or an RT floor above what the
/// user could reach alone.
pub fn certified_infeasible(instance: &ProblemInstance, dual: &DualSolution) -> bool {
    dual.best_phi < 0.0
        || instance
            .rt_users()
            .iter()
            .zip(&instance.spec.d_min)
            .any(|(&k, &d)| single_user_max_rate_bits(instance, k) < d * (1.0 - RATE_TOL))
}

/// Allocation carried by a dual evaluation: sets, closed-form powers and
/// the zero-forcing beamformers built from them.
pub fn allocation_from_dual(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    ev: &DualEvaluation,
) -> Result<Allocation, SolveError> {
    let assignment = Assignment(ev.assignment(catalog));
    let powers: Vec<Vec<f64>> = ev
        .subcarriers
        .iter()
        .map(|s| s.members.iter().map(|m| m.p).collect())
        .collect();
    Ok(beamformers_from_power(instance, &assignment, &powers)?)
}

/// Solves the dual and then searches for a feasible allocation.
pub fn dual_feasible_solve(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    dual_params: &DualParams,
    search: &FeasibleSearchParams,
) -> Result<FeasibleOutcome, SolveError> {
    let start = Instant::now();
    let dual = solve_dual(instance, catalog, dual_params)?;
    let mut out = feasible_from_dual(instance, catalog, dual, search)?;
    out.solved.report.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// The search part on an already computed dual solution. It starts from the
/// last iterate and from the best one and keeps the better result.
pub fn feasible_from_dual(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    dual: DualSolution,
    search: &FeasibleSearchParams,
) -> Result<FeasibleOutcome, SolveError> {
    let start = Instant::now();
    let delta = search.delta_for(instance)?;
    let bound = dual.bound_bits();
    let dual_iters = dual.iterations();

    let mut found = search_from(instance, catalog, &dual.last, delta, search.j_max)?;
    if dual.best_point != dual.last.point {
        let best = dual_value(instance, catalog, &dual.best_point)?;
        let other = search_from(instance, catalog, &best, delta, search.j_max)?;
        let key = |s: &Search| (s.alloc.feasible, s.alloc.objective_bits);
        if key(&other) > key(&found) {
            found = Search {
                steps: found.steps + other.steps,
                ..other
            };
        } else {
            found.steps += other.steps;
        }
    }
    let Search {
        alloc,
        stage,
        steps,
        mu,
    } = found;
    let mut report = SolveReport::new(
        instance,
        Method::DualFeasible,
        Some(alloc.objective_bits),
        alloc.feasible,
    )
    .with_bound(bound);
    report.iterations = dual_iters + steps;
    report.seconds = start.elapsed().as_secs_f64();
    Ok(FeasibleOutcome {
        solved: Solved {
            allocation: Some(alloc),
            report,
        },
        stage,
        dual,
        final_mu: mu,
    })
}

struct Search {
    alloc: Allocation,
    stage: FeasibleStage,
    steps: usize,
    mu: Vec<f64>,
}

fn search_from(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    ev: &DualEvaluation,
    delta: f64,
    j_max: usize,
) -> Result<Search, SolveError> {
    let from_dual = allocation_from_dual(instance, catalog, ev)?;
    let lambda = ev.point.lambda;
    let mut mu = ev.point.mu.clone();
    let mut assignment = from_dual.assignment.clone();
    let mut pa = solve_power_allocation(instance, &assignment)?;
    let mut current = beamformers_from_power(instance, &assignment, &pa.powers)?;
    if from_dual.feasible && (!current.feasible || from_dual.objective_bits >= current.objective_bits) {
        return Ok(Search {
            alloc: from_dual,
            stage: FeasibleStage::DualAllocation,
            steps: 0,
            mu,
        });
    }
    if current.feasible {
        return Ok(Search {
            alloc: current,
            stage: FeasibleStage::PowerRefit,
            steps: 0,
            mu,
        });
    }

    let mut tried: HashSet<Assignment> = HashSet::new();
    tried.insert(assignment.clone());
    let d_bits = &instance.spec.d_min;
    for step in 1..=j_max {
        for (i, &k) in instance.rt_users().iter().enumerate() {
            if pa.rates_bits[k] < d_bits[i] * (1.0 - RATE_TOL) {
                mu[k] += delta;
            }
        }
        let c_prime: Vec<f64> = instance.weights().iter().zip(&mu).map(|(c, m)| c + m).collect();
        let sets = crate::par::map_range(instance.subcarriers(), |n| catalog.best(n, lambda, &c_prime))
            .into_iter()
            .map(|r| r.map(|e| catalog.sets()[e.set_index].clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let next = Assignment(sets);
        if next == assignment {
            continue;
        }
        assignment = next;
        if !tried.insert(assignment.clone()) {
            continue;
        }
        pa = solve_power_allocation(instance, &assignment)?;
        current = beamformers_from_power(instance, &assignment, &pa.powers)?;
        if current.feasible {
            return Ok(Search {
                alloc: current,
                stage: FeasibleStage::MultiplierSearch { step },
                steps: step,
                mu,
            });
        }
    }
    Ok(Search {
        alloc: current,
        stage: FeasibleStage::Exhausted,
        steps: j_max,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_instance, InstanceSpec};
    use crate::zfcore::build_catalog;

    fn setup(spec: InstanceSpec) -> (ProblemInstance, SetCatalog) {
        let inst = generate_instance(&spec, 0).unwrap();
        let cat = build_catalog(&inst).unwrap();
        (inst, cat)
    }

    #[test]
    fn gap_definition() {
        assert_eq!(gap_percent(50.0, 50.0), 0.0);
        assert!((gap_percent(50.0, 49.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_rate_users_succeed_immediately() {
        let (inst, cat) = setup(InstanceSpec::simple(2, 3, 2, 10.0, 4));
        let out = dual_feasible_solve(&inst, &cat, &DualParams::default(), &FeasibleSearchParams::default()).unwrap();
        assert!(matches!(
            out.stage,
            FeasibleStage::DualAllocation | FeasibleStage::PowerRefit
        ));
        let alloc = out.solved.allocation.unwrap();
        assert!(alloc.feasible);
        let pa = solve_power_allocation(&inst, &alloc.assignment).unwrap();
        if out.stage == FeasibleStage::PowerRefit {
            assert!((pa.objective_bits - alloc.objective_bits).abs() < 1e-9 * pa.objective_bits);
        }
        assert!(alloc.objective_bits <= pa.objective_bits + 1e-9);
    }

    #[test]
    fn impossible_demand_fails() {
        let spec = InstanceSpec::simple(2, 3, 2, 10.0, 4).with_rt(vec![0], vec![1e6]);
        let (inst, cat) = setup(spec);
        let search = FeasibleSearchParams { delta: None, j_max: 30 };
        let out = dual_feasible_solve(
            &inst,
            &cat,
            &DualParams {
                max_iters: 50,
                ..Default::default()
            },
            &search,
        )
        .unwrap();
        assert!(!out.solved.report.feasible);
        assert_eq!(out.stage, FeasibleStage::Exhausted);
        assert!(out.solved.report.gap_percent.is_none());
    }

    #[test]
    fn multipliers_never_decrease() {
        let spec = InstanceSpec::simple(3, 6, 4, 20.0, 5).with_rt(vec![2], vec![14.0]);
        let (inst, cat) = setup(spec);
        let dual = solve_dual(&inst, &cat, &DualParams::default()).unwrap();
        let mu0 = dual.last.point.mu.clone();
        let out = feasible_from_dual(&inst, &cat, dual, &FeasibleSearchParams::default()).unwrap();
        assert!(out.final_mu.iter().zip(&mu0).all(|(a, b)| a >= b));
    }

    #[test]
    fn invalid_search_params() {
        let (inst, cat) = setup(InstanceSpec::simple(1, 1, 1, 1.0, 0));
        let bad = FeasibleSearchParams {
            delta: Some(-1.0),
            j_max: 5,
        };
        assert!(dual_feasible_solve(&inst, &cat, &DualParams::default(), &bad).is_err());
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.label()), Some(m));
        }
        assert_eq!(Method::parse("nope"), None);
    }
}
