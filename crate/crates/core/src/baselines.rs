//! Comparison solvers: exhaustive enumeration of joint assignments and
//! iterative weight adjustment, plus the linear-penalty objective that the
//! latter implicitly maximizes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::ProblemInstance;
use crate::dual::{evaluate_with_weights, DualPoint};
use crate::feasible::{Method, SolveError, SolveReport, Solved};
use crate::par;
use crate::poweralloc::{
    beamformers_from_power, set_betas, solve_with_betas, Allocation, Assignment, PowerError, RATE_TOL,
};
use crate::zfcore::{SdmaSet, SetCatalog};

/// Default limit on `S^N`.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Number of joint assignments `S^N`, as a float so huge systems do not
/// overflow.
pub fn joint_assignment_count(sets: usize, subcarriers: usize) -> f64 {
    (sets as f64).powi(subcarriers as i32)
}

/// Best feasible joint assignment by exhaustive search, each candidate
/// scored by the optimal power allocation for it.
pub fn enumerate_exact(instance: &ProblemInstance, catalog: &SetCatalog, cap: u64) -> Result<Solved, SolveError> {
    let start = Instant::now();
    let s_count = catalog.len();
    let n_count = instance.subcarriers();
    let total = joint_assignment_count(s_count, n_count);
    if total > cap as f64 {
        return Err(SolveError::TooLarge {
            assignments: total,
            cap,
        });
    }
    let total = total as usize;
    // β per (n, s); rank-deficient sets are unusable and stay None
    let betas: Vec<Option<Vec<f64>>> = par::map_range(n_count * s_count, |idx| {
        match set_betas(instance, idx / s_count, &catalog.sets()[idx % s_count]) {
            Ok(b) => Ok(Some(b)),
            Err(PowerError::RankDeficient { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let decode = |i: usize| -> Vec<usize> {
        let mut rest = i;
        (0..n_count)
            .map(|_| {
                let s = rest % s_count;
                rest /= s_count;
                s
            })
            .collect()
    };
    let score = |i: usize| -> Option<f64> {
        let idx = decode(i);
        let mut table = Vec::with_capacity(n_count);
        for (n, &s) in idx.iter().enumerate() {
            table.push(betas[n * s_count + s].clone()?);
        }
        let assignment = Assignment(idx.iter().map(|&s| catalog.sets()[s].clone()).collect());
        let pa = solve_with_betas(instance, &assignment, table, instance.weights(), true).ok()?;
        pa.feasible.then_some(pa.objective_bits)
    };
    let best = par::argmax_range(total, score);
    let solved = match best {
        Some((i, _)) => {
            let assignment = Assignment(decode(i).into_iter().map(|s| catalog.sets()[s].clone()).collect());
            let pa = crate::poweralloc::solve_power_allocation(instance, &assignment)?;
            let alloc = beamformers_from_power(instance, &assignment, &pa.powers)?;
            let report = SolveReport::new(instance, Method::Exact, Some(alloc.objective_bits), alloc.feasible);
            Solved {
                allocation: Some(alloc),
                report,
            }
        }
        None => Solved {
            allocation: None,
            report: SolveReport::new(instance, Method::Exact, None, false),
        },
    };
    let mut report = solved.report;
    report.iterations = total;
    report.seconds = start.elapsed().as_secs_f64();
    Ok(Solved {
        allocation: solved.allocation,
        report,
    })
}

/// Weighted sum-rate maximization under the power budget alone.
///
/// Bisects `λ` with all rate multipliers at zero, then refits exact
/// water-filling on the assignments found on both sides of the final
/// bracket and keeps the better one under `weights`.
pub fn solve_unconstrained(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    weights: &[f64],
) -> Result<Allocation, SolveError> {
    if weights.len() != instance.users() || weights.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(SolveError::InvalidParams(
            "weights must be positive, one per user".into(),
        ));
    }
    let p_max = instance.p_max();
    let lambda_min = 1e-12;
    let power_at = |lambda: f64| -> Result<(f64, Vec<SdmaSet>), SolveError> {
        let point = DualPoint {
            lambda,
            mu: vec![0.0; instance.users()],
        };
        let ev = evaluate_with_weights(instance, catalog, &point, weights)?;
        Ok((ev.total_power, ev.assignment(catalog)))
    };
    let mut hi = instance.users() as f64 / p_max;
    let mut hi_eval = power_at(hi)?;
    while hi_eval.0 > p_max {
        hi *= 2.0;
        hi_eval = power_at(hi)?;
    }
    let mut lo = hi;
    let mut lo_eval = hi_eval.clone();
    while lo_eval.0 < p_max && lo > lambda_min {
        lo = (lo / 2.0).max(lambda_min);
        lo_eval = power_at(lo)?;
    }
    let mut candidates = vec![hi_eval.1.clone()];
    if lo_eval.0 >= p_max {
        for _ in 0..100 {
            if (hi_eval.0 - p_max).abs() <= 1e-6 * p_max || hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let e = power_at(mid)?;
            if e.0 > p_max {
                lo = mid;
                lo_eval = e;
            } else {
                hi = mid;
                hi_eval = e;
            }
        }
        candidates = vec![hi_eval.1.clone()];
        if lo_eval.1 != hi_eval.1 {
            candidates.push(lo_eval.1.clone());
        }
    }
    let mut best: Option<(f64, Assignment, Vec<Vec<f64>>)> = None;
    for sets in candidates {
        let assignment = Assignment(sets);
        let betas = catalog_betas(catalog, &assignment);
        let pa = solve_with_betas(instance, &assignment, betas, weights, false)?;
        if best.as_ref().is_none_or(|b| pa.objective_bits > b.0) {
            best = Some((pa.objective_bits, assignment, pa.powers));
        }
    }
    let (_, assignment, powers) = best.expect("at least one candidate");
    Ok(beamformers_from_power(instance, &assignment, &powers)?)
}

fn catalog_betas(catalog: &SetCatalog, assignment: &Assignment) -> Vec<Vec<f64>> {
    assignment
        .sets()
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let idx = catalog.index_of(s).expect("assignment built from the catalog");
            catalog.members(n, idx).iter().map(|m| m.gamma_sqr).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightAdjustParams {
    /// Weight increment per bit of shortfall, in `(0, 1]`.
    pub epsilon: f64,
    /// Number of weighted solves, counting the first one.
    pub max_iterations: usize,
}

impl Default for WeightAdjustParams {
    fn default() -> Self {
        WeightAdjustParams {
            epsilon: 0.5,
            max_iterations: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightAdjustOutcome {
    pub solved: Solved,
    /// Weights used at each iteration, starting with the instance weights.
    pub weight_history: Vec<Vec<f64>>,
}

/// Raises the weights of RT users short of their rate and re-solves the
/// unconstrained problem until every floor is met or the iteration budget
/// runs out. The result is scored with the instance weights.
pub fn weight_adjust_solve(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    params: &WeightAdjustParams,
) -> Result<WeightAdjustOutcome, SolveError> {
    if !(params.epsilon > 0.0 && params.epsilon <= 1.0) || params.max_iterations == 0 {
        return Err(SolveError::InvalidParams(
            "epsilon must be in (0, 1] and max_iterations ≥ 1".into(),
        ));
    }
    let start = Instant::now();
    let mut weights = instance.weights().to_vec();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut alloc = None;
    for _ in 0..params.max_iterations {
        history.push(weights.clone());
        iterations += 1;
        let a = solve_unconstrained(instance, catalog, &weights)?;
        let mut short = false;
        for (i, &k) in instance.rt_users().iter().enumerate() {
            let d = instance.spec.d_min[i];
            if a.rates_bits[k] < d * (1.0 - RATE_TOL) {
                weights[k] += params.epsilon * (d - a.rates_bits[k]);
                short = true;
            }
        }
        let done = a.feasible || !short;
        alloc = Some(a);
        if done {
            break;
        }
    }
    let alloc = alloc.expect("at least one iteration");
    let mut report = SolveReport::new(
        instance,
        Method::WeightAdjust,
        Some(alloc.objective_bits),
        alloc.feasible,
    );
    report.iterations = iterations;
    report.seconds = start.elapsed().as_secs_f64();
    Ok(WeightAdjustOutcome {
        solved: Solved {
            allocation: Some(alloc),
            report,
        },
        weight_history: history,
    })
}

/// `Σ c_k r_k + ε Σ_{k: r_k < ď_k} (r_k − ď_k)`, in bits.
pub fn penalty_objective(allocation: &Allocation, instance: &ProblemInstance, epsilon: f64) -> f64 {
    let penalty: f64 = instance
        .rt_users()
        .iter()
        .zip(&instance.spec.d_min)
        .map(|(&k, &d)| (allocation.rates_bits[k] - d).min(0.0))
        .sum();
    allocation.objective_with(instance.weights()) + epsilon * penalty
}
