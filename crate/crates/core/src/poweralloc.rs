//! Power allocation for a fixed SDMA assignment.
//!
//! With the sets fixed and beamformers restricted to `W_n = H_n⁺ diag(√p_n)`
//! the problem is concave in the powers:
//!
//! ```text
//! max Σ c_k ln(1 + p_{k,n})
//! s.t. Σ β_{k,n} p_{k,n} ≤ P̌,   Σ_n ln(1 + p_{k,n}) ≥ ď_k (k ∈ 𝒟),   p ≥ 0
//! ```
//!
//! with `β_{k,n} = ‖column k of H_n⁺‖²`. KKT gives a per-user water level
//! `L_k = (c_k + ν_k)/λ̂` and `p = max(0, L_k/β − 1)`. For a given `λ̂`
//! each RT user's level is the larger of `c_k/λ̂` and the smallest level
//! meeting its rate, which has a closed form; total power is then monotone
//! in `1/λ̂` and a single bisection pins the budget exactly.

use serde::Serialize;
use thiserror::Error;

use crate::channel::ProblemInstance;
use crate::numkernel::{pseudo_inverse, CMat, CVec, NumError};
use crate::zfcore::SdmaSet;

const LN2: f64 = std::f64::consts::LN_2;

/// Relative slack allowed on the power budget.
pub const POWER_TOL: f64 = 1e-8;
/// Relative slack allowed on each minimum rate.
pub const RATE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("channels of set {set} on subcarrier {n} are linearly dependent")]
    RankDeficient { n: usize, set: String },
    #[error("assignment covers {got} subcarriers, instance has {expected}")]
    Shape { got: usize, expected: usize },
    #[error("power search did not converge: {0}")]
    NumericFailure(String),
    #[error("invalid power vector: {0}")]
    InvalidPowers(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// One SDMA set per subcarrier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Assignment(pub Vec<SdmaSet>);

impl Assignment {
    pub fn sets(&self) -> &[SdmaSet] {
        &self.0
    }

    fn check(&self, instance: &ProblemInstance) -> Result<(), PowerError> {
        if self.0.len() != instance.subcarriers() {
            return Err(PowerError::Shape {
                got: self.0.len(),
                expected: instance.subcarriers(),
            });
        }
        Ok(())
    }
}

/// `β` of each member of `set` on subcarrier `n`, in set order. Members
/// whose channel is identically zero get `+∞` (they cannot be served).
pub fn set_betas(instance: &ProblemInstance, n: usize, set: &SdmaSet) -> Result<Vec<f64>, PowerError> {
    let mut out = vec![f64::INFINITY; set.len()];
    if let Some((live, h_plus)) = stacked_pinv(instance, n, set)? {
        for (col, &pos) in live.iter().enumerate() {
            out[pos] = h_plus.column(col).norm_sqr();
        }
    }
    Ok(out)
}

/// Pseudo-inverse of the stacked non-zero channels of `set`; returns the
/// positions (within the set) of the rows used.
fn stacked_pinv(instance: &ProblemInstance, n: usize, set: &SdmaSet) -> Result<Option<(Vec<usize>, CMat)>, PowerError> {
    let live: Vec<usize> = set
        .users()
        .iter()
        .enumerate()
        .filter(|(_, &k)| !instance.channel(k, n).is_zero())
        .map(|(i, _)| i)
        .collect();
    if live.is_empty() {
        return Ok(None);
    }
    let rows: Vec<&CVec> = live.iter().map(|&i| instance.channel(set.users()[i], n)).collect();
    let h = CMat::from_rows(&rows)?;
    let h_plus = pseudo_inverse(&h)?;
    let eye = CMat::identity(rows.len());
    if h.mul(&h_plus).sub(&eye).frobenius() > 1e-6 {
        return Err(PowerError::RankDeficient {
            n,
            set: set.to_string(),
        });
    }
    Ok(Some((live, h_plus)))
}

/// `β` table for a whole assignment, indexed `[n][position in s(n)]`.
pub fn compute_betas(instance: &ProblemInstance, assignment: &Assignment) -> Result<Vec<Vec<f64>>, PowerError> {
    assignment.check(instance)?;
    assignment
        .sets()
        .iter()
        .enumerate()
        .map(|(n, s)| set_betas(instance, n, s))
        .collect()
}

/// Solution of the fixed-assignment power problem.
#[derive(Debug, Clone, Serialize)]
pub struct PowerAllocation {
    pub assignment: Assignment,
    pub betas: Vec<Vec<f64>>,
    /// `[n][position in s(n)]`.
    pub powers: Vec<Vec<f64>>,
    /// Multiplier of the power budget.
    pub lambda_hat: f64,
    /// Rate multipliers per user (zero for best-effort users).
    pub nu: Vec<f64>,
    /// Weighted sum rate in bits, with the weights the problem was solved for.
    pub objective_bits: f64,
    pub rates_bits: Vec<f64>,
    pub total_power: f64,
    /// `P̌ − Σβp`.
    pub power_slack: f64,
    /// `r_k − ď_k` in bits, RT order.
    pub rate_slacks: Vec<f64>,
    pub feasible: bool,
}

/// Solves the problem for `assignment` with the instance weights.
pub fn solve_power_allocation(
    instance: &ProblemInstance,
    assignment: &Assignment,
) -> Result<PowerAllocation, PowerError> {
    let betas = compute_betas(instance, assignment)?;
    solve_with_betas(instance, assignment, betas, instance.weights(), true)
}

/// Core solver. With `enforce_rates = false` the rate floors are dropped
/// (plain weighted water-filling). An infeasible rate system yields the
/// unconstrained allocation, whose `feasible` flag is then false.
pub fn solve_with_betas(
    instance: &ProblemInstance,
    assignment: &Assignment,
    betas: Vec<Vec<f64>>,
    weights: &[f64],
    enforce_rates: bool,
) -> Result<PowerAllocation, PowerError> {
    let k_users = instance.users();
    let p_max = instance.p_max();
    // (n, pos, user, beta) for every servable member
    let vars: Vec<(usize, usize, usize, f64)> = assignment
        .sets()
        .iter()
        .enumerate()
        .flat_map(|(n, s)| {
            let b = &betas[n];
            s.users().iter().enumerate().map(move |(pos, &k)| (n, pos, k, b[pos]))
        })
        .filter(|v| v.3.is_finite())
        .collect();
    let mut user_betas: Vec<Vec<f64>> = vec![Vec::new(); k_users];
    for &(_, _, k, b) in &vars {
        user_betas[k].push(b);
    }

    let targets = instance.min_rates_nats();
    let mut floor = vec![0.0; k_users];
    let mut reachable = true;
    if enforce_rates {
        for &k in instance.rt_users() {
            match min_level(&mut user_betas[k], targets[k]) {
                Some(l) => floor[k] = l,
                None => reachable = false,
            }
        }
    }
    let power_at = |t: f64| -> f64 {
        vars.iter()
            .map(|&(_, _, k, b)| (floor[k].max(weights[k] * t) - b).max(0.0))
            .sum()
    };
    let min_power = power_at(0.0);
    if !reachable || min_power > p_max * (1.0 + POWER_TOL) {
        return solve_with_betas(instance, assignment, betas, weights, false);
    }

    // t = 1/λ̂; power_at is continuous and non-decreasing in t
    let t = if vars.is_empty() {
        0.0
    } else {
        let mut hi = 1.0;
        let mut guard = 0;
        while power_at(hi) < p_max {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(PowerError::NumericFailure(
                    "no upper bracket for the water level".into(),
                ));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if power_at(mid) < p_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };

    let mut powers: Vec<Vec<f64>> = assignment.sets().iter().map(|s| vec![0.0; s.len()]).collect();
    let mut level = vec![0.0; k_users];
    for k in 0..k_users {
        level[k] = floor[k].max(weights[k] * t);
    }
    for &(n, pos, k, b) in &vars {
        powers[n][pos] = (level[k] / b - 1.0).max(0.0);
    }
    let lambda_hat = if t > 0.0 { 1.0 / t } else { 0.0 };
    let nu: Vec<f64> = (0..k_users)
        .map(|k| {
            if floor[k] > weights[k] * t && t > 0.0 {
                level[k] * lambda_hat - weights[k]
            } else {
                0.0
            }
        })
        .collect();
    Ok(finish(instance, assignment, betas, powers, weights, lambda_hat, nu))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    instance: &ProblemInstance,
    assignment: &Assignment,
    betas: Vec<Vec<f64>>,
    powers: Vec<Vec<f64>>,
    weights: &[f64],
    lambda_hat: f64,
    nu: Vec<f64>,
) -> PowerAllocation {
    let mut rates = vec![0.0; instance.users()];
    let mut total_power = 0.0;
    for (n, s) in assignment.sets().iter().enumerate() {
        for (pos, &k) in s.users().iter().enumerate() {
            let p = powers[n][pos];
            if p > 0.0 {
                rates[k] += p.ln_1p();
                total_power += betas[n][pos] * p;
            }
        }
    }
    let rates_bits: Vec<f64> = rates.iter().map(|r| r / LN2).collect();
    let objective_bits = rates_bits.iter().zip(weights).map(|(r, c)| r * c).sum();
    let rate_slacks: Vec<f64> = instance
        .rt_users()
        .iter()
        .zip(&instance.spec.d_min)
        .map(|(&k, &d)| rates_bits[k] - d)
        .collect();
    let power_slack = instance.p_max() - total_power;
    let feasible = power_slack >= -POWER_TOL * instance.p_max()
        && rate_slacks
            .iter()
            .zip(&instance.spec.d_min)
            .all(|(s, d)| *s >= -RATE_TOL * d);
    PowerAllocation {
        assignment: assignment.clone(),
        betas,
        powers,
        lambda_hat,
        nu,
        objective_bits,
        rates_bits,
        total_power,
        power_slack,
        rate_slacks,
        feasible,
    }
}

/// Smallest water level `L` with `Σ_i ln(max(1, L/β_i)) ≥ target`.
/// Sorts `betas` in place. `None` when the user has no servable slot.
fn min_level(betas: &mut [f64], target: f64) -> Option<f64> {
    if target <= 0.0 {
        return Some(0.0);
    }
    if betas.is_empty() {
        return None;
    }
    betas.sort_by(|a, b| a.partial_cmp(b).expect("finite betas"));
    let mut log_sum = 0.0;
    for j in 0..betas.len() {
        log_sum += betas[j].ln();
        let count = (j + 1) as f64;
        let level = ((target + log_sum) / count).exp();
        let next = betas.get(j + 1).copied().unwrap_or(f64::INFINITY);
        if level <= next {
            return Some(level.max(betas[j]));
        }
    }
    unreachable!("the last segment is unbounded above")
}

/// Largest rate (bits) user `k` could reach with the whole budget and every
/// subcarrier to itself.
pub fn single_user_max_rate_bits(instance: &ProblemInstance, k: usize) -> f64 {
    let mut betas: Vec<f64> = (0..instance.subcarriers())
        .map(|n| instance.channel(k, n).norm_sqr())
        .filter(|&g| g > 0.0)
        .map(|g| 1.0 / g)
        .collect();
    if betas.is_empty() {
        return 0.0;
    }
    betas.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let p = instance.p_max();
    let mut sum = 0.0;
    let mut level = 0.0;
    for (j, &b) in betas.iter().enumerate() {
        sum += b;
        let l = (p + sum) / (j + 1) as f64;
        level = l;
        if betas.get(j + 1).is_none_or(|&next| l <= next) {
            break;
        }
    }
    betas.iter().map(|&b| (level / b).max(1.0).log2()).sum()
}

/// Residuals of the KKT system of a solved allocation.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KktResiduals {
    /// Relative stationarity error `|(c+ν)/(1+p) − λ̂β| / λ̂β` on active
    /// slots, and the positive part on inactive ones.
    pub stationarity: f64,
    /// `|λ̂ (P̌ − Σβp)| / (λ̂ P̌)`.
    pub power_complementarity: f64,
    /// `max_k ν_k |r_k − ď_k| / (c_k ď_k)` in nats.
    pub rate_complementarity: f64,
    /// Largest relative violation of any constraint.
    pub primal: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.power_complementarity)
            .max(self.rate_complementarity)
            .max(self.primal)
    }
}

pub fn kkt_residuals(instance: &ProblemInstance, pa: &PowerAllocation, weights: &[f64]) -> KktResiduals {
    let mut r = KktResiduals::default();
    let lam = pa.lambda_hat;
    for (n, s) in pa.assignment.sets().iter().enumerate() {
        for (pos, &k) in s.users().iter().enumerate() {
            let b = pa.betas[n][pos];
            if !b.is_finite() {
                continue;
            }
            let p = pa.powers[n][pos];
            let grad = (weights[k] + pa.nu[k]) / (1.0 + p);
            let price = lam * b;
            let e = if p > 0.0 {
                (grad - price).abs() / price
            } else {
                ((grad - price) / price).max(0.0)
            };
            r.stationarity = r.stationarity.max(e);
        }
    }
    r.power_complementarity = (pa.power_slack / instance.p_max()).abs();
    if lam == 0.0 {
        r.power_complementarity = 0.0;
    }
    for ((&k, &d), slack) in instance
        .rt_users()
        .iter()
        .zip(&instance.spec.d_min)
        .zip(&pa.rate_slacks)
    {
        let e = pa.nu[k] * (slack * LN2).abs() / (weights[k] * d * LN2);
        r.rate_complementarity = r.rate_complementarity.max(e);
        r.primal = r.primal.max((-slack / d).max(0.0));
    }
    r.primal = r.primal.max((-pa.power_slack / instance.p_max()).max(0.0));
    r
}

/// A complete primal point: sets, powers, beamformers and resulting rates.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub assignment: Assignment,
    /// `[n][position in s(n)]`.
    pub powers: Vec<Vec<f64>>,
    /// `[n][position in s(n)]`.
    pub beamformers: Vec<Vec<CVec>>,
    /// Per-user rates in bits from the general interference formula.
    pub rates_bits: Vec<f64>,
    /// `Σ c_k r_k` in bits with the instance weights.
    pub objective_bits: f64,
    pub total_power: f64,
    pub power_ok: bool,
    /// RT order.
    pub rate_ok: Vec<bool>,
    pub feasible: bool,
}

impl Allocation {
    pub fn from_parts(
        instance: &ProblemInstance,
        assignment: Assignment,
        powers: Vec<Vec<f64>>,
        beamformers: Vec<Vec<CVec>>,
    ) -> Self {
        let m = instance.antennas();
        let mut rates = vec![0.0; instance.users()];
        let mut total_power = 0.0;
        for (n, s) in assignment.sets().iter().enumerate() {
            let mut beams = vec![CVec::zeros(m); instance.users()];
            for (pos, &k) in s.users().iter().enumerate() {
                beams[k] = beamformers[n][pos].clone();
                total_power += beamformers[n][pos].norm_sqr();
            }
            let chans: Vec<CVec> = (0..instance.users()).map(|k| instance.channel(k, n).clone()).collect();
            for (k, r) in evaluate_rates_general(&chans, &beams).into_iter().enumerate() {
                rates[k] += r;
            }
        }
        let rates_bits: Vec<f64> = rates.iter().map(|r| r / LN2).collect();
        let objective_bits = rates_bits.iter().zip(instance.weights()).map(|(r, c)| r * c).sum();
        let power_ok = total_power <= instance.p_max() * (1.0 + POWER_TOL);
        let rate_ok: Vec<bool> = instance
            .rt_users()
            .iter()
            .zip(&instance.spec.d_min)
            .map(|(&k, &d)| rates_bits[k] >= d * (1.0 - RATE_TOL))
            .collect();
        let feasible = power_ok && rate_ok.iter().all(|&b| b);
        Allocation {
            assignment,
            powers,
            beamformers,
            rates_bits,
            objective_bits,
            total_power,
            power_ok,
            rate_ok,
            feasible,
        }
    }

    /// Objective in bits under arbitrary weights.
    pub fn objective_with(&self, weights: &[f64]) -> f64 {
        self.rates_bits.iter().zip(weights).map(|(r, c)| r * c).sum()
    }

    /// Largest `|h_j w_k| / (‖h_j‖‖w_k‖)` over distinct members of a set.
    pub fn zf_residual(&self, instance: &ProblemInstance) -> f64 {
        let mut worst: f64 = 0.0;
        for (n, s) in self.assignment.sets().iter().enumerate() {
            for (pk, _) in s.users().iter().enumerate() {
                let w = &self.beamformers[n][pk];
                let wn = w.norm();
                if wn == 0.0 {
                    continue;
                }
                for (pj, &j) in s.users().iter().enumerate() {
                    let h = instance.channel(j, n);
                    if pj == pk || h.is_zero() {
                        continue;
                    }
                    worst = worst.max(h.dot(w).norm() / (h.norm() * wn));
                }
            }
        }
        worst
    }

    /// Largest entry of `|H_n W_n − diag(√p_n)|` over subcarriers.
    pub fn diagonalization_residual(&self, instance: &ProblemInstance) -> f64 {
        let mut worst: f64 = 0.0;
        for (n, s) in self.assignment.sets().iter().enumerate() {
            for (pj, &j) in s.users().iter().enumerate() {
                let h = instance.channel(j, n);
                if h.is_zero() {
                    continue;
                }
                for (pk, w) in self.beamformers[n].iter().enumerate() {
                    let target = if pj == pk { self.powers[n][pk].sqrt() } else { 0.0 };
                    worst = worst.max((h.dot(w) - target).norm());
                }
            }
        }
        worst
    }

    /// Per-user zero-forcing rates `Σ_n ln(1 + p)` in bits.
    pub fn zf_rates_bits(&self, users: usize) -> Vec<f64> {
        let mut out = vec![0.0; users];
        for (n, s) in self.assignment.sets().iter().enumerate() {
            for (pos, &k) in s.users().iter().enumerate() {
                out[k] += self.powers[n][pos].ln_1p() / LN2;
            }
        }
        out
    }
}

/// Builds `W_n = H_n⁺ diag(√p_n)` for every subcarrier.
pub fn beamformers_from_power(
    instance: &ProblemInstance,
    assignment: &Assignment,
    powers: &[Vec<f64>],
) -> Result<Allocation, PowerError> {
    assignment.check(instance)?;
    let m = instance.antennas();
    let mut beams = Vec::with_capacity(assignment.sets().len());
    for (n, s) in assignment.sets().iter().enumerate() {
        let p = powers
            .get(n)
            .filter(|p| p.len() == s.len())
            .ok_or_else(|| PowerError::InvalidPowers(format!("subcarrier {n} needs {} powers", s.len())))?;
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(PowerError::InvalidPowers(format!(
                "negative or non-finite power on subcarrier {n}"
            )));
        }
        let (live, h_plus) = match stacked_pinv(instance, n, s)? {
            Some((live, h_plus)) => (live, Some(h_plus)),
            None => (Vec::new(), None),
        };
        let mut w = vec![CVec::zeros(m); s.len()];
        if let Some(h_plus) = &h_plus {
            for (col, &pos) in live.iter().enumerate() {
                if p[pos] > 0.0 {
                    w[pos] = h_plus.column(col).scale(p[pos].sqrt());
                }
            }
        }
        for (pos, &x) in p.iter().enumerate() {
            if x > 0.0 && !live.contains(&pos) {
                return Err(PowerError::InvalidPowers(format!(
                    "power on a zero channel (subcarrier {n})"
                )));
            }
        }
        beams.push(w);
    }
    Ok(Allocation::from_parts(
        instance,
        assignment.clone(),
        powers.to_vec(),
        beams,
    ))
}

/// Shannon rates (nats) on one subcarrier with arbitrary beamformers:
/// `ln(1 + |h_k w_k|² / (1 + Σ_{j≠k} |h_k w_j|²))`.
pub fn evaluate_rates_general(channels: &[CVec], beamformers: &[CVec]) -> Vec<f64> {
    channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let signal = h.dot(&beamformers[k]).norm_sqr();
            if signal == 0.0 {
                return 0.0;
            }
            let interference: f64 = beamformers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, w)| h.dot(w).norm_sqr())
                .sum();
            (signal / (1.0 + interference)).ln_1p()
        })
        .collect()
}
