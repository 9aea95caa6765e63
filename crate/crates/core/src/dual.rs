//! Lagrangian dual of the zero-forcing problem.
//!
//! Relaxing the power budget (price `λ`) and the minimum rates (prices
//! `μ_k`) splits the problem per subcarrier:
//!
//! ```text
//! Φ(λ, μ) = λ·P̌ − Σ_k μ_k ď_k + Σ_n max_s f_{n,s}(λ, c + μ)
//! ```
//!
//! `Φ` is convex and upper-bounds every feasible weighted sum rate.
//! [`solve_dual`] minimizes it by projected subgradient steps with a fixed,
//! scale-normalized step. Values are in nats unless a name says `bits`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ProblemInstance;
use crate::par;
use crate::zfcore::{SdmaSet, SetCatalog, SetEvaluation, ZfError};

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("invalid dual point: {0}")]
    InvalidPoint(String),
    #[error("invalid dual parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Zf(#[from] ZfError),
}

/// Multipliers: `lambda` prices power, `mu[k]` prices user `k`'s rate floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub lambda: f64,
    /// One entry per user, zero for best-effort users.
    pub mu: Vec<f64>,
}

impl DualPoint {
    pub fn initial(instance: &ProblemInstance) -> Self {
        DualPoint {
            lambda: instance.users() as f64 / instance.p_max(),
            mu: vec![0.0; instance.users()],
        }
    }

    pub fn validate(&self, instance: &ProblemInstance) -> Result<(), DualError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(DualError::InvalidPoint(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.mu.len() != instance.users() {
            return Err(DualError::InvalidPoint(format!(
                "{} rate multipliers for {} users",
                self.mu.len(),
                instance.users()
            )));
        }
        for (k, &m) in self.mu.iter().enumerate() {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(DualError::InvalidPoint(format!("mu[{k}] = {m}")));
            }
            if m != 0.0 && instance.min_rate_bits(k).is_none() {
                return Err(DualError::InvalidPoint(format!("mu[{k}] nonzero for best-effort user")));
            }
        }
        Ok(())
    }
}

/// `Φ` at one point together with the pieces it was assembled from.
#[derive(Debug, Clone)]
pub struct DualEvaluation {
    pub point: DualPoint,
    pub phi: f64,
    /// Winning set per subcarrier.
    pub subcarriers: Vec<SetEvaluation>,
    pub total_power: f64,
    /// Per-user zero-forcing rate summed over subcarriers.
    pub rates: Vec<f64>,
    /// `Σ‖w‖² − P̌`.
    pub g_lambda: f64,
    /// `ď_k − r_k` for each RT user, in RT order.
    pub g_mu: Vec<f64>,
}

impl DualEvaluation {
    pub fn phi_bits(&self) -> f64 {
        self.phi / LN2
    }

    pub fn assignment(&self, catalog: &SetCatalog) -> Vec<SdmaSet> {
        self.subcarriers
            .iter()
            .map(|e| catalog.sets()[e.set_index].clone())
            .collect()
    }

    /// `Φ` recomputed from its parts.
    pub fn phi_from_parts(&self, instance: &ProblemInstance) -> f64 {
        let d = instance.min_rates_nats();
        self.point.lambda * instance.p_max() - self.point.mu.iter().zip(&d).map(|(m, d)| m * d).sum::<f64>()
            + self.subcarriers.iter().map(|e| e.value).sum::<f64>()
    }
}

/// Evaluates `Φ` and its subgradients at `dual`.
pub fn dual_value(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    dual: &DualPoint,
) -> Result<DualEvaluation, DualError> {
    dual.validate(instance)?;
    let c_prime: Vec<f64> = instance.weights().iter().zip(&dual.mu).map(|(c, m)| c + m).collect();
    evaluate_with_weights(instance, catalog, dual, &c_prime)
}

/// Like [`dual_value`] but with arbitrary positive effective weights and
/// no rate-multiplier term; used by the weight-adjustment baseline.
pub(crate) fn evaluate_with_weights(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    dual: &DualPoint,
    c_prime: &[f64],
) -> Result<DualEvaluation, DualError> {
    let lambda = dual.lambda;
    let subcarriers = par::map_range(instance.subcarriers(), |n| catalog.best(n, lambda, c_prime))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut rates = vec![0.0; instance.users()];
    let mut total_power = 0.0;
    for ev in &subcarriers {
        for m in &ev.members {
            rates[m.user] += m.p.ln_1p();
            total_power += m.w.norm_sqr();
        }
    }
    let d = instance.min_rates_nats();
    let mu_term: f64 = dual.mu.iter().zip(&d).map(|(m, d)| m * d).sum();
    let phi = lambda * instance.p_max() - mu_term + subcarriers.iter().map(|e| e.value).sum::<f64>();
    let g_mu = instance.rt_users().iter().map(|&k| d[k] - rates[k]).collect();
    Ok(DualEvaluation {
        point: dual.clone(),
        phi,
        subcarriers,
        total_power,
        rates,
        g_lambda: total_power - instance.p_max(),
        g_mu,
    })
}

/// Subgradient loop settings. `None` fields take instance-dependent
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualParams {
    /// Step size; the power step is divided by `P̌` and each rate step by
    /// the user's `ď_k` (see [`StepRule`]).
    pub delta: f64,
    pub max_iters: usize,
    /// Stop tolerance on `|g_λ|` and `‖g_μ‖` (bits); default
    /// `1e-3 · max(P̌, max ď)`.
    pub eps: Option<f64>,
    pub lambda0: Option<f64>,
    /// Initial multipliers in RT-user order.
    pub mu0: Option<Vec<f64>>,
    pub lambda_min: f64,
    pub step: StepRule,
    /// Halve the step after this many iterations without a new best `Φ`;
    /// `None` keeps it fixed.
    pub patience: Option<usize>,
}

/// How the normalized subgradient is turned into a multiplier change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `λ += δ g_λ / P̌`, `μ_k += δ g_μk / ď_k`.
    Absolute,
    /// Same, scaled by the current multiplier size: `λ` by `λ`, `μ_k` by
    /// `c_k + μ_k`.
    #[default]
    Relative,
}

impl Default for DualParams {
    fn default() -> Self {
        DualParams {
            delta: 0.3,
            max_iters: 500,
            eps: None,
            lambda0: None,
            mu0: None,
            lambda_min: 1e-8,
            step: StepRule::default(),
            patience: Some(20),
        }
    }
}

impl DualParams {
    fn eps_for(&self, instance: &ProblemInstance) -> f64 {
        self.eps.unwrap_or_else(|| {
            let dmax = instance.spec.d_min.iter().cloned().fold(0.0, f64::max);
            1e-3 * instance.p_max().max(dmax)
        })
    }

    fn start(&self, instance: &ProblemInstance) -> Result<DualPoint, DualError> {
        if !(self.delta > 0.0) || self.max_iters == 0 || !(self.lambda_min > 0.0) {
            return Err(DualError::InvalidParams(
                "delta, max_iters and lambda_min must be positive".into(),
            ));
        }
        let mut p = DualPoint::initial(instance);
        if let Some(l) = self.lambda0 {
            if !(l > 0.0) {
                return Err(DualError::InvalidParams(format!("lambda0 must be positive, got {l}")));
            }
            p.lambda = l;
        }
        if let Some(mu0) = &self.mu0 {
            if mu0.len() != instance.rt_users().len() {
                return Err(DualError::InvalidParams("mu0 must have one entry per RT user".into()));
            }
            for (&k, &m) in instance.rt_users().iter().zip(mu0) {
                p.mu[k] = m;
            }
        }
        p.validate(instance)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub lambda: f64,
    /// RT-user multipliers, RT order.
    pub mu: Vec<f64>,
    pub phi_bits: f64,
    pub subgradient_norm: f64,
    pub total_power: f64,
    /// RT-user rates in bits, RT order.
    pub rt_rates_bits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub best_point: DualPoint,
    /// Lowest `Φ` seen (nats); the reported upper bound.
    pub best_phi: f64,
    pub best_iteration: usize,
    pub trace: Vec<TraceRow>,
    /// Evaluation at the last iterate; its sets and beamformers are the
    /// candidate allocation.
    pub last: DualEvaluation,
    pub converged: bool,
}

impl DualSolution {
    pub fn bound_bits(&self) -> f64 {
        self.best_phi / LN2
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Projected subgradient descent on `Φ` (ascent on the dual function).
pub fn solve_dual(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    params: &DualParams,
) -> Result<DualSolution, DualError> {
    let eps = params.eps_for(instance);
    let d = instance.min_rates_nats();
    let mut point = params.start(instance)?;
    let mut trace = Vec::with_capacity(params.max_iters);
    let mut best: Option<(f64, DualPoint, usize)> = None;
    let mut converged = false;
    let mut last = None;
    let mut delta = params.delta;
    let mut since_best = 0;
    for i in 0..params.max_iters {
        let ev = dual_value(instance, catalog, &point)?;
        let g_mu_bits_norm = ev.g_mu.iter().map(|g| (g / LN2).powi(2)).sum::<f64>().sqrt();
        let g_norm = (ev.g_lambda.powi(2) + ev.g_mu.iter().map(|g| g * g).sum::<f64>()).sqrt();
        trace.push(TraceRow {
            iteration: i,
            lambda: point.lambda,
            mu: instance.rt_users().iter().map(|&k| point.mu[k]).collect(),
            phi_bits: ev.phi_bits(),
            subgradient_norm: g_norm,
            total_power: ev.total_power,
            rt_rates_bits: instance.rt_users().iter().map(|&k| ev.rates[k] / LN2).collect(),
        });
        if best.as_ref().is_none_or(|b| ev.phi < b.0) {
            best = Some((ev.phi, point.clone(), i));
            since_best = 0;
        } else {
            since_best += 1;
            if params.patience.is_some_and(|p| since_best >= p) {
                delta *= 0.5;
                since_best = 0;
            }
        }
        let stop = ev.g_lambda.abs() <= eps && g_mu_bits_norm <= eps;
        if stop || i + 1 == params.max_iters {
            converged = stop;
            last = Some(ev);
            break;
        }
        let (lambda_scale, mu_scale): (f64, &dyn Fn(usize) -> f64) = match params.step {
            StepRule::Absolute => (1.0, &|_| 1.0),
            StepRule::Relative => (point.lambda, &|k| instance.weights()[k] + point.mu[k]),
        };
        let mut next = point.clone();
        next.lambda = (point.lambda + delta * lambda_scale * ev.g_lambda / instance.p_max()).max(params.lambda_min);
        for (j, &k) in instance.rt_users().iter().enumerate() {
            next.mu[k] = (point.mu[k] + delta * mu_scale(k) * ev.g_mu[j] / d[k]).max(0.0);
        }
        point = next;
    }
    let (best_phi, best_point, best_iteration) = best.expect("at least one iteration");
    Ok(DualSolution {
        best_point,
        best_phi,
        best_iteration,
        trace,
        last: last.expect("loop ran"),
        converged,
    })
}

/// Writes the trace as CSV:
/// `iteration,lambda,mu_1..mu_D,phi_bits,total_power,r_1..r_D`.
pub fn write_trace_csv<W: Write>(out: W, rt_count: usize, trace: &[TraceRow]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["iteration".to_string(), "lambda".to_string()];
    header.extend((1..=rt_count).map(|i| format!("mu_{i}")));
    header.push("phi_bits".into());
    header.push("total_power".into());
    header.extend((1..=rt_count).map(|i| format!("r_{i}")));
    wr.write_record(&header)?;
    for row in trace {
        let mut rec = vec![row.iteration.to_string(), row.lambda.to_string()];
        rec.extend(row.mu.iter().map(|m| m.to_string()));
        rec.push(row.phi_bits.to_string());
        rec.push(row.total_power.to_string());
        rec.extend(row.rt_rates_bits.iter().map(|r| r.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
