//! SDMA sets and the zero-forcing per-user subproblem.
//!
//! For every subcarrier `n`, candidate set `s` and member `k`, the catalog
//! stores the first column of `G⁺` where `G` stacks `h_k` on top of the
//! channels of the other members. Given a power price `λ` and an effective
//! weight `c′`, the member's best power is `p = max(0, c′/(λγ²) − 1)` with
//! `γ = ‖G⁺ e₁‖`, and its beamformer is `w = √p · G⁺ e₁`.
//!
//! All logarithms here are natural; conversion to bits happens at the edges.

use serde::Serialize;
use thiserror::Error;

use crate::channel::ProblemInstance;
use crate::dual::DualPoint;
use crate::numkernel::{pseudo_inverse, CMat, CVec, NumError};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZfError {
    #[error("power price must be strictly positive (got {0}); the subproblem is unbounded")]
    Unbounded(f64),
    #[error("invalid subproblem argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Users allowed to transmit together on one subcarrier, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SdmaSet(Vec<usize>);

impl SdmaSet {
    pub fn new(mut users: Vec<usize>) -> Result<Self, ZfError> {
        if users.is_empty() {
            return Err(ZfError::InvalidArgument("empty SDMA set".into()));
        }
        users.sort_unstable();
        if users.windows(2).any(|w| w[0] == w[1]) {
            return Err(ZfError::InvalidArgument("duplicate user in SDMA set".into()));
        }
        Ok(SdmaSet(users))
    }

    pub fn users(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, user: usize) -> bool {
        self.0.binary_search(&user).is_ok()
    }
}

impl std::fmt::Display for SdmaSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, u) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{u}")?;
        }
        write!(f, "}}")
    }
}

/// All subsets of `0..k` with `1..=min(m, k)` members, in lexicographic
/// order (`[0] < [0,1] < [0,1,2] < [0,2] < [1] ...`).
pub fn enumerate_sdma_sets(k: usize, m: usize) -> Vec<SdmaSet> {
    fn grow(start: usize, k: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<SdmaSet>) {
        for u in start..k {
            cur.push(u);
            out.push(SdmaSet(cur.clone()));
            if cur.len() < cap {
                grow(u + 1, k, cap, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    grow(0, k, m.min(k), &mut Vec::new(), &mut out);
    out
}

/// Closed-form maximizer of `c′ ln(1 + p) − λγ²p` over `p ≥ 0`.
pub fn solve_user_power(c_prime: f64, lambda: f64, gamma: f64) -> Result<f64, ZfError> {
    if !(lambda > 0.0) {
        return Err(ZfError::Unbounded(lambda));
    }
    if !(c_prime > 0.0) || gamma.is_nan() || gamma <= 0.0 {
        return Err(ZfError::InvalidArgument(format!(
            "need c' > 0 and gamma > 0 (c'={c_prime}, gamma={gamma})"
        )));
    }
    Ok(user_power(c_prime, lambda, gamma * gamma))
}

#[inline]
pub(crate) fn user_power(c_prime: f64, lambda: f64, gamma_sqr: f64) -> f64 {
    if !gamma_sqr.is_finite() || c_prime <= 0.0 {
        return 0.0;
    }
    (c_prime / (lambda * gamma_sqr) - 1.0).max(0.0)
}

/// Cached zero-forcing data of one member of one set on one subcarrier.
#[derive(Debug, Clone)]
pub struct MemberData {
    pub user: usize,
    /// `‖G⁺ e₁‖`, infinite when the member cannot be served.
    pub gamma: f64,
    pub gamma_sqr: f64,
    /// First column of `G⁺`; zero vector for degenerate members.
    pub direction: CVec,
}

impl MemberData {
    pub fn degenerate(&self) -> bool {
        !self.gamma.is_finite()
    }
}

/// Every candidate set with its per-subcarrier pseudo-inverse data. Built
/// once per instance; independent of the multipliers.
#[derive(Debug, Clone)]
pub struct SetCatalog {
    sets: Vec<SdmaSet>,
    subcarriers: usize,
    /// Indexed `n * sets.len() + s`.
    entries: Vec<Vec<MemberData>>,
}

impl SetCatalog {
    pub fn sets(&self) -> &[SdmaSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn members(&self, n: usize, s: usize) -> &[MemberData] {
        &self.entries[n * self.sets.len() + s]
    }

    pub fn index_of(&self, set: &SdmaSet) -> Option<usize> {
        self.sets.binary_search(set).ok()
    }

    /// Value `f_{n,s}` of set `s` on subcarrier `n` at price `lambda` and
    /// effective weights `c_prime` (indexed by user).
    pub fn set_value(&self, n: usize, s: usize, lambda: f64, c_prime: &[f64]) -> f64 {
        self.members(n, s)
            .iter()
            .map(|md| {
                let c = c_prime[md.user];
                let p = user_power(c, lambda, md.gamma_sqr);
                if p > 0.0 {
                    c * p.ln_1p() - lambda * md.gamma_sqr * p
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn evaluate(&self, n: usize, s: usize, lambda: f64, c_prime: &[f64]) -> Result<SetEvaluation, ZfError> {
        if !(lambda > 0.0) {
            return Err(ZfError::Unbounded(lambda));
        }
        let members: Vec<MemberEval> = self
            .members(n, s)
            .iter()
            .map(|md| {
                let c = c_prime[md.user];
                let p = user_power(c, lambda, md.gamma_sqr);
                let w = if p > 0.0 {
                    md.direction.scale(p.sqrt())
                } else {
                    CVec::zeros(md.direction.len())
                };
                let f = if p > 0.0 {
                    c * p.ln_1p() - lambda * w.norm_sqr()
                } else {
                    0.0
                };
                MemberEval { user: md.user, p, f, w }
            })
            .collect();
        let value = members.iter().map(|m| m.f).sum();
        Ok(SetEvaluation {
            set_index: s,
            members,
            value,
        })
    }

    /// Best set on subcarrier `n`; ties go to the lexicographically
    /// smallest set.
    pub fn best(&self, n: usize, lambda: f64, c_prime: &[f64]) -> Result<SetEvaluation, ZfError> {
        if !(lambda > 0.0) {
            return Err(ZfError::Unbounded(lambda));
        }
        let mut best = (0usize, f64::NEG_INFINITY);
        for s in 0..self.sets.len() {
            let v = self.set_value(n, s, lambda, c_prime);
            if v > best.1 {
                best = (s, v);
            }
        }
        self.evaluate(n, best.0, lambda, c_prime)
    }
}

/// Solution of one set's subproblem.
#[derive(Debug, Clone)]
pub struct SetEvaluation {
    pub set_index: usize,
    pub members: Vec<MemberEval>,
    /// `f_{n,s}` in nats.
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct MemberEval {
    pub user: usize,
    pub p: f64,
    pub f: f64,
    pub w: CVec,
}

/// Catalog for every subcarrier and every set of at most `M` users.
pub fn build_catalog(instance: &ProblemInstance) -> Result<SetCatalog, ZfError> {
    let sets = enumerate_sdma_sets(instance.users(), instance.antennas());
    let count = sets.len();
    let entries = par::map_range(instance.subcarriers() * count, |idx| {
        let (n, s) = (idx / count, idx % count);
        set_members(instance, n, &sets[s])
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(SetCatalog {
        sets,
        subcarriers: instance.subcarriers(),
        entries,
    })
}

fn set_members(instance: &ProblemInstance, n: usize, set: &SdmaSet) -> Result<Vec<MemberData>, ZfError> {
    set.users().iter().map(|&k| member_data(instance, n, set, k)).collect()
}

/// Zero-forcing direction of `user` against the other members of `set`.
///
/// Members with an all-zero channel need no nulling and are left out of
/// `G`. A user whose own channel is zero, or lies in the span of the
/// others, gets an infinite `γ`.
pub fn member_data(instance: &ProblemInstance, n: usize, set: &SdmaSet, user: usize) -> Result<MemberData, ZfError> {
    let m = instance.antennas();
    let h = instance.channel(user, n);
    let degenerate = || MemberData {
        user,
        gamma: f64::INFINITY,
        gamma_sqr: f64::INFINITY,
        direction: CVec::zeros(m),
    };
    if h.is_zero() {
        return Ok(degenerate());
    }
    let mut rows: Vec<&CVec> = vec![h];
    rows.extend(
        set.users()
            .iter()
            .filter(|&&j| j != user)
            .map(|&j| instance.channel(j, n))
            .filter(|hj| !hj.is_zero()),
    );
    let g = CMat::from_rows(&rows)?;
    let g_plus = pseudo_inverse(&g)?;
    let dir = g_plus.column(0);
    let gain = h.dot(&dir);
    let leak = rows[1..].iter().map(|hj| hj.dot(&dir).norm()).fold(0.0, f64::max);
    if (gain.re - 1.0).abs() > 1e-6 || gain.im.abs() > 1e-6 || leak > 1e-6 * h.norm().max(1.0) {
        return Ok(degenerate());
    }
    let gamma_sqr = dir.norm_sqr();
    Ok(MemberData {
        user,
        gamma: gamma_sqr.sqrt(),
        gamma_sqr,
        direction: dir,
    })
}

/// Effective weights `c′ = c + μ`.
pub fn effective_weights(instance: &ProblemInstance, dual: &DualPoint) -> Vec<f64> {
    instance.weights().iter().zip(&dual.mu).map(|(c, m)| c + m).collect()
}

pub fn evaluate_set(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    n: usize,
    s: &SdmaSet,
    dual: &DualPoint,
) -> Result<SetEvaluation, ZfError> {
    let idx = catalog
        .index_of(s)
        .ok_or_else(|| ZfError::InvalidArgument(format!("set {s} not in catalog")))?;
    catalog.evaluate(n, idx, dual.lambda, &effective_weights(instance, dual))
}

pub fn best_set(
    instance: &ProblemInstance,
    catalog: &SetCatalog,
    n: usize,
    dual: &DualPoint,
) -> Result<(SdmaSet, f64, SetEvaluation), ZfError> {
    let eval = catalog.best(n, dual.lambda, &effective_weights(instance, dual))?;
    Ok((catalog.sets()[eval.set_index].clone(), eval.value, eval))
}
