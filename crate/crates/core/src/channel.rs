//! Problem instances: Rayleigh-fading channels with per-user large-scale
//! attenuation, plus the JSON instance file used for cross-checking.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::CVec;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("instance file: {0}")]
    Io(#[from] std::io::Error),
    #[error("instance file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Everything needed to draw an instance except the fading itself.
///
/// `atten_db[k]` is the large-scale loss of user `k`; negative values are
/// gains. User ids are zero based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub p_max: f64,
    pub weights: Vec<f64>,
    pub rt_users: Vec<usize>,
    /// Minimum rate in bits/s/Hz over the slot, aligned with `rt_users`.
    pub d_min: Vec<f64>,
    pub atten_db: Vec<f64>,
    pub seed: u64,
}

impl InstanceSpec {
    /// Equal weights, no RT users, no attenuation.
    pub fn simple(m: usize, k: usize, n: usize, p_max: f64, seed: u64) -> Self {
        InstanceSpec {
            m,
            k,
            n,
            p_max,
            weights: vec![1.0; k],
            rt_users: Vec::new(),
            d_min: Vec::new(),
            atten_db: vec![0.0; k],
            seed,
        }
    }

    pub fn with_rt(mut self, rt_users: Vec<usize>, d_min: Vec<f64>) -> Self {
        self.rt_users = rt_users;
        self.d_min = d_min;
        self
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let bad = |msg: String| Err(InstanceError::Invalid(msg));
        if self.m == 0 || self.k == 0 || self.n == 0 {
            return bad(format!(
                "dimensions must be positive (m={}, k={}, n={})",
                self.m, self.k, self.n
            ));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return bad(format!("p_max must be positive, got {}", self.p_max));
        }
        if self.weights.len() != self.k {
            return bad(format!("{} weights for {} users", self.weights.len(), self.k));
        }
        if self.weights.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return bad("weights must be positive".into());
        }
        if self.atten_db.len() != self.k {
            return bad(format!("{} attenuations for {} users", self.atten_db.len(), self.k));
        }
        if self.atten_db.iter().any(|a| !a.is_finite()) {
            return bad("attenuation must be finite".into());
        }
        if self.rt_users.len() != self.d_min.len() {
            return bad("rt_users and d_min differ in length".into());
        }
        if self.rt_users.len() > self.k {
            return bad("more RT users than users".into());
        }
        let mut seen = vec![false; self.k];
        for &u in &self.rt_users {
            if u >= self.k {
                return bad(format!("RT user {u} out of range"));
            }
            if std::mem::replace(&mut seen[u], true) {
                return bad(format!("RT user {u} listed twice"));
            }
        }
        if self.d_min.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("minimum rates must be positive".into());
        }
        Ok(())
    }
}

/// One scheduling slot: channels, budget, weights and rate floors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub spec: InstanceSpec,
    pub instance_id: String,
    /// Row vectors `h[k][n]` stored at index `k * n_subcarriers + n`.
    channels: Vec<CVec>,
}

impl ProblemInstance {
    pub fn from_channels(
        spec: InstanceSpec,
        instance_id: impl Into<String>,
        channels: Vec<CVec>,
    ) -> Result<Self, InstanceError> {
        spec.validate()?;
        if channels.len() != spec.k * spec.n {
            return Err(InstanceError::Invalid(format!(
                "{} channel vectors, expected {}",
                channels.len(),
                spec.k * spec.n
            )));
        }
        if channels.iter().any(|h| h.len() != spec.m) {
            return Err(InstanceError::Invalid(format!(
                "every channel vector must have {} entries",
                spec.m
            )));
        }
        Ok(ProblemInstance {
            spec,
            instance_id: instance_id.into(),
            channels,
        })
    }

    pub fn antennas(&self) -> usize {
        self.spec.m
    }

    pub fn users(&self) -> usize {
        self.spec.k
    }

    pub fn subcarriers(&self) -> usize {
        self.spec.n
    }

    pub fn p_max(&self) -> f64 {
        self.spec.p_max
    }

    pub fn weights(&self) -> &[f64] {
        &self.spec.weights
    }

    pub fn rt_users(&self) -> &[usize] {
        &self.spec.rt_users
    }

    pub fn channel(&self, user: usize, subcarrier: usize) -> &CVec {
        &self.channels[user * self.spec.n + subcarrier]
    }

    /// Minimum rate of `user` in bits, if it is a real-time user.
    pub fn min_rate_bits(&self, user: usize) -> Option<f64> {
        self.spec
            .rt_users
            .iter()
            .position(|&u| u == user)
            .map(|i| self.spec.d_min[i])
    }

    /// Per-user minimum rates in nats (zero for best-effort users).
    pub fn min_rates_nats(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.k];
        for (&u, &d) in self.spec.rt_users.iter().zip(&self.spec.d_min) {
            out[u] = d * std::f64::consts::LN_2;
        }
        out
    }

    pub fn with_p_max(&self, p_max: f64) -> Self {
        let mut out = self.clone();
        out.spec.p_max = p_max;
        out
    }

    pub fn with_rt(&self, rt_users: Vec<usize>, d_min: Vec<f64>) -> Result<Self, InstanceError> {
        let mut out = self.clone();
        out.spec.rt_users = rt_users;
        out.spec.d_min = d_min;
        out.spec.validate()?;
        Ok(out)
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, InstanceError> {
        let mut out = self.clone();
        out.spec.weights = weights;
        out.spec.validate()?;
        Ok(out)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), InstanceError> {
        let text = serde_json::to_string_pretty(&InstanceFile::from(self))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// Counter-based seed derivation: independent streams per realization,
/// insensitive to the order in which realizations are generated.
pub fn realization_seed(seed: u64, realization: u64) -> u64 {
    splitmix64(seed ^ splitmix64(realization.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws the channels of realization `realization` of `spec`.
///
/// Each coefficient is CN(0, 1) (independent real and imaginary parts of
/// variance 1/2), scaled by `sqrt(10^(-atten_db/10))`. Draw order is
/// user-major, then subcarrier, then antenna, so a user's fading does not
/// depend on the attenuation of others.
pub fn generate_instance(spec: &InstanceSpec, realization: u64) -> Result<ProblemInstance, InstanceError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(spec.seed, realization));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut channels = Vec::with_capacity(spec.k * spec.n);
    for k in 0..spec.k {
        let amp = 10f64.powf(-spec.atten_db[k] / 20.0) * s;
        for _ in 0..spec.n {
            let entries = (0..spec.m)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * amp, im * amp)
                })
                .collect();
            channels.push(CVec::new(entries).map_err(|e| InstanceError::Invalid(e.to_string()))?);
        }
    }
    ProblemInstance::from_channels(spec.clone(), format!("s{}-r{}", spec.seed, realization), channels)
}

/// On-disk layout of an instance. `channels[k][n][a] = [re, im]`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    instance_id: String,
    m: usize,
    k: usize,
    n: usize,
    p_max: f64,
    rt_users: Vec<usize>,
    d_min: Vec<f64>,
    weights: Vec<f64>,
    atten_db: Vec<f64>,
    seed: u64,
    channels: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&ProblemInstance> for InstanceFile {
    fn from(inst: &ProblemInstance) -> Self {
        let s = &inst.spec;
        let channels = (0..s.k)
            .map(|k| {
                (0..s.n)
                    .map(|n| inst.channel(k, n).entries().iter().map(|z| [z.re, z.im]).collect())
                    .collect()
            })
            .collect();
        InstanceFile {
            instance_id: inst.instance_id.clone(),
            m: s.m,
            k: s.k,
            n: s.n,
            p_max: s.p_max,
            rt_users: s.rt_users.clone(),
            d_min: s.d_min.clone(),
            weights: s.weights.clone(),
            atten_db: s.atten_db.clone(),
            seed: s.seed,
            channels,
        }
    }
}

impl TryFrom<InstanceFile> for ProblemInstance {
    type Error = InstanceError;

    fn try_from(f: InstanceFile) -> Result<Self, InstanceError> {
        let spec = InstanceSpec {
            m: f.m,
            k: f.k,
            n: f.n,
            p_max: f.p_max,
            weights: f.weights,
            rt_users: f.rt_users,
            d_min: f.d_min,
            atten_db: f.atten_db,
            seed: f.seed,
        };
        if f.channels.len() != spec.k || f.channels.iter().any(|per| per.len() != spec.n) {
            return Err(InstanceError::Invalid(
                "channel array shape does not match k x n".into(),
            ));
        }
        let mut channels = Vec::with_capacity(spec.k * spec.n);
        for per_user in f.channels {
            for h in per_user {
                let entries = h.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
                channels.push(CVec::new(entries).map_err(|e| InstanceError::Invalid(e.to_string()))?);
            }
        }
        ProblemInstance::from_channels(spec, f.instance_id, channels)
    }
}
