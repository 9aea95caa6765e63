//! Scenario sweeps: configuration, execution, aggregation and output files.
//!
//! A scenario fixes the system size and varies one axis (minimum rate, RT
//! attenuation or number of RT users). Each realization index draws one set
//! of channels shared by every sweep point, so points are compared on common
//! random numbers.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{
    enumerate_exact, joint_assignment_count, weight_adjust_solve, WeightAdjustParams, ENUMERATION_CAP,
};
use crate::channel::{generate_instance, InstanceError, InstanceSpec, ProblemInstance};
use crate::dual::{solve_dual, write_trace_csv, DualParams, DualSolution};
use crate::feasible::{
    certified_infeasible, feasible_from_dual, FeasibleSearchParams, Method, SolveError, SolveReport,
};
use crate::par;
use crate::zfcore::{build_catalog, enumerate_sdma_sets};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config field `{field}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("rows from different configurations ({0} and {1})")]
    MixedConfig(String, String),
    #[error("sweep point {0} out of range")]
    NoSuchPoint(usize),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// The varied parameter; exactly one list must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt_count: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    MinRate,
    AttenuationDb,
    RtCount,
}

fn default_realizations() -> usize {
    100
}
fn default_min_rate() -> f64 {
    20.0
}
fn default_rt_count() -> usize {
    1
}
fn default_methods() -> Vec<Method> {
    vec![Method::DualBound, Method::DualFeasible, Method::WeightAdjust]
}
fn default_cap() -> u64 {
    ENUMERATION_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub p_max: f64,
    /// Defaults to all ones.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Gain in dB applied to every channel on top of the unit-variance
    /// draw; equivalent to scaling the power budget by the same factor.
    #[serde(default)]
    pub reference_gain_db: f64,
    /// Minimum rate (bits) of each RT user when it is not swept.
    #[serde(default = "default_min_rate")]
    pub min_rate: f64,
    /// Number of RT users (users `0..D`) when it is not swept.
    #[serde(default = "default_rt_count")]
    pub rt_count: usize,
    /// Attenuation of the RT users when it is not swept.
    #[serde(default)]
    pub rt_attenuation_db: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub sweep: Sweep,
    #[serde(default)]
    pub dual: DualParams,
    #[serde(default)]
    pub search: FeasibleSearchParams,
    #[serde(default)]
    pub weight_adjust: WeightAdjustParams,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        Self::parse(text, "<config>")
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    fn parse(text: &str, origin: &str) -> Result<Self, BenchError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| BenchError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate_with(Some(text))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.validate_with(None)
    }

    fn validate_with(&self, text: Option<&str>) -> Result<(), BenchError> {
        let bad = |field: &str, message: String| BenchError::Invalid {
            field: field.to_string(),
            line: text.and_then(|t| line_of(t, field)),
            message,
        };
        if self.m == 0 || self.k == 0 || self.n == 0 {
            let f = if self.m == 0 {
                "m"
            } else if self.k == 0 {
                "k"
            } else {
                "n"
            };
            return Err(bad(f, "must be at least 1".into()));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(bad("p_max", format!("must be positive, got {}", self.p_max)));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.k || w.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
                return Err(bad("weights", format!("need {} positive entries", self.k)));
            }
        }
        if self.realizations == 0 {
            return Err(bad("realizations", "must be at least 1".into()));
        }
        if !self.reference_gain_db.is_finite() || !self.rt_attenuation_db.is_finite() {
            return Err(bad("reference_gain_db", "must be finite".into()));
        }
        if self.methods.is_empty() {
            return Err(bad("methods", "at least one method is required".into()));
        }
        let given = [
            self.sweep.min_rate.is_some(),
            self.sweep.attenuation_db.is_some(),
            self.sweep.rt_count.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if given != 1 {
            return Err(bad(
                "sweep",
                format!("exactly one of min_rate, attenuation_db, rt_count is required, found {given}"),
            ));
        }
        if self.points().is_empty() {
            return Err(bad("sweep", "sweep list is empty".into()));
        }
        for i in 0..self.points().len() {
            let (d, rt_count, atten) = self.point_parameters(i);
            if rt_count > self.k {
                return Err(bad(
                    "rt_count",
                    format!("{rt_count} RT users but only {} users", self.k),
                ));
            }
            if rt_count > 0 && !(d > 0.0 && d.is_finite()) {
                return Err(bad("min_rate", format!("must be positive, got {d}")));
            }
            if !atten.is_finite() {
                return Err(bad("attenuation_db", "must be finite".into()));
            }
        }
        if self.dual.delta <= 0.0 || self.dual.max_iters == 0 {
            return Err(bad("dual", "delta and max_iters must be positive".into()));
        }
        if self.search.j_max == 0 || self.search.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(bad("search", "delta must be positive and j_max at least 1".into()));
        }
        if !(self.weight_adjust.epsilon > 0.0 && self.weight_adjust.epsilon <= 1.0)
            || self.weight_adjust.max_iterations == 0
        {
            return Err(bad(
                "weight_adjust",
                "epsilon must be in (0, 1] and max_iterations at least 1".into(),
            ));
        }
        if self.methods.contains(&Method::Exact) {
            let total = joint_assignment_count(enumerate_sdma_sets(self.k, self.m).len(), self.n);
            if total > self.enumeration_cap as f64 {
                return Err(bad(
                    "methods",
                    format!(
                        "exact needs {total:e} joint assignments, above the cap of {}",
                        self.enumeration_cap
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn axis(&self) -> SweepAxis {
        if self.sweep.min_rate.is_some() {
            SweepAxis::MinRate
        } else if self.sweep.attenuation_db.is_some() {
            SweepAxis::AttenuationDb
        } else {
            SweepAxis::RtCount
        }
    }

    /// Sweep values as reported in the CSV.
    pub fn points(&self) -> Vec<f64> {
        match self.axis() {
            SweepAxis::MinRate => self.sweep.min_rate.clone().unwrap_or_default(),
            SweepAxis::AttenuationDb => self.sweep.attenuation_db.clone().unwrap_or_default(),
            SweepAxis::RtCount => self
                .sweep
                .rt_count
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(|d| d as f64)
                .collect(),
        }
    }

    /// `(ď, D, RT attenuation)` at sweep point `i`.
    fn point_parameters(&self, i: usize) -> (f64, usize, f64) {
        let (mut d, mut rt, mut att) = (self.min_rate, self.rt_count, self.rt_attenuation_db);
        match self.axis() {
            SweepAxis::MinRate => d = self.sweep.min_rate.as_ref().map_or(d, |v| v[i]),
            SweepAxis::AttenuationDb => att = self.sweep.attenuation_db.as_ref().map_or(att, |v| v[i]),
            SweepAxis::RtCount => rt = self.sweep.rt_count.as_ref().map_or(rt, |v| v[i]),
        }
        (d, rt, att)
    }

    /// Instance parameters at sweep point `i`.
    pub fn instance_spec(&self, i: usize) -> Result<InstanceSpec, BenchError> {
        if i >= self.points().len() {
            return Err(BenchError::NoSuchPoint(i));
        }
        let (d, rt, att) = self.point_parameters(i);
        let mut atten_db = vec![-self.reference_gain_db; self.k];
        for a in atten_db.iter_mut().take(rt) {
            *a += att;
        }
        Ok(InstanceSpec {
            m: self.m,
            k: self.k,
            n: self.n,
            p_max: self.p_max,
            weights: self.weights.clone().unwrap_or_else(|| vec![1.0; self.k]),
            rt_users: (0..rt).collect(),
            d_min: vec![d; rt],
            atten_db,
            seed: self.seed,
        })
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// First line (1-based) that assigns `key` or opens table `[key]`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('=')) || t.starts_with(&format!("[{key}]"))
        })
        .map(|i| i + 1)
}

/// Overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub realizations: Option<usize>,
    /// `Some(1)` runs everything on the calling thread.
    pub workers: Option<usize>,
    pub methods: Option<Vec<Method>>,
    /// Build a fresh catalog for every method instead of once per
    /// realization.
    pub rebuild_catalog: bool,
}

impl RunOptions {
    pub fn apply(&self, config: &ScenarioConfig) -> Result<ScenarioConfig, BenchError> {
        let mut cfg = config.clone();
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if let Some(m) = &self.methods {
            cfg.methods = m.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    #[serde(skip)]
    pub config_hash: String,
    #[serde(skip)]
    pub point: usize,
    #[serde(skip)]
    pub realization: usize,
    pub sweep_value: f64,
    pub report: SolveReport,
    /// Solver error, if the method failed outright.
    #[serde(skip)]
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 9] = [
    "instance_id",
    "sweep_value",
    "method",
    "objective_bits",
    "bound_bits",
    "gap_percent",
    "feasible",
    "iterations",
    "seconds",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub method: Method,
    pub realizations: usize,
    pub feasible_count: usize,
    pub feasibility_rate: f64,
    pub mean_objective_bits: Option<f64>,
    pub mean_bound_bits: Option<f64>,
    pub mean_gap_percent: Option<f64>,
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub rows: Vec<SummaryRow>,
}

impl RunSummary {
    pub fn get(&self, sweep_value: f64, method: Method) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.method == method)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub rows: Vec<ResultRow>,
    pub summary: RunSummary,
    /// Dual trace of realization 0 at each sweep point.
    pub traces: Vec<(f64, usize, Vec<crate::dual::TraceRow>)>,
    pub errors: Vec<String>,
}

/// Runs every (sweep point, realization, method) combination.
pub fn run_scenario(config: &ScenarioConfig, options: &RunOptions) -> Result<ScenarioRun, BenchError> {
    let cfg = options.apply(config)?;
    match options.workers {
        Some(1) => par::sequential(|| execute(&cfg, options)),
        #[cfg(feature = "parallel")]
        Some(w) if w > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| BenchError::Invalid {
                    field: "workers".into(),
                    line: None,
                    message: e.to_string(),
                })?;
            pool.install(|| execute(&cfg, options))
        }
        Some(0) => Err(BenchError::Invalid {
            field: "workers".into(),
            line: None,
            message: "must be at least 1".into(),
        }),
        _ => execute(&cfg, options),
    }
}

type Job = (Vec<ResultRow>, Option<Vec<crate::dual::TraceRow>>);

fn execute(cfg: &ScenarioConfig, options: &RunOptions) -> Result<ScenarioRun, BenchError> {
    let hash = cfg.hash();
    let points = cfg.points();
    let reals = cfg.realizations;
    let jobs: Vec<Result<Job, BenchError>> = par::map_range(points.len() * reals, |j| {
        run_job(cfg, &hash, j / reals, j % reals, options.rebuild_catalog)
    });
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (j, job) in jobs.into_iter().enumerate() {
        let (r, trace) = job?;
        rows.extend(r);
        if let Some(t) = trace {
            let p = j / reals;
            traces.push((points[p], cfg.instance_spec(p)?.rt_users.len(), t));
        }
    }
    let errors = rows
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("{} {} {}: {e}", r.report.instance_id, r.sweep_value, r.report.method))
        })
        .collect();
    let summary = aggregate(&rows)?;
    Ok(ScenarioRun {
        config: cfg.clone(),
        rows,
        summary,
        traces,
        errors,
    })
}

fn run_job(
    cfg: &ScenarioConfig,
    hash: &str,
    point: usize,
    realization: usize,
    rebuild: bool,
) -> Result<Job, BenchError> {
    let spec = cfg.instance_spec(point)?;
    let instance = generate_instance(&spec, realization as u64)?;
    let sweep_value = cfg.points()[point];
    let row = |report: SolveReport, error: Option<String>| ResultRow {
        config_hash: hash.to_string(),
        point,
        realization,
        sweep_value,
        report,
        error,
    };
    let failed = |method: Method, e: String| row(SolveReport::new(&instance, method, None, false), Some(e));

    let t0 = Instant::now();
    let catalog = match build_catalog(&instance) {
        Ok(c) => c,
        Err(e) => return Ok((cfg.methods.iter().map(|&m| failed(m, e.to_string())).collect(), None)),
    };
    let catalog_secs = t0.elapsed().as_secs_f64();
    let fresh = || if rebuild { build_catalog(&instance).ok() } else { None };

    let t1 = Instant::now();
    let dual = match solve_dual(&instance, &catalog, &cfg.dual) {
        Ok(d) => d,
        Err(e) => return Ok((cfg.methods.iter().map(|&m| failed(m, e.to_string())).collect(), None)),
    };
    let dual_secs = t1.elapsed().as_secs_f64();
    let bound = dual.bound_bits();
    let trace = (realization == 0).then(|| dual.trace.clone());

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let own = fresh();
        let cat = own.as_ref().unwrap_or(&catalog);
        let result: Result<SolveReport, SolveError> = match method {
            Method::DualBound => {
                let mut r = SolveReport::new(&instance, method, Some(bound), !certified_infeasible(&instance, &dual));
                r.iterations = dual.iterations();
                r.seconds = catalog_secs + dual_secs;
                Ok(r.with_bound(bound))
            }
            Method::DualFeasible => feasible_from_dual(&instance, cat, dual.clone(), &cfg.search).map(|o| {
                let mut r = o.solved.report;
                r.seconds += catalog_secs + dual_secs;
                r
            }),
            Method::WeightAdjust => weight_adjust_solve(&instance, cat, &cfg.weight_adjust).map(|o| {
                let mut r = o.solved.report.with_bound(bound);
                r.seconds += catalog_secs;
                r
            }),
            Method::Exact => enumerate_exact(&instance, cat, cfg.enumeration_cap).map(|o| {
                let mut r = o.report.with_bound(bound);
                r.seconds += catalog_secs;
                r
            }),
        };
        out.push(match result {
            Ok(r) => row(r, None),
            Err(e) => failed(method, e.to_string()),
        });
    }
    Ok((out, trace))
}

/// Per (sweep point, method) means over feasible realizations.
pub fn aggregate(rows: &[ResultRow]) -> Result<RunSummary, BenchError> {
    let hash = rows.first().map(|r| r.config_hash.clone()).unwrap_or_default();
    if let Some(r) = rows.iter().find(|r| r.config_hash != hash) {
        return Err(BenchError::MixedConfig(hash, r.config_hash.clone()));
    }
    let mut groups: BTreeMap<(usize, Method), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.point, r.report.method)).or_default().push(r);
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let out = groups
        .into_values()
        .map(|g| {
            let feasible: Vec<&&ResultRow> = g.iter().filter(|r| r.report.feasible).collect();
            SummaryRow {
                sweep_value: g[0].sweep_value,
                method: g[0].report.method,
                realizations: g.len(),
                feasible_count: feasible.len(),
                feasibility_rate: feasible.len() as f64 / g.len() as f64,
                mean_objective_bits: mean(feasible.iter().filter_map(|r| r.report.objective_bits).collect()),
                mean_bound_bits: mean(feasible.iter().filter_map(|r| r.report.bound_bits).collect()),
                mean_gap_percent: mean(feasible.iter().filter_map(|r| r.report.gap_percent).collect()),
                mean_seconds: mean(feasible.iter().map(|r| r.report.seconds).collect()),
            }
        })
        .collect();
    Ok(RunSummary {
        config_hash: hash,
        rows: out,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes rows as CSV with [`CSV_HEADER`].
pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), BenchError> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        let p = &r.report;
        wr.write_record([
            p.instance_id.clone(),
            r.sweep_value.to_string(),
            p.method.label().to_string(),
            opt(p.objective_bits),
            opt(p.bound_bits),
            opt(p.gap_percent),
            p.feasible.to_string(),
            p.iterations.to_string(),
            p.seconds.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    name: &'a str,
    config_hash: &'a str,
    axis: SweepAxis,
    config: &'a ScenarioConfig,
    summary: &'a [SummaryRow],
    errors: &'a [String],
}

/// Writes `results.csv`, `summary.json` and `traces/point_<i>.csv` under
/// `dir`; returns the paths written.
pub fn write_outputs(dir: &Path, run: &ScenarioRun) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir.join("traces"))?;
    let mut written = Vec::new();
    let csv_path = dir.join("results.csv");
    write_results_csv(fs::File::create(&csv_path)?, &run.rows)?;
    written.push(csv_path);
    let doc = SummaryDocument {
        name: &run.config.name,
        config_hash: &run.summary.config_hash,
        axis: run.config.axis(),
        config: &run.config,
        summary: &run.summary.rows,
        errors: &run.errors,
    };
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&doc)?)?;
    written.push(summary_path);
    for (i, (_, rt, trace)) in run.traces.iter().enumerate() {
        let p = dir.join("traces").join(format!("point_{i}.csv"));
        write_trace_csv(fs::File::create(&p)?, *rt, trace)?;
        written.push(p);
    }
    Ok(written)
}

/// Instance and dual solution for one (sweep point, realization).
pub fn trace_instance(
    config: &ScenarioConfig,
    point: usize,
    realization: u64,
) -> Result<(ProblemInstance, DualSolution), BenchError> {
    let instance = generate_instance(&config.instance_spec(point)?, realization)?;
    let catalog = build_catalog(&instance).map_err(SolveError::from)?;
    let dual = solve_dual(&instance, &catalog, &config.dual).map_err(SolveError::from)?;
    Ok((instance, dual))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub instance_id: String,
    pub bound_bits: f64,
    pub reports: Vec<SolveReport>,
    /// Every feasible objective is at most the bound.
    pub weak_duality: bool,
    /// The exact objective dominates every other feasible objective;
    /// `None` when enumeration was not run.
    pub exact_dominates: Option<bool>,
}

/// Runs every method on one instance and cross-checks the results.
pub fn oracle_instance(config: &ScenarioConfig, point: usize, realization: u64) -> Result<OracleReport, BenchError> {
    let instance = generate_instance(&config.instance_spec(point)?, realization)?;
    let catalog = build_catalog(&instance).map_err(SolveError::from)?;
    let dual = solve_dual(&instance, &catalog, &config.dual).map_err(SolveError::from)?;
    let bound = dual.bound_bits();
    let mut reports = Vec::new();
    let mut r = SolveReport::new(
        &instance,
        Method::DualBound,
        Some(bound),
        !certified_infeasible(&instance, &dual),
    );
    r.iterations = dual.iterations();
    reports.push(r.with_bound(bound));
    reports.push(
        feasible_from_dual(&instance, &catalog, dual, &config.search)?
            .solved
            .report,
    );
    reports.push(
        weight_adjust_solve(&instance, &catalog, &config.weight_adjust)?
            .solved
            .report
            .with_bound(bound),
    );
    let exact = match enumerate_exact(&instance, &catalog, config.enumeration_cap) {
        Ok(s) => Some(s.report.with_bound(bound)),
        Err(SolveError::TooLarge { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let feasible_objs: Vec<f64> = reports[1..]
        .iter()
        .chain(exact.iter())
        .filter(|r| r.feasible)
        .filter_map(|r| r.objective_bits)
        .collect();
    let weak_duality = feasible_objs.iter().all(|&u| bound >= u - 1e-6 * bound.abs());
    let exact_dominates = exact.as_ref().map(|e| {
        let best = if e.feasible {
            e.objective_bits.unwrap_or(f64::NEG_INFINITY)
        } else {
            f64::NEG_INFINITY
        };
        reports[1..]
            .iter()
            .filter(|r| r.feasible)
            .filter_map(|r| r.objective_bits)
            .all(|u| best >= u - 1e-6 * u.abs())
    });
    reports.extend(exact);
    Ok(OracleReport {
        instance_id: instance.instance_id.clone(),
        bound_bits: bound,
        reports,
        weak_duality,
        exact_dominates,
    })
}
