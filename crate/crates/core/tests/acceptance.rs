//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails.

use std::process::ExitCode;

use ofdma_sdma::baselines::{enumerate_exact, weight_adjust_solve, WeightAdjustParams, ENUMERATION_CAP};
use ofdma_sdma::bench::{run_scenario, write_results_csv, RunOptions, RunSummary, ScenarioConfig};
use ofdma_sdma::channel::{generate_instance, InstanceSpec, ProblemInstance};
use ofdma_sdma::dual::{dual_value, DualParams, DualPoint};
use ofdma_sdma::feasible::{dual_feasible_solve, FeasibleSearchParams, Method};
use ofdma_sdma::poweralloc::{compute_betas, kkt_residuals, solve_power_allocation, Allocation, Assignment};
use ofdma_sdma::zfcore::{build_catalog, solve_user_power, SdmaSet, SetCatalog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Channel gain of the reference operating point, calibrated on seeds
/// disjoint from the ones below.
const REF_GAIN_DB: f64 = 19.0;
const SEED: u64 = 2024;
const SEEDS: usize = 20;

struct Gate {
    lines: Vec<(usize, bool, String)>,
}

impl Gate {
    fn record(&mut self, id: usize, pass: bool, detail: String) {
        println!("criterion {id:>2}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, detail));
    }

    fn info(&self, text: String) {
        println!("             info | {text}");
    }
}

fn small_config(min_rates: &[f64], gain_db: f64) -> ScenarioConfig {
    let text = format!(
        "m = 3\nk = 4\nn = 2\np_max = 20.0\nseed = {SEED}\nrealizations = {SEEDS}\nreference_gain_db = {gain_db}\n\
         methods = [\"dual_bound\", \"dual_feasible\", \"weight_adjust\", \"exact\"]\n[sweep]\nmin_rate = {min_rates:?}\n"
    );
    ScenarioConfig::from_toml_str(&text).expect("valid config")
}

fn large_config(sweep: &str, min_rate: f64, gain_db: f64) -> ScenarioConfig {
    let text = format!(
        "m = 3\nk = 16\nn = 16\np_max = 20.0\nseed = {SEED}\nrealizations = {SEEDS}\nreference_gain_db = {gain_db}\n\
         min_rate = {min_rate:?}\nmethods = [\"dual_bound\", \"dual_feasible\", \"weight_adjust\"]\n[sweep]\n{sweep}\n"
    );
    ScenarioConfig::from_toml_str(&text).expect("valid config")
}

fn mean_of(summary: &RunSummary, x: f64, m: Method, f: impl Fn(&ofdma_sdma::bench::SummaryRow) -> Option<f64>) -> f64 {
    summary.get(x, m).and_then(f).unwrap_or(f64::NAN)
}

/// Largest violation of the allocation identities, relative where the
/// criterion is relative.
fn identity_violations(inst: &ProblemInstance, a: &Allocation) -> (f64, f64, f64, f64) {
    let zf = a.zf_residual(inst);
    let diag = a.diagonalization_residual(inst);
    let betas = compute_betas(inst, &a.assignment).expect("valid assignment");
    let weighted: f64 = a
        .powers
        .iter()
        .zip(&betas)
        .flat_map(|(p, b)| p.iter().zip(b).map(|(p, b)| if *p > 0.0 { p * b } else { 0.0 }))
        .sum();
    let power = (a.total_power - weighted).abs();
    let zf_rates = a.zf_rates_bits(inst.users());
    let rates = a
        .rates_bits
        .iter()
        .zip(&zf_rates)
        .map(|(g, z)| (g - z).abs() / z.abs().max(1e-12))
        .filter(|e| e.is_finite())
        .fold(0.0, f64::max);
    (zf, diag, power, rates)
}

#[derive(Default)]
struct Identities {
    count: usize,
    zf: f64,
    diag: f64,
    power: f64,
    rates: f64,
}

impl Identities {
    fn add(&mut self, inst: &ProblemInstance, a: &Allocation) {
        let (zf, diag, power, rates) = identity_violations(inst, a);
        self.count += 1;
        self.zf = self.zf.max(zf);
        self.diag = self.diag.max(diag);
        self.power = self.power.max(power);
        self.rates = self.rates.max(rates);
    }

    fn ok(&self) -> bool {
        self.zf <= 1e-8 && self.diag <= 1e-8 && self.power <= 1e-9 && self.rates <= 1e-6
    }
}

fn criterion_1_and_5(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut ids = Identities::default();
    let instances = 200;
    for i in 0..instances {
        let m = rng.random_range(1..=3);
        let k = rng.random_range(1..=8);
        let n = rng.random_range(1..=4);
        let p = 10f64.powf(rng.random_range(0.0..2.5));
        let d = rng.random_range(0..=k.min(2));
        let rt: Vec<usize> = (0..d).collect();
        let dmin: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..6.0)).collect();
        let spec = InstanceSpec::simple(m, k, n, p, 7000 + i as u64).with_rt(rt, dmin);
        let inst = generate_instance(&spec, 0).expect("instance");
        let cat = build_catalog(&inst).expect("catalog");
        let params = DualParams {
            max_iters: 200,
            ..Default::default()
        };
        let out = dual_feasible_solve(&inst, &cat, &params, &FeasibleSearchParams::default()).expect("dual");
        let bound = out.dual.bound_bits();
        let mut objectives = Vec::new();
        if let Some(a) = &out.solved.allocation {
            ids.add(&inst, a);
            if a.feasible {
                objectives.push(a.objective_bits);
            }
        }
        let wa = weight_adjust_solve(&inst, &cat, &WeightAdjustParams::default()).expect("weight adjust");
        if let Some(a) = &wa.solved.allocation {
            ids.add(&inst, a);
            if a.feasible {
                objectives.push(a.objective_bits);
            }
        }
        if let Ok(ex) = enumerate_exact(&inst, &cat, 50_000) {
            if let Some(a) = &ex.allocation {
                ids.add(&inst, a);
                objectives.push(a.objective_bits);
            }
        }
        // the bound must also cover every iterate of the dual trace
        for u in objectives {
            checked += 1;
            let slack = u - out.dual.trace.iter().map(|t| t.phi_bits).fold(f64::INFINITY, f64::min);
            worst = worst.max(slack / bound.abs().max(1e-12));
            if bound < u - 1e-6 * bound.abs() {
                violations += 1;
            }
        }
    }
    gate.record(
        1,
        violations == 0 && checked > 0,
        format!("{instances} instances, {checked} feasible objectives, {violations} bound violations, worst (U - Phi)/Phi = {worst:.3e}"),
    );
    // allocations from criteria 2 and 7 are added in their own checks
    gate.info(format!(
        "identities over {} allocations: zf {:.1e}, HW-diag {:.1e}, power {:.1e}, rates {:.1e}",
        ids.count, ids.zf, ids.diag, ids.power, ids.rates
    ));
    let mut extra = Identities::default();
    for r in 0..SEEDS as u64 {
        let cfg = small_config(&[20.0], REF_GAIN_DB);
        let inst = generate_instance(&cfg.instance_spec(0).expect("point"), r).expect("instance");
        let cat = build_catalog(&inst).expect("catalog");
        if let Some(a) = dual_feasible_solve(&inst, &cat, &DualParams::default(), &FeasibleSearchParams::default())
            .expect("dual")
            .solved
            .allocation
        {
            extra.add(&inst, &a);
        }
        if let Some(a) = enumerate_exact(&inst, &cat, ENUMERATION_CAP).expect("exact").allocation {
            extra.add(&inst, &a);
        }
    }
    let pass = ids.ok() && extra.ok();
    gate.record(
        5,
        pass,
        format!(
            "{} allocations: zf residual {:.1e} (<=1e-8), HW - diag(sqrt p) {:.1e} (<=1e-8), |sum|w|^2 - sum beta p| {:.1e} (<=1e-9), rate mismatch {:.1e} (<=1e-6)",
            ids.count + extra.count,
            ids.zf.max(extra.zf),
            ids.diag.max(extra.diag),
            ids.power.max(extra.power),
            ids.rates.max(extra.rates)
        ),
    );
}

fn criterion_2(gate: &mut Gate) {
    let cfg = small_config(&[20.0], REF_GAIN_DB);
    let run = run_scenario(&cfg, &RunOptions::default()).expect("run");
    let mut dominance_failures = 0;
    let mut compared = 0;
    for r in 0..SEEDS {
        let find = |m: Method| {
            run.rows
                .iter()
                .find(|x| x.realization == r && x.report.method == m)
                .map(|x| &x.report)
        };
        let (ex, df) = (
            find(Method::Exact).expect("exact row"),
            find(Method::DualFeasible).expect("dual row"),
        );
        if df.feasible {
            compared += 1;
            let u_df = df.objective_bits.unwrap_or(0.0);
            let ok = ex.feasible && ex.objective_bits.unwrap_or(f64::NEG_INFINITY) >= u_df - 1e-6 * u_df.abs();
            if !ok {
                dominance_failures += 1;
            }
        }
    }
    let s = &run.summary;
    let gap_ex = mean_of(s, 20.0, Method::Exact, |r| r.mean_gap_percent);
    let gap_df = mean_of(s, 20.0, Method::DualFeasible, |r| r.mean_gap_percent);
    let feas = mean_of(s, 20.0, Method::Exact, |r| Some(r.feasibility_rate));
    let pass = dominance_failures == 0 && compared > 0 && gap_ex <= 2.0 && gap_df <= 2.0;
    gate.record(
        2,
        pass,
        format!(
            "gain {REF_GAIN_DB} dB, {SEEDS} seeds ({:.0}% feasible): exact >= dual_feasible on {}/{compared}, mean gap exact {gap_ex:.3}% / dual_feasible {gap_df:.3}% (<= 2%; reference 0.10% / 0.04%)",
            100.0 * feas,
            compared - dominance_failures
        ),
    );
    let literal = run_scenario(&small_config(&[20.0], 0.0), &RunOptions::default()).expect("run");
    let f0 = mean_of(&literal.summary, 20.0, Method::Exact, |r| Some(r.feasibility_rate));
    gate.info(format!(
        "at 0 dB (unit-variance channels, linear P = 20) exact is feasible on {:.0}% of seeds",
        100.0 * f0
    ));
}

fn criterion_3(gate: &mut Gate) {
    let rates = [13.33, 16.66, 20.0];
    let reference = [49.13, 47.12, 40.8];
    let run = run_scenario(
        &small_config(&rates, REF_GAIN_DB),
        &RunOptions {
            methods: Some(vec![Method::DualBound]),
            ..Default::default()
        },
    )
    .expect("run");
    let bounds: Vec<f64> = rates
        .iter()
        .map(|&d| mean_of(&run.summary, d, Method::DualBound, |r| r.mean_bound_bits))
        .collect();
    let decreasing = bounds.windows(2).all(|w| w[1] < w[0]);
    let within = bounds.iter().zip(&reference).all(|(b, p)| (b - p).abs() <= 0.15 * p);
    gate.record(
        3,
        decreasing && within,
        format!(
            "mean bound {:.2} > {:.2} > {:.2} bits (reference 49.13 / 47.12 / 40.8, deviations {:+.1}% / {:+.1}% / {:+.1}%, band 15%)",
            bounds[0],
            bounds[1],
            bounds[2],
            100.0 * (bounds[0] / reference[0] - 1.0),
            100.0 * (bounds[1] / reference[1] - 1.0),
            100.0 * (bounds[2] / reference[2] - 1.0)
        ),
    );
    let literal = run_scenario(
        &small_config(&rates, 0.0),
        &RunOptions {
            methods: Some(vec![Method::DualBound]),
            ..Default::default()
        },
    )
    .expect("run");
    let f: Vec<String> = rates
        .iter()
        .map(|&d| {
            format!(
                "{:.0}%",
                100.0 * mean_of(&literal.summary, d, Method::DualBound, |r| Some(r.feasibility_rate))
            )
        })
        .collect();
    gate.info(format!(
        "at 0 dB the three points are not certified infeasible on {} of seeds",
        f.join(" / ")
    ));
}

fn criterion_4(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let grid = 100_000;
    let hi = 10.0;
    let (mut worst_obj, mut worst_arg): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let c: f64 = rng.random_range(0.5..5.0);
        let gamma: f64 = rng.random_range(0.5..2.0);
        let lambda = rng.random_range(c / (gamma * gamma * hi)..5.0);
        let p = solve_user_power(c, lambda, gamma).expect("valid triple");
        let f = |x: f64| c * x.ln_1p() - lambda * gamma * gamma * x;
        let (mut best_x, mut best_f) = (0.0, f(0.0));
        for i in 1..=grid {
            let x = hi * i as f64 / grid as f64;
            let v = f(x);
            if v > best_f {
                best_x = x;
                best_f = v;
            }
        }
        worst_obj = worst_obj.max((best_f - f(p)).abs());
        worst_arg = worst_arg.max((best_x - p).abs());
    }
    gate.record(
        4,
        worst_obj <= 1e-6 && worst_arg <= 1e-4,
        format!("1000 triples vs 1e5-point grid: max objective diff {worst_obj:.2e} (<=1e-6), max argmax diff {worst_arg:.2e} (<=1e-4)"),
    );
}

/// Best objective (nats) over a dense grid of the budget simplex for the
/// K=2, N=1 case: both users share one set.
fn grid_two_users(beta: [f64; 2], p_max: f64, floor_nats: f64) -> f64 {
    let steps = 2000;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        let p0 = p_max / beta[0] * i as f64 / steps as f64;
        let rest = p_max - beta[0] * p0;
        for j in 0..=steps {
            let p1 = rest / beta[1] * j as f64 / steps as f64;
            if p1.ln_1p() < floor_nats {
                continue;
            }
            best = best.max(p0.ln_1p() + p1.ln_1p());
        }
    }
    refine(
        best,
        |t| {
            // along the budget line with user 1 exactly at its floor or above
            let p1 = t;
            let p0 = (p_max - beta[1] * p1) / beta[0];
            if p0 < 0.0 || p1.ln_1p() < floor_nats {
                return f64::NEG_INFINITY;
            }
            p0.ln_1p() + p1.ln_1p()
        },
        floor_nats.exp_m1(),
        p_max / beta[1],
    )
}

/// One user on two subcarriers; the objective increases in both powers so
/// the grid runs along the budget line.
fn grid_one_user(beta: [f64; 2], p_max: f64) -> f64 {
    let steps = 100_000;
    let hi = p_max / beta[0];
    let f = |p0: f64| {
        let p1 = (p_max - beta[0] * p0) / beta[1];
        if p1 < 0.0 {
            return f64::NEG_INFINITY;
        }
        p0.ln_1p() + p1.ln_1p()
    };
    let best = (0..=steps)
        .map(|i| f(hi * i as f64 / steps as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    refine(best, f, 0.0, hi)
}

/// Golden-section polish of a 1-D concave function on `[a, b]`, never
/// returning less than `seed`.
fn refine(seed: f64, f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    if b <= a {
        return seed.max(f(a));
    }
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if f(x1) < f(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    seed.max(f(0.5 * (a + b))).max(f(a)).max(f(b))
}

fn criterion_6(gate: &mut Gate) {
    let mut worst_rel: f64 = 0.0;
    let mut cases = 0;
    let mut binding = 0;
    for seed in 0..40u64 {
        // K=2, N=1 with a floor on user 1 above its unconstrained share
        let base = generate_instance(&InstanceSpec::simple(2, 2, 1, 10.0, 600 + seed), 0).expect("instance");
        let assignment = Assignment(vec![SdmaSet::new(vec![0, 1]).expect("set")]);
        let free = solve_power_allocation(&base, &assignment).expect("power");
        let cap =
            solve_power_allocation(&base.with_weights(vec![1e-3, 1.0]).expect("weights"), &assignment).expect("power");
        let (lo, hi) = (free.rates_bits[1], cap.rates_bits[1]);
        if hi - lo < 0.05 {
            continue;
        }
        let d = lo + 0.5 * (hi - lo);
        let inst = base.with_rt(vec![1], vec![d]).expect("rt");
        let pa = solve_power_allocation(&inst, &assignment).expect("power");
        let oracle = grid_two_users(
            [pa.betas[0][0], pa.betas[0][1]],
            inst.p_max(),
            d * std::f64::consts::LN_2,
        ) / std::f64::consts::LN_2;
        worst_rel = worst_rel.max((pa.objective_bits - oracle).abs() / oracle);
        cases += 1;
        if pa.nu[1] > 0.0 {
            binding += 1;
        }

        // K=1, N=2 with a floor the optimum must meet
        let one = generate_instance(&InstanceSpec::simple(2, 1, 2, 10.0, 700 + seed), 0).expect("instance");
        let a1 = Assignment(vec![
            SdmaSet::new(vec![0]).expect("set"),
            SdmaSet::new(vec![0]).expect("set"),
        ]);
        let unc = solve_power_allocation(&one, &a1).expect("power");
        let inst1 = one.with_rt(vec![0], vec![unc.rates_bits[0] * 0.999]).expect("rt");
        let pa1 = solve_power_allocation(&inst1, &a1).expect("power");
        let oracle1 = grid_one_user([pa1.betas[0][0], pa1.betas[1][0]], inst1.p_max()) / std::f64::consts::LN_2;
        worst_rel = worst_rel.max((pa1.objective_bits - oracle1).abs() / oracle1);
        cases += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_kkt: f64 = 0.0;
    let mut feasible = 0;
    let mut tries = 0;
    while feasible < 100 && tries < 1000 {
        tries += 1;
        let m = rng.random_range(1..=3);
        let k = rng.random_range(1..=6);
        let n = rng.random_range(1..=4);
        let d = rng.random_range(1..=k.min(3));
        let spec = InstanceSpec::simple(m, k, n, rng.random_range(5.0..60.0), 9000 + tries)
            .with_rt((0..d).collect(), (0..d).map(|_| rng.random_range(0.5..4.0)).collect());
        let inst = generate_instance(&spec, 0).expect("instance");
        let sets: Vec<SdmaSet> = (0..n)
            .map(|_| {
                let size = rng.random_range(1..=m.min(k));
                let mut users: Vec<usize> = (0..k).collect();
                for i in 0..size {
                    let j = rng.random_range(i..k);
                    users.swap(i, j);
                }
                SdmaSet::new(users[..size].to_vec()).expect("set")
            })
            .collect();
        let pa = solve_power_allocation(&inst, &Assignment(sets)).expect("power");
        if !pa.feasible {
            continue;
        }
        feasible += 1;
        worst_kkt = worst_kkt.max(kkt_residuals(&inst, &pa, inst.weights()).max());
    }
    gate.record(
        6,
        worst_rel <= 1e-4 && worst_kkt <= 1e-6 && feasible == 100 && cases > 0,
        format!(
            "{cases} grid cases ({binding} two-user cases with an active floor): max rel diff {worst_rel:.2e} (<=1e-4); KKT residual max {worst_kkt:.2e} over {feasible} feasible instances (<=1e-6)"
        ),
    );
}

fn criterion_7(gate: &mut Gate) {
    let cfg = large_config("min_rate = [80.0]", 80.0, REF_GAIN_DB);
    let run = run_scenario(&cfg, &RunOptions::default()).expect("run");
    let df = mean_of(&run.summary, 80.0, Method::DualFeasible, |r| r.mean_gap_percent);
    let wa = mean_of(&run.summary, 80.0, Method::WeightAdjust, |r| r.mean_gap_percent);
    let fdf = mean_of(&run.summary, 80.0, Method::DualFeasible, |r| Some(r.feasibility_rate));
    let fwa = mean_of(&run.summary, 80.0, Method::WeightAdjust, |r| Some(r.feasibility_rate));
    gate.record(
        7,
        df <= 2.0 && wa >= df,
        format!(
            "gain {REF_GAIN_DB} dB, {SEEDS} seeds: dual_feasible gap {df:.3}% ({:.0}% feasible), weight_adjust gap {wa:.3}% ({:.0}% feasible) (reference 0.24% vs 9.49%)",
            100.0 * fdf,
            100.0 * fwa
        ),
    );
}

fn criterion_8(gate: &mut Gate) {
    let counts = [1usize, 3, 5, 6, 7];
    let cfg = large_config(&format!("rt_count = {counts:?}"), 20.0, REF_GAIN_DB);
    let run = run_scenario(&cfg, &RunOptions::default()).expect("run");
    let s = &run.summary;
    let gaps: Vec<f64> = counts
        .iter()
        .map(|&d| mean_of(s, d as f64, Method::DualFeasible, |r| r.mean_gap_percent))
        .collect();
    let wa_gap: Vec<f64> = counts
        .iter()
        .map(|&d| mean_of(s, d as f64, Method::WeightAdjust, |r| r.mean_gap_percent))
        .collect();
    let wa: Vec<f64> = counts
        .iter()
        .map(|&d| mean_of(s, d as f64, Method::WeightAdjust, |r| Some(r.feasibility_rate)))
        .collect();
    let gap_ok = gaps[..3].iter().all(|&g| g <= 6.0);
    // strict on the named points; D = 6 and 7 may both sit at zero
    let strictly = wa[..3].windows(2).all(|w| w[1] < w[0]) && wa.windows(2).all(|w| w[1] <= w[0]);
    let fails_late = wa[3] < 0.5 || wa[4] < 0.5;
    gate.record(
        8,
        gap_ok && strictly && fails_late,
        format!(
            "d = 20 bits per RT user, D = {counts:?}: dual_feasible gap {} (<= 6% for D <= 5); weight_adjust feasible {} (strictly decreasing over D <= 5, non-increasing after: {strictly}, < 50% at D = 6 or 7: {fails_late}); weight_adjust gap {}",
            fmt_list(&gaps, "%"),
            fmt_list(&wa.iter().map(|x| 100.0 * x).collect::<Vec<_>>(), "%"),
            fmt_list(&wa_gap, "%")
        ),
    );
    let mut long = large_config("rt_count = [7]", 20.0, REF_GAIN_DB);
    long.weight_adjust.max_iterations = 50;
    long.methods = vec![Method::WeightAdjust];
    let run = run_scenario(&long, &RunOptions::default()).expect("run");
    let f = mean_of(&run.summary, 7.0, Method::WeightAdjust, |r| Some(r.feasibility_rate));
    gate.info(format!(
        "with up to 50 weight updates weight_adjust is feasible on {:.0}% of seeds at D = 7",
        100.0 * f
    ));
}

fn fmt_list(v: &[f64], unit: &str) -> String {
    v.iter()
        .map(|x| format!("{x:.2}{unit}"))
        .collect::<Vec<_>>()
        .join(" / ")
}

fn criterion_9(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pairs = 0;
    for i in 0..10u64 {
        let k = rng.random_range(2..=6);
        let d = rng.random_range(1..=2.min(k));
        let spec = InstanceSpec::simple(rng.random_range(1..=3), k, rng.random_range(1..=4), 20.0, 500 + i)
            .with_rt((0..d).collect(), (0..d).map(|_| rng.random_range(1.0..8.0)).collect());
        let inst = generate_instance(&spec, 0).expect("instance");
        let cat = build_catalog(&inst).expect("catalog");
        let draw = |rng: &mut ChaCha8Rng| {
            let mut mu = vec![0.0; k];
            for &u in inst.rt_users() {
                mu[u] = rng.random_range(0.0..3.0);
            }
            DualPoint {
                lambda: 10f64.powf(rng.random_range(-2.0..0.5)),
                mu,
            }
        };
        for _ in 0..100 {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            worst = worst.max(supergradient_violation(&inst, &cat, &a, &b));
            pairs += 1;
        }
    }
    gate.record(
        9,
        worst <= 1e-8,
        format!("{pairs} pairs on 10 instances: max violation of Theta(d') <= Theta(d) + g.(d' - d) is {worst:.2e} (<=1e-8)"),
    );
}

/// `Θ(b) − Θ(a) − g(a)·(b − a)` with `Θ = −Φ`, scaled by `max(1, |Φ(a)|)`.
fn supergradient_violation(inst: &ProblemInstance, cat: &SetCatalog, a: &DualPoint, b: &DualPoint) -> f64 {
    let ea = dual_value(inst, cat, a).expect("dual");
    let eb = dual_value(inst, cat, b).expect("dual");
    // Θ's supergradient is (P̌ − power, r − ď)·(−1)·(−1): g_λ = power − P̌ and g_μ = ď − r
    let mut lin = ea.g_lambda * (b.lambda - a.lambda);
    for (j, &k) in inst.rt_users().iter().enumerate() {
        lin += ea.g_mu[j] * (b.mu[k] - a.mu[k]);
    }
    ((-eb.phi) - (-ea.phi) - lin) / ea.phi.abs().max(1.0)
}

fn criterion_10(gate: &mut Gate) {
    let cfg = small_config(&[13.33, 20.0], REF_GAIN_DB);
    let opts = RunOptions {
        realizations: Some(5),
        ..Default::default()
    };
    let render = |workers: Option<usize>| {
        let run = run_scenario(
            &cfg,
            &RunOptions {
                workers,
                ..opts.clone()
            },
        )
        .expect("run");
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &run.rows).expect("csv");
        strip_seconds(&String::from_utf8(buf).expect("utf8"))
    };
    let a = render(None);
    let b = render(None);
    let c = render(Some(1));
    let golden_path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/small_sweep.csv");
    if std::env::var_os("SDMA_UPDATE_GOLDEN").is_some() {
        let run = run_scenario(&cfg, &opts).expect("run");
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &run.rows).expect("csv");
        std::fs::write(&golden_path, buf).expect("write golden");
    }
    let golden = std::fs::read_to_string(&golden_path).map(|g| strip_seconds(&g));
    let golden_ok = golden.as_ref().is_ok_and(|g| *g == a);
    gate.record(
        10,
        a == b && a == c && golden_ok,
        format!(
            "rerun identical: {}, sequential identical: {}, matches {}: {}",
            a == b,
            a == c,
            golden_path.file_name().and_then(|s| s.to_str()).unwrap_or("golden"),
            golden_ok
        ),
    );
}

fn strip_seconds(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_11(gate: &mut Gate) {
    let text = "m = 3\nk = 16\nn = 16\np_max = 80.0\nseed = 2024\nrealizations = 1\nmin_rate = 20.0\n\
                methods = [\"dual_bound\"]\n[sweep]\nmin_rate = [20.0]\n";
    let cfg = ScenarioConfig::from_toml_str(text).expect("config");
    let shape = |r: u64| {
        let (inst, dual) = ofdma_sdma::bench::trace_instance(&cfg, 0, r).expect("trace");
        let tail = &dual.trace[dual.trace.len().saturating_sub(10)..];
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            (lo.min(t.phi_bits), hi.max(t.phi_bits))
        });
        let power = tail.iter().map(|t| t.total_power).sum::<f64>() / tail.len() as f64;
        let rate = tail.iter().map(|t| t.rt_rates_bits[0]).sum::<f64>() / tail.len() as f64;
        let p_err = (power - inst.p_max()).abs() / inst.p_max();
        let r_err = (rate - 20.0).abs() / 20.0;
        let ok = (hi - lo) / hi.abs() < 1e-3 && p_err <= 0.02 && r_err <= 0.02 && dual.trace.len() <= 500;
        (ok, (hi - lo) / hi.abs(), p_err, r_err, dual.trace.len())
    };
    let (ok, change, p_err, r_err, len) = shape(0);
    gate.record(
        11,
        ok,
        format!(
            "trace of realization 0 (P = 80, 0 dB, {len} iterations): final-10 rel. Phi change {change:.1e} (<1e-3), power error {:.2}% (<=2%), r1 error {:.2}% (<=2%), as means over the final 10 iterations",
            100.0 * p_err,
            100.0 * r_err
        ),
    );
    let others: Vec<String> = (1..6)
        .map(|r| {
            let (ok, _, p, q, _) = shape(r);
            format!(
                "r{r} {} (power {:.2}%, r1 {:.2}%)",
                if ok { "ok" } else { "off" },
                100.0 * p,
                100.0 * q
            )
        })
        .collect();
    gate.info(format!("other realizations: {}", others.join(", ")));
}

fn main() -> ExitCode {
    let mut gate = Gate { lines: Vec::new() };
    criterion_1_and_5(&mut gate);
    criterion_2(&mut gate);
    criterion_3(&mut gate);
    criterion_4(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);
    criterion_8(&mut gate);
    criterion_9(&mut gate);
    criterion_10(&mut gate);
    criterion_11(&mut gate);
    gate.lines.sort_by_key(|l| l.0);
    let failed: Vec<usize> = gate.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} criteria pass",
        gate.lines.len() - failed.len(),
        gate.lines.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing: {failed:?}");
        ExitCode::FAILURE
    }
}
