use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ofdma_sdma::bench::{oracle_instance, run_scenario, trace_instance, write_outputs, RunOptions, ScenarioConfig};
use ofdma_sdma::channel::generate_instance;
use ofdma_sdma::dual::write_trace_csv;
use ofdma_sdma::feasible::Method;

#[derive(Parser)]
#[command(
    name = "sdma-bench",
    version,
    about = "Resource-allocation sweeps for downlink OFDMA-SDMA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point, realization and method of a scenario.
    Run {
        config: PathBuf,
        /// Output directory for results.csv, summary.json and traces/.
        #[arg(long, env = "SDMA_BENCH_OUT", default_value = "sdma-out")]
        out: PathBuf,
        #[arg(long)]
        realizations: Option<usize>,
        /// Worker threads; 1 forces sequential execution.
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated subset of dual_bound, dual_feasible, weight_adjust, exact.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Dual subgradient trace of one instance as CSV.
    Trace {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all methods on one instance and cross-check them.
    Oracle {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Write one generated instance as JSON.
    Instance {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names
        .iter()
        .map(|s| Method::parse(s.trim()).with_context(|| format!("unknown method `{s}`")))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            realizations,
            workers,
            methods,
        } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let methods = methods.as_deref().map(parse_methods).transpose()?;
            let opts = RunOptions {
                realizations,
                workers,
                methods,
                rebuild_catalog: false,
            };
            let run = run_scenario(&cfg, &opts)?;
            let written = write_outputs(&out, &run)?;
            for row in &run.summary.rows {
                println!(
                    "{:>10} {:<14} feasible {:>5.1}%  objective {:>9}  bound {:>9}  gap {:>7}%  {:.3}s",
                    row.sweep_value,
                    row.method.label(),
                    100.0 * row.feasibility_rate,
                    fmt(row.mean_objective_bits, 3),
                    fmt(row.mean_bound_bits, 3),
                    fmt(row.mean_gap_percent, 3),
                    row.mean_seconds.unwrap_or(0.0),
                );
            }
            for e in &run.errors {
                eprintln!("solver error: {e}");
            }
            println!("wrote {} files under {}", written.len(), out.display());
        }
        Command::Trace {
            config,
            point,
            realization,
            out,
        } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let (instance, dual) = trace_instance(&cfg, point, realization)?;
            let rt = instance.rt_users().len();
            match out {
                Some(p) => write_trace_csv(fs::File::create(&p)?, rt, &dual.trace)?,
                None => write_trace_csv(io::stdout().lock(), rt, &dual.trace)?,
            }
            eprintln!(
                "{}: bound {:.4} bits at iteration {} of {} (converged: {})",
                instance.instance_id,
                dual.bound_bits(),
                dual.best_iteration,
                dual.iterations(),
                dual.converged
            );
        }
        Command::Oracle {
            config,
            point,
            realization,
        } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let report = oracle_instance(&cfg, point, realization)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.weak_duality || report.exact_dominates == Some(false) {
                bail!("cross-check failed on {}", report.instance_id);
            }
        }
        Command::Instance {
            config,
            point,
            realization,
            out,
        } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let instance = generate_instance(&cfg.instance_spec(point)?, realization)?;
            instance.write_json(&out)?;
        }
    }
    Ok(())
}

fn fmt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
