use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use log::info;

use wncs_core::experiment::{load_config, ExperimentSpec};
use wncs_core::par::Execution;
use wncs_core::policies::PolicyKind;
use wncs_core::sim::{sweep, table3, write_results_csv, ResultRow, RunSpec, Scenario};

#[derive(Parser, Debug)]
#[command(name = "wncs", version, about = "Sensor scheduling and event-triggered control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (JSON). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base seed, overriding `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Horizon in slots, overriding `simulation.slots`.
    #[arg(long, global = true)]
    slots: Option<u64>,

    /// Scheduling policy (gsc, rr, rs, aoi, aoii) for simulate and sweep.
    #[arg(long, global = true, value_parser = parse_policy)]
    policy: Option<PolicyKind>,

    /// Suppress the summary and informational logging.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve the constrained scheduling problem and write the policy table.
    Solve,
    /// Simulate the configured runs.
    Simulate,
    /// Sweep one parameter over the configured values.
    Sweep,
    /// Run the eight-row comparison.
    Table3,
}

fn parse_policy(s: &str) -> std::result::Result<PolicyKind, String> {
    PolicyKind::parse(s).ok_or_else(|| format!("unknown policy `{s}` (expected gsc, rr, rs, aoi or aoii)"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut spec = match &cli.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentSpec::default(),
    };
    if let Some(dir) = &cli.out {
        spec.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        spec.simulation.seed = seed;
    }
    if let Some(k) = cli.slots {
        spec.simulation.slots = k;
    }
    let scenario = spec.scenario()?;
    std::fs::create_dir_all(&spec.output.dir)
        .with_context(|| format!("creating {}", spec.output.dir.display()))?;

    match cli.command {
        Command::Solve => solve(&spec, &scenario, cli.quiet),
        Command::Simulate => {
            let runs = override_policy(spec.runs(), cli.policy);
            let gsc = if runs.iter().any(|r| r.policy == PolicyKind::Gsc) { Some(scenario.solve()?.1.policy) } else { None };
            let rows = runs
                .iter()
                .map(|r| Ok(r.row(&scenario, "", None, scenario.run(r, gsc.as_ref(), Execution::Parallel)?)))
                .collect::<Result<Vec<_>>>()?;
            emit(&spec.output_path(&spec.output.simulate), &rows, cli.quiet)
        }
        Command::Sweep => {
            let runs = override_policy(spec.sweep_runs(), cli.policy);
            info!("sweeping {} over {} values", spec.sweep.axis, spec.sweep.values.len());
            let rows = sweep(&scenario, &runs, spec.sweep.axis, &spec.sweep.values, Execution::Parallel)?;
            emit(&spec.output_path(&spec.output.sweep), &rows, cli.quiet)
        }
        Command::Table3 => {
            let rows = table3(&scenario, Execution::Parallel)?;
            emit(&spec.output_path(&spec.output.table3), &rows, cli.quiet)
        }
    }
}

fn override_policy(runs: Vec<RunSpec>, policy: Option<PolicyKind>) -> Vec<RunSpec> {
    let mut out: Vec<RunSpec> = Vec::new();
    for mut r in runs {
        if let Some(p) = policy {
            r.policy = p;
        }
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

fn solve(spec: &ExperimentSpec, scenario: &Scenario, quiet: bool) -> Result<()> {
    let (art, sol) = scenario.solve()?;
    let path = spec.output_path(&spec.output.policy_table);
    sol.policy.write_csv(&path)?;
    if !quiet {
        let t = art.truncation;
        println!("truncation  delta_lo={} delta_hi={} delta_thr={}", t.delta_lo, t.delta_hi, t.delta_thr);
        println!("lambda      {:.6}", sol.lambda);
        println!("violation   {:.6}", sol.evaluation.violation);
        println!("cost        {:.6} (budget {})", sol.evaluation.scheduling_cost, scenario.costs.c_max);
        println!("wrote       {}", path.display());
    }
    Ok(())
}

fn emit(path: &Path, rows: &[ResultRow], quiet: bool) -> Result<()> {
    write_results_csv(path, rows)?;
    if !quiet {
        println!("{:<6} {:<9} {:<10} {:>10} {:>10} {:>10} {:>10}", "policy", "estimator", "mode", "axis", "viol", "total", "update");
        for r in rows {
            let axis = r.axis_value.map(|v| format!("{v}")).unwrap_or_default();
            println!(
                "{:<6} {:<9} {:<10} {:>10} {:>10.4} {:>10.4} {:>10.4}",
                r.policy, r.estimator, r.control_mode, axis, r.metrics.violation_prob, r.metrics.norm_total_cost,
                r.metrics.norm_updating_cost
            );
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}
