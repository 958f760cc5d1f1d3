//! Closed-loop Monte Carlo engine, run metrics, parameter sweeps and the
//! analytic retransmission gap.

mod engine;
mod metrics;
mod output;
mod scenario;
mod tarq_gap;

pub use engine::{run_episode, SimConfig, TraceRecord};
pub use metrics::{compute_metrics, pool, Counters, Metrics};
pub use output::{format_sig6, results_csv_bytes, write_results_csv, ResultRow, CSV_HEADER};
pub use scenario::{run_replications, sweep, table3, table3_runs, RunSpec, Scenario, SweepAxis};
pub use tarq_gap::{tarq_gap_analytic, tarq_gap_at};
