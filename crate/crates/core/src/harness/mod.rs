//! Instance families, baseline strategies and experiment drivers.

mod bench;
mod instances;
mod report;
mod sweep;

pub use bench::{mean_step_secs, run_bench, BenchOptions};
pub use instances::{
    gen_dn, rm_eta, rm_graph, rm_instances, rm_pi10, rm_sigma_y, strategy_pi_n, strategy_rho_n, Baseline,
    InstanceBundle, RmInstances, RM_TARGET, RM_WINDOW_TARGET,
};
pub use report::{read_rows, write_rows, BenchRow, ReportRow, BENCH_HEADER, REPORT_HEADER};
pub use sweep::{badness_at, parse_grid, parse_usize_range, run_sweep, Family, SweepSpec, SweepSummary};
