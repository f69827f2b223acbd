use freqstab::eval::EvalConfig;
use freqstab::harness::{
    read_rows, run_bench, run_sweep, write_rows, BenchOptions, BenchRow, Family, ReportRow, SweepSpec, BENCH_HEADER,
    REPORT_HEADER,
};
use freqstab::synth::SynthesisConfig;

fn header(path: &std::path::Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

fn one_cell(timings: bool) -> SweepSpec {
    SweepSpec {
        family: Family::Rm { memory: 2, window_target: false },
        betas: vec![0.5],
        gammas: vec![0.0],
        d_range: (3, 5),
        synth: SynthesisConfig { steps: 60, restarts: 1, seed: 11, ..SynthesisConfig::default() },
        eval: EvalConfig::default(),
        timings,
    }
}

#[test]
fn one_cell_sweep_is_one_run_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let summary = run_sweep(&one_cell(true), &out).unwrap();
    assert_eq!((summary.cells_run, summary.rows_written, summary.cells_failed), (1, 3, 0));
    assert_eq!(header(&out), REPORT_HEADER);

    let rows: Vec<ReportRow> = read_rows(&out).unwrap();
    assert_eq!(rows.iter().map(|r| r.d).collect::<Vec<_>>(), [3, 4, 5]);
    for r in &rows {
        assert_eq!((r.instance.as_str(), r.n, r.m, r.restarts, r.steps), ("rm-m2", 2, 2, 1, 60));
        assert_eq!(r.status, "ok");
        assert!(r.step_mean_secs.is_some() && r.eval_secs.is_some());
        assert_eq!(r.comb, rows[0].comb);
        assert!(r.argmin_n.unwrap() <= r.d);
    }
    // badness is a running minimum over horizons
    assert!(rows.windows(2).all(|w| w[1].l_badness.unwrap() <= w[0].l_badness.unwrap()));
}

#[test]
fn untimed_sweeps_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    run_sweep(&one_cell(false), &a).unwrap();
    run_sweep(&one_cell(false), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bench_rows_match_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let opts = BenchOptions { steps: 2, warmup: 0, skip_naive: true, max_live_states: 1 << 16, ..Default::default() };
    let rows = run_bench(&[4, 8], &opts).unwrap();
    assert_eq!(rows.iter().map(|r| (r.par, r.d)).collect::<Vec<_>>(), [(25, 10), (182, 36)]);
    assert!(rows[0].eval_secs.parse::<f64>().is_ok());
    // a near-random strategy on the 8-ring exceeds a small frontier budget
    assert_eq!(rows[1].eval_secs, "resource");
    assert_eq!(rows[1].naive_secs, "skipped");
    write_rows(&out, &rows).unwrap();
    assert_eq!(header(&out), BENCH_HEADER);
    assert_eq!(read_rows::<BenchRow>(&out).unwrap(), rows);
}
