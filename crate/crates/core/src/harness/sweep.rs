//! Grid sweeps over the penalty weights, streamed to a resumable CSV report.

use std::collections::HashSet;
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;

use super::instances::{gen_dn, rm_graph, InstanceBundle};
use super::report::{append_writer, read_rows, ReportRow};
use crate::error::{Error, Result};
use crate::eval::{l_badness, EvalConfig, EvalResult};
use crate::objective::{Norm, Objective};
use crate::strategy::build_augmented_space;
use crate::strategy::induced_chain;
use crate::synth::{multi_restart, SynthesisConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// The ring family with `n` vertices.
    Dn { n: usize },
    /// The `R`/`M` graph with `memory` states for `R`.
    Rm { memory: usize, window_target: bool },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Dn { .. } => "dn",
            Family::Rm { .. } => "rm",
        }
    }

    pub fn bundle(&self) -> Result<InstanceBundle> {
        match *self {
            Family::Dn { n } => gen_dn(n),
            Family::Rm { memory, window_target } => rm_graph(memory, window_target),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub family: Family,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Inclusive horizon range.
    pub d_range: (usize, usize),
    pub synth: SynthesisConfig,
    pub eval: EvalConfig,
    /// Write wall-clock columns; off for byte-reproducible reports.
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub rows_written: usize,
    pub cells_run: usize,
    pub cells_skipped: usize,
    pub cells_failed: usize,
}

/// `start:stop:step` as an inclusive list, rounded to nine decimals so that
/// `0:0.5:0.1` yields exactly `0.3` rather than `0.30000000000000004`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad number {p:?} in {s:?}")));
    match parts.as_slice() {
        [x] => Ok(vec![num(x)?]),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(Error::InvalidConfig(format!("grid {s:?} needs start <= stop and step > 0")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        _ => Err(Error::InvalidConfig(format!("grid {s:?} is not start:stop:step"))),
    }
}

/// `lo:hi` inclusive, or a single value.
pub fn parse_usize_range(s: &str) -> Result<(usize, usize)> {
    let num =
        |p: &str| p.trim().parse::<usize>().map_err(|_| Error::InvalidConfig(format!("bad integer {p:?} in {s:?}")));
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (num(a)?, num(b)?),
        None => (num(s)?, num(s)?),
    };
    if lo > hi {
        return Err(Error::InvalidConfig(format!("range {s:?} is empty")));
    }
    Ok((lo, hi))
}

type RowKey = (String, usize, usize, u64, u64, usize);

fn row_key(r: &ReportRow) -> RowKey {
    (r.family.clone(), r.n, r.m, r.beta.to_bits(), r.gamma.to_bits(), r.d)
}

/// `min` over BSCCs and horizons `n ≤ d`, with the attaining horizon.
pub fn badness_at(result: &EvalResult, d: usize) -> (f64, usize) {
    let (mut best, mut arg) = (f64::INFINITY, 1);
    for n in 1..=d.min(result.d) {
        for b in &result.bsccs {
            if b.expected[n - 1] < best {
                (best, arg) = (b.expected[n - 1], n);
            }
        }
    }
    (best, arg)
}

struct Cell {
    beta: f64,
    gamma: f64,
}

fn run_cell(
    spec: &SweepSpec,
    bundle: &InstanceBundle,
    obj: &Objective,
    cell: &Cell,
    template: &ReportRow,
) -> Vec<ReportRow> {
    let (d_lo, d_hi) = spec.d_range;
    let row = |d: usize| ReportRow { beta: cell.beta, gamma: cell.gamma, d, ..template.clone() };
    let failed =
        |msg: String| (d_lo..=d_hi).map(|d| ReportRow { status: format!("failed: {msg}"), ..row(d) }).collect();

    let cfg = SynthesisConfig { beta: cell.beta, gamma: cell.gamma, ..spec.synth };
    if let Err(e) = cfg.validate() {
        return failed(e.to_string());
    }
    let (run, _) = match multi_restart(&bundle.mdp, &bundle.alloc, &bundle.labeling, obj, &cfg) {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let space = match build_augmented_space(&bundle.mdp, &bundle.alloc) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let chain = induced_chain(&space, &run.strategy, &bundle.labeling);
    let started = Instant::now();
    let eval = l_badness(&chain, obj, d_hi, &spec.eval);
    let eval_secs = started.elapsed().as_secs_f64();
    let step_mean = run.mean_step_secs();
    (d_lo..=d_hi)
        .map(|d| {
            let mut r = row(d);
            r.comb = Some(run.best.comb);
            if spec.timings {
                r.step_mean_secs = Some(step_mean);
            }
            match &eval {
                Ok(res) => {
                    let (b, n) = badness_at(res, d);
                    r.l_badness = Some(b);
                    r.argmin_n = Some(n);
                    if spec.timings {
                        r.eval_secs = Some(eval_secs);
                    }
                    r.status = "ok".into();
                }
                Err(e) if e.is_resource() => r.status = format!("resource: {e}"),
                Err(e) => r.status = format!("failed: {e}"),
            }
            r
        })
        .collect()
}

/// Runs every `(beta, gamma)` cell not already complete in `out`, appending
/// one row per `(cell, d)`. Cells run in parallel; a single writer appends
/// rows as cells finish.
pub fn run_sweep(spec: &SweepSpec, out: &Path) -> Result<SweepSummary> {
    // weights are checked per cell
    SynthesisConfig { beta: 0.0, gamma: 0.0, ..spec.synth }.validate()?;
    let (d_lo, d_hi) = spec.d_range;
    if d_lo == 0 {
        return Err(Error::InvalidConfig("horizons start at 1".into()));
    }
    let bundle = spec.family.bundle()?;
    let obj = Objective::distance(bundle.target.clone(), Norm::L2)?;
    let (n, m) = (bundle.mdp.num_vertices(), bundle.alloc.counts().iter().copied().max().unwrap_or(1));

    let done: HashSet<RowKey> = if out.exists() && std::fs::metadata(out)?.len() > 0 {
        read_rows::<ReportRow>(out)?.iter().map(row_key).collect()
    } else {
        HashSet::new()
    };

    let template = ReportRow {
        family: spec.family.name().into(),
        n,
        m,
        instance: bundle.id.clone(),
        strategy: "synth".into(),
        beta: 0.0,
        gamma: 0.0,
        restarts: spec.synth.restarts,
        steps: spec.synth.steps,
        seed: spec.synth.seed,
        d: 0,
        l_badness: None,
        comb: None,
        argmin_n: None,
        step_mean_secs: None,
        eval_secs: None,
        status: String::new(),
    };

    let mut cells = Vec::new();
    let mut skipped = 0;
    for &beta in &spec.betas {
        for &gamma in &spec.gammas {
            let complete = (d_lo..=d_hi)
                .all(|d| done.contains(&(template.family.clone(), n, m, beta.to_bits(), gamma.to_bits(), d)));
            if complete {
                skipped += 1;
            } else {
                cells.push(Cell { beta, gamma });
            }
        }
    }

    let mut writer = append_writer(out)?;
    let (tx, rx) = mpsc::channel::<Vec<ReportRow>>();
    let mut summary = SweepSummary { cells_skipped: skipped, ..Default::default() };
    std::thread::scope(|scope| -> Result<()> {
        let producer = scope.spawn(|| {
            cells.par_iter().for_each_with(tx, |tx, cell| {
                let rows = run_cell(spec, &bundle, &obj, cell, &template);
                let _ = tx.send(rows);
            });
        });
        for rows in rx {
            summary.cells_run += 1;
            if rows.iter().any(|r| r.status != "ok") {
                summary.cells_failed += 1;
            }
            for r in &rows {
                writer.serialize(r)?;
                summary.rows_written += 1;
            }
            writer.flush()?;
        }
        producer.join().expect("sweep worker panicked");
        Ok(())
    })?;
    Ok(summary)
}
