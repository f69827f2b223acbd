//! Depth-first enumeration of all paths of length at most `d`. Exponential in
//! `d`; kept as an independent oracle for the dynamic program and for timing
//! comparisons.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::window::{check_deadline, check_horizon, check_labels, EvalConfig, RslMatrix};
use crate::bscc::LocalChain;
use crate::error::Result;
use crate::objective::Objective;

struct Dfs<'a> {
    local: &'a LocalChain,
    obj: &'a Objective,
    d: usize,
    counts: Vec<u16>,
    rsl: Vec<f64>,
    scratch: Vec<f64>,
    deadline: Option<(Instant, Duration)>,
    calls: u32,
}

impl Dfs<'_> {
    fn visit(&mut self, v: usize, p: f64, n: usize) -> Result<()> {
        self.calls = self.calls.wrapping_add(1);
        if self.calls % (1 << 16) == 0 {
            check_deadline(self.deadline)?;
        }
        self.rsl[n - 1] += p * self.obj.eval_counts(&self.counts, n, &mut self.scratch);
        if n < self.d {
            let local = self.local;
            for &(u, q) in &local.succ[v] {
                let l = local.labels[u];
                self.counts[l] += 1;
                self.visit(u, p * q, n + 1)?;
                self.counts[l] -= 1;
            }
        }
        Ok(())
    }
}

pub fn naive_window_badness(local: &LocalChain, obj: &Objective, d: usize, cfg: &EvalConfig) -> Result<RslMatrix> {
    check_horizon(d)?;
    check_labels(local, obj)?;
    let deadline = cfg.deadline();
    (0..local.len())
        .into_par_iter()
        .map(|v0| {
            let mut counts = vec![0u16; local.num_labels];
            counts[local.labels[v0]] = 1;
            let mut dfs = Dfs {
                local,
                obj,
                d,
                counts,
                rsl: vec![0.0; d],
                scratch: Vec::with_capacity(local.num_labels),
                deadline,
                calls: 0,
            };
            dfs.visit(v0, 1.0, 1)?;
            Ok(dfs.rsl)
        })
        .collect()
}
