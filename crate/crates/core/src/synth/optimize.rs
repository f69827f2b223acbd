//! The optimization loop and independent restarts.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::comb::{CombBreakdown, CombWeights, SynthesisProblem, DEFAULT_VAR_EPS};
use super::params::init_parameters;
use crate::error::{Error, Result};
use crate::mdp::{Labeling, Mdp, MemoryAllocation};
use crate::objective::Objective;
use crate::strategy::FrStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub steps: usize,
    pub restarts: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Weight of the label-level penalty.
    pub beta: f64,
    /// Weight of the vertex-level penalty.
    pub gamma: f64,
    pub seed: u64,
    /// Support of the LogUniform initialization.
    pub init_range: (f64, f64),
    pub var_eps: f64,
    pub freeze_normalizers: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            steps: 800,
            restarts: 40,
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            beta: 0.0,
            gamma: 0.0,
            seed: 0,
            init_range: (1e-2, 10.0),
            var_eps: DEFAULT_VAR_EPS,
            freeze_normalizers: false,
        }
    }
}

impl SynthesisConfig {
    pub fn weights(&self) -> CombWeights {
        CombWeights {
            beta: self.beta,
            gamma: self.gamma,
            var_eps: self.var_eps,
            freeze_normalizers: self.freeze_normalizers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::InvalidConfig("moment decays must lie in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig("optimizer epsilon must be positive".into()));
        }
        let (a, b) = self.init_range;
        if !(0.0 < a && a < b && b.is_finite()) {
            return Err(Error::InvalidConfig(format!("LogUniform range ({a}, {b}) needs 0 < a < b")));
        }
        self.weights().validate()
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisRun {
    pub seed: u64,
    pub strategy: FrStrategy,
    pub theta: Vec<f64>,
    pub best: CombBreakdown,
    /// Step whose strategy is returned.
    pub best_step: usize,
    /// Comb of the strategy evaluated at each step, before its update.
    pub trace: Vec<f64>,
    pub step_secs: Vec<f64>,
}

impl SynthesisRun {
    pub fn mean_step_secs(&self) -> f64 {
        self.step_secs.iter().sum::<f64>() / self.step_secs.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub seed: u64,
    pub best_comb: Option<f64>,
    pub error: Option<String>,
}

fn run(problem: &SynthesisProblem, cfg: &SynthesisConfig, seed: u64) -> Result<SynthesisRun> {
    let weights = cfg.weights();
    let mut theta = init_parameters(&problem.space, &problem.mdp, seed, cfg.init_range)?.theta;
    let mut adam = Adam::new(theta.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut step_secs = Vec::with_capacity(cfg.steps);
    let mut best: Option<(usize, Vec<f64>, CombBreakdown)> = None;

    for step in 0..cfg.steps {
        let started = Instant::now();
        let (bd, grad) = problem.evaluate(&theta, &weights, true)?;
        let grad = grad.expect("gradient requested");
        if !bd.comb.is_finite() {
            return Err(Error::NonFinite { step, quantity: "comb".into() });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite { step, quantity: format!("gradient component {i}") });
        }
        trace.push(bd.comb);
        if best.as_ref().map_or(true, |b| bd.comb < b.2.comb) {
            best = Some((step, theta.clone(), bd));
        }
        adam.step(&mut theta, &grad);
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { step, quantity: format!("parameter {i}") });
        }
        step_secs.push(started.elapsed().as_secs_f64());
    }

    let (best_step, theta, best) = best.expect("at least one step");
    Ok(SynthesisRun { seed, strategy: problem.strategy(&theta), theta, best, best_step, trace, step_secs })
}

/// One run of `cfg.steps` Adam updates from a seeded random start; returns the
/// strategy with the least comb seen.
pub fn optimize(
    mdp: &Mdp,
    alloc: &MemoryAllocation,
    labeling: &Labeling,
    obj: &Objective,
    cfg: &SynthesisConfig,
) -> Result<SynthesisRun> {
    cfg.validate()?;
    if !obj.is_differentiable() {
        return Err(Error::NotDifferentiable);
    }
    let problem = SynthesisProblem::new(mdp, alloc, labeling, obj)?;
    run(&problem, cfg, cfg.seed)
}

/// `cfg.restarts` independent runs with seeds `seed, seed + 1, ...`, executed
/// in parallel. Returns the run with the least comb (earliest seed on ties).
pub fn multi_restart(
    mdp: &Mdp,
    alloc: &MemoryAllocation,
    labeling: &Labeling,
    obj: &Objective,
    cfg: &SynthesisConfig,
) -> Result<(SynthesisRun, Vec<RestartSummary>)> {
    cfg.validate()?;
    if !obj.is_differentiable() {
        return Err(Error::NotDifferentiable);
    }
    let problem = SynthesisProblem::new(mdp, alloc, labeling, obj)?;
    let runs: Vec<Result<SynthesisRun>> =
        (0..cfg.restarts as u64).into_par_iter().map(|i| run(&problem, cfg, cfg.seed.wrapping_add(i))).collect();

    let summaries = runs
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(run) => RestartSummary { seed: run.seed, best_comb: Some(run.best.comb), error: None },
            Err(e) => {
                RestartSummary { seed: cfg.seed.wrapping_add(i as u64), best_comb: None, error: Some(e.to_string()) }
            }
        })
        .collect::<Vec<_>>();

    let mut best: Option<SynthesisRun> = None;
    let mut failures = Vec::new();
    for r in runs {
        match r {
            Ok(run) => {
                if best.as_ref().map_or(true, |b| run.best.comb < b.best.comb) {
                    best = Some(run);
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    match best {
        Some(run) => Ok((run, summaries)),
        None => Err(Error::AllRestartsFailed { restarts: cfg.restarts, diagnostics: failures.join("; ") }),
    }
}
