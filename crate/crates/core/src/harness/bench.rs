//! Scalability benchmark over the ring family: synthesis step time, window
//! evaluation time and naive evaluation time.

use std::time::{Duration, Instant};

use super::instances::gen_dn;
use super::report::BenchRow;
use crate::error::Result;
use crate::eval::{l_badness_with, EvalConfig, Method, DEFAULT_MAX_LIVE_STATES};
use crate::objective::{Norm, Objective};
use crate::strategy::FrStrategy;
use crate::synth::{init_parameters, Adam, CombWeights, SynthesisConfig, SynthesisProblem};

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    /// Timed synthesis steps per row.
    pub steps: usize,
    /// Untimed steps before timing starts.
    pub warmup: usize,
    pub timeout: Duration,
    pub max_live_states: usize,
    pub seed: u64,
    pub beta: f64,
    pub gamma: f64,
    pub skip_eval: bool,
    pub skip_naive: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            steps: 100,
            warmup: 5,
            timeout: Duration::from_secs(900),
            max_live_states: DEFAULT_MAX_LIVE_STATES,
            seed: 0,
            beta: 0.0,
            gamma: 0.2,
            skip_eval: false,
            skip_naive: false,
        }
    }
}

/// Mean wall-clock time of one synthesis step (comb, gradient and update) on
/// the ring instance of size `n`, and the strategy reached.
pub fn mean_step_secs(n: usize, opts: &BenchOptions) -> Result<(usize, f64, FrStrategy)> {
    let bundle = gen_dn(n)?;
    let obj = Objective::distance(bundle.target.clone(), Norm::L2)?;
    let problem = SynthesisProblem::new(&bundle.mdp, &bundle.alloc, &bundle.labeling, &obj)?;
    let weights = CombWeights::new(opts.beta, opts.gamma)?;
    let cfg = SynthesisConfig::default();
    let mut theta = init_parameters(&problem.space, &problem.mdp, opts.seed, cfg.init_range)?.theta;
    let mut adam = Adam::new(theta.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut step = |theta: &mut Vec<f64>| -> Result<()> {
        let (_, grad) = problem.evaluate(theta, &weights, true)?;
        adam.step(theta, &grad.expect("gradient requested"));
        Ok(())
    };
    for _ in 0..opts.warmup {
        step(&mut theta)?;
    }
    let started = Instant::now();
    for _ in 0..opts.steps.max(1) {
        step(&mut theta)?;
    }
    let secs = started.elapsed().as_secs_f64() / opts.steps.max(1) as f64;
    Ok((problem.num_params(), secs, problem.strategy(&theta)))
}

fn timed_eval(n: usize, sigma: &FrStrategy, method: Method, opts: &BenchOptions) -> Result<String> {
    let bundle = gen_dn(n)?;
    let obj = Objective::distance(bundle.target.clone(), Norm::L2)?;
    let problem = SynthesisProblem::new(&bundle.mdp, &bundle.alloc, &bundle.labeling, &obj)?;
    let chain = problem.chain(sigma);
    let cfg = EvalConfig { max_live_states: opts.max_live_states, timeout: Some(opts.timeout) };
    let started = Instant::now();
    Ok(match l_badness_with(&chain, &obj, bundle.d, &cfg, method) {
        Ok(_) => format!("{}", started.elapsed().as_secs_f64()),
        Err(crate::Error::Timeout { .. }) => "timeout".into(),
        Err(e) if e.is_resource() => "resource".into(),
        Err(e) => return Err(e),
    })
}

/// One row per ring size. Rows run one after another so that timings do not
/// interfere.
pub fn run_bench(ns: &[usize], opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let bundle = gen_dn(n)?;
        let (par, step_secs, sigma) = mean_step_secs(n, opts)?;
        let eval_secs = if opts.skip_eval { "skipped".into() } else { timed_eval(n, &sigma, Method::Dp, opts)? };
        let naive_secs = if opts.skip_naive { "skipped".into() } else { timed_eval(n, &sigma, Method::Naive, opts)? };
        rows.push(BenchRow { n, par, d: bundle.d, step_secs, eval_secs, naive_secs });
    }
    Ok(rows)
}
