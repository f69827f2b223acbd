//! Local badness of a strategy: expected objective value of window
//! frequencies, started from a stationary pivot, minimized over BSCCs and
//! horizons up to `d`.

mod naive;
mod window;

pub use naive::naive_window_badness;
pub use window::{
    expected_window_badness, window_mass_trace, EvalConfig, RslMatrix, WindowHasher, WindowState,
    DEFAULT_MAX_LIVE_STATES,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::bscc::{decompose_bsccs, LocalChain};
use crate::error::{Error, Result};
use crate::objective::{satisfy_from_point, Objective};
use crate::stationary::solve_stationary;
use crate::strategy::InducedChain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Dp,
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsccEval {
    pub id: usize,
    pub states: Vec<usize>,
    pub invariant: Vec<f64>,
    /// `e_B[n-1] = Σ_v 𝕀_B(v) · rsl[v][n-1]`.
    pub expected: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rsl: RslMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub d: usize,
    pub bsccs: Vec<BsccEval>,
    pub l_badness: f64,
    pub argmin_bscc: usize,
    /// Horizon (1-based) attaining the minimum.
    pub argmin_n: usize,
}

impl EvalResult {
    pub fn without_rsl(mut self) -> Self {
        for b in &mut self.bsccs {
            b.rsl.clear();
        }
        self
    }

    /// Running minimum of `min_B e_B[n]` over `n ≤ d'` for every `d' ≤ d`.
    pub fn badness_profile(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        (0..self.d)
            .map(|i| {
                for b in &self.bsccs {
                    best = best.min(b.expected[i]);
                }
                best
            })
            .collect()
    }
}

fn window_rsl(local: &LocalChain, obj: &Objective, d: usize, cfg: &EvalConfig, method: Method) -> Result<RslMatrix> {
    match method {
        Method::Dp => expected_window_badness(local, obj, d, cfg),
        Method::Naive => naive_window_badness(local, obj, d, cfg),
    }
}

pub fn l_badness(chain: &InducedChain, obj: &Objective, d: usize, cfg: &EvalConfig) -> Result<EvalResult> {
    l_badness_with(chain, obj, d, cfg, Method::Dp)
}

pub fn l_badness_with(
    chain: &InducedChain,
    obj: &Objective,
    d: usize,
    cfg: &EvalConfig,
    method: Method,
) -> Result<EvalResult> {
    if obj.num_labels() != chain.num_labels() {
        return Err(Error::DimensionMismatch { expected: chain.num_labels(), got: obj.num_labels() });
    }
    let decomposition = decompose_bsccs(chain);
    let bsccs: Vec<BsccEval> = decomposition
        .bsccs
        .par_iter()
        .enumerate()
        .map(|(id, members)| {
            let local = LocalChain::new(chain, members)?;
            let (invariant, _) = solve_stationary(&local.dense())?;
            let rsl = window_rsl(&local, obj, d, cfg, method)?;
            let expected = (0..d).map(|i| invariant.iter().zip(&rsl).map(|(z, row)| z * row[i]).sum()).collect();
            Ok(BsccEval { id, states: members.clone(), invariant, expected, rsl })
        })
        .collect::<Result<_>>()?;

    let (mut best, mut argmin_bscc, mut argmin_n) = (f64::INFINITY, 0, 1);
    for n in 1..=d {
        for b in &bsccs {
            if b.expected[n - 1] < best {
                (best, argmin_bscc, argmin_n) = (b.expected[n - 1], b.id, n);
            }
        }
    }
    Ok(EvalResult { d, bsccs, l_badness: best, argmin_bscc, argmin_n })
}

/// `Prob[Freq_n = ν]` under a stationary pivot, for chains with one BSCC.
pub fn window_match_probability(chain: &InducedChain, nu: &[f64], n: usize, cfg: &EvalConfig) -> Result<f64> {
    let decomposition = decompose_bsccs(chain);
    if decomposition.len() != 1 {
        return Err(Error::MultipleBsccs { count: decomposition.len() });
    }
    let obj = satisfy_from_point(nu)?;
    let local = LocalChain::new(chain, &decomposition.bsccs[0])?;
    let (invariant, _) = solve_stationary(&local.dense())?;
    let rsl = expected_window_badness(&local, &obj, n, cfg)?;
    let miss: f64 = invariant.iter().zip(&rsl).map(|(z, row)| z * row[n - 1]).sum();
    Ok((1.0 - miss).clamp(0.0, 1.0))
}
