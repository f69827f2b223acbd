//! Conditional expected window badness by dynamic programming over
//! (state, label-count vector) pairs.
//!
//! For every initial state the evaluator keeps two hash maps: the total
//! probability of all length-`n` paths ending in a given state with a given
//! vector of label counts, and the map being filled for length `n + 1`. The
//! maps are swapped and cleared after each horizon step.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hash, Hasher};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::bscc::LocalChain;
use crate::error::{Error, Result};
use crate::objective::Objective;

/// About 1 GB of frontier per initial state being processed.
pub const DEFAULT_MAX_LIVE_STATES: usize = 1 << 22;

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Cap on live entries in one frontier map.
    pub max_live_states: usize,
    pub timeout: Option<Duration>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { max_live_states: DEFAULT_MAX_LIVE_STATES, timeout: None }
    }
}

impl EvalConfig {
    pub(crate) fn deadline(&self) -> Option<(Instant, Duration)> {
        self.timeout.map(|t| (Instant::now() + t, t))
    }
}

pub(crate) fn check_deadline(deadline: Option<(Instant, Duration)>) -> Result<()> {
    match deadline {
        Some((at, limit)) if Instant::now() >= at => Err(Error::Timeout { secs: limit.as_secs_f64() }),
        _ => Ok(()),
    }
}

/// Last state of a path prefix and the number of visits to each label so far
/// (the initial state included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowState {
    pub vertex: u32,
    pub counts: SmallVec<[u16; 12]>,
}

impl Hash for WindowState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // s ⊕ ⨁_ℓ vec[ℓ] << (3(ℓ+1) mod 64); the hasher finalizes the word.
        let mut key = self.vertex as u64;
        for (l, &c) in self.counts.iter().enumerate() {
            key ^= (c as u64) << ((3 * (l + 1)) % 64);
        }
        state.write_u64(key);
    }
}

/// Integer hasher with a splitmix64 finalizer.
#[derive(Debug, Default, Clone, Copy)]
pub struct WindowHasher(u64);

impl Hasher for WindowHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u64(self.0 ^ b as u64);
        }
    }

    fn write_u64(&mut self, x: u64) {
        let mut z = (self.0 ^ x).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        self.0 = z ^ (z >> 31);
    }
}

type Frontier = HashMap<WindowState, f64, BuildHasherDefault<WindowHasher>>;

/// `rsl[v][n-1] = 𝔼[Obj(Freq_n) | Init = v]` for the local states of one BSCC.
pub type RslMatrix = Vec<Vec<f64>>;

pub(crate) fn check_horizon(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidConfig("horizon d must be at least 1".into()));
    }
    if d > u16::MAX as usize {
        return Err(Error::InvalidConfig(format!("horizon {d} exceeds {}", u16::MAX)));
    }
    Ok(())
}

pub(crate) fn check_labels(local: &LocalChain, obj: &Objective) -> Result<()> {
    if obj.num_labels() != local.num_labels {
        return Err(Error::DimensionMismatch { expected: local.num_labels, got: obj.num_labels() });
    }
    Ok(())
}

/// Runs the DP from one initial state. When `mass` is given, the total
/// probability held by the frontier is recorded at every horizon.
pub(crate) fn window_from(
    local: &LocalChain,
    obj: &Objective,
    d: usize,
    v0: usize,
    cfg: &EvalConfig,
    deadline: Option<(Instant, Duration)>,
    mut mass: Option<&mut Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut rsl = vec![0.0; d];
    let mut cur = Frontier::default();
    let mut next = Frontier::default();
    let mut scratch = Vec::with_capacity(local.num_labels);

    let mut counts: SmallVec<[u16; 12]> = SmallVec::from_elem(0, local.num_labels);
    counts[local.labels[v0]] += 1;
    cur.insert(WindowState { vertex: v0 as u32, counts }, 1.0);

    for n in 1..=d {
        let mut acc = 0.0;
        for (s, &p) in &cur {
            acc += p * obj.eval_counts(&s.counts, n, &mut scratch);
        }
        rsl[n - 1] = acc;
        if let Some(m) = mass.as_deref_mut() {
            m.push(cur.values().sum());
        }
        if n == d {
            break;
        }
        check_deadline(deadline)?;
        for (s, &p) in &cur {
            for &(u, q) in &local.succ[s.vertex as usize] {
                let mut key = s.clone();
                key.vertex = u as u32;
                key.counts[local.labels[u]] += 1;
                *next.entry(key).or_insert(0.0) += p * q;
            }
            if next.len() > cfg.max_live_states {
                return Err(Error::Budget { budget: cfg.max_live_states });
            }
        }
        std::mem::swap(&mut cur, &mut next);
        next.clear();
    }
    Ok(rsl)
}

/// Expected window badness for every initial state of the BSCC and every
/// horizon `1..=d`. Initial states are processed in parallel.
pub fn expected_window_badness(local: &LocalChain, obj: &Objective, d: usize, cfg: &EvalConfig) -> Result<RslMatrix> {
    check_horizon(d)?;
    check_labels(local, obj)?;
    let deadline = cfg.deadline();
    (0..local.len()).into_par_iter().map(|v0| window_from(local, obj, d, v0, cfg, deadline, None)).collect()
}

/// Frontier mass after each horizon step, starting from local state `v0`.
pub fn window_mass_trace(local: &LocalChain, d: usize, v0: usize) -> Result<Vec<f64>> {
    check_horizon(d)?;
    let obj = Objective::Distance {
        target: vec![1.0 / local.num_labels as f64; local.num_labels],
        norm: crate::objective::Norm::L1,
    };
    let mut mass = Vec::with_capacity(d);
    window_from(local, &obj, d, v0, &EvalConfig::default(), None, Some(&mut mass))?;
    Ok(mass)
}
