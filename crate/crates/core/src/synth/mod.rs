//! Gradient-based synthesis of finite-memory randomized strategies.

mod adam;
mod comb;
mod optimize;
mod params;
mod renewal;

pub use adam::Adam;
pub use comb::{comb, comb_gradient, BsccComb, CombBreakdown, CombWeights, SynthesisProblem, DEFAULT_VAR_EPS};
pub use optimize::{multi_restart, optimize, RestartSummary, SynthesisConfig, SynthesisRun};
pub use params::{init_parameters, realize_strategy, ParamGroup, ParamLayout, ParameterVector};
pub use renewal::{penalties, renewal_statistics, RenewalStats};
