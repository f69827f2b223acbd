//! Long-run average objectives over label distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when testing interval membership for `Satisfy`.
pub const SATISFY_SLACK: f64 = 1e-12;

/// L2 distances at or below this get the zero subgradient.
pub const DISTANCE_KINK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `‖μ − ν‖` under the chosen norm.
    Distance { target: Vec<f64>, norm: Norm },
    /// 0 if every `μ(ℓ)` lies in its interval, else 1.
    Satisfy { intervals: Vec<(f64, f64)> },
}

impl Objective {
    pub fn distance(target: Vec<f64>, norm: Norm) -> Result<Self> {
        check_distribution(&target)?;
        Ok(Objective::Distance { target, norm })
    }

    pub fn satisfy(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for (l, &(lo, hi)) in intervals.iter().enumerate() {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidObjective(format!(
                    "interval [{lo}, {hi}] for label {l} is not within [0,1]"
                )));
            }
        }
        Ok(Objective::Satisfy { intervals })
    }

    pub fn num_labels(&self) -> usize {
        match self {
            Objective::Distance { target, .. } => target.len(),
            Objective::Satisfy { intervals } => intervals.len(),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        matches!(self, Objective::Distance { .. })
    }

    pub fn eval(&self, mu: &[f64]) -> Result<f64> {
        if mu.len() != self.num_labels() {
            return Err(Error::DimensionMismatch { expected: self.num_labels(), got: mu.len() });
        }
        Ok(self.eval_unchecked(mu))
    }

    pub(crate) fn eval_unchecked(&self, mu: &[f64]) -> f64 {
        match self {
            Objective::Distance { target, norm: Norm::L1 } => mu.iter().zip(target).map(|(a, b)| (a - b).abs()).sum(),
            Objective::Distance { target, norm: Norm::L2 } => {
                mu.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            }
            Objective::Satisfy { intervals } => {
                let inside =
                    mu.iter().zip(intervals).all(|(&m, &(lo, hi))| m >= lo - SATISFY_SLACK && m <= hi + SATISFY_SLACK);
                if inside {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Objective value at the frequency vector `counts / n`.
    pub(crate) fn eval_counts(&self, counts: &[u16], n: usize, scratch: &mut Vec<f64>) -> f64 {
        let n = n as f64;
        scratch.clear();
        scratch.extend(counts.iter().map(|&c| c as f64 / n));
        self.eval_unchecked(scratch)
    }

    /// Gradient with respect to `μ`; zero subgradient at non-smooth points.
    pub(crate) fn gradient(&self, mu: &[f64]) -> Result<Vec<f64>> {
        match self {
            Objective::Distance { target, norm: Norm::L1 } => Ok(mu
                .iter()
                .zip(target)
                .map(|(a, b)| match a.partial_cmp(b) {
                    Some(std::cmp::Ordering::Greater) => 1.0,
                    Some(std::cmp::Ordering::Less) => -1.0,
                    _ => 0.0,
                })
                .collect()),
            Objective::Distance { target, norm: Norm::L2 } => {
                let d = self.eval_unchecked(mu);
                // at the target the norm has a kink; round-off keeps d from being exactly 0
                if d <= DISTANCE_KINK {
                    return Ok(vec![0.0; mu.len()]);
                }
                Ok(mu.iter().zip(target).map(|(a, b)| (a - b) / d).collect())
            }
            Objective::Satisfy { .. } => Err(Error::NotDifferentiable),
        }
    }

    /// A differentiable stand-in for a `Satisfy` objective: the L2 distance to
    /// the normalized interval midpoints.
    pub fn distance_surrogate(&self) -> Result<Objective> {
        match self {
            Objective::Distance { .. } => Ok(self.clone()),
            Objective::Satisfy { intervals } => {
                let mids: Vec<f64> = intervals.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
                let total: f64 = mids.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidObjective("all interval midpoints are zero".into()));
                }
                Objective::distance(mids.iter().map(|m| m / total).collect(), Norm::L2)
            }
        }
    }
}

fn check_distribution(nu: &[f64]) -> Result<()> {
    if nu.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidObjective("target has a negative or non-finite entry".into()));
    }
    let total: f64 = nu.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidObjective(format!("target sums to {total}")));
    }
    Ok(())
}

pub fn eval_objective(obj: &Objective, mu: &[f64]) -> Result<f64> {
    obj.eval(mu)
}

/// `Satisfy` with degenerate intervals `[ν(ℓ), ν(ℓ)]`.
pub fn satisfy_from_point(nu: &[f64]) -> Result<Objective> {
    check_distribution(nu)?;
    Objective::satisfy(nu.iter().map(|&p| (p, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn alternating_distance() {
        let obj = Objective::distance(vec![0.8, 0.2], Norm::L2).unwrap();
        let v = obj.eval(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(v, 0.18f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.424264, epsilon = 1e-6);
    }

    #[test]
    fn identity_is_zero() {
        for norm in [Norm::L1, Norm::L2] {
            let obj = Objective::distance(vec![0.3, 0.7], norm).unwrap();
            assert_eq!(obj.eval(&[0.3, 0.7]).unwrap(), 0.0);
        }
    }

    #[test]
    fn point_satisfy() {
        let obj = satisfy_from_point(&[0.9, 0.1]).unwrap();
        assert_eq!(obj, Objective::Satisfy { intervals: vec![(0.9, 0.9), (0.1, 0.1)] });
        assert_eq!(obj.eval(&[0.9, 0.1]).unwrap(), 0.0);
        assert_eq!(obj.eval(&[9.0 / 10.0, 1.0 / 10.0]).unwrap(), 0.0);
        assert_eq!(obj.eval(&[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(obj.eval(&[0.8, 0.2]).unwrap(), 1.0);
    }

    #[test]
    fn thirds_survive_representation_error() {
        let obj = satisfy_from_point(&[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let mut scratch = Vec::new();
        assert_eq!(obj.eval_counts(&[1, 2], 3, &mut scratch), 0.0);
        assert_eq!(obj.eval_counts(&[2, 4], 6, &mut scratch), 0.0);
        assert_eq!(obj.eval_counts(&[2, 3], 5, &mut scratch), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let obj = Objective::distance(vec![0.5, 0.5], Norm::L1).unwrap();
        assert!(matches!(obj.eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_definitions() {
        assert!(Objective::distance(vec![0.5, 0.6], Norm::L2).is_err());
        assert!(Objective::satisfy(vec![(0.5, 0.2)]).is_err());
        assert!(Objective::satisfy(vec![(0.0, 1.5)]).is_err());
    }

    #[test]
    fn satisfy_is_not_differentiable() {
        let obj = satisfy_from_point(&[0.5, 0.5]).unwrap();
        assert!(matches!(obj.gradient(&[0.5, 0.5]), Err(Error::NotDifferentiable)));
        let surrogate = obj.distance_surrogate().unwrap();
        assert_eq!(surrogate, Objective::Distance { target: vec![0.5, 0.5], norm: Norm::L2 });
    }

    fn dist(raw: &[f64]) -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect()
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(
            a in proptest::collection::vec(0.01f64..1.0, 4),
            b in proptest::collection::vec(0.01f64..1.0, 4),
            c in proptest::collection::vec(0.01f64..1.0, 4),
            l2 in any::<bool>(),
        ) {
            let norm = if l2 { Norm::L2 } else { Norm::L1 };
            let (a, b, c) = (dist(&a), dist(&b), dist(&c));
            let ab = Objective::distance(b.clone(), norm).unwrap().eval(&a).unwrap();
            let bc = Objective::distance(c.clone(), norm).unwrap().eval(&b).unwrap();
            let ac = Objective::distance(c, norm).unwrap().eval(&a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert_eq!(Objective::distance(a.clone(), norm).unwrap().eval(&a).unwrap(), 0.0);
            let bound = if l2 { 2f64.sqrt() } else { 2.0 };
            prop_assert!(ab <= bound + 1e-12);
        }

        #[test]
        fn satisfy_and_distance_agree_on_zero(
            target in proptest::collection::vec(1u16..6, 2..5),
            window in proptest::collection::vec(0u16..6, 2..5),
        ) {
            let k = target.len().min(window.len());
            let (target, mut window) = (&target[..k], window[..k].to_vec());
            if window.iter().all(|&c| c == 0) {
                window[0] = 1;
            }
            let t_total: u16 = target.iter().sum();
            let nu: Vec<f64> = target.iter().map(|&c| c as f64 / t_total as f64).collect();
            let n: u16 = window.iter().sum();
            let mu: Vec<f64> = window.iter().map(|&c| c as f64 / n as f64).collect();
            let distance = Objective::distance(nu.clone(), Norm::L2).unwrap().eval(&mu).unwrap();
            let sat = satisfy_from_point(&nu).unwrap().eval(&mu).unwrap();
            // exact rational equality of count vectors
            let equal = window.iter().zip(target).all(|(&w, &t)| w as u32 * t_total as u32 == t as u32 * n as u32);
            prop_assert_eq!(sat == 0.0, equal);
            prop_assert_eq!(distance == 0.0, equal);
        }
    }
}
