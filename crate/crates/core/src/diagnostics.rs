//! Coefficient-of-variation estimates and momentum roll-off.
//!
//! A minibatch's per-sample costs give, for free, an estimate of the mean
//! cost and of its spread. Their ratio (the CV) measures how deterministic
//! the objective looks at the current parameters: a small CV means the risk
//! dominates the per-sample deviation and acceleration is safe; a large CV
//! means noise dominates and plain Robbins–Monro steps are preferable.
//!
//! The standard deviation uses the unbiased `k − 1` denominator and is
//! computed per minibatch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvEstimate {
    pub mean_cost: f64,
    pub std_cost: f64,
    /// `std_cost / mean_cost`, or `None` when the mean is not positive.
    pub cv: Option<f64>,
    pub k: usize,
}

impl CvEstimate {
    pub fn is_valid(&self) -> bool {
        self.cv.is_some()
    }
}

/// Sample mean, unbiased sample standard deviation and their ratio.
pub fn estimate_cv(costs: &[f64]) -> Result<CvEstimate> {
    let k = costs.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "CV estimate needs at least 2 costs, got {k}"
        )));
    }
    if let Some(c) = costs.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite cost {c}")));
    }
    let n = k as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let ss: f64 = costs.iter().map(|c| (c - mean) * (c - mean)).sum();
    let std = (ss / (n - 1.0)).sqrt();
    let cv = (mean > 0.0).then(|| std / mean);
    Ok(CvEstimate {
        mean_cost: mean,
        std_cost: std,
        cv,
        k,
    })
}

/// How momentum `β` is chosen from the (smoothed) CV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RolloffPolicy {
    /// Always `beta_max`.
    Constant { beta_max: f64 },
    /// `beta_max` while `cv < cv_high`, otherwise 0.
    CvThreshold { beta_max: f64, cv_high: f64 },
    /// `beta_max` up to `cv_low`, 0 from `cv_high`, linear in between.
    CvLinear {
        beta_max: f64,
        cv_low: f64,
        cv_high: f64,
    },
}

impl Default for RolloffPolicy {
    fn default() -> Self {
        RolloffPolicy::CvLinear {
            beta_max: 0.9,
            cv_low: 0.1,
            cv_high: 1.0,
        }
    }
}

impl RolloffPolicy {
    pub fn validate(&self) -> Result<()> {
        let beta_max = self.beta_max();
        if !(0.0..1.0).contains(&beta_max) {
            return Err(Error::InvalidParameter(format!(
                "beta_max must lie in [0, 1), got {beta_max}"
            )));
        }
        match *self {
            RolloffPolicy::Constant { .. } => Ok(()),
            RolloffPolicy::CvThreshold { cv_high, .. } => {
                if cv_high >= 0.0 && cv_high.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "cv_high must be finite and >= 0, got {cv_high}"
                    )))
                }
            }
            RolloffPolicy::CvLinear { cv_low, cv_high, .. } => {
                if cv_low >= 0.0 && cv_high > cv_low && cv_high.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "need 0 <= cv_low < cv_high, got cv_low={cv_low}, cv_high={cv_high}"
                    )))
                }
            }
        }
    }

    pub fn beta_max(&self) -> f64 {
        match *self {
            RolloffPolicy::Constant { beta_max }
            | RolloffPolicy::CvThreshold { beta_max, .. }
            | RolloffPolicy::CvLinear { beta_max, .. } => beta_max,
        }
    }

    /// Momentum for a CV value. A missing or invalid CV falls back to 0
    /// for the CV-driven policies.
    pub fn beta(&self, cv: Option<f64>) -> f64 {
        match *self {
            RolloffPolicy::Constant { beta_max } => beta_max,
            _ if cv.is_none_or(|c| c.is_nan()) => 0.0,
            RolloffPolicy::CvThreshold { beta_max, cv_high } => {
                if cv.unwrap() < cv_high {
                    beta_max
                } else {
                    0.0
                }
            }
            RolloffPolicy::CvLinear {
                beta_max,
                cv_low,
                cv_high,
            } => {
                let c = cv.unwrap();
                if c <= cv_low {
                    beta_max
                } else if c >= cv_high {
                    0.0
                } else {
                    (beta_max * (cv_high - c) / (cv_high - cv_low)).clamp(0.0, beta_max)
                }
            }
        }
    }
}

pub fn beta_from_cv(policy: &RolloffPolicy, estimate: &CvEstimate) -> f64 {
    policy.beta(estimate.cv)
}

/// Median of the CVs of the last `window` valid estimates.
pub fn smooth_cv(history: &[CvEstimate], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidParameter("smoothing window must be >= 1".into()));
    }
    let recent: Vec<f64> = history
        .iter()
        .rev()
        .filter_map(|e| e.cv)
        .take(window)
        .collect();
    median(recent).ok_or_else(|| Error::InsufficientData("no valid CV estimates".into()))
}

pub(crate) fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Per-run record of raw CV estimates, owned by a single run.
#[derive(Debug, Clone, Default)]
pub struct CvHistory {
    estimates: Vec<CvEstimate>,
}

impl CvHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, estimate: CvEstimate) {
        self.estimates.push(estimate);
    }

    pub fn estimates(&self) -> &[CvEstimate] {
        &self.estimates
    }

    pub fn smoothed(&self, window: usize) -> Option<f64> {
        smooth_cv(&self.estimates, window).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn est(cv: f64) -> CvEstimate {
        CvEstimate {
            mean_cost: 1.0,
            std_cost: cv,
            cv: Some(cv),
            k: 2,
        }
    }

    #[test]
    fn constant_costs_have_zero_cv() {
        let e = estimate_cv(&[5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(e.cv, Some(0.0));
        assert_eq!(e.mean_cost, 5.0);
        assert_eq!(e.k, 4);
    }

    #[test]
    fn unbiased_denominator() {
        let e = estimate_cv(&[1.0, 3.0]).unwrap();
        assert_eq!(e.mean_cost, 2.0);
        assert!((e.std_cost - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn too_few_costs() {
        assert!(matches!(estimate_cv(&[1.0]), Err(Error::InsufficientData(_))));
        assert!(matches!(estimate_cv(&[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn nonpositive_mean_is_flagged_not_fatal() {
        let e = estimate_cv(&[0.0, 0.0, 0.0]).unwrap();
        assert!(!e.is_valid());
        let e = estimate_cv(&[-1.0, 0.5]).unwrap();
        assert!(!e.is_valid());
        assert_eq!(RolloffPolicy::default().beta(e.cv), 0.0);
    }

    #[test]
    fn linear_policy_boundaries() {
        let p = RolloffPolicy::CvLinear {
            beta_max: 0.9,
            cv_low: 0.2,
            cv_high: 1.0,
        };
        assert_eq!(p.beta(Some(0.2)), 0.9);
        assert!((p.beta(Some(0.6)) - 0.45).abs() < 1e-15);
        assert_eq!(p.beta(Some(1.0)), 0.0);
        assert_eq!(p.beta(Some(5.0)), 0.0);
        assert_eq!(p.beta(None), 0.0);
    }

    #[test]
    fn threshold_policy_closed_on_high_side() {
        let p = RolloffPolicy::CvThreshold {
            beta_max: 0.5,
            cv_high: 0.7,
        };
        assert_eq!(p.beta(Some(0.69)), 0.5);
        assert_eq!(p.beta(Some(0.7)), 0.0);
    }

    #[test]
    fn constant_policy_ignores_cv() {
        let p = RolloffPolicy::Constant { beta_max: 0.9 };
        assert_eq!(p.beta(None), 0.9);
        assert_eq!(p.beta(Some(100.0)), 0.9);
        assert_eq!(beta_from_cv(&p, &est(3.0)), 0.9);
    }

    #[test]
    fn policy_validation() {
        assert!(RolloffPolicy::Constant { beta_max: 1.0 }.validate().is_err());
        assert!(RolloffPolicy::Constant { beta_max: -0.1 }.validate().is_err());
        assert!(RolloffPolicy::CvLinear {
            beta_max: 0.5,
            cv_low: 1.0,
            cv_high: 1.0
        }
        .validate()
        .is_err());
        assert!(RolloffPolicy::default().validate().is_ok());
    }

    #[test]
    fn smoothing() {
        assert_eq!(smooth_cv(&[est(0.3), est(0.4)], 1).unwrap(), 0.4);
        assert_eq!(smooth_cv(&[est(0.1), est(100.0), est(0.12)], 3).unwrap(), 0.12);
        let flat = vec![est(0.25); 7];
        for w in 1..10 {
            assert_eq!(smooth_cv(&flat, w).unwrap(), 0.25);
        }
        assert!(smooth_cv(&[], 3).is_err());
        let invalid = CvEstimate {
            cv: None,
            ..est(0.0)
        };
        assert!(smooth_cv(&[invalid], 3).is_err());
        // invalid entries are skipped rather than counted in the window
        assert_eq!(smooth_cv(&[est(0.5), invalid, invalid], 1).unwrap(), 0.5);
    }

    fn policies() -> impl Strategy<Value = RolloffPolicy> {
        (0.0..0.999f64, 0.0..2.0f64, 0.001..2.0f64).prop_flat_map(|(b, lo, span)| {
            prop_oneof![
                Just(RolloffPolicy::Constant { beta_max: b }),
                Just(RolloffPolicy::CvThreshold {
                    beta_max: b,
                    cv_high: lo + span
                }),
                Just(RolloffPolicy::CvLinear {
                    beta_max: b,
                    cv_low: lo,
                    cv_high: lo + span
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn beta_is_monotone_and_bounded(p in policies(), a in 0.0..5.0f64, b in 0.0..5.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (blo, bhi) = (p.beta(Some(lo)), p.beta(Some(hi)));
            prop_assert!(blo >= bhi);
            for v in [blo, bhi] {
                prop_assert!((0.0..=p.beta_max()).contains(&v));
            }
        }

        #[test]
        fn cv_matches_definition(costs in prop::collection::vec(0.01..100.0f64, 2..50)) {
            let e = estimate_cv(&costs).unwrap();
            prop_assert!((e.cv.unwrap() - e.std_cost / e.mean_cost).abs() < 1e-12);
        }
    }
}
