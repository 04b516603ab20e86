//! Scalar quadratic `c(θ, x) = (θ − x)²` with `x` a Rademacher sign.
//!
//! Since `|x| = 1` and `E[x] = 0`, the cost expands to `θ² + 1 − 2θx`, so
//! `e(θ) = θ² + 1`, the deviation is `d(θ, x) = −2θx`, `σ(θ) = 2|θ|` and the
//! coefficient of variation is `2|θ| / (θ² + 1)`. The minimizer is `θ = 0`
//! with risk 1.

use rand::Rng;

use super::{ParamVector, ProblemOracle, StochasticProblem};

/// Draw `+1` or `−1` with probability 1/2 each.
pub fn rademacher_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

pub fn rademacher_cost(theta: f64, x: f64) -> f64 {
    let r = theta - x;
    r * r
}

pub fn rademacher_grad(theta: f64, x: f64) -> f64 {
    2.0 * (theta - x)
}

/// `2|θ| / (θ² + 1)`.
pub fn rademacher_cv(theta: f64) -> f64 {
    2.0 * theta.abs() / (theta * theta + 1.0)
}

pub fn rademacher_oracle() -> ProblemOracle {
    ProblemOracle::none()
        .with_true_risk(|t| t[0] * t[0] + 1.0)
        .with_true_cv(|t| rademacher_cv(t[0]))
        .with_minimizer(ParamVector::from_raw(vec![0.0]), 1.0)
}

#[derive(Debug, Clone)]
pub struct RademacherProblem {
    oracle: ProblemOracle,
}

impl RademacherProblem {
    pub fn new() -> Self {
        RademacherProblem {
            oracle: rademacher_oracle(),
        }
    }
}

impl Default for RademacherProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl StochasticProblem for RademacherProblem {
    type Sample = f64;

    fn name(&self) -> &'static str {
        "rademacher"
    }

    fn dim(&self) -> usize {
        1
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rademacher_sample(rng)
    }

    fn cost(&self, theta: &ParamVector, x: &f64) -> f64 {
        rademacher_cost(theta[0], *x)
    }

    fn accumulate_gradient(&self, theta: &ParamVector, x: &f64, out: &mut [f64]) {
        out[0] += rademacher_grad(theta[0], *x);
    }

    fn oracle(&self) -> &ProblemOracle {
        &self.oracle
    }

    fn exact_gradient(&self, theta: &ParamVector) -> Option<ParamVector> {
        Some(ParamVector::from_raw(vec![2.0 * theta[0]]))
    }
}
