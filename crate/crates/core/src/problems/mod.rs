//! Stochastic objectives.
//!
//! A problem supplies i.i.d. samples `x` from its data distribution, the
//! per-sample cost `c(θ, x)` and its gradient in `θ`. The risk is the
//! expectation `e(θ) = E[c(θ, X)]`; where it is known in closed form the
//! problem exposes it through a [`ProblemOracle`].
//!
//! All costs are nonnegative and unshifted, so the magnitude of the cost is a
//! direct gauge of how good `θ` is.

mod least_squares;
mod logistic;
mod rademacher;

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

pub use least_squares::{LabeledSample, LeastSquaresProblem};
pub use logistic::{ClassSample, LogisticProblem, TestMetrics, DEFAULT_TEST_PER_CLASS, DEFAULT_TRAIN_SIZE};
pub use rademacher::{
    rademacher_cost, rademacher_cv, rademacher_grad, rademacher_oracle, rademacher_sample,
    RademacherProblem,
};

/// A dense real parameter vector `θ`.
///
/// Public constructors reject empty and non-finite input. Vectors produced
/// by optimizer arithmetic are not re-validated; divergence is caught by the
/// run loop instead.
#[derive(Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "parameter vector must have dimension >= 1".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "parameter entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(ParamVector(values))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    /// # Panics
    /// Panics if `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "parameter vector must have dimension >= 1");
        ParamVector(vec![0.0; dim])
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        ParamVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// The single coordinate of a one-dimensional vector.
    pub fn as_scalar(&self) -> Option<f64> {
        match self.0.as_slice() {
            [v] => Some(*v),
            _ => None,
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ParamVector").field(&self.0).finish()
    }
}

type ParamFn = Arc<dyn Fn(&ParamVector) -> f64 + Send + Sync>;

/// Closed-form knowledge about a problem, where it exists.
#[derive(Clone, Default)]
pub struct ProblemOracle {
    true_risk: Option<ParamFn>,
    true_cv: Option<ParamFn>,
    minimizer: Option<ParamVector>,
    min_risk: Option<f64>,
}

impl ProblemOracle {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_true_risk(mut self, f: impl Fn(&ParamVector) -> f64 + Send + Sync + 'static) -> Self {
        self.true_risk = Some(Arc::new(f));
        self
    }

    pub fn with_true_cv(mut self, f: impl Fn(&ParamVector) -> f64 + Send + Sync + 'static) -> Self {
        self.true_cv = Some(Arc::new(f));
        self
    }

    pub fn with_minimizer(mut self, minimizer: ParamVector, min_risk: f64) -> Self {
        self.minimizer = Some(minimizer);
        self.min_risk = Some(min_risk);
        self
    }

    /// `e(θ)`, the expected cost.
    pub fn true_risk(&self, theta: &ParamVector) -> Option<f64> {
        self.true_risk.as_ref().map(|f| f(theta))
    }

    /// Standard deviation of `c(θ, X)` divided by `e(θ)`.
    pub fn true_cv(&self, theta: &ParamVector) -> Option<f64> {
        self.true_cv.as_ref().map(|f| f(theta))
    }

    pub fn minimizer(&self) -> Option<&ParamVector> {
        self.minimizer.as_ref()
    }

    pub fn min_risk(&self) -> Option<f64> {
        self.min_risk
    }

    /// `e(θ) - min e`, when both are known.
    pub fn risk_gap(&self, theta: &ParamVector) -> Option<f64> {
        Some(self.true_risk(theta)? - self.min_risk?)
    }
}

impl fmt::Debug for ProblemOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemOracle")
            .field("true_risk", &self.true_risk.is_some())
            .field("true_cv", &self.true_cv.is_some())
            .field("minimizer", &self.minimizer)
            .field("min_risk", &self.min_risk)
            .finish()
    }
}

/// A stochastic objective `c(θ, x)` with `x` drawn i.i.d. from a fixed
/// distribution.
///
/// Problems are immutable after construction. All randomness enters through
/// the generator passed to [`StochasticProblem::sample`].
pub trait StochasticProblem: Send + Sync {
    type Sample: Clone + fmt::Debug + Send + Sync;

    fn name(&self) -> &'static str;

    /// Dimension of the parameter vector.
    fn dim(&self) -> usize;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Sample;

    fn cost(&self, theta: &ParamVector, x: &Self::Sample) -> f64;

    /// Add `∂c/∂θ (θ, x)` into `out`.
    fn accumulate_gradient(&self, theta: &ParamVector, x: &Self::Sample, out: &mut [f64]);

    fn gradient(&self, theta: &ParamVector, x: &Self::Sample) -> ParamVector {
        let mut out = vec![0.0; self.dim()];
        self.accumulate_gradient(theta, x, &mut out);
        ParamVector::from_raw(out)
    }

    fn oracle(&self) -> &ProblemOracle;

    /// Gradient of the risk `e(θ)` itself, for problems where it is known.
    fn exact_gradient(&self, _theta: &ParamVector) -> Option<ParamVector> {
        None
    }

    /// The fixed training set, for problems trained by epochs over a finite
    /// sample.
    fn train_set(&self) -> Option<&[Self::Sample]> {
        None
    }

    /// Held-out metrics, for problems that carry a test set.
    fn evaluate_test(&self, _theta: &ParamVector) -> Option<TestMetrics> {
        None
    }
}

/// `k` samples evaluated at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch<S> {
    pub samples: Vec<S>,
    /// Per-sample costs `c(θ, x_j)`.
    pub costs: Vec<f64>,
    /// `(1/k) Σ_j ∂c/∂θ (θ, x_j)`.
    pub mean_gradient: ParamVector,
}

impl<S: Clone> Minibatch<S> {
    /// Evaluate costs and the mean gradient of `samples` at `theta`.
    pub fn evaluate<P>(problem: &P, theta: &ParamVector, samples: Vec<S>) -> Result<Self>
    where
        P: StochasticProblem<Sample = S> + ?Sized,
    {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("minibatch size must be >= 1".into()));
        }
        theta.check_dim(problem.dim())?;
        let mut sum = vec![0.0; problem.dim()];
        let mut costs = Vec::with_capacity(samples.len());
        for x in &samples {
            costs.push(problem.cost(theta, x));
            problem.accumulate_gradient(theta, x, &mut sum);
        }
        let k = samples.len() as f64;
        sum.iter_mut().for_each(|g| *g /= k);
        Ok(Minibatch {
            samples,
            costs,
            mean_gradient: ParamVector::from_raw(sum),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }
}

/// Draw `k` fresh i.i.d. samples and evaluate them at `theta`.
pub fn draw_minibatch<P, R>(
    problem: &P,
    theta: &ParamVector,
    k: usize,
    rng: &mut R,
) -> Result<Minibatch<P::Sample>>
where
    P: StochasticProblem + ?Sized,
    R: Rng + ?Sized,
{
    if k == 0 {
        return Err(Error::InvalidParameter("minibatch size must be >= 1".into()));
    }
    let samples = (0..k).map(|_| problem.sample(rng)).collect();
    Minibatch::evaluate(problem, theta, samples)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Central finite difference of the per-sample cost, one coordinate at
    /// a time.
    pub fn finite_difference<P: StochasticProblem>(
        problem: &P,
        theta: &ParamVector,
        x: &P::Sample,
        step: f64,
    ) -> Vec<f64> {
        (0..theta.dim())
            .map(|i| {
                let mut plus = theta.as_slice().to_vec();
                let mut minus = theta.as_slice().to_vec();
                plus[i] += step;
                minus[i] -= step;
                let cp = problem.cost(&ParamVector::from_raw(plus), x);
                let cm = problem.cost(&ParamVector::from_raw(minus), x);
                (cp - cm) / (2.0 * step)
            })
            .collect()
    }

    /// Max relative error, with an absolute floor of 1 on the scale.
    pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
            .fold(0.0, f64::max)
    }
}
