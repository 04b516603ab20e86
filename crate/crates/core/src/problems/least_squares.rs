//! Diagonal least squares with Gaussian features.
//!
//! Features are `a ~ N(0, Λ)` with `Λ = diag(λ_1..λ_d)` log-spaced between 1
//! and the condition number, targets are `y = a·θ* + σ ε` with `ε ~ N(0, 1)`,
//! and the cost is the squared residual `(a·θ − y)²`. The risk is
//! `(θ − θ*)ᵀ Λ (θ − θ*) + σ²`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ParamVector, ProblemOracle, StochasticProblem};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct LeastSquaresProblem {
    eigenvalues: Vec<f64>,
    feature_scale: Vec<f64>,
    minimizer: Vec<f64>,
    noise_std: f64,
    oracle: ProblemOracle,
}

impl LeastSquaresProblem {
    /// The minimizer `θ*` has standard normal entries drawn from `seed`.
    pub fn new(dim: usize, condition_number: f64, noise_std: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("least squares dim must be >= 1".into()));
        }
        if !(condition_number >= 1.0 && condition_number.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "condition number must be a finite value >= 1, got {condition_number}"
            )));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_std must be finite and >= 0, got {noise_std}"
            )));
        }
        let eigenvalues: Vec<f64> = if dim == 1 {
            vec![1.0]
        } else {
            (0..dim)
                .map(|j| condition_number.powf(j as f64 / (dim - 1) as f64))
                .collect()
        };
        let feature_scale = eigenvalues.iter().map(|l| l.sqrt()).collect();
        let mut rng = seeded(seed);
        let minimizer: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();

        let noise_var = noise_std * noise_std;
        let (lam, star) = (eigenvalues.clone(), minimizer.clone());
        let risk = move |t: &ParamVector| quadratic(&lam, &star, t) + noise_var;
        let (lam, star) = (eigenvalues.clone(), minimizer.clone());
        // The residual is Gaussian, so the cost is a scaled χ²₁ with CV √2
        // wherever its variance is nonzero.
        let cv = move |t: &ParamVector| {
            if quadratic(&lam, &star, t) + noise_var > 0.0 {
                std::f64::consts::SQRT_2
            } else {
                0.0
            }
        };
        let oracle = ProblemOracle::none()
            .with_true_risk(risk)
            .with_true_cv(cv)
            .with_minimizer(ParamVector::from_raw(minimizer.clone()), noise_var);

        Ok(LeastSquaresProblem {
            eigenvalues,
            feature_scale,
            minimizer,
            noise_std,
            oracle,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn residual(&self, theta: &ParamVector, x: &LabeledSample) -> f64 {
        dot(&x.features, theta) - x.target
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quadratic(eigenvalues: &[f64], minimizer: &[f64], theta: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .zip(minimizer)
        .zip(theta)
        .map(|((l, s), t)| l * (t - s) * (t - s))
        .sum()
}

impl StochasticProblem for LeastSquaresProblem {
    type Sample = LabeledSample;

    fn name(&self) -> &'static str {
        "least_squares"
    }

    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let features: Vec<f64> = self
            .feature_scale
            .iter()
            .map(|s| {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            })
            .collect();
        let eps: f64 = StandardNormal.sample(rng);
        let target = dot(&features, &self.minimizer) + self.noise_std * eps;
        LabeledSample { features, target }
    }

    fn cost(&self, theta: &ParamVector, x: &LabeledSample) -> f64 {
        let r = self.residual(theta, x);
        r * r
    }

    fn accumulate_gradient(&self, theta: &ParamVector, x: &LabeledSample, out: &mut [f64]) {
        let r2 = 2.0 * self.residual(theta, x);
        for (o, a) in out.iter_mut().zip(&x.features) {
            *o += r2 * a;
        }
    }

    fn oracle(&self) -> &ProblemOracle {
        &self.oracle
    }

    fn exact_gradient(&self, theta: &ParamVector) -> Option<ParamVector> {
        Some(ParamVector::from_raw(
            self.eigenvalues
                .iter()
                .zip(&self.minimizer)
                .zip(theta.iter())
                .map(|((l, s), t)| 2.0 * l * (t - s))
                .collect(),
        ))
    }
}
