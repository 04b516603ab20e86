//! Linear-softmax classification on Gaussian class blobs.
//!
//! Class `c` has features `N(μ_c, I)` with labels drawn uniformly. When
//! `dim >= n_classes` the means sit on scaled coordinate axes so every pair
//! is exactly `separation` apart; otherwise they are spaced `separation`
//! apart along the first axis.
//!
//! Parameters are laid out row by row as `[w_c (dim values), b_c]` for each
//! class, so `θ` has `n_classes * (dim + 1)` entries. The cost is the
//! negative natural log of the softmax probability of the correct class.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ParamVector, ProblemOracle, StochasticProblem};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

pub const DEFAULT_TRAIN_SIZE: usize = 1000;
pub const DEFAULT_TEST_PER_CLASS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestMetrics {
    /// Mean cost over the test set.
    pub mean_cost: f64,
    /// Fraction of test samples whose arg-max class is correct.
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    dim: usize,
    n_classes: usize,
    means: Vec<Vec<f64>>,
    train: Vec<ClassSample>,
    test: Vec<ClassSample>,
    oracle: ProblemOracle,
}

impl LogisticProblem {
    /// Default-sized training and test sets.
    pub fn new(dim: usize, n_classes: usize, separation: f64, seed: u64) -> Result<Self> {
        Self::with_sizes(
            dim,
            n_classes,
            separation,
            DEFAULT_TRAIN_SIZE,
            DEFAULT_TEST_PER_CLASS,
            seed,
        )
    }

    pub fn with_sizes(
        dim: usize,
        n_classes: usize,
        separation: f64,
        train_size: usize,
        test_per_class: usize,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("logistic dim must be >= 1".into()));
        }
        if n_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_classes must be >= 2, got {n_classes}"
            )));
        }
        if !(separation >= 0.0 && separation.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "separation must be finite and >= 0, got {separation}"
            )));
        }
        if train_size == 0 || test_per_class == 0 {
            return Err(Error::InvalidParameter(
                "train and test sets must be non-empty".into(),
            ));
        }
        let means = class_means(dim, n_classes, separation);
        let mut p = LogisticProblem {
            dim,
            n_classes,
            means,
            train: Vec::new(),
            test: Vec::new(),
            oracle: ProblemOracle::none(),
        };
        let mut rng = seeded(derive_seed(seed, &[0]));
        p.train = (0..train_size).map(|_| p.sample(&mut rng)).collect();
        let mut rng = seeded(derive_seed(seed, &[1]));
        p.test = (0..n_classes)
            .flat_map(|c| (0..test_per_class).map(move |_| c))
            .map(|c| ClassSample {
                features: p.features_for(c, &mut rng),
                label: c,
            })
            .collect();
        Ok(p)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn class_means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn test_set(&self) -> &[ClassSample] {
        &self.test
    }

    fn features_for<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        self.means[class]
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + z
            })
            .collect()
    }

    fn logits(&self, theta: &[f64], features: &[f64]) -> Vec<f64> {
        theta
            .chunks_exact(self.dim + 1)
            .map(|row| {
                let (w, b) = row.split_at(self.dim);
                w.iter().zip(features).map(|(a, x)| a * x).sum::<f64>() + b[0]
            })
            .collect()
    }
}

fn class_means(dim: usize, n_classes: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..n_classes)
        .map(|c| {
            let mut m = vec![0.0; dim];
            if dim >= n_classes {
                m[c] = separation / std::f64::consts::SQRT_2;
            } else {
                m[0] = separation * (c as f64 - (n_classes - 1) as f64 / 2.0);
            }
            m
        })
        .collect()
}

/// Numerically stable `log Σ exp(z)`.
fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate() {
        if *v > z[best] {
            best = i;
        }
    }
    best
}

impl StochasticProblem for LogisticProblem {
    type Sample = ClassSample;

    fn name(&self) -> &'static str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.n_classes * (self.dim + 1)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ClassSample {
        let label = rng.random_range(0..self.n_classes);
        ClassSample {
            features: self.features_for(label, rng),
            label,
        }
    }

    fn cost(&self, theta: &ParamVector, x: &ClassSample) -> f64 {
        let z = self.logits(theta, &x.features);
        log_sum_exp(&z) - z[x.label]
    }

    fn accumulate_gradient(&self, theta: &ParamVector, x: &ClassSample, out: &mut [f64]) {
        let z = self.logits(theta, &x.features);
        let lse = log_sum_exp(&z);
        for (c, row) in out.chunks_exact_mut(self.dim + 1).enumerate() {
            let mut r = (z[c] - lse).exp();
            if c == x.label {
                r -= 1.0;
            }
            let (w, b) = row.split_at_mut(self.dim);
            for (g, f) in w.iter_mut().zip(&x.features) {
                *g += r * f;
            }
            b[0] += r;
        }
    }

    fn oracle(&self) -> &ProblemOracle {
        &self.oracle
    }

    fn train_set(&self) -> Option<&[ClassSample]> {
        Some(&self.train)
    }

    fn evaluate_test(&self, theta: &ParamVector) -> Option<TestMetrics> {
        let mut cost = 0.0;
        let mut correct = 0usize;
        for x in &self.test {
            let z = self.logits(theta, &x.features);
            cost += log_sum_exp(&z) - z[x.label];
            if argmax(&z) == x.label {
                correct += 1;
            }
        }
        let n = self.test.len() as f64;
        Some(TestMetrics {
            mean_cost: cost / n,
            accuracy: correct as f64 / n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::testutil::{finite_difference, max_rel_err};

    #[test]
    fn rejects_single_class() {
        assert!(LogisticProblem::new(3, 1, 1.0, 0).is_err());
        assert!(LogisticProblem::new(0, 3, 1.0, 0).is_err());
    }

    #[test]
    fn uniform_model_costs_log_n_classes() {
        for n_classes in [2, 3, 7] {
            let p = LogisticProblem::new(4, n_classes, 3.0, 1).unwrap();
            let theta = ParamVector::zeros(p.dim());
            let mut rng = seeded(5);
            for _ in 0..10 {
                let x = p.sample(&mut rng);
                assert!((p.cost(&theta, &x) - (n_classes as f64).ln()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = LogisticProblem::new(3, 4, 2.0, 21).unwrap();
        let mut rng = seeded(22);
        for _ in 0..5 {
            let theta = ParamVector::new(
                (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let x = p.sample(&mut rng);
            let fd = finite_difference(&p, &theta, &x, 1e-5);
            let g = p.gradient(&theta, &x);
            assert!(max_rel_err(&fd, &g) < 1e-6, "{fd:?} vs {g:?}");
        }
    }

    #[test]
    fn means_are_separated() {
        let dist = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let p = LogisticProblem::new(5, 3, 2.5, 0).unwrap();
        let m = p.class_means();
        for i in 0..3 {
            for j in 0..i {
                assert!((dist(&m[i], &m[j]) - 2.5).abs() < 1e-12);
            }
        }
        let p = LogisticProblem::new(1, 3, 2.5, 0).unwrap();
        let m = p.class_means();
        assert!((dist(&m[0], &m[1]) - 2.5).abs() < 1e-12);
        assert!((dist(&m[1], &m[2]) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn test_set_is_balanced_and_fixed() {
        let p = LogisticProblem::with_sizes(2, 3, 1.0, 50, 40, 9).unwrap();
        assert_eq!(p.test_set().len(), 120);
        for c in 0..3 {
            assert_eq!(p.test_set().iter().filter(|s| s.label == c).count(), 40);
        }
        assert_eq!(p.train_set().unwrap().len(), 50);
        let q = LogisticProblem::with_sizes(2, 3, 1.0, 50, 40, 9).unwrap();
        assert_eq!(p.test_set(), q.test_set());
        assert_eq!(p.train_set(), q.train_set());
    }

    #[test]
    fn uniform_model_test_metrics() {
        let p = LogisticProblem::new(2, 4, 3.0, 3).unwrap();
        let m = p.evaluate_test(&ParamVector::zeros(p.dim())).unwrap();
        assert!((m.mean_cost - 4f64.ln()).abs() < 1e-12);
        // ties resolve to class 0, which is a quarter of the balanced set
        assert_eq!(m.accuracy, 0.25);
    }
}
