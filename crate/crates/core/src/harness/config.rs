//! Experiment configuration files.
//!
//! A config is a flat TOML table; every key has a default, so a file only
//! lists what differs. Unknown keys are rejected.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `problem` | `"rademacher"` | `rademacher`, `least_squares` or `logistic` |
//! | `dim` | 1 | feature / parameter dimension (least squares, logistic) |
//! | `condition_number` | 1.0 | least squares spectrum spread |
//! | `noise_std` | 0.0 | least squares label noise |
//! | `n_classes` | 2 | logistic classes |
//! | `separation` | 2.0 | distance between logistic class means |
//! | `test_per_class` | 500 | logistic held-out samples per class |
//! | `problem_seed` | `seed` | seed for problem construction |
//! | `theta0` | — | explicit start vector |
//! | `poor_start_scale` | — | start at distance `scale` from the minimizer (or 0) in a seeded random direction |
//! | `optimizer` | `"sgd"` | `sgd`, `momentum`, `secant` or `hybrid` |
//! | `batch_size` | 1 | minibatch size `k` |
//! | `gradient` | `"sampled"` | `sampled`, or `exact` to use the risk gradient |
//! | `lr_schedule` | `"constant"` | `constant` or `inverse_time` (`α_i = learning_rate / i`) |
//! | `learning_rate` | 0.1 | constant rate or inverse-time coefficient |
//! | `momentum_policy` | `"constant"` | `constant`, `cv_threshold` or `cv_linear` |
//! | `momentum` | 0.0 | `β_max` of the roll-off policy |
//! | `cv_low`, `cv_high` | 0.1, 1.0 | roll-off breakpoints |
//! | `cv_window` | 10 | median smoothing window |
//! | `cv_pool` | 100 | pooled single-sample costs per CV estimate when `k = 1` |
//! | `switch` | `"theta"` | hybrid switch: `theta`, `cv`, `never`, `immediate` |
//! | `switch_threshold` | 1.0 | hybrid switch threshold |
//! | `secant_probe_step` | 0.25 | step used to create the second secant iterate |
//! | `epochs` | 1 | passes over `train_set_size` samples |
//! | `train_set_size` | 1000 | training set size; nominal epoch length for sampling problems |
//! | `max_iterations` | — | optional cap on iterations |
//! | `eval_every` | 1 | record every n-th iteration (epoch ends always recorded) |
//! | `risk_threshold` | — | risk gap threshold for the summary |
//! | `stop_at_threshold` | false | stop once the threshold is reached |
//! | `seed` | 0 | master seed of the run |

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::RolloffPolicy;
use crate::error::{Error, Result};
use crate::optimizers::{LearningRate, SwitchPolicy};
use crate::problems::{LeastSquaresProblem, LogisticProblem, ParamVector, RademacherProblem, StochasticProblem};
use crate::rng::{derive_seed, seeded};

/// Stream index for the start-point draw; the run itself uses stream 1.
pub(crate) const START_STREAM: u64 = 0;
pub(crate) const RUN_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Rademacher,
    LeastSquares,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Secant,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Sampled,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrScheduleKind {
    Constant,
    InverseTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Constant,
    CvThreshold,
    CvLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    Theta,
    Cv,
    Never,
    Immediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub dim: usize,
    pub condition_number: f64,
    pub noise_std: f64,
    pub n_classes: usize,
    pub separation: f64,
    pub test_per_class: usize,
    pub problem_seed: Option<u64>,
    pub theta0: Option<Vec<f64>>,
    pub poor_start_scale: Option<f64>,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub gradient: GradientMode,
    pub lr_schedule: LrScheduleKind,
    pub learning_rate: f64,
    pub momentum_policy: PolicyKind,
    pub momentum: f64,
    pub cv_low: f64,
    pub cv_high: f64,
    pub cv_window: usize,
    pub cv_pool: usize,
    pub switch: SwitchKind,
    pub switch_threshold: f64,
    pub secant_probe_step: f64,
    pub epochs: u64,
    pub train_set_size: usize,
    pub max_iterations: Option<u64>,
    pub eval_every: u64,
    pub risk_threshold: Option<f64>,
    pub stop_at_threshold: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::Rademacher,
            dim: 1,
            condition_number: 1.0,
            noise_std: 0.0,
            n_classes: 2,
            separation: 2.0,
            test_per_class: crate::problems::DEFAULT_TEST_PER_CLASS,
            problem_seed: None,
            theta0: None,
            poor_start_scale: None,
            optimizer: OptimizerKind::Sgd,
            batch_size: 1,
            gradient: GradientMode::Sampled,
            lr_schedule: LrScheduleKind::Constant,
            learning_rate: 0.1,
            momentum_policy: PolicyKind::Constant,
            momentum: 0.0,
            cv_low: 0.1,
            cv_high: 1.0,
            cv_window: 10,
            cv_pool: 100,
            switch: SwitchKind::Theta,
            switch_threshold: 1.0,
            secant_probe_step: 0.25,
            epochs: 1,
            train_set_size: crate::problems::DEFAULT_TRAIN_SIZE,
            max_iterations: None,
            eval_every: 1,
            risk_threshold: None,
            stop_at_threshold: false,
            seed: 0,
        }
    }
}

/// A constructed problem of any supported kind.
#[derive(Debug, Clone)]
pub enum AnyProblem {
    Rademacher(RademacherProblem),
    LeastSquares(LeastSquaresProblem),
    Logistic(LogisticProblem),
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Dimension of `θ` implied by the problem settings.
    pub fn param_dim(&self) -> usize {
        match self.problem {
            ProblemKind::Rademacher => 1,
            ProblemKind::LeastSquares => self.dim,
            ProblemKind::Logistic => self.n_classes * (self.dim + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.train_set_size == 0 {
            return fail("train_set_size must be >= 1".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be >= 1".into());
        }
        if self.cv_window == 0 {
            return fail("cv_window must be >= 1".into());
        }
        if self.cv_pool < 2 {
            return fail("cv_pool must be >= 2".into());
        }
        if self.max_iterations == Some(0) {
            return fail("max_iterations must be >= 1".into());
        }
        match self.problem {
            ProblemKind::Rademacher => {}
            ProblemKind::LeastSquares => {
                if self.dim == 0 {
                    return fail("dim must be >= 1".into());
                }
                if !(self.condition_number >= 1.0 && self.condition_number.is_finite()) {
                    return fail(format!(
                        "condition_number must be finite and >= 1, got {}",
                        self.condition_number
                    ));
                }
                if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
                    return fail(format!("noise_std must be >= 0, got {}", self.noise_std));
                }
            }
            ProblemKind::Logistic => {
                if self.dim == 0 {
                    return fail("dim must be >= 1".into());
                }
                if self.n_classes < 2 {
                    return fail(format!("n_classes must be >= 2, got {}", self.n_classes));
                }
                if !(self.separation >= 0.0 && self.separation.is_finite()) {
                    return fail(format!("separation must be >= 0, got {}", self.separation));
                }
                if self.test_per_class == 0 {
                    return fail("test_per_class must be >= 1".into());
                }
                if self.gradient == GradientMode::Exact {
                    return fail("the logistic problem has no exact risk gradient".into());
                }
            }
        }
        self.learning_rate_schedule()
            .validate()
            .or_else(|e| fail(e.to_string()))?;
        self.rolloff_policy().validate().or_else(|e| fail(e.to_string()))?;
        if self.optimizer == OptimizerKind::Sgd
            && (self.momentum != 0.0 || self.momentum_policy != PolicyKind::Constant)
        {
            return fail("optimizer `sgd` takes no momentum; use `momentum`".into());
        }
        if matches!(self.optimizer, OptimizerKind::Secant | OptimizerKind::Hybrid) {
            if self.param_dim() != 1 {
                return fail(format!(
                    "optimizer `{:?}` needs a one-dimensional problem, this one has dimension {}",
                    self.optimizer,
                    self.param_dim()
                ));
            }
            if !(self.secant_probe_step > 0.0 && self.secant_probe_step.is_finite()) {
                return fail("secant_probe_step must be > 0".into());
            }
        }
        if self.optimizer == OptimizerKind::Hybrid {
            if !self.switch_threshold.is_finite() {
                return fail("switch_threshold must be finite".into());
            }
            if self.switch == SwitchKind::Cv && self.batch_size < 2 && self.gradient == GradientMode::Sampled {
                return fail("switch = \"cv\" needs batch_size >= 2".into());
            }
            if self.switch == SwitchKind::Cv && self.gradient == GradientMode::Exact {
                return fail("switch = \"cv\" needs sampled gradients".into());
            }
        }
        match (&self.theta0, self.poor_start_scale) {
            (Some(_), Some(_)) => {
                return fail("give either theta0 or poor_start_scale, not both".into())
            }
            (Some(t), None) => {
                if t.len() != self.param_dim() {
                    return fail(format!(
                        "theta0 has {} entries, problem needs {}",
                        t.len(),
                        self.param_dim()
                    ));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return fail("theta0 entries must be finite".into());
                }
            }
            (None, Some(s)) if !(s >= 0.0 && s.is_finite()) => {
                return fail(format!("poor_start_scale must be >= 0, got {s}"))
            }
            _ => {}
        }
        if let Some(t) = self.risk_threshold {
            if !t.is_finite() {
                return fail("risk_threshold must be finite".into());
            }
        }
        Ok(())
    }

    pub fn learning_rate_schedule(&self) -> LearningRate {
        match self.lr_schedule {
            LrScheduleKind::Constant => LearningRate::Constant(self.learning_rate),
            LrScheduleKind::InverseTime => LearningRate::InverseTime {
                coefficient: self.learning_rate,
            },
        }
    }

    pub fn rolloff_policy(&self) -> RolloffPolicy {
        match self.momentum_policy {
            PolicyKind::Constant => RolloffPolicy::Constant {
                beta_max: self.momentum,
            },
            PolicyKind::CvThreshold => RolloffPolicy::CvThreshold {
                beta_max: self.momentum,
                cv_high: self.cv_high,
            },
            PolicyKind::CvLinear => RolloffPolicy::CvLinear {
                beta_max: self.momentum,
                cv_low: self.cv_low,
                cv_high: self.cv_high,
            },
        }
    }

    pub fn switch_policy(&self) -> SwitchPolicy {
        match self.optimizer {
            OptimizerKind::Secant => SwitchPolicy::Never,
            OptimizerKind::Sgd | OptimizerKind::Momentum => SwitchPolicy::Immediate,
            OptimizerKind::Hybrid => match self.switch {
                SwitchKind::Theta => SwitchPolicy::ThetaAbove(self.switch_threshold),
                SwitchKind::Cv => SwitchPolicy::CvBelow(self.switch_threshold),
                SwitchKind::Never => SwitchPolicy::Never,
                SwitchKind::Immediate => SwitchPolicy::Immediate,
            },
        }
    }

    pub fn problem_seed(&self) -> u64 {
        self.problem_seed.unwrap_or(self.seed)
    }

    pub fn build_problem(&self) -> Result<AnyProblem> {
        let seed = self.problem_seed();
        Ok(match self.problem {
            ProblemKind::Rademacher => AnyProblem::Rademacher(RademacherProblem::new()),
            ProblemKind::LeastSquares => AnyProblem::LeastSquares(LeastSquaresProblem::new(
                self.dim,
                self.condition_number,
                self.noise_std,
                seed,
            )?),
            ProblemKind::Logistic => AnyProblem::Logistic(LogisticProblem::with_sizes(
                self.dim,
                self.n_classes,
                self.separation,
                self.train_set_size,
                self.test_per_class,
                seed,
            )?),
        })
    }

    /// The start point: `theta0`, or `poor_start_scale` away from the
    /// minimizer (the origin when none is known), or the origin.
    pub fn start_point<P: StochasticProblem + ?Sized>(&self, problem: &P) -> Result<ParamVector> {
        if let Some(t) = &self.theta0 {
            return ParamVector::new(t.clone());
        }
        let dim = problem.dim();
        let base = problem
            .oracle()
            .minimizer()
            .map(|m| m.to_vec())
            .unwrap_or_else(|| vec![0.0; dim]);
        let Some(scale) = self.poor_start_scale else {
            return ParamVector::new(vec![0.0; dim]);
        };
        let mut rng = seeded(derive_seed(self.seed, &[START_STREAM]));
        let dir: Vec<f64> = loop {
            let d: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                break d.into_iter().map(|v| v / n).collect();
            }
        };
        ParamVector::new(base.iter().zip(&dir).map(|(b, d)| b + scale * d).collect())
    }
}
