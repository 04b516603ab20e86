//! Single seeded experiment runs.

use std::collections::VecDeque;

use rand::seq::SliceRandom;

use super::config::{AnyProblem, ExperimentConfig, GradientMode, OptimizerKind, RUN_STREAM};
use super::trace::TraceRecord;
use crate::diagnostics::{estimate_cv, CvHistory, RolloffPolicy};
use crate::error::Result;
use crate::optimizers::{
    has_diverged, momentum_update, sgd_update, HybridStepper, LearningRate, MomentumState, Phase,
    StepSettings,
};
use crate::problems::{draw_minibatch, Minibatch, ParamVector, StochasticProblem};
use crate::rng::{derive_seed, seeded, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Risk after the last completed iteration: the oracle risk when known,
    /// otherwise the latest test-set mean cost.
    pub final_risk: Option<f64>,
    pub best_risk: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub samples_consumed: u64,
    pub iterations: u64,
    pub diverged: bool,
    /// First iteration whose risk gap (risk minus the known minimum, or the
    /// raw risk when the minimum is unknown) fell to `risk_threshold`.
    pub iterations_to_threshold: Option<u64>,
    pub samples_to_threshold: Option<u64>,
    pub final_theta: ParamVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub summary: RunSummary,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    match config.build_problem()? {
        AnyProblem::Rademacher(p) => run_on(&p, config),
        AnyProblem::LeastSquares(p) => run_on(&p, config),
        AnyProblem::Logistic(p) => run_on(&p, config),
    }
}

enum Stepper {
    Sgd,
    Momentum {
        state: MomentumState,
        policy: RolloffPolicy,
    },
    Hybrid(HybridStepper),
}

struct Run<'a, P: StochasticProblem> {
    problem: &'a P,
    cfg: &'a ExperimentConfig,
    schedule: LearningRate,
    stepper: Stepper,
    theta: ParamVector,
    history: CvHistory,
    pool: VecDeque<f64>,
    iteration: u64,
    budget: u64,
    consumed: u64,
    records: Vec<TraceRecord>,
    final_risk: Option<f64>,
    best_risk: Option<f64>,
    final_accuracy: Option<f64>,
    to_threshold: Option<(u64, u64)>,
    diverged: bool,
    done: bool,
}

/// What one iteration sees: a minibatch, or the exact risk gradient.
enum Evaluation<S> {
    Batch(Minibatch<S>),
    Exact { gradient: ParamVector, risk: f64 },
}

fn run_on<P: StochasticProblem>(problem: &P, cfg: &ExperimentConfig) -> Result<RunOutput> {
    let theta = cfg.start_point(problem)?;
    theta.check_dim(problem.dim())?;
    let stepper = match cfg.optimizer {
        OptimizerKind::Sgd => Stepper::Sgd,
        OptimizerKind::Momentum => Stepper::Momentum {
            state: MomentumState::new(problem.dim()),
            policy: cfg.rolloff_policy(),
        },
        OptimizerKind::Secant | OptimizerKind::Hybrid => {
            Stepper::Hybrid(HybridStepper::new(cfg.switch_policy(), cfg.secant_probe_step)?)
        }
    };
    let n = cfg.train_set_size as u64;
    let k = cfg.batch_size as u64;
    let per_epoch = n.div_ceil(k);
    let budget = cfg
        .max_iterations
        .unwrap_or(u64::MAX)
        .min(cfg.epochs.saturating_mul(per_epoch));
    let mut run = Run {
        problem,
        cfg,
        schedule: cfg.learning_rate_schedule(),
        stepper,
        theta,
        history: CvHistory::new(),
        pool: VecDeque::with_capacity(cfg.cv_pool),
        iteration: 0,
        budget,
        consumed: 0,
        records: Vec::new(),
        final_risk: None,
        best_risk: None,
        final_accuracy: None,
        to_threshold: None,
        diverged: false,
        done: false,
    };
    let mut rng = seeded(derive_seed(cfg.seed, &[RUN_STREAM]));

    match (problem.train_set(), cfg.gradient) {
        (Some(train), GradientMode::Sampled) => run.finite_epochs(train, &mut rng)?,
        _ => run.streaming(&mut rng)?,
    }

    let (iterations_to_threshold, samples_to_threshold) = match run.to_threshold {
        Some((i, s)) => (Some(i), Some(s)),
        None => (None, None),
    };
    Ok(RunOutput {
        summary: RunSummary {
            final_risk: run.final_risk,
            best_risk: run.best_risk,
            final_accuracy: run.final_accuracy,
            samples_consumed: run.consumed,
            iterations: run.iteration,
            diverged: run.diverged,
            iterations_to_threshold,
            samples_to_threshold,
            final_theta: run.theta,
        },
        records: run.records,
    })
}

impl<P: StochasticProblem> Run<'_, P> {
    /// Shuffle the training set every epoch and walk it in minibatches of
    /// `k`, including a short final one.
    fn finite_epochs(&mut self, train: &[P::Sample], rng: &mut SimRng) -> Result<()> {
        let k = self.cfg.batch_size;
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 0..self.cfg.epochs {
            order.shuffle(rng);
            let chunks: Vec<&[usize]> = order.chunks(k).collect();
            let last = chunks.len() - 1;
            for (c, chunk) in chunks.into_iter().enumerate() {
                if self.done || self.iteration >= self.budget {
                    return Ok(());
                }
                let samples = chunk.iter().map(|&i| train[i].clone()).collect();
                let batch = Minibatch::evaluate(self.problem, &self.theta, samples)?;
                let closing = c == last || self.iteration + 1 == self.budget;
                self.iterate(epoch, Evaluation::Batch(batch), closing)?;
            }
        }
        Ok(())
    }

    /// Fresh draws every iteration; an epoch is `train_set_size` nominal
    /// samples.
    fn streaming(&mut self, rng: &mut SimRng) -> Result<()> {
        let k = self.cfg.batch_size as u64;
        let n = self.cfg.train_set_size as u64;
        while !self.done && self.iteration < self.budget {
            let epoch = self.iteration * k / n;
            let closing = (self.iteration + 1) * k / n > epoch || self.iteration + 1 == self.budget;
            let eval = match self.cfg.gradient {
                GradientMode::Sampled => Evaluation::Batch(draw_minibatch(
                    self.problem,
                    &self.theta,
                    self.cfg.batch_size,
                    rng,
                )?),
                GradientMode::Exact => {
                    let gradient = self
                        .problem
                        .exact_gradient(&self.theta)
                        .ok_or_else(|| crate::Error::config("problem has no exact gradient"))?;
                    let risk = self.problem.oracle().true_risk(&self.theta).unwrap_or(f64::NAN);
                    Evaluation::Exact { gradient, risk }
                }
            };
            self.iterate(epoch, eval, closing)?;
        }
        Ok(())
    }

    fn raw_cv(&mut self, costs: &[f64]) -> Option<f64> {
        if costs.len() >= 2 {
            return estimate_cv(costs).ok().and_then(|e| {
                self.history.push(e);
                e.cv
            });
        }
        // single-sample batches: pool recent costs along the trajectory
        self.pool.extend(costs.iter().copied());
        while self.pool.len() > self.cfg.cv_pool {
            self.pool.pop_front();
        }
        if self.pool.len() < self.cfg.cv_pool {
            return None;
        }
        let pooled: Vec<f64> = self.pool.iter().copied().collect();
        estimate_cv(&pooled).ok().and_then(|e| {
            self.history.push(e);
            e.cv
        })
    }

    fn iterate(&mut self, epoch: u64, eval: Evaluation<P::Sample>, closing: bool) -> Result<()> {
        self.iteration += 1;
        let i = self.iteration;
        let (gradient, est_risk, cv_raw, used) = match eval {
            Evaluation::Batch(b) => {
                let cv = self.raw_cv(&b.costs);
                (b.mean_gradient.clone(), b.mean_cost(), cv, b.len() as u64)
            }
            Evaluation::Exact { gradient, risk } => (gradient, risk, None, 0),
        };
        let cv_smoothed = self.history.smoothed(self.cfg.cv_window);
        let lr = self.schedule.at(i);
        let (next, alpha, beta) = match &mut self.stepper {
            Stepper::Sgd => (sgd_update(&self.theta, &gradient, lr)?, lr, 0.0),
            Stepper::Momentum { state, policy } => {
                let beta = policy.beta(cv_smoothed);
                let (next, st) =
                    momentum_update(&self.theta, state, &gradient, StepSettings::new(lr, beta)?)?;
                *state = st;
                (next, lr, beta)
            }
            Stepper::Hybrid(h) => {
                let (next, phase) = h.step(&self.theta, &gradient, cv_raw, lr)?;
                let alpha = if phase == Phase::Secant { 0.0 } else { lr };
                (next, alpha, 0.0)
            }
        };
        self.consumed += used;

        if has_diverged(&next) || !est_risk.is_finite() {
            self.diverged = true;
            self.done = true;
            return Ok(());
        }
        self.theta = next;

        let true_risk = self.problem.oracle().true_risk(&self.theta);
        let mut est = est_risk;
        let mut accuracy = None;
        let mut risk = true_risk;
        if closing {
            if let Some(m) = self.problem.evaluate_test(&self.theta) {
                est = m.mean_cost;
                accuracy = Some(m.accuracy);
                self.final_accuracy = Some(m.accuracy);
                risk = risk.or(Some(m.mean_cost));
            }
        }
        if true_risk.is_some_and(|r| !r.is_finite()) || !est.is_finite() {
            self.diverged = true;
            self.done = true;
            return Ok(());
        }
        if let Some(r) = risk {
            self.final_risk = Some(r);
            self.best_risk = Some(self.best_risk.map_or(r, |b| b.min(r)));
            if let (None, Some(t)) = (self.to_threshold, self.cfg.risk_threshold) {
                let gap = r - self.problem.oracle().min_risk().unwrap_or(0.0);
                if gap <= t {
                    self.to_threshold = Some((i, self.consumed));
                    if self.cfg.stop_at_threshold {
                        self.done = true;
                    }
                }
            }
        }
        if i.is_multiple_of(self.cfg.eval_every) || closing || self.done {
            self.records.push(TraceRecord {
                epoch,
                iteration: i,
                true_risk,
                est_risk: est,
                cv_raw,
                cv_smoothed,
                alpha,
                beta,
                accuracy,
                theta_norm: self.theta.norm(),
            });
        }
        Ok(())
    }
}
