//! Secant steps while the parameter is poor, Robbins–Monro SGD afterwards.
//!
//! The secant phase needs two starting iterates. The second one comes from
//! a probe step `θ_1 = θ_0 − h g_0`, whose sampled gradient `g_0` is reused
//! as the older gradient of the first secant step, so each iterate costs one
//! minibatch. Once the switch policy stops holding the run moves to SGD for
//! good; the SGD step size keeps the global iteration index.

use rand::Rng;

use super::{has_diverged, sgd_update, step_secant, LearningRate, SecantState};
use crate::diagnostics::estimate_cv;
use crate::error::{Error, Result};
use crate::problems::{draw_minibatch, ParamVector, StochasticProblem};

/// When to keep taking secant steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchPolicy {
    /// Pure secant.
    Never,
    /// Pure SGD.
    Immediate,
    /// Secant while `|θ|` exceeds the threshold.
    ThetaAbove(f64),
    /// Secant while the minibatch CV estimate is below the threshold.
    /// Needs minibatches of at least two samples; a missing estimate ends
    /// the secant phase.
    CvBelow(f64),
}

impl SwitchPolicy {
    fn keep_secant(&self, theta: &ParamVector, cv: Option<f64>) -> bool {
        match *self {
            SwitchPolicy::Never => true,
            SwitchPolicy::Immediate => false,
            SwitchPolicy::ThetaAbove(t) => theta.max_abs() > t,
            SwitchPolicy::CvBelow(t) => cv.is_some_and(|c| c < t),
        }
    }

    pub fn uses_secant(&self) -> bool {
        !matches!(self, SwitchPolicy::Immediate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Secant,
    Sgd,
}

/// Stateful stepper shared by [`run_hybrid`] and the experiment harness.
#[derive(Debug, Clone)]
pub struct HybridStepper {
    policy: SwitchPolicy,
    probe_step: f64,
    phase: Phase,
    secant: Option<SecantState>,
}

impl HybridStepper {
    pub fn new(policy: SwitchPolicy, probe_step: f64) -> Result<Self> {
        if !(probe_step > 0.0 && probe_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "secant probe step must be finite and > 0, got {probe_step}"
            )));
        }
        let phase = if policy.uses_secant() {
            Phase::Secant
        } else {
            Phase::Sgd
        };
        Ok(HybridStepper {
            policy,
            probe_step,
            phase,
            secant: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Produce the next iterate from the minibatch gradient (and CV) drawn at
    /// `theta`. Returns the phase that produced it.
    pub fn step(
        &mut self,
        theta: &ParamVector,
        gradient: &ParamVector,
        cv: Option<f64>,
        learning_rate: f64,
    ) -> Result<(ParamVector, Phase)> {
        if self.phase == Phase::Secant && self.policy.keep_secant(theta, cv) {
            let (t, g) = match (theta.as_scalar(), gradient.as_scalar()) {
                (Some(t), Some(g)) => (t, g),
                _ => {
                    return Err(Error::config(
                        "the secant method needs a one-dimensional problem",
                    ))
                }
            };
            let next = match self.secant {
                None => {
                    let next = t - self.probe_step * g;
                    self.secant = Some(SecantState {
                        theta_prev2: t,
                        theta_prev1: next,
                        grad_prev2: g,
                    });
                    next
                }
                Some(state) => {
                    let (next, state) = step_secant(state, g);
                    self.secant = Some(state);
                    next
                }
            };
            return Ok((ParamVector::from_raw(vec![next]), Phase::Secant));
        }
        self.phase = Phase::Sgd;
        Ok((sgd_update(theta, gradient, learning_rate)?, Phase::Sgd))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridSettings {
    pub policy: SwitchPolicy,
    pub learning_rate: LearningRate,
    pub batch_size: usize,
    pub probe_step: f64,
    pub max_iterations: u64,
}

impl Default for HybridSettings {
    fn default() -> Self {
        HybridSettings {
            policy: SwitchPolicy::ThetaAbove(1.0),
            learning_rate: LearningRate::InverseTime { coefficient: 0.5 },
            batch_size: 1,
            probe_step: 0.25,
            max_iterations: 100,
        }
    }
}

/// Every iterate of a run, starting with `θ_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub iterates: Vec<ParamVector>,
    /// `phases[i]` produced `iterates[i + 1]`.
    pub phases: Vec<Phase>,
    /// Samples consumed before each iterate was available.
    pub samples: Vec<u64>,
    pub diverged: bool,
}

impl HybridTrajectory {
    fn start(theta0: &ParamVector) -> Self {
        HybridTrajectory {
            iterates: vec![theta0.clone()],
            phases: Vec::new(),
            samples: vec![0],
            diverged: false,
        }
    }

    fn push(&mut self, theta: ParamVector, phase: Phase, samples: u64) -> bool {
        let bad = has_diverged(&theta);
        self.iterates.push(theta);
        self.phases.push(phase);
        self.samples.push(samples);
        self.diverged = bad;
        bad
    }

    /// Samples consumed until the first iterate with every `|θ_j| <= radius`.
    pub fn samples_to_reach(&self, radius: f64) -> Option<u64> {
        self.iterates
            .iter()
            .position(|t| t.max_abs() <= radius)
            .map(|i| self.samples[i])
    }

    /// Index of the first SGD iteration (1-based), if the run switched.
    pub fn switch_iteration(&self) -> Option<usize> {
        self.phases.iter().position(|p| *p == Phase::Sgd).map(|i| i + 1)
    }

    /// Number of secant-phase iterations, counting the probe step.
    pub fn secant_iterations(&self) -> usize {
        self.phases.iter().take_while(|p| **p == Phase::Secant).count()
    }
}

fn check_batch(settings: &HybridSettings) -> Result<()> {
    if settings.batch_size == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    if matches!(settings.policy, SwitchPolicy::CvBelow(_)) && settings.batch_size < 2 {
        return Err(Error::config(
            "a CV-based switch needs minibatches of at least 2 samples",
        ));
    }
    settings.learning_rate.validate()
}

pub fn run_hybrid<P, R>(
    problem: &P,
    theta0: &ParamVector,
    settings: &HybridSettings,
    rng: &mut R,
) -> Result<HybridTrajectory>
where
    P: StochasticProblem + ?Sized,
    R: Rng + ?Sized,
{
    check_batch(settings)?;
    theta0.check_dim(problem.dim())?;
    if settings.policy.uses_secant() && problem.dim() != 1 {
        return Err(Error::config(
            "the secant phase needs a one-dimensional problem",
        ));
    }
    let mut stepper = HybridStepper::new(settings.policy, settings.probe_step)?;
    let mut traj = HybridTrajectory::start(theta0);
    let mut theta = theta0.clone();
    let mut consumed = 0u64;
    for i in 1..=settings.max_iterations {
        let batch = draw_minibatch(problem, &theta, settings.batch_size, rng)?;
        consumed += batch.len() as u64;
        let cv = estimate_cv(&batch.costs).ok().and_then(|e| e.cv);
        let (next, phase) =
            stepper.step(&theta, &batch.mean_gradient, cv, settings.learning_rate.at(i))?;
        if traj.push(next.clone(), phase, consumed) {
            break;
        }
        theta = next;
    }
    Ok(traj)
}

/// Pure secant iteration, written directly against [`step_secant`].
pub fn run_secant<P, R>(
    problem: &P,
    theta0: f64,
    probe_step: f64,
    batch_size: usize,
    max_iterations: u64,
    rng: &mut R,
) -> Result<HybridTrajectory>
where
    P: StochasticProblem + ?Sized,
    R: Rng + ?Sized,
{
    if problem.dim() != 1 {
        return Err(Error::config("the secant method needs a one-dimensional problem"));
    }
    if batch_size == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    let start = ParamVector::scalar(theta0)?;
    let mut traj = HybridTrajectory::start(&start);
    let mut consumed = 0u64;
    let mut state: Option<SecantState> = None;
    let mut theta = theta0;
    for _ in 0..max_iterations {
        let at = ParamVector::from_raw(vec![theta]);
        let batch = draw_minibatch(problem, &at, batch_size, rng)?;
        consumed += batch.len() as u64;
        let g = batch.mean_gradient[0];
        let next = match state {
            None => {
                let next = theta - probe_step * g;
                state = Some(SecantState {
                    theta_prev2: theta,
                    theta_prev1: next,
                    grad_prev2: g,
                });
                next
            }
            Some(s) => {
                let (next, s) = step_secant(s, g);
                state = Some(s);
                next
            }
        };
        if traj.push(ParamVector::from_raw(vec![next]), Phase::Secant, consumed) {
            break;
        }
        theta = next;
    }
    Ok(traj)
}
