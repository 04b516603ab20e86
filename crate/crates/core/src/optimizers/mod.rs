//! Robbins–Monro SGD, heavy-ball momentum and the scalar secant method.
//!
//! The momentum recurrence is
//!
//! ```text
//! v_i = β_i v_{i-1} + (1/k) Σ_j ∂c/∂θ (θ_{i-1}, x_{i,j})
//! θ_i = θ_{i-1} − α_i v_i
//! ```
//!
//! with `v_0 = 0`, so the first step is a plain gradient step and `β = 0`
//! reproduces SGD bit for bit.

mod hybrid;
mod secant;

use crate::error::{Error, Result};
use crate::problems::{Minibatch, ParamVector};

pub use hybrid::{run_hybrid, run_secant, HybridSettings, HybridStepper, HybridTrajectory, Phase, SwitchPolicy};
pub use secant::{secant_update, step_secant, SecantState};

/// Runs abort once any coordinate exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

pub fn has_diverged(theta: &ParamVector) -> bool {
    !theta.is_finite() || theta.max_abs() > DIVERGENCE_LIMIT
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    learning_rate: f64,
    momentum: f64,
}

impl StepSettings {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        check_learning_rate(learning_rate)?;
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(StepSettings {
            learning_rate,
            momentum,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }
}

fn check_learning_rate(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "learning rate must be finite and > 0, got {lr}"
        )))
    }
}

/// Step-size schedule indexed by the 1-based iteration number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `α_i = coefficient / i`.
    InverseTime { coefficient: f64 },
}

impl LearningRate {
    pub fn at(&self, iteration: u64) -> f64 {
        match *self {
            LearningRate::Constant(a) => a,
            LearningRate::InverseTime { coefficient } => coefficient / iteration.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningRate::Constant(a) => check_learning_rate(a),
            LearningRate::InverseTime { coefficient } => check_learning_rate(coefficient),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub v: ParamVector,
    pub iteration: u64,
}

impl MomentumState {
    pub fn new(dim: usize) -> Self {
        MomentumState {
            v: ParamVector::zeros(dim),
            iteration: 0,
        }
    }
}

/// One momentum step from an already-averaged gradient.
pub fn momentum_update(
    theta: &ParamVector,
    state: &MomentumState,
    gradient: &ParamVector,
    settings: StepSettings,
) -> Result<(ParamVector, MomentumState)> {
    state.v.check_dim(theta.dim())?;
    gradient.check_dim(theta.dim())?;
    let beta = settings.momentum;
    let alpha = settings.learning_rate;
    let v: Vec<f64> = if beta == 0.0 {
        gradient.to_vec()
    } else {
        state
            .v
            .iter()
            .zip(gradient.iter())
            .map(|(v, g)| beta * v + g)
            .collect()
    };
    let next: Vec<f64> = theta.iter().zip(&v).map(|(t, v)| t - alpha * v).collect();
    Ok((
        ParamVector::from_raw(next),
        MomentumState {
            v: ParamVector::from_raw(v),
            iteration: state.iteration + 1,
        },
    ))
}

pub fn step_momentum<S>(
    theta: &ParamVector,
    state: &MomentumState,
    batch: &Minibatch<S>,
    settings: StepSettings,
) -> Result<(ParamVector, MomentumState)> {
    momentum_update(theta, state, &batch.mean_gradient, settings)
}

/// `θ − α g`.
pub fn sgd_update(theta: &ParamVector, gradient: &ParamVector, learning_rate: f64) -> Result<ParamVector> {
    check_learning_rate(learning_rate)?;
    gradient.check_dim(theta.dim())?;
    Ok(ParamVector::from_raw(
        theta
            .iter()
            .zip(gradient.iter())
            .map(|(t, g)| t - learning_rate * g)
            .collect(),
    ))
}

pub fn step_sgd<S>(theta: &ParamVector, batch: &Minibatch<S>, learning_rate: f64) -> Result<ParamVector> {
    sgd_update(theta, &batch.mean_gradient, learning_rate)
}
