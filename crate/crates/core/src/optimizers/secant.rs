//! Scalar secant iteration on sampled gradients.
//!
//! Given iterates `θ_{i-2}`, `θ_{i-1}` and sampled gradients `g_{i-2}`
//! (drawn at `θ_{i-2}`) and `g_{i-1}` (drawn at `θ_{i-1}`),
//!
//! ```text
//! θ_i = θ_{i-1} − g_{i-1} (θ_{i-1} − θ_{i-2}) / (g_{i-1} − g_{i-2})
//! ```
//!
//! When the iterates coincide or the gradient difference vanishes the step
//! returns `θ_{i-1}` unchanged.

/// State carried between secant steps. The gradient at `theta_prev1` is not
/// stored: it is sampled fresh and passed to [`step_secant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecantState {
    pub theta_prev2: f64,
    pub theta_prev1: f64,
    /// Sampled gradient at `theta_prev2`.
    pub grad_prev2: f64,
}

pub fn secant_update(theta_prev2: f64, theta_prev1: f64, grad_prev2: f64, grad_prev1: f64) -> f64 {
    let dg = grad_prev1 - grad_prev2;
    if theta_prev1 == theta_prev2 || dg == 0.0 {
        return theta_prev1;
    }
    theta_prev1 - grad_prev1 * (theta_prev1 - theta_prev2) / dg
}

/// Advance by one iterate; the returned state holds `(θ_{i-1}, θ_i, g_{i-1})`.
pub fn step_secant(state: SecantState, grad_prev1: f64) -> (f64, SecantState) {
    let next = secant_update(state.theta_prev2, state.theta_prev1, state.grad_prev2, grad_prev1);
    (
        next,
        SecantState {
            theta_prev2: state.theta_prev1,
            theta_prev1: next,
            grad_prev2: grad_prev1,
        },
    )
}
