//! Optimizers checked against independent formulations and textbook rates.

use proptest::prelude::*;
use rand::Rng;
use rolloff::harness::{run_experiment, run_grid, ExperimentConfig, GradientMode, GridSpec, OptimizerKind, ProblemKind};
use rolloff::optimizers::{momentum_update, secant_update, MomentumState, StepSettings};
use rolloff::problems::{rademacher_grad, LeastSquaresProblem};
use rolloff::rng::seeded;
use rolloff::{ParamVector, StochasticProblem};

/// The secant step on the Rademacher cost reduces to
/// `(θ1·x2 − θ2·x1) / (θ1 − x1 − θ2 + x2)`.
fn explicit_rademacher_secant(t2: f64, t1: f64, x2: f64, x1: f64) -> f64 {
    (t1 * x2 - t2 * x1) / (t1 - x1 - t2 + x2)
}

#[test]
fn secant_matches_explicit_rademacher_form() {
    let mut rng = seeded(1);
    let mut checked = 0;
    while checked < 10_000 {
        let t2: f64 = rng.random_range(-10.0..10.0);
        let t1: f64 = rng.random_range(-10.0..10.0);
        let x2 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let x1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let denom = t1 - x1 - t2 + x2;
        if t1 == t2 || denom.abs() < 0.5 {
            continue;
        }
        checked += 1;
        let a = secant_update(t2, t1, rademacher_grad(t2, x2), rademacher_grad(t1, x1));
        let b = explicit_rademacher_secant(t2, t1, x2, x1);
        assert!(
            (a - b).abs() <= 1e-12 * b.abs().max(1.0),
            "({t2}, {t1}, {x2}, {x1}): {a} vs {b}"
        );
    }
}

proptest! {
    #[test]
    fn equal_samples_land_on_the_sample(t2 in -1e3f64..1e3, t1 in -1e3f64..1e3, positive in any::<bool>()) {
        prop_assume!(t1 != t2);
        let x = if positive { 1.0 } else { -1.0 };
        let next = secant_update(t2, t1, rademacher_grad(t2, x), rademacher_grad(t1, x));
        prop_assert!((next - x).abs() <= 1e-9 * (1.0 + t1.abs() + t2.abs()));
    }

    #[test]
    fn momentum_velocity_is_discounted_gradient_sum(
        grads in prop::collection::vec(-10.0f64..10.0, 1..30),
        beta in 0.0f64..0.99,
        lr in 1e-3f64..1.0,
    ) {
        let settings = StepSettings::new(lr, beta).unwrap();
        let mut state = MomentumState::new(1);
        let mut theta = ParamVector::scalar(0.0).unwrap();
        for g in &grads {
            let (t, st) = momentum_update(&theta, &state, &ParamVector::scalar(*g).unwrap(), settings).unwrap();
            theta = t;
            state = st;
        }
        // v_n = Σ_j β^{n−j} g_j
        let n = grads.len();
        let v: f64 = grads.iter().enumerate().map(|(j, g)| beta.powi((n - 1 - j) as i32) * g).sum();
        prop_assert!((state.v[0] - v).abs() <= 1e-9 * (1.0 + v.abs()));
    }
}

fn ls_config(kappa: f64) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemKind::LeastSquares,
        dim: 10,
        condition_number: kappa,
        noise_std: 0.0,
        optimizer: OptimizerKind::Momentum,
        gradient: GradientMode::Exact,
        poor_start_scale: Some(5.0),
        epochs: 200,
        max_iterations: Some(200_000),
        eval_every: 10_000,
        risk_threshold: Some(1e-6),
        stop_at_threshold: true,
        seed: 3,
        ..ExperimentConfig::default()
    }
}

/// Best median iterations-to-threshold over the grid.
fn tuned(cfg: &ExperimentConfig, momenta: Vec<f64>, learning_rates: Vec<f64>) -> f64 {
    let spec = GridSpec {
        momenta,
        learning_rates,
        batch_sizes: Vec::new(),
        seeds: vec![cfg.seed],
    };
    run_grid(cfg, &spec, None)
        .unwrap()
        .cells
        .iter()
        .filter_map(|c| c.median_iterations_to_threshold)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn momentum_advantage_grows_with_condition_number() {
    // Hessian eigenvalues span [2, 2κ]; step sizes are fractions of 2/L.
    let mut ratios = Vec::new();
    for kappa in [10.0, 100.0, 1000.0] {
        let cfg = ls_config(kappa);
        let limit = 1.0 / kappa;
        let lrs: Vec<f64> = [0.95, 0.7, 0.5, 0.3].iter().map(|f| f * limit).collect();
        let gd = tuned(&cfg, vec![0.0], lrs.clone());
        let hb = tuned(&cfg, vec![0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99], lrs.iter().map(|l| 2.0 * l).collect());
        assert!(gd.is_finite() && hb.is_finite(), "kappa {kappa}: {gd} {hb}");
        ratios.push(gd / hb);
    }
    assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2], "{ratios:?}");
}

#[test]
fn exact_gradient_descent_matches_hand_iteration() {
    let cfg = ExperimentConfig {
        optimizer: OptimizerKind::Sgd,
        learning_rate: 4e-4,
        ..ls_config(1000.0)
    };
    let problem = LeastSquaresProblem::new(cfg.dim, cfg.condition_number, 0.0, cfg.seed).unwrap();
    let start = cfg.start_point(&problem).unwrap();
    let star = problem.oracle().minimizer().unwrap().clone();
    let lambda = problem.eigenvalues().to_vec();
    let gap = |t: &[f64]| -> f64 {
        t.iter().zip(star.iter()).zip(&lambda).map(|((t, s), l)| l * (t - s).powi(2)).sum()
    };
    let mut theta = start.into_vec();
    let mut iterations = 0u64;
    while gap(&theta) > 1e-6 {
        for j in 0..theta.len() {
            theta[j] -= cfg.learning_rate * 2.0 * lambda[j] * (theta[j] - star[j]);
        }
        iterations += 1;
    }
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.summary.iterations_to_threshold, Some(iterations));
    assert_eq!(out.summary.samples_consumed, 0);
}

#[test]
fn robbins_monro_converges_on_rademacher() {
    let base = ExperimentConfig {
        problem: ProblemKind::Rademacher,
        optimizer: OptimizerKind::Sgd,
        lr_schedule: rolloff::harness::LrScheduleKind::InverseTime,
        learning_rate: 0.5,
        theta0: Some(vec![5.0]),
        train_set_size: 10_000,
        eval_every: 10_000,
        ..ExperimentConfig::default()
    };
    let mut finals: Vec<f64> = (0..100)
        .map(|s| {
            let out = run_experiment(&ExperimentConfig { seed: s, ..base.clone() }).unwrap();
            assert_eq!(out.summary.samples_consumed, 10_000);
            out.summary.final_theta[0].abs()
        })
        .collect();
    finals.sort_by(f64::total_cmp);
    let median = 0.5 * (finals[49] + finals[50]);
    // With α_i = 1/(2i), θ_n is the running mean of the samples: |θ| ~ 1/√n.
    assert!(median < 0.2, "median |theta| {median}");
}

#[test]
fn momentum_beats_plain_descent_at_equal_rate() {
    let cfg = ls_config(1000.0);
    let spec = GridSpec {
        momenta: vec![0.0, 0.9],
        learning_rates: vec![5e-4],
        batch_sizes: Vec::new(),
        seeds: vec![cfg.seed],
    };
    let cells = run_grid(&cfg, &spec, None).unwrap().cells;
    let gd = cells[0].median_iterations_to_threshold.unwrap();
    let hb = cells[1].median_iterations_to_threshold.unwrap();
    assert_eq!(cells[0].cell.momentum, 0.0);
    assert!(hb < gd, "{hb} vs {gd}");
}
