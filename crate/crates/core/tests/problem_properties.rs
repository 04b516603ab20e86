//! Monte Carlo checks of the problems against their closed forms.

use rolloff::diagnostics::estimate_cv;
use rolloff::problems::{
    draw_minibatch, rademacher_cost, rademacher_sample, LeastSquaresProblem, LogisticProblem,
    RademacherProblem,
};
use rolloff::rng::seeded;
use rolloff::{ParamVector, StochasticProblem};

const N: usize = 1_000_000;

fn costs_at(theta: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rademacher_cost(theta, rademacher_sample(&mut rng))).collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn rademacher_mean_cost_matches_risk() {
    for (i, theta) in [0.1f64, 1.0, 10.0].into_iter().enumerate() {
        let (m, _) = mean_std(&costs_at(theta, N, 100 + i as u64));
        let sigma = 2.0 * theta.abs();
        let band = 4.0 * sigma / (N as f64).sqrt();
        assert!((m - (theta * theta + 1.0)).abs() <= band, "theta {theta}: mean {m}");
    }
}

#[test]
fn rademacher_cost_std_matches_two_theta() {
    for (i, theta) in [0.5f64, 1.0, 10.0].into_iter().enumerate() {
        let (_, s) = mean_std(&costs_at(theta, N, 200 + i as u64));
        let expected = 2.0 * theta.abs();
        assert!((s - expected).abs() <= 0.01 * expected, "theta {theta}: std {s}");
    }
}

#[test]
fn deviation_has_zero_mean() {
    let theta = 3.0;
    let costs = costs_at(theta, N, 300);
    let d = costs.iter().map(|c| c - (theta * theta + 1.0)).sum::<f64>() / N as f64;
    assert!(d.abs() <= 4.0 * 6.0 / (N as f64).sqrt(), "mean deviation {d}");
}

#[test]
fn rademacher_oracle_is_consistent() {
    let p = RademacherProblem::new();
    let o = p.oracle();
    let at = ParamVector::scalar(10.0).unwrap();
    assert_eq!(o.true_risk(&at), Some(101.0));
    assert_eq!(o.true_cv(&at), Some(20.0 / 101.0));
    assert_eq!(o.min_risk(), Some(1.0));
    assert_eq!(o.minimizer().unwrap().as_slice(), &[0.0]);
}

#[test]
fn large_minibatch_gradient_concentrates() {
    // Per-sample gradient 2(θ − x) has mean 2θ and standard deviation 2.
    let p = RademacherProblem::new();
    let theta = ParamVector::scalar(2.0).unwrap();
    let k = 1_000_000;
    let batch = draw_minibatch(&p, &theta, k, &mut seeded(400)).unwrap();
    let band = 4.0 * 2.0 / (k as f64).sqrt();
    assert!((batch.mean_gradient[0] - 4.0).abs() <= band);
    assert!((batch.mean_cost() - 5.0).abs() <= 4.0 * 4.0 / (k as f64).sqrt());
}

#[test]
fn minibatch_cv_estimates_converge_to_closed_form() {
    let p = RademacherProblem::new();
    for (i, theta) in [0.5f64, 2.0, 10.0].into_iter().enumerate() {
        let at = ParamVector::scalar(theta).unwrap();
        let mut rng = seeded(500 + i as u64);
        let m = 10_000;
        let mean_cv = (0..m)
            .map(|_| {
                let b = draw_minibatch(&p, &at, 100, &mut rng).unwrap();
                estimate_cv(&b.costs).unwrap().cv.unwrap()
            })
            .sum::<f64>()
            / m as f64;
        let expected = 2.0 * theta / (theta * theta + 1.0);
        assert!(
            (mean_cv - expected).abs() <= 0.05 * expected,
            "theta {theta}: {mean_cv} vs {expected}"
        );
    }
}

#[test]
fn least_squares_risk_at_minimizer_is_noise_variance() {
    let sigma = 0.3;
    let p = LeastSquaresProblem::new(6, 100.0, sigma, 7).unwrap();
    let star = p.oracle().minimizer().unwrap().clone();
    let mut rng = seeded(600);
    let n = 200_000;
    let mean = (0..n)
        .map(|_| {
            let x = p.sample(&mut rng);
            p.cost(&star, &x)
        })
        .sum::<f64>()
        / n as f64;
    // Cost at the minimizer is σ²ε² with ε standard normal: variance 2σ⁴.
    let band = 4.0 * (2.0f64).sqrt() * sigma * sigma / (n as f64).sqrt();
    assert!((mean - sigma * sigma).abs() <= band, "{mean}");
    assert_eq!(p.oracle().risk_gap(&star), Some(0.0));
}

#[test]
fn least_squares_monte_carlo_risk_matches_closed_form_off_minimizer() {
    let p = LeastSquaresProblem::new(4, 10.0, 0.5, 9).unwrap();
    let theta = ParamVector::new(vec![1.0, -0.5, 0.25, 2.0]).unwrap();
    let mut rng = seeded(700);
    let n = 400_000;
    let costs: Vec<f64> = (0..n)
        .map(|_| {
            let x = p.sample(&mut rng);
            p.cost(&theta, &x)
        })
        .collect();
    let (m, s) = mean_std(&costs);
    let risk = p.oracle().true_risk(&theta).unwrap();
    assert!((m - risk).abs() <= 4.0 * s / (n as f64).sqrt(), "{m} vs {risk}");
    // Residuals are Gaussian, so the cost is a scaled χ²₁ with CV √2.
    assert!((s / m - 2f64.sqrt()).abs() < 0.02);
}

#[test]
fn overlapping_classes_give_chance_accuracy() {
    let classes = 4;
    let per_class = 2_000;
    let p = LogisticProblem::with_sizes(3, classes, 0.0, 100, per_class, 11).unwrap();
    // A model that is not uniform still cannot beat chance when the class
    // distributions coincide.
    let mut theta = vec![0.0; p.dim()];
    theta[0] = 1.0;
    theta[p.dim() - 1] = 0.3;
    let m = p.evaluate_test(&ParamVector::new(theta).unwrap()).unwrap();
    let n = (classes * per_class) as f64;
    let chance = 1.0 / classes as f64;
    let band = 4.0 * (chance * (1.0 - chance) / n).sqrt();
    assert!((m.accuracy - chance).abs() <= band, "accuracy {}", m.accuracy);
}
