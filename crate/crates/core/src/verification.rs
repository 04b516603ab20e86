//! Monte Carlo oracles for the analytic claims about the Rademacher problem,
//! the stochastic secant method and minibatch averaging.
//!
//! Each oracle returns [`OracleReport`]s whose pass flag is a pure function
//! of the statistic, the expected value, the tolerance and the kind of
//! comparison. Statistical bands are 3σ or 4σ wide at the sample sizes in
//! [`VerifySettings::default`], so a failure points at a real discrepancy
//! rather than at bad luck.
//!
//! Every oracle draws from its own stream derived from a master seed, so the
//! reports are identical however the oracles are scheduled.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::diagnostics::median;
use crate::error::{Error, Result};
use crate::optimizers::{
    run_hybrid, run_secant, secant_update, step_secant, HybridSettings, LearningRate, SecantState,
    SwitchPolicy,
};
use crate::problems::{
    draw_minibatch, rademacher_cost, rademacher_cv, rademacher_grad, rademacher_sample,
    ParamVector, RademacherProblem,
};
use crate::rng::{derive_seed, seeded};

pub const REPORT_HEADER: [&str; 6] = ["claim_id", "statistic", "expected", "tolerance", "n", "pass"];

/// How a statistic is judged against its expected value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// `|statistic − expected| <= tolerance`.
    Within,
    /// `|statistic − expected| <= tolerance · |expected|`.
    WithinRelative,
    /// `statistic >= expected − tolerance`.
    AtLeast,
    /// `statistic < expected` (tolerance unused).
    StrictlyBelow,
}

impl Comparison {
    pub fn holds(self, statistic: f64, expected: f64, tolerance: f64) -> bool {
        match self {
            Comparison::Within => (statistic - expected).abs() <= tolerance,
            Comparison::WithinRelative => (statistic - expected).abs() <= tolerance * expected.abs(),
            Comparison::AtLeast => statistic >= expected - tolerance,
            Comparison::StrictlyBelow => statistic < expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub claim_id: String,
    pub statistic: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub n: u64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(
        claim_id: impl Into<String>,
        statistic: f64,
        expected: f64,
        tolerance: f64,
        comparison: Comparison,
        n: u64,
    ) -> Self {
        OracleReport {
            claim_id: claim_id.into(),
            statistic,
            expected,
            tolerance,
            comparison,
            n,
            pass: comparison.holds(statistic, expected, tolerance),
        }
    }

    /// One human-readable line.
    pub fn summary_line(&self) -> String {
        let rel = match self.comparison {
            Comparison::Within => format!("expected {} ± {}", self.expected, self.tolerance),
            Comparison::WithinRelative => {
                format!("expected {} ± {}%", self.expected, 100.0 * self.tolerance)
            }
            Comparison::AtLeast => format!("need >= {}", self.expected - self.tolerance),
            Comparison::StrictlyBelow => format!("need < {}", self.expected),
        };
        format!(
            "[{}] {}: {} ({rel}, n={})",
            if self.pass { "PASS" } else { "FAIL" },
            self.claim_id,
            self.statistic,
            self.n
        )
    }
}

/// Sample sizes and inputs for [`run_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub cv_thetas: Vec<f64>,
    pub cv_draws: u64,
    pub secant_trials: u64,
    pub secant_long_trials: u64,
    pub secant_long_steps: u64,
    pub scaling_theta: f64,
    pub scaling_ks: Vec<usize>,
    pub scaling_batches: u64,
    pub hybrid_theta0: f64,
    pub hybrid_seeds: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            cv_thetas: vec![0.0, 0.1, 0.5, 1.0, 2.0, 10.0],
            cv_draws: 1_000_000,
            secant_trials: 10_000,
            secant_long_trials: 1_000,
            secant_long_steps: 100,
            scaling_theta: 2.0,
            scaling_ks: vec![1, 10, 100],
            scaling_batches: 10_000,
            hybrid_theta0: 1e4,
            hybrid_seeds: 100,
        }
    }
}

// Stream tags keep each oracle on its own RNG stream.
const TAG_CV: u64 = 1;
const TAG_DEVIATION: u64 = 2;
const TAG_SECANT: u64 = 3;
const TAG_SECANT_LONG: u64 = 4;
const TAG_SECANT_ZERO: u64 = 5;
const TAG_SCALING: u64 = 6;
const TAG_HYBRID: u64 = 7;
const TAG_BOUND: u64 = 8;

/// Sample moments about the mean: `(mean, m2, m3, m4)`, biased.
fn central_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn cv_label(theta: f64) -> String {
    format!("cv_formula[theta={theta}]")
}

/// Empirical CV of the Rademacher cost against `2|θ|/(θ²+1)`.
///
/// The band is four delta-method standard errors of the ratio `s / x̄`,
/// `Var ≈ (σ⁴/μ⁴ + (μ₄ − σ⁴)/(4σ²μ²) − μ₃/μ³) / n`, built from the
/// empirical moments, with a floor of 1e-12 for the degenerate `θ = 0`.
pub fn verify_cv_formula(thetas: &[f64], n: u64, master_seed: u64) -> Result<Vec<OracleReport>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 draws per theta".into()));
    }
    thetas
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let mut rng = seeded(derive_seed(master_seed, &[TAG_CV, i as u64]));
            let costs: Vec<f64> = (0..n)
                .map(|_| rademacher_cost(theta, rademacher_sample(&mut rng)))
                .collect();
            let (mu, m2, m3, m4) = central_moments(&costs);
            let cv = sample_std(&costs) / mu;
            let var = if m2 > 0.0 {
                (m2 * m2 / mu.powi(4) + (m4 - m2 * m2) / (4.0 * m2 * mu * mu) - m3 / mu.powi(3))
                    / n as f64
            } else {
                0.0
            };
            let band = (4.0 * var.max(0.0).sqrt()).max(1e-12);
            Ok(OracleReport::new(
                cv_label(theta),
                cv,
                rademacher_cv(theta),
                band,
                Comparison::Within,
                n,
            ))
        })
        .collect()
}

/// `true_cv(θ)·|θ|/2 → 1` for large `|θ|`, checked at the given points.
pub fn verify_cv_asymptote(thetas: &[f64]) -> Vec<OracleReport> {
    thetas
        .iter()
        .map(|&t| {
            OracleReport::new(
                format!("cv_asymptote[theta={t}]"),
                rademacher_cv(t) * t.abs() / 2.0,
                1.0,
                1e-3,
                Comparison::Within,
                0,
            )
        })
        .collect()
}

/// The deviation `d = c − e` has mean zero: 4σ band with `σ = 2|θ|`.
pub fn verify_deviation_mean(theta: f64, n: u64, master_seed: u64) -> OracleReport {
    let mut rng = seeded(derive_seed(master_seed, &[TAG_DEVIATION]));
    let e = theta * theta + 1.0;
    let sum: f64 = (0..n)
        .map(|_| rademacher_cost(theta, rademacher_sample(&mut rng)) - e)
        .sum();
    let band = (4.0 * 2.0 * theta.abs() / (n as f64).sqrt()).max(1e-12);
    OracleReport::new(
        format!("deviation_mean[theta={theta}]"),
        sum / n as f64,
        0.0,
        band,
        Comparison::Within,
        n,
    )
}

/// A pair of distinct starting iterates, uniform on `[-10, 10]²`.
fn distinct_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let a = rng.random_range(-10.0..10.0);
        let b = rng.random_range(-10.0..10.0);
        if a != b {
            return (a, b);
        }
    }
}

/// One stochastic secant step from random distinct starts lands on `|θ| = 1`
/// with probability at least 1/2 (whenever both samples agree), and the
/// iteration does not settle below unit magnitude.
///
/// Reports, in order:
/// - the one-step absorption frequency against `0.5 − 3√(0.25/n)`;
/// - the frequency of agreeing sample pairs against `0.5 ± 3√(0.25/n)`;
/// - the median final `|θ|` after `long_steps` steps against 0.5;
/// - the largest `|θ|` after one step with both samples forced to 0, which
///   must be 0 to 1e-12.
pub fn verify_secant_absorption(
    n_trials: u64,
    long_trials: u64,
    long_steps: u64,
    master_seed: u64,
) -> Result<Vec<OracleReport>> {
    if n_trials == 0 || long_trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut rng = seeded(derive_seed(master_seed, &[TAG_SECANT]));
    let (mut absorbed, mut same_sign) = (0u64, 0u64);
    for _ in 0..n_trials {
        let (t2, t1) = distinct_pair(&mut rng);
        let x2 = rademacher_sample(&mut rng);
        let x1 = rademacher_sample(&mut rng);
        let next = secant_update(t2, t1, rademacher_grad(t2, x2), rademacher_grad(t1, x1));
        if (next.abs() - 1.0).abs() <= 1e-9 {
            absorbed += 1;
        }
        if x1 == x2 {
            same_sign += 1;
        }
    }
    let band = 3.0 * (0.25 / n_trials as f64).sqrt();
    let n = n_trials as f64;

    let finals: Vec<f64> = (0..long_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeded(derive_seed(master_seed, &[TAG_SECANT_LONG, trial]));
            let (t2, t1) = distinct_pair(&mut rng);
            let mut state = SecantState {
                theta_prev2: t2,
                theta_prev1: t1,
                grad_prev2: rademacher_grad(t2, rademacher_sample(&mut rng)),
            };
            let mut theta = t1;
            for _ in 0..long_steps {
                let g = rademacher_grad(state.theta_prev1, rademacher_sample(&mut rng));
                let (next, s) = step_secant(state, g);
                theta = next;
                state = s;
            }
            theta.abs()
        })
        .collect();

    let mut zrng = seeded(derive_seed(master_seed, &[TAG_SECANT_ZERO]));
    let worst_zero = (0..100)
        .map(|_| {
            let (t2, t1) = distinct_pair(&mut zrng);
            secant_update(t2, t1, rademacher_grad(t2, 0.0), rademacher_grad(t1, 0.0)).abs()
        })
        .fold(0.0, f64::max);

    Ok(vec![
        OracleReport::new(
            "secant_one_step_absorption",
            absorbed as f64 / n,
            0.5,
            band,
            Comparison::AtLeast,
            n_trials,
        ),
        OracleReport::new(
            "secant_same_sign_frequency",
            same_sign as f64 / n,
            0.5,
            band,
            Comparison::Within,
            n_trials,
        ),
        OracleReport::new(
            "secant_long_run_median_abs",
            median(finals).unwrap_or(f64::NAN),
            0.5,
            0.0,
            Comparison::AtLeast,
            long_trials,
        ),
        OracleReport::new(
            "secant_zero_noise_exact",
            worst_zero,
            0.0,
            1e-12,
            Comparison::Within,
            100,
        ),
    ])
}

/// Std across `m` minibatches of the minibatch mean cost at `θ`, against
/// `σ(θ)/√k = 2|θ|/√k` within 5%. For `k = 1` an extra report checks that
/// the minibatch mean of a single sample is that sample's cost exactly.
pub fn verify_minibatch_scaling(
    theta: f64,
    ks: &[usize],
    m: u64,
    master_seed: u64,
) -> Result<Vec<OracleReport>> {
    if m < 2 {
        return Err(Error::InvalidParameter("need at least 2 minibatches".into()));
    }
    let problem = RademacherProblem::new();
    let at = ParamVector::scalar(theta)?;
    let per_k = ks
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut rng = seeded(derive_seed(master_seed, &[TAG_SCALING, i as u64]));
            let mut means = Vec::with_capacity(m as usize);
            let mut worst_identity = 0.0f64;
            for _ in 0..m {
                let batch = draw_minibatch(&problem, &at, k, &mut rng)?;
                let mean = batch.mean_cost();
                if k == 1 {
                    worst_identity = worst_identity.max((mean - batch.costs[0]).abs());
                }
                means.push(mean);
            }
            let mut out = vec![OracleReport::new(
                format!("minibatch_scaling[k={k}]"),
                sample_std(&means),
                2.0 * theta.abs() / (k as f64).sqrt(),
                0.05,
                Comparison::WithinRelative,
                m,
            )];
            if k == 1 {
                out.push(OracleReport::new(
                    "minibatch_single_sample_identity",
                    worst_identity,
                    0.0,
                    0.0,
                    Comparison::Within,
                    m,
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_k.into_iter().flatten().collect())
}

/// Median samples needed to reach `|θ| <= 1` over `seeds` runs, counting a
/// run that never gets there as infinitely long.
fn median_samples_to_unit(
    policy: SwitchPolicy,
    theta0: f64,
    seeds: u64,
    max_iterations: u64,
    master_seed: u64,
) -> Result<f64> {
    let problem = RademacherProblem::new();
    let start = ParamVector::scalar(theta0)?;
    let settings = HybridSettings {
        policy,
        learning_rate: LearningRate::InverseTime { coefficient: 0.5 },
        max_iterations,
        ..HybridSettings::default()
    };
    let samples = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mut rng = seeded(derive_seed(master_seed, &[TAG_HYBRID, s]));
            let traj = run_hybrid(&problem, &start, &settings, &mut rng)?;
            Ok(traj
                .samples_to_reach(1.0)
                .map_or(f64::INFINITY, |n| n as f64))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(median(samples).unwrap_or(f64::NAN))
}

/// Hybrid (secant while `|θ| > 1`, then SGD with `α_i = 1/(2i)`) against
/// pure SGD with the same rate, as a ratio of median samples-to-reach
/// `|θ| <= 1`; the claim holds if the ratio is below 1.
///
/// A second report checks, over the secant phase of runs from `θ_0 = 10⁶`,
/// that every step with `|θ_{i-1} − θ_{i-2}| > 2` obeys
/// `|θ_i| <= (|θ_{i-1}| + |θ_{i-2}|) / (|θ_{i-1} − θ_{i-2}| − 2)`.
pub fn verify_hybrid_advantage(theta0: f64, seeds: u64, master_seed: u64) -> Result<Vec<OracleReport>> {
    if seeds == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let max_iterations = 1000;
    let hybrid = median_samples_to_unit(SwitchPolicy::ThetaAbove(1.0), theta0, seeds, max_iterations, master_seed)?;
    let sgd = median_samples_to_unit(SwitchPolicy::Immediate, theta0, seeds, max_iterations, master_seed)?;
    let ratio = hybrid / sgd;

    let problem = RademacherProblem::new();
    let (mut checked, mut held) = (0u64, 0u64);
    for s in 0..seeds {
        let mut rng = seeded(derive_seed(master_seed, &[TAG_BOUND, s]));
        let traj = run_secant(&problem, 1e6, HybridSettings::default().probe_step, 1, 10, &mut rng)?;
        let ts: Vec<f64> = traj.iterates.iter().map(|t| t[0]).collect();
        for w in ts.windows(3) {
            let (t2, t1, t) = (w[0], w[1], w[2]);
            let gap = (t1 - t2).abs();
            if gap > 2.0 {
                checked += 1;
                let bound = (t1.abs() + t2.abs()) / (gap - 2.0);
                if t.abs() <= bound * (1.0 + 1e-9) {
                    held += 1;
                }
            }
        }
    }
    let held_frac = if checked == 0 { 0.0 } else { held as f64 / checked as f64 };

    Ok(vec![
        OracleReport::new(
            format!("hybrid_advantage[theta0={theta0}]"),
            ratio,
            1.0,
            0.0,
            Comparison::StrictlyBelow,
            seeds,
        ),
        OracleReport::new(
            "secant_magnitude_bound",
            held_frac,
            1.0,
            0.0,
            Comparison::AtLeast,
            checked,
        ),
    ])
}

/// Every oracle at the given sizes, in a fixed order.
pub fn run_all_with(settings: &VerifySettings, master_seed: u64) -> Result<Vec<OracleReport>> {
    type Job<'a> = Box<dyn Fn() -> Result<Vec<OracleReport>> + Send + Sync + 'a>;
    let s = settings;
    let jobs: Vec<Job> = vec![
        Box::new(|| verify_cv_formula(&s.cv_thetas, s.cv_draws, master_seed)),
        Box::new(|| Ok(verify_cv_asymptote(&[1e2, 1e4, 1e6]))),
        Box::new(|| Ok(vec![verify_deviation_mean(1.0, s.cv_draws, master_seed)])),
        Box::new(|| {
            verify_secant_absorption(s.secant_trials, s.secant_long_trials, s.secant_long_steps, master_seed)
        }),
        Box::new(|| verify_minibatch_scaling(s.scaling_theta, &s.scaling_ks, s.scaling_batches, master_seed)),
        Box::new(|| verify_hybrid_advantage(s.hybrid_theta0, s.hybrid_seeds, master_seed)),
    ];
    let results = jobs.par_iter().map(|job| job()).collect::<Result<Vec<_>>>()?;
    Ok(results.into_iter().flatten().collect())
}

pub fn run_all(master_seed: u64) -> Result<Vec<OracleReport>> {
    run_all_with(&VerifySettings::default(), master_seed)
}

pub fn write_reports_to<W: Write>(reports: &[OracleReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.claim_id.clone(),
            format!("{:.16e}", r.statistic),
            format!("{:.16e}", r.expected),
            format!("{:.16e}", r.tolerance),
            r.n.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reports(reports: &[OracleReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_reports_to(reports, file).map_err(|e| Error::io(path, e.into()))
}
