//! Self-check suites with machine-readable reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{make_two_moons, ssl_split};
use crate::error::{Error, Result};
use crate::gamma::{barycenter_oracle, weighted_alpha_barycenter, WeightedEnsemble};
use crate::model::{alpha_consistency_grad, psi_value_grad, Arch, GradAccumulator, ModelParams};
use crate::simplex::{alpha_divergence, kl_divergence, ProbVector};
use crate::trainers::{train, LrSchedule, Method, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Barycenter,
    Gradients,
    Monotonicity,
    Limits,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Barycenter, Suite::Gradients, Suite::Monotonicity, Suite::Limits];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Barycenter => "barycenter",
            Suite::Gradients => "gradients",
            Suite::Monotonicity => "monotonicity",
            Suite::Limits => "limits",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`; expected barycenter, gradients, monotonicity or limits")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, cases: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            cases,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        Self {
            suite,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    match suite {
        Suite::Barycenter => barycenter_suite(200, 0),
        Suite::Gradients => gradients_suite(10, 0),
        Suite::Monotonicity => monotonicity_suite(100),
        Suite::Limits => limits_suite(100, 0),
    }
}

/// A random point of the simplex with every entry at least `1e-3 / k`.
pub fn random_prob(k: usize, rng: &mut impl Rng) -> ProbVector {
    let raw: Vec<f64> = (0..k).map(|_| (rng.random::<f64>() * 4.0 - 2.0).exp() + 1e-3 / k as f64).collect();
    let total: f64 = raw.iter().sum();
    ProbVector::normalize(&raw.iter().map(|v| v / total).collect::<Vec<_>>()).expect("valid by construction")
}

fn random_weights(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    w
}

/// Closed-form barycenter against the numerical oracle on random ensembles of
/// `n + 1` members (a clean prediction and `n` perturbed ones).
pub fn barycenter_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphas = [0.5, 1.5, 2.0, 4.0];
    let (mut max_dist, mut max_excess) = (0.0f64, f64::NEG_INFINITY);
    for i in 0..instances {
        let k = rng.random_range(2..=5);
        let n = rng.random_range(1..=4);
        let alpha = alphas[i % alphas.len()];
        let members: Vec<ProbVector> = (0..=n).map(|_| random_prob(k, &mut rng)).collect();
        let ens = WeightedEnsemble::new(members, random_weights(n + 1, &mut rng))?;
        let closed = weighted_alpha_barycenter(&ens, alpha)?;
        let oracle = barycenter_oracle(&ens, alpha, 1e-9)?;
        let dist = closed
            .as_slice()
            .iter()
            .zip(oracle.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        max_dist = max_dist.max(dist);
        max_excess = max_excess.max(ens.objective(&closed, alpha)? - ens.objective(&oracle, alpha)?);
    }
    Ok(SuiteReport::new(
        Suite::Barycenter,
        vec![
            Check::new("linf_closed_form_vs_oracle", instances, max_dist, 1e-4),
            Check::new("objective_excess_over_oracle", instances, max_excess, 1e-8),
        ],
    ))
}

fn random_params(arch: Arch, hidden: usize, classes: usize, rng: &mut impl Rng) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(arch, 2, hidden, classes)?;
    let start = params.trainable_start();
    for v in &mut params.as_flat_mut()[start..] {
        *v = rng.random_range(-1.0..1.0);
    }
    Ok(params)
}

fn random_x(rng: &mut impl Rng) -> Vec<f64> {
    (0..2).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// `‖a − b‖_∞ / max(‖a‖_∞, ‖b‖_∞, 1e-8)` over the trainable entries.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    diff / inf(a).max(inf(b)).max(1e-8)
}

/// Central differences of `f` over the trainable entries with step `h`.
pub fn finite_difference(
    params: &ModelParams,
    h: f64,
    f: impl Fn(&ModelParams) -> Result<f64>,
) -> Result<Vec<f64>> {
    let start = params.trainable_start();
    let mut work = params.clone();
    let mut out = Vec::with_capacity(params.as_flat().len() - start);
    for i in start..params.as_flat().len() {
        let orig = work.as_flat()[i];
        work.as_flat_mut()[i] = orig + h;
        let up = f(&work)?;
        work.as_flat_mut()[i] = orig - h;
        let down = f(&work)?;
        work.as_flat_mut()[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn analytic(params: &ModelParams, g: &GradAccumulator) -> Vec<f64> {
    g.data[params.trainable_start()..].to_vec()
}

/// True when every prediction stays well away from the probability floor, so
/// the divergence is smooth in a neighborhood of `params`.
fn away_from_floor(params: &ModelParams, xs: &[&[f64]]) -> Result<bool> {
    for x in xs {
        if params.forward(x)?.as_slice().iter().any(|p| *p < 1e-6) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Finite-difference check of both consistency gradients, `per_combo` instances
/// for every architecture and α in {0.5, 1, 1.5, 2, 4}.
pub fn gradients_suite(per_combo: usize, seed: u64) -> Result<SuiteReport> {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_single, mut max_psi) = (0.0f64, 0.0f64);
    let (mut n_single, mut n_psi) = (0usize, 0usize);
    for arch in [Arch::Linear, Arch::MlpTanh] {
        for alpha in [0.5, 1.0, 1.5, 2.0, 4.0] {
            let mut done = 0;
            while done < per_combo {
                let k = rng.random_range(2..=4);
                let params = random_params(arch, 6, k, &mut rng)?;
                let gamma = random_prob(k, &mut rng);
                let x = random_x(&mut rng);
                let n = rng.random_range(1..=3);
                let augs: Vec<Vec<f64>> = (0..n).map(|_| random_x(&mut rng)).collect();
                let beta = rng.random_range(0.0..=1.0);
                let mut points: Vec<&[f64]> = vec![&x];
                points.extend(augs.iter().map(Vec::as_slice));
                if !away_from_floor(&params, &points)? {
                    continue;
                }
                done += 1;

                let g = alpha_consistency_grad(&params, &gamma, &x, alpha)?;
                let fd = finite_difference(&params, H, |p| Ok(alpha_consistency_grad(p, &gamma, &x, alpha)?.value))?;
                max_single = max_single.max(relative_error(&analytic(&params, &g), &fd));
                n_single += 1;

                let g = psi_value_grad(&params, &gamma, &x, &augs, alpha, beta)?;
                let fd = finite_difference(&params, H, |p| {
                    Ok(psi_value_grad(p, &gamma, &x, &augs, alpha, beta)?.value)
                })?;
                max_psi = max_psi.max(relative_error(&analytic(&params, &g), &fd));
                n_psi += 1;
            }
        }
    }
    Ok(SuiteReport::new(
        Suite::Gradients,
        vec![
            Check::new("alpha_consistency_grad_rel_err", n_single, max_single, 1e-4),
            Check::new("psi_value_grad_rel_err", n_psi, max_psi, 1e-4),
        ],
    ))
}

/// Configuration of the full-batch descent run: two-moons with 8 labels and
/// 200 unlabeled points, perturbations frozen, constant lr 1e-3, no momentum.
pub fn monotonicity_config(iterations: usize) -> TrainerConfig {
    let mut c = TrainerConfig::new(Method::Alphamatch);
    c.alpha = 1.5;
    c.beta = 0.5;
    c.full_batch = true;
    c.lr0 = 1e-3;
    c.lr_schedule = LrSchedule::Constant;
    c.momentum = 0.0;
    c.epochs = iterations;
    c.seed = 0;
    c
}

/// Largest per-iteration increase of the AlphaMatch objective along a
/// full-batch run, starting from the initial parameters.
pub fn monotonicity_suite(iterations: usize) -> Result<SuiteReport> {
    let split = ssl_split(&make_two_moons(408, 0.1, 0)?, 4, 200, 0)?;
    let metrics = train(&monotonicity_config(iterations), &split)?;
    if let Some(epoch) = metrics.aborted_at {
        return Err(Error::Numeric(format!("monotonicity run aborted at iteration {epoch}")));
    }
    let mut trace = vec![metrics
        .initial_objective
        .ok_or_else(|| Error::Numeric("objective was not tracked".into()))?];
    trace.extend(metrics.epochs.iter().filter_map(|e| e.objective));
    let max_increase = trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let total_decrease = trace[0] - trace[trace.len() - 1];
    let mut checks = vec![Check::new("max_objective_increase", trace.len() - 1, max_increase, 1e-9)];
    checks.push(Check {
        name: "strict_total_decrease".into(),
        cases: 1,
        max_error: -total_decrease,
        tolerance: 0.0,
        passed: total_decrease > 0.0,
    });
    if trace.len() != iterations + 1 {
        checks.push(Check {
            name: "objective_recorded_every_iteration".into(),
            cases: iterations,
            max_error: (iterations + 1 - trace.len()) as f64,
            tolerance: 0.0,
            passed: false,
        });
    }
    Ok(SuiteReport::new(Suite::Monotonicity, checks))
}

/// KL limits of the alpha divergence near α = 1 and α = 0, plus a hand anchor.
pub fn limits_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut near_one, mut near_zero) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let k = rng.random_range(2..=6);
        let p = random_prob(k, &mut rng);
        let q = random_prob(k, &mut rng);
        let kl_pq = kl_divergence(&p, &q)?;
        let kl_qp = kl_divergence(&q, &p)?;
        for a in [1.0 - 1e-3, 1.0 + 1e-3] {
            near_one = near_one.max((alpha_divergence(&p, &q, a)? - kl_pq).abs() / (1.0 + kl_pq));
        }
        near_zero = near_zero.max((alpha_divergence(&p, &q, 1e-3)? - kl_qp).abs() / (1.0 + kl_qp));
    }
    let p = ProbVector::new(vec![0.5, 0.5])?;
    let q = ProbVector::new(vec![0.9, 0.1])?;
    let anchor = (alpha_divergence(&p, &q, 2.0)? - 0.888_889).abs();
    Ok(SuiteReport::new(
        Suite::Limits,
        vec![
            Check::new("alpha_near_one_vs_kl_pq", instances, near_one, 1e-2),
            Check::new("alpha_near_zero_vs_kl_qp", instances, near_zero, 1e-2),
            Check::new("d2_half_half_vs_nine_one", 1, anchor, 1e-6),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn relative_error_is_scale_free() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((relative_error(&[100.0], &[101.0]) - 1.0 / 101.0).abs() < 1e-15);
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
    }

    #[test]
    fn small_suites_pass() {
        assert!(barycenter_suite(8, 1).unwrap().passed);
        assert!(limits_suite(10, 1).unwrap().passed);
        assert!(gradients_suite(1, 1).unwrap().passed);
    }
}
