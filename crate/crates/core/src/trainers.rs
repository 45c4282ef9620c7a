//! Training procedures: AlphaMatch, iterative alpha-divergence consistency
//! (UDA at α = 1), FixMatch, and the supervised-only baseline.
//!
//! Every SSL method follows the same shape per iteration: compute targets for
//! the unlabeled batch with the current parameters θ_t (stop-gradient), then
//! take `steps_per_gamma` momentum-SGD steps on
//! `L(B_s; θ) + λ · mean_{x ∈ B_u} consistency(θ, target, x)`.
//!
//! Each run draws from four independent ChaCha streams: initialization,
//! labeled batches, unlabeled batches and perturbations. With the consistency
//! term off, a run is bit-identical to the supervised baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{sample_n, sample_perturbation, KernelKind, PerturbationKernel};
use crate::data::{LabeledSet, SslSplit, TestSet, UnlabeledSet};
use crate::error::{Error, Result};
use crate::gamma::{beta_weights, gamma_update, WeightedEnsemble};
use crate::model::{
    alpha_consistency_grad, cosine_lr, psi_value_grad, sgd_step_in_place, supervised_loss_grad, Arch,
    GradAccumulator, ModelParams, MomentumState,
};
use crate::simplex::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Alphamatch,
    IterativeAlpha,
    Fixmatch,
    Supervised,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Alphamatch => "alphamatch",
            Method::IterativeAlpha => "iterative-alpha",
            Method::Fixmatch => "fixmatch",
            Method::Supervised => "supervised",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alphamatch" => Ok(Method::Alphamatch),
            "iterative-alpha" => Ok(Method::IterativeAlpha),
            "fixmatch" => Ok(Method::Fixmatch),
            "supervised" => Ok(Method::Supervised),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected alphamatch, iterative-alpha, fixmatch or supervised)"
            ))),
        }
    }
}

pub mod defaults {
    pub const ALPHA: f64 = 1.5;
    pub const BETA: f64 = 0.5;
    pub const LAMBDA: f64 = 1.0;
    pub const N_AUG: usize = 1;
    pub const TAU: f64 = 0.95;
    pub const LR0: f64 = 0.1;
    pub const MOMENTUM: f64 = 0.9;
    pub const EPOCHS: usize = 500;
    pub const BATCH_S: usize = 8;
    pub const MU_RATIO: usize = 7;
    pub const HIDDEN: usize = 16;
    pub const STEPS_PER_GAMMA: usize = 1;
}

fn d_alpha() -> f64 {
    defaults::ALPHA
}
fn d_beta() -> f64 {
    defaults::BETA
}
fn d_lambda() -> f64 {
    defaults::LAMBDA
}
fn d_n_aug() -> usize {
    defaults::N_AUG
}
fn d_tau() -> f64 {
    defaults::TAU
}
fn d_lr0() -> f64 {
    defaults::LR0
}
fn d_momentum() -> f64 {
    defaults::MOMENTUM
}
fn d_epochs() -> usize {
    defaults::EPOCHS
}
fn d_batch_s() -> usize {
    defaults::BATCH_S
}
fn d_mu_ratio() -> usize {
    defaults::MU_RATIO
}
fn d_hidden() -> usize {
    defaults::HIDDEN
}
fn d_steps_per_gamma() -> usize {
    defaults::STEPS_PER_GAMMA
}
fn d_arch() -> Arch {
    Arch::MlpTanh
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    /// Cosine decay from `lr0` to zero over the whole run.
    #[default]
    Cosine,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// Label used in output file names; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub method: Method,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_n_aug")]
    pub n_aug: usize,
    /// Confidence threshold, used by FixMatch only.
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_lr0")]
    pub lr0: f64,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch_s")]
    pub batch_s: usize,
    /// Unlabeled batch size is `mu_ratio · batch_s`.
    #[serde(default = "d_mu_ratio")]
    pub mu_ratio: usize,
    /// Set per run by the experiment harness.
    #[serde(skip)]
    pub seed: u64,
    #[serde(default)]
    pub kernel: PerturbationKernel,
    /// Perturbation applied to the "clean" view; `None` keeps it unperturbed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_kernel: Option<PerturbationKernel>,
    #[serde(default = "d_arch")]
    pub arch: Arch,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    /// θ-steps taken per target refresh.
    #[serde(default = "d_steps_per_gamma")]
    pub steps_per_gamma: usize,
    /// Iterations per epoch; one pass over the unlabeled set when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_epoch: Option<usize>,
    /// Whole-dataset batches with perturbations drawn once and frozen; one
    /// iteration per epoch, and the AlphaMatch objective recorded each epoch.
    #[serde(default)]
    pub full_batch: bool,
}

impl TrainerConfig {
    pub fn new(method: Method) -> Self {
        Self {
            name: None,
            method,
            alpha: defaults::ALPHA,
            beta: defaults::BETA,
            lambda: defaults::LAMBDA,
            n_aug: defaults::N_AUG,
            tau: defaults::TAU,
            lr0: defaults::LR0,
            lr_schedule: LrSchedule::Cosine,
            momentum: defaults::MOMENTUM,
            epochs: defaults::EPOCHS,
            batch_s: defaults::BATCH_S,
            mu_ratio: defaults::MU_RATIO,
            seed: 0,
            kernel: PerturbationKernel::default(),
            clean_kernel: None,
            arch: Arch::MlpTanh,
            hidden: defaults::HIDDEN,
            steps_per_gamma: defaults::STEPS_PER_GAMMA,
            steps_per_epoch: None,
            full_batch: false,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.method.to_string())
    }

    pub fn batch_u(&self) -> usize {
        self.batch_s * self.mu_ratio
    }

    /// Range violations, each naming the field and its bound.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, value: String, bound: &str| {
            if !ok {
                out.push(format!("{field} = {value} violates {bound}"));
            }
        };
        check(self.alpha.is_finite() && self.alpha > 0.0, "alpha", self.alpha.to_string(), "alpha > 0");
        check((0.0..=1.0).contains(&self.beta), "beta", self.beta.to_string(), "0 ≤ beta ≤ 1");
        check(self.lambda.is_finite() && self.lambda >= 0.0, "lambda", self.lambda.to_string(), "lambda ≥ 0");
        check(self.n_aug >= 1, "n_aug", self.n_aug.to_string(), "n_aug ≥ 1");
        check(self.tau.is_finite() && self.tau >= 0.0, "tau", self.tau.to_string(), "tau ≥ 0");
        check(self.lr0.is_finite() && self.lr0 > 0.0, "lr0", self.lr0.to_string(), "lr0 > 0");
        check((0.0..1.0).contains(&self.momentum), "momentum", self.momentum.to_string(), "0 ≤ momentum < 1");
        check(self.epochs >= 1, "epochs", self.epochs.to_string(), "epochs ≥ 1");
        check(self.batch_s >= 1, "batch_s", self.batch_s.to_string(), "batch_s ≥ 1");
        check(self.mu_ratio >= 1, "mu_ratio", self.mu_ratio.to_string(), "mu_ratio ≥ 1");
        check(self.hidden >= 1, "hidden", self.hidden.to_string(), "hidden ≥ 1");
        check(self.steps_per_gamma >= 1, "steps_per_gamma", self.steps_per_gamma.to_string(), "steps_per_gamma ≥ 1");
        if let Some(s) = self.steps_per_epoch {
            check(s >= 1, "steps_per_epoch", s.to_string(), "steps_per_epoch ≥ 1");
        }
        for (field, kernel) in [("kernel", Some(&self.kernel)), ("clean_kernel", self.clean_kernel.as_ref())] {
            if let Some(Err(e)) = kernel.map(PerturbationKernel::validate) {
                out.push(format!("{field}: {e}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub test_acc: f64,
    pub train_acc: f64,
    pub sup_loss: f64,
    /// Mean batch consistency value (Ψ for AlphaMatch) over the epoch.
    pub consistency: f64,
    pub objective: Option<f64>,
    pub lr: f64,
    /// Mean of the largest target probability over the epoch's unlabeled points.
    pub target_conf: f64,
    /// Fraction of unlabeled points contributing to the consistency term.
    pub mask_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub method: Method,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) during which a non-finite value stopped the run.
    pub aborted_at: Option<usize>,
    pub initial_objective: Option<f64>,
    pub final_params: ModelParams,
}

impl RunMetrics {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.test_acc)
    }

    /// Sample standard deviation of test accuracy over the last `k` epochs.
    pub fn late_test_acc_std(&self, k: usize) -> Option<f64> {
        let tail: Vec<f64> = self.epochs.iter().rev().take(k).map(|r| r.test_acc).collect();
        sample_std(&tail)
    }
}

pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Argmax label (smallest index on ties) and its probability.
pub fn pseudo_label(p: &ProbVector) -> (usize, f64) {
    let y = p.argmax();
    (y, p[y])
}

/// An unlabeled point with its perturbations drawn once.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenPoint {
    pub x: Vec<f64>,
    pub augs: Vec<Vec<f64>>,
}

/// Mean cross-entropy over the whole labeled set.
pub fn supervised_loss(params: &ModelParams, labeled: &LabeledSet) -> Result<f64> {
    Ok(supervised_loss_grad(params, &labeled.pairs())?.value)
}

/// `L(θ; D_s) + λ · mean_x Ψ(θ, γ*(θ, x), x)` with the inner minimum over γ
/// solved in closed form at the current θ.
pub fn objective_value(
    params: &ModelParams,
    labeled: &LabeledSet,
    unlabeled: &[FrozenPoint],
    config: &TrainerConfig,
) -> Result<f64> {
    let sup = supervised_loss(params, labeled)?;
    if config.lambda == 0.0 || unlabeled.is_empty() {
        return Ok(sup);
    }
    let mut total = 0.0;
    for point in unlabeled {
        total += psi_at_optimal_gamma(params, point, config.alpha, config.beta)?;
    }
    Ok(sup + config.lambda * total / unlabeled.len() as f64)
}

fn psi_at_optimal_gamma(params: &ModelParams, point: &FrozenPoint, alpha: f64, beta: f64) -> Result<f64> {
    let p_clean = params.forward(&point.x)?;
    let p_augs = point
        .augs
        .iter()
        .map(|a| params.forward(a))
        .collect::<Result<Vec<_>>>()?;
    let gamma = gamma_update(&p_clean, &p_augs, alpha, beta)?;
    let mut members = vec![p_clean];
    members.extend(p_augs);
    WeightedEnsemble::new(members, beta_weights(point.augs.len(), beta)?)?.objective(&gamma, alpha)
}

pub fn accuracy(params: &ModelParams, set: &LabeledSet) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, y) in set.xs.iter().zip(&set.ys) {
        if params.predict(x)? == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

mod streams {
    pub const INIT: u64 = 0;
    pub const LABELED: u64 = 1;
    pub const UNLABELED: u64 = 2;
    pub const AUGMENT: u64 = 3;
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Endless reshuffled passes over `0..n`.
struct CyclicSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl CyclicSampler {
    fn new(n: usize, rng: ChaCha8Rng) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            rng,
        }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

enum Target {
    Barycenter(ProbVector),
    Soft(ProbVector),
    Hard(Option<usize>),
}

struct Prepared {
    x: Vec<f64>,
    augs: Vec<Vec<f64>>,
    target: Target,
}

struct Consistency<'a> {
    config: &'a TrainerConfig,
    unlabeled: &'a UnlabeledSet,
    kernel: PerturbationKernel,
    clean_kernel: Option<PerturbationKernel>,
    sampler: CyclicSampler,
    aug_rng: ChaCha8Rng,
    frozen: Option<Vec<FrozenPoint>>,
}

impl<'a> Consistency<'a> {
    fn new(config: &'a TrainerConfig, unlabeled: &'a UnlabeledSet) -> Result<Self> {
        let center = centroid(&unlabeled.xs);
        let with_center = |k: &PerturbationKernel| {
            let mut k = k.clone();
            if k.kind == KernelKind::GaussianRotate && k.center.is_none() {
                k.center = center;
            }
            k
        };
        let mut this = Self {
            config,
            unlabeled,
            kernel: with_center(&config.kernel),
            clean_kernel: config.clean_kernel.as_ref().map(with_center),
            sampler: CyclicSampler::new(unlabeled.len(), stream(config.seed, streams::UNLABELED)),
            aug_rng: stream(config.seed, streams::AUGMENT),
            frozen: None,
        };
        if config.full_batch {
            let frozen = (0..unlabeled.len())
                .map(|i| this.draw_views(i))
                .collect::<Result<Vec<_>>>()?;
            this.frozen = Some(frozen);
        }
        Ok(this)
    }

    fn draw_views(&mut self, i: usize) -> Result<FrozenPoint> {
        let source = &self.unlabeled.xs[i];
        let x = match &self.clean_kernel {
            Some(k) => sample_perturbation(k, source, &mut self.aug_rng)?,
            None => source.clone(),
        };
        let augs = sample_n(&self.kernel, source, self.config.n_aug, &mut self.aug_rng)?;
        Ok(FrozenPoint { x, augs })
    }

    fn views(&mut self) -> Result<Vec<FrozenPoint>> {
        if let Some(frozen) = &self.frozen {
            return Ok(frozen.clone());
        }
        let batch = self.sampler.next_batch(self.config.batch_u());
        batch.into_iter().map(|i| self.draw_views(i)).collect()
    }

    /// Targets at the current parameters; γ-step for AlphaMatch.
    fn prepare(&mut self, params: &ModelParams) -> Result<Vec<Prepared>> {
        let c = self.config;
        self.views()?
            .into_iter()
            .map(|FrozenPoint { x, augs }| {
                let p_clean = params.forward(&x)?;
                let target = match c.method {
                    Method::Alphamatch => {
                        let p_augs = augs.iter().map(|a| params.forward(a)).collect::<Result<Vec<_>>>()?;
                        Target::Barycenter(gamma_update(&p_clean, &p_augs, c.alpha, c.beta)?)
                    }
                    Method::IterativeAlpha => Target::Soft(p_clean),
                    Method::Fixmatch => {
                        let (y, conf) = pseudo_label(&p_clean);
                        Target::Hard((conf >= c.tau).then_some(y))
                    }
                    Method::Supervised => unreachable!("supervised runs have no consistency term"),
                };
                Ok(Prepared { x, augs, target })
            })
            .collect()
    }

    /// Batch-mean consistency value and gradient, plus (target confidence, mask rate).
    fn gradient(&self, params: &ModelParams, batch: &[Prepared]) -> Result<(GradAccumulator, f64, f64)> {
        let c = self.config;
        let mut acc = GradAccumulator::zeros_like(params);
        let scale = 1.0 / batch.len() as f64;
        let mut conf = 0.0;
        let mut passed = 0usize;
        for item in batch {
            let per_aug = scale / item.augs.len() as f64;
            match &item.target {
                Target::Barycenter(gamma) => {
                    let g = psi_value_grad(params, gamma, &item.x, &item.augs, c.alpha, c.beta)?;
                    acc.add_scaled(&g, scale);
                    conf += pseudo_label(gamma).1;
                    passed += 1;
                }
                Target::Soft(target) => {
                    for aug in &item.augs {
                        acc.add_scaled(&alpha_consistency_grad(params, target, aug, c.alpha)?, per_aug);
                    }
                    conf += pseudo_label(target).1;
                    passed += 1;
                }
                Target::Hard(Some(y)) => {
                    for aug in &item.augs {
                        acc.add_scaled(&supervised_loss_grad(params, &[(aug.as_slice(), *y)])?, per_aug);
                    }
                    conf += 1.0;
                    passed += 1;
                }
                Target::Hard(None) => {}
            }
        }
        let mean_conf = if passed > 0 { conf / passed as f64 } else { 0.0 };
        Ok((acc, mean_conf, passed as f64 * scale))
    }
}

fn centroid(xs: &[Vec<f64>]) -> Option<[f64; 2]> {
    if xs.is_empty() || xs[0].len() != 2 {
        return None;
    }
    let n = xs.len() as f64;
    Some([
        xs.iter().map(|x| x[0]).sum::<f64>() / n,
        xs.iter().map(|x| x[1]).sum::<f64>() / n,
    ])
}

fn num_classes(labeled: &LabeledSet, test: &TestSet) -> usize {
    labeled.ys.iter().chain(&test.ys).max().map_or(2, |m| m + 1).max(2)
}

fn run_loop(
    config: &TrainerConfig,
    labeled: &LabeledSet,
    test: &TestSet,
    classes: usize,
    steps_per_epoch: usize,
    mut consistency: Option<Consistency<'_>>,
) -> Result<RunMetrics> {
    config.validate()?;
    if labeled.is_empty() {
        return Err(Error::Domain("labeled set is empty".into()));
    }
    let input = labeled.xs[0].len();
    let mut params = ModelParams::init_uniform(
        config.arch,
        input,
        config.hidden,
        classes,
        &mut stream(config.seed, streams::INIT),
    )?;
    let mut momentum = MomentumState::new(&params);
    let mut labeled_sampler = CyclicSampler::new(labeled.len(), stream(config.seed, streams::LABELED));
    let steps_per_epoch = if config.full_batch { 1 } else { steps_per_epoch.max(1) };
    let total_steps = config.epochs * steps_per_epoch * config.steps_per_gamma;
    let batch_s = if config.full_batch { labeled.len() } else { config.batch_s };
    let track_objective = config.full_batch && config.method == Method::Alphamatch;
    let frozen = consistency.as_ref().and_then(|c| c.frozen.clone());

    let objective = |params: &ModelParams| -> Result<Option<f64>> {
        match (&frozen, track_objective) {
            (Some(points), true) => Ok(Some(objective_value(params, labeled, points, config)?)),
            _ => Ok(None),
        }
    };
    let initial_objective = objective(&params)?;

    let mut records = Vec::with_capacity(config.epochs);
    let mut aborted_at = None;
    let mut step = 0usize;
    'epochs: for epoch in 1..=config.epochs {
        let mut cons_sum = 0.0;
        let mut conf_sum = 0.0;
        let mut mask_sum = 0.0;
        let mut lr = config.lr0;
        for _ in 0..steps_per_epoch {
            let prepared = match consistency.as_mut() {
                Some(c) => Some(c.prepare(&params)?),
                None => None,
            };
            for _ in 0..config.steps_per_gamma {
                lr = match config.lr_schedule {
                    LrSchedule::Cosine => cosine_lr(step, total_steps, config.lr0),
                    LrSchedule::Constant => config.lr0,
                };
                step += 1;
                let idx = labeled_sampler.next_batch(batch_s);
                let batch: Vec<(&[f64], usize)> =
                    idx.iter().map(|&i| (labeled.xs[i].as_slice(), labeled.ys[i])).collect();
                let mut grads = supervised_loss_grad(&params, &batch)?;
                if let (Some(c), Some(prep)) = (consistency.as_ref(), prepared.as_ref()) {
                    let (cons, conf, mask) = c.gradient(&params, prep)?;
                    if !cons.is_finite() {
                        aborted_at = Some(epoch);
                        break 'epochs;
                    }
                    cons_sum += cons.value;
                    conf_sum += conf;
                    mask_sum += mask;
                    if config.lambda != 0.0 {
                        grads.add_scaled(&cons, config.lambda);
                    }
                }
                if !grads.is_finite() {
                    aborted_at = Some(epoch);
                    break 'epochs;
                }
                sgd_step_in_place(&mut params, &grads, lr, &mut momentum, config.momentum)?;
                if !params.as_flat().iter().all(|v| v.is_finite()) {
                    aborted_at = Some(epoch);
                    break 'epochs;
                }
            }
        }
        let steps = (steps_per_epoch * config.steps_per_gamma) as f64;
        let record = EpochRecord {
            epoch,
            test_acc: accuracy(&params, test)?,
            train_acc: accuracy(&params, labeled)?,
            sup_loss: supervised_loss(&params, labeled)?,
            consistency: cons_sum / steps,
            objective: objective(&params)?,
            lr,
            target_conf: conf_sum / steps,
            mask_rate: mask_sum / steps,
        };
        let finite = [record.sup_loss, record.consistency].iter().all(|v| v.is_finite())
            && record.objective.is_none_or(f64::is_finite);
        if !finite {
            aborted_at = Some(epoch);
            break;
        }
        records.push(record);
    }
    Ok(RunMetrics {
        method: config.method,
        seed: config.seed,
        epochs: records,
        aborted_at,
        initial_objective,
        final_params: params,
    })
}

fn default_steps(config: &TrainerConfig, unlabeled: &UnlabeledSet) -> usize {
    config
        .steps_per_epoch
        .unwrap_or_else(|| unlabeled.len().div_ceil(config.batch_u()).max(1))
}

fn ssl_run(
    config: &TrainerConfig,
    expected: Method,
    labeled: &LabeledSet,
    unlabeled: &UnlabeledSet,
    test: &TestSet,
) -> Result<RunMetrics> {
    if config.method != expected {
        return Err(Error::Config(format!(
            "config selects {} but {} was invoked",
            config.method, expected
        )));
    }
    if unlabeled.is_empty() {
        return Err(Error::Domain("unlabeled set is empty".into()));
    }
    let classes = num_classes(labeled, test);
    let consistency = Consistency::new(config, unlabeled)?;
    run_loop(config, labeled, test, classes, default_steps(config, unlabeled), Some(consistency))
}

/// AlphaMatch: γ-step by closed-form barycenter, then a θ-step on `L + λΨ`.
pub fn train_alphamatch(
    config: &TrainerConfig,
    labeled: &LabeledSet,
    unlabeled: &UnlabeledSet,
    test: &TestSet,
) -> Result<RunMetrics> {
    ssl_run(config, Method::Alphamatch, labeled, unlabeled, test)
}

/// Direct alpha-divergence consistency `D_α(p_{θ_t}(·|x) ‖ p_θ(·|x'))`; UDA at α = 1.
pub fn train_iterative_alpha(
    config: &TrainerConfig,
    labeled: &LabeledSet,
    unlabeled: &UnlabeledSet,
    test: &TestSet,
) -> Result<RunMetrics> {
    ssl_run(config, Method::IterativeAlpha, labeled, unlabeled, test)
}

/// Confidence-masked hard pseudo-labels; the mean divides by the full batch size.
pub fn train_fixmatch(
    config: &TrainerConfig,
    labeled: &LabeledSet,
    unlabeled: &UnlabeledSet,
    test: &TestSet,
) -> Result<RunMetrics> {
    ssl_run(config, Method::Fixmatch, labeled, unlabeled, test)
}

/// Cross-entropy only. Epoch length is `steps_per_epoch`, or one pass over the
/// labeled set when that is absent.
pub fn train_supervised(config: &TrainerConfig, labeled: &LabeledSet, test: &TestSet) -> Result<RunMetrics> {
    if config.method != Method::Supervised {
        return Err(Error::Config(format!("config selects {} but supervised was invoked", config.method)));
    }
    let steps = config
        .steps_per_epoch
        .unwrap_or_else(|| labeled.len().div_ceil(config.batch_s).max(1));
    run_loop(config, labeled, test, num_classes(labeled, test), steps, None)
}

/// Runs the configured method on a split. Every method, the supervised
/// baseline included, gets one pass over the unlabeled set per epoch unless
/// `steps_per_epoch` says otherwise, so iteration counts match across methods.
pub fn train(config: &TrainerConfig, split: &SslSplit) -> Result<RunMetrics> {
    let mut config = config.clone();
    if config.steps_per_epoch.is_none() && !split.unlabeled.is_empty() {
        config.steps_per_epoch = Some(default_steps(&config, &split.unlabeled));
    }
    match config.method {
        Method::Alphamatch => train_alphamatch(&config, &split.labeled, &split.unlabeled, &split.test),
        Method::IterativeAlpha => train_iterative_alpha(&config, &split.labeled, &split.unlabeled, &split.test),
        Method::Fixmatch => train_fixmatch(&config, &split.labeled, &split.unlabeled, &split.test),
        Method::Supervised => train_supervised(&config, &split.labeled, &split.test),
    }
}
