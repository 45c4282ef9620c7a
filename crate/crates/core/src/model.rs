//! Small softmax classifiers with hand-derived gradients.
//!
//! Parameters live in one flat buffer laid out as `[W1 (H×D), b1 (H), W2 (K×H), b2 (K)]`,
//! row-major. The linear architecture keeps `W1 = I`, `b1 = 0` frozen and feeds
//! the input straight into the output layer.
//!
//! All consistency gradients treat the target distribution γ as a constant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gamma::beta_weights;
use crate::simplex::{alpha_divergence, rho_alpha, ProbVector, ALPHA_SWITCH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Linear,
    MlpTanh,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Linear => "linear",
            Arch::MlpTanh => "mlp-tanh",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    fn len(&self) -> usize {
        self.hidden * self.input + self.hidden + self.classes * self.hidden + self.classes
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        [w1, b1, w2, b2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Arch,
    dims: Dims,
    data: Vec<f64>,
}

/// Gradient buffer with the same layout as [`ModelParams`], plus the loss value.
#[derive(Debug, Clone, PartialEq)]
pub struct GradAccumulator {
    pub data: Vec<f64>,
    pub value: f64,
}

/// Velocity buffer for classical momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    velocity: Vec<f64>,
}

impl ModelParams {
    /// All-zero output layer. For `Linear`, `hidden` is ignored and set to `input`.
    pub fn zeros(arch: Arch, input: usize, hidden: usize, classes: usize) -> Result<Self> {
        if input == 0 || classes < 2 {
            return domain(format!("need input ≥ 1 and classes ≥ 2, got {input}, {classes}"));
        }
        let hidden = match arch {
            Arch::Linear => input,
            Arch::MlpTanh if hidden == 0 => return domain("hidden width must be ≥ 1"),
            Arch::MlpTanh => hidden,
        };
        let dims = Dims {
            input,
            hidden,
            classes,
        };
        let mut params = Self {
            arch,
            dims,
            data: vec![0.0; dims.len()],
        };
        if arch == Arch::Linear {
            for i in 0..input {
                params.w1_mut()[i * input + i] = 1.0;
            }
        }
        Ok(params)
    }

    /// Trainable entries drawn from `U(−0.1, 0.1)`.
    pub fn init_uniform(
        arch: Arch,
        input: usize,
        hidden: usize,
        classes: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut params = Self::zeros(arch, input, hidden, classes)?;
        let start = params.trainable_start();
        for v in &mut params.data[start..] {
            *v = rng.random_range(-0.1..0.1);
        }
        Ok(params)
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.dims.classes
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Index of the first parameter that training may change.
    pub fn trainable_start(&self) -> usize {
        match self.arch {
            Arch::Linear => self.dims.offsets()[2],
            Arch::MlpTanh => 0,
        }
    }

    pub fn w1(&self) -> &[f64] {
        let o = self.dims.offsets();
        &self.data[o[0]..o[1]]
    }
    pub fn b1(&self) -> &[f64] {
        let o = self.dims.offsets();
        &self.data[o[1]..o[2]]
    }
    pub fn w2(&self) -> &[f64] {
        let o = self.dims.offsets();
        &self.data[o[2]..o[3]]
    }
    pub fn b2(&self) -> &[f64] {
        let o = self.dims.offsets();
        &self.data[o[3]..]
    }
    pub fn w1_mut(&mut self) -> &mut [f64] {
        let o = self.dims.offsets();
        &mut self.data[o[0]..o[1]]
    }
    pub fn b1_mut(&mut self) -> &mut [f64] {
        let o = self.dims.offsets();
        &mut self.data[o[1]..o[2]]
    }
    pub fn w2_mut(&mut self) -> &mut [f64] {
        let o = self.dims.offsets();
        &mut self.data[o[2]..o[3]]
    }
    pub fn b2_mut(&mut self) -> &mut [f64] {
        let o = self.dims.offsets();
        &mut self.data[o[3]..]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims.input {
            return domain(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.dims.input
            ));
        }
        Ok(())
    }

    /// Hidden activations and output logits.
    fn activations(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        let Dims { input, hidden, classes } = self.dims;
        let h: Vec<f64> = match self.arch {
            Arch::Linear => x.to_vec(),
            Arch::MlpTanh => {
                let (w1, b1) = (self.w1(), self.b1());
                (0..hidden)
                    .map(|j| {
                        let row = &w1[j * input..(j + 1) * input];
                        (b1[j] + dot(row, x)).tanh()
                    })
                    .collect()
            }
        };
        let (w2, b2) = (self.w2(), self.b2());
        let logits = (0..classes)
            .map(|c| b2[c] + dot(&w2[c * hidden..(c + 1) * hidden], &h))
            .collect();
        Ok((h, logits))
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.1)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ProbVector> {
        ProbVector::softmax(&self.logits(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.forward(x)?.argmax())
    }

    /// Adds `scale · ∂/∂θ` of a loss whose logit gradient is `dlogits` into `acc`.
    fn backprop(&self, x: &[f64], h: &[f64], dlogits: &[f64], scale: f64, acc: &mut [f64]) {
        let Dims { input, hidden, classes } = self.dims;
        let o = self.dims.offsets();
        for c in 0..classes {
            let g = scale * dlogits[c];
            acc[o[3] + c] += g;
            for j in 0..hidden {
                acc[o[2] + c * hidden + j] += g * h[j];
            }
        }
        if self.arch == Arch::Linear {
            return;
        }
        let w2 = self.w2();
        for j in 0..hidden {
            let dh: f64 = (0..classes).map(|c| scale * dlogits[c] * w2[c * hidden + j]).sum();
            let da = dh * (1.0 - h[j] * h[j]);
            acc[o[1] + j] += da;
            for i in 0..input {
                acc[o[0] + j * input + i] += da * x[i];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GradAccumulator {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            data: vec![0.0; params.data.len()],
            value: 0.0,
        }
    }

    /// `self += scale · other`, value included.
    pub fn add_scaled(&mut self, other: &GradAccumulator, scale: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        self.value += scale * other.value;
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl MomentumState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            velocity: vec![0.0; params.data.len()],
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
}

/// Mean cross-entropy `−log p_θ(y|x)` over the batch and its gradient.
pub fn supervised_loss_grad(params: &ModelParams, batch: &[(&[f64], usize)]) -> Result<GradAccumulator> {
    if batch.is_empty() {
        return domain("empty labeled batch");
    }
    let k = params.num_classes();
    let scale = 1.0 / batch.len() as f64;
    let mut acc = GradAccumulator::zeros_like(params);
    for &(x, y) in batch {
        if y >= k {
            return domain(format!("label {y} out of range for {k} classes"));
        }
        let (h, logits) = params.activations(x)?;
        let p = ProbVector::softmax(&logits)?;
        acc.value -= scale * p[y].ln();
        let mut d = p.into_vec();
        d[y] -= 1.0;
        params.backprop(x, &h, &d, scale, &mut acc.data);
    }
    Ok(acc)
}

/// Divergence value and its gradient with respect to the logits of `p`, for
/// `D_α(γ ‖ p)` with `p = softmax(logits)`.
///
/// Writing `c_y = γ_y ρ_y` with `ρ = (γ/p)^{α−1}`, the logit gradient is
/// `−(c − p Σc)/α`; at α = 1 this is `p Σγ − γ`.
fn alpha_logit_grad(gamma: &ProbVector, p: &ProbVector, alpha: f64) -> Result<(f64, Vec<f64>)> {
    let value = alpha_divergence(gamma, p, alpha)?;
    let (g, q) = (gamma.as_slice(), p.as_slice());
    let grad = if alpha <= ALPHA_SWITCH && (alpha - 1.0).abs() > ALPHA_SWITCH {
        // KL(p ‖ γ) limit
        let log_ratio: Vec<f64> = q
            .iter()
            .zip(g)
            .map(|(qi, gi)| qi.ln() - crate::simplex::floored_ln(*gi))
            .collect();
        q.iter().zip(&log_ratio).map(|(qi, lr)| qi * (lr - value)).collect()
    } else {
        let (c, a) = if (alpha - 1.0).abs() <= ALPHA_SWITCH {
            (g.to_vec(), 1.0)
        } else {
            let rho = rho_alpha(gamma, p, alpha)?;
            (g.iter().zip(&rho).map(|(gi, r)| gi * r).collect::<Vec<_>>(), alpha)
        };
        let total: f64 = c.iter().sum();
        c.iter().zip(q).map(|(ci, qi)| (qi * total - ci) / a).collect()
    };
    Ok((value, grad))
}

/// `D_α(γ ‖ p_θ(·|x'))` and its gradient in θ, with γ held constant.
pub fn alpha_consistency_grad(
    params: &ModelParams,
    gamma: &ProbVector,
    x_prime: &[f64],
    alpha: f64,
) -> Result<GradAccumulator> {
    let mut acc = GradAccumulator::zeros_like(params);
    accumulate_alpha(params, gamma, x_prime, alpha, 1.0, &mut acc)?;
    Ok(acc)
}

fn accumulate_alpha(
    params: &ModelParams,
    gamma: &ProbVector,
    x: &[f64],
    alpha: f64,
    scale: f64,
    acc: &mut GradAccumulator,
) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return domain(format!("alpha must be positive and finite, got {alpha}"));
    }
    if gamma.len() != params.num_classes() {
        return domain("target distribution has the wrong number of classes");
    }
    let (h, logits) = params.activations(x)?;
    let p = ProbVector::softmax(&logits)?;
    let (value, d) = alpha_logit_grad(gamma, &p, alpha)?;
    acc.value += scale * value;
    params.backprop(x, &h, &d, scale, &mut acc.data);
    Ok(())
}

/// `Ψ = (1−β) D_α(γ‖p_θ(·|x)) + (β/n) Σ_i D_α(γ‖p_θ(·|x_i'))` and its θ-gradient.
pub fn psi_value_grad(
    params: &ModelParams,
    gamma: &ProbVector,
    x: &[f64],
    x_augs: &[Vec<f64>],
    alpha: f64,
    beta: f64,
) -> Result<GradAccumulator> {
    let weights = beta_weights(x_augs.len(), beta)?;
    let mut acc = GradAccumulator::zeros_like(params);
    let points = std::iter::once(x).chain(x_augs.iter().map(Vec::as_slice));
    for (point, w) in points.zip(weights) {
        if w > 0.0 {
            accumulate_alpha(params, gamma, point, alpha, w, &mut acc)?;
        }
    }
    Ok(acc)
}

/// In-place momentum update: `v ← μv + g`, `θ ← θ − lr·v`. Frozen entries of the
/// linear architecture are left untouched.
pub fn sgd_step_in_place(
    params: &mut ModelParams,
    grads: &GradAccumulator,
    lr: f64,
    state: &mut MomentumState,
    momentum: f64,
) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return domain(format!("learning rate must be nonnegative, got {lr}"));
    }
    if !(0.0..1.0).contains(&momentum) {
        return domain(format!("momentum must lie in [0, 1), got {momentum}"));
    }
    if grads.data.len() != params.data.len() || state.velocity.len() != params.data.len() {
        return domain("gradient or momentum buffer does not match the parameters");
    }
    let start = params.trainable_start();
    for ((p, v), g) in params.data[start..]
        .iter_mut()
        .zip(&mut state.velocity[start..])
        .zip(&grads.data[start..])
    {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

pub fn sgd_step(
    params: &ModelParams,
    grads: &GradAccumulator,
    lr: f64,
    state: &MomentumState,
    momentum: f64,
) -> Result<(ModelParams, MomentumState)> {
    let mut params = params.clone();
    let mut state = state.clone();
    sgd_step_in_place(&mut params, grads, lr, &mut state, momentum)?;
    Ok((params, state))
}

/// Half-cosine decay from `lr0` at step 0 to zero at step `total`.
pub fn cosine_lr(step: usize, total: usize, lr0: f64) -> f64 {
    if total == 0 {
        return lr0;
    }
    let t = step.min(total) as f64 / total as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}
