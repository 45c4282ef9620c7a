//! Probability vectors on the simplex and the KL / alpha-divergence family.
//!
//! Every vector produced by [`ProbVector::normalize`] or [`ProbVector::softmax`]
//! carries entries of at least [`EPS_FLOOR`], so logarithms and negative powers
//! stay finite. Exact hard-label distributions ([`ProbVector::one_hot`]) may hold
//! zeros; the divergences treat `0 · log 0` and `0^α` (α > 0) as zero.

use crate::error::{domain, Error, Result};

/// Smallest probability handed to a log or a power.
pub const EPS_FLOOR: f64 = 1e-8;

/// Half-width of the band around α ∈ {0, 1} that dispatches to the KL limits.
pub const ALPHA_SWITCH: f64 = 1e-4;

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Wraps an already-normalized vector without flooring it.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return domain("probability vector must have at least one entry");
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return domain(format!("entries must lie in [0, 1]: {probs:?}"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return domain(format!("entries sum to {sum}, expected 1"));
        }
        Ok(Self(probs))
    }

    /// Divides by the total and clamps every entry to at least [`EPS_FLOOR`].
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        if raw.len() < 2 {
            return domain(format!("need at least 2 classes, got {}", raw.len()));
        }
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return domain(format!("weights must be finite and nonnegative: {raw:?}"));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return domain("weights are all zero");
        }
        Ok(Self(apply_floor(raw.iter().map(|v| v / total).collect())))
    }

    pub fn softmax(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return domain("softmax of an empty vector");
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numeric(format!("non-finite logits: {logits:?}")));
        }
        Ok(Self(apply_floor(softmax_raw(logits))))
    }

    /// Exact hard-label distribution; the only constructor that yields zeros.
    pub fn one_hot(label: usize, k: usize) -> Result<Self> {
        if label >= k {
            return domain(format!("label {label} out of range for {k} classes"));
        }
        let mut v = vec![0.0; k];
        v[label] = 1.0;
        Ok(Self(v))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, ties going to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Unclamped, max-shifted softmax.
pub(crate) fn softmax_raw(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Raises entries below the floor to exactly `EPS_FLOOR` and rescales the rest
/// so the total stays 1. Leaves vectors with no small entries bit-identical.
fn apply_floor(mut p: Vec<f64>) -> Vec<f64> {
    let mut floored = vec![false; p.len()];
    loop {
        let mut newly = false;
        for (v, f) in p.iter_mut().zip(floored.iter_mut()) {
            if !*f && *v < EPS_FLOOR {
                *f = true;
                newly = true;
            }
        }
        if !newly {
            return p;
        }
        let n_floored = floored.iter().filter(|f| **f).count();
        let free: f64 = p
            .iter()
            .zip(&floored)
            .filter(|(_, f)| !**f)
            .map(|(v, _)| v)
            .sum();
        let scale = (1.0 - n_floored as f64 * EPS_FLOOR) / free;
        for (v, f) in p.iter_mut().zip(&floored) {
            *v = if *f { EPS_FLOOR } else { *v * scale };
        }
    }
}

pub(crate) fn logsumexp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[inline]
pub(crate) fn floored_ln(p: f64) -> f64 {
    p.max(EPS_FLOOR).ln()
}

fn check_dims(p: &ProbVector, q: &ProbVector) -> Result<()> {
    if p.len() != q.len() {
        return domain(format!("dimension mismatch: {} vs {}", p.len(), q.len()));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return domain(format!("alpha must be positive and finite, got {alpha}"));
    }
    Ok(())
}

/// `Σ p ln(p/q)`; zero entries of `p` contribute nothing.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    check_dims(p, q)?;
    Ok(p.0
        .iter()
        .zip(&q.0)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi.ln() - floored_ln(*qi)))
        .sum())
}

/// `1/(α(α−1)) · (Σ p^α q^{1−α} − 1)`, with the KL limits inside the switch band:
/// α → 1 gives KL(p‖q), α → 0 gives KL(q‖p).
pub fn alpha_divergence(p: &ProbVector, q: &ProbVector, alpha: f64) -> Result<f64> {
    check_dims(p, q)?;
    check_alpha(alpha)?;
    if (alpha - 1.0).abs() <= ALPHA_SWITCH {
        return kl_divergence(p, q);
    }
    if alpha <= ALPHA_SWITCH {
        return kl_divergence(q, p);
    }
    let log_moment = logsumexp(
        p.0.iter()
            .zip(&q.0)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, qi)| alpha * pi.ln() + (1.0 - alpha) * floored_ln(*qi)),
    );
    Ok(log_moment.exp_m1() / (alpha * (alpha - 1.0)))
}

/// Per-class importance ratio `(p_t / p_θ)^{α−1}`.
pub fn rho_alpha(p_t: &ProbVector, p_theta: &ProbVector, alpha: f64) -> Result<Vec<f64>> {
    check_dims(p_t, p_theta)?;
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(vec![1.0; p_t.len()]);
    }
    Ok(p_t
        .0
        .iter()
        .zip(&p_theta.0)
        .map(|(a, b)| {
            if *a == 0.0 {
                // limit of (0/b)^{α−1}
                if alpha > 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                ((alpha - 1.0) * (a.ln() - floored_ln(*b))).exp()
            }
        })
        .collect())
}

/// Confidence-masked hard-label indicator.
pub fn rho_fixmatch(p_t: &ProbVector, tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; p_t.len()];
    let label = p_t.argmax();
    if p_t[label] >= tau {
        out[label] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(ProbVector::normalize(&[2.0, 2.0]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(ProbVector::normalize(&[0.32, 0.32]).unwrap().as_slice(), &[0.5, 0.5]);
        let p = ProbVector::normalize(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p[1], EPS_FLOOR);
        assert_eq!(p[2], EPS_FLOOR);
        assert!((p[0] - (1.0 - 2.0 * EPS_FLOOR)).abs() < 1e-16);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(ProbVector::normalize(&[0.0, 0.0]).is_err());
        assert!(ProbVector::normalize(&[1.0, -0.5]).is_err());
        assert!(ProbVector::normalize(&[1.0]).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(ProbVector::softmax(&[0.0, 0.0]).unwrap().as_slice(), &[0.5, 0.5]);
        let p = ProbVector::softmax(&[9f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15 && (p[1] - 0.1).abs() < 1e-15);
        assert_eq!(ProbVector::softmax(&[5.0; 4]).unwrap().as_slice(), &[0.25; 4]);
        assert!(matches!(ProbVector::softmax(&[f64::NAN, 0.0]), Err(Error::Numeric(_))));
        assert!(ProbVector::softmax(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn softmax_floors_extreme_logits() {
        let p = ProbVector::softmax(&[0.0, -100.0, -200.0]).unwrap();
        assert!(p.as_slice().iter().all(|v| *v >= EPS_FLOOR));
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&pv(&[0.3, 0.7]), &pv(&[0.3, 0.7])).unwrap(), 0.0);
        let d = kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.9, 0.1])).unwrap();
        assert!((d - 0.510826).abs() < 1e-6, "{d}");
        let p = ProbVector::normalize(&[1.0, 0.0]).unwrap();
        let d = kl_divergence(&p, &pv(&[0.5, 0.5])).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-6);
        assert!(kl_divergence(&pv(&[0.5, 0.5]), &ProbVector::uniform(3)).is_err());
    }

    #[test]
    fn alpha_examples() {
        let p = pv(&[0.5, 0.5]);
        let q = pv(&[0.9, 0.1]);
        for a in [0.3, 1.0, 2.0, 7.0] {
            assert!(alpha_divergence(&p, &p, a).unwrap().abs() < 1e-15);
        }
        let d2 = alpha_divergence(&p, &q, 2.0).unwrap();
        assert!((d2 - 0.888889).abs() < 1e-6, "{d2}");
        let d1 = alpha_divergence(&p, &q, 1.0 + 1e-5).unwrap();
        assert_eq!(d1, kl_divergence(&p, &q).unwrap());
        assert!(alpha_divergence(&p, &q, 0.0).is_err());
        assert!(alpha_divergence(&p, &q, -1.0).is_err());
    }

    #[test]
    fn alpha_large_does_not_overflow() {
        let p = ProbVector::normalize(&[1.0, 1e-12, 0.3]).unwrap();
        let q = ProbVector::normalize(&[1e-12, 1.0, 0.3]).unwrap();
        let d = alpha_divergence(&p, &q, 6.0).unwrap();
        assert!(d.is_finite() && d > 0.0);
    }

    #[test]
    fn rho_examples() {
        let a = pv(&[0.3, 0.7]);
        let b = pv(&[0.6, 0.4]);
        assert_eq!(rho_alpha(&a, &b, 1.0).unwrap(), vec![1.0, 1.0]);
        let r = rho_alpha(&pv(&[0.8, 0.2]), &pv(&[0.2, 0.8]), 2.0).unwrap();
        assert!((r[0] - 4.0).abs() < 1e-12 && (r[1] - 0.25).abs() < 1e-12);
        let r = rho_alpha(&a, &a, 5.0).unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rho_fixmatch_examples() {
        assert_eq!(rho_fixmatch(&pv(&[0.97, 0.03]), 0.95), vec![1.0, 0.0]);
        assert_eq!(rho_fixmatch(&pv(&[0.6, 0.4]), 0.95), vec![0.0, 0.0]);
        assert_eq!(rho_fixmatch(&pv(&[0.5, 0.5]), 0.4), vec![1.0, 0.0]);
    }

    #[test]
    fn one_hot_divergences_are_finite() {
        let h = ProbVector::one_hot(1, 3).unwrap();
        let q = pv(&[0.2, 0.5, 0.3]);
        let kl = kl_divergence(&h, &q).unwrap();
        assert!((kl + 0.5f64.ln()).abs() < 1e-15);
        assert!(alpha_divergence(&h, &q, 2.0).unwrap().is_finite());
    }
}
