//! Optimal auxiliary label distribution γ: the weighted alpha-divergence
//! barycenter `argmin_γ Σ_i w_i D_α(γ ‖ p_i)` over the simplex.
//!
//! The minimizer is `γ ∝ (Σ_i w_i p_i^{1−α})^{1/(1−α)}`: the arithmetic mean as
//! α → 0, the geometric mean at α = 1, a powered harmonic mean for α > 1, and
//! the componentwise minimum as α → ∞. [`barycenter_oracle`] minimizes the same
//! objective numerically and shares no code with the closed form.

use crate::error::{domain, Error, Result};
use crate::simplex::{floored_ln, logsumexp, ProbVector, ALPHA_SWITCH};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    members: Vec<ProbVector>,
    weights: Vec<f64>,
}

impl WeightedEnsemble {
    pub fn new(members: Vec<ProbVector>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return domain("empty ensemble");
        }
        if members.len() != weights.len() {
            return domain(format!(
                "{} members but {} weights",
                members.len(),
                weights.len()
            ));
        }
        let k = members[0].len();
        if members.iter().any(|m| m.len() != k) {
            return domain("ensemble members disagree on the number of classes");
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return domain(format!("weights must be nonnegative: {weights:?}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("weights sum to {total}, expected 1"));
        }
        Ok(Self { members, weights })
    }

    pub fn members(&self) -> &[ProbVector] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.members[0].len()
    }

    /// `Σ_i w_i D_α(γ ‖ p_i)`.
    pub fn objective(&self, gamma: &ProbVector, alpha: f64) -> Result<f64> {
        let mut total = 0.0;
        for (m, w) in self.members.iter().zip(&self.weights) {
            if *w > 0.0 {
                total += w * crate::simplex::alpha_divergence(gamma, m, alpha)?;
            }
        }
        Ok(total)
    }
}

/// Mixture weights `[1−β, β/n, …, β/n]` for the clean point and `n` perturbations.
pub fn beta_weights(n: usize, beta: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return domain("number of perturbations must be at least 1");
    }
    if !(0.0..=1.0).contains(&beta) {
        return domain(format!("beta must lie in [0, 1], got {beta}"));
    }
    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0 - beta);
    w.extend(std::iter::repeat_n(beta / n as f64, n));
    Ok(w)
}

pub fn weighted_alpha_barycenter(ensemble: &WeightedEnsemble, alpha: f64) -> Result<ProbVector> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return domain(format!("alpha must be positive and finite, got {alpha}"));
    }
    let active: Vec<(f64, &ProbVector)> = ensemble
        .weights
        .iter()
        .copied()
        .zip(&ensemble.members)
        .filter(|(w, _)| *w > 0.0)
        .collect();
    if let [(_, only)] = active.as_slice() {
        return Ok((*only).clone());
    }
    let k = ensemble.num_classes();

    if alpha <= ALPHA_SWITCH {
        let mean: Vec<f64> = (0..k)
            .map(|y| active.iter().map(|(w, p)| w * p[y]).sum())
            .collect();
        return ProbVector::normalize(&mean);
    }

    let log_bar: Vec<f64> = if (alpha - 1.0).abs() <= ALPHA_SWITCH {
        (0..k)
            .map(|y| active.iter().map(|(w, p)| w * floored_ln(p[y])).sum())
            .collect()
    } else {
        let power = 1.0 - alpha;
        (0..k)
            .map(|y| {
                logsumexp(
                    active
                        .iter()
                        .map(|(w, p)| w.ln() + power * floored_ln(p[y])),
                ) / power
            })
            .collect()
    };
    ProbVector::softmax(&log_bar)
}

/// γ-step of the coordinate descent: the barycenter of the clean prediction and
/// its perturbed predictions under the β-mixture weights.
pub fn gamma_update(
    p_clean: &ProbVector,
    p_augs: &[ProbVector],
    alpha: f64,
    beta: f64,
) -> Result<ProbVector> {
    let weights = beta_weights(p_augs.len(), beta)?;
    if beta == 0.0 {
        return Ok(p_clean.clone());
    }
    let mut members = Vec::with_capacity(p_augs.len() + 1);
    members.push(p_clean.clone());
    members.extend(p_augs.iter().cloned());
    weighted_alpha_barycenter(&WeightedEnsemble::new(members, weights)?, alpha)
}

const ORACLE_MAX_ITERS: usize = 200_000;
const GRID_STEP: f64 = 1e-4;

/// Direct numerical minimizer of `Σ w_i D_α(γ ‖ p_i)`: exhaustive grid plus
/// golden-section refinement for two classes, projected gradient descent with
/// backtracking (started at the uniform distribution) for three to six.
///
/// `tol` bounds the final step length (grid bracket width for two classes).
pub fn barycenter_oracle(ensemble: &WeightedEnsemble, alpha: f64, tol: f64) -> Result<ProbVector> {
    if !(alpha.is_finite() && alpha > 0.0) || (alpha - 1.0).abs() <= ALPHA_SWITCH {
        return domain(format!("oracle needs alpha in (0,1)∪(1,∞), got {alpha}"));
    }
    let k = ensemble.num_classes();
    if !(2..=6).contains(&k) {
        return domain(format!("oracle supports 2..=6 classes, got {k}"));
    }
    let problem = OracleProblem::new(ensemble, alpha);
    let gamma = if k == 2 {
        problem.grid_search_2(tol)
    } else {
        problem.projected_gradient(tol)?
    };
    ProbVector::new(gamma)
}

/// Objective in the raw power form, `(Σ_y γ_y^α c_y − 1)/(α(α−1))` with
/// `c_y = Σ_i w_i p_iy^{1−α}`.
struct OracleProblem {
    alpha: f64,
    coef: Vec<f64>,
}

impl OracleProblem {
    fn new(ensemble: &WeightedEnsemble, alpha: f64) -> Self {
        let k = ensemble.num_classes();
        let coef = (0..k)
            .map(|y| {
                ensemble
                    .members
                    .iter()
                    .zip(&ensemble.weights)
                    .map(|(p, w)| w * p[y].max(crate::simplex::EPS_FLOOR).powf(1.0 - alpha))
                    .sum()
            })
            .collect();
        Self { alpha, coef }
    }

    fn value(&self, g: &[f64]) -> f64 {
        let a = self.alpha;
        let s: f64 = g.iter().zip(&self.coef).map(|(gy, c)| gy.powf(a) * c).sum();
        (s - 1.0) / (a * (a - 1.0))
    }

    fn gradient(&self, g: &[f64]) -> Vec<f64> {
        let a = self.alpha;
        g.iter()
            .zip(&self.coef)
            .map(|(gy, c)| gy.max(1e-300).powf(a - 1.0) * c / (a - 1.0))
            .collect()
    }

    fn grid_search_2(&self, tol: f64) -> Vec<f64> {
        let steps = (1.0 / GRID_STEP).round() as usize;
        let f = |t: f64| self.value(&[t, 1.0 - t]);
        let mut best = (0usize, f64::INFINITY);
        for i in 0..=steps {
            let v = f(i as f64 * GRID_STEP);
            if v < best.1 {
                best = (i, v);
            }
        }
        // Convex in t: the minimizer lies within one grid cell of the best node.
        let mut lo = (best.0 as f64 - 1.0).max(0.0) * GRID_STEP;
        let mut hi = ((best.0 + 1) as f64 * GRID_STEP).min(1.0);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        while hi - lo > tol.max(1e-15) {
            let m1 = hi - ratio * (hi - lo);
            let m2 = lo + ratio * (hi - lo);
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let t = 0.5 * (lo + hi);
        vec![t, 1.0 - t]
    }

    fn projected_gradient(&self, tol: f64) -> Result<Vec<f64>> {
        let k = self.coef.len();
        let mut g = vec![1.0 / k as f64; k];
        let mut f = self.value(&g);
        let mut step = 1.0;
        for _ in 0..ORACLE_MAX_ITERS {
            let grad = self.gradient(&g);
            let mut t = step;
            loop {
                let trial: Vec<f64> = g.iter().zip(&grad).map(|(x, d)| x - t * d).collect();
                let cand = project_simplex(&trial);
                let moved: f64 = cand
                    .iter()
                    .zip(&g)
                    .zip(&grad)
                    .map(|((c, x), d)| d * (c - x))
                    .sum();
                let dist2: f64 = cand.iter().zip(&g).map(|(c, x)| (c - x).powi(2)).sum();
                let fc = self.value(&cand);
                if fc <= f + moved + dist2 / (2.0 * t) || t < 1e-20 {
                    let max_move = cand
                        .iter()
                        .zip(&g)
                        .map(|(c, x)| (c - x).abs())
                        .fold(0.0, f64::max);
                    g = cand;
                    f = fc;
                    if max_move <= tol {
                        return Ok(g);
                    }
                    break;
                }
                t *= 0.5;
            }
            step = (t * 2.0).min(1e6);
        }
        Err(Error::NonConvergence {
            iterations: ORACLE_MAX_ITERS,
            objective: f,
            best: g,
        })
    }
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn ens(members: &[&[f64]], weights: &[f64]) -> WeightedEnsemble {
        WeightedEnsemble::new(members.iter().map(|m| pv(m)).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn beta_weights_examples() {
        assert_eq!(beta_weights(1, 0.5).unwrap(), vec![0.5, 0.5]);
        let w = beta_weights(4, 0.8).unwrap();
        assert!(w.iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert_eq!(beta_weights(3, 0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(beta_weights(2, 1.5).is_err());
        assert!(beta_weights(2, -0.1).is_err());
        assert!(beta_weights(0, 0.5).is_err());
    }

    #[test]
    fn ensemble_validation() {
        assert!(WeightedEnsemble::new(vec![], vec![]).is_err());
        assert!(WeightedEnsemble::new(vec![pv(&[0.5, 0.5])], vec![0.7]).is_err());
        assert!(WeightedEnsemble::new(
            vec![pv(&[0.5, 0.5]), ProbVector::uniform(3)],
            vec![0.5, 0.5]
        )
        .is_err());
    }

    #[test]
    fn barycenter_examples() {
        let single = ens(&[&[0.3, 0.7]], &[1.0]);
        for a in [0.5, 1.0, 2.0, 9.0] {
            assert_eq!(weighted_alpha_barycenter(&single, a).unwrap(), pv(&[0.3, 0.7]));
        }
        let sym = ens(&[&[0.8, 0.2], &[0.2, 0.8]], &[0.5, 0.5]);
        let g = weighted_alpha_barycenter(&sym, 2.0).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-14);
        let e = ens(&[&[0.9, 0.1], &[0.5, 0.5]], &[0.5, 0.5]);
        let g = weighted_alpha_barycenter(&e, 2.0).unwrap();
        assert!((g[0] - 0.794118).abs() < 1e-6, "{g:?}");
        assert!((g[1] - 0.205882).abs() < 1e-6);
        assert!(weighted_alpha_barycenter(&e, 0.0).is_err());
    }

    #[test]
    fn gamma_update_examples() {
        let clean = pv(&[0.9, 0.1]);
        let augs = [pv(&[0.5, 0.5]), pv(&[0.1, 0.9])];
        assert_eq!(gamma_update(&clean, &augs, 1.5, 0.0).unwrap(), clean);
        let g = gamma_update(&pv(&[0.8, 0.2]), &[pv(&[0.2, 0.8])], 2.0, 0.5).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-14);
        // frozen from a 2e6-point simplex grid search of the objective
        let g = gamma_update(&clean, &[pv(&[0.5, 0.5])], 1.5, 0.5).unwrap();
        assert!((g[0] - 0.774657).abs() < 1e-5, "{g:?}");
        assert!((g[1] - 0.225343).abs() < 1e-5);
    }

    #[test]
    fn oracle_examples() {
        let single = ens(&[&[0.3, 0.7]], &[1.0]);
        let g = barycenter_oracle(&single, 2.0, 1e-10).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-8);
        assert!(single.objective(&g, 2.0).unwrap().abs() < 1e-12);
        let sym = ens(&[&[0.8, 0.2], &[0.2, 0.8]], &[0.5, 0.5]);
        let g = barycenter_oracle(&sym, 2.0, 1e-10).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-8);
        let e3 = ens(&[&[0.6, 0.3, 0.1], &[0.2, 0.2, 0.6]], &[0.3, 0.7]);
        let closed = weighted_alpha_barycenter(&e3, 1.5).unwrap();
        let oracle = barycenter_oracle(&e3, 1.5, 1e-10).unwrap();
        for y in 0..3 {
            assert!((closed[y] - oracle[y]).abs() < 1e-5, "{closed:?} {oracle:?}");
        }
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.2, 0.3, 0.5]);
        assert!((p[2] - 0.5).abs() < 1e-15);
    }
}
