//! Perturbation kernels standing in for image augmentation on low-dimensional data.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Gaussian,
    GaussianRotate,
    CoordinateDropout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationKernel {
    pub kind: KernelKind,
    /// Noise standard deviation, in feature units.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Radians; only used by `gaussian-rotate`.
    #[serde(default = "default_max_angle")]
    pub max_angle: f64,
    /// Only used by `coordinate-dropout`.
    #[serde(default = "default_drop_prob")]
    pub drop_prob: f64,
    /// Rotation center for `gaussian-rotate`; the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
}

fn default_sigma() -> f64 {
    0.05
}
fn default_max_angle() -> f64 {
    0.1
}
fn default_drop_prob() -> f64 {
    0.1
}

impl Default for PerturbationKernel {
    fn default() -> Self {
        Self::gaussian(default_sigma())
    }
}

impl PerturbationKernel {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: KernelKind::Gaussian,
            sigma,
            max_angle: default_max_angle(),
            drop_prob: default_drop_prob(),
            center: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return domain(format!("sigma must be ≥ 0, got {}", self.sigma));
        }
        if !(self.max_angle.is_finite() && self.max_angle >= 0.0) {
            return domain(format!("max_angle must be ≥ 0, got {}", self.max_angle));
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return domain(format!("drop_prob must lie in [0, 1), got {}", self.drop_prob));
        }
        Ok(())
    }
}

pub fn sample_perturbation(
    kernel: &PerturbationKernel,
    x: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    kernel.validate()?;
    let mut out = match kernel.kind {
        KernelKind::Gaussian => x.to_vec(),
        KernelKind::GaussianRotate => {
            if x.len() != 2 {
                return domain(format!("rotation needs 2-D inputs, got {}-D", x.len()));
            }
            let [cx, cy] = kernel.center.unwrap_or([0.0, 0.0]);
            let theta = if kernel.max_angle > 0.0 {
                rng.random_range(-kernel.max_angle..kernel.max_angle)
            } else {
                0.0
            };
            let (s, c) = theta.sin_cos();
            let (dx, dy) = (x[0] - cx, x[1] - cy);
            vec![cx + c * dx - s * dy, cy + s * dx + c * dy]
        }
        KernelKind::CoordinateDropout => x
            .iter()
            .map(|v| if rng.random::<f64>() < kernel.drop_prob { 0.0 } else { *v })
            .collect(),
    };
    if kernel.sigma > 0.0 {
        for v in &mut out {
            let z: f64 = StandardNormal.sample(rng);
            *v += kernel.sigma * z;
        }
    }
    Ok(out)
}

pub fn sample_n(
    kernel: &PerturbationKernel,
    x: &[f64],
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return domain("number of perturbations must be at least 1");
    }
    (0..n).map(|_| sample_perturbation(kernel, x, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = PerturbationKernel::gaussian(0.0);
        assert_eq!(sample_perturbation(&k, &[0.3, -2.0], &mut rng).unwrap(), vec![0.3, -2.0]);
        let draws = sample_n(&k, &[1.0, 2.0], 4, &mut rng).unwrap();
        assert_eq!(draws, vec![vec![1.0, 2.0]; 4]);
    }

    #[test]
    fn cloned_rng_reproduces_draws() {
        let k = PerturbationKernel::gaussian(0.02);
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = a.clone();
        let x = [0.5, 0.5];
        let da = sample_perturbation(&k, &x, &mut a).unwrap();
        assert_eq!(da, sample_perturbation(&k, &x, &mut b).unwrap());
        assert_ne!(da, x.to_vec());
    }

    #[test]
    fn noise_norm_matches_sigma() {
        // E‖x'−x‖² = Dσ²
        let sigma = 0.02;
        let k = PerturbationKernel::gaussian(sigma);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = [1.0, -1.0];
        let n = 20_000;
        let mean_sq: f64 = (0..n)
            .map(|_| {
                let d = sample_perturbation(&k, &x, &mut rng).unwrap();
                (d[0] - x[0]).powi(2) + (d[1] - x[1]).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        // sum of squares of 2n standard normals has sd sqrt(2/(2n)) relative
        let rel_sd = (1.0 / n as f64).sqrt();
        assert!((mean_sq / (2.0 * sigma * sigma) - 1.0).abs() < 4.0 * rel_sd);
    }

    #[test]
    fn sample_mean_tracks_source() {
        let sigma = 0.1;
        let k = PerturbationKernel::gaussian(sigma);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = [0.25, 0.75];
        let draws = sample_n(&k, &x, 10, &mut rng).unwrap();
        for d in 0..2 {
            let mean = draws.iter().map(|v| v[d]).sum::<f64>() / 10.0;
            assert!((mean - x[d]).abs() < 3.0 * sigma / 10f64.sqrt());
        }
    }

    #[test]
    fn rotate_requires_two_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = PerturbationKernel {
            kind: KernelKind::GaussianRotate,
            sigma: 0.0,
            max_angle: 0.5,
            drop_prob: 0.0,
            center: Some([1.0, 1.0]),
        };
        assert!(sample_perturbation(&k, &[1.0, 2.0, 3.0], &mut rng).is_err());
        let out = sample_perturbation(&k, &[2.0, 1.0], &mut rng).unwrap();
        let r = ((out[0] - 1.0).powi(2) + (out[1] - 1.0).powi(2)).sqrt();
        assert!((r - 1.0).abs() < 1e-12);
        let angle = (out[1] - 1.0).atan2(out[0] - 1.0);
        assert!(angle.abs() <= 0.5);
    }

    #[test]
    fn dropout_zeroes_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = PerturbationKernel {
            kind: KernelKind::CoordinateDropout,
            sigma: 0.0,
            max_angle: 0.0,
            drop_prob: 0.5,
            center: None,
        };
        let mut zeros = 0;
        for _ in 0..1000 {
            let out = sample_perturbation(&k, &[1.0, 1.0], &mut rng).unwrap();
            zeros += out.iter().filter(|v| **v == 0.0).count();
            assert!(out.iter().all(|v| *v == 0.0 || *v == 1.0));
        }
        assert!((800..1200).contains(&zeros), "{zeros}");
    }

    #[test]
    fn invalid_kernels_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut k = PerturbationKernel::gaussian(-1.0);
        assert!(sample_perturbation(&k, &[0.0], &mut rng).is_err());
        k.sigma = 0.1;
        k.drop_prob = 1.0;
        assert!(k.validate().is_err());
        assert!(sample_n(&PerturbationKernel::default(), &[0.0], 0, &mut rng).is_err());
    }
}
