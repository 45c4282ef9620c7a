use alphamatch::gamma::beta_weights;
use alphamatch::model::{alpha_consistency_grad, psi_value_grad, supervised_loss_grad, Arch, ModelParams};
use alphamatch::simplex::ProbVector;
use alphamatch::verify::{finite_difference, random_prob, relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const ALPHAS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 4.0];

fn params(arch: Arch, k: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    let mut p = ModelParams::zeros(arch, 2, 5, k).unwrap();
    let start = p.trainable_start();
    for v in &mut p.as_flat_mut()[start..] {
        *v = rng.random_range(-1.5..1.5);
    }
    p
}

fn point(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]
}

fn unclamped(p: &ModelParams, xs: &[&[f64]]) -> bool {
    xs.iter().all(|x| p.forward(x).unwrap().as_slice().iter().all(|v| *v > 1e-6))
}

#[test]
fn alpha_consistency_grad_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for arch in [Arch::Linear, Arch::MlpTanh] {
        for alpha in ALPHAS {
            let mut n = 0;
            while n < 6 {
                let k = rng.random_range(2..=4);
                let p = params(arch, k, &mut rng);
                let x = point(&mut rng);
                if !unclamped(&p, &[&x]) {
                    continue;
                }
                let gamma = random_prob(k, &mut rng);
                let g = alpha_consistency_grad(&p, &gamma, &x, alpha).unwrap();
                let fd = finite_difference(&p, H, |q| Ok(alpha_consistency_grad(q, &gamma, &x, alpha)?.value)).unwrap();
                let err = relative_error(&g.data[p.trainable_start()..], &fd);
                assert!(err <= 1e-4, "{arch} alpha={alpha}: rel err {err}");
                worst = worst.max(err);
                n += 1;
                checked += 1;
            }
        }
    }
    assert!(checked >= 50);
    assert!(worst < 1e-4);
}

#[test]
fn psi_value_grad_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0;
    for arch in [Arch::Linear, Arch::MlpTanh] {
        for alpha in ALPHAS {
            let mut n = 0;
            while n < 6 {
                let k = rng.random_range(2..=4);
                let p = params(arch, k, &mut rng);
                let x = point(&mut rng);
                let augs: Vec<Vec<f64>> = (0..rng.random_range(1..=3)).map(|_| point(&mut rng)).collect();
                let mut all: Vec<&[f64]> = vec![&x];
                all.extend(augs.iter().map(Vec::as_slice));
                if !unclamped(&p, &all) {
                    continue;
                }
                let gamma = random_prob(k, &mut rng);
                let beta = rng.random_range(0.0..=1.0);
                let g = psi_value_grad(&p, &gamma, &x, &augs, alpha, beta).unwrap();
                let fd = finite_difference(&p, H, |q| Ok(psi_value_grad(q, &gamma, &x, &augs, alpha, beta)?.value))
                    .unwrap();
                let err = relative_error(&g.data[p.trainable_start()..], &fd);
                assert!(err <= 1e-4, "{arch} alpha={alpha} beta={beta}: rel err {err}");
                n += 1;
                checked += 1;
            }
        }
    }
    assert!(checked >= 50);
}

#[test]
fn supervised_grad_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for arch in [Arch::Linear, Arch::MlpTanh] {
        for _ in 0..10 {
            let k = 3;
            let p = params(arch, k, &mut rng);
            let xs: Vec<Vec<f64>> = (0..4).map(|_| point(&mut rng)).collect();
            let ys: Vec<usize> = (0..4).map(|_| rng.random_range(0..k)).collect();
            let batch: Vec<(&[f64], usize)> = xs.iter().map(Vec::as_slice).zip(ys.iter().copied()).collect();
            let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            if !unclamped(&p, &refs) {
                continue;
            }
            let g = supervised_loss_grad(&p, &batch).unwrap();
            let fd = finite_difference(&p, H, |q| Ok(supervised_loss_grad(q, &batch)?.value)).unwrap();
            assert!(relative_error(&g.data[p.trainable_start()..], &fd) <= 1e-4);
        }
    }
}

#[test]
fn hard_label_kl_grad_is_fixmatch_cross_entropy_grad() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for arch in [Arch::Linear, Arch::MlpTanh] {
        for _ in 0..10 {
            let k = rng.random_range(2..=4);
            let p = params(arch, k, &mut rng);
            let x = point(&mut rng);
            let y = rng.random_range(0..k);
            let g = alpha_consistency_grad(&p, &ProbVector::one_hot(y, k).unwrap(), &x, 1.0).unwrap();
            let ce = supervised_loss_grad(&p, &[(&x, y)]).unwrap();
            for (a, b) in g.data.iter().zip(&ce.data) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
            assert!((g.value - ce.value).abs() <= 1e-12);
        }
    }
}

#[test]
fn psi_grad_is_weighted_sum_of_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for arch in [Arch::Linear, Arch::MlpTanh] {
        for alpha in ALPHAS {
            let k = 3;
            let p = params(arch, k, &mut rng);
            let gamma = random_prob(k, &mut rng);
            let x = point(&mut rng);
            let augs: Vec<Vec<f64>> = (0..3).map(|_| point(&mut rng)).collect();
            let beta = 0.3;
            let psi = psi_value_grad(&p, &gamma, &x, &augs, alpha, beta).unwrap();
            let w = beta_weights(augs.len(), beta).unwrap();
            let mut expected = vec![0.0; psi.data.len()];
            let mut value = 0.0;
            for (pt, wi) in std::iter::once(&x).chain(&augs).zip(&w) {
                let g = alpha_consistency_grad(&p, &gamma, pt, alpha).unwrap();
                for (e, gi) in expected.iter_mut().zip(&g.data) {
                    *e += wi * gi;
                }
                value += wi * g.value;
            }
            for (a, b) in psi.data.iter().zip(&expected) {
                assert!((a - b).abs() <= 1e-12);
            }
            assert!((psi.value - value).abs() <= 1e-12);
        }
    }
}

#[test]
fn forward_is_a_distribution_for_extreme_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for arch in [Arch::Linear, Arch::MlpTanh] {
        let p = params(arch, 4, &mut rng);
        for x in [[1e6, -1e6], [0.0, 0.0], [-3e300, 1e-300], [f64::MAX / 4.0, 1.0]] {
            let out = p.forward(&x).unwrap();
            let s: f64 = out.as_slice().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(out.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
