use std::f64::consts::PI;

use alphamatch::augment::{sample_perturbation, PerturbationKernel};
use alphamatch::data::{make_two_moons, ssl_split, SslSplit};
use alphamatch::model::{alpha_consistency_grad, Arch, ModelParams};
use alphamatch::simplex::kl_divergence;
use alphamatch::trainers::{train, Method, RunMetrics, TrainerConfig};
use alphamatch::verify::{finite_difference, monotonicity_suite, random_prob, relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn split() -> SslSplit {
    ssl_split(&make_two_moons(300, 0.1, 5).unwrap(), 4, 60, 5).unwrap()
}

fn config(method: Method, seed: u64) -> TrainerConfig {
    let mut c = TrainerConfig::new(method);
    c.epochs = 15;
    c.seed = seed;
    c
}

fn same_trajectory(a: &RunMetrics, b: &RunMetrics) -> bool {
    a.final_params.as_flat() == b.final_params.as_flat()
        && a.epochs.len() == b.epochs.len()
        && a.epochs.iter().zip(&b.epochs).all(|(x, y)| {
            x.test_acc == y.test_acc && x.train_acc == y.train_acc && x.sup_loss == y.sup_loss && x.lr == y.lr
        })
}

#[test]
fn lambda_zero_collapses_to_supervised() {
    let data = split();
    for seed in [0, 7] {
        let sup = train(&config(Method::Supervised, seed), &data).unwrap();
        for method in [Method::Alphamatch, Method::IterativeAlpha, Method::Fixmatch] {
            let mut c = config(method, seed);
            c.lambda = 0.0;
            let run = train(&c, &data).unwrap();
            assert!(same_trajectory(&sup, &run), "{method} seed {seed}");
        }
    }
}

#[test]
fn fixmatch_with_unreachable_threshold_is_supervised() {
    let data = split();
    let sup = train(&config(Method::Supervised, 3), &data).unwrap();
    let mut c = config(Method::Fixmatch, 3);
    c.tau = 1.01;
    let run = train(&c, &data).unwrap();
    assert!(same_trajectory(&sup, &run));
    assert!(run.epochs.iter().all(|e| e.mask_rate == 0.0));
}

#[test]
fn every_trainer_is_deterministic() {
    let data = split();
    for method in [Method::Alphamatch, Method::IterativeAlpha, Method::Fixmatch, Method::Supervised] {
        let a = train(&config(method, 11), &data).unwrap();
        let b = train(&config(method, 11), &data).unwrap();
        assert_eq!(a.epochs, b.epochs, "{method}");
        assert_eq!(a.final_params, b.final_params);
        let c = train(&config(method, 12), &data).unwrap();
        assert_ne!(a.final_params, c.final_params, "{method}");
    }
}

#[test]
fn uda_gradient_matches_kl_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for arch in [Arch::Linear, Arch::MlpTanh] {
        for _ in 0..10 {
            let mut p = ModelParams::zeros(arch, 2, 6, 2).unwrap();
            let start = p.trainable_start();
            for v in &mut p.as_flat_mut()[start..] {
                *v = rng.random_range(-1.0..1.0);
            }
            let target = random_prob(2, &mut rng);
            let x: Vec<f64> = vec![rng.random_range(-1.5..2.5), rng.random_range(-1.0..1.5)];
            let g = alpha_consistency_grad(&p, &target, &x, 1.0).unwrap();
            let reference = kl_divergence(&target, &p.forward(&x).unwrap()).unwrap();
            assert!((g.value - reference).abs() < 1e-12);
            let fd = finite_difference(&p, 1e-5, |q| kl_divergence(&target, &q.forward(&x)?)).unwrap();
            assert!(relative_error(&g.data[start..], &fd) <= 1e-4);
        }
    }
}

#[test]
fn full_batch_objective_never_increases() {
    let report = monotonicity_suite(100).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn ssl_trainers_record_consistency() {
    let data = split();
    for method in [Method::Alphamatch, Method::IterativeAlpha, Method::Fixmatch] {
        let run = train(&config(method, 1), &data).unwrap();
        assert!(run.aborted_at.is_none());
        assert_eq!(run.epochs.len(), 15);
        assert!(run.epochs.iter().all(|e| e.consistency.is_finite() && e.consistency >= 0.0));
    }
}

#[test]
fn huge_learning_rate_aborts_and_records_epoch() {
    let data = split();
    let mut c = config(Method::IterativeAlpha, 0);
    c.alpha = 4.0;
    c.lr0 = 1e200;
    c.lambda = 1e200;
    let run = train(&c, &data).unwrap();
    let epoch = run.aborted_at.expect("run should diverge");
    assert!(epoch >= 1 && epoch <= c.epochs);
    assert_eq!(run.epochs.len(), epoch - 1);
}

fn distance_to_arc(p: &[f64], class: usize) -> f64 {
    (0..=2000)
        .map(|i| {
            let t = PI * i as f64 / 2000.0;
            let (ax, ay) = if class == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
            (p[0] - ax).hypot(p[1] - ay)
        })
        .fold(f64::INFINITY, f64::min)
}

fn nearest_moon(p: &[f64]) -> usize {
    usize::from(distance_to_arc(p, 1) < distance_to_arc(p, 0))
}

#[test]
fn perturbations_keep_the_moon_label() {
    let data = make_two_moons(1000, 0.1, 21).unwrap();
    let kernel = PerturbationKernel::gaussian(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let draws = 10_000;
    let mut kept = 0;
    for i in 0..draws {
        let x = &data.xs[i % data.xs.len()];
        let xp = sample_perturbation(&kernel, x, &mut rng).unwrap();
        if nearest_moon(x) == nearest_moon(&xp) {
            kept += 1;
        }
    }
    let rate = kept as f64 / draws as f64;
    assert!(rate >= 0.99, "label kept for {rate}");
}
