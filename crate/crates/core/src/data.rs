//! Synthetic 2-D classification datasets and stratified semi-supervised splits.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<usize>,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<usize>,
    pub seed: u64,
}

pub type TestSet = LabeledSet;

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet {
    pub xs: Vec<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslSplit {
    pub labeled: LabeledSet,
    pub unlabeled: UnlabeledSet,
    pub test: TestSet,
    pub classes: usize,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn pairs(&self) -> Vec<(&[f64], usize)> {
        self.xs.iter().map(Vec::as_slice).zip(self.ys.iter().copied()).collect()
    }
}

impl UnlabeledSet {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn check_size(n: usize, classes: usize) -> Result<()> {
    if n < 2 * classes {
        return domain(format!("need at least {} points for {classes} classes, got {n}", 2 * classes));
    }
    Ok(())
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Evenly spaced points along both arcs, shuffled, then jittered by `N(0, noise²)`.
fn finish(mut points: Vec<(Vec<f64>, usize)>, noise: f64, classes: usize, rng: &mut ChaCha8Rng) -> Dataset {
    points.shuffle(rng);
    if noise > 0.0 {
        for (x, _) in &mut points {
            for v in x.iter_mut() {
                *v += noise * gaussian(rng);
            }
        }
    }
    let (xs, ys) = points.into_iter().unzip();
    Dataset { xs, ys, classes }
}

fn arc_params(count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| if count == 1 { 0.0 } else { PI * i as f64 / (count - 1) as f64 })
}

/// Upper unit semicircle centered at the origin (class 0) and lower unit
/// semicircle centered at (1, 0.5) (class 1).
pub fn make_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    check_size(n, 2)?;
    if noise.is_nan() || noise < 0.0 {
        return domain(format!("noise must be ≥ 0, got {noise}"));
    }
    let outer = n.div_ceil(2);
    let mut points: Vec<(Vec<f64>, usize)> = arc_params(outer).map(|t| (vec![t.cos(), t.sin()], 0)).collect();
    points.extend(arc_params(n - outer).map(|t| (vec![1.0 - t.cos(), 0.5 - t.sin()], 1)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(finish(points, noise, 2, &mut rng))
}

/// Two concentric circles: radius 1 (class 0) and radius `factor` (class 1).
pub fn make_circles(n: usize, noise: f64, factor: f64, seed: u64) -> Result<Dataset> {
    check_size(n, 2)?;
    if noise.is_nan() || noise < 0.0 {
        return domain(format!("noise must be ≥ 0, got {noise}"));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return domain(format!("factor must lie in (0, 1), got {factor}"));
    }
    let outer = n.div_ceil(2);
    let ring = |count: usize, r: f64, label: usize| {
        (0..count).map(move |i| {
            let t = 2.0 * PI * i as f64 / count as f64;
            (vec![r * t.cos(), r * t.sin()], label)
        })
    };
    let mut points: Vec<_> = ring(outer, 1.0, 0).collect();
    points.extend(ring(n - outer, factor, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(finish(points, noise, 2, &mut rng))
}

/// Isotropic blobs with centers evenly spaced on a circle of radius 3.
pub fn make_blobs(n: usize, centers: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if centers < 2 {
        return domain("need at least 2 centers");
    }
    check_size(n, centers)?;
    if spread.is_nan() || spread < 0.0 {
        return domain(format!("spread must be ≥ 0, got {spread}"));
    }
    let points = (0..n)
        .map(|i| {
            let c = i % centers;
            let t = 2.0 * PI * c as f64 / centers as f64;
            (vec![3.0 * t.cos(), 3.0 * t.sin()], c)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(finish(points, spread, centers, &mut rng))
}

/// Holds out `n_test` random points, then takes the first `labels_per_class`
/// points of each class (in shuffled order) as labeled; the rest lose their labels.
pub fn ssl_split(data: &Dataset, labels_per_class: usize, n_test: usize, seed: u64) -> Result<SslSplit> {
    let n = data.xs.len();
    if data.ys.len() != n {
        return domain("features and labels differ in length");
    }
    if n_test >= n {
        return domain(format!("test split of {n_test} leaves no training points out of {n}"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test_idx, train_idx) = order.split_at(n_test);

    let mut taken = vec![0usize; data.classes];
    let mut labeled = LabeledSet { xs: vec![], ys: vec![], seed };
    let mut unlabeled = UnlabeledSet { xs: vec![], seed };
    for &i in train_idx {
        let y = data.ys[i];
        if taken[y] < labels_per_class {
            taken[y] += 1;
            labeled.xs.push(data.xs[i].clone());
            labeled.ys.push(y);
        } else {
            unlabeled.xs.push(data.xs[i].clone());
        }
    }
    if let Some(c) = taken.iter().position(|t| *t < labels_per_class) {
        return domain(format!(
            "class {c} has only {} training points, {labels_per_class} requested",
            taken[c]
        ));
    }
    let test = TestSet {
        xs: test_idx.iter().map(|&i| data.xs[i].clone()).collect(),
        ys: test_idx.iter().map(|&i| data.ys[i]).collect(),
        seed,
    };
    Ok(SslSplit { labeled, unlabeled, test, classes: data.classes })
}

/// `x1,x2,label` rows; the label column is empty when `ys` is `None`.
pub fn to_csv(xs: &[Vec<f64>], ys: Option<&[usize]>) -> String {
    let mut out = String::from("x1,x2,label\n");
    for (i, x) in xs.iter().enumerate() {
        let coords: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        let label = ys.map(|y| y[i].to_string()).unwrap_or_default();
        out.push_str(&format!("{},{}\n", coords.join(","), label));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let d = make_two_moons(101, 0.0, 3).unwrap();
        assert_eq!(d.ys.iter().filter(|y| **y == 0).count(), 51);
        for (x, y) in d.xs.iter().zip(&d.ys) {
            let (cx, cy, upper) = if *y == 0 { (0.0, 0.0, true) } else { (1.0, 0.5, false) };
            let r = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
            assert!(if upper { x[1] >= -1e-12 } else { x[1] <= 0.5 + 1e-12 });
        }
    }

    #[test]
    fn zero_spread_blobs_sit_on_centers() {
        let d = make_blobs(30, 3, 0.0, 1).unwrap();
        for (x, y) in d.xs.iter().zip(&d.ys) {
            let t = 2.0 * PI * *y as f64 / 3.0;
            assert_eq!(x, &vec![3.0 * t.cos(), 3.0 * t.sin()]);
        }
        assert!(make_blobs(5, 3, 0.1, 0).is_err());
    }

    #[test]
    fn circles_are_balanced() {
        let d = make_circles(41, 0.0, 0.5, 2).unwrap();
        let zeros = d.ys.iter().filter(|y| **y == 0).count();
        assert!((zeros as i64 - 20).abs() <= 1);
        assert!(make_circles(40, 0.0, 1.5, 2).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(make_two_moons(200, 0.1, 9).unwrap(), make_two_moons(200, 0.1, 9).unwrap());
        assert_ne!(make_two_moons(200, 0.1, 9).unwrap(), make_two_moons(200, 0.1, 10).unwrap());
        assert_eq!(make_circles(50, 0.05, 0.4, 1).unwrap(), make_circles(50, 0.05, 0.4, 1).unwrap());
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let d = make_two_moons(100, 0.1, 0).unwrap();
        let s = ssl_split(&d, 4, 20, 5).unwrap();
        assert_eq!(s.labeled.len(), 8);
        assert_eq!(s.labeled.ys.iter().filter(|y| **y == 0).count(), 4);
        assert_eq!(s.test.len(), 20);
        assert_eq!(s.unlabeled.len(), 72);
        let mut all: Vec<&Vec<f64>> = s.labeled.xs.iter().chain(&s.unlabeled.xs).chain(&s.test.xs).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup();
        assert_eq!(all.len(), 100);
        assert_eq!(s, ssl_split(&d, 4, 20, 5).unwrap());
    }

    #[test]
    fn split_can_label_everything() {
        let d = make_blobs(20, 2, 0.1, 4).unwrap();
        let s = ssl_split(&d, 10, 0, 1).unwrap();
        assert!(s.unlabeled.is_empty());
        assert_eq!(s.labeled.len(), 20);
    }

    #[test]
    fn split_rejects_scarce_classes() {
        let d = make_two_moons(20, 0.0, 0).unwrap();
        assert!(ssl_split(&d, 11, 2, 0).is_err());
        assert!(ssl_split(&d, 1, 20, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = to_csv(&[vec![0.5, -1.0]], Some(&[1]));
        assert_eq!(csv, "x1,x2,label\n0.5,-1,1\n");
        assert_eq!(to_csv(&[vec![1.0, 2.0]], None), "x1,x2,label\n1,2,\n");
    }
}
