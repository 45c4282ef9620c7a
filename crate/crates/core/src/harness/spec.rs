//! Experiment spec files.
//!
//! A spec is a TOML document:
//!
//! ```toml
//! seeds = [0, 1, 2]          # one run per (trainer, seed); default [0]
//! out_dir = "out"            # optional; --out and ALPHAMATCH_OUT also apply
//!
//! [dataset]                  # every key optional
//! generator = "two-moons"    # two-moons | circles | blobs
//! n = 1000
//! noise = 0.1                # two-moons, circles
//! factor = 0.5               # circles
//! centers = 3                # blobs
//! spread = 0.3               # blobs
//! labels_per_class = 4
//! n_test = 200
//! # seed = 7                 # fixes the data; otherwise each run seed draws its own split
//!
//! [emit]
//! runs_csv = true
//! summary_csv = true
//! summary_json = true
//!
//! [grid]                     # optional; expands every trainer it applies to
//! alpha = [1.0, 1.5, 2.0]    # alphamatch, iterative-alpha
//! beta = [0.0, 0.5]          # alphamatch
//! lambda = [0.5, 1.0]        # all but supervised
//!
//! [[trainer]]
//! method = "alphamatch"      # required: alphamatch | iterative-alpha | fixmatch | supervised
//! name = "am"                # optional output label, defaults to the method
//! alpha = 1.5
//! beta = 0.5
//! lambda = 1.0
//! n_aug = 1
//! tau = 0.95
//! lr0 = 0.1
//! lr_schedule = "cosine"     # cosine | constant
//! momentum = 0.9
//! epochs = 500
//! batch_s = 8
//! mu_ratio = 7
//! arch = "mlp-tanh"          # mlp-tanh | linear
//! hidden = 16
//! steps_per_gamma = 1
//! # steps_per_epoch = 14     # default: one pass over the unlabeled set
//! full_batch = false
//!
//! [trainer.kernel]
//! kind = "gaussian"          # gaussian | gaussian-rotate | coordinate-dropout
//! sigma = 0.05
//! max_angle = 0.1
//! drop_prob = 0.1
//! # [trainer.clean_kernel] takes the same keys and perturbs the clean view
//! ```
//!
//! Unknown keys are rejected with the full list of offending paths.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{make_blobs, make_circles, make_two_moons, ssl_split, SslSplit};
use crate::error::{Error, Result};
use crate::trainers::{Method, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    TwoMoons,
    Circles,
    Blobs,
}

fn d_generator() -> Generator {
    Generator::TwoMoons
}
fn d_n() -> usize {
    1000
}
fn d_noise() -> f64 {
    0.1
}
fn d_factor() -> f64 {
    0.5
}
fn d_centers() -> usize {
    3
}
fn d_spread() -> f64 {
    0.3
}
fn d_labels_per_class() -> usize {
    4
}
fn d_n_test() -> usize {
    200
}
fn d_seeds() -> Vec<u64> {
    vec![0]
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(default = "d_generator")]
    pub generator: Generator,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_noise")]
    pub noise: f64,
    #[serde(default = "d_factor")]
    pub factor: f64,
    #[serde(default = "d_centers")]
    pub centers: usize,
    #[serde(default = "d_spread")]
    pub spread: f64,
    #[serde(default = "d_labels_per_class")]
    pub labels_per_class: usize,
    #[serde(default = "d_n_test")]
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            generator: d_generator(),
            n: d_n(),
            noise: d_noise(),
            factor: d_factor(),
            centers: d_centers(),
            spread: d_spread(),
            labels_per_class: d_labels_per_class(),
            n_test: d_n_test(),
            seed: None,
        }
    }
}

impl DatasetSpec {
    pub fn classes(&self) -> usize {
        match self.generator {
            Generator::Blobs => self.centers,
            _ => 2,
        }
    }

    /// Data seed for a run: the fixed dataset seed if given, else the run seed.
    pub fn data_seed(&self, run_seed: u64) -> u64 {
        self.seed.unwrap_or(run_seed)
    }

    pub fn build(&self, run_seed: u64) -> Result<SslSplit> {
        let seed = self.data_seed(run_seed);
        let data = match self.generator {
            Generator::TwoMoons => make_two_moons(self.n, self.noise, seed)?,
            Generator::Circles => make_circles(self.n, self.noise, self.factor, seed)?,
            Generator::Blobs => make_blobs(self.n, self.centers, self.spread, seed)?,
        };
        ssl_split(&data, self.labels_per_class, self.n_test, seed)
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = self.classes();
        if self.generator == Generator::Blobs && self.centers < 2 {
            out.push(format!("dataset.centers = {} violates centers ≥ 2", self.centers));
        }
        if self.n < 2 * k {
            out.push(format!("dataset.n = {} violates n ≥ {}", self.n, 2 * k));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            out.push(format!("dataset.noise = {} violates noise ≥ 0", self.noise));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            out.push(format!("dataset.spread = {} violates spread ≥ 0", self.spread));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            out.push(format!("dataset.factor = {} violates 0 < factor < 1", self.factor));
        }
        if self.labels_per_class < 1 {
            out.push("dataset.labels_per_class = 0 violates labels_per_class ≥ 1".into());
        }
        if self.n_test + k * self.labels_per_class > self.n {
            out.push(format!(
                "dataset.n_test = {} violates n_test + classes·labels_per_class ≤ n = {}",
                self.n_test, self.n
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitFlags {
    #[serde(default = "d_true")]
    pub runs_csv: bool,
    #[serde(default = "d_true")]
    pub summary_csv: bool,
    #[serde(default = "d_true")]
    pub summary_json: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            runs_csv: true,
            summary_csv: true,
            summary_json: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub emit: EmitFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(rename = "trainer", default)]
    pub trainers: Vec<TrainerConfig>,
}

/// CLI overrides; each present field replaces the matching key in every trainer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub n_aug: Option<usize>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub epochs: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn parse_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_spec_str(&text)
}

pub fn parse_spec_str(text: &str) -> Result<ExperimentSpec> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut unknown = Vec::new();
    let spec: ExperimentSpec = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| Error::Config(e.to_string()))?;
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    let mut spec = spec.expand_grid();
    spec.validate()?;
    for t in &mut spec.trainers {
        t.name.get_or_insert_with(|| t.method.to_string());
    }
    Ok(spec)
}

pub fn serialize_spec(spec: &ExperimentSpec) -> Result<String> {
    toml::to_string(spec).map_err(|e| Error::Config(e.to_string()))
}

fn fmt_axis(v: f64) -> String {
    format!("{v}")
}

impl ExperimentSpec {
    /// Replaces the grid with the trainers it generates.
    pub fn expand_grid(mut self) -> Self {
        let Some(grid) = self.grid.take() else {
            return self;
        };
        let mut out = Vec::new();
        for t in self.trainers {
            let ssl = t.method != Method::Supervised;
            let axis = |values: &[f64], applies: bool| -> Vec<Option<f64>> {
                if applies && !values.is_empty() {
                    values.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                }
            };
            let alphas = axis(&grid.alpha, matches!(t.method, Method::Alphamatch | Method::IterativeAlpha));
            let betas = axis(&grid.beta, t.method == Method::Alphamatch);
            let lambdas = axis(&grid.lambda, ssl);
            for a in &alphas {
                for b in &betas {
                    for l in &lambdas {
                        let mut c = t.clone();
                        let mut label = t.label();
                        if let Some(a) = a {
                            c.alpha = *a;
                            label.push_str(&format!("-alpha{}", fmt_axis(*a)));
                        }
                        if let Some(b) = b {
                            c.beta = *b;
                            label.push_str(&format!("-beta{}", fmt_axis(*b)));
                        }
                        if let Some(l) = l {
                            c.lambda = *l;
                            label.push_str(&format!("-lambda{}", fmt_axis(*l)));
                        }
                        c.name = Some(label);
                        out.push(c);
                    }
                }
            }
        }
        self.trainers = out;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.trainers.is_empty() {
            problems.push("at least one [[trainer]] is required".to_string());
        }
        if self.seeds.is_empty() {
            problems.push("seeds must not be empty".to_string());
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            problems.push("seeds must be distinct".to_string());
        }
        problems.extend(self.dataset.violations());
        let mut labels = BTreeSet::new();
        for (i, t) in self.trainers.iter().enumerate() {
            for v in t.violations() {
                problems.push(format!("trainer[{i}].{v}"));
            }
            let label = t.label();
            if label.is_empty() || label.contains(['/', '\\']) {
                problems.push(format!("trainer[{i}].name = {label:?} is not a usable file label"));
            }
            if !labels.insert(label.clone()) {
                problems.push(format!("trainer[{i}] label `{label}` is used twice; set `name` to tell them apart"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<()> {
        for t in &mut self.trainers {
            if let Some(v) = o.alpha {
                t.alpha = v;
            }
            if let Some(v) = o.beta {
                t.beta = v;
            }
            if let Some(v) = o.lambda {
                t.lambda = v;
            }
            if let Some(v) = o.n_aug {
                t.n_aug = v;
            }
            if let Some(v) = o.tau {
                t.tau = v;
            }
            if let Some(v) = o.epochs {
                t.epochs = v;
            }
            if let Some(m) = o.method {
                t.method = m;
                t.name = None;
            }
        }
        if o.method.is_some() {
            for (i, t) in self.trainers.iter_mut().enumerate() {
                t.name = Some(format!("{}-{i}", t.method));
            }
            if self.trainers.len() == 1 {
                self.trainers[0].name = None;
            }
        }
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(out) = &o.out {
            self.out_dir = Some(out.clone());
        }
        self.validate()
    }

    /// `explicit` (a CLI flag) wins, then the spec's `out_dir`, then
    /// `ALPHAMATCH_OUT`, then `./alphamatch-out`.
    pub fn resolve_out_dir(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os("ALPHAMATCH_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("alphamatch-out"))
    }
}
