//! Python bindings: divergences, barycenters, models, trainers and the
//! experiment harness.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use alphamatch::data::{make_two_moons as moons, ssl_split};
use alphamatch::gamma::{self, WeightedEnsemble};
use alphamatch::harness::{emit_all, parse_spec_str, run_experiment, summarize, TrainerSummary};
use alphamatch::simplex;
use alphamatch::verify::{run_suite, Suite};
use alphamatch::{Arch, Error, Method, ModelParams, ProbVector};
use rand::SeedableRng;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn prob(v: Vec<f64>) -> PyResult<ProbVector> {
    ProbVector::new(v).map_err(py_err)
}

fn probs(vs: Vec<Vec<f64>>) -> PyResult<Vec<ProbVector>> {
    vs.into_iter().map(prob).collect()
}

/// D_α(p‖q), with the KL limits near α = 1 and α = 0.
#[pyfunction]
fn alpha_divergence(p: Vec<f64>, q: Vec<f64>, alpha: f64) -> PyResult<f64> {
    simplex::alpha_divergence(&prob(p)?, &prob(q)?, alpha).map_err(py_err)
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    simplex::kl_divergence(&prob(p)?, &prob(q)?).map_err(py_err)
}

/// Per-class weights (p_t/p_θ)^{α−1}.
#[pyfunction]
fn rho_alpha(p_t: Vec<f64>, p_theta: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    simplex::rho_alpha(&prob(p_t)?, &prob(p_theta)?, alpha).map_err(py_err)
}

#[pyfunction]
fn beta_weights(n: usize, beta: f64) -> PyResult<Vec<f64>> {
    gamma::beta_weights(n, beta).map_err(py_err)
}

#[pyfunction]
fn weighted_alpha_barycenter(members: Vec<Vec<f64>>, weights: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    let ens = WeightedEnsemble::new(probs(members)?, weights).map_err(py_err)?;
    Ok(gamma::weighted_alpha_barycenter(&ens, alpha).map_err(py_err)?.into_vec())
}

#[pyfunction]
#[pyo3(signature = (members, weights, alpha, tol = 1e-9))]
fn barycenter_oracle(members: Vec<Vec<f64>>, weights: Vec<f64>, alpha: f64, tol: f64) -> PyResult<Vec<f64>> {
    let ens = WeightedEnsemble::new(probs(members)?, weights).map_err(py_err)?;
    Ok(gamma::barycenter_oracle(&ens, alpha, tol).map_err(py_err)?.into_vec())
}

#[pyfunction]
fn gamma_update(p_clean: Vec<f64>, p_augs: Vec<Vec<f64>>, alpha: f64, beta: f64) -> PyResult<Vec<f64>> {
    Ok(gamma::gamma_update(&prob(p_clean)?, &probs(p_augs)?, alpha, beta).map_err(py_err)?.into_vec())
}

#[pyfunction]
fn make_two_moons(n: usize, noise: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let d = moons(n, noise, seed).map_err(py_err)?;
    Ok((d.xs, d.ys))
}

fn parse_arch(s: &str) -> PyResult<Arch> {
    match s {
        "linear" => Ok(Arch::Linear),
        "mlp-tanh" => Ok(Arch::MlpTanh),
        other => Err(PyValueError::new_err(format!("unknown arch `{other}` (linear or mlp-tanh)"))),
    }
}

/// Softmax classifier: linear, or one tanh hidden layer.
#[pyclass(name = "Model")]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (arch = "mlp-tanh", input = 2, hidden = 16, classes = 2, seed = 0))]
    fn new(arch: &str, input: usize, hidden: usize, classes: usize, seed: u64) -> PyResult<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let inner = ModelParams::init_uniform(parse_arch(arch)?, input, hidden, classes, &mut rng).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.forward(&x).map_err(py_err)?.into_vec())
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.predict(&x).map_err(py_err)
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.as_flat().to_vec()
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.arch().to_string()
    }

    fn __repr__(&self) -> String {
        let d = self.inner.dims();
        format!("Model(arch={:?}, input={}, hidden={}, classes={})", self.arch(), d.input, d.hidden, d.classes)
    }
}

/// Outcome of one training run.
#[pyclass(name = "RunResult", get_all)]
struct PyRunResult {
    method: String,
    seed: u64,
    test_acc: Vec<f64>,
    train_acc: Vec<f64>,
    sup_loss: Vec<f64>,
    consistency: Vec<f64>,
    objective: Vec<Option<f64>>,
    aborted_at: Option<usize>,
    final_test_acc: Option<f64>,
}

/// Trains one method on a two-moons split and returns its per-epoch history.
#[pyfunction]
#[pyo3(signature = (
    method, *, alpha = None, beta = None, lam = None, n_aug = None, tau = None,
    lr0 = None, epochs = None, sigma = None, seed = 0,
    n = 1000, noise = 0.1, labels_per_class = 4, n_test = 200,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    method: &str,
    alpha: Option<f64>,
    beta: Option<f64>,
    lam: Option<f64>,
    n_aug: Option<usize>,
    tau: Option<f64>,
    lr0: Option<f64>,
    epochs: Option<usize>,
    sigma: Option<f64>,
    seed: u64,
    n: usize,
    noise: f64,
    labels_per_class: usize,
    n_test: usize,
) -> PyResult<PyRunResult> {
    let method: Method = method.parse().map_err(py_err)?;
    let mut c = alphamatch::TrainerConfig::new(method);
    c.seed = seed;
    c.alpha = alpha.unwrap_or(c.alpha);
    c.beta = beta.unwrap_or(c.beta);
    c.lambda = lam.unwrap_or(c.lambda);
    c.n_aug = n_aug.unwrap_or(c.n_aug);
    c.tau = tau.unwrap_or(c.tau);
    c.lr0 = lr0.unwrap_or(c.lr0);
    c.epochs = epochs.unwrap_or(c.epochs);
    c.kernel.sigma = sigma.unwrap_or(c.kernel.sigma);
    c.validate().map_err(py_err)?;
    let run = py
        .detach(|| {
            let split = ssl_split(&moons(n, noise, seed)?, labels_per_class, n_test, seed)?;
            alphamatch::trainers::train(&c, &split)
        })
        .map_err(py_err)?;
    Ok(PyRunResult {
        method: run.method.to_string(),
        seed,
        test_acc: run.epochs.iter().map(|e| e.test_acc).collect(),
        train_acc: run.epochs.iter().map(|e| e.train_acc).collect(),
        sup_loss: run.epochs.iter().map(|e| e.sup_loss).collect(),
        consistency: run.epochs.iter().map(|e| e.consistency).collect(),
        objective: run.epochs.iter().map(|e| e.objective).collect(),
        aborted_at: run.aborted_at,
        final_test_acc: if run.aborted_at.is_some() { None } else { run.final_test_acc() },
    })
}

fn summary_dict<'py>(py: Python<'py>, s: &TrainerSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &s.name)?;
    d.set_item("method", s.method.as_str())?;
    d.set_item("alpha", s.alpha)?;
    d.set_item("beta", s.beta)?;
    d.set_item("lambda", s.lambda)?;
    d.set_item("n_aug", s.n_aug)?;
    d.set_item("runs", s.runs)?;
    d.set_item("mean_test_acc", s.mean_test_acc)?;
    d.set_item("std_test_acc", s.std_test_acc)?;
    d.set_item("aborted", s.aborted)?;
    d.set_item("abort_epochs", s.abort_epochs.clone())?;
    Ok(d)
}

/// Runs an experiment spec given as TOML text. Writes result files when
/// `out_dir` is set and returns one summary dict per trainer.
#[pyfunction]
#[pyo3(signature = (spec_toml, jobs = 0, out_dir = None))]
fn run_spec<'py>(
    py: Python<'py>,
    spec_toml: &str,
    jobs: usize,
    out_dir: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = parse_spec_str(spec_toml).map_err(py_err)?;
    let summaries = py
        .detach(|| {
            let results = run_experiment(&spec, jobs)?;
            match out_dir {
                Some(dir) => emit_all(&results, &dir, &spec.emit),
                None => Ok(summarize(&results)),
            }
        })
        .map_err(py_err)?;
    summaries.iter().map(|s| summary_dict(py, s)).collect()
}

/// Runs a self-check suite and returns `(passed, report_json)`.
#[pyfunction]
fn verify(py: Python<'_>, suite: &str) -> PyResult<(bool, String)> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let report = py.detach(|| run_suite(suite)).map_err(py_err)?;
    let json = serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((report.passed, json))
}

#[pymodule]
fn pyalphamatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(alpha_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(rho_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(beta_weights, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_alpha_barycenter, m)?)?;
    m.add_function(wrap_pyfunction!(barycenter_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_update, m)?)?;
    m.add_function(wrap_pyfunction!(make_two_moons, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_spec, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyRunResult>()?;
    Ok(())
}
