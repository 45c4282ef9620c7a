use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alphamatch::data::to_csv;
use alphamatch::harness::{emit_all, parse_spec, run_experiment, ExperimentSpec, Overrides};
use alphamatch::trainers::Method;
use alphamatch::verify::{run_suite, Suite, SuiteReport};

#[derive(Parser)]
#[command(
    name = "alphamatch",
    version,
    about = "Alpha-divergence semi-supervised learning experiments",
    allow_negative_numbers = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trainer in a spec over its seeds and write results.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Parallel runs; 0 picks one per run, capped at the core count.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run a self-check suite (barycenter, gradients, monotonicity, limits or all).
    Verify {
        suite: String,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the labeled, unlabeled and test splits of a spec's dataset as CSV.
    GenData {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n_aug: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Replace the spec's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            alpha: a.alpha,
            beta: a.beta,
            lambda: a.lambda,
            n_aug: a.n_aug,
            tau: a.tau,
            seed: a.seed,
            method: a.method,
            epochs: a.epochs,
            out: a.out,
        }
    }
}

const EXIT_INVALID: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;
const EXIT_ALL_ABORTED: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { spec, overrides, jobs } => run(&spec, overrides.into(), jobs),
        Command::Verify { suite, report } => verify(&suite, report.as_deref()),
        Command::GenData { spec, seed, out } => gen_data(&spec, seed, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> alphamatch::Result<ExperimentSpec> {
    let mut spec = parse_spec(path)?;
    spec.apply_overrides(overrides)?;
    Ok(spec)
}

fn run(path: &Path, overrides: Overrides, jobs: usize) -> alphamatch::Result<u8> {
    let spec = load(path, &overrides)?;
    let out_dir = spec.resolve_out_dir(overrides.out.as_deref());
    eprintln!(
        "running {} trainer(s) x {} seed(s) into {}",
        spec.trainers.len(),
        spec.seeds.len(),
        out_dir.display()
    );
    let results = run_experiment(&spec, jobs)?;
    let summaries = emit_all(&results, &out_dir, &spec.emit)?;
    for s in &summaries {
        let mean = s.mean_test_acc.map_or("-".to_string(), |m| format!("{m:.4}"));
        let std = s.std_test_acc.map_or("-".to_string(), |m| format!("{m:.4}"));
        eprintln!(
            "{:<28} test_acc {mean} ± {std}  ({} run(s), {} aborted)",
            s.name, s.runs, s.aborted
        );
    }
    if results.iter().all(|r| r.metrics.aborted_at.is_some()) {
        eprintln!("every run aborted");
        return Ok(EXIT_ALL_ABORTED);
    }
    Ok(0)
}

fn verify(which: &str, report_path: Option<&Path>) -> alphamatch::Result<u8> {
    let suites: Vec<Suite> = if which == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![which.parse()?]
    };
    let reports = suites.into_iter().map(run_suite).collect::<alphamatch::Result<Vec<SuiteReport>>>()?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    println!("{json}");
    if let Some(path) = report_path {
        std::fs::write(path, format!("{json}\n"))?;
    }
    for r in &reports {
        eprintln!("{}: {}", r.suite.name(), if r.passed { "pass" } else { "FAIL" });
    }
    Ok(if reports.iter().all(|r| r.passed) { 0 } else { EXIT_VERIFY_FAILED })
}

fn gen_data(path: &Path, seed: Option<u64>, out: Option<&Path>) -> alphamatch::Result<u8> {
    let spec = parse_spec(path)?;
    let seed = seed.unwrap_or(spec.seeds[0]);
    let split = spec.dataset.build(seed)?;
    let dir = spec.resolve_out_dir(out);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("labeled.csv"), to_csv(&split.labeled.xs, Some(split.labeled.ys.as_slice())))?;
    std::fs::write(dir.join("unlabeled.csv"), to_csv(&split.unlabeled.xs, None))?;
    std::fs::write(dir.join("test.csv"), to_csv(&split.test.xs, Some(split.test.ys.as_slice())))?;
    eprintln!(
        "wrote {} labeled, {} unlabeled, {} test points to {}",
        split.labeled.len(),
        split.unlabeled.len(),
        split.test.len(),
        dir.display()
    );
    Ok(0)
}
