use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::spec::ExperimentSpec;
use crate::trainers::{train, RunMetrics, TrainerConfig};

/// One (trainer, seed) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trainer_index: usize,
    pub label: String,
    pub config: TrainerConfig,
    pub seed: u64,
    pub metrics: RunMetrics,
}

/// Runs every trainer on every seed, `jobs` at a time. With `jobs = 0` the
/// pool has one worker per run, capped at the available cores.
/// Results come back ordered by trainer, then by position in `seeds`,
/// regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let tasks: Vec<(usize, u64)> = (0..spec.trainers.len())
        .flat_map(|t| spec.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let jobs = if jobs == 0 {
        let cores = std::thread::available_parallelism().map_or(1, usize::from);
        tasks.len().min(cores)
    } else {
        jobs
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(t, seed)| {
                let mut config = spec.trainers[t].clone();
                config.seed = seed;
                let split = spec.dataset.build(seed)?;
                let metrics = train(&config, &split)?;
                Ok(RunResult {
                    trainer_index: t,
                    label: config.label(),
                    config,
                    seed,
                    metrics,
                })
            })
            .collect()
    })
}
