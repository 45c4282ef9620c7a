use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::run::RunResult;
use crate::harness::spec::EmitFlags;
use crate::trainers::{sample_std, Method};

pub const RUN_CSV_HEADER: &str = "epoch,test_acc,train_acc,sup_loss,consistency,objective,lr";
pub const SUMMARY_CSV_HEADER: &str =
    "name,method,alpha,beta,lambda,n_aug,runs,mean_test_acc,std_test_acc,aborted,abort_epochs";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub final_test_acc: Option<f64>,
    pub aborted_at: Option<usize>,
}

/// Aggregate over the seeds of one trainer. Mean and std use completed runs only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainerSummary {
    pub name: String,
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub n_aug: usize,
    pub runs: usize,
    pub mean_test_acc: Option<f64>,
    pub std_test_acc: Option<f64>,
    pub aborted: usize,
    pub abort_epochs: Vec<usize>,
    pub seeds: Vec<SeedOutcome>,
}

pub fn summarize(results: &[RunResult]) -> Vec<TrainerSummary> {
    let mut out: Vec<TrainerSummary> = Vec::new();
    let mut current: Option<usize> = None;
    for r in results {
        if current != Some(r.trainer_index) {
            current = Some(r.trainer_index);
            out.push(TrainerSummary {
                name: r.label.clone(),
                method: r.config.method,
                alpha: r.config.alpha,
                beta: r.config.beta,
                lambda: r.config.lambda,
                n_aug: r.config.n_aug,
                runs: 0,
                mean_test_acc: None,
                std_test_acc: None,
                aborted: 0,
                abort_epochs: Vec::new(),
                seeds: Vec::new(),
            });
        }
        let s = out.last_mut().expect("pushed above");
        s.runs += 1;
        let aborted_at = r.metrics.aborted_at;
        if let Some(e) = aborted_at {
            s.aborted += 1;
            s.abort_epochs.push(e);
        }
        s.seeds.push(SeedOutcome {
            seed: r.seed,
            final_test_acc: if aborted_at.is_some() { None } else { r.metrics.final_test_acc() },
            aborted_at,
        });
    }
    for s in &mut out {
        let accs: Vec<f64> = s.seeds.iter().filter_map(|o| o.final_test_acc).collect();
        if !accs.is_empty() {
            s.mean_test_acc = Some(accs.iter().sum::<f64>() / accs.len() as f64);
        }
        s.std_test_acc = sample_std(&accs);
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run_csv(result: &RunResult) -> String {
    let mut s = String::from(RUN_CSV_HEADER);
    s.push('\n');
    for e in &result.metrics.epochs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            e.epoch,
            e.test_acc,
            e.train_acc,
            e.sup_loss,
            e.consistency,
            opt(e.objective),
            e.lr
        );
    }
    s
}

pub fn summary_csv(summaries: &[TrainerSummary]) -> String {
    let mut s = String::from(SUMMARY_CSV_HEADER);
    s.push('\n');
    for t in summaries {
        let epochs: Vec<String> = t.abort_epochs.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            t.name,
            t.method,
            t.alpha,
            t.beta,
            t.lambda,
            t.n_aug,
            t.runs,
            opt(t.mean_test_acc),
            opt(t.std_test_acc),
            t.aborted,
            epochs.join(";")
        );
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn emit_csv(results: &[RunResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join("runs");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::with_capacity(results.len());
    for r in results {
        let path = dir.join(format!("{}_{}.csv", r.label, r.seed));
        write(&path, &run_csv(r))?;
        written.push(path);
    }
    Ok(written)
}

pub fn emit_summary(results: &[RunResult], out_dir: &Path, flags: &EmitFlags) -> Result<Vec<TrainerSummary>> {
    fs::create_dir_all(out_dir)?;
    let summaries = summarize(results);
    if flags.summary_csv {
        write(&out_dir.join("summary.csv"), &summary_csv(&summaries))?;
    }
    if flags.summary_json {
        let mut json = serde_json::to_string_pretty(&summaries)
            .map_err(|e| Error::Config(format!("cannot encode summary: {e}")))?;
        json.push('\n');
        write(&out_dir.join("summary.json"), &json)?;
    }
    Ok(summaries)
}

/// Writes everything the flags ask for and returns the per-trainer summaries.
pub fn emit_all(results: &[RunResult], out_dir: &Path, flags: &EmitFlags) -> Result<Vec<TrainerSummary>> {
    if flags.runs_csv {
        emit_csv(results, out_dir)?;
    }
    emit_summary(results, out_dir, flags)
}
