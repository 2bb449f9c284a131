//! Parallel execution and CSV reports of the data-efficiency matrix.

use rayon::prelude::*;
use tfsynth_core::data::Splits;
use tfsynth_core::eval::{across_tasks, summarize, CellRun};
use tfsynth_core::models::{matrix_jobs, run_cell, MatrixPlan};
use tfsynth_core::search::SynthesisConfig;

use crate::error::{CliError, Result};

/// Runs every job on a pool of `workers` threads (0 = all cores). Results
/// come back in job order whatever the scheduling.
pub fn run_matrix_parallel(
    plan: &MatrixPlan,
    tasks: &[(String, Splits)],
    config: &SynthesisConfig,
    workers: usize,
) -> Result<Vec<CellRun>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    let jobs = matrix_jobs(plan, tasks.len());
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (name, splits) = &tasks[job.task];
                run_cell(plan, job, name, splits, config)
            })
            .collect()
    }))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `task,model,fraction,sample_seed,run_seed,f1,precision,recall` plus an
/// `error` column that is empty for successful runs.
pub fn runs_csv(runs: &[CellRun]) -> String {
    let mut s = String::from("task,model,fraction,sample_seed,run_seed,f1,precision,recall,error\n");
    for r in runs {
        let (f1, p, rc, err) = match &r.outcome {
            Ok(c) => (Some(c.f1()), Some(c.precision()), Some(c.recall()), String::new()),
            Err(e) => (None, None, None, e.replace([',', '\n'], ";")),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.task,
            r.model,
            r.fraction,
            r.sample_seed,
            r.run_seed,
            opt(f1),
            opt(p),
            opt(rc),
            err
        ));
    }
    s
}

/// Per (task, model, fraction): mean and sample sd of F1.
pub fn summary_csv(runs: &[CellRun]) -> String {
    let mut s = String::from("task,model,fraction,mean_f1,sd_f1,runs,failures\n");
    for c in summarize(runs) {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.task, c.model, c.fraction, c.mean_f1, c.sd_f1, c.runs, c.failures
        ));
    }
    s
}

/// Both averaging orders across tasks.
pub fn across_csv(runs: &[CellRun]) -> String {
    let mut s = String::from("model,fraction,mean_of_task_means,pooled_mean\n");
    for a in across_tasks(runs) {
        s.push_str(&format!("{},{},{},{}\n", a.model, a.fraction, a.mean_of_task_means, a.pooled_mean));
    }
    s
}
