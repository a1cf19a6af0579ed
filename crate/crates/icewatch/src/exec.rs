//! Parallel execution of experiment runs.
//!
//! Runs are keyed by pre-derived seeds and collected in seed order, so the
//! report does not depend on the thread count.

use icewatch_core::pipeline::{
    Experiment, ExperimentReport, PipelineError, ReengineeredExperiment, TraditionalExperiment,
};
use icewatch_core::record::LabeledDataset;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const THREADS_ENV: &str = "ICEWATCH_THREADS";

/// `ICEWATCH_THREADS`, where 0 or unset means one thread per core.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
    }
}

pub fn execute<E>(experiment: &E, threads: usize) -> Result<ExperimentReport, PipelineError>
where
    E: Experiment + Sync,
    E::Run: Send,
{
    let seeds = experiment.seeds();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    let runs = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| experiment.run(s))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(experiment.report(&runs))
}

/// Every configured variant over one train/test pair, rows in
/// traditional-then-reengineered order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    threads: usize,
) -> Result<ExperimentReport, CliError> {
    let mut report: Option<ExperimentReport> = None;
    let mut add = |r: ExperimentReport| -> Result<(), CliError> {
        match report.as_mut() {
            None => report = Some(r),
            Some(acc) => acc.merge(r)?,
        }
        Ok(())
    };
    if let Some(p) = &cfg.traditional {
        add(execute(
            &TraditionalExperiment::new(train, test, p)?,
            threads,
        )?)?;
    }
    if let Some(p) = &cfg.reengineered {
        add(execute(
            &ReengineeredExperiment::new(train, test, p)?,
            threads,
        )?)?;
    }
    let mut report = report.ok_or_else(|| CliError::config("no pipeline configured"))?;
    report.provenance.config_hash = Some(cfg.hash());
    Ok(report)
}
