//! Uniform fitting and scoring of every model family, and the
//! data-efficiency matrix built on top of it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::baselines::{bank_rows, conv_fit, conv_forward, tree_fit, tree_predict, ConvModel, TreeError, TreeModel};
use crate::data::{subsample_fraction, DataError, Splits, SubsampleConfig, WindowedDataset};
use crate::dsl::{Architecture, HoleType, ParameterStore, Prepared};
use crate::eval::{score, CellRun, ConfusionCounts, FRACTIONS};
use crate::rng::derive_seed;
use crate::search::{synthesize_disjunction_traced, SearchError, Synthesis, SynthesisConfig, TraceRecord};
use crate::train::{TrainError, TrainReport};

/// Model family named on the command line: `morlet`, `disjunction:k`,
/// `conv` or `tree:depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    Morlet,
    Disjunction(usize),
    Conv,
    Tree(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown model `{0}` (expected morlet, disjunction:k, conv or tree:depth)")]
    Parse(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("scoring failed: {0}")]
    Score(String),
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Morlet => f.write_str("morlet"),
            ModelSpec::Disjunction(k) => write!(f, "disjunction:{k}"),
            ModelSpec::Conv => f.write_str("conv"),
            ModelSpec::Tree(d) => write!(f, "tree:{d}"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::Parse(s.to_string());
        let arg = |rest: &str| rest.parse::<usize>().map_err(|_| bad());
        match s.split_once(':') {
            None if s == "morlet" => Ok(ModelSpec::Morlet),
            None if s == "conv" => Ok(ModelSpec::Conv),
            Some(("disjunction", k)) => match arg(k)? {
                0 => Err(bad()),
                k => Ok(ModelSpec::Disjunction(k)),
            },
            Some(("tree", d)) => match arg(d)? {
                d @ 1..=5 => Ok(ModelSpec::Tree(d)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Program {
        arch: Architecture,
        params: ParameterStore,
    },
    Conv(ConvModel),
    Tree(TreeModel),
}

impl FittedModel {
    /// Test-style counts of this model on every example of `data`.
    pub fn confusion(&self, data: &WindowedDataset) -> Result<ConfusionCounts, ModelError> {
        let err = |e: crate::eval::ScoreError| ModelError::Score(format!("example {}: {}", e.index, e.message));
        match self {
            FittedModel::Program { arch, params } => {
                let prepared = Prepared::new(arch, params, data.frames()).map_err(|e| ModelError::Score(e.to_string()))?;
                score(|w| prepared.predict(w), data).map_err(err)
            }
            FittedModel::Conv(m) => score(|w| conv_forward(m, w).map(|z| z > 0.0), data).map_err(err),
            FittedModel::Tree(m) => {
                let bank = bank_rows(data);
                let mut c = ConfusionCounts::default();
                for i in 0..data.len() {
                    c.record(tree_predict(m, bank.row(i)), data.label(i));
                }
                Ok(c)
            }
        }
    }
}

/// A fitted model with whatever the fit produced along the way.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: FittedModel,
    pub report: Option<TrainReport>,
    pub synthesis: Option<Synthesis>,
}

/// Fits `spec` on `train` (validation data drives early stopping and the
/// search). Program searches start from a filter-program hole; disjunctions
/// are grown stage by stage.
pub fn fit_model(
    spec: ModelSpec,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
    sink: impl FnMut(&TraceRecord),
) -> Result<ModelFit, ModelError> {
    match spec {
        ModelSpec::Morlet | ModelSpec::Disjunction(_) => {
            let k = if let ModelSpec::Disjunction(k) = spec { k } else { 1 };
            let mut cfg = config.clone();
            cfg.search.root = HoleType::FilterProgram;
            let s = synthesize_disjunction_traced(k, train, val, &cfg, sink)?;
            Ok(ModelFit {
                model: FittedModel::Program {
                    arch: s.arch.clone(),
                    params: s.params.clone(),
                },
                report: Some(s.report.clone()),
                synthesis: Some(s),
            })
        }
        ModelSpec::Conv => {
            let (m, report) = conv_fit(train, val, &config.train)?;
            Ok(ModelFit {
                model: FittedModel::Conv(m),
                report: Some(report),
                synthesis: None,
            })
        }
        ModelSpec::Tree(depth) => {
            let bank = bank_rows(train);
            let m = tree_fit(&bank.values, bank.width(), train.labels(), depth)?;
            Ok(ModelFit {
                model: FittedModel::Tree(m),
                report: None,
                synthesis: None,
            })
        }
    }
}

/// Models x fractions x sample seeds x run seeds, on each task.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPlan {
    pub models: Vec<ModelSpec>,
    pub fractions: Vec<f64>,
    pub sample_seeds: Vec<u64>,
    pub run_seeds: Vec<u64>,
    pub subsample: SubsampleConfig,
    pub seed: u64,
}

impl Default for MatrixPlan {
    fn default() -> Self {
        Self {
            models: alloc::vec![ModelSpec::Morlet, ModelSpec::Conv, ModelSpec::Tree(1), ModelSpec::Tree(5)],
            fractions: FRACTIONS.to_vec(),
            sample_seeds: alloc::vec![0, 1, 2],
            run_seeds: alloc::vec![0, 1, 2],
            subsample: SubsampleConfig::default(),
            seed: 0,
        }
    }
}

/// One cell repeat; indices refer to the plan and task list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellJob {
    pub task: usize,
    pub model: usize,
    pub fraction: f64,
    pub sample_seed: u64,
    pub run_seed: u64,
}

/// Jobs in report order: task, model, fraction, sample seed, run seed.
pub fn matrix_jobs(plan: &MatrixPlan, tasks: usize) -> Vec<CellJob> {
    let mut jobs = Vec::new();
    for task in 0..tasks {
        for model in 0..plan.models.len() {
            for &fraction in &plan.fractions {
                for &sample_seed in &plan.sample_seeds {
                    for &run_seed in &plan.run_seeds {
                        jobs.push(CellJob {
                            task,
                            model,
                            fraction,
                            sample_seed,
                            run_seed,
                        });
                    }
                }
            }
        }
    }
    jobs
}

/// Runs one job; failures are captured in the outcome.
pub fn run_cell(plan: &MatrixPlan, job: &CellJob, task: &str, splits: &Splits, config: &SynthesisConfig) -> CellRun {
    let spec = plan.models[job.model];
    let outcome = (|| {
        let sample_seed = derive_seed(plan.seed, 0x5a00 + job.sample_seed);
        let train = subsample_fraction(&splits.train, job.fraction, sample_seed, &plan.subsample)?;
        let run_seed = derive_seed(plan.seed, 0x7a00 + job.run_seed);
        let mut cfg = config.clone();
        cfg.search.seed = run_seed;
        cfg.train.seed = run_seed;
        let fit = fit_model(spec, &train, &splits.val, &cfg, |_: &TraceRecord| {})?;
        fit.model.confusion(&splits.test)
    })()
    .map_err(|e: ModelError| e.to_string());
    CellRun {
        task: task.to_string(),
        model: spec.to_string(),
        fraction: job.fraction,
        sample_seed: job.sample_seed,
        run_seed: job.run_seed,
        outcome,
    }
}

/// Every job of the plan, one after another.
pub fn run_matrix(plan: &MatrixPlan, tasks: &[(String, Splits)], config: &SynthesisConfig) -> Vec<CellRun> {
    matrix_jobs(plan, tasks.len())
        .iter()
        .map(|job| {
            let (name, splits) = &tasks[job.task];
            run_cell(plan, job, name, splits, config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for s in ["morlet", "disjunction:3", "conv", "tree:1", "tree:5"] {
            assert_eq!(s.parse::<ModelSpec>().unwrap().to_string(), s);
        }
        for s in ["", "tree:0", "tree:6", "disjunction:0", "disjunction", "cnn", "tree:x"] {
            assert!(s.parse::<ModelSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn job_count() {
        let plan = MatrixPlan::default();
        assert_eq!(matrix_jobs(&plan, 2).len(), 2 * 4 * 4 * 3 * 3);
        let one = MatrixPlan {
            models: alloc::vec![ModelSpec::Conv],
            fractions: alloc::vec![1.0],
            sample_seeds: alloc::vec![0],
            run_seeds: alloc::vec![0],
            ..Default::default()
        };
        assert_eq!(matrix_jobs(&one, 1).len(), 1);
    }
}
