//! Classification metrics and experiment-matrix aggregation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{Provenance, WindowedDataset};
use crate::window::WindowRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self)
    }
}

impl core::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean of precision and recall; zero when there are no true
/// positives. Computed as `2tp / (2tp + fp + fn)`, a single rounding.
pub fn f1(c: &ConfusionCounts) -> f64 {
    if c.tp == 0 {
        return 0.0;
    }
    (2 * c.tp) as f64 / (2 * c.tp + c.fp + c.fn_) as f64
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("prediction failed on example {index} (video segment {}, frame {}): {message}", .provenance.segment, .provenance.center)]
pub struct ScoreError {
    pub index: usize,
    pub provenance: Provenance,
    pub message: String,
}

/// Tallies a predictor over every example of `data`.
pub fn score<E: core::fmt::Display>(
    mut predict: impl FnMut(WindowRef<'_>) -> Result<bool, E>,
    data: &WindowedDataset,
) -> Result<ConfusionCounts, ScoreError> {
    let mut counts = ConfusionCounts::default();
    for i in 0..data.len() {
        let p = predict(data.window(i)).map_err(|e| ScoreError {
            index: i,
            provenance: data.provenance(i),
            message: alloc::format!("{e}"),
        })?;
        counts.record(p, data.label(i));
    }
    Ok(counts)
}

/// Default data fractions of the efficiency experiment.
pub const FRACTIONS: [f64; 4] = [0.01, 0.1, 0.5, 1.0];

/// Outcome of one (model, fraction, sample seed, run seed) job.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellRun {
    pub task: String,
    pub model: String,
    pub fraction: f64,
    pub sample_seed: u64,
    pub run_seed: u64,
    /// Test-set counts, or the failure message.
    pub outcome: Result<ConfusionCounts, String>,
}

impl CellRun {
    pub fn f1(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(f1)
    }
}

/// Mean and sample standard deviation of F1 over the successful repeats of
/// one (task, model, fraction) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSummary {
    pub task: String,
    pub model: String,
    pub fraction: f64,
    pub mean_f1: f64,
    pub sd_f1: f64,
    pub runs: usize,
    pub failures: usize,
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

fn fraction_key(f: f64) -> u64 {
    f.to_bits()
}

/// Groups runs by (task, model, fraction), preserving first-seen order.
pub fn summarize(runs: &[CellRun]) -> Vec<CellSummary> {
    let mut order: Vec<(String, String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, String, u64), Vec<&CellRun>> = BTreeMap::new();
    for r in runs {
        let key = (r.task.clone(), r.model.clone(), fraction_key(r.fraction));
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &groups[&key];
            let f1s: Vec<f64> = rs.iter().filter_map(|r| r.f1()).collect();
            let (mean_f1, sd_f1) = mean_sd(&f1s);
            CellSummary {
                task: key.0,
                model: key.1,
                fraction: f64::from_bits(key.2),
                mean_f1,
                sd_f1,
                runs: f1s.len(),
                failures: rs.len() - f1s.len(),
            }
        })
        .collect()
}

/// Mean F1 per (model, fraction) computed two ways across tasks/annotators:
/// averaging repeats first, or pooling every repeat of every task.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcrossTasks {
    pub model: String,
    pub fraction: f64,
    /// Mean over tasks of each task's mean over repeats.
    pub mean_of_task_means: f64,
    /// Mean over every successful repeat of every task.
    pub pooled_mean: f64,
}

pub fn across_tasks(runs: &[CellRun]) -> Vec<AcrossTasks> {
    let cells = summarize(runs);
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut task_means: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    let mut pooled: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for c in &cells {
        let key = (c.model.clone(), fraction_key(c.fraction));
        if !task_means.contains_key(&key) {
            order.push(key.clone());
        }
        if c.runs > 0 {
            task_means.entry(key).or_default().push(c.mean_f1);
        } else {
            task_means.entry(key).or_default();
        }
    }
    for r in runs {
        if let Some(v) = r.f1() {
            pooled
                .entry((r.model.clone(), fraction_key(r.fraction)))
                .or_default()
                .push(v);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let tm = mean_sd(&task_means[&key]).0;
            let pm = mean_sd(pooled.get(&key).map(Vec::as_slice).unwrap_or(&[])).0;
            AcrossTasks {
                model: key.0,
                fraction: f64::from_bits(key.1),
                mean_of_task_means: tm,
                pooled_mean: pm,
            }
        })
        .collect()
}
