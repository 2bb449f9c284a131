//! The subcommands. Each writes its artifacts under the output directory
//! and returns a one-line summary for the terminal.
//!
//! Artifacts are deterministic given the configuration and seed, except
//! `timing.jsonl`, which records wall-clock times of search events.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tfsynth_core::baselines::{ConvModel, TreeModel, BANK_ORDERS, BANK_SIGMAS};
use tfsynth_core::data::{Splits, WindowedDataset};
use tfsynth_core::dsl::architecture_text;
use tfsynth_core::eval::ConfusionCounts;
use tfsynth_core::models::{fit_model, FittedModel, ModelSpec};
use tfsynth_core::search::TraceRecord;

use crate::config::{Overrides, Resolved, RunConfig};
use crate::csvio::export_csv;
use crate::document::ProgramDocument;
use crate::error::{CliError, Result};
use crate::export::export_filters;
use crate::matrix::{across_csv, run_matrix_parallel, runs_csv, summary_csv};
use crate::{write_json, write_text};

pub const BASELINE_VERSION: u32 = 1;

/// Fitted baseline, as written by `train-baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineDocument {
    Conv {
        version: u32,
        features: Vec<String>,
        model: ConvModel,
    },
    Tree {
        version: u32,
        features: Vec<String>,
        /// Names of the feature-bank columns the splits index.
        bank: Vec<String>,
        model: TreeModel,
    },
}

/// Loads and validates a configuration file.
pub fn load_config(path: &Path, o: &Overrides) -> Result<Resolved> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    RunConfig::load(path)?.resolve(&base, o)
}

fn counts_json(c: &ConfusionCounts) -> serde_json::Value {
    serde_json::json!({
        "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn_,
        "precision": c.precision(), "recall": c.recall(), "f1": c.f1(),
    })
}

/// The output directory is left out so reruns elsewhere compare equal.
fn write_resolved(r: &Resolved, out: &Path) -> Result<()> {
    let mut c = r.config.clone();
    c.out = None;
    write_text(&out.join("resolved_config.toml"), &c.to_toml())
}

/// Generates synthetic videos, their sidecars, the planted program and a
/// config that reads the generated files back.
pub fn gen_synthetic(r: &Resolved) -> Result<String> {
    let out = r.out_dir()?;
    let task = r.synthetic_task()?;
    let spec = r.synthetic_spec()?;
    for v in &task.videos {
        export_csv(&v.table, &out)?;
    }
    let doc = ProgramDocument::new(&spec.planted, &spec.planted_params, task.splits.train.frames(), spec.window.output_rate);
    doc.save(&out.join("planted_program.json"))?;

    let s = r.config.synthetic.as_ref().expect("synthetic_task checked the section");
    let ids: Vec<String> = task.videos.iter().map(|v| v.table.video_id.clone()).collect();
    let (train, rest) = ids.split_at(s.train_videos);
    let (val, test) = rest.split_at(s.val_videos);
    let mut cfg = r.config.clone();
    cfg.synthetic = None;
    cfg.out = None;
    cfg.data = Some(crate::config::DataSection {
        dir: PathBuf::from("."),
        train: train.to_vec(),
        val: val.to_vec(),
        test: test.to_vec(),
    });
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    write_resolved(r, &out)?;
    Ok(format!("wrote {} videos to {}", ids.len(), out.display()))
}

fn trace_jsonl(trace: &[TraceRecord]) -> String {
    trace
        .iter()
        .map(|t| serde_json::to_string(t).expect("trace records serialize") + "\n")
        .collect()
}

/// Searches for a program (`morlet` or `disjunction:k`).
pub fn synth(r: &Resolved) -> Result<String> {
    let out = r.out_dir()?;
    let spec = r.model_spec()?;
    if !matches!(spec, ModelSpec::Morlet | ModelSpec::Disjunction(_)) {
        return Err(CliError::Validation(format!("synth builds programs; use train-baseline for `{spec}`")));
    }
    let splits = r.splits(&r.config.label_column)?;
    let cfg = r.synthesis_config()?;
    write_resolved(r, &out)?;

    let start = Instant::now();
    let mut timing = String::new();
    let fit = fit_model(spec, &splits.train, &splits.val, &cfg, |t: &TraceRecord| {
        let event = if t.expanded { "expanded" } else { "visited" };
        timing.push_str(&format!(
            "{{\"id\":{},\"event\":\"{event}\",\"elapsed_ms\":{:.3}}}\n",
            t.id,
            start.elapsed().as_secs_f64() * 1e3
        ));
    });
    write_text(&out.join("timing.jsonl"), &timing)?;
    let fit = fit?;
    let s = fit.synthesis.as_ref().expect("program models come from a search");
    write_text(&out.join("trace.jsonl"), &trace_jsonl(&s.trace))?;
    write_json(&out.join("train_report.json"), &s.report)?;
    let doc = ProgramDocument::new(&s.arch, &s.params, splits.train.frames(), splits.train.output_rate());
    doc.save(&out.join("program.json"))?;
    let test = fit.model.confusion(&splits.test)?;
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({
            "model": spec.to_string(),
            "architecture": architecture_text(&s.arch),
            "program": doc.text,
            "objective": s.objective,
            "structural_cost": s.structural_cost,
            "val_f1": s.val_f1,
            "nodes": s.trace.len(),
            "test": counts_json(&test),
        }),
    )?;
    Ok(format!("{}  (val F1 {:.4}, test F1 {:.4})", doc.text, s.val_f1, test.f1()))
}

/// Fits `conv` or `tree:depth`.
pub fn train_baseline(r: &Resolved) -> Result<String> {
    let out = r.out_dir()?;
    let spec = r.model_spec()?;
    let splits = r.splits(&r.config.label_column)?;
    let features = splits.train.feature_space().names.clone();
    let cfg = r.synthesis_config()?;
    write_resolved(r, &out)?;
    let fit = match spec {
        ModelSpec::Conv | ModelSpec::Tree(_) => fit_model(spec, &splits.train, &splits.val, &cfg, |_: &TraceRecord| {})?,
        _ => return Err(CliError::Validation(format!("train-baseline fits conv or tree models; use synth for `{spec}`"))),
    };
    let doc = match &fit.model {
        FittedModel::Conv(m) => BaselineDocument::Conv {
            version: BASELINE_VERSION,
            features,
            model: m.clone(),
        },
        FittedModel::Tree(m) => BaselineDocument::Tree {
            version: BASELINE_VERSION,
            bank: bank_names(&features),
            features,
            model: m.clone(),
        },
        FittedModel::Program { .. } => unreachable!("baseline specs never produce programs"),
    };
    write_json(&out.join("model.json"), &doc)?;
    if let Some(rep) = &fit.report {
        write_json(&out.join("train_report.json"), rep)?;
    }
    let test = fit.model.confusion(&splits.test)?;
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({ "model": spec.to_string(), "test": counts_json(&test) }),
    )?;
    Ok(format!("{spec}: test F1 {:.4}", test.f1()))
}

fn bank_names(features: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for f in features {
        for o in BANK_ORDERS {
            for s in BANK_SIGMAS {
                out.push(format!("{f}__d{o}__g{s}"));
            }
        }
    }
    out
}

/// Reads a program or baseline document as a fitted model.
pub fn load_model(path: &Path) -> Result<(FittedModel, Vec<String>, Option<usize>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e.to_string()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::input(path, e.to_string()))?;
    if value.get("architecture").is_some() {
        let doc = ProgramDocument::from_json(&text).map_err(|m| CliError::input(path, m))?;
        let names = doc.architecture.features.names.clone();
        let frames = doc.frames;
        let model = FittedModel::Program {
            params: doc.params(),
            arch: doc.architecture,
        };
        return Ok((model, names, Some(frames)));
    }
    let doc: BaselineDocument = serde_json::from_value(value).map_err(|e| CliError::input(path, e.to_string()))?;
    match doc {
        BaselineDocument::Conv { version, features, model } => {
            check_version(path, version)?;
            if model.weights.len() != model.frames * model.features || model.features != features.len() {
                return Err(CliError::input(path, "conv weights do not match frames x features"));
            }
            let frames = model.frames;
            Ok((FittedModel::Conv(model), features, Some(frames)))
        }
        BaselineDocument::Tree {
            version,
            features,
            bank,
            model,
        } => {
            check_version(path, version)?;
            if bank != bank_names(&features) {
                return Err(CliError::input(path, "feature bank names do not match the features"));
            }
            if model.splits().iter().any(|(f, t)| *f >= bank.len() || !t.is_finite()) {
                return Err(CliError::input(path, "tree splits reference unknown bank columns"));
            }
            Ok((FittedModel::Tree(model), features, None))
        }
    }
}

fn check_version(path: &Path, v: u32) -> Result<()> {
    if v != BASELINE_VERSION {
        return Err(CliError::input(path, format!("unsupported model version {v}")));
    }
    Ok(())
}

/// Scores a saved model on each split: `eval.csv` and `eval.json`.
pub fn eval(r: &Resolved, artifact: &Path) -> Result<String> {
    let out = r.out_dir()?;
    let (model, names, frames) = load_model(artifact)?;
    let splits = r.splits(&r.config.label_column)?;
    if splits.train.feature_space().names != names {
        return Err(CliError::Validation("model features differ from the data's features".into()));
    }
    if frames.is_some_and(|t| t != splits.train.frames()) {
        return Err(CliError::Validation("model window length differs from the configured window".into()));
    }
    let Splits { train, val, test } = &splits;
    let named: [(&str, &WindowedDataset); 3] = [("train", train), ("val", val), ("test", test)];
    let mut csv = String::from("split,tp,fp,tn,fn,precision,recall,f1\n");
    let mut json = serde_json::Map::new();
    for (name, data) in named {
        let c = model.confusion(data)?;
        csv.push_str(&format!(
            "{name},{},{},{},{},{},{},{}\n",
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            c.precision(),
            c.recall(),
            c.f1()
        ));
        json.insert(name.into(), counts_json(&c));
    }
    write_text(&out.join("eval.csv"), &csv)?;
    write_json(&out.join("eval.json"), &json)?;
    write_resolved(r, &out)?;
    let test_f1 = json["test"]["f1"].as_f64().unwrap_or(f64::NAN);
    Ok(format!("test F1 {test_f1:.4}"))
}

/// Models x fractions x seeds on every configured label column.
pub fn run_matrix(r: &Resolved) -> Result<String> {
    let out = r.out_dir()?;
    let plan = r.matrix_plan()?;
    let cfg = r.synthesis_config()?;
    let mut tasks = Vec::new();
    for label in r.matrix_tasks() {
        tasks.push((label.clone(), r.splits(&label)?));
    }
    write_resolved(r, &out)?;
    let runs = run_matrix_parallel(&plan, &tasks, &cfg, r.config.matrix.workers)?;
    write_text(&out.join("matrix.csv"), &runs_csv(&runs))?;
    write_text(&out.join("summary.csv"), &summary_csv(&runs))?;
    write_text(&out.join("across_tasks.csv"), &across_csv(&runs))?;
    write_json(&out.join("matrix_report.json"), &runs)?;
    let failed = runs.iter().filter(|r| r.outcome.is_err()).count();
    Ok(format!("{} runs, {failed} failed", runs.len()))
}

/// Writes every filter curve of a program document.
pub fn export_filter(program: &Path, out: &Path) -> Result<String> {
    let doc = ProgramDocument::load(program)?;
    let paths = export_filters(&doc, out)?;
    Ok(format!("wrote {} filter curves to {}", paths.len(), out.display()))
}
