//! TOML run configuration.
//!
//! Every field has a default, so the file only lists what differs. The
//! resolved form (defaults filled in, command-line overrides applied and
//! component seeds derived from the global seed) is written next to each
//! run's outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tfsynth_core::data::{
    planted_single, planted_two_mode, synthetic_task, LabelRule, Splits, SyntheticSpec, SyntheticTask, WindowConfig,
};
use tfsynth_core::dsl::{Architecture, FeatureSpace, ParameterStore, RuleCostTable};
use tfsynth_core::eval::FRACTIONS;
use tfsynth_core::models::{MatrixPlan, ModelSpec};
use tfsynth_core::rng::derive_seed;
use tfsynth_core::search::{SearchConfig, SynthesisConfig};
use tfsynth_core::train::TrainConfig;

use crate::csvio::ingest_csv;
use crate::document::ProgramDocument;
use crate::error::{CliError, Result};

/// Seed tags for the components driven by the global seed.
const SEARCH_SEED: u64 = 1;
const TRAIN_SEED: u64 = 2;
const SYNTHETIC_SEED: u64 = 3;
const MATRIX_SEED: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    pub seed: u64,
    pub label_column: String,
    /// `morlet`, `disjunction:k`, `conv` or `tree:depth`.
    pub model: String,
    pub out: Option<PathBuf>,
    pub window: WindowConfig,
    /// Rule cost overrides by rule name.
    pub costs: BTreeMap<String, f64>,
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub data: Option<DataSection>,
    pub synthetic: Option<SyntheticSection>,
    pub matrix: MatrixSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: "task".into(),
            seed: 0,
            label_column: "label".into(),
            model: "morlet".into(),
            out: None,
            window: WindowConfig::default(),
            costs: BTreeMap::new(),
            train: TrainConfig::default(),
            search: SearchConfig::default(),
            data: None,
            synthetic: None,
            matrix: MatrixSection::default(),
        }
    }
}

/// Videos on disk: `<dir>/<id>.csv` with sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Relative paths are taken from the config file's directory.
    pub dir: PathBuf,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Videos generated from a planted program, used when there is no
/// `[data]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    /// `single`, `two_mode`, or a path to a program document.
    pub planted: String,
    pub features: Vec<String>,
    pub frames: usize,
    pub fps: u32,
    pub noise_rate: f64,
    pub smoothness: f64,
    pub label_rule: LabelRule,
    pub video_prefix: String,
    pub train_videos: usize,
    pub val_videos: usize,
    pub test_videos: usize,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            planted: "single".into(),
            features: vec!["a".into(), "b".into()],
            frames: 3000,
            fps: 30,
            noise_rate: 0.05,
            smoothness: 10.0,
            label_rule: LabelRule::Logit,
            video_prefix: "syn".into(),
            train_videos: 3,
            val_videos: 1,
            test_videos: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixSection {
    pub models: Vec<String>,
    pub fractions: Vec<f64>,
    pub sample_seeds: Vec<u64>,
    pub run_seeds: Vec<u64>,
    /// One task per label column (annotator); empty means `label_column`.
    pub label_columns: Vec<String>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for MatrixSection {
    fn default() -> Self {
        Self {
            models: vec!["morlet".into(), "conv".into(), "tree:1".into(), "tree:5".into()],
            fractions: FRACTIONS.to_vec(),
            sample_seeds: vec![0, 1, 2],
            run_seeds: vec![0, 1, 2],
            label_columns: Vec::new(),
            workers: 0,
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub label_column: Option<String>,
    pub model: Option<String>,
}

/// A validated configuration and the directory relative paths start from.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e.to_string()))?;
        Self::from_toml(&text).map_err(|m| CliError::input(path, m))
    }

    /// Applies overrides, derives component seeds and validates.
    pub fn resolve(mut self, base: &Path, o: &Overrides) -> Result<Resolved> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(l) = &o.label_column {
            self.label_column = l.clone();
        }
        if let Some(m) = &o.model {
            self.model = m.clone();
        }
        self.search.seed = derive_seed(self.seed, SEARCH_SEED);
        // Program models search single filters; disjunctions grow by stages.
        self.search.root = tfsynth_core::dsl::HoleType::FilterProgram;
        self.train.seed = derive_seed(self.seed, TRAIN_SEED);
        let r = Resolved {
            config: self,
            base: base.to_path_buf(),
        };
        r.validate()?;
        Ok(r)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl Resolved {
    fn validate(&self) -> Result<()> {
        let c = &self.config;
        self.model_spec()?;
        self.synthesis_config()?;
        for m in &c.matrix.models {
            m.parse::<ModelSpec>().map_err(|e| invalid(e.to_string()))?;
        }
        if c.matrix.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(invalid("matrix fractions must lie in (0, 1]"));
        }
        if c.window.output_rate == 0 || c.window.window_seconds.is_nan() || c.window.window_seconds <= 0.0 {
            return Err(invalid("window needs a positive length and output rate"));
        }
        match (&c.data, &c.synthetic) {
            (Some(d), _) => {
                let dir = self.path(&d.dir);
                for id in d.train.iter().chain(&d.val).chain(&d.test) {
                    let p = dir.join(format!("{id}.csv"));
                    if !p.is_file() {
                        return Err(invalid(format!("data file {} does not exist", p.display())));
                    }
                }
                if d.train.is_empty() || d.val.is_empty() {
                    return Err(invalid("data needs at least one training and one validation video"));
                }
            }
            (None, Some(s)) => {
                if !(0.0..0.5).contains(&s.noise_rate) {
                    return Err(invalid("synthetic noise rate must lie in [0, 0.5)"));
                }
                if s.train_videos == 0 || s.val_videos == 0 {
                    return Err(invalid("synthetic data needs training and validation videos"));
                }
                if !matches!(s.planted.as_str(), "single" | "two_mode") && !self.path(Path::new(&s.planted)).is_file() {
                    return Err(invalid(format!("planted program {} does not exist", s.planted)));
                }
            }
            (None, None) => return Err(invalid("config needs a [data] or [synthetic] section")),
        }
        Ok(())
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        self.config.model.parse().map_err(|e: tfsynth_core::models::ModelError| invalid(e.to_string()))
    }

    pub fn synthesis_config(&self) -> Result<SynthesisConfig> {
        let c = &self.config;
        let costs = RuleCostTable::with_overrides(c.costs.iter().map(|(k, v)| (k.as_str(), *v)))?;
        c.search.validate()?;
        c.train.validate()?;
        Ok(SynthesisConfig {
            search: c.search.clone(),
            train: c.train.clone(),
            costs,
            init: Default::default(),
        })
    }

    pub fn matrix_plan(&self) -> Result<MatrixPlan> {
        let m = &self.config.matrix;
        Ok(MatrixPlan {
            models: m
                .models
                .iter()
                .map(|s| s.parse().map_err(|e: tfsynth_core::models::ModelError| invalid(e.to_string())))
                .collect::<Result<_>>()?,
            fractions: m.fractions.clone(),
            sample_seeds: m.sample_seeds.clone(),
            run_seeds: m.run_seeds.clone(),
            subsample: Default::default(),
            seed: derive_seed(self.config.seed, MATRIX_SEED),
        })
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        self.config
            .out
            .as_ref()
            .map(|p| self.path(p))
            .ok_or_else(|| invalid("no output directory: pass --out or set `out`"))
    }

    /// The planted program of the synthetic section.
    pub fn planted(&self, features: FeatureSpace) -> Result<(Architecture, ParameterStore)> {
        let s = self.config.synthetic.as_ref().ok_or_else(|| invalid("config has no [synthetic] section"))?;
        match s.planted.as_str() {
            "single" => Ok(planted_single(features)),
            "two_mode" if features.count() >= 2 => Ok(planted_two_mode(features)),
            "two_mode" => Err(invalid("the two-mode program needs two features")),
            path => {
                let doc = ProgramDocument::load(&self.path(Path::new(path)))?;
                if doc.architecture.features.count() != features.count() {
                    return Err(invalid("planted program feature count differs from the synthetic features"));
                }
                let mut arch = doc.architecture.clone();
                arch.features = features;
                Ok((arch, doc.params()))
            }
        }
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let s = self.config.synthetic.as_ref().ok_or_else(|| invalid("config has no [synthetic] section"))?;
        let features = FeatureSpace::new(s.features.clone());
        let (planted, planted_params) = self.planted(features.clone())?;
        Ok(SyntheticSpec {
            seed: derive_seed(self.config.seed, SYNTHETIC_SEED),
            video_id: s.video_prefix.clone(),
            features,
            frames: s.frames,
            fps: s.fps,
            window: self.config.window,
            planted,
            planted_params,
            noise_rate: s.noise_rate,
            smoothness: s.smoothness,
            label_rule: s.label_rule,
        })
    }

    pub fn synthetic_task(&self) -> Result<SyntheticTask> {
        let s = self.config.synthetic.as_ref().ok_or_else(|| invalid("config has no [synthetic] section"))?;
        Ok(synthetic_task(&self.synthetic_spec()?, s.train_videos, s.val_videos, s.test_videos)?)
    }

    /// Train/validation/test windows for one label column.
    pub fn splits(&self, label: &str) -> Result<Splits> {
        let c = &self.config;
        match &c.data {
            Some(d) => {
                let dir = self.path(&d.dir);
                let mut tables = Vec::new();
                for id in d.train.iter().chain(&d.val).chain(&d.test) {
                    tables.push(ingest_csv(&dir.join(format!("{id}.csv")))?);
                }
                fn ids(v: &[String]) -> Vec<&str> {
                    v.iter().map(String::as_str).collect()
                }
                Ok(tfsynth_core::data::split_videos(
                    &tables,
                    label,
                    &c.window,
                    &ids(&d.train),
                    &ids(&d.val),
                    &ids(&d.test),
                )?)
            }
            None => {
                if label != "label" {
                    return Err(invalid(format!("synthetic videos have no label column `{label}`")));
                }
                Ok(self.synthetic_task()?.splits)
            }
        }
    }

    /// Label columns the matrix runs over.
    pub fn matrix_tasks(&self) -> Vec<String> {
        let m = &self.config.matrix;
        if m.label_columns.is_empty() {
            vec![self.config.label_column.clone()]
        } else {
            m.label_columns.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let mut c = RunConfig {
            synthetic: Some(SyntheticSection::default()),
            ..Default::default()
        };
        c.costs.insert("affine2".into(), 3.0);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn seeds_flow_from_the_global_seed() {
        let c = RunConfig {
            synthetic: Some(SyntheticSection::default()),
            ..Default::default()
        };
        let a = c.clone().resolve(Path::new("."), &Overrides::default()).unwrap();
        let b = c
            .resolve(
                Path::new("."),
                &Overrides {
                    seed: Some(5),
                    ..Default::default()
                },
            )
            .unwrap();
        assert_ne!(a.config.search.seed, b.config.search.seed);
        assert_ne!(a.config.train.seed, b.config.train.seed);
        assert_ne!(a.synthetic_spec().unwrap().seed, b.synthetic_spec().unwrap().seed);
    }

    #[test]
    fn validation_errors() {
        let base = Path::new(".");
        let none = Overrides::default();
        assert!(RunConfig::default().resolve(base, &none).is_err());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[train]\nlearning_rat = 0.1").is_err());
        let with = |text: &str| RunConfig::from_toml(&format!("{text}\n[synthetic]\n")).unwrap().resolve(base, &none);
        assert!(with("model = \"tree:9\"").is_err());
        assert!(with("[costs]\nmorlet = -1.0").is_err());
        assert!(with("[costs]\nlstm = 1.0").is_err());
        assert!(with("[search]\nmax_depth = 0").is_err());
        assert!(with("[train]\nlearning_rate = 0.0").is_err());
        assert!(with("").is_ok());
        let missing = RunConfig::from_toml("[data]\ndir = \"nowhere\"\ntrain = [\"a\"]\nval = [\"b\"]\ntest = []").unwrap();
        let e = missing.resolve(base, &none).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
