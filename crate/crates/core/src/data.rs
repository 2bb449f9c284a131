//! Trajectory tables, windowed datasets, splits and synthetic data.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::dsl::{Architecture, DslError, FeatureSpace, Node, NodeId, ParamBlock, ParameterStore, Prepared};
use crate::filter::MorletParams;
use crate::rng::{derive_seed, seeded};
use crate::signal::gaussian_smooth;
use crate::window::{ShapeError, Window, WindowRef};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("input rate {input} Hz is not a positive multiple of output rate {output} Hz")]
    IndivisibleRates { input: u32, output: u32 },
    #[error("window of {0} s is too short to hold a frame either side of the center")]
    WindowTooShort(f64),
    #[error("label column `{0}` not found")]
    UnknownLabel(String),
    #[error("video `{0}` assigned to more than one split")]
    OverlappingSplit(String),
    #[error("video `{0}` is not assigned to any split")]
    UnassignedVideo(String),
    #[error("video `{0}` listed in a split but not provided")]
    MissingVideo(String),
    #[error("tables disagree on {0}")]
    Inconsistent(&'static str),
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("could not draw a sample with a similar class balance after {0} tries")]
    ClassBalance(usize),
    #[error("dataset is empty")]
    Empty,
    #[error("table has {values} values for {frames} frames of {features} features")]
    Shape {
        values: usize,
        frames: usize,
        features: usize,
    },
    #[error("invalid synthetic spec: {0}")]
    Spec(&'static str),
    #[error(transparent)]
    Program(#[from] DslError),
}

/// Per-frame features and labels of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub video_id: String,
    pub fps: u32,
    pub features: FeatureSpace,
    /// Row-major `frames x features`.
    pub values: Vec<f64>,
    pub label_names: Vec<String>,
    /// One column per entry of `label_names`, one value per frame.
    pub labels: Vec<Vec<bool>>,
}

impl TrajectoryTable {
    pub fn new(
        video_id: impl Into<String>,
        fps: u32,
        features: FeatureSpace,
        values: Vec<f64>,
        label_names: Vec<String>,
        labels: Vec<Vec<bool>>,
    ) -> Result<Self, DataError> {
        let f = features.count();
        let frames = values.len().checked_div(f).unwrap_or(0);
        if f == 0 || values.len() != frames * f {
            return Err(DataError::Shape {
                values: values.len(),
                frames,
                features: f,
            });
        }
        if label_names.len() != labels.len() || labels.iter().any(|c| c.len() != frames) {
            return Err(DataError::Inconsistent("label column lengths"));
        }
        Ok(Self {
            video_id: video_id.into(),
            fps,
            features,
            values,
            label_names,
            labels,
        })
    }

    pub fn frames(&self) -> usize {
        self.values.len() / self.features.count()
    }

    pub fn feature_count(&self) -> usize {
        self.features.count()
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        let f = self.feature_count();
        &self.values[frame * f..(frame + 1) * f]
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        let f = self.feature_count();
        self.values.iter().skip(feature).step_by(f).copied().collect()
    }

    pub fn label_index(&self, name: &str) -> Result<usize, DataError> {
        self.label_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| DataError::UnknownLabel(name.into()))
    }
}

/// How windows are cut from a table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WindowConfig {
    /// Half-width of the window in seconds.
    pub window_seconds: f64,
    pub output_rate: u32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_seconds: 5.0,
            output_rate: 6,
        }
    }
}

/// Resolved window geometry at a given input rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGeometry {
    /// Input frames between consecutive window frames.
    pub stride: usize,
    /// Window frames either side of the center.
    pub half: usize,
}

impl WindowGeometry {
    pub fn new(input_rate: u32, config: &WindowConfig) -> Result<Self, DataError> {
        let output = config.output_rate;
        if output == 0 || input_rate == 0 || !input_rate.is_multiple_of(output) {
            return Err(DataError::IndivisibleRates {
                input: input_rate,
                output,
            });
        }
        let half = libm::floor(config.window_seconds * output as f64);
        if half.is_nan() || half < 1.0 {
            return Err(DataError::WindowTooShort(config.window_seconds));
        }
        Ok(Self {
            stride: (input_rate / output) as usize,
            half: half as usize,
        })
    }

    /// Frames per window, `2 * half + 1`.
    pub fn frames(&self) -> usize {
        2 * self.half + 1
    }

    /// Input frames from the center to either window edge.
    pub fn reach(&self) -> usize {
        self.half * self.stride
    }

    /// Centers whose windows lie fully inside a table of `frames` rows.
    pub fn valid_centers(&self, frames: usize) -> core::ops::Range<usize> {
        let r = self.reach();
        if frames <= 2 * r {
            return 0..0;
        }
        r..frames - r
    }

    /// Input frame indices read by the window centered at `center`.
    pub fn source_frames(&self, center: usize) -> impl Iterator<Item = usize> {
        let start = center - self.reach();
        let stride = self.stride;
        (0..self.frames()).map(move |t| start + t * stride)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

#[derive(Debug, Clone)]
struct Segment {
    video_id: String,
    values: Arc<Vec<f64>>,
}

/// Where an example came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    pub segment: u32,
    /// Center frame at the input rate.
    pub center: u32,
}

/// Per-frame examples: strided windows over shared feature tables.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    features: FeatureSpace,
    geometry: WindowGeometry,
    input_rate: u32,
    output_rate: u32,
    split: Split,
    segments: Vec<Segment>,
    examples: Vec<Provenance>,
    labels: Vec<bool>,
}

impl WindowedDataset {
    /// Dataset over explicitly materialized windows (stride 1, each window
    /// its own segment).
    pub fn from_windows(features: FeatureSpace, windows: Vec<Window>, labels: Vec<bool>) -> Result<Self, DataError> {
        let frames = windows.first().map(Window::frames).ok_or(DataError::Empty)?;
        if frames < 3 || frames % 2 == 0 {
            return Err(DataError::Inconsistent("window length must be odd"));
        }
        if windows.len() != labels.len() {
            return Err(DataError::Inconsistent("window and label counts"));
        }
        let mut segments = Vec::with_capacity(windows.len());
        let mut examples = Vec::with_capacity(windows.len());
        for (i, w) in windows.into_iter().enumerate() {
            if w.frames() != frames || w.features() != features.count() {
                return Err(DataError::Inconsistent("window shapes"));
            }
            segments.push(Segment {
                video_id: alloc::format!("w{i}"),
                values: Arc::new(w.as_slice().to_vec()),
            });
            examples.push(Provenance {
                segment: i as u32,
                center: ((frames - 1) / 2) as u32,
            });
        }
        Ok(Self {
            features,
            geometry: WindowGeometry {
                stride: 1,
                half: (frames - 1) / 2,
            },
            input_rate: 1,
            output_rate: 1,
            split: Split::Unassigned,
            segments,
            examples,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn frames(&self) -> usize {
        self.geometry.frames()
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.features
    }

    pub fn feature_count(&self) -> usize {
        self.features.count()
    }

    pub fn geometry(&self) -> WindowGeometry {
        self.geometry
    }

    pub fn input_rate(&self) -> u32 {
        self.input_rate
    }

    pub fn output_rate(&self) -> u32 {
        self.output_rate
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn window(&self, i: usize) -> WindowRef<'_> {
        let p = self.examples[i];
        let seg = &self.segments[p.segment as usize];
        let start = p.center as usize - self.geometry.reach();
        WindowRef::strided(
            &seg.values,
            self.features.count(),
            start,
            self.geometry.stride,
            self.geometry.frames(),
        )
        .expect("windows are validated at construction")
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.examples[i]
    }

    pub fn video_id(&self, p: Provenance) -> &str {
        &self.segments[p.segment as usize].video_id
    }

    /// Full row-major feature table of a source segment.
    pub fn segment_values(&self, segment: u32) -> &[f64] {
        &self.segments[segment as usize].values
    }

    pub fn video_ids(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.video_id.as_str()).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.labels.len() as f64
        }
    }

    /// Subset keeping the examples at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            examples: indices.iter().map(|&i| self.examples[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..self.clone()
        }
    }

    /// Concatenates datasets that share geometry and features.
    pub fn concat(parts: &[WindowedDataset]) -> Result<Self, DataError> {
        let first = parts.first().ok_or(DataError::Empty)?;
        let mut out = WindowedDataset {
            segments: Vec::new(),
            examples: Vec::new(),
            labels: Vec::new(),
            ..first.clone()
        };
        for p in parts {
            if p.geometry != first.geometry || p.features != first.features {
                return Err(DataError::Inconsistent("window geometry or features"));
            }
            let offset = out.segments.len() as u32;
            out.segments.extend(p.segments.iter().cloned());
            out.examples.extend(p.examples.iter().map(|e| Provenance {
                segment: e.segment + offset,
                center: e.center,
            }));
            out.labels.extend_from_slice(&p.labels);
        }
        Ok(out)
    }
}

/// Cuts one window per valid center frame, labelled by the center frame.
///
/// Centers closer than the window reach to either end of the video are
/// excluded.
pub fn make_windows(table: &TrajectoryTable, label: usize, config: &WindowConfig) -> Result<WindowedDataset, DataError> {
    let geometry = WindowGeometry::new(table.fps, config)?;
    let column = table
        .labels
        .get(label)
        .ok_or_else(|| DataError::UnknownLabel(alloc::format!("#{label}")))?;
    let centers = geometry.valid_centers(table.frames());
    let examples = centers
        .clone()
        .map(|c| Provenance {
            segment: 0,
            center: c as u32,
        })
        .collect();
    let labels = centers.map(|c| column[c]).collect();
    Ok(WindowedDataset {
        features: table.features.clone(),
        geometry,
        input_rate: table.fps,
        output_rate: config.output_rate,
        split: Split::Unassigned,
        segments: alloc::vec![Segment {
            video_id: table.video_id.clone(),
            values: Arc::new(table.values.clone()),
        }],
        examples,
        labels,
    })
}

/// Video-level train/validation/test split.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
}

/// Windows each video separately and assigns whole videos to splits.
pub fn split_videos(
    tables: &[TrajectoryTable],
    label_name: &str,
    config: &WindowConfig,
    train_ids: &[&str],
    val_ids: &[&str],
    test_ids: &[&str],
) -> Result<Splits, DataError> {
    let mut seen = BTreeSet::new();
    for id in train_ids.iter().chain(val_ids).chain(test_ids) {
        if !seen.insert(*id) {
            return Err(DataError::OverlappingSplit((*id).into()));
        }
        if !tables.iter().any(|t| t.video_id == *id) {
            return Err(DataError::MissingVideo((*id).into()));
        }
    }
    if let Some(t) = tables.iter().find(|t| !seen.contains(t.video_id.as_str())) {
        return Err(DataError::UnassignedVideo(t.video_id.clone()));
    }
    let first = tables.first().ok_or(DataError::Empty)?;
    for t in tables {
        if t.fps != first.fps {
            return Err(DataError::Inconsistent("frame rate"));
        }
        if t.features != first.features {
            return Err(DataError::Inconsistent("feature names"));
        }
    }
    let build = |ids: &[&str], split: Split| -> Result<WindowedDataset, DataError> {
        let mut parts = Vec::new();
        for id in ids {
            let t = tables.iter().find(|t| t.video_id == *id).expect("checked above");
            parts.push(make_windows(t, t.label_index(label_name)?, config)?);
        }
        if parts.is_empty() {
            // Keep geometry/features even for an empty split.
            let proto = make_windows(first, first.label_index(label_name)?, config)?;
            return Ok(proto.select(&[]).with_split(split));
        }
        Ok(WindowedDataset::concat(&parts)?.with_split(split))
    };
    Ok(Splits {
        train: build(train_ids, Split::Train)?,
        val: build(val_ids, Split::Val)?,
        test: build(test_ids, Split::Test)?,
    })
}

/// Subsampling of training data by contiguous blocks of center frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampleConfig {
    pub block_len: usize,
    /// Largest accepted relative deviation of the positive rate.
    pub balance_tolerance: f64,
    pub max_tries: usize,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        Self {
            block_len: 1000,
            balance_tolerance: 0.2,
            max_tries: 100,
        }
    }
}

/// Contiguous runs of at most `block_len` examples from the same segment.
fn blocks(data: &WindowedDataset, block_len: usize) -> Vec<core::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=data.len() {
        let boundary = i == data.len()
            || data.examples[i].segment != data.examples[i - 1].segment
            || data.examples[i].center != data.examples[i - 1].center + 1
            || i - start == block_len;
        if boundary {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Random blocks of contiguous center frames until at least `fraction` of
/// the examples are covered, retrying until the positive rate is within
/// tolerance of the full set's.
pub fn subsample_fraction(
    data: &WindowedDataset,
    fraction: f64,
    seed: u64,
    config: &SubsampleConfig,
) -> Result<WindowedDataset, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    if fraction == 1.0 {
        return Ok(data.clone());
    }
    if data.is_empty() {
        return Err(DataError::Empty);
    }
    let target = libm::ceil(fraction * data.len() as f64) as usize;
    let full_rate = data.positive_rate();
    let all = blocks(data, config.block_len.max(1));
    let mut rng = seeded(seed);
    for _ in 0..config.max_tries {
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.shuffle(&mut rng);
        let mut chosen = Vec::new();
        let mut count = 0;
        for b in order {
            if count >= target {
                break;
            }
            count += all[b].len();
            chosen.push(b);
        }
        chosen.sort_unstable();
        let indices: Vec<usize> = chosen.iter().flat_map(|&b| all[b].clone()).collect();
        let sample = data.select(&indices);
        let ok = if full_rate == 0.0 {
            sample.positive_rate() == 0.0
        } else {
            libm::fabs(sample.positive_rate() - full_rate) / full_rate <= config.balance_tolerance
        };
        if ok {
            return Ok(sample);
        }
    }
    Err(DataError::ClassBalance(config.max_tries))
}

/// Recipe for a synthetic video with labels from a planted program.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub video_id: String,
    pub features: FeatureSpace,
    pub frames: usize,
    pub fps: u32,
    pub window: WindowConfig,
    pub planted: Architecture,
    pub planted_params: ParameterStore,
    /// Probability of flipping each label, in `[0, 0.5)`.
    pub noise_rate: f64,
    /// Gaussian smoothing of the white-noise features, in input frames.
    pub smoothness: f64,
    pub label_rule: LabelRule,
}

/// How clean labels follow from the planted program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LabelRule {
    /// Positive when the program logit is positive.
    #[default]
    Logit,
    /// Positive when any filter-program term alone has a positive logit.
    AnyTerm,
}

/// Labels are named `label`; clean (pre-noise) labels are returned alongside.
#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub table: TrajectoryTable,
    pub clean_labels: Vec<bool>,
    /// Frames whose window reaches past a video edge; their labels come from
    /// a zero-padded evaluation and they are never used as centers.
    pub edge_frames: Vec<bool>,
}

fn label_of(prepared: &Prepared, window: WindowRef<'_>, rule: LabelRule) -> Result<bool, ShapeError> {
    match rule {
        LabelRule::Logit => Ok(prepared.logit(window)? > 0.0),
        LabelRule::AnyTerm => Ok(prepared.term_logits(window)?.iter().any(|&z| z > 0.0)),
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticVideo, DataError> {
    if !(0.0..0.5).contains(&spec.noise_rate) {
        return Err(DataError::Spec("noise rate must lie in [0, 0.5)"));
    }
    let f = spec.features.count();
    if f == 0 || spec.frames == 0 {
        return Err(DataError::Spec("need at least one feature and one frame"));
    }
    if spec.planted.features.count() != f {
        return Err(DataError::Spec("planted program feature count differs"));
    }
    let geometry = WindowGeometry::new(spec.fps, &spec.window)?;
    let mut feature_rng = seeded(derive_seed(spec.seed, 1));
    let mut noise_rng = seeded(derive_seed(spec.seed, 2));

    let scale = if spec.smoothness > 0.0 {
        // Unit variance after smoothing an i.i.d. unit-variance signal.
        let taps = crate::signal::gaussian_taps(spec.smoothness);
        let sum: f64 = taps.iter().sum();
        let sq: f64 = taps.iter().map(|t| t * t).sum();
        sum / libm::sqrt(sq)
    } else {
        1.0
    };
    let mut values = alloc::vec![0.0; spec.frames * f];
    for j in 0..f {
        let white: Vec<f64> = (0..spec.frames)
            .map(|_| StandardNormal.sample(&mut feature_rng))
            .collect();
        for (i, v) in gaussian_smooth(&white, spec.smoothness).into_iter().enumerate() {
            values[i * f + j] = v * scale;
        }
    }

    let frames = geometry.frames();
    let prepared = Prepared::new(&spec.planted, &spec.planted_params, frames)?;
    let valid = geometry.valid_centers(spec.frames);
    let mut clean = Vec::with_capacity(spec.frames);
    let mut edge = Vec::with_capacity(spec.frames);
    let reach = geometry.reach() as i64;
    for c in 0..spec.frames {
        let is_edge = !valid.contains(&c);
        let logit = if is_edge {
            let padded = Window::from_fn(frames, f, |t, j| {
                let src = c as i64 - reach + (t * geometry.stride) as i64;
                if src < 0 || src >= spec.frames as i64 {
                    0.0
                } else {
                    values[src as usize * f + j]
                }
            });
            label_of(&prepared, padded.view(), spec.label_rule)
        } else {
            let view = WindowRef::strided(&values, f, c - geometry.reach(), geometry.stride, frames)
                .expect("valid center");
            label_of(&prepared, view, spec.label_rule)
        }
        .map_err(DslError::from)?;
        clean.push(logit);
        edge.push(is_edge);
    }
    let noisy: Vec<bool> = clean
        .iter()
        .map(|&l| if noise_rng.random::<f64>() < spec.noise_rate { !l } else { l })
        .collect();
    let table = TrajectoryTable::new(
        spec.video_id.clone(),
        spec.fps,
        spec.features.clone(),
        values,
        alloc::vec![String::from("label")],
        alloc::vec![noisy],
    )?;
    Ok(SyntheticVideo {
        table,
        clean_labels: clean,
        edge_frames: edge,
    })
}

/// Single filter on feature 0: a narrow oscillating past lobe and a wide
/// future lobe, thresholded near the median.
pub fn planted_single(features: FeatureSpace) -> (Architecture, ParameterStore) {
    let arch = Architecture::single(features, &[0]);
    let mut p = ParameterStore::new();
    p.insert(
        NodeId(1),
        ParamBlock::morlet(&MorletParams {
            s1: 1.0,
            w1: 2.0,
            s2: 2.5,
            w2: 1.0,
        }),
    );
    p.insert(
        NodeId(2),
        ParamBlock::Affine {
            weights: alloc::vec![1.0],
            bias: -0.5,
        },
    );
    (arch, p)
}

/// Two filters on features 0 and 1, for [`LabelRule::AnyTerm`] labels.
/// Needs at least two features.
pub fn planted_two_mode(features: FeatureSpace) -> (Architecture, ParameterStore) {
    let arch = Architecture::new(
        features,
        Node::Disjunction {
            children: alloc::vec![
                Node::filter_program(Node::affine(&[0])),
                Node::filter_program(Node::affine(&[1])),
            ],
        },
    );
    let mut p = ParameterStore::new();
    let terms = [
        (
            2,
            MorletParams {
                s1: 1.0,
                w1: 2.0,
                s2: 2.5,
                w2: 1.0,
            },
        ),
        (
            5,
            MorletParams {
                s1: 2.0,
                w1: 0.7,
                s2: 1.0,
                w2: 3.0,
            },
        ),
    ];
    for (id, m) in terms {
        p.insert(NodeId(id), ParamBlock::morlet(&m));
        p.insert(
            NodeId(id + 1),
            ParamBlock::Affine {
                weights: alloc::vec![1.0],
                bias: -1.5,
            },
        );
    }
    (arch, p)
}

/// Videos generated from one planted program.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub videos: Vec<SyntheticVideo>,
    pub splits: Splits,
}

/// Generates `train + val + test` videos from `spec` (video `i` uses seed
/// `derive_seed(spec.seed, i)` and id `<video_id>-<i>`), windowed and split
/// in that order.
pub fn synthetic_task(spec: &SyntheticSpec, train: usize, val: usize, test: usize) -> Result<SyntheticTask, DataError> {
    let n = train + val + test;
    let mut videos = Vec::with_capacity(n);
    for i in 0..n {
        let one = SyntheticSpec {
            seed: derive_seed(spec.seed, 1000 + i as u64),
            video_id: alloc::format!("{}-{i}", spec.video_id),
            ..spec.clone()
        };
        videos.push(generate_synthetic(&one)?);
    }
    let tables: Vec<TrajectoryTable> = videos.iter().map(|v| v.table.clone()).collect();
    let ids: Vec<&str> = tables.iter().map(|t| t.video_id.as_str()).collect();
    let splits = split_videos(
        &tables,
        "label",
        &spec.window,
        &ids[..train],
        &ids[train..train + val],
        &ids[train + val..],
    )?;
    Ok(SyntheticTask { videos, splits })
}
