use alloc::vec::Vec;

use crate::data::WindowedDataset;
use crate::dsl::{Architecture, DslError, NodeId, ParamBlock, ParameterStore, Prepared, Term};
use crate::rng::seeded;
use crate::train::{self, TrainConfig, TrainError, TrainReport};
use crate::window::{ShapeError, WindowRef};

/// One free temporal weight per frame and feature; the per-feature logits
/// are summed with a global bias.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvModel {
    pub frames: usize,
    pub features: usize,
    /// Row-major `frames x features`.
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ConvModel {
    pub fn zeros(frames: usize, features: usize) -> Self {
        Self {
            frames,
            features,
            weights: alloc::vec![0.0; frames * features],
            bias: 0.0,
        }
    }

    /// Temporal kernel of feature `f`.
    pub fn kernel(&self, f: usize) -> Vec<f64> {
        (0..self.frames).map(|t| self.weights[t * self.features + f]).collect()
    }
}

pub fn conv_forward(model: &ConvModel, window: WindowRef<'_>) -> Result<f64, ShapeError> {
    if window.frames() != model.frames || window.features() != model.features {
        return Err(ShapeError::Window {
            frames: model.frames,
            features: model.features,
            found_frames: window.frames(),
            found_features: window.features(),
        });
    }
    let nf = model.features;
    let mut z = model.bias;
    for t in 0..model.frames {
        let w = &model.weights[t * nf..(t + 1) * nf];
        z += w.iter().zip(window.row(t)).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(z)
}

/// Conv model computing exactly the logit of a complete Morlet program:
/// each selected feature's kernel is its affine weight times the curve.
pub fn conv_from_program(
    arch: &Architecture,
    params: &ParameterStore,
    frames: usize,
) -> Result<ConvModel, DslError> {
    if !arch.is_complete() {
        return Err(DslError::Incomplete);
    }
    let prepared = Prepared::new(arch, params, frames)?;
    let nf = arch.features.count();
    let mut model = ConvModel::zeros(frames, nf);
    for term in &prepared.terms {
        match term {
            Term::Filter { curve, head, .. } => {
                let sel = head.features.as_deref().ok_or(DslError::Incomplete)?;
                for (&f, w) in sel.iter().zip(&head.weights) {
                    for (t, c) in curve.iter().enumerate() {
                        model.weights[t * nf + f] += w * c;
                    }
                }
                model.bias += head.bias;
            }
            Term::Temporal { .. } => return Err(DslError::Incomplete),
        }
    }
    Ok(model)
}

/// Trains a conv model with the program training loop: the model is the
/// relaxation bound to a lone program hole.
pub fn conv_fit(
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &TrainConfig,
) -> Result<(ConvModel, TrainReport), TrainError> {
    let arch = Architecture::root_hole(train.feature_space().clone());
    let frames = train.frames();
    let mut params = ParameterStore::initialize(
        &arch,
        frames,
        None,
        &Default::default(),
        &mut seeded(config.seed),
    );
    let report = train::fit(&arch, &mut params, train, val, config)?;
    match params.get(NodeId(0)) {
        Some(ParamBlock::Temporal { weights, bias }) => Ok((
            ConvModel {
                frames,
                features: train.feature_count(),
                weights: weights.clone(),
                bias: *bias,
            },
            report,
        )),
        _ => Err(TrainError::Program(DslError::BlockMismatch(NodeId(0)))),
    }
}
