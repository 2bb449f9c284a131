//! Gradient-based fitting of program parameters.
//!
//! Training minimizes a class-weighted binary cross-entropy on the program
//! logit. Model selection (early stopping, search scoring) uses validation
//! loss and F1 respectively.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::WindowedDataset;
use crate::dsl::{sigmoid, Architecture, DslError, NodeId, ParameterStore, Prepared, Term};
use crate::eval::ConfusionCounts;
use crate::filter;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("validation set is empty")]
    EmptyVal,
    #[error("datasets disagree on window shape or feature count")]
    ShapeMismatch,
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    #[error("loss diverged (NaN) at epoch {epoch} after a learning-rate restart")]
    Divergence { epoch: usize },
    #[error(transparent)]
    Program(#[from] DslError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Weight positives by the negative/positive ratio of the training set.
    pub class_weighting: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            optimizer: OptimizerKind::Adam,
            batch_size: 256,
            max_epochs: 100,
            patience: 5,
            class_weighting: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1"));
        }
        if self.patience == 0 {
            return Err(TrainError::Config("patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    /// Full-batch training loss at the restored parameters.
    pub final_train_loss: f64,
    pub val_loss: Vec<f64>,
    pub val_f1: Vec<f64>,
    pub epochs_run: usize,
    /// Epoch (1-based) whose parameters were restored; 0 if none ran.
    pub best_epoch: usize,
    /// Validation loss and F1 at the restored parameters.
    pub best_val_loss: f64,
    pub best_val_f1: f64,
    pub pos_weight: f64,
    /// Learning-rate halvings after a divergence.
    pub restarts: usize,
}

/// Numerically stable `log(1 + e^z)`.
#[inline]
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Binary cross-entropy on a logit; `pos_weight` scales the positive term.
#[inline]
pub fn bce_loss(logit: f64, label: bool, pos_weight: f64) -> f64 {
    if label {
        pos_weight * log1p_exp(-logit)
    } else {
        log1p_exp(logit)
    }
}

/// `d bce_loss / d logit`.
#[inline]
pub fn bce_grad(logit: f64, label: bool, pos_weight: f64) -> f64 {
    if label {
        -pos_weight * sigmoid(-logit)
    } else {
        sigmoid(logit)
    }
}

/// Examples of one gradient step.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub data: &'a WindowedDataset,
    pub indices: &'a [usize],
    /// Optional per-example loss weights (default 1).
    pub weights: Option<&'a [f64]>,
    pub pos_weight: f64,
}

impl<'a> Batch<'a> {
    pub fn new(data: &'a WindowedDataset, indices: &'a [usize], pos_weight: f64) -> Self {
        Self {
            data,
            indices,
            weights: None,
            pos_weight,
        }
    }
}

/// Mean batch loss and its gradient, aligned with
/// [`ParameterStore::flatten`]; frozen blocks receive zero gradient.
pub fn backward(
    arch: &Architecture,
    params: &ParameterStore,
    batch: &Batch<'_>,
) -> Result<(f64, Vec<f64>), TrainError> {
    let frames = batch.data.frames();
    if batch.data.feature_count() != arch.features.count() {
        return Err(TrainError::ShapeMismatch);
    }
    let prepared = Prepared::new(arch, params, frames)?;
    let offsets = params.offsets();
    let mut grad = alloc::vec![0.0; params.flat_len()];
    let n = batch.indices.len();
    if n == 0 {
        return Ok((0.0, grad));
    }
    let nf = batch.data.feature_count();

    // Per-term accumulators for dL/dcurve.
    let mut curve_grads: Vec<Vec<f64>> = prepared
        .terms
        .iter()
        .map(|t| match t {
            Term::Filter { .. } => alloc::vec![0.0; frames],
            Term::Temporal { .. } => Vec::new(),
        })
        .collect();
    let trainable = |id: NodeId| !params.is_frozen(id);

    let mut loss = 0.0;
    let mut filtered = alloc::vec![0.0; nf];
    for (k, &i) in batch.indices.iter().enumerate() {
        let window = batch.data.window(i);
        let label = batch.data.label(i);
        let weight = batch.weights.map_or(1.0, |w| w[k]);
        let z = prepared.logit_unchecked(&window);
        loss += weight * bce_loss(z, label, batch.pos_weight);
        let g = weight * bce_grad(z, label, batch.pos_weight);
        if g == 0.0 {
            continue;
        }
        for (term, cg) in prepared.terms.iter().zip(curve_grads.iter_mut()) {
            match term {
                Term::Filter {
                    morlet, curve, head, ..
                } => {
                    let head_on = trainable(head.id);
                    let morlet_on = trainable(*morlet);
                    if !head_on && !morlet_on {
                        continue;
                    }
                    let ho = offsets[&head.id];
                    match &head.features {
                        Some(sel) => {
                            for (j, &f) in sel.iter().enumerate() {
                                if head_on {
                                    grad[ho + j] += g * crate::dsl::filtered(curve, &window, f);
                                }
                                if morlet_on {
                                    let wj = head.weights[j];
                                    for (t, c) in cg.iter_mut().enumerate() {
                                        *c += g * wj * window.get(t, f);
                                    }
                                }
                            }
                            if head_on {
                                grad[ho + sel.len()] += g;
                            }
                        }
                        None => {
                            if head_on {
                                filter::apply_filter_into(curve, window, &mut filtered)
                                    .map_err(DslError::from)?;
                                for (f, v) in filtered.iter().enumerate() {
                                    grad[ho + f] += g * v;
                                }
                                grad[ho + nf] += g;
                            }
                            if morlet_on {
                                for (t, c) in cg.iter_mut().enumerate() {
                                    let row = window.row(t);
                                    let z_t: f64 = head.weights.iter().zip(row).map(|(a, b)| a * b).sum();
                                    *c += g * z_t;
                                }
                            }
                        }
                    }
                }
                Term::Temporal { id, .. } => {
                    if !trainable(*id) {
                        continue;
                    }
                    let o = offsets[id];
                    for t in 0..frames {
                        let row = window.row(t);
                        let dst = &mut grad[o + t * nf..o + (t + 1) * nf];
                        for (d, x) in dst.iter_mut().zip(row) {
                            *d += g * x;
                        }
                    }
                    grad[o + frames * nf] += g;
                }
            }
        }
    }

    // Chain dL/dcurve through the curve partials and the softplus map.
    for (term, cg) in prepared.terms.iter().zip(&curve_grads) {
        if let Term::Filter {
            morlet, params: mp, raw, ..
        } = term
        {
            if !trainable(*morlet) {
                continue;
            }
            let partials = filter::filter_gradients(mp, frames).map_err(DslError::from)?;
            let o = offsets[morlet];
            for (k, r) in raw.iter().enumerate() {
                let d: f64 = partials.by_index(k).iter().zip(cg).map(|(a, b)| a * b).sum();
                grad[o + k] += d * sigmoid(*r);
            }
        }
    }

    let scale = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Mean loss over the whole dataset.
pub fn dataset_loss(prepared: &Prepared, data: &WindowedDataset, pos_weight: f64) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let total: f64 = (0..data.len())
        .map(|i| bce_loss(prepared.logit_unchecked(&data.window(i)), data.label(i), pos_weight))
        .sum();
    total / data.len() as f64
}

pub fn confusion(prepared: &Prepared, data: &WindowedDataset) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for i in 0..data.len() {
        c.record(prepared.logit_unchecked(&data.window(i)) > 0.0, data.label(i));
    }
    c
}

/// Negative/positive ratio, or 1 when a class is absent.
pub fn balanced_pos_weight(data: &WindowedDataset) -> f64 {
    let pos = data.positives();
    let neg = data.len() - pos;
    if pos == 0 || neg == 0 {
        1.0
    } else {
        neg as f64 / pos as f64
    }
}

enum Optimizer {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: alloc::vec![0.0; n],
                v: alloc::vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], frozen: &[bool], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        match self {
            Optimizer::Sgd => {
                for ((p, g), &fz) in theta.iter_mut().zip(grad).zip(frozen) {
                    if !fz {
                        *p -= lr * g;
                    }
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - libm::pow(B1, *t as f64);
                let c2 = 1.0 - libm::pow(B2, *t as f64);
                for i in 0..theta.len() {
                    if frozen[i] {
                        continue;
                    }
                    m[i] = B1 * m[i] + (1.0 - B1) * grad[i];
                    v[i] = B2 * v[i] + (1.0 - B2) * grad[i] * grad[i];
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    theta[i] -= lr * mh / (libm::sqrt(vh) + EPS);
                }
            }
        }
    }
}

/// Fits the non-frozen parameters of `arch` in place.
///
/// Early stopping tracks validation loss; the best epoch's parameters are
/// restored. A NaN loss restarts once from the initial parameters at half
/// the learning rate; a second NaN is reported as divergence.
pub fn fit(
    arch: &Architecture,
    params: &mut ParameterStore,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if val.is_empty() {
        return Err(TrainError::EmptyVal);
    }
    if train.frames() != val.frames()
        || train.feature_count() != val.feature_count()
        || train.feature_count() != arch.features.count()
    {
        return Err(TrainError::ShapeMismatch);
    }
    params.validate(arch, train.frames())?;
    let pos_weight = if config.class_weighting {
        balanced_pos_weight(train)
    } else {
        1.0
    };

    let initial = params.clone();
    let mut lr = config.learning_rate;
    let mut restarts = 0;
    loop {
        match run_epochs(arch, params, train, val, config, lr, pos_weight) {
            Ok(mut report) => {
                report.restarts = restarts;
                return Ok(report);
            }
            Err(Diverged(epoch)) => {
                if restarts == 1 {
                    *params = initial;
                    return Err(TrainError::Divergence { epoch });
                }
                restarts += 1;
                lr *= 0.5;
                *params = initial.clone();
            }
        }
    }
}

struct Diverged(usize);

fn run_epochs(
    arch: &Architecture,
    params: &mut ParameterStore,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &TrainConfig,
    lr: f64,
    pos_weight: f64,
) -> Result<TrainReport, Diverged> {
    let frames = train.frames();
    let prepare = |p: &ParameterStore| Prepared::new(arch, p, frames).expect("validated");
    let frozen = params.frozen_mask();
    let mut theta = params.flatten();
    let mut opt = Optimizer::new(config.optimizer, theta.len());
    let mut rng = seeded(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut val_loss = Vec::new();
    let mut val_f1 = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        if config.batch_size < train.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(config.batch_size) {
            let batch = Batch::new(train, chunk, pos_weight);
            let (loss, grad) = backward(arch, params, &batch).expect("validated");
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Diverged(epoch));
            }
            opt.step(&mut theta, &grad, &frozen, lr);
            params.assign_trainable(&theta);
        }
        let prepared = prepare(params);
        let vl = dataset_loss(&prepared, val, pos_weight);
        if !vl.is_finite() {
            return Err(Diverged(epoch));
        }
        val_loss.push(vl);
        val_f1.push(confusion(&prepared, val).f1());
        let improved = best.as_ref().is_none_or(|(b, _, _)| vl < *b);
        if improved {
            best = Some((vl, epoch, theta.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    let best_epoch = match best {
        Some((_, epoch, theta_best)) => {
            params.assign_trainable(&theta_best);
            epoch
        }
        None => 0,
    };
    let prepared = prepare(params);
    let final_train_loss = dataset_loss(&prepared, train, pos_weight);
    if !final_train_loss.is_finite() {
        return Err(Diverged(best_epoch.max(1)));
    }
    Ok(TrainReport {
        final_train_loss,
        epochs_run: val_loss.len(),
        best_epoch,
        best_val_loss: dataset_loss(&prepared, val, pos_weight),
        best_val_f1: confusion(&prepared, val).f1(),
        val_loss,
        val_f1,
        pos_weight,
        restarts: 0,
    })
}

/// Snapshot of every block's values, for freezing checks.
pub fn snapshot(params: &ParameterStore) -> BTreeMap<NodeId, Vec<u64>> {
    params
        .iter()
        .map(|(id, e)| (id, e.block.values().iter().map(|v| v.to_bits()).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{FeatureSpace, HoleType, InitRanges, Node};
    use crate::rng::seeded;
    use crate::window::Window;
    use rand::Rng;

    #[test]
    fn bce_reference_values() {
        let ln2 = core::f64::consts::LN_2;
        assert!((bce_loss(0.0, true, 1.0) - ln2).abs() < 1e-15);
        assert!((bce_loss(0.0, false, 1.0) - ln2).abs() < 1e-15);
        // log(1 + e^-20) and log(1 + e^20), evaluated in high precision.
        assert!((bce_loss(20.0, true, 1.0) - 2.061_153_620_314_381_5e-9).abs() < 1e-20);
        assert!((bce_loss(-20.0, true, 1.0) - 20.000_000_002_061_153).abs() < 1e-12);
        assert!(bce_loss(800.0, false, 1.0).is_finite());
        assert_eq!(bce_loss(0.0, true, 3.0), 3.0 * ln2);
    }

    fn random_dataset(n: usize, frames: usize, f: usize, seed: u64) -> WindowedDataset {
        let mut rng = seeded(seed);
        let windows: Vec<Window> = (0..n)
            .map(|_| Window::from_fn(frames, f, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let labels = (0..n).map(|_| rng.random_bool(0.4)).collect();
        WindowedDataset::from_windows(FeatureSpace::unnamed(f), windows, labels).unwrap()
    }

    fn fd_check(arch: &Architecture, params: &ParameterStore, data: &WindowedDataset, pw: f64) {
        let idx: Vec<usize> = (0..data.len()).collect();
        let batch = Batch::new(data, &idx, pw);
        let (_, grad) = backward(arch, params, &batch).unwrap();
        let theta = params.flatten();
        let frozen = params.frozen_mask();
        let h = 1e-5;
        for k in 0..theta.len() {
            if frozen[k] {
                assert_eq!(grad[k], 0.0);
                continue;
            }
            let mut a = params.clone();
            let mut b = params.clone();
            let mut ta = theta.clone();
            let mut tb = theta.clone();
            ta[k] += h;
            tb[k] -= h;
            a.assign_trainable(&ta);
            b.assign_trainable(&tb);
            let la = backward(arch, &a, &batch).unwrap().0;
            let lb = backward(arch, &b, &batch).unwrap().0;
            let fd = (la - lb) / (2.0 * h);
            let scale = grad[k].abs().max(fd.abs()).max(1e-4);
            assert!((grad[k] - fd).abs() / scale < 1e-4, "param {k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let data = random_dataset(8, 5, 2, 1);
        let space = FeatureSpace::unnamed(2);
        let archs = [
            Architecture::single(space.clone(), &[1]),
            Architecture::single(space.clone(), &[0, 1]),
            Architecture::root_hole(space.clone()),
            Architecture::new(space.clone(), Node::filter_program(Node::hole(HoleType::Head))),
            Architecture::new(
                space.clone(),
                Node::Disjunction {
                    children: alloc::vec![
                        Node::filter_program(Node::affine(&[0])),
                        Node::hole(HoleType::FilterProgram),
                    ],
                },
            ),
        ];
        for (s, arch) in archs.iter().enumerate() {
            let mut p = ParameterStore::initialize(arch, 5, None, &InitRanges::default(), &mut seeded(s as u64));
            // Relaxation blocks start at zero; perturb them so every path is exercised.
            let mut rng = seeded(100 + s as u64);
            let theta: Vec<f64> = p
                .flatten()
                .iter()
                .map(|v| if *v == 0.0 { rng.random_range(-0.5..0.5) } else { *v })
                .collect();
            p.assign_trainable(&theta);
            fd_check(arch, &p, &data, 1.7);
        }
    }

    #[test]
    fn frozen_child_gets_zero_gradient() {
        let data = random_dataset(8, 5, 2, 2);
        let arch = Architecture::new(
            FeatureSpace::unnamed(2),
            Node::Disjunction {
                children: alloc::vec![
                    Node::filter_program(Node::affine(&[0])),
                    Node::filter_program(Node::affine(&[1])),
                ],
            },
        );
        let mut p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(4));
        p.set_frozen(NodeId(2), true);
        p.set_frozen(NodeId(3), true);
        let idx: Vec<usize> = (0..8).collect();
        let (_, grad) = backward(&arch, &p, &Batch::new(&data, &idx, 1.0)).unwrap();
        assert!(grad[..6].iter().all(|&g| g == 0.0));
        assert!(grad[6..].iter().any(|&g| g != 0.0));
        fd_check(&arch, &p, &data, 1.0);
    }

    #[test]
    fn doubling_weights_doubles_gradient() {
        let data = random_dataset(8, 5, 2, 3);
        let arch = Architecture::single(FeatureSpace::unnamed(2), &[0, 1]);
        let p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(5));
        let idx: Vec<usize> = (0..8).collect();
        let ones = [1.0; 8];
        let twos = [2.0; 8];
        let mut b = Batch::new(&data, &idx, 1.0);
        b.weights = Some(&ones);
        let (l1, g1) = backward(&arch, &p, &b).unwrap();
        b.weights = Some(&twos);
        let (l2, g2) = backward(&arch, &p, &b).unwrap();
        assert_eq!(l2, 2.0 * l1);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(*b, 2.0 * a);
        }
    }

    fn separable(n: usize, seed: u64) -> WindowedDataset {
        let mut rng = seeded(seed);
        let mut windows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let level: f64 = rng.random_range(-1.0..1.0);
            let label = level > 0.0;
            let shifted = if label { level + 0.2 } else { level - 0.2 };
            windows.push(Window::from_fn(5, 1, |_, _| shifted + rng.random_range(-0.05..0.05)));
            labels.push(label);
        }
        WindowedDataset::from_windows(FeatureSpace::unnamed(1), windows, labels).unwrap()
    }

    #[test]
    fn fit_separable_data() {
        let train = separable(400, 1);
        let val = separable(200, 2);
        let arch = Architecture::single(FeatureSpace::unnamed(1), &[0]);
        let mut p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(0));
        let cfg = TrainConfig {
            batch_size: 64,
            ..TrainConfig::default()
        };
        let report = fit(&arch, &mut p, &train, &val, &cfg).unwrap();
        let prepared = Prepared::new(&arch, &p, 5).unwrap();
        assert!(confusion(&prepared, &train).f1() >= 0.99, "{report:?}");
        assert_eq!(report.val_loss.len(), report.epochs_run);
        assert_eq!(report.val_f1.len(), report.epochs_run);
    }

    #[test]
    fn fit_is_deterministic_and_respects_zero_epochs() {
        let train = random_dataset(64, 5, 2, 7);
        let val = random_dataset(32, 5, 2, 8);
        let arch = Architecture::single(FeatureSpace::unnamed(2), &[0, 1]);
        let p0 = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(0));
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 10,
            ..TrainConfig::default()
        };
        let mut a = p0.clone();
        let mut b = p0.clone();
        let ra = fit(&arch, &mut a, &train, &val, &cfg).unwrap();
        let rb = fit(&arch, &mut b, &train, &val, &cfg).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ra.val_loss), bits(&rb.val_loss));
        assert_eq!(a, b);

        let mut c = p0.clone();
        let r = fit(&arch, &mut c, &train, &val, &TrainConfig { max_epochs: 0, ..cfg }).unwrap();
        assert_eq!(c, p0);
        assert_eq!(r.epochs_run, 0);
    }

    #[test]
    fn fit_preserves_frozen_blocks() {
        let train = random_dataset(64, 5, 2, 9);
        let val = random_dataset(32, 5, 2, 10);
        let arch = Architecture::new(
            FeatureSpace::unnamed(2),
            Node::Disjunction {
                children: alloc::vec![
                    Node::filter_program(Node::affine(&[0])),
                    Node::filter_program(Node::affine(&[1])),
                ],
            },
        );
        let mut p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(1));
        p.set_frozen(NodeId(2), true);
        p.set_frozen(NodeId(3), true);
        let before = snapshot(&p);
        fit(&arch, &mut p, &train, &val, &TrainConfig::default()).unwrap();
        let after = snapshot(&p);
        assert_eq!(before[&NodeId(2)], after[&NodeId(2)]);
        assert_eq!(before[&NodeId(3)], after[&NodeId(3)]);
        assert_ne!(before[&NodeId(6)], after[&NodeId(6)]);
    }

    #[test]
    fn fit_errors() {
        let train = random_dataset(8, 5, 2, 1);
        let val = random_dataset(8, 5, 2, 2);
        let empty = train.select(&[]);
        let arch = Architecture::single(FeatureSpace::unnamed(2), &[0]);
        let mut p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(0));
        let cfg = TrainConfig::default();
        assert_eq!(fit(&arch, &mut p, &empty, &val, &cfg), Err(TrainError::EmptyTrain));
        assert_eq!(fit(&arch, &mut p, &train, &empty, &cfg), Err(TrainError::EmptyVal));
        let other = random_dataset(8, 7, 2, 3);
        assert_eq!(fit(&arch, &mut p, &train, &other, &cfg), Err(TrainError::ShapeMismatch));
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..cfg.clone()
        };
        assert!(matches!(fit(&arch, &mut p, &train, &val, &bad), Err(TrainError::Config(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let mut windows = alloc::vec![Window::from_fn(5, 1, |_, _| 1.0); 4];
        windows[0].set(2, 0, f64::NAN);
        let data = WindowedDataset::from_windows(
            FeatureSpace::unnamed(1),
            windows,
            alloc::vec![true, false, true, false],
        )
        .unwrap();
        let arch = Architecture::single(FeatureSpace::unnamed(1), &[0]);
        let mut p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(0));
        let before = p.clone();
        let r = fit(&arch, &mut p, &data, &data, &TrainConfig::default());
        assert_eq!(r, Err(TrainError::Divergence { epoch: 1 }));
        assert_eq!(p, before);
    }

    #[test]
    fn small_steps_do_not_increase_loss() {
        let data = random_dataset(32, 5, 2, 11);
        let idx: Vec<usize> = (0..32).collect();
        let arch = Architecture::single(FeatureSpace::unnamed(2), &[0, 1]);
        let mut failures = 0;
        for s in 0..50 {
            let p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(s));
            let batch = Batch::new(&data, &idx, 1.0);
            let (l0, g) = backward(&arch, &p, &batch).unwrap();
            let theta: Vec<f64> = p.flatten().iter().zip(&g).map(|(t, g)| t - 1e-4 * g).collect();
            let mut q = p.clone();
            q.assign_trainable(&theta);
            let (l1, _) = backward(&arch, &q, &batch).unwrap();
            if l1 > l0 {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} of 50 steps increased the loss");
    }

    #[test]
    fn loss_is_permutation_invariant() {
        let data = random_dataset(16, 5, 2, 12);
        let arch = Architecture::single(FeatureSpace::unnamed(2), &[1]);
        let p = ParameterStore::initialize(&arch, 5, None, &InitRanges::default(), &mut seeded(3));
        let fwd: Vec<usize> = (0..16).collect();
        let rev: Vec<usize> = (0..16).rev().collect();
        let (a, ga) = backward(&arch, &p, &Batch::new(&data, &fwd, 1.0)).unwrap();
        let (b, gb) = backward(&arch, &p, &Batch::new(&data, &rev, 1.0)).unwrap();
        assert!((a - b).abs() < 1e-14);
        for (x, y) in ga.iter().zip(&gb) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
