//! The program grammar, its structural cost and its forward semantics.
//!
//! Three value shapes flow through a program: a `Sequence` (the `T x F`
//! window), a `Vector` (one value per feature) and a `Scalar` logit. The
//! grammar rules are
//!
//! ```text
//! Program       -> Morlet |> Head  |  Disjunction(FilterProgram, FilterProgram)
//! FilterProgram -> Morlet |> Head
//! Head          -> Affine(i)  |  Affine(i, j)
//! ```
//!
//! and a program predicts the positive class iff its logit is `> 0`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng as _;

use crate::filter::{self, FilterCurve, FilterError, MorletParams};
use crate::fmt_util::sig4;
use crate::rng::Rng;
use crate::window::{ShapeError, WindowRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Sequence,
    Vector,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub input: Shape,
    pub output: Shape,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} -> {:?}", self.input, self.output)
    }
}

/// Expected type of an unfilled hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HoleType {
    /// Any program; may become a disjunction.
    Program,
    /// A single filter-program (disjunction child).
    FilterProgram,
    /// Affine head over the filtered feature vector.
    Head,
}

impl HoleType {
    pub fn signature(self) -> Signature {
        match self {
            HoleType::Program | HoleType::FilterProgram => Signature {
                input: Shape::Sequence,
                output: Shape::Scalar,
            },
            HoleType::Head => Signature {
                input: Shape::Vector,
                output: Shape::Scalar,
            },
        }
    }

    fn label(self) -> &'static str {
        match self {
            HoleType::Program => "program",
            HoleType::FilterProgram => "filter",
            HoleType::Head => "head",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Node {
    Hole { expects: HoleType },
    /// Sequence -> Vector.
    Morlet,
    /// Vector -> Scalar over the selected feature indices.
    Affine { features: Vec<usize> },
    /// Applies `first`, then `then` to its output.
    Compose { first: Box<Node>, then: Box<Node> },
    /// Sums the logits of its children.
    Disjunction { children: Vec<Node> },
}

impl Node {
    pub fn hole(expects: HoleType) -> Self {
        Node::Hole { expects }
    }

    /// `Morlet |> head`.
    pub fn filter_program(head: Node) -> Self {
        Node::Compose {
            first: Box::new(Node::Morlet),
            then: Box::new(head),
        }
    }

    pub fn affine(features: &[usize]) -> Self {
        Node::Affine {
            features: features.to_vec(),
        }
    }

    fn visit_preorder<'a>(&'a self, out: &mut Vec<&'a Node>) {
        out.push(self);
        match self {
            Node::Compose { first, then } => {
                first.visit_preorder(out);
                then.visit_preorder(out);
            }
            Node::Disjunction { children } => children.iter().for_each(|c| c.visit_preorder(out)),
            _ => {}
        }
    }

    fn subtree_size(&self) -> usize {
        1 + match self {
            Node::Compose { first, then } => first.subtree_size() + then.subtree_size(),
            Node::Disjunction { children } => children.iter().map(Node::subtree_size).sum(),
            _ => 0,
        }
    }
}

/// Preorder position of a node inside its architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Names of the input features plus optional resident/intruder pairing.
///
/// When `pairs` is non-empty a two-feature affine head must select exactly
/// one listed pair, in listed order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSpace {
    pub names: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub pairs: Vec<[usize; 2]>,
}

impl FeatureSpace {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            pairs: Vec::new(),
        }
    }

    pub fn unnamed(count: usize) -> Self {
        Self {
            names: (0..count).map(|i| format!("f{i}")).collect(),
            pairs: Vec::new(),
        }
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn with_pairs(mut self, pairs: Vec<[usize; 2]>) -> Self {
        self.pairs = pairs;
        self
    }

    /// Every feature selection an affine head may make, singles first.
    pub fn affine_choices(&self) -> Vec<Vec<usize>> {
        let n = self.count();
        let mut out: Vec<Vec<usize>> = (0..n).map(|i| alloc::vec![i]).collect();
        if self.pairs.is_empty() {
            for i in 0..n {
                for j in i + 1..n {
                    out.push(alloc::vec![i, j]);
                }
            }
        } else {
            out.extend(self.pairs.iter().map(|p| p.to_vec()));
        }
        out
    }
}

/// A (possibly partial) program architecture over a fixed feature space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Architecture {
    pub features: FeatureSpace,
    pub root: Node,
}

impl Architecture {
    pub fn new(features: FeatureSpace, root: Node) -> Self {
        Self { features, root }
    }

    /// The search start: a single hole of program type.
    pub fn root_hole(features: FeatureSpace) -> Self {
        Self::new(features, Node::hole(HoleType::Program))
    }

    pub fn single(features: FeatureSpace, selected: &[usize]) -> Self {
        Self::new(features, Node::filter_program(Node::affine(selected)))
    }

    pub fn nodes(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.root.visit_preorder(&mut out);
        out
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes().get(id.0 as usize).copied()
    }

    pub fn holes(&self) -> Vec<(NodeId, HoleType)> {
        self.nodes()
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                Node::Hole { expects } => Some((NodeId(i as u32), *expects)),
                _ => None,
            })
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.holes().is_empty()
    }

    /// Replaces the node at `id` with `replacement`.
    pub fn replace(&self, id: NodeId, replacement: Node) -> Option<Architecture> {
        fn go(node: &Node, target: u32, next: &mut u32, rep: &Node) -> Option<Node> {
            let here = *next;
            if here == target {
                *next += node.subtree_size() as u32;
                return Some(rep.clone());
            }
            *next += 1;
            match node {
                Node::Compose { first, then } => {
                    let f = go(first, target, next, rep);
                    let t = go(then, target, next, rep);
                    if f.is_none() && t.is_none() {
                        return None;
                    }
                    Some(Node::Compose {
                        first: Box::new(f.unwrap_or_else(|| (**first).clone())),
                        then: Box::new(t.unwrap_or_else(|| (**then).clone())),
                    })
                }
                Node::Disjunction { children } => {
                    let mut changed = false;
                    let kids: Vec<Node> = children
                        .iter()
                        .map(|c| match go(c, target, next, rep) {
                            Some(n) => {
                                changed = true;
                                n
                            }
                            None => c.clone(),
                        })
                        .collect();
                    changed.then_some(Node::Disjunction { children: kids })
                }
                _ => None,
            }
        }
        let mut next = 0;
        go(&self.root, id.0, &mut next, &replacement).map(|root| Architecture {
            features: self.features.clone(),
            root,
        })
    }

    /// Complete filter-program children, in order (one entry for a
    /// non-disjunction program).
    pub fn filter_programs(&self) -> Vec<&Node> {
        match &self.root {
            Node::Disjunction { children } => children.iter().collect(),
            other => alloc::vec![other],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeErrorKind {
    #[error("affine head selects {0} features; only 1 or 2 are allowed")]
    AffineArity(usize),
    #[error("disjunction has {0} children; at least 2 are required")]
    DisjunctionArity(usize),
    #[error("feature index {index} out of range for {count} features")]
    FeatureOutOfRange { index: usize, count: usize },
    #[error("feature index {0} selected twice")]
    DuplicateFeature(usize),
    #[error("features ({0}, {1}) are not a declared pair")]
    UnpairedFeatures(usize, usize),
    #[error("expected {expected}, found {found}")]
    Mismatch { expected: Signature, found: Signature },
    #[error("disjunction children must be single filter-programs")]
    NestedDisjunction,
    #[error("a {0} hole cannot appear here")]
    MisplacedHole(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("node {node}: {kind}")]
pub struct TypeError {
    pub node: NodeId,
    pub kind: TypeErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("type error at {0}")]
    Type(#[from] TypeError),
    #[error("architecture has unfilled holes")]
    Incomplete,
    #[error("rule `{0}` has no entry in the cost table")]
    UnknownRule(String),
    #[error("invalid cost for rule `{0}`: {1}")]
    InvalidCost(String, f64),
    #[error("no parameter block bound to node {0}")]
    MissingParams(NodeId),
    #[error("parameter block for node {0} does not match the node")]
    BlockMismatch(NodeId),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

const SEQ_TO_SCALAR: Signature = Signature {
    input: Shape::Sequence,
    output: Shape::Scalar,
};

/// Checks every grammar invariant; holes are allowed.
pub fn type_check(arch: &Architecture) -> Result<(), TypeError> {
    struct Checker<'a> {
        space: &'a FeatureSpace,
        next: u32,
    }

    impl Checker<'_> {
        fn check(&mut self, node: &Node, in_disjunction: bool) -> Result<Signature, TypeError> {
            let id = NodeId(self.next);
            self.next += 1;
            let err = |kind| TypeError { node: id, kind };
            match node {
                Node::Hole { expects } => {
                    if in_disjunction && *expects == HoleType::Program {
                        return Err(err(TypeErrorKind::MisplacedHole(expects.label())));
                    }
                    Ok(expects.signature())
                }
                Node::Morlet => Ok(Signature {
                    input: Shape::Sequence,
                    output: Shape::Vector,
                }),
                Node::Affine { features } => {
                    if !(1..=2).contains(&features.len()) {
                        return Err(err(TypeErrorKind::AffineArity(features.len())));
                    }
                    let count = self.space.count();
                    for &i in features {
                        if i >= count {
                            return Err(err(TypeErrorKind::FeatureOutOfRange { index: i, count }));
                        }
                    }
                    if features.len() == 2 {
                        let (a, b) = (features[0], features[1]);
                        if a == b {
                            return Err(err(TypeErrorKind::DuplicateFeature(a)));
                        }
                        if !self.space.pairs.is_empty() && !self.space.pairs.contains(&[a, b]) {
                            return Err(err(TypeErrorKind::UnpairedFeatures(a, b)));
                        }
                    }
                    Ok(Signature {
                        input: Shape::Vector,
                        output: Shape::Scalar,
                    })
                }
                Node::Compose { first, then } => {
                    let a = self.check(first, false)?;
                    let then_id = NodeId(self.next);
                    let b = self.check(then, false)?;
                    if a.output != b.input {
                        return Err(TypeError {
                            node: then_id,
                            kind: TypeErrorKind::Mismatch {
                                expected: Signature {
                                    input: a.output,
                                    output: b.output,
                                },
                                found: b,
                            },
                        });
                    }
                    Ok(Signature {
                        input: a.input,
                        output: b.output,
                    })
                }
                Node::Disjunction { children } => {
                    if in_disjunction {
                        return Err(err(TypeErrorKind::NestedDisjunction));
                    }
                    if children.len() < 2 {
                        return Err(err(TypeErrorKind::DisjunctionArity(children.len())));
                    }
                    for child in children {
                        let child_id = NodeId(self.next);
                        if matches!(child, Node::Disjunction { .. }) {
                            return Err(TypeError {
                                node: child_id,
                                kind: TypeErrorKind::NestedDisjunction,
                            });
                        }
                        let sig = self.check(child, true)?;
                        if sig != SEQ_TO_SCALAR {
                            return Err(TypeError {
                                node: child_id,
                                kind: TypeErrorKind::Mismatch {
                                    expected: SEQ_TO_SCALAR,
                                    found: sig,
                                },
                            });
                        }
                    }
                    Ok(SEQ_TO_SCALAR)
                }
            }
        }
    }

    let mut checker = Checker {
        space: &arch.features,
        next: 0,
    };
    let sig = checker.check(&arch.root, false)?;
    if sig != SEQ_TO_SCALAR {
        return Err(TypeError {
            node: NodeId(0),
            kind: TypeErrorKind::Mismatch {
                expected: SEQ_TO_SCALAR,
                found: sig,
            },
        });
    }
    Ok(())
}

pub mod rules {
    pub const MORLET: &str = "morlet";
    pub const AFFINE1: &str = "affine1";
    pub const AFFINE2: &str = "affine2";
    pub const DISJUNCTION: &str = "disjunction";
    pub const ALL: [&str; 4] = [MORLET, AFFINE1, AFFINE2, DISJUNCTION];
}

/// Non-negative cost per grammar rule.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct RuleCostTable {
    costs: BTreeMap<String, f64>,
}

impl Default for RuleCostTable {
    fn default() -> Self {
        let costs = [
            (rules::MORLET, 1.0),
            (rules::AFFINE1, 1.0),
            (rules::AFFINE2, 2.0),
            (rules::DISJUNCTION, 1.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self { costs }
    }
}

impl RuleCostTable {
    /// Builds a table from explicit entries, validating non-negativity.
    /// Missing rules surface later as [`DslError::UnknownRule`].
    pub fn from_entries<I, S>(entries: I) -> Result<Self, DslError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut costs = BTreeMap::new();
        for (k, v) in entries {
            let k = k.into();
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DslError::InvalidCost(k, v));
            }
            costs.insert(k, v);
        }
        Ok(Self { costs })
    }

    /// Default table with the given entries overridden.
    pub fn with_overrides<'a>(
        overrides: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, DslError> {
        let mut table = Self::default();
        for (k, v) in overrides {
            if !rules::ALL.contains(&k) {
                return Err(DslError::UnknownRule(k.to_string()));
            }
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DslError::InvalidCost(k.to_string(), v));
            }
            table.costs.insert(k.to_string(), v);
        }
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), DslError> {
        for (k, &v) in &self.costs {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DslError::InvalidCost(k.clone(), v));
            }
        }
        for r in rules::ALL {
            self.cost(r)?;
        }
        Ok(())
    }

    pub fn cost(&self, rule: &str) -> Result<f64, DslError> {
        self.costs
            .get(rule)
            .copied()
            .ok_or_else(|| DslError::UnknownRule(rule.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.costs.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Sum of rule costs over the multiset of rules used; holes cost nothing.
///
/// A `k`-child disjunction counts as `k - 1` binary disjunction rules.
pub fn structural_cost(arch: &Architecture, costs: &RuleCostTable) -> Result<f64, DslError> {
    let mut total = 0.0;
    for node in arch.nodes() {
        total += match node {
            Node::Hole { .. } | Node::Compose { .. } => 0.0,
            Node::Morlet => costs.cost(rules::MORLET)?,
            Node::Affine { features } => match features.len() {
                1 => costs.cost(rules::AFFINE1)?,
                2 => costs.cost(rules::AFFINE2)?,
                n => return Err(DslError::UnknownRule(format!("affine{n}"))),
            },
            Node::Disjunction { children } => {
                children.len().saturating_sub(1) as f64 * costs.cost(rules::DISJUNCTION)?
            }
        };
    }
    Ok(total)
}

/// Maps an unconstrained real onto `(0, inf)`.
#[inline]
pub fn softplus(r: f64) -> f64 {
    if r > 0.0 {
        r + libm::log1p(libm::exp(-r))
    } else {
        libm::log1p(libm::exp(r))
    }
}

#[inline]
pub fn softplus_inverse(y: f64) -> f64 {
    y + libm::log(-libm::expm1(-y))
}

/// Derivative of [`softplus`].
#[inline]
pub fn sigmoid(r: f64) -> f64 {
    if r >= 0.0 {
        1.0 / (1.0 + libm::exp(-r))
    } else {
        let e = libm::exp(r);
        e / (1.0 + e)
    }
}

/// Real-valued parameters bound to one node.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ParamBlock {
    /// Unconstrained `(s1, w1, s2, w2)`; positive values via [`softplus`].
    Morlet { raw: [f64; 4] },
    Affine { weights: Vec<f64>, bias: f64 },
    /// Relaxation of a program hole: one free weight per frame and feature
    /// (row-major `T x F`) plus a bias.
    Temporal { weights: Vec<f64>, bias: f64 },
    /// Relaxation of a head hole: affine map over every feature.
    Dense { weights: Vec<f64>, bias: f64 },
}

impl ParamBlock {
    pub fn morlet(p: &MorletParams) -> Self {
        ParamBlock::Morlet {
            raw: p.as_array().map(softplus_inverse),
        }
    }

    pub fn morlet_params(&self) -> Option<MorletParams> {
        match self {
            ParamBlock::Morlet { raw } => Some(MorletParams::from_array(raw.map(softplus))),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ParamBlock::Morlet { .. } => 4,
            ParamBlock::Affine { weights, .. }
            | ParamBlock::Temporal { weights, .. }
            | ParamBlock::Dense { weights, .. } => weights.len() + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            ParamBlock::Morlet { raw } => raw.to_vec(),
            ParamBlock::Affine { weights, bias }
            | ParamBlock::Temporal { weights, bias }
            | ParamBlock::Dense { weights, bias } => {
                let mut v = weights.clone();
                v.push(*bias);
                v
            }
        }
    }

    fn set_values(&mut self, v: &[f64]) {
        match self {
            ParamBlock::Morlet { raw } => raw.copy_from_slice(v),
            ParamBlock::Affine { weights, bias }
            | ParamBlock::Temporal { weights, bias }
            | ParamBlock::Dense { weights, bias } => {
                let n = weights.len();
                weights.copy_from_slice(&v[..n]);
                *bias = v[n];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamEntry {
    pub block: ParamBlock,
    pub frozen: bool,
}

/// Parameter blocks keyed by node id, with per-block frozen flags.
///
/// The flat vector order used by training is ascending node id, then the
/// block's own order (`raw[0..4]`, or weights followed by bias).
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParameterStore {
    entries: BTreeMap<NodeId, ParamEntry>,
}

/// Distributions used for fresh parameter blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitRanges {
    pub s: (f64, f64),
    pub w: (f64, f64),
    /// Affine weights are drawn from `[-affine, affine]`.
    pub affine: f64,
}

impl Default for InitRanges {
    fn default() -> Self {
        Self {
            s: (1.0, core::f64::consts::PI),
            w: (0.5, 2.0),
            affine: 0.1,
        }
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: NodeId, block: ParamBlock) {
        self.entries.insert(id, ParamEntry { block, frozen: false });
    }

    pub fn get(&self, id: NodeId) -> Option<&ParamBlock> {
        self.entries.get(&id).map(|e| &e.block)
    }

    pub fn get_mut(&mut self, id: NodeId) -> Option<&mut ParamBlock> {
        self.entries.get_mut(&id).map(|e| &mut e.block)
    }

    pub fn entry(&self, id: NodeId) -> Option<&ParamEntry> {
        self.entries.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_frozen(&self, id: NodeId) -> bool {
        self.entries.get(&id).is_some_and(|e| e.frozen)
    }

    pub fn set_frozen(&mut self, id: NodeId, frozen: bool) {
        if let Some(e) = self.entries.get_mut(&id) {
            e.frozen = frozen;
        }
    }

    pub fn freeze_all(&mut self) {
        self.entries.values_mut().for_each(|e| e.frozen = true);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn flat_len(&self) -> usize {
        self.entries.values().map(|e| e.block.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.entries.values().flat_map(|e| e.block.values()).collect()
    }

    /// Overwrites every non-frozen block from `flat`; frozen blocks are left
    /// untouched whatever `flat` holds at their positions.
    pub fn assign_trainable(&mut self, flat: &[f64]) {
        let mut at = 0;
        for e in self.entries.values_mut() {
            let n = e.block.len();
            if !e.frozen {
                e.block.set_values(&flat[at..at + n]);
            }
            at += n;
        }
    }

    /// `true` for every flat position belonging to a frozen block.
    pub fn frozen_mask(&self) -> Vec<bool> {
        self.entries
            .values()
            .flat_map(|e| core::iter::repeat_n(e.frozen, e.block.len()))
            .collect()
    }

    /// Offset of each block in the flat vector.
    pub fn offsets(&self) -> BTreeMap<NodeId, usize> {
        let mut at = 0;
        self.entries
            .iter()
            .map(|(id, e)| {
                let o = at;
                at += e.block.len();
                (*id, o)
            })
            .collect()
    }

    /// Fresh blocks for every parameterized node of `arch`, with holes bound
    /// to their relaxation. Blocks already present in `keep` at the same id
    /// and with a matching shape are copied (frozen flag included).
    pub fn initialize(
        arch: &Architecture,
        frames: usize,
        keep: Option<&ParameterStore>,
        ranges: &InitRanges,
        rng: &mut Rng,
    ) -> Self {
        let f = arch.features.count();
        let mut store = ParameterStore::new();
        for (i, node) in arch.nodes().into_iter().enumerate() {
            let id = NodeId(i as u32);
            let fresh = match node {
                Node::Morlet => Some(ParamBlock::morlet(&MorletParams {
                    s1: rng.random_range(ranges.s.0..ranges.s.1),
                    w1: rng.random_range(ranges.w.0..ranges.w.1),
                    s2: rng.random_range(ranges.s.0..ranges.s.1),
                    w2: rng.random_range(ranges.w.0..ranges.w.1),
                })),
                Node::Affine { features } => Some(ParamBlock::Affine {
                    weights: features
                        .iter()
                        .map(|_| rng.random_range(-ranges.affine..ranges.affine))
                        .collect(),
                    bias: 0.0,
                }),
                Node::Hole {
                    expects: HoleType::Program | HoleType::FilterProgram,
                } => Some(ParamBlock::Temporal {
                    weights: alloc::vec![0.0; frames * f],
                    bias: 0.0,
                }),
                Node::Hole {
                    expects: HoleType::Head,
                } => Some(ParamBlock::Dense {
                    weights: alloc::vec![0.0; f],
                    bias: 0.0,
                }),
                Node::Compose { .. } | Node::Disjunction { .. } => None,
            };
            let Some(fresh) = fresh else { continue };
            match keep.and_then(|k| k.entry(id)) {
                Some(kept) if core::mem::discriminant(&kept.block) == core::mem::discriminant(&fresh)
                    && kept.block.len() == fresh.len() =>
                {
                    store.entries.insert(id, kept.clone());
                }
                _ => store.insert(id, fresh),
            }
        }
        store
    }

    /// Checks that there is exactly one correctly shaped block per
    /// parameterized node (holes need a relaxation block).
    pub fn validate(&self, arch: &Architecture, frames: usize) -> Result<(), DslError> {
        let f = arch.features.count();
        let mut expected = 0;
        for (i, node) in arch.nodes().into_iter().enumerate() {
            let id = NodeId(i as u32);
            let ok = match (node, self.get(id)) {
                (Node::Compose { .. } | Node::Disjunction { .. }, None) => continue,
                (Node::Compose { .. } | Node::Disjunction { .. }, Some(_)) => false,
                (_, None) => return Err(DslError::MissingParams(id)),
                (Node::Morlet, Some(ParamBlock::Morlet { .. })) => true,
                (Node::Affine { features }, Some(ParamBlock::Affine { weights, .. })) => {
                    weights.len() == features.len()
                }
                (
                    Node::Hole {
                        expects: HoleType::Program | HoleType::FilterProgram,
                    },
                    Some(ParamBlock::Temporal { weights, .. }),
                ) => weights.len() == frames * f,
                (
                    Node::Hole {
                        expects: HoleType::Head,
                    },
                    Some(ParamBlock::Dense { weights, .. }),
                ) => weights.len() == f,
                _ => false,
            };
            if !ok {
                return Err(DslError::BlockMismatch(id));
            }
            expected += 1;
        }
        if expected != self.entries.len() {
            let stray = self
                .entries
                .keys()
                .find(|id| arch.node(**id).is_none())
                .copied()
                .unwrap_or(NodeId(0));
            return Err(DslError::BlockMismatch(stray));
        }
        Ok(())
    }
}

/// Head of a filter term: the explicit affine node or a dense relaxation.
#[derive(Debug, Clone)]
pub(crate) struct PreparedHead {
    pub id: NodeId,
    /// `None` for a dense head over every feature.
    pub features: Option<Vec<usize>>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum Term {
    Filter {
        morlet: NodeId,
        params: MorletParams,
        raw: [f64; 4],
        curve: Vec<f64>,
        head: PreparedHead,
    },
    Temporal {
        id: NodeId,
        weights: Vec<f64>,
        bias: f64,
    },
}

/// An architecture with its parameters resolved into a flat list of summed
/// logit terms, ready for repeated evaluation on windows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub(crate) terms: Vec<Term>,
    frames: usize,
    features: usize,
}

impl Prepared {
    /// Resolves a type-correct architecture whose holes (if any) are bound to
    /// relaxation blocks.
    pub fn new(arch: &Architecture, params: &ParameterStore, frames: usize) -> Result<Self, DslError> {
        type_check(arch)?;
        let nodes = arch.nodes();
        let f = arch.features.count();
        let block = |id: NodeId| params.get(id).ok_or(DslError::MissingParams(id));
        let mut terms = Vec::new();
        let mut stack: Vec<usize> = alloc::vec![0];
        while let Some(i) = stack.pop() {
            let id = NodeId(i as u32);
            match nodes[i] {
                Node::Disjunction { children } => {
                    let mut at = i + 1;
                    let mut starts = Vec::new();
                    for c in children {
                        starts.push(at);
                        at += c.subtree_size();
                    }
                    stack.extend(starts.into_iter().rev());
                }
                Node::Hole { .. } => match block(id)? {
                    ParamBlock::Temporal { weights, bias } if weights.len() == frames * f => {
                        terms.push(Term::Temporal {
                            id,
                            weights: weights.clone(),
                            bias: *bias,
                        })
                    }
                    _ => return Err(DslError::BlockMismatch(id)),
                },
                Node::Compose { .. } => {
                    let morlet = NodeId(id.0 + 1);
                    let head_id = NodeId(id.0 + 2);
                    let ParamBlock::Morlet { raw } = block(morlet)? else {
                        return Err(DslError::BlockMismatch(morlet));
                    };
                    let mp = MorletParams::from_array(raw.map(softplus));
                    let curve = filter::filter_curve(&mp, frames)?.into_weights();
                    let head = match (nodes[i + 2], block(head_id)?) {
                        (Node::Affine { features }, ParamBlock::Affine { weights, bias })
                            if weights.len() == features.len() =>
                        {
                            PreparedHead {
                                id: head_id,
                                features: Some(features.clone()),
                                weights: weights.clone(),
                                bias: *bias,
                            }
                        }
                        (Node::Hole { .. }, ParamBlock::Dense { weights, bias }) if weights.len() == f => {
                            PreparedHead {
                                id: head_id,
                                features: None,
                                weights: weights.clone(),
                                bias: *bias,
                            }
                        }
                        _ => return Err(DslError::BlockMismatch(head_id)),
                    };
                    terms.push(Term::Filter {
                        morlet,
                        params: mp,
                        raw: *raw,
                        curve,
                        head,
                    });
                }
                // Type checking guarantees every Morlet/Affine sits inside a Compose.
                Node::Morlet | Node::Affine { .. } => unreachable!("bare leaf at program position"),
            }
        }
        Ok(Self {
            terms,
            frames,
            features: f,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    fn check_window(&self, window: &WindowRef<'_>) -> Result<(), ShapeError> {
        if window.frames() != self.frames || window.features() != self.features {
            return Err(ShapeError::Window {
                frames: self.frames,
                features: self.features,
                found_frames: window.frames(),
                found_features: window.features(),
            });
        }
        Ok(())
    }

    /// Logit of each summed term, in program order.
    pub fn term_logits(&self, window: WindowRef<'_>) -> Result<Vec<f64>, ShapeError> {
        self.check_window(&window)?;
        Ok(self.terms.iter().map(|t| term_logit(t, &window)).collect())
    }

    pub fn logit(&self, window: WindowRef<'_>) -> Result<f64, ShapeError> {
        self.check_window(&window)?;
        Ok(self.logit_unchecked(&window))
    }

    #[inline]
    pub(crate) fn logit_unchecked(&self, window: &WindowRef<'_>) -> f64 {
        self.terms.iter().map(|t| term_logit(t, window)).sum()
    }

    pub fn predict(&self, window: WindowRef<'_>) -> Result<bool, ShapeError> {
        Ok(self.logit(window)? > 0.0)
    }
}

/// Filtered value of feature `f`: `sum_t curve[t] * x[t, f]`.
#[inline]
pub(crate) fn filtered(curve: &[f64], window: &WindowRef<'_>, f: usize) -> f64 {
    curve
        .iter()
        .enumerate()
        .map(|(t, c)| c * window.get(t, f))
        .sum()
}

#[inline]
pub(crate) fn term_logit(term: &Term, window: &WindowRef<'_>) -> f64 {
    match term {
        Term::Filter { curve, head, .. } => {
            let mut z = head.bias;
            match &head.features {
                Some(sel) => {
                    for (w, &f) in head.weights.iter().zip(sel) {
                        z += w * filtered(curve, window, f);
                    }
                }
                None => {
                    for (f, w) in head.weights.iter().enumerate() {
                        z += w * filtered(curve, window, f);
                    }
                }
            }
            z
        }
        Term::Temporal { weights, bias, .. } => {
            let nf = window.features();
            let mut z = *bias;
            for t in 0..window.frames() {
                let row = window.row(t);
                let w = &weights[t * nf..(t + 1) * nf];
                z += w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            }
            z
        }
    }
}

/// Logit of a complete program on one window.
pub fn evaluate(arch: &Architecture, params: &ParameterStore, window: WindowRef<'_>) -> Result<f64, DslError> {
    if !arch.is_complete() {
        return Err(DslError::Incomplete);
    }
    let p = Prepared::new(arch, params, window.frames())?;
    Ok(p.logit(window)?)
}

/// Morlet shape and curve of every filter-program child, in order.
pub fn filter_curves(
    arch: &Architecture,
    params: &ParameterStore,
    frames: usize,
) -> Result<Vec<(NodeId, MorletParams, FilterCurve)>, DslError> {
    let mut out = Vec::new();
    for (i, node) in arch.nodes().into_iter().enumerate() {
        if matches!(node, Node::Morlet) {
            let id = NodeId(i as u32);
            let p = params
                .get(id)
                .and_then(ParamBlock::morlet_params)
                .ok_or(DslError::MissingParams(id))?;
            out.push((id, p, filter::filter_curve(&p, frames)?));
        }
    }
    Ok(out)
}

/// Canonical one-line rendering of a program with its parameters.
pub fn pretty_print(arch: &Architecture, params: &ParameterStore) -> String {
    fn weights(w: &[f64]) -> String {
        let parts: Vec<String> = w.iter().map(|v| sig4(*v)).collect();
        format!("[{}]", parts.join(", "))
    }

    fn go(node: &Node, arch: &Architecture, params: &ParameterStore, next: &mut u32, out: &mut String) {
        let id = NodeId(*next);
        *next += 1;
        match node {
            Node::Hole { expects } => match params.get(id) {
                Some(ParamBlock::Temporal { .. } | ParamBlock::Dense { .. }) => {
                    out.push_str(&format!("<relaxed {}>", expects.label()))
                }
                _ => out.push_str(&format!("??{}", expects.label())),
            },
            Node::Morlet => match params.get(id).and_then(ParamBlock::morlet_params) {
                Some(p) => out.push_str(&format!(
                    "Morlet(s1={}, w1={}, s2={}, w2={})",
                    sig4(p.s1),
                    sig4(p.w1),
                    sig4(p.s2),
                    sig4(p.w2)
                )),
                None => out.push_str("Morlet(?)"),
            },
            Node::Affine { features } => {
                let names: Vec<String> = features
                    .iter()
                    .map(|&i| {
                        arch.features
                            .names
                            .get(i)
                            .cloned()
                            .unwrap_or_else(|| format!("f{i}"))
                    })
                    .collect();
                match params.get(id) {
                    Some(ParamBlock::Affine { weights: w, bias }) => out.push_str(&format!(
                        "Affine(feat=[{}], W={}, b={})",
                        names.join(", "),
                        weights(w),
                        sig4(*bias)
                    )),
                    _ => out.push_str(&format!("Affine(feat=[{}])", names.join(", "))),
                }
            }
            Node::Compose { first, then } => {
                go(first, arch, params, next, out);
                out.push_str(" |> ");
                go(then, arch, params, next, out);
            }
            Node::Disjunction { children } => {
                for (k, c) in children.iter().enumerate() {
                    if k > 0 {
                        out.push_str(" OR ");
                    }
                    out.push('(');
                    go(c, arch, params, next, out);
                    out.push(')');
                }
            }
        }
    }

    let mut out = String::new();
    let mut next = 0;
    go(&arch.root, arch, params, &mut next, &mut out);
    out
}

/// Architecture-only rendering (no parameters), used in search traces.
pub fn architecture_text(arch: &Architecture) -> String {
    pretty_print(arch, &ParameterStore::new())
}
