//! Top-down search over program architectures.
//!
//! Each search node is a partial or complete architecture. Edges fill the
//! leftmost hole with one grammar rule. A partial node is scored by training
//! a relaxation in which every hole is an unconstrained temporal filter (or
//! a dense head), so its trained error approximately lower-bounds every
//! completion; a complete node is trained in full and scored exactly. The
//! score of a node is `lambda * structural_cost + (1 - validation F1)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::WindowedDataset;
use crate::dsl::{
    architecture_text, structural_cost, type_check, Architecture, DslError, FeatureSpace, HoleType, InitRanges,
    Node, NodeId, ParameterStore, RuleCostTable,
};
use crate::rng::{derive_seed, seeded};
use crate::train::{fit, TrainConfig, TrainError, TrainReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("node is complete; nothing to expand")]
    NothingToExpand,
    #[error("search budget exhausted without a complete program (deepest partial: {deepest})")]
    BudgetExhausted { deepest: String },
    #[error("invalid search configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Program(#[from] DslError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    BestFirst,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SearchConfig {
    /// Rule applications from the start node.
    pub max_depth: usize,
    pub strategy: Strategy,
    /// Keep only this many frontier nodes after each expansion.
    pub beam_width: Option<usize>,
    /// Epochs for training a relaxation.
    pub heuristic_epochs: usize,
    /// Weight of structural cost against validation error.
    pub lambda: f64,
    /// Most nodes trained (relaxations and completions) in best-first mode.
    pub max_nodes: usize,
    /// Hole type of the start node.
    pub root: HoleType,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            strategy: Strategy::BestFirst,
            beam_width: None,
            heuristic_epochs: 20,
            lambda: 0.01,
            max_nodes: 200,
            root: HoleType::Program,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.max_depth == 0 {
            return Err(SearchError::Config("max depth must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SearchError::Config("lambda must be non-negative"));
        }
        if self.beam_width == Some(0) {
            return Err(SearchError::Config("beam width must be at least 1"));
        }
        if self.root == HoleType::Head {
            return Err(SearchError::Config("search must start from a program hole"));
        }
        Ok(())
    }
}

/// Everything a synthesis run needs besides data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthesisConfig {
    pub search: SearchConfig,
    pub train: TrainConfig,
    pub costs: RuleCostTable,
    pub init: InitRanges,
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub arch: Architecture,
    pub structural_cost: f64,
    /// `lambda * cost + validation error`; exact for complete nodes.
    pub heuristic: f64,
    pub report: Option<TrainReport>,
    pub depth: usize,
    /// Trained parameters (relaxation blocks included for partial nodes).
    pub params: Option<ParameterStore>,
}

impl SearchNode {
    pub fn new(arch: Architecture, costs: &RuleCostTable) -> Result<Self, DslError> {
        let structural_cost = structural_cost(&arch, costs)?;
        Ok(Self {
            arch,
            structural_cost,
            heuristic: 0.0,
            report: None,
            depth: 0,
            params: None,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.arch.is_complete()
    }
}

/// One grammar step: every rule applicable at the leftmost hole.
pub fn expand_architecture(arch: &Architecture) -> Result<Vec<Architecture>, SearchError> {
    let (id, hole) = *arch.holes().first().ok_or(SearchError::NothingToExpand)?;
    let replacements: Vec<Node> = match hole {
        HoleType::Program => alloc::vec![
            Node::filter_program(Node::hole(HoleType::Head)),
            Node::Disjunction {
                children: alloc::vec![
                    Node::hole(HoleType::FilterProgram),
                    Node::hole(HoleType::FilterProgram),
                ],
            },
        ],
        HoleType::FilterProgram => alloc::vec![Node::filter_program(Node::hole(HoleType::Head))],
        HoleType::Head => arch
            .features
            .affine_choices()
            .into_iter()
            .map(|features| Node::Affine { features })
            .collect(),
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in replacements {
        let child = arch.replace(id, r).expect("hole id comes from this architecture");
        if type_check(&child).is_ok() && seen.insert(child.root.clone()) {
            out.push(child);
        }
    }
    Ok(out)
}

/// Children of a search node, one per rule at its leftmost hole.
pub fn expand(node: &SearchNode, costs: &RuleCostTable) -> Result<Vec<SearchNode>, SearchError> {
    expand_architecture(&node.arch)?
        .into_iter()
        .map(|arch| {
            let mut child = SearchNode::new(arch, costs)?;
            child.depth = node.depth + 1;
            Ok(child)
        })
        .collect()
}

/// Every architecture reachable from `start` within `max_depth` steps, in
/// breadth-first order, with its depth.
pub fn enumerate(start: &Architecture, max_depth: usize) -> Vec<(Architecture, usize)> {
    let mut out = alloc::vec![(start.clone(), 0)];
    let mut seen = BTreeSet::new();
    seen.insert(start.root.clone());
    let mut at = 0;
    while at < out.len() {
        let (arch, depth) = out[at].clone();
        at += 1;
        if depth == max_depth || arch.is_complete() {
            continue;
        }
        for child in expand_architecture(&arch).expect("partial") {
            if seen.insert(child.root.clone()) {
                out.push((child, depth + 1));
            }
        }
    }
    out
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Seed for training one architecture; independent of visit order.
fn node_seed(seed: u64, arch: &Architecture) -> u64 {
    derive_seed(seed, fnv1a(&architecture_text(arch)))
}

/// Trains `arch` (holes relaxed) with `train_cfg` and returns
/// `(objective, report, params)`.
fn score_architecture(
    arch: &Architecture,
    keep: Option<&ParameterStore>,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
    train_cfg: &TrainConfig,
) -> Result<(f64, TrainReport, ParameterStore), SearchError> {
    let seed = node_seed(config.search.seed, arch);
    let mut rng = seeded(seed);
    let mut params = ParameterStore::initialize(arch, train.frames(), keep, &config.init, &mut rng);
    let cfg = TrainConfig {
        seed: derive_seed(seed, 1),
        ..train_cfg.clone()
    };
    let report = fit(arch, &mut params, train, val, &cfg)?;
    let cost = structural_cost(arch, &config.costs)?;
    let objective = config.search.lambda * cost + (1.0 - report.best_val_f1);
    Ok((objective, report, params))
}

/// Relaxation score of a node: `lambda * s(node) + (1 - val F1)` of the
/// program with every hole replaced by its trained relaxation. Uses the
/// heuristic epoch budget.
pub fn heuristic(
    node: &SearchNode,
    keep: Option<&ParameterStore>,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
) -> Result<(f64, TrainReport, ParameterStore), SearchError> {
    let cfg = TrainConfig {
        max_epochs: config.search.heuristic_epochs,
        ..config.train.clone()
    };
    score_architecture(&node.arch, keep, train, val, config, &cfg)
}

/// One line of the search trace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    /// Position in visit order (unique across stages).
    pub id: usize,
    pub parent: Option<usize>,
    /// Disjunction stage (1-based).
    pub stage: usize,
    pub depth: usize,
    pub architecture: String,
    pub complete: bool,
    pub structural_cost: f64,
    pub heuristic: f64,
    /// Validation F1 of the trained (relaxed) program, if it was trained.
    pub val_f1: Option<f64>,
    pub epochs: Option<usize>,
    /// `true` once the node was popped and expanded.
    pub expanded: bool,
}

/// Result of a synthesis run.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub arch: Architecture,
    pub params: ParameterStore,
    /// `lambda * structural cost + (1 - val F1)`.
    pub objective: f64,
    pub structural_cost: f64,
    pub val_f1: f64,
    pub report: TrainReport,
    pub trace: Vec<TraceRecord>,
}

struct Entry {
    node: SearchNode,
    trace_id: usize,
    insertion: usize,
}

struct Run<'a, S> {
    train: &'a WindowedDataset,
    val: &'a WindowedDataset,
    config: &'a SynthesisConfig,
    keep: Option<&'a ParameterStore>,
    stage: usize,
    trace: Vec<TraceRecord>,
    id_base: usize,
    sink: S,
}

impl<S: FnMut(&TraceRecord)> Run<'_, S> {
    fn record(&mut self, node: &SearchNode, parent: Option<usize>) -> usize {
        let id = self.id_base + self.trace.len();
        let rec = TraceRecord {
            id,
            parent,
            stage: self.stage,
            depth: node.depth,
            architecture: architecture_text(&node.arch),
            complete: node.is_complete(),
            structural_cost: node.structural_cost,
            heuristic: node.heuristic,
            val_f1: node.report.as_ref().map(|r| r.best_val_f1),
            epochs: node.report.as_ref().map(|r| r.epochs_run),
            expanded: false,
        };
        (self.sink)(&rec);
        self.trace.push(rec);
        id
    }

    fn mark_expanded(&mut self, id: usize) {
        let rec = &mut self.trace[id - self.id_base];
        rec.expanded = true;
        (self.sink)(rec);
    }

    /// Trains the node: in full if complete, as a relaxation otherwise.
    fn evaluate(&self, node: &mut SearchNode) -> Result<(), SearchError> {
        let (h, report, params) = if node.is_complete() {
            score_architecture(&node.arch, self.keep, self.train, self.val, self.config, &self.config.train)?
        } else {
            heuristic(node, self.keep, self.train, self.val, self.config)?
        };
        node.heuristic = h;
        node.report = Some(report);
        node.params = Some(params);
        Ok(())
    }

    fn finish(&self, best: Entry) -> Synthesis {
        let node = best.node;
        Synthesis {
            objective: node.heuristic,
            structural_cost: node.structural_cost,
            val_f1: node.report.as_ref().map_or(0.0, |r| r.best_val_f1),
            report: node.report.expect("complete nodes are trained"),
            params: node.params.expect("complete nodes are trained"),
            arch: node.arch,
            trace: self.trace.clone(),
        }
    }

    fn best_first(&mut self, start: Architecture) -> Result<Synthesis, SearchError> {
        let cfg = &self.config.search;
        let mut root = SearchNode::new(start, &self.config.costs)?;
        self.evaluate(&mut root)?;
        let mut trained = 1;
        let mut insertion = 0;
        let mut seen = BTreeSet::new();
        seen.insert(root.arch.root.clone());
        let root_id = self.record(&root, None);
        let mut frontier = alloc::vec![Entry {
            node: root,
            trace_id: root_id,
            insertion,
        }];
        let mut best_complete: Option<Entry> = None;
        let mut deepest: Option<(usize, String)> = None;

        while !frontier.is_empty() {
            // Lowest score, then lower structural cost, then insertion order.
            let pick = (0..frontier.len())
                .min_by(|&a, &b| {
                    let (x, y) = (&frontier[a], &frontier[b]);
                    x.node
                        .heuristic
                        .total_cmp(&y.node.heuristic)
                        .then(x.node.structural_cost.total_cmp(&y.node.structural_cost))
                        .then(x.insertion.cmp(&y.insertion))
                })
                .expect("non-empty");
            let entry = frontier.swap_remove(pick);
            if entry.node.is_complete() {
                return Ok(self.finish(entry));
            }
            if deepest.as_ref().is_none_or(|(d, _)| entry.node.depth > *d) {
                deepest = Some((entry.node.depth, architecture_text(&entry.node.arch)));
            }
            if entry.node.depth >= cfg.max_depth {
                continue;
            }
            self.mark_expanded(entry.trace_id);
            for mut child in expand(&entry.node, &self.config.costs)? {
                if !seen.insert(child.arch.root.clone()) {
                    continue;
                }
                if trained >= cfg.max_nodes {
                    break;
                }
                self.evaluate(&mut child)?;
                trained += 1;
                insertion += 1;
                let id = self.record(&child, Some(entry.trace_id));
                let better = |b: &Entry| child.heuristic < b.node.heuristic;
                if child.is_complete() && best_complete.as_ref().is_none_or(better) {
                    best_complete = Some(Entry {
                        node: child.clone(),
                        trace_id: id,
                        insertion,
                    });
                }
                frontier.push(Entry {
                    node: child,
                    trace_id: id,
                    insertion,
                });
            }
            if let Some(k) = cfg.beam_width {
                if frontier.len() > k {
                    frontier.sort_by(|x, y| {
                        x.node
                            .heuristic
                            .total_cmp(&y.node.heuristic)
                            .then(x.node.structural_cost.total_cmp(&y.node.structural_cost))
                            .then(x.insertion.cmp(&y.insertion))
                    });
                    frontier.truncate(k);
                }
            }
            if trained >= cfg.max_nodes {
                break;
            }
        }
        match best_complete {
            Some(b) => Ok(self.finish(b)),
            None => Err(SearchError::BudgetExhausted {
                deepest: deepest.map(|d| d.1).unwrap_or_default(),
            }),
        }
    }

    fn exhaustive(&mut self, start: Architecture) -> Result<Synthesis, SearchError> {
        let max_depth = self.config.search.max_depth;
        let mut ids: BTreeMap<Node, usize> = BTreeMap::new();
        let mut best: Option<Entry> = None;
        let all = enumerate(&start, max_depth);
        for (insertion, (arch, depth)) in all.into_iter().enumerate() {
            let parent = parent_of(&arch, &start).and_then(|p| ids.get(&p.root).copied());
            let mut node = SearchNode::new(arch, &self.config.costs)?;
            node.depth = depth;
            node.heuristic = self.config.search.lambda * node.structural_cost;
            if node.is_complete() {
                self.evaluate(&mut node)?;
            }
            let id = self.record(&node, parent);
            if !node.is_complete() && depth < max_depth {
                self.mark_expanded(id);
            }
            ids.insert(node.arch.root.clone(), id);
            if node.is_complete() {
                let better = |b: &Entry| {
                    node.heuristic
                        .total_cmp(&b.node.heuristic)
                        .then(node.structural_cost.total_cmp(&b.node.structural_cost))
                        .is_lt()
                };
                if best.as_ref().is_none_or(better) {
                    best = Some(Entry {
                        node,
                        trace_id: id,
                        insertion,
                    });
                }
            }
        }
        match best {
            Some(b) => Ok(self.finish(b)),
            None => Err(SearchError::BudgetExhausted {
                deepest: String::new(),
            }),
        }
    }
}

/// The architecture one grammar step above `arch`: its last-filled position
/// turned back into a hole. Only used to link exhaustive trace records.
fn parent_of(arch: &Architecture, start: &Architecture) -> Option<Architecture> {
    if arch.root == start.root {
        return None;
    }
    // Rules fill the leftmost hole, so the most recent step filled the
    // rightmost non-hole rule site preceding the first hole.
    let nodes = arch.nodes();
    let first_hole = arch.holes().first().map(|h| h.0 .0 as usize).unwrap_or(nodes.len());
    let mut sites: Vec<(NodeId, HoleType)> = Vec::new();
    let start_nodes = start.nodes().len();
    for (i, n) in nodes.iter().enumerate().take(first_hole) {
        let id = NodeId(i as u32);
        match n {
            Node::Affine { .. } => sites.push((id, HoleType::Head)),
            Node::Compose { .. } => {
                let in_disj = matches!(arch.root, Node::Disjunction { .. });
                sites.push((id, if in_disj { HoleType::FilterProgram } else { start_hole_type(start) }))
            }
            Node::Disjunction { .. } if i == 0 && start_nodes == 1 => sites.push((id, HoleType::Program)),
            _ => {}
        }
    }
    for (id, hole) in sites.into_iter().rev() {
        if let Some(p) = arch.replace(id, Node::hole(hole)) {
            if expand_architecture(&p).ok()?.contains(arch) {
                return Some(p);
            }
        }
    }
    None
}

fn start_hole_type(start: &Architecture) -> HoleType {
    match start.root {
        Node::Hole { expects } => expects,
        _ => HoleType::FilterProgram,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_search<S: FnMut(&TraceRecord)>(
    start: Architecture,
    keep: Option<&ParameterStore>,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
    stage: usize,
    id_base: usize,
    sink: S,
) -> Result<Synthesis, SearchError> {
    config.search.validate()?;
    config.train.validate()?;
    config.costs.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrain.into());
    }
    if val.is_empty() {
        return Err(TrainError::EmptyVal.into());
    }
    let mut run = Run {
        train,
        val,
        config,
        keep,
        stage,
        trace: Vec::new(),
        id_base,
        sink,
    };
    match config.search.strategy {
        Strategy::BestFirst => run.best_first(start),
        Strategy::Exhaustive => run.exhaustive(start),
    }
}

/// Searches for the program minimizing `lambda * s + (1 - val F1)`.
pub fn synthesize(
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
) -> Result<Synthesis, SearchError> {
    synthesize_traced(train, val, config, |_: &TraceRecord| {})
}

/// [`synthesize`] reporting every trace record to `sink` as it is created
/// or marked expanded.
pub fn synthesize_traced(
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
    sink: impl FnMut(&TraceRecord),
) -> Result<Synthesis, SearchError> {
    let start = Architecture::new(train.feature_space().clone(), Node::hole(config.search.root));
    run_search(start, None, train, val, config, 1, 0, sink)
}

/// Parameter store with every node id shifted by `by`.
fn shift_ids(params: &ParameterStore, by: u32) -> ParameterStore {
    let mut out = ParameterStore::new();
    for (id, e) in params.iter() {
        let nid = NodeId(id.0 + by);
        out.insert(nid, e.block.clone());
        out.set_frozen(nid, e.frozen);
    }
    out
}

/// Builds a disjunction of `k` filters by `k` successive searches. After
/// each stage the parameters found so far are frozen, and the next search
/// fills one new child while the summed logit includes the frozen ones.
pub fn synthesize_disjunction(
    k: usize,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
) -> Result<Synthesis, SearchError> {
    synthesize_disjunction_traced(k, train, val, config, |_: &TraceRecord| {})
}

pub fn synthesize_disjunction_traced(
    k: usize,
    train: &WindowedDataset,
    val: &WindowedDataset,
    config: &SynthesisConfig,
    mut sink: impl FnMut(&TraceRecord),
) -> Result<Synthesis, SearchError> {
    if k == 0 {
        return Err(SearchError::Config("a disjunction needs at least one filter"));
    }
    let mut current = synthesize_traced(train, val, config, &mut sink)?;
    let mut trace = current.trace.clone();
    for stage in 2..=k {
        let mut frozen = current.params.clone();
        frozen.freeze_all();
        let (children, frozen) = match &current.arch.root {
            Node::Disjunction { children } => (children.clone(), frozen),
            single => (alloc::vec![single.clone()], shift_ids(&frozen, 1)),
        };
        let mut kids = children;
        kids.push(Node::hole(HoleType::FilterProgram));
        let start = Architecture::new(current.arch.features.clone(), Node::Disjunction { children: kids });
        let next = run_search(
            start,
            Some(&frozen),
            train,
            val,
            config,
            stage,
            trace.len(),
            &mut sink,
        )?;
        trace.extend(next.trace.iter().cloned());
        current = next;
    }
    current.trace = trace;
    Ok(current)
}

/// Feature space helper for tests and tools: `count` unnamed features.
pub fn unnamed_space(count: usize) -> FeatureSpace {
    FeatureSpace::unnamed(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> FeatureSpace {
        FeatureSpace::unnamed(n)
    }

    #[test]
    fn root_expansions() {
        let costs = RuleCostTable::default();
        let filter_root = SearchNode::new(
            Architecture::new(space(2), Node::hole(HoleType::FilterProgram)),
            &costs,
        )
        .unwrap();
        let kids = expand(&filter_root, &costs).unwrap();
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].arch.root, Node::filter_program(Node::hole(HoleType::Head)));
        assert_eq!(kids[0].depth, 1);

        let program_root = SearchNode::new(Architecture::root_hole(space(2)), &costs).unwrap();
        assert_eq!(expand(&program_root, &costs).unwrap().len(), 2);

        let done = SearchNode::new(Architecture::single(space(2), &[0]), &costs).unwrap();
        assert!(matches!(expand(&done, &costs), Err(SearchError::NothingToExpand)));
    }

    #[test]
    fn affine_expansion_with_pairs() {
        // Six per-mouse features for each animal plus three shared ones.
        let pairs: Vec<[usize; 2]> = (0..6).map(|i| [i, i + 6]).collect();
        let fs = FeatureSpace::unnamed(15).with_pairs(pairs);
        let arch = Architecture::new(fs, Node::filter_program(Node::hole(HoleType::Head)));
        let kids = expand_architecture(&arch).unwrap();
        assert_eq!(kids.len(), 15 + 6);
        assert!(kids.iter().all(|k| type_check(&k.clone()).is_ok() && k.is_complete()));
    }

    /// Hand count for F = 2 without pairs: three affine choices.
    /// depth 0: ??program
    /// depth 1: Morlet |> ??head, ??filter OR ??filter
    /// depth 2: three single programs, (Morlet |> ??head) OR ??filter
    /// depth 3: three (complete) OR ??filter
    #[test]
    fn closure_at_depth_three() {
        let all = enumerate(&Architecture::root_hole(space(2)), 3);
        let per_depth = |d| all.iter().filter(|(_, x)| *x == d).count();
        assert_eq!(per_depth(0), 1);
        assert_eq!(per_depth(1), 2);
        assert_eq!(per_depth(2), 4);
        assert_eq!(per_depth(3), 3);
        // 4 + 2a with a = F + C(F, 2) affine choices.
        assert_eq!(all.len(), 4 + 2 * 3);
        assert_eq!(all.iter().filter(|(a, _)| a.is_complete()).count(), 3);
        for (a, _) in &all {
            assert!(type_check(a).is_ok());
        }
    }

    #[test]
    fn parent_links_are_one_step() {
        let start = Architecture::root_hole(space(2));
        for (arch, depth) in enumerate(&start, 5) {
            match parent_of(&arch, &start) {
                None => assert_eq!(depth, 0),
                Some(p) => assert!(expand_architecture(&p).unwrap().contains(&arch)),
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = SearchConfig {
            max_depth: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SearchConfig {
            lambda: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(SearchConfig::default().validate().is_ok());
    }
}
