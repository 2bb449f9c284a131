//! Filter curves as plain tables for plotting.

use std::path::{Path, PathBuf};

use serde::Serialize;
use tfsynth_core::dsl::{filter_curves, Node, NodeId, ParamBlock};

use crate::document::ProgramDocument;
use crate::error::{CliError, Result};

/// Parameters of one exported filter, written next to its curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterSidecar {
    /// Position of the filter among the program's filters.
    pub filter: usize,
    pub node: u32,
    pub s1: f64,
    pub w1: f64,
    pub s2: f64,
    pub w2: f64,
    pub frames: usize,
    pub output_rate: u32,
    pub features: Vec<String>,
    pub affine_weights: Vec<f64>,
    pub affine_bias: Option<f64>,
}

/// Writes `filter_<i>.csv` (`frame_offset,seconds_offset,weight`) and
/// `filter_<i>.json` for every filter of the program; returns the CSV paths.
pub fn export_filters(doc: &ProgramDocument, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let params = doc.params();
    let curves = filter_curves(&doc.architecture, &params, doc.frames)?;
    if curves.is_empty() {
        return Err(CliError::Validation("program has no filters to export".into()));
    }
    let mut out = Vec::new();
    for (i, (id, mp, curve)) in curves.iter().enumerate() {
        let mut csv = String::from("frame_offset,seconds_offset,weight\n");
        for (off, w) in curve.frame_offsets().zip(curve.weights()) {
            let secs = off as f64 / doc.output_rate as f64;
            csv.push_str(&format!("{off},{secs},{w}\n"));
        }
        let path = dir.join(format!("filter_{i}.csv"));
        crate::write_text(&path, &csv)?;

        let head = NodeId(id.0 + 1);
        let features = match doc.architecture.node(head) {
            Some(Node::Affine { features }) => features
                .iter()
                .map(|&f| doc.architecture.features.names[f].clone())
                .collect(),
            _ => Vec::new(),
        };
        let (affine_weights, affine_bias) = match params.get(head) {
            Some(ParamBlock::Affine { weights, bias }) => (weights.clone(), Some(*bias)),
            _ => (Vec::new(), None),
        };
        let side = FilterSidecar {
            filter: i,
            node: id.0,
            s1: mp.s1,
            w1: mp.w1,
            s2: mp.s2,
            w2: mp.w2,
            frames: doc.frames,
            output_rate: doc.output_rate,
            features,
            affine_weights,
            affine_bias,
        };
        crate::write_json(&path.with_extension("json"), &side)?;
        out.push(path);
    }
    Ok(out)
}
