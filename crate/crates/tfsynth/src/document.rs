//! JSON document holding a program: its architecture, parameter blocks
//! keyed by preorder node id, and the ids of frozen blocks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tfsynth_core::dsl::{pretty_print, type_check, Architecture, NodeId, ParamBlock, ParameterStore, Prepared};

use crate::error::{CliError, Result};

pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramDocument {
    pub version: u32,
    pub architecture: Architecture,
    pub parameters: BTreeMap<u32, ParamBlock>,
    pub frozen: Vec<u32>,
    /// Window length the program was trained on, at `output_rate` Hz.
    pub frames: usize,
    pub output_rate: u32,
    /// Human-readable rendering; ignored on load.
    #[serde(default)]
    pub text: String,
}

impl ProgramDocument {
    pub fn new(arch: &Architecture, params: &ParameterStore, frames: usize, output_rate: u32) -> Self {
        Self {
            version: DOCUMENT_VERSION,
            architecture: arch.clone(),
            parameters: params.iter().map(|(id, e)| (id.0, e.block.clone())).collect(),
            frozen: params.iter().filter(|(_, e)| e.frozen).map(|(id, _)| id.0).collect(),
            frames,
            output_rate,
            text: pretty_print(arch, params),
        }
    }

    pub fn params(&self) -> ParameterStore {
        let mut p = ParameterStore::new();
        for (&id, block) in &self.parameters {
            p.insert(NodeId(id), block.clone());
        }
        for &id in &self.frozen {
            p.set_frozen(NodeId(id), true);
        }
        p
    }

    /// Checks version, types, and that every block matches its node.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.version != DOCUMENT_VERSION {
            return Err(format!("unsupported document version {}", self.version));
        }
        type_check(&self.architecture).map_err(|e| e.to_string())?;
        if let Some(id) = self.frozen.iter().find(|id| !self.parameters.contains_key(id)) {
            return Err(format!("frozen id {id} has no parameter block"));
        }
        Prepared::new(&self.architecture, &self.params(), self.frames).map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let doc: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e.to_string()))?;
        Self::from_json(&text).map_err(|m| CliError::input(path, m))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_text(path, &self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tfsynth_core::dsl::FeatureSpace;
    use tfsynth_core::filter::MorletParams;

    fn sample() -> (Architecture, ParameterStore) {
        let arch = Architecture::single(FeatureSpace::unnamed(2), &[1]);
        let mut p = ParameterStore::new();
        p.insert(NodeId(1), ParamBlock::morlet(&MorletParams::symmetric(2.0, 1.0)));
        p.insert(
            NodeId(2),
            ParamBlock::Affine {
                weights: vec![1.5],
                bias: -0.2,
            },
        );
        p.set_frozen(NodeId(1), true);
        (arch, p)
    }

    #[test]
    fn round_trip() {
        let (a, p) = sample();
        let doc = ProgramDocument::new(&a, &p, 61, 6);
        let back = ProgramDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.params(), p);
        assert_eq!(back.frozen, [1]);
    }

    #[test]
    fn rejects_bad_documents() {
        let (a, p) = sample();
        let mut doc = ProgramDocument::new(&a, &p, 61, 6);
        doc.version = 9;
        assert!(ProgramDocument::from_json(&doc.to_json()).is_err());
        let mut doc = ProgramDocument::new(&a, &p, 61, 6);
        doc.parameters.remove(&2);
        assert!(ProgramDocument::from_json(&doc.to_json()).is_err());
        assert!(ProgramDocument::from_json("{\"version\":1}").is_err());
    }
}
