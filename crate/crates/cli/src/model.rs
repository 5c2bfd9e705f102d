//! Serialized model: the tuned tree, its input scaler and provenance.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use hfit::data::{Dataset, Metrics, Scaler};
use hfit::tree::{Child, FuzzyNode};
use hfit::{FisKind, FuzzyTree};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MODEL_FORMAT: &str = "hfit-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub repetition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub tree: FuzzyTree,
    pub provenance: Provenance,
}

impl Model {
    pub fn new(tree: FuzzyTree, scaler: Scaler, feature_names: Vec<String>, provenance: Provenance) -> Self {
        Self { format: MODEL_FORMAT.into(), version: MODEL_VERSION, feature_names, scaler, tree, provenance }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text).map_err(|e| CliError::ModelSyntax {
            path: origin.into(),
            offset: byte_offset(text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(CliError::Model {
                path: origin.into(),
                message: format!("unsupported format {} version {}", model.format, model.version),
            });
        }
        if model.scaler.n_features() != model.feature_names.len() {
            return Err(CliError::Model { path: origin.into(), message: "scaler and feature names disagree".into() });
        }
        if model.tree.required_inputs() > model.scaler.n_features() {
            return Err(CliError::Model {
                path: origin.into(),
                message: format!(
                    "tree reads feature {} but the model has {}",
                    model.tree.required_inputs(),
                    model.scaler.n_features()
                ),
            });
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_features()
    }

    /// Predictions for raw (unscaled) rows.
    pub fn predict(&self, raw: &Dataset) -> Result<Vec<f64>> {
        if raw.n_features() != self.n_features() {
            return Err(CliError::FeatureCount {
                expected: self.n_features(),
                names: self.feature_names.join(", "),
                found: raw.n_features(),
            });
        }
        let scaled = self.scaler.transform(raw)?;
        Ok(scaled.predict(&self.tree)?)
    }

    pub fn evaluate(&self, raw: &Dataset) -> Result<(Metrics, Vec<f64>)> {
        let pred = self.predict(raw)?;
        Ok((Metrics::compute(raw.targets(), &pred)?, pred))
    }
}

/// Zero-based byte offset of a 1-based line/column position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

/// One-based feature set, with runs of three or more written as `a..b`.
pub fn format_features(features: &BTreeSet<usize>) -> String {
    let ids: Vec<usize> = features.iter().map(|f| f + 1).collect();
    let mut parts = Vec::new();
    let mut i = 0;
    while i < ids.len() {
        let mut j = i;
        while j + 1 < ids.len() && ids[j + 1] == ids[j] + 1 {
            j += 1;
        }
        if j - i >= 2 {
            parts.push(format!("{}..{}", ids[i], ids[j]));
        } else {
            parts.extend(ids[i..=j].iter().map(|v| v.to_string()));
        }
        i = j + 1;
    }
    format!("{{{}}}", parts.join(", "))
}

pub fn summary_line(tree: &FuzzyTree) -> String {
    format!(
        "{} nodes, depth {}, {} parameters, features {}",
        tree.node_count(),
        tree.depth(),
        tree.parameter_count(),
        format_features(&tree.selected_features())
    )
}

/// Multi-line description: summary, then one line per node in pre-order.
pub fn describe(model: &Model) -> String {
    let tree = &model.tree;
    let mut out = String::new();
    let kind = match tree.kind {
        FisKind::Type1 => "type-1",
        FisKind::Type2 => "interval type-2",
    };
    writeln!(out, "{kind} fuzzy tree: {}", summary_line(tree)).unwrap();
    let mut next_id = 1;
    fn walk(node: &FuzzyNode, level: usize, next_id: &mut usize, names: &[String], out: &mut String) {
        let id = *next_id;
        *next_id += 1;
        let mut labels = Vec::new();
        let mut pending = Vec::new();
        let mut child_id = *next_id;
        for c in &node.children {
            match c {
                Child::Input(i) => {
                    let name = names.get(*i).cloned().unwrap_or_else(|| format!("x{}", i + 1));
                    labels.push(format!("x{} ({name})", i + 1));
                }
                Child::Node(n) => {
                    labels.push(format!("N{child_id}"));
                    child_id += subtree_nodes(n);
                    pending.push(n);
                }
            }
        }
        writeln!(
            out,
            "{}N{id}: level {level}, arity {}, {} rules <- {}",
            "  ".repeat(level - 1),
            node.arity(),
            node.rule_base.rule_count(),
            labels.join(", ")
        )
        .unwrap();
        for n in pending {
            walk(n, level + 1, next_id, names, out);
        }
    }
    walk(&tree.root, 1, &mut next_id, &model.feature_names, &mut out);
    out
}

fn subtree_nodes(node: &FuzzyNode) -> usize {
    let mut n = 0;
    node.for_each_node(&mut |_| n += 1);
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_formatting() {
        let set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(format_features(&set(&[0, 1, 2, 3, 4])), "{1..5}");
        assert_eq!(format_features(&set(&[0, 1])), "{1, 2}");
        assert_eq!(format_features(&set(&[0, 2, 3, 4, 7])), "{1, 3..5, 8}");
        assert_eq!(format_features(&set(&[])), "{}");
    }

    #[test]
    fn offsets_follow_lines() {
        let text = "ab\ncde\nf";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 2), 4);
        assert_eq!(byte_offset(text, 3, 1), 7);
    }
}
