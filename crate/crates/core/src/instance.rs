//! Instance and deflator files.
//!
//! ```json
//! {
//!   "horizon": 1,
//!   "nodes": [{"id": "r", "time": 0, "parent": null, "prob": "1"}, ...],
//!   "generators": {"stock": {"r": "1", "u": "2", "d": "1/2"}},
//!   "rays": {"growth": {"A": {...}, "B": {...}}},
//!   "dominating": "stock",
//!   "raw": {"Z": {"a": ["5", "6", "9"], "b": ["5", "2", "1"]}}
//! }
//! ```

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deflator::{Deflator, SupportMode};
use crate::gsm::{GsmError, RawProcess};
use crate::process::{GeneratorSet, ProcessError, Ray};
use crate::rational::{fmt_q, parse_q, QText, Q};
use crate::tree::{EventTree, NodeSpec, Process, TreeError, TreeSpec};

pub type NodeValues = IndexMap<String, QText>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RayFile {
    #[serde(rename = "A")]
    pub a: NodeValues,
    #[serde(rename = "B")]
    pub b: NodeValues,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub horizon: usize,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub generators: IndexMap<String, NodeValues>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub rays: IndexMap<String, RayFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominating: Option<String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub raw: IndexMap<String, IndexMap<String, Vec<QText>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("nodes: {0}")]
    Tree(#[from] TreeError),
    #[error("generators: {0}")]
    Process(#[from] ProcessError),
    #[error("{field}: {source}")]
    Raw { field: String, source: GsmError },
    #[error("unknown gallery instance {name:?}; available: {available}")]
    UnknownGallery { name: String, available: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl From<serde_json::Error> for InstanceError {
    fn from(e: serde_json::Error) -> Self {
        InstanceError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub gens: GeneratorSet,
    pub dominating: Option<String>,
    pub raw: IndexMap<String, RawProcess>,
}

fn node_values(tree: &EventTree, field: &str, values: &NodeValues) -> Result<Process, InstanceError> {
    let err = |message: String| InstanceError::Field { field: field.to_string(), message };
    for id in values.keys() {
        if tree.index_of(id).is_none() {
            return Err(err(format!("unknown node {id:?}")));
        }
    }
    (0..tree.len())
        .map(|n| values.get(tree.id(n)).map(|v| v.0.clone()).ok_or_else(|| err(format!("missing value for node {:?}", tree.id(n)))))
        .collect::<Result<Vec<_>, _>>()
        .map(Process)
}

fn to_values(tree: &EventTree, p: &Process) -> NodeValues {
    (0..tree.len()).map(|n| (tree.id(n).to_string(), QText(p.0[n].clone()))).collect()
}

impl Instance {
    pub fn from_file(file: &InstanceFile) -> Result<Self, InstanceError> {
        let tree = EventTree::build(&TreeSpec { nodes: file.nodes.clone(), horizon: file.horizon })?;
        let singles = file
            .generators
            .iter()
            .map(|(name, v)| Ok((name.clone(), node_values(&tree, &format!("generators.{name}"), v)?)))
            .collect::<Result<Vec<_>, InstanceError>>()?;
        let rays = file
            .rays
            .iter()
            .map(|(name, r)| {
                Ok(Ray {
                    name: name.clone(),
                    a: node_values(&tree, &format!("rays.{name}.A"), &r.a)?,
                    b: node_values(&tree, &format!("rays.{name}.B"), &r.b)?,
                })
            })
            .collect::<Result<Vec<_>, InstanceError>>()?;
        let mut raw = IndexMap::new();
        for (name, rows) in &file.raw {
            let rows: IndexMap<String, Vec<Q>> =
                rows.iter().map(|(k, v)| (k.clone(), v.iter().map(|x| x.0.clone()).collect())).collect();
            let p = RawProcess::from_rows(&tree, &rows).map_err(|source| InstanceError::Raw { field: format!("raw.{name}"), source })?;
            raw.insert(name.clone(), p);
        }
        let gens = GeneratorSet::new(tree, singles, rays)?;
        if let Some(d) = &file.dominating {
            if gens.resolve(d).is_none() {
                return Err(InstanceError::Field { field: "dominating".into(), message: format!("unknown process {d:?}") });
            }
        }
        Ok(Instance { gens, dominating: file.dominating.clone(), raw })
    }

    pub fn to_file(&self) -> InstanceFile {
        let tree = &self.gens.tree;
        let spec = tree.to_spec();
        InstanceFile {
            horizon: spec.horizon,
            nodes: spec.nodes,
            generators: self.gens.singles.iter().map(|(n, p)| (n.clone(), to_values(tree, p))).collect(),
            rays: self
                .gens
                .rays
                .iter()
                .map(|r| (r.name.clone(), RayFile { a: to_values(tree, &r.a), b: to_values(tree, &r.b) }))
                .collect(),
            dominating: self.dominating.clone(),
            raw: self
                .raw
                .iter()
                .map(|(name, p)| {
                    let rows = p.to_rows(tree).into_iter().map(|(k, v)| (k, v.into_iter().map(QText).collect())).collect();
                    (name.clone(), rows)
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Instance::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    /// sha256 of the compact canonical JSON.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(&self.to_file()).expect("instance serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dominating_process(&self) -> Option<Process> {
        self.dominating.as_ref().and_then(|d| self.gens.resolve(d))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeflatorFile {
    pub mode: SupportMode,
    pub delta: QText,
    pub values: NodeValues,
}

impl DeflatorFile {
    pub fn from_deflator(tree: &EventTree, d: &Deflator) -> Self {
        DeflatorFile { mode: d.mode, delta: QText(d.delta.clone()), values: to_values(tree, &d.y) }
    }

    pub fn process(&self, tree: &EventTree) -> Result<Process, InstanceError> {
        node_values(tree, "values", &self.values)
    }

    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("deflator serializes")
    }
}

/// Node id → rational string, for reports.
pub fn render_values(tree: &EventTree, p: &Process) -> IndexMap<String, String> {
    (0..tree.len()).map(|n| (tree.id(n).to_string(), fmt_q(&p.0[n]))).collect()
}

/// Parses a comma-separated list of rationals.
pub fn parse_q_list(text: &str) -> Result<Vec<Q>, InstanceError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            parse_q(s.trim()).map_err(|e| InstanceError::Field { field: "list".into(), message: format!("{s:?}: {e}") })
        })
        .collect()
}
