//! Typed attributed graph metamodel and instance model.
//!
//! A [`Model`] is a set of typed nodes and edges conforming to a
//! [`Metamodel`]. Every successful mutation appends a [`ChangeRecord`] to the
//! model's journal; replaying the journal onto an empty model reconstructs the
//! node and edge sets exactly. The journal is what downstream incremental
//! match maintenance consumes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attribute kinds supported by node types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKind {
    Int,
    Real,
    Bool,
    #[serde(rename = "string")]
    Str,
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttrKind::Int => "int",
            AttrKind::Real => "real",
            AttrKind::Bool => "bool",
            AttrKind::Str => "string",
        };
        f.write_str(s)
    }
}

/// A runtime attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
}

impl AttrValue {
    pub fn kind(&self) -> AttrKind {
        match self {
            AttrValue::Int(_) => AttrKind::Int,
            AttrValue::Real(_) => AttrKind::Real,
            AttrValue::Bool(_) => AttrKind::Bool,
            AttrValue::Str(_) => AttrKind::Str,
        }
    }

    /// Normalize the value to a declared kind. Ints promote to reals; nothing
    /// else converts.
    pub fn coerce_to(&self, kind: AttrKind) -> Option<AttrValue> {
        match (self, kind) {
            (AttrValue::Int(v), AttrKind::Real) => Some(AttrValue::Real(*v as f64)),
            (v, k) if v.kind() == k => Some(v.clone()),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Int(v) => Some(*v as f64),
            AttrValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttrValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Int(v) => write!(f, "{v}"),
            AttrValue::Real(v) => write!(f, "{v}"),
            AttrValue::Bool(v) => write!(f, "{v}"),
            AttrValue::Str(v) => write!(f, "{v:?}"),
        }
    }
}

/// Declaration of a node type: name plus attribute schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTypeDef {
    pub name: String,
    #[serde(default)]
    pub attrs: Vec<AttrDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrDef {
    pub name: String,
    pub kind: AttrKind,
}

/// Declaration of an edge type. Edge type names are unique per source type,
/// so two node types may both declare a `source` edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTypeDef {
    pub name: String,
    pub src: String,
    pub tgt: String,
}

/// The type level: node type and edge type declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metamodel {
    #[serde(rename = "nodeTypes")]
    pub node_types: Vec<NodeTypeDef>,
    #[serde(rename = "edgeTypes")]
    pub edge_types: Vec<EdgeTypeDef>,
}

impl Metamodel {
    pub fn new(
        node_types: Vec<NodeTypeDef>,
        edge_types: Vec<EdgeTypeDef>,
    ) -> Result<Self, ModelError> {
        let mm = Metamodel {
            node_types,
            edge_types,
        };
        mm.check()?;
        Ok(mm)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let mm: Metamodel = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            detail: e.to_string(),
        })?;
        mm.check()?;
        Ok(mm)
    }

    fn check(&self) -> Result<(), ModelError> {
        let mut names = BTreeSet::new();
        for nt in &self.node_types {
            if !names.insert(nt.name.clone()) {
                return Err(ModelError::BadMetamodel {
                    detail: format!("duplicate node type `{}`", nt.name),
                });
            }
            let mut attrs = BTreeSet::new();
            for a in &nt.attrs {
                if !attrs.insert(a.name.clone()) {
                    return Err(ModelError::BadMetamodel {
                        detail: format!(
                            "duplicate attribute `{}` on node type `{}`",
                            a.name, nt.name
                        ),
                    });
                }
            }
        }
        let mut edge_keys = BTreeSet::new();
        for et in &self.edge_types {
            if !names.contains(&et.src) || !names.contains(&et.tgt) {
                return Err(ModelError::BadMetamodel {
                    detail: format!("edge type `{}` references unknown node type", et.name),
                });
            }
            if !edge_keys.insert((et.src.clone(), et.name.clone())) {
                return Err(ModelError::BadMetamodel {
                    detail: format!("duplicate edge type `{}` from `{}`", et.name, et.src),
                });
            }
        }
        Ok(())
    }

    pub fn node_type(&self, name: &str) -> Option<&NodeTypeDef> {
        self.node_types.iter().find(|t| t.name == name)
    }

    /// Resolve an edge type by name and source node type.
    pub fn edge_type(&self, name: &str, src_type: &str) -> Option<&EdgeTypeDef> {
        self.edge_types
            .iter()
            .find(|t| t.name == name && t.src == src_type)
    }

    pub fn attr_kind(&self, node_type: &str, attr: &str) -> Option<AttrKind> {
        self.node_type(node_type)?
            .attrs
            .iter()
            .find(|a| a.name == attr)
            .map(|a| a.kind)
    }
}

/// A typed node instance. Attribute keys and kinds match the declaration
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, AttrValue>,
}

/// A typed edge instance between two existing nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub src: String,
    pub tgt: String,
}

/// A requested model mutation, before validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Change {
    CreateNode {
        id: String,
        ty: String,
        attrs: BTreeMap<String, AttrValue>,
    },
    DeleteNode {
        id: String,
    },
    CreateEdge {
        id: String,
        ty: String,
        src: String,
        tgt: String,
    },
    DeleteEdge {
        id: String,
    },
    SetAttr {
        id: String,
        attr: String,
        value: AttrValue,
    },
}

/// A journaled mutation. Delete records carry the full removed element so the
/// journal alone reconstructs (and can be audited against) any model state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ChangeKind {
    CreateNode {
        node: Node,
    },
    DeleteNode {
        node: Node,
    },
    CreateEdge {
        edge: Edge,
    },
    DeleteEdge {
        edge: Edge,
    },
    SetAttr {
        id: String,
        attr: String,
        old: AttrValue,
        new: AttrValue,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub version: u64,
    #[serde(flatten)]
    pub kind: ChangeKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("parse error: {detail}")]
    Parse { detail: String },
    #[error("invalid metamodel: {detail}")]
    BadMetamodel { detail: String },
    #[error("type error on element `{id}`: {detail}")]
    Type { id: String, detail: String },
    #[error("element `{id}` not found")]
    NotFound { id: String },
    #[error("element `{id}` already exists")]
    Duplicate { id: String },
    #[error("cannot delete node `{id}`: incident edges remain ({edges:?})")]
    DanglingEdge { id: String, edges: Vec<String> },
}

/// A validation finding: element id plus reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDiagnostic {
    pub id: String,
    pub reason: String,
}

/// Serialized form: nodes and edges only. The journal is not part of the
/// interchange format; loading seeds a fresh one.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    #[serde(default)]
    nodes: Vec<Node>,
    #[serde(default)]
    edges: Vec<Edge>,
}

/// Typed attributed graph instance with a mutation journal.
///
/// Single-writer: at most one mutator at a time; readers may share freely
/// between mutations.
#[derive(Debug, Clone)]
pub struct Model {
    metamodel: Metamodel,
    nodes: BTreeMap<String, Node>,
    edges: BTreeMap<String, Edge>,
    /// Node ids grouped by node type, kept in sync with `nodes`.
    by_type: BTreeMap<String, BTreeSet<String>>,
    /// Incident edge ids per node id (both directions).
    out_edges: BTreeMap<String, BTreeSet<String>>,
    in_edges: BTreeMap<String, BTreeSet<String>>,
    journal: Vec<ChangeRecord>,
    /// Version of the state just before the first retained journal record.
    base_version: u64,
    version: u64,
}

impl Model {
    pub fn empty(metamodel: Metamodel) -> Self {
        Model {
            metamodel,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            by_type: BTreeMap::new(),
            out_edges: BTreeMap::new(),
            in_edges: BTreeMap::new(),
            journal: Vec::new(),
            base_version: 0,
            version: 0,
        }
    }

    /// Load a model from its JSON document form, validating every element
    /// against the metamodel. The journal is seeded with one create record
    /// per element (nodes first, then edges, each in id order).
    pub fn load(text: &str, metamodel: &Metamodel) -> Result<Self, ModelError> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            detail: e.to_string(),
        })?;
        let mut model = Model::empty(metamodel.clone());
        let mut nodes = doc.nodes;
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for n in nodes {
            model.mutate(Change::CreateNode {
                id: n.id,
                ty: n.ty,
                attrs: n.attrs,
            })?;
        }
        let mut edges = doc.edges;
        edges.sort_by(|a, b| a.id.cmp(&b.id));
        for e in edges {
            model.mutate(Change::CreateEdge {
                id: e.id,
                ty: e.ty,
                src: e.src,
                tgt: e.tgt,
            })?;
        }
        Ok(model)
    }

    /// Serialize nodes and edges to the JSON document form (ids sorted).
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }

    pub fn metamodel(&self) -> &Metamodel {
        &self.metamodel
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Version of the state preceding the oldest retained journal record.
    pub fn base_version(&self) -> u64 {
        self.base_version
    }

    pub fn journal(&self) -> &[ChangeRecord] {
        &self.journal
    }

    /// Journal records with version strictly greater than `after`.
    pub fn journal_since(&self, after: u64) -> Option<&[ChangeRecord]> {
        if after < self.base_version || after > self.version {
            return None;
        }
        let skip = (after - self.base_version) as usize;
        Some(&self.journal[skip..])
    }

    /// Drop journal records up to and including `up_to`. Consumers holding
    /// state older than `up_to` become stale.
    pub fn compact_journal(&mut self, up_to: u64) {
        let up_to = up_to.min(self.version);
        if up_to <= self.base_version {
            return;
        }
        let drop = (up_to - self.base_version) as usize;
        self.journal.drain(..drop);
        self.base_version = up_to;
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Ids of all nodes of the given type, in id order.
    pub fn nodes_of_type(&self, ty: &str) -> impl Iterator<Item = &str> {
        self.by_type
            .get(ty)
            .into_iter()
            .flatten()
            .map(|s| s.as_str())
    }

    pub fn count_of_type(&self, ty: &str) -> usize {
        self.by_type.get(ty).map_or(0, |s| s.len())
    }

    /// Outgoing edges of a node, in edge-id order.
    pub fn out_edges(&self, id: &str) -> impl Iterator<Item = &Edge> {
        self.out_edges
            .get(id)
            .into_iter()
            .flatten()
            .map(|eid| &self.edges[eid])
    }

    /// Incoming edges of a node, in edge-id order.
    pub fn in_edges(&self, id: &str) -> impl Iterator<Item = &Edge> {
        self.in_edges
            .get(id)
            .into_iter()
            .flatten()
            .map(|eid| &self.edges[eid])
    }

    /// Is there at least one edge of the given type between the two nodes?
    pub fn has_edge(&self, ty: &str, src: &str, tgt: &str) -> bool {
        self.out_edges(src).any(|e| e.ty == ty && e.tgt == tgt)
    }

    pub fn attr(&self, id: &str, attr: &str) -> Option<&AttrValue> {
        self.nodes.get(id)?.attrs.get(attr)
    }

    /// Structural equality: same nodes (ids, types, attrs) and same edges.
    /// Journal and version are deliberately excluded so that two models that
    /// reached the same state along different mutation orders compare equal.
    pub fn graph_eq(&self, other: &Model) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }

    /// Apply one mutation. On success the version increases by exactly one
    /// and the returned record is also appended to the journal. On error the
    /// model is unchanged.
    pub fn mutate(&mut self, change: Change) -> Result<ChangeRecord, ModelError> {
        let kind = match change {
            Change::CreateNode { id, ty, attrs } => {
                if self.nodes.contains_key(&id) {
                    return Err(ModelError::Duplicate { id });
                }
                let node = self.check_node(id, ty, attrs)?;
                self.by_type
                    .entry(node.ty.clone())
                    .or_default()
                    .insert(node.id.clone());
                self.nodes.insert(node.id.clone(), node.clone());
                ChangeKind::CreateNode { node }
            }
            Change::DeleteNode { id } => {
                let node = self
                    .nodes
                    .get(&id)
                    .cloned()
                    .ok_or(ModelError::NotFound { id: id.clone() })?;
                let mut incident: Vec<String> = self
                    .out_edges
                    .get(&id)
                    .into_iter()
                    .flatten()
                    .cloned()
                    .collect();
                incident.extend(self.in_edges.get(&id).into_iter().flatten().cloned());
                if !incident.is_empty() {
                    incident.sort();
                    incident.dedup();
                    return Err(ModelError::DanglingEdge {
                        id,
                        edges: incident,
                    });
                }
                self.nodes.remove(&id);
                if let Some(set) = self.by_type.get_mut(&node.ty) {
                    set.remove(&id);
                }
                self.out_edges.remove(&id);
                self.in_edges.remove(&id);
                ChangeKind::DeleteNode { node }
            }
            Change::CreateEdge { id, ty, src, tgt } => {
                if self.edges.contains_key(&id) {
                    return Err(ModelError::Duplicate { id });
                }
                let src_node = self
                    .nodes
                    .get(&src)
                    .ok_or(ModelError::NotFound { id: src.clone() })?;
                let tgt_node = self
                    .nodes
                    .get(&tgt)
                    .ok_or(ModelError::NotFound { id: tgt.clone() })?;
                let et = self.metamodel.edge_type(&ty, &src_node.ty).ok_or_else(|| {
                    ModelError::Type {
                        id: id.clone(),
                        detail: format!("no edge type `{}` from `{}`", ty, src_node.ty),
                    }
                })?;
                if et.tgt != tgt_node.ty {
                    return Err(ModelError::Type {
                        id,
                        detail: format!(
                            "edge type `{}` targets `{}`, got node of type `{}`",
                            ty, et.tgt, tgt_node.ty
                        ),
                    });
                }
                let edge = Edge { id, ty, src, tgt };
                self.out_edges
                    .entry(edge.src.clone())
                    .or_default()
                    .insert(edge.id.clone());
                self.in_edges
                    .entry(edge.tgt.clone())
                    .or_default()
                    .insert(edge.id.clone());
                self.edges.insert(edge.id.clone(), edge.clone());
                ChangeKind::CreateEdge { edge }
            }
            Change::DeleteEdge { id } => {
                let edge = self
                    .edges
                    .remove(&id)
                    .ok_or(ModelError::NotFound { id: id.clone() })?;
                if let Some(set) = self.out_edges.get_mut(&edge.src) {
                    set.remove(&id);
                }
                if let Some(set) = self.in_edges.get_mut(&edge.tgt) {
                    set.remove(&id);
                }
                ChangeKind::DeleteEdge { edge }
            }
            Change::SetAttr { id, attr, value } => {
                let node = self
                    .nodes
                    .get(&id)
                    .ok_or(ModelError::NotFound { id: id.clone() })?;
                let kind =
                    self.metamodel
                        .attr_kind(&node.ty, &attr)
                        .ok_or_else(|| ModelError::Type {
                            id: id.clone(),
                            detail: format!("node type `{}` has no attribute `{}`", node.ty, attr),
                        })?;
                let new = value.coerce_to(kind).ok_or_else(|| ModelError::Type {
                    id: id.clone(),
                    detail: format!("attribute `{attr}` expects {kind}, got {}", value.kind()),
                })?;
                let node = self.nodes.get_mut(&id).expect("checked above");
                let old = node
                    .attrs
                    .insert(attr.clone(), new.clone())
                    .expect("attrs are total");
                ChangeKind::SetAttr { id, attr, old, new }
            }
        };
        self.version += 1;
        let record = ChangeRecord {
            version: self.version,
            kind,
        };
        self.journal.push(record.clone());
        Ok(record)
    }

    fn check_node(
        &self,
        id: String,
        ty: String,
        attrs: BTreeMap<String, AttrValue>,
    ) -> Result<Node, ModelError> {
        let tdef = self
            .metamodel
            .node_type(&ty)
            .ok_or_else(|| ModelError::Type {
                id: id.clone(),
                detail: format!("unknown node type `{ty}`"),
            })?;
        let mut normalized = BTreeMap::new();
        for adef in &tdef.attrs {
            let value = attrs.get(&adef.name).ok_or_else(|| ModelError::Type {
                id: id.clone(),
                detail: format!("missing attribute `{}`", adef.name),
            })?;
            let value = value.coerce_to(adef.kind).ok_or_else(|| ModelError::Type {
                id: id.clone(),
                detail: format!(
                    "attribute `{}` expects {}, got {}",
                    adef.name,
                    adef.kind,
                    value.kind()
                ),
            })?;
            normalized.insert(adef.name.clone(), value);
        }
        if let Some(extra) = attrs.keys().find(|k| !normalized.contains_key(*k)) {
            return Err(ModelError::Type {
                id,
                detail: format!("attribute `{extra}` is not declared on `{ty}`"),
            });
        }
        Ok(Node {
            id,
            ty,
            attrs: normalized,
        })
    }

    /// Total validation pass. An empty result means every type invariant
    /// holds; otherwise each diagnostic names the offending element.
    pub fn validate(&self) -> Vec<ModelDiagnostic> {
        let mut out = Vec::new();
        for node in self.nodes.values() {
            match self.metamodel.node_type(&node.ty) {
                None => out.push(ModelDiagnostic {
                    id: node.id.clone(),
                    reason: format!("unknown node type `{}`", node.ty),
                }),
                Some(tdef) => {
                    for adef in &tdef.attrs {
                        match node.attrs.get(&adef.name) {
                            None => out.push(ModelDiagnostic {
                                id: node.id.clone(),
                                reason: format!("missing attribute `{}`", adef.name),
                            }),
                            Some(v) if v.kind() != adef.kind => out.push(ModelDiagnostic {
                                id: node.id.clone(),
                                reason: format!(
                                    "attribute `{}` has kind {}, expected {}",
                                    adef.name,
                                    v.kind(),
                                    adef.kind
                                ),
                            }),
                            Some(_) => {}
                        }
                    }
                    for name in node.attrs.keys() {
                        if tdef.attrs.iter().all(|a| a.name != *name) {
                            out.push(ModelDiagnostic {
                                id: node.id.clone(),
                                reason: format!(
                                    "attribute `{name}` is not declared on `{}`",
                                    node.ty
                                ),
                            });
                        }
                    }
                }
            }
        }
        for edge in self.edges.values() {
            let src = self.nodes.get(&edge.src);
            let tgt = self.nodes.get(&edge.tgt);
            if src.is_none() || tgt.is_none() {
                out.push(ModelDiagnostic {
                    id: edge.id.clone(),
                    reason: "edge endpoint does not exist".into(),
                });
                continue;
            }
            match self.metamodel.edge_type(&edge.ty, &src.unwrap().ty) {
                None => out.push(ModelDiagnostic {
                    id: edge.id.clone(),
                    reason: format!("no edge type `{}` from `{}`", edge.ty, src.unwrap().ty),
                }),
                Some(et) if et.tgt != tgt.unwrap().ty => out.push(ModelDiagnostic {
                    id: edge.id.clone(),
                    reason: format!("edge targets `{}`, expected `{}`", tgt.unwrap().ty, et.tgt),
                }),
                Some(_) => {}
            }
        }
        out
    }

    /// Force-remove a node without the dangling-edge guard or journaling.
    /// Test-only escape hatch for producing invalid models.
    #[doc(hidden)]
    pub fn force_remove_node(&mut self, id: &str) {
        if let Some(node) = self.nodes.remove(id) {
            if let Some(set) = self.by_type.get_mut(&node.ty) {
                set.remove(id);
            }
        }
    }

    /// Force-write an attribute bypassing kind checks and journaling.
    /// Test-only escape hatch for producing invalid models.
    #[doc(hidden)]
    pub fn force_set_attr(&mut self, id: &str, attr: &str, value: AttrValue) {
        if let Some(node) = self.nodes.get_mut(id) {
            node.attrs.insert(attr.to_string(), value);
        }
    }
}

/// Replay journal records onto an empty model. Only create/delete/set-attr
/// effects are applied; the records' own versions are ignored in favor of the
/// replayed model's counter.
pub fn replay_journal(
    metamodel: &Metamodel,
    records: &[ChangeRecord],
) -> Result<Model, ModelError> {
    let mut model = Model::empty(metamodel.clone());
    for rec in records {
        let change = match &rec.kind {
            ChangeKind::CreateNode { node } => Change::CreateNode {
                id: node.id.clone(),
                ty: node.ty.clone(),
                attrs: node.attrs.clone(),
            },
            ChangeKind::DeleteNode { node } => Change::DeleteNode {
                id: node.id.clone(),
            },
            ChangeKind::CreateEdge { edge } => Change::CreateEdge {
                id: edge.id.clone(),
                ty: edge.ty.clone(),
                src: edge.src.clone(),
                tgt: edge.tgt.clone(),
            },
            ChangeKind::DeleteEdge { edge } => Change::DeleteEdge {
                id: edge.id.clone(),
            },
            ChangeKind::SetAttr { id, attr, new, .. } => Change::SetAttr {
                id: id.clone(),
                attr: attr.clone(),
                value: new.clone(),
            },
        };
        model.mutate(change)?;
    }
    Ok(model)
}
