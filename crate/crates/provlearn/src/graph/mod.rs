//! Typed heterogeneous multigraph store.
//!
//! Edges are grouped per canonical relation — the (source type, edge type,
//! destination type) triple — because message passing and per-relation
//! Laplacians both iterate exactly those slices. Parallel edges are kept:
//! multiplicity carries signal. Self-loops are allowed; spectral code decides
//! their treatment locally.

mod binary;
mod json;
mod schema;

pub use schema::DatasetSchema;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::{AttrMap, ProvDocument};

/// (source type, edge type, destination type) naming one relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalRelation {
    pub src_type: String,
    pub edge_type: String,
    pub dst_type: String,
}

impl CanonicalRelation {
    pub fn new(
        src_type: impl Into<String>,
        edge_type: impl Into<String>,
        dst_type: impl Into<String>,
    ) -> Self {
        CanonicalRelation {
            src_type: src_type.into(),
            edge_type: edge_type.into(),
            dst_type: dst_type.into(),
        }
    }
}

impl fmt::Display for CanonicalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.src_type, self.edge_type, self.dst_type)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Attack,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Attack => "attack",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "benign" => Ok(Label::Benign),
            "attack" => Ok(Label::Attack),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Nodes of one type: ids in insertion order, attributes stored sparsely.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeTable {
    pub ids: Vec<String>,
    pub attributes: BTreeMap<u32, AttrMap>,
}

impl NodeTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// All edges of one canonical relation, as per-type index pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeList {
    pub endpoints: Vec<(u32, u32)>,
    pub attributes: BTreeMap<u32, AttrMap>,
}

impl EdgeList {
    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    BinaryCompressed,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge `{edge}` references undeclared node `{node}`")]
    DanglingEndpoint { edge: String, node: String },
    #[error("node id `{id}` already declared")]
    IdCollision { id: String },
    #[error("corrupt payload at byte {offset}: {detail}")]
    CorruptPayload { offset: usize, detail: String },
    #[error("malformed graph JSON: {detail}")]
    MalformedJson { detail: String },
}

/// Counting summary of one graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_relation_types: usize,
    pub node_type_histogram: BTreeMap<String, usize>,
    pub edge_type_histogram: BTreeMap<String, usize>,
    pub relation_histogram: BTreeMap<String, usize>,
}

/// Immutable after build/deserialize; safe to share across readers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeteroMultigraph {
    node_types: Vec<String>,
    edge_types: Vec<String>,
    nodes: Vec<NodeTable>,
    relations: IndexMap<CanonicalRelation, EdgeList>,
    pub label: Option<Label>,
    pub scenario: Option<String>,
}

impl HeteroMultigraph {
    pub fn empty() -> Self {
        HeteroMultigraph::default()
    }

    /// Build from a normalized document. Node ordering within a type follows
    /// first appearance; unknown endpoint ids (possible only when the
    /// document skipped normalization) are rejected.
    pub fn from_document(doc: &ProvDocument) -> Result<Self, GraphError> {
        let mut builder = GraphBuilder::new();
        for node in &doc.nodes {
            builder.add_node_with_attrs(
                &node.node_type,
                node.id.clone(),
                node.attributes.clone(),
            )?;
        }
        for edge in &doc.edges {
            builder.add_edge_by_id(&edge.relation, &edge.src, &edge.dst, edge.attributes.clone())?;
        }
        Ok(builder.build())
    }

    /// Assemble from pre-built tables without per-edge validation. Caller
    /// upholds the structural invariants: `nodes` aligned with `node_types`,
    /// relation types present in the type tables, endpoint indices in range,
    /// no empty edge lists, globally unique node ids.
    pub(crate) fn from_parts(
        node_types: Vec<String>,
        edge_types: Vec<String>,
        nodes: Vec<NodeTable>,
        relations: IndexMap<CanonicalRelation, EdgeList>,
        label: Option<Label>,
        scenario: Option<String>,
    ) -> Self {
        debug_assert_eq!(node_types.len(), nodes.len());
        HeteroMultigraph { node_types, edge_types, nodes, relations, label, scenario }
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[String] {
        &self.edge_types
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn node_table(&self, type_id: usize) -> &NodeTable {
        &self.nodes[type_id]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().map(NodeTable::len).sum()
    }

    pub fn num_edges(&self) -> usize {
        self.relations.values().map(EdgeList::len).sum()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&CanonicalRelation, &EdgeList)> {
        self.relations.iter()
    }

    pub fn relation(&self, rel: &CanonicalRelation) -> Option<&EdgeList> {
        self.relations.get(rel)
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn stats(&self) -> GraphStats {
        let mut node_type_histogram = BTreeMap::new();
        for (name, table) in self.node_types.iter().zip(&self.nodes) {
            if !table.is_empty() {
                node_type_histogram.insert(name.clone(), table.len());
            }
        }
        let mut edge_type_histogram: BTreeMap<String, usize> = BTreeMap::new();
        let mut relation_histogram = BTreeMap::new();
        for (rel, list) in &self.relations {
            *edge_type_histogram.entry(rel.edge_type.clone()).or_insert(0) += list.len();
            relation_histogram.insert(rel.to_string(), list.len());
        }
        GraphStats {
            num_nodes: self.num_nodes(),
            num_edges: self.num_edges(),
            num_relation_types: self.relations.len(),
            node_type_histogram,
            edge_type_histogram,
            relation_histogram,
        }
    }

    /// Serialize to the requested format. Identical graphs always produce
    /// identical bytes.
    pub fn serialize(&self, format: GraphFormat) -> Vec<u8> {
        match format {
            GraphFormat::Json => json::encode(self),
            GraphFormat::BinaryCompressed => binary::encode(self),
        }
    }

    /// Binary serialization with an opaque feature section appended; the
    /// feature code owns the blob layout.
    pub(crate) fn serialize_with_blob(&self, blob: &[u8]) -> Vec<u8> {
        binary::encode_with_blob(self, Some(blob))
    }

    pub(crate) fn deserialize_with_blob(
        bytes: &[u8],
    ) -> Result<(Self, Option<Vec<u8>>), GraphError> {
        binary::decode_with_blob(bytes)
    }

    /// Inverse of [`serialize`](Self::serialize); the format is detected from
    /// the leading bytes.
    pub fn deserialize(bytes: &[u8]) -> Result<Self, GraphError> {
        if bytes.starts_with(binary::MAGIC) {
            return binary::decode(bytes);
        }
        let head = bytes.iter().copied().find(|b| !b.is_ascii_whitespace());
        match head {
            Some(b'{') => json::decode(bytes),
            _ => Err(GraphError::CorruptPayload {
                offset: 0,
                detail: "unrecognized payload (neither PGRF nor JSON object)".to_string(),
            }),
        }
    }

    /// Equality on shape: types, ids, edge lists, and label. Attribute maps
    /// and the scenario tag are excluded because the JSON form does not carry
    /// them.
    pub fn structurally_equal(&self, other: &Self) -> bool {
        self.node_types == other.node_types
            && self.edge_types == other.edge_types
            && self.label == other.label
            && self.nodes.iter().map(|t| &t.ids).eq(other.nodes.iter().map(|t| &t.ids))
            && self.relations.len() == other.relations.len()
            && self
                .relations
                .iter()
                .zip(&other.relations)
                .all(|((ra, la), (rb, lb))| ra == rb && la.endpoints == lb.endpoints)
    }

    /// Disjoint union. Node ids must be globally unique across inputs.
    pub fn merge(graphs: &[HeteroMultigraph]) -> Result<HeteroMultigraph, GraphError> {
        Self::merge_impl(graphs, false)
    }

    /// Disjoint union with ids rewritten to `g<i>:<id>`, so inputs with
    /// overlapping id spaces never collide.
    pub fn merge_namespaced(graphs: &[HeteroMultigraph]) -> HeteroMultigraph {
        Self::merge_impl(graphs, true).expect("namespaced ids cannot collide")
    }

    fn merge_impl(graphs: &[HeteroMultigraph], namespace: bool) -> Result<Self, GraphError> {
        let mut builder = GraphBuilder::new();
        for (gi, g) in graphs.iter().enumerate() {
            // Per-graph offset of each node type's index range in the output.
            let mut base: Vec<u32> = Vec::with_capacity(g.node_types.len());
            for (name, table) in g.node_types.iter().zip(&g.nodes) {
                let mut first = None;
                for (i, id) in table.ids.iter().enumerate() {
                    let id = if namespace { format!("g{gi}:{id}") } else { id.clone() };
                    let attrs = table.attributes.get(&(i as u32)).cloned().unwrap_or_default();
                    let node = builder.add_node_with_attrs(name, id, attrs)?;
                    if first.is_none() {
                        first = Some(node.index);
                    }
                }
                base.push(first.unwrap_or(0));
            }
            for (rel, list) in &g.relations {
                let src_type = g.type_index(&rel.src_type).expect("relation endpoint type") as u32;
                let dst_type = g.type_index(&rel.dst_type).expect("relation endpoint type") as u32;
                let out_src = builder.type_id(&rel.src_type).expect("type registered above");
                let out_dst = builder.type_id(&rel.dst_type).expect("type registered above");
                for (i, &(s, d)) in list.endpoints.iter().enumerate() {
                    let attrs = list.attributes.get(&(i as u32)).cloned().unwrap_or_default();
                    builder.add_edge_with_attrs(
                        &rel.edge_type,
                        NodeRef { type_id: out_src, index: base[src_type as usize] + s },
                        NodeRef { type_id: out_dst, index: base[dst_type as usize] + d },
                        attrs,
                    );
                }
            }
        }
        let mut labels = graphs.iter().map(|g| g.label);
        let label = labels.next().flatten().filter(|_| {
            graphs.iter().all(|g| g.label == graphs[0].label)
        });
        let mut out = builder.build();
        out.label = label;
        Ok(out)
    }
}

/// Handle to a node added through [`GraphBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef {
    pub type_id: u32,
    pub index: u32,
}

/// Incremental construction; enforces global node-id uniqueness and dense
/// per-type indices.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    graph: HeteroMultigraph,
    type_ids: HashMap<String, u32>,
    node_ids: HashMap<String, NodeRef>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder::default()
    }

    pub fn add_node(
        &mut self,
        node_type: &str,
        id: impl Into<String>,
    ) -> Result<NodeRef, GraphError> {
        self.add_node_with_attrs(node_type, id, AttrMap::new())
    }

    pub fn add_node_with_attrs(
        &mut self,
        node_type: &str,
        id: impl Into<String>,
        attrs: AttrMap,
    ) -> Result<NodeRef, GraphError> {
        let id = id.into();
        if self.node_ids.contains_key(&id) {
            return Err(GraphError::IdCollision { id });
        }
        let type_id = match self.type_ids.get(node_type) {
            Some(&t) => t,
            None => {
                let t = self.graph.node_types.len() as u32;
                self.graph.node_types.push(node_type.to_string());
                self.graph.nodes.push(NodeTable::default());
                self.type_ids.insert(node_type.to_string(), t);
                t
            }
        };
        let table = &mut self.graph.nodes[type_id as usize];
        let node = NodeRef { type_id, index: table.ids.len() as u32 };
        if !attrs.is_empty() {
            table.attributes.insert(node.index, attrs);
        }
        table.ids.push(id.clone());
        self.node_ids.insert(id, node);
        Ok(node)
    }

    pub fn add_edge(&mut self, edge_type: &str, src: NodeRef, dst: NodeRef) {
        self.add_edge_with_attrs(edge_type, src, dst, AttrMap::new());
    }

    pub fn add_edge_with_attrs(
        &mut self,
        edge_type: &str,
        src: NodeRef,
        dst: NodeRef,
        attrs: AttrMap,
    ) {
        if !self.graph.edge_types.iter().any(|t| t == edge_type) {
            self.graph.edge_types.push(edge_type.to_string());
        }
        let rel = CanonicalRelation::new(
            self.graph.node_types[src.type_id as usize].clone(),
            edge_type,
            self.graph.node_types[dst.type_id as usize].clone(),
        );
        let list = self.graph.relations.entry(rel).or_default();
        if !attrs.is_empty() {
            list.attributes.insert(list.endpoints.len() as u32, attrs);
        }
        list.endpoints.push((src.index, dst.index));
    }

    pub fn add_edge_by_id(
        &mut self,
        edge_type: &str,
        src_id: &str,
        dst_id: &str,
        attrs: AttrMap,
    ) -> Result<(), GraphError> {
        let endpoint = |ids: &HashMap<String, NodeRef>, id: &str| {
            ids.get(id).copied().ok_or_else(|| GraphError::DanglingEndpoint {
                edge: edge_type.to_string(),
                node: id.to_string(),
            })
        };
        let src = endpoint(&self.node_ids, src_id)?;
        let dst = endpoint(&self.node_ids, dst_id)?;
        self.add_edge_with_attrs(edge_type, src, dst, attrs);
        Ok(())
    }

    pub fn node_ref(&self, id: &str) -> Option<NodeRef> {
        self.node_ids.get(id).copied()
    }

    pub fn type_id(&self, node_type: &str) -> Option<u32> {
        self.type_ids.get(node_type).copied()
    }

    pub fn set_label(&mut self, label: Label) {
        self.graph.label = Some(label);
    }

    pub fn set_scenario(&mut self, scenario: impl Into<String>) {
        self.graph.scenario = Some(scenario.into());
    }

    pub fn build(self) -> HeteroMultigraph {
        self.graph
    }
}
