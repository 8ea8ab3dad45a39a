//! Labeled directed knowledge-graph model.
//!
//! A graph is a set of typed, attributed nodes plus a set of
//! `(source, relation, target)` triples. Node identifiers are globally
//! meaningful strings ("Patient_6381"), so two graphs can be aligned by
//! identity alone — the property the whole metric suite relies on.

mod io;

pub use io::{read_graph, read_graph_str, write_graph, write_graph_string};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node not found: {0}")]
    NodeNotFound(String),
    #[error("empty graph")]
    EmptyGraph,
    #[error("duplicate node id: {0}")]
    DuplicateNode(String),
    #[error("self-loop rejected on node: {0}")]
    SelfLoop(String),
    #[error("invalid identifier or label: {0:?}")]
    InvalidToken(String),
    #[error("triple references unknown node: {0}")]
    DanglingTriple(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Opaque node identifier, unique within a graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        NodeId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A typed, attributed entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub entity_type: String,
    /// Attribute map, kept sorted so serialization is canonical.
    pub attributes: BTreeMap<String, String>,
}

impl Node {
    pub fn new(id: impl Into<String>, entity_type: impl Into<String>) -> Self {
        Node {
            id: NodeId::new(id),
            entity_type: entity_type.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }
}

/// One `(source, relation, target)` edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub source: NodeId,
    pub relation: String,
    pub target: NodeId,
}

impl Triple {
    pub fn new(
        source: impl Into<String>,
        relation: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Triple {
            source: NodeId::new(source),
            relation: relation.into(),
            target: NodeId::new(target),
        }
    }
}

/// Which incident triples a neighborhood query considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Outgoing,
    Incoming,
    Both,
}

/// Tag on a returned neighbor telling how it is connected to the query node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DirTag {
    Out,
    In,
}

impl DirTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DirTag::Out => "out",
            DirTag::In => "in",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    pub entity_types: BTreeSet<String>,
    pub relations: BTreeSet<String>,
}

/// Immutable after construction; build through [`GraphBuilder`].
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Triple>,
    schema: Schema,
    // adjacency caches, rebuilt by the builder
    out_edges: HashMap<NodeId, Vec<Triple>>,
    in_edges: HashMap<NodeId, Vec<Triple>>,
}

impl PartialEq for KnowledgeGraph {
    /// Equality on (node id set, edge set) — the comparison metrics use.
    fn eq(&self, other: &Self) -> bool {
        self.node_ids().eq(other.node_ids()) && self.edges == other.edges
    }
}
impl Eq for KnowledgeGraph {}

impl KnowledgeGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.nodes.keys()
    }

    pub fn node_id_set(&self) -> BTreeSet<NodeId> {
        self.nodes.keys().cloned().collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Triple> {
        self.edges.iter()
    }

    pub fn edge_set(&self) -> &BTreeSet<Triple> {
        &self.edges
    }

    pub fn contains_edge(&self, t: &Triple) -> bool {
        self.edges.contains(t)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn nodes_of_type<'a>(&'a self, entity_type: &'a str) -> impl Iterator<Item = &'a Node> {
        self.nodes.values().filter(move |n| n.entity_type == entity_type)
    }

    /// 1-hop neighborhood of `v`, sorted by (relation, neighbor id, tag).
    pub fn neighborhood(
        &self,
        v: &NodeId,
        direction: Direction,
    ) -> Result<Vec<(NodeId, String, DirTag)>, GraphError> {
        if !self.contains_node(v) {
            return Err(GraphError::NodeNotFound(v.0.clone()));
        }
        let mut out = Vec::new();
        if matches!(direction, Direction::Outgoing | Direction::Both) {
            if let Some(es) = self.out_edges.get(v) {
                for t in es {
                    out.push((t.target.clone(), t.relation.clone(), DirTag::Out));
                }
            }
        }
        if matches!(direction, Direction::Incoming | Direction::Both) {
            if let Some(es) = self.in_edges.get(v) {
                for t in es {
                    out.push((t.source.clone(), t.relation.clone(), DirTag::In));
                }
            }
        }
        out.sort_by(|a, b| (&a.1, &a.0, a.2).cmp(&(&b.1, &b.0, b.2)));
        Ok(out)
    }

    /// Triples incident to `v` under `direction`, paired with the tag
    /// relative to `v`. Sorted the same way as [`neighborhood`].
    pub fn incident_triples(
        &self,
        v: &NodeId,
        direction: Direction,
    ) -> Result<Vec<(Triple, DirTag)>, GraphError> {
        if !self.contains_node(v) {
            return Err(GraphError::NodeNotFound(v.0.clone()));
        }
        let mut out = Vec::new();
        if matches!(direction, Direction::Outgoing | Direction::Both) {
            if let Some(es) = self.out_edges.get(v) {
                for t in es {
                    out.push((t.clone(), DirTag::Out));
                }
            }
        }
        if matches!(direction, Direction::Incoming | Direction::Both) {
            if let Some(es) = self.in_edges.get(v) {
                for t in es {
                    out.push((t.clone(), DirTag::In));
                }
            }
        }
        out.sort_by(|a, b| {
            let ka = (&a.0.relation, neighbor_of(&a.0, v), a.1);
            let kb = (&b.0.relation, neighbor_of(&b.0, v), b.1);
            ka.cmp(&kb)
        });
        Ok(out)
    }

    /// Undirected incidence count of `v` (each triple counts once).
    pub fn degree(&self, v: &NodeId) -> usize {
        self.out_edges.get(v).map_or(0, Vec::len) + self.in_edges.get(v).map_or(0, Vec::len)
    }

    /// Average degree 2|E|/|V|, max degree, and degree histogram.
    pub fn degree_stats(&self) -> Result<DegreeStats, GraphError> {
        if self.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
        let mut max_degree = 0;
        for id in self.nodes.keys() {
            let d = self.degree(id);
            max_degree = max_degree.max(d);
            *histogram.entry(d).or_insert(0) += 1;
        }
        Ok(DegreeStats {
            average_degree: 2.0 * self.edge_count() as f64 / self.node_count() as f64,
            max_degree,
            histogram,
        })
    }

    /// All nodes reachable from `v` ignoring edge direction.
    pub fn connected_component(&self, v: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        if !self.contains_node(v) {
            return Err(GraphError::NodeNotFound(v.0.clone()));
        }
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(v.clone());
        queue.push_back(v.clone());
        while let Some(u) = queue.pop_front() {
            for (n, _, _) in self.neighborhood(&u, Direction::Both)? {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        Ok(seen)
    }

    pub fn is_connected(&self) -> bool {
        match self.nodes.keys().next() {
            None => true,
            Some(v) => self
                .connected_component(v)
                .map(|c| c.len() == self.node_count())
                .unwrap_or(false),
        }
    }

    /// Subgraph on `node_set`, keeping exactly the triples with both
    /// endpoints inside the set.
    pub fn induced_subgraph(&self, node_set: &BTreeSet<NodeId>) -> Result<KnowledgeGraph, GraphError> {
        for id in node_set {
            if !self.contains_node(id) {
                return Err(GraphError::NodeNotFound(id.0.clone()));
            }
        }
        let mut b = GraphBuilder {
            schema: self.schema.clone(),
            ..Default::default()
        };
        for id in node_set {
            b.add_node(self.nodes[id].clone())?;
        }
        for t in &self.edges {
            if node_set.contains(&t.source) && node_set.contains(&t.target) {
                b.add_triple(t.clone())?;
            }
        }
        b.build()
    }

    /// Undirected ball of radius `r` around `v`.
    pub fn ball(&self, v: &NodeId, radius: usize) -> Result<BTreeSet<NodeId>, GraphError> {
        if !self.contains_node(v) {
            return Err(GraphError::NodeNotFound(v.0.clone()));
        }
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        seen.insert(v.clone());
        let mut frontier = vec![v.clone()];
        for _ in 0..radius {
            let mut next = Vec::new();
            for u in &frontier {
                for (n, _, _) in self.neighborhood(u, Direction::Both)? {
                    if seen.insert(n.clone()) {
                        next.push(n);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(seen)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub average_degree: f64,
    pub max_degree: usize,
    pub histogram: BTreeMap<usize, usize>,
}

fn neighbor_of<'a>(t: &'a Triple, v: &NodeId) -> &'a NodeId {
    if &t.source == v {
        &t.target
    } else {
        &t.source
    }
}

/// Tokens used in ids, labels and attribute values must not collide with
/// the file format or wire grammar delimiters.
fn validate_token(s: &str, allow_empty: bool) -> Result<(), GraphError> {
    if s.is_empty() && !allow_empty {
        return Err(GraphError::InvalidToken(s.to_string()));
    }
    if s.contains(['\t', '\n', '\r', '|', ';']) {
        return Err(GraphError::InvalidToken(s.to_string()));
    }
    Ok(())
}

/// Mutation is confined here; the built graph is immutable.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Triple>,
    pub schema: Schema,
}

impl GraphBuilder {
    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), GraphError> {
        validate_token(&node.id.0, false)?;
        validate_token(&node.entity_type, false)?;
        for (k, v) in &node.attributes {
            validate_token(k, false)?;
            validate_token(v, true)?;
            if k.contains('=') {
                return Err(GraphError::InvalidToken(k.clone()));
            }
        }
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id.0.clone()));
        }
        self.schema.entity_types.insert(node.entity_type.clone());
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    /// Insert a node if absent; existing nodes are left untouched.
    pub fn ensure_node(&mut self, node: Node) -> Result<(), GraphError> {
        if self.nodes.contains_key(&node.id) {
            return Ok(());
        }
        self.add_node(node)
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, t: &Triple) -> bool {
        self.edges.contains(t)
    }

    /// Duplicate triples are set-deduplicated silently; self-loops rejected.
    pub fn add_triple(&mut self, t: Triple) -> Result<(), GraphError> {
        validate_token(&t.relation, false)?;
        if t.source == t.target {
            return Err(GraphError::SelfLoop(t.source.0.clone()));
        }
        if !self.nodes.contains_key(&t.source) {
            return Err(GraphError::DanglingTriple(t.source.0.clone()));
        }
        if !self.nodes.contains_key(&t.target) {
            return Err(GraphError::DanglingTriple(t.target.0.clone()));
        }
        self.schema.relations.insert(t.relation.clone());
        self.edges.insert(t);
        Ok(())
    }

    pub fn build(self) -> Result<KnowledgeGraph, GraphError> {
        let mut out_edges: HashMap<NodeId, Vec<Triple>> = HashMap::new();
        let mut in_edges: HashMap<NodeId, Vec<Triple>> = HashMap::new();
        for t in &self.edges {
            // referential integrity re-checked at build time
            if !self.nodes.contains_key(&t.source) {
                return Err(GraphError::DanglingTriple(t.source.0.clone()));
            }
            if !self.nodes.contains_key(&t.target) {
                return Err(GraphError::DanglingTriple(t.target.0.clone()));
            }
            out_edges.entry(t.source.clone()).or_default().push(t.clone());
            in_edges.entry(t.target.clone()).or_default().push(t.clone());
        }
        Ok(KnowledgeGraph {
            nodes: self.nodes,
            edges: self.edges,
            schema: self.schema,
            out_edges,
            in_edges,
        })
    }
}
