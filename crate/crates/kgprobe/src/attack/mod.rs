//! The adversary: queue-based BFS reconstruction, stack-based DFS targeted
//! extraction, a random-walk baseline, and the shared plumbing (response
//! parsing, history buffer, budget accounting, next-query generation).

mod strategy;

pub use strategy::{
    registry, strategy_by_name, targeted_dfs, AttackOutcome, BfsStrategy, DfsStrategy,
    RandomWalkStrategy, ReconstructionStrategy,
};

use crate::graph::{GraphBuilder, KnowledgeGraph, Node, NodeId, Triple};
use crate::oracle::{OracleResponse, Query, END_SENTINEL, REFUSAL_SENTINEL};
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("frontier exhausted")]
    FrontierExhausted,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("oracle transport failure: {0}")]
    Transport(String),
}

/// Hard limits the adversary operates under.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AttackBudget {
    /// Max BFS rounds / DFS depth steps (one expansion query each).
    pub max_rounds: usize,
    pub max_queries: usize,
    pub max_tokens: usize,
}

impl Default for AttackBudget {
    fn default() -> Self {
        AttackBudget::unlimited()
    }
}

impl AttackBudget {
    pub fn unlimited() -> Self {
        AttackBudget {
            max_rounds: usize::MAX,
            max_queries: usize::MAX,
            max_tokens: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.max_rounds == 0 || self.max_queries == 0 || self.max_tokens == 0 {
            return Err(AttackError::InvalidBudget(
                "all budget fields must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct Cost {
    pub queries: usize,
    pub tokens: usize,
}

/// Bounded FIFO of past (query, parsed result) interactions.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    capacity: usize,
    entries: VecDeque<HistoryEntry>,
}

#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub query_text: String,
    pub edges_parsed: usize,
    pub refused: bool,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        HistoryBuffer {
            capacity: capacity.max(1),
            entries: VecDeque::new(),
        }
    }

    pub fn record(&mut self, query: &Query, parsed: &ParsedPayload) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(HistoryEntry {
            query_text: query.text.clone(),
            edges_parsed: parsed.edges.len(),
            refused: parsed.refused,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// What one oracle payload decodes to.
#[derive(Debug, Clone, Default)]
pub struct ParsedPayload {
    pub profiles: Vec<Node>,
    pub edges: Vec<Triple>,
    pub refused: bool,
    /// Payload ended without the END sentinel.
    pub missing_end: bool,
    pub malformed_lines: usize,
}

/// Decode the oracle wire grammar. Malformed lines are skipped and
/// counted; a refusal yields an empty result. Idempotent.
pub fn parse_response(resp: &OracleResponse) -> ParsedPayload {
    let mut out = ParsedPayload::default();
    let mut saw_end = false;
    for line in &resp.lines {
        if line == REFUSAL_SENTINEL {
            out.refused = true;
            continue;
        }
        if line == END_SENTINEL {
            saw_end = true;
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        match fields.first().copied() {
            Some("P") if fields.len() == 4 && !fields[1].is_empty() && !fields[2].is_empty() => {
                let mut node = Node::new(fields[1], fields[2]);
                let mut bad = false;
                if !fields[3].is_empty() {
                    for pair in fields[3].split(';') {
                        match pair.split_once('=') {
                            Some((k, v)) if !k.is_empty() => {
                                node.attributes.insert(k.to_string(), v.to_string());
                            }
                            _ => bad = true,
                        }
                    }
                }
                if bad {
                    out.malformed_lines += 1;
                } else {
                    out.profiles.push(node);
                }
            }
            Some("R")
                if fields.len() == 5
                    && !fields[1].is_empty()
                    && !fields[2].is_empty()
                    && !fields[3].is_empty()
                    && (fields[4] == "out" || fields[4] == "in")
                    && fields[1] != fields[3] =>
            {
                out.edges.push(Triple::new(fields[1], fields[2], fields[3]));
            }
            _ => out.malformed_lines += 1,
        }
    }
    if !saw_end && !out.refused {
        out.missing_end = true;
    }
    out
}

/// Normalized token overlap between a descriptor and a node's id, type,
/// and attribute values. Exact id match scores 1.0.
pub fn relevance_score(node: &Node, target_descriptor: &str) -> f64 {
    if node.id.as_str() == target_descriptor {
        return 1.0;
    }
    let desc: BTreeSet<String> = lex_tokens(target_descriptor);
    if desc.is_empty() {
        return 0.0;
    }
    let mut hay = lex_tokens(node.id.as_str());
    hay.extend(lex_tokens(&node.entity_type));
    for v in node.attributes.values() {
        hay.extend(lex_tokens(v));
    }
    let matched = desc.iter().filter(|t| hay.contains(*t)).count();
    matched as f64 / desc.len() as f64
}

fn lex_tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierMode {
    Bfs,
    Dfs,
}

/// Frontier + visited set + partial graph + cost counters shared by every
/// traversal strategy.
pub struct AttackState {
    mode: FrontierMode,
    frontier: VecDeque<NodeId>,
    pub visited: BTreeSet<NodeId>,
    pub recovered: GraphBuilder,
    pub history: HistoryBuffer,
    pub cost: Cost,
    pub rounds: usize,
}

impl AttackState {
    pub fn new(mode: FrontierMode, history_capacity: usize) -> Self {
        AttackState {
            mode,
            frontier: VecDeque::new(),
            visited: BTreeSet::new(),
            recovered: GraphBuilder::default(),
            history: HistoryBuffer::new(history_capacity),
            cost: Cost::default(),
            rounds: 0,
        }
    }

    pub fn frontier_len(&self) -> usize {
        self.frontier.len()
    }

    /// Nodes enter `visited` when enqueued/pushed.
    pub fn admit(&mut self, id: NodeId) {
        if self.visited.insert(id.clone()) {
            match self.mode {
                FrontierMode::Bfs => self.frontier.push_back(id),
                FrontierMode::Dfs => self.frontier.push_front(id),
            }
        }
    }

    /// DFS only: push even though already discovered (used for ordering
    /// re-pushes, never duplicates an unqueried entry).
    pub fn push_front(&mut self, id: NodeId) {
        self.visited.insert(id.clone());
        self.frontier.push_front(id);
    }

    pub fn next_node(&mut self) -> Option<NodeId> {
        self.frontier.pop_front()
    }

    pub fn peek(&self) -> Option<&NodeId> {
        self.frontier.front()
    }

    /// Merge a parsed payload into the partial graph. Nodes referenced by
    /// edges materialize with a placeholder type until a profile line
    /// upgrades them.
    pub fn absorb(&mut self, parsed: &ParsedPayload) {
        for p in &parsed.profiles {
            if self.recovered.contains_node(&p.id) {
                // keep first-seen node, profile info is additive elsewhere
                continue;
            }
            let _ = self.recovered.add_node(p.clone());
        }
        for e in &parsed.edges {
            for id in [&e.source, &e.target] {
                let _ = self.recovered.ensure_node(Node::new(id.as_str(), "Unknown"));
            }
            let _ = self.recovered.add_triple(e.clone());
        }
    }

    pub fn recovered_node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.recovered.node_ids()
    }

    pub fn budget_left(&self, budget: &AttackBudget) -> bool {
        self.cost.queries < budget.max_queries
            && self.cost.tokens < budget.max_tokens
            && self.rounds < budget.max_rounds
    }

    pub fn charge(&mut self, resp: &OracleResponse) {
        self.cost.queries += 1;
        self.cost.tokens = self.cost.tokens.saturating_add(resp.tokens_consumed);
    }

    pub fn finish(self) -> (KnowledgeGraph, Cost) {
        let g = self.recovered.build().expect("recovered graph invariants");
        (g, self.cost)
    }
}

/// Deterministic next-query choice from the current frontier discipline.
pub fn generate_next_query(
    state: &AttackState,
    mode: FrontierMode,
    target_descriptor: Option<&str>,
) -> Result<Query, AttackError> {
    let head = state.peek().ok_or(AttackError::FrontierExhausted)?;
    Ok(match (mode, target_descriptor) {
        (FrontierMode::Bfs, _) | (FrontierMode::Dfs, None) => Query::neighborhood(head.clone()),
        (FrontierMode::Dfs, Some(desc)) => Query::follow_up(head.clone(), desc.to_string()),
    })
}

/// Result of a targeted extraction run.
#[derive(Debug, Clone)]
pub struct TargetReport {
    pub target: NodeId,
    /// Incident (relation, neighbor) pairs recovered for the target.
    pub info_edges: BTreeSet<(String, NodeId)>,
    /// Attribute map recovered for the target.
    pub info_attrs: std::collections::BTreeMap<String, String>,
    pub reached: bool,
    pub path: Vec<NodeId>,
    pub cost: Cost,
}

impl TargetReport {
    pub fn not_found(descriptor: &str, cost: Cost) -> Self {
        TargetReport {
            target: NodeId::new(descriptor),
            info_edges: BTreeSet::new(),
            info_attrs: Default::default(),
            reached: false,
            path: Vec::new(),
            cost,
        }
    }

    /// Info elements as comparable strings (edges and attributes both
    /// count as extracted elements).
    pub fn info_elements(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self
            .info_edges
            .iter()
            .map(|(r, v)| format!("edge:{r}:{v}"))
            .collect();
        out.extend(self.info_attrs.iter().map(|(k, v)| format!("attr:{k}={v}")));
        out
    }
}

/// Ground-truth Info(v*): incident edges plus attributes of the target,
/// in the same element encoding as [`TargetReport::info_elements`].
pub fn ground_truth_info(
    g: &KnowledgeGraph,
    target: &NodeId,
    direction: crate::graph::Direction,
) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if let Some(node) = g.node(target) {
        for (k, v) in &node.attributes {
            out.insert(format!("attr:{k}={v}"));
        }
    }
    if let Ok(incident) = g.incident_triples(target, direction) {
        for (t, tag) in incident {
            let n = match tag {
                crate::graph::DirTag::Out => t.target,
                crate::graph::DirTag::In => t.source,
            };
            out.insert(format!("edge:{}:{}", t.relation, n));
        }
    }
    out
}
