//! Simulated black-box Graph RAG oracle.
//!
//! The oracle hides a ground-truth [`KnowledgeGraph`] and answers structured
//! queries with a bounded, possibly degraded text payload. All degradation
//! (ranking truncation, token caps, omission, hallucination, refusal) is
//! driven by a per-response rng derived from `(config.seed, sequence
//! number)`, so a transcript is byte-reproducible.
//!
//! Wire grammar (one payload line each):
//! ```text
//! P|<node_id>|<entity_type>|<key>=<value>{;<key>=<value>}
//! R|<source>|<relation>|<target>|<out|in>
//! END
//! REFUSED
//! ```

use crate::graph::{DirTag, Direction, KnowledgeGraph, NodeId, Triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub const END_SENTINEL: &str = "END";
pub const REFUSAL_SENTINEL: &str = "REFUSED";
/// Reserved prefix for fabricated node ids; generators never emit it, so
/// the evaluator can tell fabrications apart while the attacker cannot.
pub const HALLUCINATION_PREFIX: &str = "HX_";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("malformed query: {0}")]
    MalformedQuery(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// Injects retrieved context directly: 1-hop lines plus a 2-hop
    /// context appendix bounded by the context token budget.
    RetrievalBased,
    /// Step-wise agent: no context appendix, but each retrieved 1-hop
    /// line is independently dropped with `omission_rate` (the agent's
    /// summarization acting as a passive information filter).
    AgentBased,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub paradigm: Paradigm,
    /// `None` means unlimited.
    pub top_k: Option<usize>,
    pub context_token_budget: Option<usize>,
    pub output_token_limit: Option<usize>,
    pub hallucination_rate: f64,
    /// Agent paradigm only.
    pub omission_rate: f64,
    /// `None` = protective prompt off; `Some(p)` = on with bypass
    /// probability `p`.
    pub protective_prompt_bypass: Option<f64>,
    pub direction: Direction,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::noiseless(0)
    }
}

impl OracleConfig {
    /// No degradation at all: unlimited caps, zero noise, no refusals.
    pub fn noiseless(seed: u64) -> Self {
        OracleConfig {
            paradigm: Paradigm::RetrievalBased,
            top_k: None,
            context_token_budget: None,
            output_token_limit: None,
            hallucination_rate: 0.0,
            omission_rate: 0.0,
            protective_prompt_bypass: None,
            direction: Direction::Both,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(k) = self.top_k {
            if k < 1 {
                return Err("top_k must be >= 1".into());
            }
        }
        for (name, v) in [
            ("output_token_limit", self.output_token_limit),
            ("context_token_budget", self.context_token_budget),
        ] {
            if let Some(v) = v {
                if v < 1 {
                    return Err(format!("{name} must be >= 1"));
                }
            }
        }
        for (name, p) in [
            ("hallucination_rate", Some(self.hallucination_rate)),
            ("omission_rate", Some(self.omission_rate)),
            ("protective_prompt_bypass", self.protective_prompt_bypass),
        ] {
            if let Some(p) = p {
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("{name} must be in [0,1]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryKind {
    Anchor { hint: String },
    Neighborhood { node: NodeId },
    FollowUp { node: NodeId, constraint: String },
    TargetInfo { node: NodeId },
}

impl QueryKind {
    pub fn label(&self) -> &'static str {
        match self {
            QueryKind::Anchor { .. } => "anchor",
            QueryKind::Neighborhood { .. } => "neighborhood",
            QueryKind::FollowUp { .. } => "follow_up",
            QueryKind::TargetInfo { .. } => "target_info",
        }
    }

    pub fn node(&self) -> Option<&NodeId> {
        match self {
            QueryKind::Anchor { .. } => None,
            QueryKind::Neighborhood { node }
            | QueryKind::FollowUp { node, .. }
            | QueryKind::TargetInfo { node } => Some(node),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub kind: QueryKind,
    pub text: String,
}

impl Query {
    pub fn anchor(hint: impl Into<String>) -> Self {
        let hint = hint.into();
        let text = format!("Provide a comprehensive profile for {hint}.");
        Query {
            kind: QueryKind::Anchor { hint },
            text,
        }
    }

    pub fn neighborhood(node: NodeId) -> Self {
        let text = format!("Describe everything connected to {node} and how.");
        Query {
            kind: QueryKind::Neighborhood { node },
            text,
        }
    }

    pub fn follow_up(node: NodeId, constraint: impl Into<String>) -> Self {
        let constraint = constraint.into();
        let text = format!("Among records linked to {node}, focus on {constraint}.");
        Query {
            kind: QueryKind::FollowUp { node, constraint },
            text,
        }
    }

    pub fn target_info(node: NodeId) -> Self {
        let text = format!("Give all recorded details for {node}.");
        Query {
            kind: QueryKind::TargetInfo { node },
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResponse {
    /// Payload lines including the trailing sentinel (`END` or `REFUSED`).
    pub lines: Vec<String>,
    pub tokens_consumed: usize,
    pub refused: bool,
    pub truncated: bool,
}

impl OracleResponse {
    pub fn refusal() -> Self {
        OracleResponse {
            tokens_consumed: token_measure(REFUSAL_SENTINEL),
            lines: vec![REFUSAL_SENTINEL.to_string()],
            refused: true,
            truncated: false,
        }
    }

    pub fn payload_lines(&self) -> impl Iterator<Item = &String> {
        self.lines
            .iter()
            .filter(|l| l.as_str() != END_SENTINEL && l.as_str() != REFUSAL_SENTINEL)
    }

    pub fn rendered(&self) -> String {
        self.lines.join("\n")
    }
}

/// Deterministic token measure: maximal runs of characters that are neither
/// whitespace nor `|`, plus one token per `|` separator.
pub fn token_measure(text: &str) -> usize {
    let mut tokens = 0usize;
    let mut in_run = false;
    for c in text.chars() {
        if c == '|' {
            tokens += 1;
            in_run = false;
        } else if c.is_whitespace() {
            in_run = false;
        } else if !in_run {
            tokens += 1;
            in_run = true;
        }
    }
    tokens
}

#[derive(Debug, Clone, Serialize)]
pub struct TranscriptRecord {
    pub seq: u64,
    pub kind: String,
    pub query_text: String,
    pub tokens: usize,
    pub refused: bool,
    pub truncated: bool,
}

/// Anything the attacker can talk to: the bare oracle or a defense stack
/// wrapped around it.
pub trait OracleSession {
    fn ask(&mut self, query: &Query) -> Result<OracleResponse, OracleError>;
    fn transcript(&self) -> &[TranscriptRecord];
}

pub struct Oracle {
    config: OracleConfig,
    graph: KnowledgeGraph,
    seq: u64,
    transcript: Vec<TranscriptRecord>,
}

impl Oracle {
    pub fn new(config: OracleConfig, graph: KnowledgeGraph) -> Self {
        Oracle {
            config,
            graph,
            seq: 0,
            transcript: Vec::new(),
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn ground_truth(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn queries_answered(&self) -> u64 {
        self.seq
    }

    fn rng_for(&self, seq: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix64(self.config.seed ^ splitmix64(seq)))
    }

    /// Resolve an anchor hint to the node with maximal lexical overlap
    /// between hint tokens and the node's id, type, and attribute values.
    /// Ties break toward the smaller id; zero overlap resolves to nothing.
    pub fn resolve_anchor(&self, hint: &str) -> Option<&NodeId> {
        let hint_tokens = lex_tokens(hint);
        if hint_tokens.is_empty() {
            return None;
        }
        let mut best: Option<(usize, &NodeId)> = None;
        for node in self.graph.nodes() {
            let mut hay = lex_tokens(node.id.as_str());
            hay.extend(lex_tokens(&node.entity_type));
            for v in node.attributes.values() {
                hay.extend(lex_tokens(v));
            }
            let score = hint_tokens.iter().filter(|t| hay.contains(*t)).count();
            if score > 0 && best.is_none_or(|(s, _)| score > s) {
                best = Some((score, &node.id));
            }
        }
        best.map(|(_, id)| id)
    }

    pub fn answer(&mut self, query: &Query) -> Result<OracleResponse, OracleError> {
        validate_query(query)?;
        let seq = self.seq;
        self.seq += 1;
        let mut rng = self.rng_for(seq);

        let resp = self.answer_inner(query, &mut rng);
        self.transcript.push(TranscriptRecord {
            seq,
            kind: query.kind.label().to_string(),
            query_text: query.text.clone(),
            tokens: resp.tokens_consumed,
            refused: resp.refused,
            truncated: resp.truncated,
        });
        Ok(resp)
    }

    fn answer_inner(&self, query: &Query, rng: &mut ChaCha8Rng) -> OracleResponse {
        // Refusal draw happens first and unconditionally consumes rng
        // state only when the protective prompt is armed for this kind.
        if refusal_applies(&self.config, &query.kind) {
            let bypass = self.config.protective_prompt_bypass.unwrap_or(1.0);
            if rng.gen::<f64>() >= bypass {
                return OracleResponse::refusal();
            }
        }

        let (payload, truncated) = match &query.kind {
            QueryKind::Anchor { hint } => (self.anchor_payload(hint), false),
            QueryKind::Neighborhood { node } | QueryKind::FollowUp { node, .. } => {
                self.edge_payload(node, false, rng)
            }
            QueryKind::TargetInfo { node } => self.edge_payload(node, true, rng),
        };

        finish_response(payload, truncated, self.config.output_token_limit)
    }

    fn anchor_payload(&self, hint: &str) -> Vec<String> {
        match self.resolve_anchor(hint) {
            Some(id) => vec![profile_line(self.graph.node(id).expect("resolved node"))],
            None => Vec::new(),
        }
    }

    /// Shared payload builder for Neighborhood/FollowUp/TargetInfo.
    ///
    /// Order of rng draws is fixed and independent of the caps, so raising
    /// `top_k` or `output_token_limit` never changes which lines survive
    /// earlier stages.
    fn edge_payload(&self, node: &NodeId, with_profile: bool, rng: &mut ChaCha8Rng) -> (Vec<String>, bool) {
        let mut truncated = false;
        let mut lines: Vec<String> = Vec::new();

        if with_profile {
            if let Some(n) = self.graph.node(node) {
                lines.push(profile_line(n));
            }
        }

        // Ranked 1-hop candidates; a retrieval miss yields an empty list.
        let ranked = self.ranked_incident(node);

        // Hallucination decision precedes omission draws.
        let fake_line = if rng.gen::<f64>() < self.config.hallucination_rate {
            Some(self.fabricate_edge_line(node, rng))
        } else {
            None
        };

        // Agent paradigm: independent per-line omission over the full
        // ranked list, before any cap is applied.
        let survivors: Vec<&(Triple, DirTag)> = ranked
            .iter()
            .filter(|_| {
                if self.config.paradigm == Paradigm::AgentBased && self.config.omission_rate > 0.0 {
                    rng.gen::<f64>() >= self.config.omission_rate
                } else {
                    true
                }
            })
            .collect();

        let kept: Vec<&(Triple, DirTag)> = match self.config.top_k {
            Some(k) if survivors.len() > k => {
                truncated = true;
                survivors[..k].to_vec()
            }
            _ => survivors,
        };

        for (t, tag) in &kept {
            lines.push(edge_line(t, *tag));
        }
        if let Some(fl) = fake_line {
            lines.push(fl);
        }

        // Retrieval paradigm: 2-hop context appendix, bounded by the
        // context token budget. The retriever fetches the 2-hop subgraph
        // before any summarization cut, so the appendix walks the *full*
        // ranked neighbor list (not just the top_k survivors) and lists
        // edges among those neighborhoods — excluding edges incident to
        // the queried node itself, which the 1-hop section already ranked.
        // This keeps the appendix independent of top_k/output caps, so
        // degradation stays monotone.
        if self.config.paradigm == Paradigm::RetrievalBased {
            let mut context_tokens = 0usize;
            let budget = self.config.context_token_budget;
            let mut emitted: BTreeSet<Triple> = BTreeSet::new();
            // round-robin across neighbors so the context covers the
            // whole 2-hop ball instead of exhausting the budget on the
            // first neighbor's edge list
            let per_hop: Vec<Vec<(Triple, DirTag)>> = ranked
                .iter()
                .map(|(t, tag)| {
                    let hop = match tag {
                        DirTag::Out => &t.target,
                        DirTag::In => &t.source,
                    };
                    self.ranked_incident(hop)
                })
                .collect();
            let mut round = 0usize;
            'outer: loop {
                let mut any = false;
                for list in &per_hop {
                    let Some((t2, tag2)) = list.get(round) else { continue };
                    any = true;
                    if t2.source == *node || t2.target == *node || emitted.contains(t2) {
                        continue;
                    }
                    let line = edge_line(t2, *tag2);
                    let cost = token_measure(&line);
                    if let Some(b) = budget {
                        if context_tokens + cost > b {
                            break 'outer;
                        }
                    }
                    context_tokens += cost;
                    emitted.insert(t2.clone());
                    lines.push(line);
                }
                if !any {
                    break;
                }
                round += 1;
            }
        }

        (lines, truncated)
    }

    /// Incident triples ranked by (relation label, neighbor degree
    /// descending, neighbor id) — salient hub neighbors survive truncation
    /// first. Ranking is independent of every cap.
    fn ranked_incident(&self, node: &NodeId) -> Vec<(Triple, DirTag)> {
        let mut incident = match self.graph.incident_triples(node, self.config.direction) {
            Ok(v) => v,
            Err(_) => return Vec::new(),
        };
        incident.sort_by(|a, b| {
            let na = neighbor(&a.0, node);
            let nb = neighbor(&b.0, node);
            (&a.0.relation, std::cmp::Reverse(self.graph.degree(na)), na, a.1)
                .cmp(&(&b.0.relation, std::cmp::Reverse(self.graph.degree(nb)), nb, b.1))
        });
        incident
    }

    fn fabricate_edge_line(&self, node: &NodeId, rng: &mut ChaCha8Rng) -> String {
        let fake_id = format!("{HALLUCINATION_PREFIX}{:06}", rng.gen_range(0..1_000_000u32));
        let relations: Vec<&String> = self.graph.schema().relations.iter().collect();
        let relation = if relations.is_empty() {
            "related_to".to_string()
        } else {
            relations[rng.gen_range(0..relations.len())].clone()
        };
        format!("R|{node}|{relation}|{fake_id}|out")
    }
}

impl OracleSession for Oracle {
    fn ask(&mut self, query: &Query) -> Result<OracleResponse, OracleError> {
        self.answer(query)
    }

    fn transcript(&self) -> &[TranscriptRecord] {
        &self.transcript
    }
}

/// Extraction-shaped kinds the protective prompt screens. Anchor queries
/// look like ordinary questions and always proceed; FollowUp models the
/// adversarial rephrase that slips past the instruction.
pub fn refusal_applies(config: &OracleConfig, kind: &QueryKind) -> bool {
    config.protective_prompt_bypass.is_some()
        && matches!(kind, QueryKind::Neighborhood { .. } | QueryKind::TargetInfo { .. })
}

fn validate_query(query: &Query) -> Result<(), OracleError> {
    match &query.kind {
        QueryKind::Anchor { hint } => {
            if hint.trim().is_empty() {
                return Err(OracleError::MalformedQuery("empty anchor hint".into()));
            }
        }
        QueryKind::Neighborhood { node }
        | QueryKind::FollowUp { node, .. }
        | QueryKind::TargetInfo { node } => {
            if node.as_str().is_empty() || node.as_str().contains(['|', '\t', '\n']) {
                return Err(OracleError::MalformedQuery(format!(
                    "bad node id {:?}",
                    node.as_str()
                )));
            }
        }
    }
    Ok(())
}

pub fn profile_line(node: &crate::graph::Node) -> String {
    let attrs = node
        .attributes
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";");
    format!("P|{}|{}|{}", node.id, node.entity_type, attrs)
}

pub fn edge_line(t: &Triple, tag: DirTag) -> String {
    format!("R|{}|{}|{}|{}", t.source, t.relation, t.target, tag.as_str())
}

fn neighbor<'a>(t: &'a Triple, v: &NodeId) -> &'a NodeId {
    if &t.source == v {
        &t.target
    } else {
        &t.source
    }
}

fn lex_tokens(s: &str) -> std::collections::BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Assemble payload + END, enforcing the output token cap on the whole
/// rendered response (END included). Lines are dropped from the tail only.
fn finish_response(
    mut payload: Vec<String>,
    mut truncated: bool,
    output_token_limit: Option<usize>,
) -> OracleResponse {
    if let Some(cap) = output_token_limit {
        let end_cost = token_measure(END_SENTINEL);
        let mut total = end_cost;
        let mut keep = 0usize;
        for line in &payload {
            let cost = token_measure(line);
            if total + cost > cap {
                break;
            }
            total += cost;
            keep += 1;
        }
        if keep < payload.len() {
            payload.truncate(keep);
            truncated = true;
        }
    }
    payload.push(END_SENTINEL.to_string());
    let tokens_consumed = token_measure(&payload.join("\n"));
    OracleResponse {
        lines: payload,
        tokens_consumed,
        refused: false,
        truncated,
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, Node};

    fn graph(edges: &[(&str, &str, &str)]) -> KnowledgeGraph {
        let mut b = GraphBuilder::default();
        for (s, _, t) in edges {
            for id in [s, t] {
                b.ensure_node(Node::new(*id, "T")).unwrap();
            }
        }
        for (s, r, t) in edges {
            b.add_triple(Triple::new(*s, *r, *t)).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn token_measure_rules() {
        assert_eq!(token_measure(""), 0);
        assert_eq!(token_measure("A|knows|B"), 5);
        assert_eq!(token_measure("Patient Profile for Case 6381:"), 5);
        assert_eq!(token_measure("END"), 1);
        assert_eq!(token_measure("R|A|r|B|out"), 9);
    }

    #[test]
    fn noiseless_neighborhood_single_edge() {
        let g = graph(&[("A", "knows", "B")]);
        let mut o = Oracle::new(OracleConfig::noiseless(1), g);
        let r = o.answer(&Query::neighborhood(NodeId::new("A"))).unwrap();
        assert_eq!(r.lines, vec!["R|A|knows|B|out".to_string(), "END".into()]);
        assert!(!r.truncated);
        assert!(!r.refused);
    }

    #[test]
    fn top_k_truncates_and_flags() {
        let g = graph(&[
            ("A", "r", "B"),
            ("A", "r", "C"),
            ("A", "r", "D"),
            ("A", "r", "E"),
            ("A", "r", "F"),
        ]);
        let mut cfg = OracleConfig::noiseless(1);
        cfg.top_k = Some(2);
        cfg.paradigm = Paradigm::AgentBased; // no 2-hop appendix
        let mut o = Oracle::new(cfg, g);
        let r = o.answer(&Query::neighborhood(NodeId::new("A"))).unwrap();
        let edges: Vec<_> = r.payload_lines().collect();
        assert_eq!(edges.len(), 2);
        assert!(r.truncated);
    }

    #[test]
    fn forced_refusal() {
        let g = graph(&[("A", "r", "B")]);
        let mut cfg = OracleConfig::noiseless(1);
        cfg.protective_prompt_bypass = Some(0.0);
        let mut o = Oracle::new(cfg, g);
        let r = o.answer(&Query::neighborhood(NodeId::new("A"))).unwrap();
        assert!(r.refused);
        assert_eq!(r.lines, vec![REFUSAL_SENTINEL.to_string()]);
        // anchor queries always proceed
        let r = o.answer(&Query::anchor("A")).unwrap();
        assert!(!r.refused);
    }

    #[test]
    fn bypass_one_always_proceeds() {
        let g = graph(&[("A", "r", "B")]);
        let mut cfg = OracleConfig::noiseless(1);
        cfg.protective_prompt_bypass = Some(1.0);
        let mut o = Oracle::new(cfg, g);
        for _ in 0..50 {
            let r = o.answer(&Query::neighborhood(NodeId::new("A"))).unwrap();
            assert!(!r.refused);
        }
    }

    #[test]
    fn refusal_fraction_monte_carlo() {
        let g = graph(&[("A", "r", "B")]);
        let mut cfg = OracleConfig::noiseless(7);
        cfg.protective_prompt_bypass = Some(0.5);
        let mut o = Oracle::new(cfg, g);
        let n = 10_000;
        let refused = (0..n)
            .filter(|_| o.answer(&Query::neighborhood(NodeId::new("A"))).unwrap().refused)
            .count();
        let frac = refused as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "refusal fraction {frac}");
    }

    #[test]
    fn anchor_resolution_by_overlap() {
        let mut b = GraphBuilder::default();
        b.add_node(Node::new("Patient_6381", "Patient").with_attr("age", "45"))
            .unwrap();
        b.add_node(Node::new("Patient_7423", "Patient")).unwrap();
        let g = b.build().unwrap();
        let o = Oracle::new(OracleConfig::noiseless(1), g);
        assert_eq!(
            o.resolve_anchor("case 6381 profile"),
            Some(&NodeId::new("Patient_6381"))
        );
        assert_eq!(o.resolve_anchor("zzz nothing"), None);
    }

    #[test]
    fn unknown_node_gives_empty_payload() {
        let g = graph(&[("A", "r", "B")]);
        let mut o = Oracle::new(OracleConfig::noiseless(1), g);
        let r = o.answer(&Query::neighborhood(NodeId::new("Nope"))).unwrap();
        assert_eq!(r.lines, vec!["END".to_string()]);
    }

    #[test]
    fn determinism_same_seed_same_transcript() {
        let g = graph(&[("A", "r", "B"), ("B", "r", "C"), ("C", "r", "D")]);
        let mut cfg = OracleConfig::noiseless(99);
        cfg.hallucination_rate = 0.5;
        cfg.paradigm = Paradigm::AgentBased;
        cfg.omission_rate = 0.3;
        let run = |g: KnowledgeGraph| {
            let mut o = Oracle::new(cfg.clone(), g);
            let mut all = Vec::new();
            for id in ["A", "B", "C"] {
                all.push(o.answer(&Query::neighborhood(NodeId::new(id))).unwrap());
            }
            all
        };
        assert_eq!(run(g.clone()), run(g));
    }

    #[test]
    fn zero_noise_soundness() {
        let g = graph(&[("A", "r", "B"), ("B", "s", "C")]);
        let mut o = Oracle::new(OracleConfig::noiseless(3), g.clone());
        for id in ["A", "B", "C"] {
            let r = o.answer(&Query::neighborhood(NodeId::new(id))).unwrap();
            for line in r.payload_lines() {
                let parts: Vec<&str> = line.split('|').collect();
                assert_eq!(parts[0], "R");
                assert!(g.contains_edge(&Triple::new(parts[1], parts[2], parts[3])));
            }
        }
    }

    #[test]
    fn output_cap_compliance() {
        let g = graph(&[
            ("A", "r", "B"),
            ("A", "r", "C"),
            ("A", "r", "D"),
            ("A", "r", "E"),
        ]);
        let mut cfg = OracleConfig::noiseless(1);
        cfg.output_token_limit = Some(19); // 2 edge lines (9 each) + END
        let mut o = Oracle::new(cfg, g);
        let r = o.answer(&Query::neighborhood(NodeId::new("A"))).unwrap();
        assert!(r.tokens_consumed <= 19);
        assert_eq!(r.payload_lines().count(), 2);
        assert!(r.truncated);
    }

    #[test]
    fn malformed_query_rejected() {
        let g = graph(&[("A", "r", "B")]);
        let mut o = Oracle::new(OracleConfig::noiseless(1), g);
        assert!(o.answer(&Query::anchor("   ")).is_err());
        assert!(o.answer(&Query::neighborhood(NodeId::new(""))).is_err());
    }

    #[test]
    fn target_info_includes_profile_and_edges() {
        let mut b = GraphBuilder::default();
        b.add_node(Node::new("A", "Patient").with_attr("age", "45")).unwrap();
        b.add_node(Node::new("B", "Diagnosis")).unwrap();
        b.add_triple(Triple::new("A", "has_diagnosis", "B")).unwrap();
        let g = b.build().unwrap();
        let mut o = Oracle::new(OracleConfig::noiseless(1), g);
        let r = o.answer(&Query::target_info(NodeId::new("A"))).unwrap();
        assert!(r.lines[0].starts_with("P|A|Patient|age=45"));
        assert!(r.lines[1].starts_with("R|A|has_diagnosis|B|out"));
    }
}
