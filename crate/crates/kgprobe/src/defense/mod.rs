//! Defense mechanisms layered around the oracle as ordered middleware:
//! structural perturbation (build time) -> protective prompt (inside the
//! oracle) -> answer -> output window restriction -> detector bookkeeping.
//! Each mechanism is individually toggleable.

use crate::graph::{GraphBuilder, KnowledgeGraph, NodeId, Triple};
use crate::oracle::{
    token_measure, Oracle, OracleError, OracleResponse, OracleSession, Query, TranscriptRecord,
    END_SENTINEL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorAction {
    Flag,
    Block,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Sliding window length W (>= 2).
    pub window: usize,
    /// Revealed-entity reuse fraction that trips the alarm.
    pub overlap_threshold: f64,
    pub action: DetectorAction,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DefenseConfig {
    /// Token cap applied to every response after the oracle answers.
    pub output_cap: Option<usize>,
    /// Forwarded into the oracle's protective prompt knob by the harness.
    pub protective_prompt_bypass: Option<f64>,
    pub detector: Option<DetectorConfig>,
    /// Edge rewiring probability applied to the backing graph at build
    /// time.
    pub perturbation_rewire_rate: Option<f64>,
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if let Some(c) = self.output_cap {
            if c < 1 {
                return Err("output_cap must be >= 1".into());
            }
        }
        if let Some(d) = &self.detector {
            if d.window < 2 {
                return Err("detector window must be >= 2".into());
            }
            if !(0.0..=1.0).contains(&d.overlap_threshold) {
                return Err("detector threshold must be in [0,1]".into());
            }
        }
        for p in [self.protective_prompt_bypass, self.perturbation_rewire_rate]
            .into_iter()
            .flatten()
        {
            if !(0.0..=1.0).contains(&p) {
                return Err("defense probabilities must be in [0,1]".into());
            }
        }
        Ok(())
    }
}

/// Drop trailing payload lines until the rendered response fits the cap.
/// Operates on whole lines so the wire grammar stays parseable; the END
/// sentinel is preserved. Idempotent.
pub fn restrict_output(resp: &OracleResponse, cap: usize) -> OracleResponse {
    if resp.refused || resp.tokens_consumed <= cap {
        return resp.clone();
    }
    let end_cost = token_measure(END_SENTINEL);
    let mut kept: Vec<String> = Vec::new();
    let mut total = end_cost;
    for line in resp.payload_lines() {
        let cost = token_measure(line);
        if total + cost > cap {
            break;
        }
        total += cost;
        kept.push(line.clone());
    }
    let dropped = kept.len() < resp.payload_lines().count();
    kept.push(END_SENTINEL.to_string());
    OracleResponse {
        tokens_consumed: token_measure(&kept.join("\n")),
        lines: kept,
        refused: false,
        truncated: resp.truncated || dropped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorVerdict {
    Pass,
    Flag,
    Block,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlarmRecord {
    pub seq: u64,
    pub reuse_fraction: f64,
    pub blocked: bool,
}

/// Per-session traversal detector. The signal is the fraction of recent
/// node-bearing queries whose node was first revealed by an earlier
/// response in this session: BFS/DFS transcripts are near-100% reuse,
/// while benign streams of fresh entity names never are.
#[derive(Debug, Clone)]
pub struct DetectorState {
    config: DetectorConfig,
    /// (query node, was-it-previously-revealed) for the last W queries.
    window: VecDeque<(NodeId, bool)>,
    revealed: BTreeSet<NodeId>,
    pub alarms: Vec<AlarmRecord>,
    seen_queries: u64,
}

impl DetectorState {
    pub fn new(config: DetectorConfig) -> Self {
        DetectorState {
            config,
            window: VecDeque::new(),
            revealed: BTreeSet::new(),
            alarms: Vec::new(),
            seen_queries: 0,
        }
    }

    /// Inspect an incoming query before it reaches the oracle.
    pub fn check(&mut self, query: &Query) -> DetectorVerdict {
        self.seen_queries += 1;
        let Some(node) = query.kind.node() else {
            return DetectorVerdict::Pass;
        };
        let reused = self.revealed.contains(node);
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back((node.clone(), reused));
        if self.window.len() < self.config.window {
            return DetectorVerdict::Pass;
        }
        let frac = self.window.iter().filter(|(_, r)| *r).count() as f64
            / self.window.len() as f64;
        if frac >= self.config.overlap_threshold {
            let blocked = self.config.action == DetectorAction::Block;
            self.alarms.push(AlarmRecord {
                seq: self.seen_queries - 1,
                reuse_fraction: frac,
                blocked,
            });
            return match self.config.action {
                DetectorAction::Flag => DetectorVerdict::Flag,
                DetectorAction::Block => DetectorVerdict::Block,
            };
        }
        DetectorVerdict::Pass
    }

    /// Record the entities a delivered response revealed.
    pub fn observe(&mut self, resp: &OracleResponse) {
        for line in resp.payload_lines() {
            let fields: Vec<&str> = line.split('|').collect();
            match fields.first().copied() {
                Some("P") if fields.len() >= 2 => {
                    self.revealed.insert(NodeId::new(fields[1]));
                }
                Some("R") if fields.len() >= 4 => {
                    self.revealed.insert(NodeId::new(fields[1]));
                    self.revealed.insert(NodeId::new(fields[3]));
                }
                _ => {}
            }
        }
    }
}

/// Rewire each triple's target with probability `p` to a uniformly random
/// node of the same entity type. Self-loops and duplicate triples are
/// resampled up to 10 times, then the edge is left intact. Node set is
/// unchanged; deterministic given `seed`.
pub fn perturb_structure(g: &KnowledgeGraph, p: f64, seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_type: std::collections::BTreeMap<&str, Vec<&NodeId>> = Default::default();
    for node in g.nodes() {
        by_type.entry(node.entity_type.as_str()).or_default().push(&node.id);
    }
    let mut b = GraphBuilder::default();
    for node in g.nodes() {
        b.add_node(node.clone()).expect("copy node");
    }
    for t in g.edges() {
        let rewire = p > 0.0 && rng.gen::<f64>() < p;
        let mut placed = false;
        if rewire {
            let ttype = g.node(&t.target).map(|n| n.entity_type.as_str()).unwrap_or("");
            if let Some(pool) = by_type.get(ttype) {
                for _ in 0..10 {
                    let cand = pool[rng.gen_range(0..pool.len())];
                    let nt = Triple {
                        source: t.source.clone(),
                        relation: t.relation.clone(),
                        target: cand.clone(),
                    };
                    if nt.source == nt.target || b.contains_edge(&nt) || g.contains_edge(&nt) && nt != *t
                    {
                        continue;
                    }
                    if b.add_triple(nt).is_ok() {
                        placed = true;
                        break;
                    }
                }
            }
        }
        if !placed {
            let _ = b.add_triple(t.clone());
        }
    }
    b.build().expect("perturbed graph invariants")
}

/// The composed defense stack around a bare oracle.
pub struct DefendedOracle {
    inner: Oracle,
    output_cap: Option<usize>,
    detector: Option<DetectorState>,
    blocked_queries: usize,
}

impl DefendedOracle {
    /// `defense.protective_prompt_bypass` and perturbation must already be
    /// applied to the oracle config/graph by the caller; this wrapper owns
    /// the response cap and the detector.
    pub fn new(inner: Oracle, defense: &DefenseConfig) -> Self {
        DefendedOracle {
            inner,
            output_cap: defense.output_cap,
            detector: defense.detector.clone().map(DetectorState::new),
            blocked_queries: 0,
        }
    }

    pub fn blocked_queries(&self) -> usize {
        self.blocked_queries
    }

    pub fn alarms(&self) -> &[AlarmRecord] {
        self.detector.as_ref().map_or(&[], |d| d.alarms.as_slice())
    }

    pub fn into_inner(self) -> Oracle {
        self.inner
    }
}

impl OracleSession for DefendedOracle {
    fn ask(&mut self, query: &Query) -> Result<OracleResponse, OracleError> {
        if let Some(det) = &mut self.detector {
            if det.check(query) == DetectorVerdict::Block {
                self.blocked_queries += 1;
                // blocked queries still consume one oracle slot
                let _ = self.inner.ask(query)?;
                return Ok(OracleResponse::refusal());
            }
        }
        let mut resp = self.inner.ask(query)?;
        if let Some(cap) = self.output_cap {
            resp = restrict_output(&resp, cap);
        }
        if let Some(det) = &mut self.detector {
            det.observe(&resp);
        }
        Ok(resp)
    }

    fn transcript(&self) -> &[TranscriptRecord] {
        self.inner.transcript()
    }
}
