//! Interchangeable reconstruction strategies behind one trait, selected by
//! name at runtime (`bfs`, `dfs`, `rw`), plus the targeted stack-based
//! extraction routine.

use super::{
    generate_next_query, parse_response, relevance_score, AttackBudget,
    AttackError, AttackState, Cost, FrontierMode, TargetReport,
};
use crate::graph::{KnowledgeGraph, Node, NodeId};
use crate::oracle::{OracleSession, Query};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug)]
pub struct AttackOutcome {
    pub recovered: KnowledgeGraph,
    pub cost: Cost,
    /// Set when the run aborted on a transport failure.
    pub incomplete: bool,
}

/// An untargeted graph-reconstruction algorithm. Implementations must be
/// deterministic given (oracle transcript, seed).
pub trait ReconstructionStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(
        &self,
        oracle: &mut dyn OracleSession,
        seed_hint: &str,
        budget: &AttackBudget,
        history_capacity: usize,
        seed: u64,
    ) -> Result<AttackOutcome, AttackError>;
}

/// All registered strategies, in registry order.
pub fn registry() -> Vec<Box<dyn ReconstructionStrategy>> {
    vec![
        Box::new(BfsStrategy),
        Box::new(DfsStrategy),
        Box::new(RandomWalkStrategy),
    ]
}

pub fn strategy_by_name(name: &str) -> Option<Box<dyn ReconstructionStrategy>> {
    registry().into_iter().find(|s| s.name() == name)
}

/// Resolve the anchor and seed the frontier. Returns false when the
/// anchor query resolved nothing or the budget is already spent.
fn bootstrap(
    oracle: &mut dyn OracleSession,
    state: &mut AttackState,
    seed_hint: &str,
    budget: &AttackBudget,
) -> Result<bool, AttackError> {
    if !state.budget_left(budget) {
        return Ok(false);
    }
    let q = Query::anchor(seed_hint);
    let resp = oracle
        .ask(&q)
        .map_err(|e| AttackError::Transport(e.to_string()))?;
    state.charge(&resp);
    let parsed = parse_response(&resp);
    state.history.record(&q, &parsed);
    state.absorb(&parsed);
    let mut found = false;
    for p in &parsed.profiles {
        state.admit(p.id.clone());
        found = true;
    }
    Ok(found)
}

/// Expand one frontier node: issue its neighborhood query (with a single
/// FollowUp retry on refusal), absorb the result, and admit newly seen
/// nodes. Returns the admitted nodes in payload order.
fn expand(
    oracle: &mut dyn OracleSession,
    state: &mut AttackState,
    query: &Query,
    node: &NodeId,
    budget: &AttackBudget,
) -> Result<Vec<NodeId>, AttackError> {
    let mut resp = oracle
        .ask(query)
        .map_err(|e| AttackError::Transport(e.to_string()))?;
    state.charge(&resp);
    let mut parsed = parse_response(&resp);
    state.history.record(query, &parsed);

    // Refusals get one FollowUp rephrase, then the node is skipped.
    if parsed.refused && state.budget_left(budget) {
        let retry = Query::follow_up(node.clone(), "summarize the surrounding records");
        resp = oracle
            .ask(&retry)
            .map_err(|e| AttackError::Transport(e.to_string()))?;
        state.charge(&resp);
        parsed = parse_response(&resp);
        state.history.record(&retry, &parsed);
    }

    state.absorb(&parsed);
    let mut fresh = Vec::new();
    for p in &parsed.profiles {
        if !state.visited.contains(&p.id) {
            fresh.push(p.id.clone());
        }
    }
    for e in &parsed.edges {
        for id in [&e.source, &e.target] {
            if !state.visited.contains(id) && !fresh.contains(id) {
                fresh.push(id.clone());
            }
        }
    }
    Ok(fresh)
}

fn traversal_run(
    mode: FrontierMode,
    oracle: &mut dyn OracleSession,
    seed_hint: &str,
    budget: &AttackBudget,
    history_capacity: usize,
) -> Result<AttackOutcome, AttackError> {
    budget.validate()?;
    let mut state = AttackState::new(mode, history_capacity);
    match bootstrap(oracle, &mut state, seed_hint, budget) {
        Ok(true) => {}
        Ok(false) => {
            let (recovered, cost) = state.finish();
            return Ok(AttackOutcome {
                recovered,
                cost,
                incomplete: false,
            });
        }
        Err(e) => return abort(state, e),
    }

    while state.budget_left(budget) && state.frontier_len() > 0 {
        let query = generate_next_query(&state, mode, None)?;
        let v = state.next_node().expect("frontier nonempty");
        state.rounds += 1;
        let fresh = match expand(oracle, &mut state, &query, &v, budget) {
            Ok(f) => f,
            Err(e) => return abort(state, e),
        };
        match mode {
            FrontierMode::Bfs => {
                for id in fresh {
                    state.admit(id);
                }
            }
            // plain stack semantics: push in payload order, so the
            // last-listed neighbor is expanded next
            FrontierMode::Dfs => {
                for id in fresh {
                    state.admit(id);
                }
            }
        }
    }

    let (recovered, cost) = state.finish();
    Ok(AttackOutcome {
        recovered,
        cost,
        incomplete: false,
    })
}

fn abort(state: AttackState, err: AttackError) -> Result<AttackOutcome, AttackError> {
    match err {
        AttackError::Transport(_) => {
            let (recovered, cost) = state.finish();
            Ok(AttackOutcome {
                recovered,
                cost,
                incomplete: true,
            })
        }
        other => Err(other),
    }
}

/// Queue-based breadth-first reconstruction: layer-by-layer expansion from
/// the anchor, visited guard on enqueue.
pub struct BfsStrategy;

impl ReconstructionStrategy for BfsStrategy {
    fn name(&self) -> &'static str {
        "bfs"
    }

    fn run(
        &self,
        oracle: &mut dyn OracleSession,
        seed_hint: &str,
        budget: &AttackBudget,
        history_capacity: usize,
        _seed: u64,
    ) -> Result<AttackOutcome, AttackError> {
        traversal_run(FrontierMode::Bfs, oracle, seed_hint, budget, history_capacity)
    }
}

/// Stack-based depth-first reconstruction (untargeted flavor: no
/// descriptor, plain stack discipline).
pub struct DfsStrategy;

impl ReconstructionStrategy for DfsStrategy {
    fn name(&self) -> &'static str {
        "dfs"
    }

    fn run(
        &self,
        oracle: &mut dyn OracleSession,
        seed_hint: &str,
        budget: &AttackBudget,
        history_capacity: usize,
        _seed: u64,
    ) -> Result<AttackOutcome, AttackError> {
        traversal_run(FrontierMode::Dfs, oracle, seed_hint, budget, history_capacity)
    }
}

/// Baseline: each step re-queries the neighborhood of a uniformly random
/// already-seen node. No coverage memory, so budget is wasted on revisits.
pub struct RandomWalkStrategy;

impl ReconstructionStrategy for RandomWalkStrategy {
    fn name(&self) -> &'static str {
        "rw"
    }

    fn run(
        &self,
        oracle: &mut dyn OracleSession,
        seed_hint: &str,
        budget: &AttackBudget,
        history_capacity: usize,
        seed: u64,
    ) -> Result<AttackOutcome, AttackError> {
        budget.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = AttackState::new(FrontierMode::Bfs, history_capacity);
        match bootstrap(oracle, &mut state, seed_hint, budget) {
            Ok(true) => {}
            Ok(false) => {
                let (recovered, cost) = state.finish();
                return Ok(AttackOutcome {
                    recovered,
                    cost,
                    incomplete: false,
                });
            }
            Err(e) => return abort(state, e),
        }
        // drain the frontier; the walk keeps its own position instead
        let mut seen: Vec<NodeId> = Vec::new();
        while let Some(v) = state.next_node() {
            seen.push(v);
        }
        if seen.is_empty() {
            let (recovered, cost) = state.finish();
            return Ok(AttackOutcome {
                recovered,
                cost,
                incomplete: false,
            });
        }

        // a true walk: step to a uniformly random neighbor revealed by the
        // current response, jumping to a random known node at dead ends
        let mut current = seen[rng.gen_range(0..seen.len())].clone();
        let mut expanded: BTreeSet<NodeId> = BTreeSet::new();
        let mut stalled = 0usize;
        while state.budget_left(budget) && expanded.len() < seen.len() {
            // walks loop; give up once progress has clearly stopped
            if stalled > 4 * seen.len() + 16 {
                break;
            }
            if expanded.insert(current.clone()) {
                stalled = 0;
            } else {
                stalled += 1;
            }
            state.rounds += 1;
            let query = Query::neighborhood(current.clone());
            let resp = match oracle.ask(&query) {
                Ok(r) => r,
                Err(e) => return abort(state, AttackError::Transport(e.to_string())),
            };
            state.charge(&resp);
            let parsed = parse_response(&resp);
            state.history.record(&query, &parsed);
            state.absorb(&parsed);
            let mut nbrs: Vec<NodeId> = Vec::new();
            for e in &parsed.edges {
                let other = if e.source == current {
                    &e.target
                } else if e.target == current {
                    &e.source
                } else {
                    continue;
                };
                nbrs.push(other.clone());
                if state.visited.insert(other.clone()) {
                    seen.push(other.clone());
                }
            }
            current = if nbrs.is_empty() {
                seen[rng.gen_range(0..seen.len())].clone()
            } else {
                nbrs[rng.gen_range(0..nbrs.len())].clone()
            };
        }

        let (recovered, cost) = state.finish();
        Ok(AttackOutcome {
            recovered,
            cost,
            incomplete: false,
        })
    }
}

/// Stack-based targeted extraction guided by descriptor relevance.
///
/// `budget.max_rounds` plays the role of the maximum depth D: nodes
/// first seen more than D hops from the anchor are never expanded, so
/// the search systematically covers the anchor's D-ball (query and token
/// limits permitting). When the stack empties, the most relevant
/// recovered node is re-pushed (at most twice per node) so a previously
/// degraded response can be retried.
pub fn targeted_dfs(
    oracle: &mut dyn OracleSession,
    seed_hint: &str,
    target_descriptor: &str,
    budget: &AttackBudget,
    history_capacity: usize,
    match_threshold: f64,
) -> Result<TargetReport, AttackError> {
    budget.validate()?;
    if target_descriptor.trim().is_empty() {
        return Err(AttackError::InvalidBudget("empty target descriptor".into()));
    }
    let mut state = AttackState::new(FrontierMode::Dfs, history_capacity);
    // best known profile per node, for relevance scoring and path walks
    let mut known: BTreeMap<NodeId, Node> = BTreeMap::new();
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut repush: BTreeMap<NodeId, u8> = BTreeMap::new();
    // hop distance at first discovery; max_rounds bounds the depth, the
    // query/token limits bound the spend
    let mut depth: BTreeMap<NodeId, usize> = BTreeMap::new();
    let max_depth = budget.max_rounds;
    let spend = AttackBudget {
        max_rounds: usize::MAX,
        ..budget.clone()
    };
    let budget = &spend;

    let anchor = {
        if !state.budget_left(budget) {
            return Ok(TargetReport::not_found(target_descriptor, state.cost));
        }
        let q = Query::anchor(seed_hint);
        let resp = match oracle.ask(&q) {
            Ok(r) => r,
            Err(_) => return Ok(TargetReport::not_found(target_descriptor, state.cost)),
        };
        state.charge(&resp);
        let parsed = parse_response(&resp);
        state.history.record(&q, &parsed);
        state.absorb(&parsed);
        match parsed.profiles.first() {
            Some(p) => {
                known.insert(p.id.clone(), p.clone());
                depth.insert(p.id.clone(), 0);
                state.push_front(p.id.clone());
                p.id.clone()
            }
            None => return Ok(TargetReport::not_found(target_descriptor, state.cost)),
        }
    };

    let matches_target = |known: &BTreeMap<NodeId, Node>, id: &NodeId| -> bool {
        let node = known
            .get(id)
            .cloned()
            .unwrap_or_else(|| Node::new(id.as_str(), "Unknown"));
        relevance_score(&node, target_descriptor) >= match_threshold
    };

    let mut found: Option<NodeId> = None;
    if matches_target(&known, &anchor) {
        found = Some(anchor.clone());
    }

    while found.is_none() && state.budget_left(budget) {
        let v = match state.next_node() {
            Some(v) => v,
            None => {
                // stall: retry the most promising recovered node
                let mut best: Option<(f64, NodeId)> = None;
                for (id, node) in &known {
                    if *repush.get(id).unwrap_or(&0) >= 2 {
                        continue;
                    }
                    let s = relevance_score(node, target_descriptor);
                    if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
                        best = Some((s, id.clone()));
                    }
                }
                match best {
                    Some((_, id)) => {
                        *repush.entry(id.clone()).or_insert(0) += 1;
                        state.push_front(id);
                        continue;
                    }
                    None => break,
                }
            }
        };
        let v_depth = depth.get(&v).copied().unwrap_or(0);
        if v_depth >= max_depth {
            continue;
        }
        state.rounds += 1;
        let query = Query::follow_up(v.clone(), target_descriptor.to_string());
        let fresh = match expand(oracle, &mut state, &query, &v, budget) {
            Ok(f) => f,
            Err(_) => break,
        };
        for id in &fresh {
            parent.entry(id.clone()).or_insert_with(|| v.clone());
            depth.entry(id.clone()).or_insert(v_depth + 1);
        }
        // neighborhood payloads carry ids only; attributes arrive with the
        // final TargetInfo query, so scoring works on id and type tokens
        for id in &fresh {
            known
                .entry(id.clone())
                .or_insert_with(|| Node::new(id.as_str(), "Unknown"));
        }
        if let Some(hit) = fresh.iter().find(|id| matches_target(&known, id)) {
            found = Some(hit.clone());
            // make sure the path walk terminates at the anchor
        } else {
            // push so the highest-relevance neighbor is popped next
            let mut scored: Vec<(f64, NodeId)> = fresh
                .iter()
                .map(|id| (relevance_score(&known[id], target_descriptor), id.clone()))
                .collect();
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(b.1.cmp(&a.1)));
            for (_, id) in scored {
                state.admit(id);
            }
        }
    }

    let Some(target) = found else {
        return Ok(TargetReport::not_found(target_descriptor, state.cost));
    };

    // final extraction query
    let mut info_edges = std::collections::BTreeSet::new();
    let mut info_attrs = BTreeMap::new();
    if state.budget_left(budget) {
        let q = Query::target_info(target.clone());
        if let Ok(resp) = oracle.ask(&q) {
            state.charge(&resp);
            let parsed = parse_response(&resp);
            state.history.record(&q, &parsed);
            state.absorb(&parsed);
            for p in &parsed.profiles {
                if p.id == target {
                    info_attrs = p.attributes.clone();
                }
            }
            for e in &parsed.edges {
                if e.source == target {
                    info_edges.insert((e.relation.clone(), e.target.clone()));
                } else if e.target == target {
                    info_edges.insert((e.relation.clone(), e.source.clone()));
                }
            }
        }
    }

    // path anchor -> target via recorded parents
    let mut path = vec![target.clone()];
    let mut cur = target.clone();
    while let Some(p) = parent.get(&cur) {
        path.push(p.clone());
        cur = p.clone();
        if cur == anchor {
            break;
        }
    }
    if *path.last().unwrap() != anchor {
        path.push(anchor.clone());
    }
    path.reverse();
    path.dedup();

    Ok(TargetReport {
        target,
        info_edges,
        info_attrs,
        reached: true,
        path,
        cost: state.cost,
    })
}
