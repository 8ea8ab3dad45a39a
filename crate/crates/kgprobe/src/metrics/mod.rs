//! Structural similarity metrics between a recovered graph and ground
//! truth.
//!
//! Node identifiers are globally meaningful, so graph alignment is forced
//! by identity: no isomorphism search is needed and every metric here is
//! polynomial. The minimum edit path between two identity-aligned graphs
//! is exactly the symmetric difference of their node and edge sets.

use crate::graph::{KnowledgeGraph, NodeId};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("empty ground truth")]
    EmptyGroundTruth,
}

/// Untargeted attack scorecard: Table-1 column order plus cost columns.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct UntargetedReport {
    pub ged_normalized: f64,
    pub mcs_normalized: f64,
    pub nrr: f64,
    pub frr: f64,
    pub queries: usize,
    pub tokens: usize,
}

impl UntargetedReport {
    pub fn evaluate(
        rec: &KnowledgeGraph,
        gt: &KnowledgeGraph,
        cost: crate::attack::Cost,
    ) -> Result<Self, MetricError> {
        Ok(UntargetedReport {
            ged_normalized: ged_normalized(rec, gt),
            mcs_normalized: mcs_normalized(rec, gt)?,
            nrr: nrr(rec, gt)?,
            frr: frr(rec, gt),
            queries: cost.queries,
            tokens: cost.tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TargetedReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Raw edit cost: the symmetric difference of node and edge sets under
/// unit costs (identity alignment admits no substitutions).
pub fn ged_raw(rec: &KnowledgeGraph, gt: &KnowledgeGraph) -> usize {
    let rec_nodes = rec.node_id_set();
    let gt_nodes = gt.node_id_set();
    let node_delta = rec_nodes.symmetric_difference(&gt_nodes).count();
    let edge_delta = rec.edge_set().symmetric_difference(gt.edge_set()).count();
    node_delta + edge_delta
}

/// Normalized edit distance in [0,1]:
/// `(|VΔ| + |EΔ|) / (|V_gt| + |E_gt| + |V_rec| + |E_rec|)`.
/// Both graphs empty gives 0.
pub fn ged_normalized(rec: &KnowledgeGraph, gt: &KnowledgeGraph) -> f64 {
    let denom = gt.node_count() + gt.edge_count() + rec.node_count() + rec.edge_count();
    if denom == 0 {
        return 0.0;
    }
    ged_raw(rec, gt) as f64 / denom as f64
}

/// Largest connected component of the intersection graph
/// `(V_rec ∩ V_gt, E_rec ∩ E_gt)`, normalized by `|V_gt|`.
///
/// The connectedness requirement is what separates MCS from NRR: a
/// reconstruction can name most entities (high NRR) while its correctly
/// recovered structure stays fragmented (low MCS).
pub fn mcs_normalized(rec: &KnowledgeGraph, gt: &KnowledgeGraph) -> Result<f64, MetricError> {
    if gt.is_empty() {
        return Err(MetricError::EmptyGroundTruth);
    }
    let common_nodes: BTreeSet<NodeId> = rec
        .node_id_set()
        .intersection(&gt.node_id_set())
        .cloned()
        .collect();
    if common_nodes.is_empty() {
        return Ok(0.0);
    }
    // undirected adjacency over the intersection edge set
    let mut adj: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for t in rec.edge_set().intersection(gt.edge_set()) {
        adj.entry(&t.source).or_default().push(&t.target);
        adj.entry(&t.target).or_default().push(&t.source);
    }
    let mut best = 0usize;
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    for start in &common_nodes {
        if seen.contains(start) {
            continue;
        }
        let mut size = 0usize;
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(u) = queue.pop_front() {
            size += 1;
            if let Some(ns) = adj.get(u) {
                for n in ns {
                    if common_nodes.contains(*n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        best = best.max(size);
    }
    Ok(best as f64 / gt.node_count() as f64)
}

/// Node recovery rate `|V_rec ∩ V_gt| / |V_gt|`.
pub fn nrr(rec: &KnowledgeGraph, gt: &KnowledgeGraph) -> Result<f64, MetricError> {
    if gt.is_empty() {
        return Err(MetricError::EmptyGroundTruth);
    }
    let hit = rec
        .node_id_set()
        .intersection(&gt.node_id_set())
        .count();
    Ok(hit as f64 / gt.node_count() as f64)
}

/// Fabrication rate: fraction of recovered elements (nodes + edges)
/// absent from ground truth. Empty recovery scores 0.
pub fn frr(rec: &KnowledgeGraph, gt: &KnowledgeGraph) -> f64 {
    let total = rec.node_count() + rec.edge_count();
    if total == 0 {
        return 0.0;
    }
    let fake_nodes = rec
        .node_id_set()
        .difference(&gt.node_id_set())
        .count();
    let fake_edges = rec.edge_set().difference(gt.edge_set()).count();
    (fake_nodes + fake_edges) as f64 / total as f64
}

/// Precision/recall/F1 over extracted info elements vs ground-truth
/// Info(v*). Empty info against nonempty ground truth reports 0 precision.
pub fn targeted_scores(info: &BTreeSet<String>, gt_info: &BTreeSet<String>) -> TargetedReport {
    let hit = info.intersection(gt_info).count() as f64;
    let precision = if info.is_empty() {
        if gt_info.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        hit / info.len() as f64
    };
    let recall = if gt_info.is_empty() {
        1.0
    } else {
        hit / gt_info.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    TargetedReport {
        precision,
        recall,
        f1,
    }
}
