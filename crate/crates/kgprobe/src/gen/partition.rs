//! Partitioning protocols: anchor-centered balls, random connected
//! sampling, and size stratification.

use super::GenError;
use crate::graph::{KnowledgeGraph, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// One subgraph per node of `anchor_type`: the induced subgraph on the
/// anchor's radius-hop undirected ball. Overlap between outputs is
/// permitted.
pub fn partition_patient_centric(
    g: &KnowledgeGraph,
    anchor_type: &str,
    radius: usize,
) -> Result<Vec<(NodeId, KnowledgeGraph)>, GenError> {
    let anchors: Vec<NodeId> = g.nodes_of_type(anchor_type).map(|n| n.id.clone()).collect();
    if anchors.is_empty() {
        return Err(GenError::NoAnchorNodes);
    }
    let mut out = Vec::with_capacity(anchors.len());
    for a in anchors {
        let ball = g.ball(&a, radius)?;
        let sub = g.induced_subgraph(&ball)?;
        debug_assert!(sub.contains_node(&a));
        debug_assert!(sub.is_connected());
        out.push((a, sub));
    }
    Ok(out)
}

/// Connected induced subgraph of exactly `size` nodes grown by seeded
/// random frontier expansion from a random start node.
pub fn partition_random_connected(
    g: &KnowledgeGraph,
    size: usize,
    seed: u64,
) -> Result<KnowledgeGraph, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // starts must lie in a component big enough
    let mut eligible: Vec<NodeId> = Vec::new();
    let mut assigned: BTreeSet<NodeId> = BTreeSet::new();
    for id in g.node_ids() {
        if assigned.contains(id) {
            continue;
        }
        let comp = g.connected_component(id)?;
        if comp.len() >= size {
            eligible.extend(comp.iter().cloned());
        }
        assigned.extend(comp);
    }
    if eligible.is_empty() {
        return Err(GenError::ComponentTooSmall(size));
    }
    eligible.sort();
    let start = eligible[rng.gen_range(0..eligible.len())].clone();

    let mut chosen: BTreeSet<NodeId> = BTreeSet::from([start.clone()]);
    let mut frontier: Vec<NodeId> = Vec::new();
    let mut in_frontier: BTreeSet<NodeId> = BTreeSet::new();
    let extend_frontier = |v: &NodeId,
                               chosen: &BTreeSet<NodeId>,
                               frontier: &mut Vec<NodeId>,
                               in_frontier: &mut BTreeSet<NodeId>| {
        if let Ok(ns) = g.neighborhood(v, crate::graph::Direction::Both) {
            for (n, _, _) in ns {
                if !chosen.contains(&n) && in_frontier.insert(n.clone()) {
                    frontier.push(n);
                }
            }
        }
    };
    extend_frontier(&start, &chosen, &mut frontier, &mut in_frontier);
    while chosen.len() < size {
        if frontier.is_empty() {
            return Err(GenError::ComponentTooSmall(size));
        }
        let idx = rng.gen_range(0..frontier.len());
        let pick = frontier.swap_remove(idx);
        in_frontier.remove(&pick);
        chosen.insert(pick.clone());
        extend_frontier(&pick, &chosen, &mut frontier, &mut in_frontier);
    }
    Ok(g.induced_subgraph(&chosen)?)
}

/// Node-count strata. Bounds are inclusive upper edges; everything above
/// the last edge is "large".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeBuckets {
    pub tiny_max: usize,
    pub small_max: usize,
    pub medium_max: usize,
}

impl Default for SizeBuckets {
    fn default() -> Self {
        // tiny 100-500, small 501-2000, medium 2001-5000, large >5000
        SizeBuckets {
            tiny_max: 500,
            small_max: 2000,
            medium_max: 5000,
        }
    }
}

impl SizeBuckets {
    pub fn bucket_of(&self, node_count: usize) -> &'static str {
        if node_count <= self.tiny_max {
            "tiny"
        } else if node_count <= self.small_max {
            "small"
        } else if node_count <= self.medium_max {
            "medium"
        } else {
            "large"
        }
    }
}

/// Group subgraphs into size buckets; every graph lands in exactly one.
pub fn stratify_by_size<'a>(
    subgraphs: &'a [KnowledgeGraph],
    buckets: &SizeBuckets,
) -> BTreeMap<&'static str, Vec<&'a KnowledgeGraph>> {
    let mut out: BTreeMap<&'static str, Vec<&KnowledgeGraph>> = BTreeMap::new();
    for g in subgraphs {
        out.entry(buckets.bucket_of(g.node_count())).or_default().push(g);
    }
    out
}
