//! Shared test helpers: an independent brute-force graph-edit-distance
//! oracle and small random graph builders.

use kgprobe::graph::{GraphBuilder, KnowledgeGraph, Node, NodeId, Triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet, VecDeque};

/// Exact minimum edit cost from `rec` to `gt` by uniform-cost search over
/// (node set, edge set) states. Legal moves, each costing 1:
/// delete an edge; add a ground-truth edge whose endpoints are present;
/// delete an isolated node; add a ground-truth node.
///
/// Intentionally independent of the production metric: it never assumes
/// the answer is a symmetric difference.
#[allow(dead_code)] // shared module; not every test target calls it
pub fn brute_force_ged(rec: &KnowledgeGraph, gt: &KnowledgeGraph) -> usize {
    type State = (BTreeSet<NodeId>, BTreeSet<Triple>);
    let start: State = (rec.node_id_set(), rec.edge_set().clone());
    let goal: State = (gt.node_id_set(), gt.edge_set().clone());
    if start == goal {
        return 0;
    }
    let mut seen: HashSet<State> = HashSet::from([start.clone()]);
    let mut queue: VecDeque<(State, usize)> = VecDeque::from([(start, 0)]);
    while let Some(((nodes, edges), dist)) = queue.pop_front() {
        let mut successors: Vec<State> = Vec::new();
        // delete any edge
        for e in &edges {
            let mut next = edges.clone();
            next.remove(e);
            successors.push((nodes.clone(), next));
        }
        // add a goal edge with both endpoints present
        for e in &goal.1 {
            if !edges.contains(e) && nodes.contains(&e.source) && nodes.contains(&e.target) {
                let mut next = edges.clone();
                next.insert(e.clone());
                successors.push((nodes.clone(), next));
            }
        }
        // delete an isolated node
        for v in &nodes {
            let isolated = !edges.iter().any(|e| &e.source == v || &e.target == v);
            if isolated {
                let mut next = nodes.clone();
                next.remove(v);
                successors.push((next, edges.clone()));
            }
        }
        // add a goal node
        for v in &goal.0 {
            if !nodes.contains(v) {
                let mut next = nodes.clone();
                next.insert(v.clone());
                successors.push((next, edges.clone()));
            }
        }
        for s in successors {
            if s == goal {
                return dist + 1;
            }
            if seen.insert(s.clone()) {
                queue.push_back((s, dist + 1));
            }
        }
    }
    unreachable!("goal state is always reachable via add/delete moves");
}

/// Random graph with at most `max_nodes` nodes drawn from a shared
/// universe, so two graphs from different seeds overlap realistically.
pub fn small_random_graph(seed: u64, max_nodes: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(0..=max_nodes);
    let universe: Vec<String> = (0..max_nodes + 2).map(|i| format!("N{i}")).collect();
    let mut picked: Vec<&String> = Vec::new();
    let mut b = GraphBuilder::default();
    while picked.len() < n {
        let c = &universe[rng.gen_range(0..universe.len())];
        if !picked.contains(&c) {
            picked.push(c);
            b.add_node(Node::new(c.clone(), "T")).unwrap();
        }
    }
    if picked.len() >= 2 {
        let relations = ["r", "s"];
        let attempts = rng.gen_range(0..=picked.len() * 2);
        for _ in 0..attempts {
            let s = picked[rng.gen_range(0..picked.len())];
            let t = picked[rng.gen_range(0..picked.len())];
            if s == t {
                continue;
            }
            let rel = relations[rng.gen_range(0..relations.len())];
            let _ = b.add_triple(Triple::new(s.clone(), rel, t.clone()));
        }
    }
    b.build().unwrap()
}
