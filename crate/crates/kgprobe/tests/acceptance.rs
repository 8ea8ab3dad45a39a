//! Release acceptance suite: one test — and one PASS line — per shipping
//! criterion. Thresholds are fixed; configurations are pinned so every
//! run is reproducible bit for bit.

mod common;

use common::{brute_force_ged, small_random_graph};
use kgprobe::attack::{
    ground_truth_info, strategy_by_name, targeted_dfs, AttackBudget,
};
use kgprobe::defense::{DefenseConfig, DefendedOracle, DetectorAction, DetectorConfig, DetectorState};
use kgprobe::gen::{self, GenParams, Style};
use kgprobe::graph::{Direction, KnowledgeGraph, NodeId};
use kgprobe::harness::{
    build_ground_truth, emit_cost_report, run_sweep, run_sweep_to_dir, ExperimentSpec, SweepSpec,
};
use kgprobe::metrics;
use kgprobe::oracle::{splitmix64, Oracle, OracleConfig, OracleSession, Paradigm, Query};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Instant;

/// Mean of `pick` over aggregate rows carrying `axis = value`.
fn axis_mean(
    outcome: &kgprobe::harness::SweepOutcome,
    axis: &str,
    value: &str,
    pick: fn(&kgprobe::harness::AggregateRow) -> f64,
) -> f64 {
    let rows: Vec<f64> = outcome
        .aggregates
        .iter()
        .filter(|r| {
            r.assignment
                .iter()
                .any(|(a, v)| a == axis && v == value)
        })
        .map(pick)
        .collect();
    assert!(!rows.is_empty(), "no aggregate rows with {axis}={value}");
    rows.iter().sum::<f64>() / rows.len() as f64
}

fn sweep(toml: &str) -> kgprobe::harness::SweepOutcome {
    let spec = SweepSpec::from_toml(toml).expect("sweep config parses");
    run_sweep(&spec, 0).expect("sweep runs")
}

#[test]
fn criterion_01_exact_recovery_under_noiseless_oracle() {
    for seed in 0..10u64 {
        let n = 100 + (seed as usize) * 44; // 100..=496 nodes
        let g = gen::generate(&GenParams::new(Style::Clinical, n, 4.0, 7000 + seed)).unwrap();
        let hint = gen::default_anchor_hint(&g, None);
        let mut oracle = Oracle::new(OracleConfig::noiseless(seed), g.clone());
        let started = Instant::now();
        let outcome = strategy_by_name("bfs")
            .unwrap()
            .run(&mut oracle, &hint, &AttackBudget::unlimited(), 64, seed)
            .unwrap();
        let elapsed = started.elapsed();
        assert!(!outcome.incomplete);
        let rec = &outcome.recovered;
        assert_eq!(metrics::nrr(rec, &g).unwrap(), 1.0, "seed {seed}: nrr");
        assert_eq!(metrics::mcs_normalized(rec, &g).unwrap(), 1.0, "seed {seed}: mcs");
        assert_eq!(metrics::ged_normalized(rec, &g), 0.0, "seed {seed}: ged");
        assert_eq!(metrics::frr(rec, &g), 0.0, "seed {seed}: frr");
        assert!(elapsed.as_secs_f64() < 5.0, "seed {seed}: took {elapsed:?}");
    }
    println!("PASS criterion 1: noiseless BFS reaches nrr=mcs=1, ged=frr=0 on 10 seeds");
}

#[test]
fn criterion_02_ged_matches_brute_force_search() {
    let started = Instant::now();
    for case in 0..200u64 {
        let rec = small_random_graph(2 * case, 6);
        let gt = small_random_graph(2 * case + 1, 6);
        let exact = brute_force_ged(&rec, &gt);
        assert_eq!(
            metrics::ged_raw(&rec, &gt),
            exact,
            "case {case}: raw edit cost"
        );
        let denom = rec.node_count() + rec.edge_count() + gt.node_count() + gt.edge_count();
        let expected = if denom == 0 { 0.0 } else { exact as f64 / denom as f64 };
        assert_eq!(metrics::ged_normalized(&rec, &gt), expected, "case {case}");
    }
    assert!(started.elapsed().as_secs() < 60, "took {:?}", started.elapsed());
    println!("PASS criterion 2: ged agrees with exact edit-path search on 200 pairs");
}

#[test]
fn criterion_03_metric_order_invariants() {
    // every repetition of a noisy sweep obeys nrr >= mcs
    let outcome = sweep(
        r#"
seed = 11
repetitions = 2
[graph]
source = "generate"
style = "clinical"
nodes = 150
average_degree = 4.0
[oracle]
top_k = 4
output_token_limit = 150
hallucination_rate = 0.05
omission_rate = 0.2
[attack.budget]
max_queries = 120
[axes]
strategy = ["bfs", "dfs", "rw"]
paradigm = ["retrieval_based", "agent_based"]
seed = [1, 2, 3]
"#,
    );
    assert_eq!(outcome.failed_cells + outcome.failed_repetitions, 0);
    let mut rows = 0usize;
    for (_, reps) in &outcome.cells {
        for row in reps {
            let (Some(nrr), Some(mcs)) = (row.nrr, row.mcs) else {
                panic!("untargeted row without nrr/mcs");
            };
            assert!(nrr >= mcs, "nrr {nrr} < mcs {mcs}");
            rows += 1;
        }
    }
    assert_eq!(rows, 3 * 2 * 3 * 2);
    // ged = 0 exactly when the graphs are equal
    for case in 0..300u64 {
        let a = small_random_graph(splitmix64(case), 6);
        let b = small_random_graph(splitmix64(case ^ 0xabcd), 6);
        assert_eq!(metrics::ged_normalized(&a, &b) == 0.0, a == b);
        assert_eq!(metrics::ged_normalized(&a, &a), 0.0);
    }
    println!("PASS criterion 3: nrr >= mcs on all {rows} rows; ged=0 iff equality");
}

#[test]
fn criterion_04_traversal_ablation_bfs_dfs_rw() {
    let outcome = sweep(
        r#"
seed = 1
repetitions = 1
[graph]
source = "generate"
style = "clinical"
nodes = 1000
average_degree = 5.0
[oracle]
paradigm = "agent_based"
output_token_limit = 120
hallucination_rate = 0.02
omission_rate = 0.35
[attack.budget]
max_queries = 265
[axes]
strategy = ["bfs", "dfs", "rw"]
seed = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]
"#,
    );
    assert_eq!(outcome.failed_cells + outcome.failed_repetitions, 0);
    let nrr = |r: &kgprobe::harness::AggregateRow| r.nrr_mean;
    let bfs = axis_mean(&outcome, "strategy", "bfs", nrr);
    let dfs = axis_mean(&outcome, "strategy", "dfs", nrr);
    let rw = axis_mean(&outcome, "strategy", "rw", nrr);
    assert!(bfs - dfs >= 0.03, "bfs {bfs:.4} vs dfs {dfs:.4}");
    assert!(dfs - rw >= 0.03, "dfs {dfs:.4} vs rw {rw:.4}");
    println!(
        "PASS criterion 4: mean nrr bfs {bfs:.4} > dfs {dfs:.4} > rw {rw:.4}, gaps >= 0.03"
    );
}

#[test]
fn criterion_05_scale_degradation() {
    let outcome = sweep(
        r#"
seed = 1
repetitions = 1
[graph]
source = "generate"
style = "clinical"
nodes = 300
average_degree = 5.0
[oracle]
paradigm = "retrieval_based"
top_k = 5
output_token_limit = 300
context_token_budget = 200
[attack.budget]
max_queries = 350
[axes]
nodes = [300, 1200, 3000, 6000]
seed = [1, 2, 3, 4, 5, 6]
"#,
    );
    assert_eq!(outcome.failed_cells + outcome.failed_repetitions, 0);
    let nrr = |r: &kgprobe::harness::AggregateRow| r.nrr_mean;
    let buckets: Vec<f64> = ["300", "1200", "3000", "6000"]
        .iter()
        .map(|b| axis_mean(&outcome, "nodes", b, nrr))
        .collect();
    for pair in buckets.windows(2) {
        assert!(pair[0] > pair[1], "nrr not strictly decreasing: {buckets:?}");
    }
    let gap = buckets[0] - buckets[3];
    assert!(gap >= 0.15, "tiny-minus-large gap {gap:.4}");
    println!(
        "PASS criterion 5: mean nrr decreases {:.4} -> {:.4} -> {:.4} -> {:.4} (gap {gap:.4})",
        buckets[0], buckets[1], buckets[2], buckets[3]
    );
}

#[test]
fn criterion_06_density_non_monotonicity() {
    let outcome = sweep(
        r#"
seed = 1
repetitions = 1
[graph]
source = "generate"
style = "clinical"
nodes = 1000
average_degree = 5.0
[oracle]
paradigm = "retrieval_based"
top_k = 5
output_token_limit = 300
context_token_budget = 200
[attack.budget]
max_queries = 300
[axes]
average_degree = [2.0, 5.0, 8.0, 12.0, 20.0]
seed = [1, 2, 3, 4, 5, 6, 7, 8]
"#,
    );
    assert_eq!(outcome.failed_cells + outcome.failed_repetitions, 0);
    let nrr = |r: &kgprobe::harness::AggregateRow| r.nrr_mean;
    let mcs = |r: &kgprobe::harness::AggregateRow| r.mcs_mean;
    let sparse = axis_mean(&outcome, "average_degree", "2.0", nrr);
    let medium = axis_mean(&outcome, "average_degree", "5.0", nrr);
    let dense = axis_mean(&outcome, "average_degree", "20.0", nrr);
    assert!(medium > sparse, "nrr(5) {medium:.4} <= nrr(2) {sparse:.4}");
    assert!(medium > dense, "nrr(5) {medium:.4} <= nrr(20) {dense:.4}");
    let frag = dense - axis_mean(&outcome, "average_degree", "20.0", mcs);
    assert!(frag >= 0.03, "nrr-mcs gap at degree 20 is {frag:.4}");
    println!(
        "PASS criterion 6: nrr peaks at degree 5 ({sparse:.4} < {medium:.4} > {dense:.4}); \
         saturation gap {frag:.4}"
    );
}

#[test]
fn criterion_07_output_window_defense() {
    let medium = r#"
seed = 1
repetitions = 1
[graph]
source = "generate"
style = "clinical"
nodes = 2500
average_degree = 4.0
[oracle]
paradigm = "retrieval_based"
top_k = 5
context_token_budget = 200
[attack.budget]
max_queries = 400
[axes]
output_cap = [200, 100]
seed = [1, 2, 3, 4, 5, 6]
"#;
    let tiny = medium.replace("nodes = 2500", "nodes = 120");

    // "tiny" means no neighborhood can exceed the narrow window by much
    let tiny_spec = SweepSpec::from_toml(&tiny).unwrap();
    let tiny_graph = build_ground_truth(&tiny_spec.base).unwrap();
    let max_degree = tiny_graph.degree_stats().unwrap().max_degree;
    assert!(max_degree <= 30, "tiny graph has a {max_degree}-degree hub");

    let nrr = |r: &kgprobe::harness::AggregateRow| r.nrr_mean;
    let mcs = |r: &kgprobe::harness::AggregateRow| r.mcs_mean;
    let med = sweep(medium);
    assert_eq!(med.failed_cells + med.failed_repetitions, 0);
    let nrr_drop = axis_mean(&med, "output_cap", "200", nrr) - axis_mean(&med, "output_cap", "100", nrr);
    let mcs_drop = axis_mean(&med, "output_cap", "200", mcs) - axis_mean(&med, "output_cap", "100", mcs);
    assert!(nrr_drop >= 0.05, "medium nrr drop {nrr_drop:.4}");
    assert!(mcs_drop >= 0.05, "medium mcs drop {mcs_drop:.4}");

    let small = sweep(&tiny);
    assert_eq!(small.failed_cells + small.failed_repetitions, 0);
    let tiny_nrr_drop =
        axis_mean(&small, "output_cap", "200", nrr) - axis_mean(&small, "output_cap", "100", nrr);
    let tiny_mcs_drop =
        axis_mean(&small, "output_cap", "200", mcs) - axis_mean(&small, "output_cap", "100", mcs);
    assert!(tiny_nrr_drop < 0.02, "tiny nrr drop {tiny_nrr_drop:.4}");
    assert!(tiny_mcs_drop < 0.02, "tiny mcs drop {tiny_mcs_drop:.4}");
    println!(
        "PASS criterion 7: halving the window drops nrr/mcs by {nrr_drop:.4}/{mcs_drop:.4} \
         on medium graphs, {tiny_nrr_drop:.4}/{tiny_mcs_drop:.4} on tiny ones"
    );
}

/// Seeded choice of a target node within `max_hops` of the anchor.
fn pick_nearby_target(g: &KnowledgeGraph, anchor: &NodeId, max_hops: usize, seed: u64) -> NodeId {
    let mut dist: BTreeMap<&NodeId, usize> = BTreeMap::from([(anchor, 0)]);
    let mut queue = VecDeque::from([anchor]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d == max_hops {
            continue;
        }
        for (t, _) in g.incident_triples(v, Direction::Both).unwrap() {
            for u in [t.source, t.target] {
                let u = g.node(&u).unwrap();
                if !dist.contains_key(&u.id) {
                    dist.insert(&u.id, d + 1);
                    queue.push_back(&u.id);
                }
            }
        }
    }
    let candidates: Vec<&NodeId> = dist
        .iter()
        .filter(|(id, d)| **d >= 1 && ***id != *anchor)
        .map(|(id, _)| *id)
        .collect();
    assert!(!candidates.is_empty(), "anchor has no neighbors within {max_hops}");
    candidates[splitmix64(seed) as usize % candidates.len()].clone()
}

fn targeted_case(seed: u64, config: OracleConfig) -> (kgprobe::metrics::TargetedReport, bool) {
    let g = gen::generate(&GenParams::new(Style::Clinical, 140, 4.0, 8100 + seed)).unwrap();
    let hint = gen::default_anchor_hint(&g, None);
    let anchor = {
        let mut probe = Oracle::new(OracleConfig::noiseless(0), g.clone());
        let resp = probe.ask(&Query::anchor(&hint)).unwrap();
        kgprobe::attack::parse_response(&resp).profiles[0].id.clone()
    };
    let target = pick_nearby_target(&g, &anchor, 4, splitmix64(seed ^ 0x7a67));
    let budget = AttackBudget {
        max_rounds: 8,
        max_queries: usize::MAX,
        max_tokens: usize::MAX,
    };
    let mut oracle = Oracle::new(config, g.clone());
    let report = targeted_dfs(&mut oracle, &hint, target.as_str(), &budget, 64, 1.0).unwrap();
    let reached = report.reached;
    let truth = ground_truth_info(&g, &target, Direction::Both);
    (metrics::targeted_scores(&report.info_elements(), &truth), reached)
}

#[test]
fn criterion_08_targeted_extraction() {
    for case in 0..50u64 {
        let (scores, reached) = targeted_case(case, OracleConfig::noiseless(case));
        assert!(reached, "case {case}: target not reached");
        assert_eq!(scores.f1, 1.0, "case {case}: f1 {:.4}", scores.f1);
    }
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for case in 0..50u64 {
        let mut config = OracleConfig::noiseless(case);
        config.paradigm = Paradigm::AgentBased;
        config.omission_rate = 0.1;
        let (scores, reached) = targeted_case(case, config);
        if reached {
            precisions.push(scores.precision);
            recalls.push(scores.recall);
        }
    }
    assert!(!recalls.is_empty());
    assert!(
        precisions.iter().all(|p| *p == 1.0),
        "omission fabricated an element"
    );
    let mean_recall = recalls.iter().sum::<f64>() / recalls.len() as f64;
    assert!(mean_recall < 1.0, "mean recall {mean_recall:.4}");
    println!(
        "PASS criterion 8: 50/50 noiseless targets reached with f1=1; under omission \
         precision stays 1.0 with mean recall {mean_recall:.4}"
    );
}

#[test]
fn criterion_09_traversal_detector() {
    let window = 12usize;
    let detector = DetectorConfig {
        window,
        overlap_threshold: 0.8,
        action: DetectorAction::Flag,
    };
    for seed in 0..20u64 {
        let g = gen::generate(&GenParams::new(Style::Clinical, 200, 4.0, 8800 + seed)).unwrap();
        let hint = gen::default_anchor_hint(&g, None);
        let defense = DefenseConfig {
            detector: Some(detector.clone()),
            ..Default::default()
        };
        let mut session = DefendedOracle::new(
            Oracle::new(OracleConfig::noiseless(seed), g),
            &defense,
        );
        let budget = AttackBudget {
            max_rounds: usize::MAX,
            max_queries: 2 * window,
            max_tokens: usize::MAX,
        };
        strategy_by_name("bfs")
            .unwrap()
            .run(&mut session, &hint, &budget, 64, seed)
            .unwrap();
        let first = session
            .alarms()
            .first()
            .unwrap_or_else(|| panic!("seed {seed}: no alarm within {} queries", 2 * window));
        assert!(first.seq <= 2 * window as u64);
    }
    // a stream of fresh entity names never alarms
    let mut benign = DetectorState::new(detector);
    for i in 0..500 {
        benign.check(&Query::neighborhood(NodeId::new(format!("visitor-{i}"))));
    }
    assert!(benign.alarms.is_empty(), "benign stream raised an alarm");
    println!(
        "PASS criterion 9: bfs flagged within 2W queries on 20/20 seeds; \
         500 benign queries raised 0 alarms"
    );
}

#[test]
fn criterion_10_query_cost_to_recover_100_nodes() {
    let spec = ExperimentSpec::from_toml(
        r#"
seed = 1
repetitions = 10
[graph]
source = "generate"
style = "clinical"
nodes = 1000
average_degree = 5.0
[oracle]
paradigm = "agent_based"
top_k = 2
output_token_limit = 120
hallucination_rate = 0.02
omission_rate = 0.05
"#,
    )
    .unwrap();
    let rows = emit_cost_report(&spec, 100, &[5.0], &[Paradigm::AgentBased]).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row.incomplete_runs, 0, "some repetitions never reached 100 nodes");
    assert!(
        row.avg_queries <= 130.0,
        "avg queries {:.1} over budget",
        row.avg_queries
    );
    assert!(
        row.avg_queries >= 50.0,
        "avg queries {:.1} implausibly low for this noise level",
        row.avg_queries
    );
    println!(
        "PASS criterion 10: recovering 100 nodes averages {:.1} queries over 10 seeds",
        row.avg_queries
    );
}

#[test]
fn criterion_11_sweeps_are_reproducible() {
    let toml = r#"
seed = 3
repetitions = 3
[graph]
source = "generate"
style = "generic"
nodes = 120
average_degree = 4.0
[oracle]
top_k = 3
output_token_limit = 120
hallucination_rate = 0.05
omission_rate = 0.15
[attack.budget]
max_queries = 80
[axes]
strategy = ["bfs", "rw"]
paradigm = ["retrieval_based", "agent_based"]
"#;
    let spec = SweepSpec::from_toml(toml).unwrap();
    let base = std::env::temp_dir().join(format!("kgprobe-accept-{}", std::process::id()));
    let dirs = [base.join("a"), base.join("b")];
    for dir in &dirs {
        run_sweep_to_dir(&spec, 2, dir).unwrap();
    }
    let mut names: BTreeSet<String> = BTreeSet::new();
    for dir in &dirs {
        for entry in std::fs::read_dir(dir).unwrap() {
            names.insert(entry.unwrap().file_name().into_string().unwrap());
        }
    }
    assert!(names.contains("long.tsv") && names.contains("aggregate.tsv"));
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    std::fs::remove_dir_all(&base).ok();
    println!(
        "PASS criterion 11: re-running the sweep reproduced {} output files byte-identically",
        names.len()
    );
}
