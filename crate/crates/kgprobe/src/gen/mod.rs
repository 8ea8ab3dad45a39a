//! Synthetic ground-truth graphs and the partitioning/stratification
//! protocols used by the experiment harness.
//!
//! Two built-in styles:
//! - `clinical`: anchor-centered clusters — Patient hubs fanning out to
//!   Diagnosis nodes that chain into Treatment and Medication records,
//!   with diagnoses shared across patients.
//! - `generic`: preferential-attachment topic chains with heavy-tailed
//!   degrees ("supernodes").

mod partition;

pub use partition::{
    partition_patient_centric, partition_random_connected, stratify_by_size, SizeBuckets,
};

use crate::graph::{GraphBuilder, KnowledgeGraph, Node, NodeId, Triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("infeasible generation parameters: {0}")]
    InfeasibleParams(String),
    #[error("no anchor nodes of the requested type")]
    NoAnchorNodes,
    #[error("no connected component with at least {0} nodes")]
    ComponentTooSmall(usize),
    #[error("graph error: {0}")]
    Graph(#[from] crate::graph::GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Clinical,
    Generic,
}

/// One relation rule: source type --relation--> target type with a mean
/// fan-out and a hard per-node cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationRule {
    pub source_type: String,
    pub relation: String,
    pub target_type: String,
    pub mean_fanout: f64,
    pub max_fanout: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaSpec {
    /// entity type -> attribute template keys
    pub entity_types: Vec<(String, Vec<String>)>,
    pub rules: Vec<RelationRule>,
}

impl SchemaSpec {
    pub fn clinical() -> Self {
        SchemaSpec {
            entity_types: vec![
                ("Patient".into(), vec!["age".into(), "gender".into()]),
                ("Diagnosis".into(), vec!["condition".into()]),
                ("Treatment".into(), vec!["procedure".into()]),
                ("Medication".into(), vec!["drug".into(), "dose".into()]),
            ],
            rules: vec![
                rule("Patient", "has_diagnosis", "Diagnosis", 2.5, 8),
                rule("Diagnosis", "treated_by", "Treatment", 0.9, 4),
                rule("Treatment", "prescribes", "Medication", 0.8, 4),
            ],
        }
    }

    pub fn generic() -> Self {
        SchemaSpec {
            entity_types: vec![
                ("Topic".into(), vec!["field".into()]),
                ("Person".into(), vec!["occupation".into()]),
                ("Event".into(), vec!["year".into()]),
                ("Work".into(), vec!["kind".into()]),
            ],
            rules: vec![rule("Topic", "related_to", "Topic", 2.0, usize::MAX)],
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let names: Vec<&str> = self.entity_types.iter().map(|(n, _)| n.as_str()).collect();
        for r in &self.rules {
            for t in [&r.source_type, &r.target_type] {
                if !names.contains(&t.as_str()) {
                    return Err(GenError::InfeasibleParams(format!(
                        "relation rule references undeclared type {t:?}"
                    )));
                }
            }
            if r.mean_fanout < 0.0 {
                return Err(GenError::InfeasibleParams("negative fan-out".into()));
            }
        }
        Ok(())
    }
}

fn rule(s: &str, r: &str, t: &str, mean: f64, max: usize) -> RelationRule {
    RelationRule {
        source_type: s.into(),
        relation: r.into(),
        target_type: t.into(),
        mean_fanout: mean,
        max_fanout: max,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenParams {
    pub target_node_count: usize,
    pub target_average_degree: f64,
    pub seed: u64,
    pub style: Style,
    #[serde(skip)]
    pub schema: Option<SchemaSpec>,
}

impl GenParams {
    pub fn new(style: Style, target_node_count: usize, target_average_degree: f64, seed: u64) -> Self {
        GenParams {
            target_node_count,
            target_average_degree,
            seed,
            style,
            schema: None,
        }
    }

    fn schema(&self) -> SchemaSpec {
        self.schema.clone().unwrap_or_else(|| match self.style {
            Style::Clinical => SchemaSpec::clinical(),
            Style::Generic => SchemaSpec::generic(),
        })
    }
}

/// Deterministic synthetic graph: connected, |V| within ±5% of target,
/// average degree within ±10% of target.
pub fn generate(params: &GenParams) -> Result<KnowledgeGraph, GenError> {
    let n = params.target_node_count;
    let d = params.target_average_degree;
    if n < 2 {
        return Err(GenError::InfeasibleParams("need at least 2 nodes".into()));
    }
    if d < 1.0 {
        return Err(GenError::InfeasibleParams("average degree must be >= 1".into()));
    }
    if d >= n as f64 {
        return Err(GenError::InfeasibleParams(format!(
            "average degree {d} infeasible for {n} nodes"
        )));
    }
    // a connected simple-ish graph needs |E| >= |V|-1, i.e. d >= ~2
    let min_connected_degree = 2.0 * (n as f64 - 1.0) / n as f64;
    if d * 1.1 < min_connected_degree {
        return Err(GenError::InfeasibleParams(format!(
            "average degree {d} below the connectivity floor for {n} nodes"
        )));
    }
    let schema = params.schema();
    schema.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut b = match params.style {
        Style::Clinical => clinical_skeleton(n, &schema, &mut rng)?,
        Style::Generic => generic_skeleton(n, d, &schema, &mut rng)?,
    };
    densify(&mut b, d, params.style, &mut rng)?;
    let g = b.build()?;
    debug_assert!(g.is_connected());
    Ok(g)
}

fn sample_fanout(rng: &mut ChaCha8Rng, mean: f64, max: usize) -> usize {
    // geometric-ish: success probability 1/(1+mean)
    if mean <= 0.0 {
        return 0;
    }
    let p = 1.0 / (1.0 + mean);
    let mut k = 0usize;
    while k < max && rng.gen::<f64>() >= p {
        k += 1;
    }
    k
}

fn attr_value(rng: &mut ChaCha8Rng, key: &str) -> String {
    match key {
        "age" => format!("{}", rng.gen_range(18..95)),
        "gender" => if rng.gen_bool(0.5) { "M" } else { "F" }.to_string(),
        "condition" => {
            const CONDS: &[&str] = &[
                "diabetes", "hypertension", "atrial fibrillation", "asthma", "sepsis",
                "pneumonia", "anemia", "migraine",
            ];
            CONDS[rng.gen_range(0..CONDS.len())].to_string()
        }
        "procedure" => {
            const PROCS: &[&str] = &["cabg", "dialysis", "stent", "ablation", "transfusion"];
            PROCS[rng.gen_range(0..PROCS.len())].to_string()
        }
        "drug" => {
            const DRUGS: &[&str] = &["metformin", "warfarin", "lisinopril", "albuterol", "insulin"];
            DRUGS[rng.gen_range(0..DRUGS.len())].to_string()
        }
        "dose" => format!("{}mg", 5 * rng.gen_range(1..40)),
        "year" => format!("{}", rng.gen_range(1900..2025)),
        _ => format!("v{}", rng.gen_range(0..1000)),
    }
}

fn make_node(rng: &mut ChaCha8Rng, schema: &SchemaSpec, entity_type: &str, idx: usize) -> Node {
    let mut node = Node::new(format!("{entity_type}_{idx}"), entity_type);
    if let Some((_, keys)) = schema.entity_types.iter().find(|(n, _)| n == entity_type) {
        for k in keys {
            let v = attr_value(rng, k);
            node.attributes.insert(k.clone(), v);
        }
    }
    node
}

/// Patient-hub clusters chained together through shared diagnoses.
fn clinical_skeleton(
    n: usize,
    schema: &SchemaSpec,
    rng: &mut ChaCha8Rng,
) -> Result<GraphBuilder, GenError> {
    let mut b = GraphBuilder::default();
    for (t, _) in &schema.entity_types {
        b.schema.entity_types.insert(t.clone());
    }
    let mut counter = 0usize;
    let mut next_id = |t: &str, rng: &mut ChaCha8Rng, b: &mut GraphBuilder| -> Result<NodeId, GenError> {
        counter += 1;
        let node = make_node(rng, schema, t, counter);
        let id = node.id.clone();
        b.add_node(node)?;
        Ok(id)
    };

    let diag_rule = schema.rules.iter().find(|r| r.source_type == "Patient");
    let treat_rule = schema.rules.iter().find(|r| r.source_type == "Diagnosis");
    let med_rule = schema.rules.iter().find(|r| r.source_type == "Treatment");

    let mut diagnoses: Vec<NodeId> = Vec::new();
    while b.node_count() < n {
        let patient = next_id("Patient", rng, &mut b)?;
        // every patient after the first shares one existing diagnosis,
        // which keeps the graph connected and the clusters overlapping
        if let Some(shared) = (!diagnoses.is_empty())
            .then(|| diagnoses[rng.gen_range(0..diagnoses.len())].clone())
        {
            let _ = b.add_triple(Triple {
                source: patient.clone(),
                relation: "has_diagnosis".into(),
                target: shared,
            });
        }
        let fan = diag_rule.map_or(2, |r| sample_fanout(rng, r.mean_fanout, r.max_fanout)).max(1);
        for _ in 0..fan {
            if b.node_count() >= n + 3 {
                break;
            }
            let diag = next_id("Diagnosis", rng, &mut b)?;
            diagnoses.push(diag.clone());
            b.add_triple(Triple {
                source: patient.clone(),
                relation: "has_diagnosis".into(),
                target: diag.clone(),
            })?;
            let want_treat = treat_rule.is_some_and(|r| rng.gen::<f64>() < r.mean_fanout.min(1.0));
            if want_treat && b.node_count() < n + 3 {
                let treat = next_id("Treatment", rng, &mut b)?;
                b.add_triple(Triple {
                    source: diag.clone(),
                    relation: "treated_by".into(),
                    target: treat.clone(),
                })?;
                let want_med = med_rule.is_some_and(|r| rng.gen::<f64>() < r.mean_fanout.min(1.0));
                if want_med && b.node_count() < n + 3 {
                    let med = next_id("Medication", rng, &mut b)?;
                    b.add_triple(Triple {
                        source: treat.clone(),
                        relation: "prescribes".into(),
                        target: med,
                    })?;
                }
            }
        }
    }
    Ok(b)
}

/// Preferential attachment with type-cycled nodes; produces heavy-tailed
/// degree distributions and hub "supernodes".
fn generic_skeleton(
    n: usize,
    d: f64,
    schema: &SchemaSpec,
    rng: &mut ChaCha8Rng,
) -> Result<GraphBuilder, GenError> {
    let types: Vec<&str> = schema.entity_types.iter().map(|(t, _)| t.as_str()).collect();
    let relations = ["related_to", "located_in", "part_of", "influenced_by"];
    let mut b = GraphBuilder::default();
    let mut ids: Vec<NodeId> = Vec::new();
    // endpoint pool, one entry per incidence, drives preferential attachment
    let mut endpoints: Vec<usize> = Vec::new();

    let m_mean = (d / 2.0).max(1.0);
    for i in 0..n {
        let t = types[i % types.len()];
        let node = make_node(rng, schema, t, i);
        let id = node.id.clone();
        b.add_node(node)?;
        ids.push(id.clone());
        if i == 0 {
            continue;
        }
        let mut m = m_mean.floor() as usize;
        if rng.gen::<f64>() < m_mean.fract() {
            m += 1;
        }
        let m = m.max(1).min(i);
        let mut attached = 0usize;
        let mut guard = 0usize;
        while attached < m && guard < 50 {
            guard += 1;
            let j = if endpoints.is_empty() || rng.gen_bool(0.25) {
                rng.gen_range(0..i)
            } else {
                endpoints[rng.gen_range(0..endpoints.len())]
            };
            let rel = relations[rng.gen_range(0..relations.len())];
            let t = Triple {
                source: id.clone(),
                relation: rel.into(),
                target: ids[j].clone(),
            };
            if t.source == t.target || b.contains_edge(&t) {
                continue;
            }
            b.add_triple(t)?;
            endpoints.push(i);
            endpoints.push(j);
            attached += 1;
        }
    }
    Ok(b)
}

/// Add (or keep) edges until the average degree lands within tolerance of
/// the target. Extra edges follow style-appropriate relation rules.
fn densify(
    b: &mut GraphBuilder,
    target_degree: f64,
    style: Style,
    rng: &mut ChaCha8Rng,
) -> Result<(), GenError> {
    let n = b.node_count();
    let target_edges = (target_degree * n as f64 / 2.0).round() as usize;
    if b.edge_count() >= target_edges {
        return Ok(());
    }
    // collect ids per type for rule-respecting endpoint picks
    let snapshot = b.clone().build()?;
    let mut by_type: std::collections::BTreeMap<String, Vec<NodeId>> = Default::default();
    for node in snapshot.nodes() {
        by_type
            .entry(node.entity_type.clone())
            .or_default()
            .push(node.id.clone());
    }
    let clinical_extras: &[(&str, &str, &str)] = &[
        ("Patient", "has_diagnosis", "Diagnosis"),
        ("Patient", "similar_case", "Patient"),
        ("Diagnosis", "comorbid_with", "Diagnosis"),
        ("Treatment", "prescribes", "Medication"),
    ];
    let mut guard = 0usize;
    let max_tries = target_edges.saturating_sub(b.edge_count()) * 60 + 1000;
    while b.edge_count() < target_edges && guard < max_tries {
        guard += 1;
        let triple = match style {
            Style::Clinical => {
                let (st, rel, tt) = clinical_extras[rng.gen_range(0..clinical_extras.len())];
                let (Some(ss), Some(ts)) = (by_type.get(st), by_type.get(tt)) else {
                    continue;
                };
                Triple {
                    source: ss[rng.gen_range(0..ss.len())].clone(),
                    relation: rel.into(),
                    target: ts[rng.gen_range(0..ts.len())].clone(),
                }
            }
            Style::Generic => {
                let all: Vec<&NodeId> = by_type.values().flatten().collect();
                Triple {
                    source: (*all[rng.gen_range(0..all.len())]).clone(),
                    relation: "related_to".into(),
                    target: (*all[rng.gen_range(0..all.len())]).clone(),
                }
            }
        };
        if triple.source == triple.target || b.contains_edge(&triple) {
            continue;
        }
        b.add_triple(triple)?;
    }
    let achieved = 2.0 * b.edge_count() as f64 / n as f64;
    if (achieved - target_degree).abs() > 0.1 * target_degree {
        return Err(GenError::InfeasibleParams(format!(
            "could not reach target degree {target_degree} (got {achieved:.2})"
        )));
    }
    Ok(())
}

/// Manifest line for a generated/partitioned graph file.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub nodes: usize,
    pub edges: usize,
    pub average_degree: f64,
    pub bucket: String,
    pub seed: u64,
}

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::from("# file\tnodes\tedges\tavg_degree\tbucket\tseed\n");
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.4}\t{}\t{}\n",
            e.file, e.nodes, e.edges, e.average_degree, e.bucket, e.seed
        ));
    }
    out
}

/// Convenience used by tests and the harness: pick a deterministic anchor
/// hint for a graph (the smallest id of the preferred anchor type, else
/// the smallest id overall).
pub fn default_anchor_hint(g: &KnowledgeGraph, preferred_type: Option<&str>) -> String {
    if let Some(t) = preferred_type {
        if let Some(n) = g.nodes_of_type(t).map(|n| &n.id).min() {
            return n.as_str().to_string();
        }
    }
    g.node_ids()
        .next()
        .map(|n| n.as_str().to_string())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_same_seed() {
        let p = GenParams::new(Style::Clinical, 100, 4.0, 7);
        let a = generate(&p).unwrap();
        let b = generate(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            crate::graph::write_graph_string(&a),
            crate::graph::write_graph_string(&b)
        );
    }

    #[test]
    fn degree_within_tolerance() {
        for style in [Style::Clinical, Style::Generic] {
            let p = GenParams::new(style, 100, 4.0, 11);
            let g = generate(&p).unwrap();
            let stats = g.degree_stats().unwrap();
            assert!(
                (stats.average_degree - 4.0).abs() <= 0.4,
                "style {style:?}: degree {}",
                stats.average_degree
            );
            let n = g.node_count() as f64;
            assert!((n - 100.0).abs() <= 5.0, "node count {n}");
            assert!(g.is_connected());
        }
    }

    #[test]
    fn infeasible_params() {
        assert!(matches!(
            generate(&GenParams::new(Style::Clinical, 2, 5.0, 1)),
            Err(GenError::InfeasibleParams(_))
        ));
        assert!(matches!(
            generate(&GenParams::new(Style::Clinical, 100, 0.5, 1)),
            Err(GenError::InfeasibleParams(_))
        ));
    }

    #[test]
    fn generic_has_heavier_tail() {
        let clin = generate(&GenParams::new(Style::Clinical, 300, 5.0, 3)).unwrap();
        let genr = generate(&GenParams::new(Style::Generic, 300, 5.0, 3)).unwrap();
        let c = clin.degree_stats().unwrap().max_degree;
        let g = genr.degree_stats().unwrap().max_degree;
        assert!(g > c, "generic max degree {g} should exceed clinical {c}");
    }

    #[test]
    fn no_reserved_hallucination_prefix() {
        let g = generate(&GenParams::new(Style::Generic, 120, 4.0, 5)).unwrap();
        assert!(g
            .node_ids()
            .all(|id| !id.as_str().starts_with(crate::oracle::HALLUCINATION_PREFIX)));
    }
}
