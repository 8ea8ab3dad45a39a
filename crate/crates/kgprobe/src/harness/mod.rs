//! Config-driven experiment runner: one experiment = (graph, oracle,
//! defenses, attack, metrics) × repetitions, all fanned out from a single
//! master seed. Sweeps layer a Cartesian axis grid on top.

mod sweep;

pub use sweep::{
    run_sweep, run_sweep_to_dir, AggregateRow, SweepCell, SweepError, SweepOutcome, SweepSpec,
};

use crate::attack::{
    ground_truth_info, strategy_by_name, targeted_dfs, AttackBudget, Cost,
};
use crate::defense::{DefendedOracle, DefenseConfig};
use crate::gen::{self, GenParams, Style};
use crate::graph::{self, KnowledgeGraph, NodeId};
use crate::metrics::{targeted_scores, UntargetedReport};
use crate::oracle::{splitmix64, Oracle, OracleConfig, OracleSession};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
    #[error("graph error: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("generation error: {0}")]
    Gen(#[from] crate::gen::GenError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Where the hidden graph comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphSource {
    Generate {
        style: Style,
        nodes: usize,
        average_degree: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Untargeted,
    Targeted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSpec {
    pub mode: AttackMode,
    /// Registry name: `bfs`, `dfs`, or `rw` (untargeted mode).
    pub strategy: String,
    pub budget: AttackBudget,
    pub history_capacity: usize,
    /// Anchor hint; defaults to a deterministic hub pick from the graph.
    pub anchor_hint: Option<String>,
    /// Targeted mode: explicit target node id. When absent, a seeded
    /// random non-anchor node is chosen per repetition.
    pub target: Option<String>,
    pub match_threshold: f64,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            mode: AttackMode::Untargeted,
            strategy: "bfs".into(),
            budget: AttackBudget::unlimited(),
            history_capacity: 64,
            anchor_hint: None,
            target: None,
            match_threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub graph: GraphSource,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub defense: DefenseConfig,
    #[serde(default)]
    pub attack: AttackSpec,
}

fn default_repetitions() -> usize {
    10
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repetitions < 1 {
            return Err(HarnessError::InvalidSpec("repetitions must be >= 1".into()));
        }
        self.oracle
            .validate()
            .map_err(HarnessError::InvalidSpec)?;
        self.defense
            .validate()
            .map_err(HarnessError::InvalidSpec)?;
        self.attack
            .budget
            .validate()
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        if self.attack.mode == AttackMode::Untargeted
            && strategy_by_name(&self.attack.strategy).is_none()
        {
            return Err(HarnessError::InvalidSpec(format!(
                "unknown strategy '{}'",
                self.attack.strategy
            )));
        }
        Ok(())
    }

    /// Stable hash over the serialized spec, carried on every result row.
    pub fn config_hash(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Seed fan-out: independent streams for graph build, perturbation, and
/// each repetition's oracle/attack pair.
pub fn graph_seed(master: u64) -> u64 {
    splitmix64(master ^ 0x6772_6170_685f_6b67)
}

pub fn rep_seed(master: u64, rep: usize) -> u64 {
    splitmix64(master ^ splitmix64(rep as u64 + 1))
}

/// One result row per repetition; untargeted and targeted runs share the
/// row shape (unused metric columns stay `None`).
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub repetition: usize,
    pub seed: u64,
    pub mode: AttackMode,
    pub strategy: String,
    pub ged: Option<f64>,
    pub mcs: Option<f64>,
    pub nrr: Option<f64>,
    pub frr: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub reached: Option<bool>,
    pub queries: usize,
    pub tokens: usize,
    pub blocked_queries: usize,
    pub incomplete: bool,
    pub config_hash: String,
    pub version: &'static str,
}

#[derive(Debug)]
pub struct RepetitionArtifacts {
    pub row: ResultRow,
    pub recovered: Option<KnowledgeGraph>,
    pub transcript: Vec<crate::oracle::TranscriptRecord>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub ground_truth: KnowledgeGraph,
    /// Per-repetition outcome; failed repetitions carry the error text.
    pub repetitions: Vec<Result<RepetitionArtifacts, String>>,
}

impl ExperimentResult {
    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.repetitions.iter().filter_map(|r| r.as_ref().ok()).map(|a| &a.row)
    }

    pub fn failures(&self) -> usize {
        self.repetitions.iter().filter(|r| r.is_err()).count()
    }
}

/// Materialize the hidden graph for a spec (pre-defense).
pub fn build_ground_truth(spec: &ExperimentSpec) -> Result<KnowledgeGraph, HarnessError> {
    match &spec.graph {
        GraphSource::Generate {
            style,
            nodes,
            average_degree,
        } => {
            let params = GenParams::new(*style, *nodes, *average_degree, graph_seed(spec.seed));
            Ok(gen::generate(&params)?)
        }
        GraphSource::File { path } => Ok(graph::read_graph(path)?),
    }
}

/// Run every repetition of one experiment. A repetition failure is
/// recorded and the remaining repetitions still run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, HarnessError> {
    spec.validate()?;
    let ground_truth = build_ground_truth(spec)?;
    // structural perturbation mutates the *served* graph only; metrics
    // always score against the unperturbed ground truth
    let served = match spec.defense.perturbation_rewire_rate {
        Some(p) if p > 0.0 => {
            crate::defense::perturb_structure(&ground_truth, p, splitmix64(graph_seed(spec.seed) ^ 1))
        }
        _ => ground_truth.clone(),
    };
    let config_hash = spec.config_hash();
    let mut repetitions = Vec::with_capacity(spec.repetitions);
    for rep in 0..spec.repetitions {
        repetitions.push(
            run_repetition(spec, &ground_truth, &served, rep, &config_hash)
                .map_err(|e| format!("repetition {rep}: {e}")),
        );
    }
    Ok(ExperimentResult {
        ground_truth,
        repetitions,
    })
}

fn build_session(
    spec: &ExperimentSpec,
    served: &KnowledgeGraph,
    seed: u64,
) -> DefendedOracle {
    let mut ocfg = spec.oracle.clone();
    ocfg.seed = seed;
    if spec.defense.protective_prompt_bypass.is_some() {
        ocfg.protective_prompt_bypass = spec.defense.protective_prompt_bypass;
    }
    let oracle = Oracle::new(ocfg, served.clone());
    DefendedOracle::new(oracle, &spec.defense)
}

fn anchor_hint(spec: &ExperimentSpec, gt: &KnowledgeGraph) -> String {
    spec.attack
        .anchor_hint
        .clone()
        .unwrap_or_else(|| gen::default_anchor_hint(gt, None))
}

fn pick_target(gt: &KnowledgeGraph, seed: u64) -> NodeId {
    let ids: Vec<&NodeId> = gt.node_ids().collect();
    ids[(splitmix64(seed) % ids.len() as u64) as usize].clone()
}

fn run_repetition(
    spec: &ExperimentSpec,
    gt: &KnowledgeGraph,
    served: &KnowledgeGraph,
    rep: usize,
    config_hash: &str,
) -> Result<RepetitionArtifacts, String> {
    let seed = rep_seed(spec.seed, rep);
    let mut session = build_session(spec, served, seed);
    let hint = anchor_hint(spec, gt);
    let mut row = ResultRow {
        repetition: rep,
        seed,
        mode: spec.attack.mode,
        strategy: spec.attack.strategy.clone(),
        ged: None,
        mcs: None,
        nrr: None,
        frr: None,
        precision: None,
        recall: None,
        f1: None,
        reached: None,
        queries: 0,
        tokens: 0,
        blocked_queries: 0,
        incomplete: false,
        config_hash: config_hash.to_string(),
        version: env!("CARGO_PKG_VERSION"),
    };
    match spec.attack.mode {
        AttackMode::Untargeted => {
            let strat = strategy_by_name(&spec.attack.strategy)
                .ok_or_else(|| format!("unknown strategy '{}'", spec.attack.strategy))?;
            let outcome = strat
                .run(
                    &mut session,
                    &hint,
                    &spec.attack.budget,
                    spec.attack.history_capacity,
                    seed,
                )
                .map_err(|e| e.to_string())?;
            let report = UntargetedReport::evaluate(&outcome.recovered, gt, outcome.cost)
                .map_err(|e| e.to_string())?;
            row.ged = Some(report.ged_normalized);
            row.mcs = Some(report.mcs_normalized);
            row.nrr = Some(report.nrr);
            row.frr = Some(report.frr);
            row.queries = report.queries;
            row.tokens = report.tokens;
            row.incomplete = outcome.incomplete;
            row.blocked_queries = session.blocked_queries();
            let transcript = session.transcript().to_vec();
            Ok(RepetitionArtifacts {
                row,
                recovered: Some(outcome.recovered),
                transcript,
            })
        }
        AttackMode::Targeted => {
            let target = spec
                .attack
                .target
                .clone()
                .map(NodeId::new)
                .unwrap_or_else(|| pick_target(gt, seed));
            let report = targeted_dfs(
                &mut session,
                &hint,
                target.as_str(),
                &spec.attack.budget,
                spec.attack.history_capacity,
                spec.attack.match_threshold,
            )
            .map_err(|e| e.to_string())?;
            let gt_info = ground_truth_info(gt, &target, spec.oracle.direction);
            let scores = targeted_scores(&report.info_elements(), &gt_info);
            row.precision = Some(scores.precision);
            row.recall = Some(scores.recall);
            row.f1 = Some(scores.f1);
            row.reached = Some(report.reached);
            row.queries = report.cost.queries;
            row.tokens = report.cost.tokens;
            row.blocked_queries = session.blocked_queries();
            let transcript = session.transcript().to_vec();
            Ok(RepetitionArtifacts {
                row,
                recovered: None,
                transcript,
            })
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

pub const RESULT_HEADER: &str = "repetition\tseed\tmode\tstrategy\tged\tmcs\tnrr\tfrr\tprecision\trecall\tf1\treached\tqueries\ttokens\tblocked\tincomplete\tconfig_hash\tversion";

pub fn result_line(row: &ResultRow) -> String {
    let mode = match row.mode {
        AttackMode::Untargeted => "untargeted",
        AttackMode::Targeted => "targeted",
    };
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        row.repetition,
        row.seed,
        mode,
        row.strategy,
        fmt_opt(row.ged),
        fmt_opt(row.mcs),
        fmt_opt(row.nrr),
        fmt_opt(row.frr),
        fmt_opt(row.precision),
        fmt_opt(row.recall),
        fmt_opt(row.f1),
        row.reached.map_or_else(|| "NA".into(), |b| b.to_string()),
        row.queries,
        row.tokens,
        row.blocked_queries,
        row.incomplete,
        row.config_hash,
        row.version,
    )
}

/// Render the full results table (header + one line per successful
/// repetition + one `# error` comment line per failure).
pub fn results_table(result: &ExperimentResult) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for rep in &result.repetitions {
        match rep {
            Ok(a) => {
                out.push_str(&result_line(&a.row));
                out.push('\n');
            }
            Err(e) => {
                out.push_str(&format!("# error\t{e}\n"));
            }
        }
    }
    out
}

fn transcript_table(records: &[crate::oracle::TranscriptRecord]) -> String {
    let mut out = String::from("seq\tkind\ttokens\trefused\ttruncated\tquery\n");
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.seq, r.kind, r.tokens, r.refused, r.truncated, r.query_text
        ));
    }
    out
}

/// Run an experiment and write its artifacts (results table, recovered
/// graphs, transcripts) under `dir`.
pub fn run_experiment_to_dir(
    spec: &ExperimentSpec,
    dir: &Path,
) -> Result<ExperimentResult, HarnessError> {
    let result = run_experiment(spec)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.tsv"), results_table(&result))?;
    graph::write_graph(&result.ground_truth, &dir.join("ground_truth.tsv"))?;
    for rep in result.repetitions.iter().flatten() {
        let i = rep.row.repetition;
        if let Some(g) = &rep.recovered {
            graph::write_graph(g, &dir.join(format!("recovered_rep{i}.tsv")))?;
        }
        std::fs::write(
            dir.join(format!("transcript_rep{i}.tsv")),
            transcript_table(&rep.transcript),
        )?;
    }
    Ok(result)
}

/// One cost-report cell: average spend to recover `n_target` ground-truth
/// nodes, per density × paradigm.
#[derive(Debug, Clone, Serialize)]
pub struct CostRow {
    pub average_degree: f64,
    pub paradigm: crate::oracle::Paradigm,
    pub avg_queries: f64,
    pub avg_tokens: f64,
    pub avg_frr: f64,
    pub incomplete_runs: usize,
}

/// Drive a BFS reconstruction until `n_target` ground-truth nodes are
/// recovered, then stop. Returns (cost, frr, reached).
fn run_until_recovered(
    session: &mut dyn OracleSession,
    gt: &KnowledgeGraph,
    hint: &str,
    n_target: usize,
    budget: &AttackBudget,
) -> (Cost, f64, bool) {
    use crate::attack::{parse_response, AttackState, FrontierMode};
    use crate::oracle::Query;

    let mut state = AttackState::new(FrontierMode::Bfs, 64);
    let gt_nodes = gt.node_id_set();
    let recovered_true = |state: &AttackState| {
        state
            .recovered_node_ids()
            .filter(|id| gt_nodes.contains(*id))
            .count()
    };
    let q = Query::anchor(hint);
    if let Ok(resp) = session.ask(&q) {
        state.charge(&resp);
        let parsed = parse_response(&resp);
        state.absorb(&parsed);
        for p in &parsed.profiles {
            state.admit(p.id.clone());
        }
    }
    while recovered_true(&state) < n_target && state.budget_left(budget) {
        let Some(node) = state.next_node() else { break };
        let q = Query::neighborhood(node);
        let Ok(resp) = session.ask(&q) else { break };
        state.charge(&resp);
        let parsed = parse_response(&resp);
        state.absorb(&parsed);
        for e in &parsed.edges {
            state.admit(e.source.clone());
            state.admit(e.target.clone());
        }
    }
    let reached = recovered_true(&state) >= n_target;
    let (recovered, cost) = state.finish();
    let frr = crate::metrics::frr(&recovered, gt);
    (cost, frr, reached)
}

/// Appendix-style overhead table: average queries/tokens/FRR to recover
/// `n_target` nodes, one row per density × paradigm cell. Cells whose
/// repetitions never reach the target are counted in `incomplete_runs`
/// (averages cover completed runs only).
pub fn emit_cost_report(
    base: &ExperimentSpec,
    n_target: usize,
    densities: &[f64],
    paradigms: &[crate::oracle::Paradigm],
) -> Result<Vec<CostRow>, HarnessError> {
    let mut rows = Vec::new();
    for &d in densities {
        for &paradigm in paradigms {
            let mut spec = base.clone();
            if let GraphSource::Generate { average_degree, .. } = &mut spec.graph {
                *average_degree = d;
            }
            spec.oracle.paradigm = paradigm;
            spec.validate()?;
            let gt = build_ground_truth(&spec)?;
            let hint = anchor_hint(&spec, &gt);
            let mut queries = 0usize;
            let mut tokens = 0usize;
            let mut frr_sum = 0.0;
            let mut completed = 0usize;
            let mut incomplete = 0usize;
            for rep in 0..spec.repetitions {
                let mut session = build_session(&spec, &gt, rep_seed(spec.seed, rep));
                let (cost, frr, reached) =
                    run_until_recovered(&mut session, &gt, &hint, n_target, &spec.attack.budget);
                if reached {
                    queries += cost.queries;
                    tokens += cost.tokens;
                    frr_sum += frr;
                    completed += 1;
                } else {
                    incomplete += 1;
                }
            }
            let denom = completed.max(1) as f64;
            rows.push(CostRow {
                average_degree: d,
                paradigm,
                avg_queries: queries as f64 / denom,
                avg_tokens: tokens as f64 / denom,
                avg_frr: frr_sum / denom,
                incomplete_runs: incomplete,
            });
        }
    }
    Ok(rows)
}

pub fn cost_table(rows: &[CostRow]) -> String {
    let mut out = String::from("average_degree\tparadigm\tavg_queries\tavg_tokens\tavg_frr\tincomplete\n");
    for r in rows {
        let paradigm = match r.paradigm {
            crate::oracle::Paradigm::RetrievalBased => "retrieval_based",
            crate::oracle::Paradigm::AgentBased => "agent_based",
        };
        out.push_str(&format!(
            "{}\t{}\t{:.1}\t{:.1}\t{:.4}\t{}\n",
            r.average_degree, paradigm, r.avg_queries, r.avg_tokens, r.avg_frr, r.incomplete_runs
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            seed: 7,
            repetitions: 2,
            output_dir: None,
            graph: GraphSource::Generate {
                style: Style::Clinical,
                nodes: 60,
                average_degree: 3.0,
            },
            oracle: OracleConfig::noiseless(0),
            defense: DefenseConfig::default(),
            attack: AttackSpec::default(),
        }
    }

    #[test]
    fn noiseless_bfs_exact_recovery_row() {
        let result = run_experiment(&tiny_spec()).unwrap();
        assert_eq!(result.failures(), 0);
        for row in result.rows() {
            assert_eq!(row.nrr, Some(1.0));
            assert_eq!(row.ged, Some(0.0));
            assert_eq!(row.frr, Some(0.0));
        }
    }

    #[test]
    fn deterministic_result_tables() {
        let a = results_table(&run_experiment(&tiny_spec()).unwrap());
        let b = results_table(&run_experiment(&tiny_spec()).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("1.000000"));
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
seed = 11
[graph]
source = "generate"
style = "clinical"
nodes = 80
average_degree = 3.0
[oracle]
paradigm = "agent_based"
omission_rate = 0.1
"#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.repetitions, 10);
        assert_eq!(spec.attack.strategy, "bfs");
        assert_eq!(spec.oracle.omission_rate, 0.1);
    }

    #[test]
    fn invalid_strategy_rejected() {
        let mut spec = tiny_spec();
        spec.attack.strategy = "quantum".into();
        assert!(matches!(
            run_experiment(&spec),
            Err(HarnessError::InvalidSpec(_))
        ));
    }

    #[test]
    fn targeted_mode_produces_scores() {
        let mut spec = tiny_spec();
        spec.attack.mode = AttackMode::Targeted;
        let result = run_experiment(&spec).unwrap();
        assert_eq!(result.failures(), 0);
        for row in result.rows() {
            assert_eq!(row.reached, Some(true));
            assert_eq!(row.f1, Some(1.0));
        }
    }

    #[test]
    fn cost_report_star_graph() {
        // star with 100 leaves: anchor resolves the center, one
        // neighborhood query reveals every leaf
        let mut b = crate::graph::GraphBuilder::default();
        b.add_node(crate::graph::Node::new("Hub", "Patient")).unwrap();
        for i in 0..100 {
            let id = format!("Leaf_{i:03}");
            b.add_node(crate::graph::Node::new(id.clone(), "Diagnosis")).unwrap();
            b.add_triple(crate::graph::Triple::new("Hub", "has_diagnosis", id)).unwrap();
        }
        let g = b.build().unwrap();
        let mut session = DefendedOracle::new(
            Oracle::new(OracleConfig::noiseless(3), g.clone()),
            &DefenseConfig::default(),
        );
        let (cost, frr, reached) =
            run_until_recovered(&mut session, &g, "Hub", 100, &AttackBudget::unlimited());
        assert!(reached);
        assert_eq!(frr, 0.0);
        assert!(cost.queries <= 3, "queries = {}", cost.queries);
    }

    #[test]
    fn cost_report_incomplete_when_target_too_big() {
        let mut spec = tiny_spec();
        spec.repetitions = 1;
        let rows = emit_cost_report(
            &spec,
            10_000,
            &[3.0],
            &[crate::oracle::Paradigm::RetrievalBased],
        )
        .unwrap();
        assert_eq!(rows[0].incomplete_runs, 1);
    }
}
