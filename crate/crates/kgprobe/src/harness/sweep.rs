//! Cartesian sweeps over experiment parameters with deterministic cell
//! ordering: cells run in a rayon worker pool but merge by cell index.

use super::{
    result_line, AttackMode, ExperimentSpec, GraphSource, HarnessError, ResultRow, RESULT_HEADER,
};
use crate::gen::Style;
use crate::oracle::Paradigm;
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown sweep axis '{0}'")]
    UnknownAxis(String),
    #[error("bad value for axis '{axis}': {value}")]
    BadValue { axis: String, value: String },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Deserialize)]
pub struct SweepSpec {
    #[serde(flatten)]
    pub base: ExperimentSpec,
    /// Axis name -> value list; the sweep grid is the Cartesian product
    /// in sorted axis-name order.
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<toml::Value>>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, SweepError> {
        let spec: SweepSpec = toml::from_str(text).map_err(HarnessError::Config)?;
        spec.base.validate()?;
        spec.validate_axes()?;
        Ok(spec)
    }

    /// Every axis must resolve against the base spec before any cell runs.
    pub fn validate_axes(&self) -> Result<(), SweepError> {
        let mut probe = self.base.clone();
        for (axis, values) in &self.axes {
            for v in values {
                apply_axis(&mut probe, axis, v)?;
            }
        }
        Ok(())
    }

    /// All cells in deterministic order: (index, axis assignment, spec).
    pub fn cells(&self) -> Result<Vec<SweepCell>, SweepError> {
        let axes: Vec<(&String, &Vec<toml::Value>)> = self.axes.iter().collect();
        let mut cells = Vec::new();
        let total: usize = axes.iter().map(|(_, vs)| vs.len().max(1)).product();
        for index in 0..total {
            let mut spec = self.base.clone();
            let mut assignment = Vec::new();
            let mut rem = index;
            for (axis, values) in &axes {
                let v = &values[rem % values.len()];
                rem /= values.len();
                apply_axis(&mut spec, axis, v)?;
                assignment.push((axis.to_string(), render_value(v)));
            }
            cells.push(SweepCell {
                index,
                assignment,
                spec,
            });
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub index: usize,
    /// (axis, value) pairs in sorted axis order.
    pub assignment: Vec<(String, String)>,
    pub spec: ExperimentSpec,
}

fn render_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn as_f64(axis: &str, v: &toml::Value) -> Result<f64, SweepError> {
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .ok_or_else(|| SweepError::BadValue {
            axis: axis.into(),
            value: render_value(v),
        })
}

fn as_usize(axis: &str, v: &toml::Value) -> Result<usize, SweepError> {
    v.as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| SweepError::BadValue {
            axis: axis.into(),
            value: render_value(v),
        })
}

fn as_str<'a>(axis: &str, v: &'a toml::Value) -> Result<&'a str, SweepError> {
    v.as_str().ok_or_else(|| SweepError::BadValue {
        axis: axis.into(),
        value: render_value(v),
    })
}

/// Overwrite one spec field from an axis assignment. The axis vocabulary
/// is a flat rename of the nested config fields.
fn apply_axis(
    spec: &mut ExperimentSpec,
    axis: &str,
    v: &toml::Value,
) -> Result<(), SweepError> {
    match axis {
        "strategy" => spec.attack.strategy = as_str(axis, v)?.to_string(),
        "mode" => {
            spec.attack.mode = match as_str(axis, v)? {
                "untargeted" => AttackMode::Untargeted,
                "targeted" => AttackMode::Targeted,
                other => {
                    return Err(SweepError::BadValue {
                        axis: axis.into(),
                        value: other.into(),
                    })
                }
            }
        }
        "nodes" => {
            let n = as_usize(axis, v)?;
            match &mut spec.graph {
                GraphSource::Generate { nodes, .. } => *nodes = n,
                GraphSource::File { .. } => {
                    return Err(SweepError::BadValue {
                        axis: axis.into(),
                        value: "graph source is a file".into(),
                    })
                }
            }
        }
        "average_degree" => {
            let d = as_f64(axis, v)?;
            match &mut spec.graph {
                GraphSource::Generate { average_degree, .. } => *average_degree = d,
                GraphSource::File { .. } => {
                    return Err(SweepError::BadValue {
                        axis: axis.into(),
                        value: "graph source is a file".into(),
                    })
                }
            }
        }
        "style" => {
            let s = match as_str(axis, v)? {
                "clinical" => Style::Clinical,
                "generic" => Style::Generic,
                other => {
                    return Err(SweepError::BadValue {
                        axis: axis.into(),
                        value: other.into(),
                    })
                }
            };
            match &mut spec.graph {
                GraphSource::Generate { style, .. } => *style = s,
                GraphSource::File { .. } => {
                    return Err(SweepError::BadValue {
                        axis: axis.into(),
                        value: "graph source is a file".into(),
                    })
                }
            }
        }
        "paradigm" => {
            spec.oracle.paradigm = match as_str(axis, v)? {
                "retrieval_based" => Paradigm::RetrievalBased,
                "agent_based" => Paradigm::AgentBased,
                other => {
                    return Err(SweepError::BadValue {
                        axis: axis.into(),
                        value: other.into(),
                    })
                }
            }
        }
        "top_k" => spec.oracle.top_k = Some(as_usize(axis, v)?),
        "output_token_limit" => spec.oracle.output_token_limit = Some(as_usize(axis, v)?),
        "context_token_budget" => spec.oracle.context_token_budget = Some(as_usize(axis, v)?),
        "omission_rate" => spec.oracle.omission_rate = as_f64(axis, v)?,
        "hallucination_rate" => spec.oracle.hallucination_rate = as_f64(axis, v)?,
        "protective_prompt_bypass" => {
            spec.oracle.protective_prompt_bypass = Some(as_f64(axis, v)?)
        }
        "output_cap" => spec.defense.output_cap = Some(as_usize(axis, v)?),
        "perturbation_rewire_rate" => {
            spec.defense.perturbation_rewire_rate = Some(as_f64(axis, v)?)
        }
        "max_queries" => spec.attack.budget.max_queries = as_usize(axis, v)?,
        "max_rounds" => spec.attack.budget.max_rounds = as_usize(axis, v)?,
        "max_tokens" => spec.attack.budget.max_tokens = as_usize(axis, v)?,
        "repetitions" => spec.repetitions = as_usize(axis, v)?,
        "seed" => spec.seed = as_usize(axis, v)? as u64,
        other => return Err(SweepError::UnknownAxis(other.into())),
    }
    Ok(())
}

/// Mean ± stddev per cell (population stddev over successful repetitions).
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub index: usize,
    pub assignment: Vec<(String, String)>,
    pub n: usize,
    pub nrr_mean: f64,
    pub nrr_std: f64,
    pub mcs_mean: f64,
    pub mcs_std: f64,
    pub ged_mean: f64,
    pub ged_std: f64,
    pub frr_mean: f64,
    pub frr_std: f64,
    pub queries_mean: f64,
    pub tokens_mean: f64,
    pub failures: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug)]
pub struct SweepOutcome {
    /// (cell, successful rows) merged by cell index.
    pub cells: Vec<(SweepCell, Vec<ResultRow>)>,
    pub aggregates: Vec<AggregateRow>,
    pub failed_cells: usize,
    pub failed_repetitions: usize,
}

impl SweepOutcome {
    /// Long-format table: one line per repetition with its axis columns.
    pub fn long_table(&self) -> String {
        let mut out = format!("cell\taxes\t{RESULT_HEADER}\n");
        for (cell, rows) in &self.cells {
            let axes = axes_label(&cell.assignment);
            for row in rows {
                out.push_str(&format!("{}\t{}\t{}\n", cell.index, axes, result_line(row)));
            }
        }
        out
    }

    pub fn aggregate_table(&self) -> String {
        let mut out = String::from(
            "cell\taxes\tn\tnrr_mean\tnrr_std\tmcs_mean\tmcs_std\tged_mean\tged_std\tfrr_mean\tfrr_std\tqueries_mean\ttokens_mean\tfailures\n",
        );
        for a in &self.aggregates {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.1}\t{:.1}\t{}\n",
                a.index,
                axes_label(&a.assignment),
                a.n,
                a.nrr_mean,
                a.nrr_std,
                a.mcs_mean,
                a.mcs_std,
                a.ged_mean,
                a.ged_std,
                a.frr_mean,
                a.frr_std,
                a.queries_mean,
                a.tokens_mean,
                a.failures,
            ));
        }
        out
    }
}

fn axes_label(assignment: &[(String, String)]) -> String {
    if assignment.is_empty() {
        return "-".into();
    }
    assignment
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn pluck(rows: &[ResultRow], f: impl Fn(&ResultRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(f).collect()
}

fn aggregate(cell: &SweepCell, rows: &[ResultRow], failures: usize) -> AggregateRow {
    let (nrr_mean, nrr_std) = mean_std(&pluck(rows, |r| r.nrr));
    let (mcs_mean, mcs_std) = mean_std(&pluck(rows, |r| r.mcs));
    let (ged_mean, ged_std) = mean_std(&pluck(rows, |r| r.ged));
    let (frr_mean, frr_std) = mean_std(&pluck(rows, |r| r.frr));
    let (queries_mean, _) = mean_std(&pluck(rows, |r| Some(r.queries as f64)));
    let (tokens_mean, _) = mean_std(&pluck(rows, |r| Some(r.tokens as f64)));
    AggregateRow {
        index: cell.index,
        assignment: cell.assignment.clone(),
        n: rows.len(),
        nrr_mean,
        nrr_std,
        mcs_mean,
        mcs_std,
        ged_mean,
        ged_std,
        frr_mean,
        frr_std,
        queries_mean,
        tokens_mean,
        failures,
    }
}

/// Run every cell of the sweep. Cell-level failures are recorded and the
/// sweep continues; `jobs` bounds the worker pool (0 = rayon default).
pub fn run_sweep(sweep: &SweepSpec, jobs: usize) -> Result<SweepOutcome, SweepError> {
    let cells = sweep.cells()?;
    let run_all = || -> Vec<(SweepCell, Result<Vec<ResultRow>, String>, usize)> {
        cells
            .par_iter()
            .map(|cell| {
                match super::run_experiment(&cell.spec) {
                    Ok(result) => {
                        let rows: Vec<ResultRow> = result.rows().cloned().collect();
                        let failed_reps = result.failures();
                        (cell.clone(), Ok(rows), failed_reps)
                    }
                    Err(e) => (cell.clone(), Err(e.to_string()), 0),
                }
            })
            .collect()
    };
    let mut results = if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?
            .install(run_all)
    } else {
        run_all()
    };
    // deterministic merge order regardless of completion order
    results.sort_by_key(|(cell, _, _)| cell.index);

    let mut out_cells = Vec::new();
    let mut aggregates = Vec::new();
    let mut failed_cells = 0usize;
    let mut failed_repetitions = 0usize;
    for (cell, rows, failed_reps) in results {
        match rows {
            Ok(rows) => {
                failed_repetitions += failed_reps;
                aggregates.push(aggregate(&cell, &rows, failed_reps));
                out_cells.push((cell, rows));
            }
            Err(_) => {
                failed_cells += 1;
                aggregates.push(aggregate(&cell, &[], cell.spec.repetitions));
                out_cells.push((cell, Vec::new()));
            }
        }
    }
    Ok(SweepOutcome {
        cells: out_cells,
        aggregates,
        failed_cells,
        failed_repetitions,
    })
}

/// Run a sweep and write `long.tsv` + `aggregate.tsv` under `dir`.
pub fn run_sweep_to_dir(
    sweep: &SweepSpec,
    jobs: usize,
    dir: &Path,
) -> Result<SweepOutcome, SweepError> {
    let outcome = run_sweep(sweep, jobs)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("long.tsv"), outcome.long_table())?;
    std::fs::write(dir.join("aggregate.tsv"), outcome.aggregate_table())?;
    Ok(outcome)
}
