//! Command-line front end for the experiment harness.

use clap::{Parser, Subcommand};
use kgprobe::gen::{self, GenParams, Style};
use kgprobe::graph;
use kgprobe::harness::{
    self, cost_table, emit_cost_report, results_table, ExperimentSpec, SweepSpec,
};
use kgprobe::metrics::UntargetedReport;
use kgprobe::oracle::Paradigm;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kgprobe", version, about = "Graph RAG structural-leakage laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic knowledge graph and write it to a file.
    Generate {
        #[arg(long, value_enum, default_value = "clinical")]
        style: StyleArg,
        #[arg(long, default_value_t = 300)]
        nodes: usize,
        #[arg(long, default_value_t = 5.0)]
        degree: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment from a config file.
    Attack {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a recovered graph against ground truth.
    Evaluate {
        #[arg(long)]
        recovered: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run a parameter sweep from a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker pool size (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Query/token overhead to recover a fixed number of nodes.
    Cost {
        #[arg(long)]
        config: PathBuf,
        /// Stop once this many ground-truth nodes are recovered.
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        /// Density grid (comma-separated average degrees).
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 5.0, 12.0])]
        densities: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment with and without its defense section and print
    /// the metric deltas.
    DefendEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum StyleArg {
    Clinical,
    Generic,
}

impl From<StyleArg> for Style {
    fn from(s: StyleArg) -> Style {
        match s {
            StyleArg::Clinical => Style::Clinical,
            StyleArg::Generic => Style::Generic,
        }
    }
}

fn load_experiment(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentSpec, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut spec = ExperimentSpec::from_toml(&text).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn run() -> Result<u8, String> {
    match Cli::parse().command {
        Command::Generate {
            style,
            nodes,
            degree,
            seed,
            out,
        } => {
            let params = GenParams::new(style.into(), nodes, degree, seed);
            let g = gen::generate(&params).map_err(|e| e.to_string())?;
            graph::write_graph(&g, &out).map_err(|e| e.to_string())?;
            let stats = g.degree_stats().map_err(|e| e.to_string())?;
            println!(
                "wrote {} ({} nodes, {} edges, avg degree {:.2})",
                out.display(),
                g.node_count(),
                g.edge_count(),
                stats.average_degree
            );
            Ok(0)
        }
        Command::Attack { config, seed, out } => {
            let mut spec = load_experiment(&config, seed)?;
            if out.is_some() {
                spec.output_dir = out;
            }
            let result = match &spec.output_dir {
                Some(dir) => {
                    let dir = dir.clone();
                    harness::run_experiment_to_dir(&spec, &dir).map_err(|e| e.to_string())?
                }
                None => harness::run_experiment(&spec).map_err(|e| e.to_string())?,
            };
            print!("{}", results_table(&result));
            Ok(if result.failures() > 0 { 2 } else { 0 })
        }
        Command::Evaluate { recovered, truth } => {
            let rec = graph::read_graph(&recovered).map_err(|e| e.to_string())?;
            let gt = graph::read_graph(&truth).map_err(|e| e.to_string())?;
            let report = UntargetedReport::evaluate(&rec, &gt, Default::default())
                .map_err(|e| e.to_string())?;
            println!("ged\t{:.6}", report.ged_normalized);
            println!("mcs\t{:.6}", report.mcs_normalized);
            println!("nrr\t{:.6}", report.nrr);
            println!("frr\t{:.6}", report.frr);
            Ok(0)
        }
        Command::Sweep {
            config,
            seed,
            out,
            jobs,
        } => {
            let text =
                std::fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let mut sweep = SweepSpec::from_toml(&text).map_err(|e| e.to_string())?;
            if let Some(s) = seed {
                sweep.base.seed = s;
            }
            let dir = out.or_else(|| sweep.base.output_dir.clone());
            let outcome = match dir {
                Some(dir) => {
                    harness::run_sweep_to_dir(&sweep, jobs, &dir).map_err(|e| e.to_string())?
                }
                None => harness::run_sweep(&sweep, jobs).map_err(|e| e.to_string())?,
            };
            print!("{}", outcome.aggregate_table());
            Ok(if outcome.failed_cells > 0 || outcome.failed_repetitions > 0 {
                2
            } else {
                0
            })
        }
        Command::Cost {
            config,
            nodes,
            densities,
            out,
        } => {
            let spec = load_experiment(&config, None)?;
            let rows = emit_cost_report(
                &spec,
                nodes,
                &densities,
                &[Paradigm::RetrievalBased, Paradigm::AgentBased],
            )
            .map_err(|e| e.to_string())?;
            let table = cost_table(&rows);
            if let Some(out) = out {
                std::fs::write(&out, &table).map_err(|e| e.to_string())?;
            }
            print!("{table}");
            Ok(0)
        }
        Command::DefendEval { config, seed } => {
            let defended = load_experiment(&config, seed)?;
            let mut undefended = defended.clone();
            undefended.defense = Default::default();
            let with = harness::run_experiment(&defended).map_err(|e| e.to_string())?;
            let without = harness::run_experiment(&undefended).map_err(|e| e.to_string())?;
            let nrr_with = mean(with.rows().filter_map(|r| r.nrr));
            let nrr_without = mean(without.rows().filter_map(|r| r.nrr));
            let mcs_with = mean(with.rows().filter_map(|r| r.mcs));
            let mcs_without = mean(without.rows().filter_map(|r| r.mcs));
            let blocked: usize = with.rows().map(|r| r.blocked_queries).sum();
            println!("metric\tundefended\tdefended\tdelta");
            println!("nrr\t{nrr_without:.4}\t{nrr_with:.4}\t{:.4}", nrr_with - nrr_without);
            println!("mcs\t{mcs_without:.4}\t{mcs_with:.4}\t{:.4}", mcs_with - mcs_without);
            println!("blocked_queries\t0\t{blocked}\t{blocked}");
            Ok(if with.failures() + without.failures() > 0 { 2 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
