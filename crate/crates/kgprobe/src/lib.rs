//! Deterministic laboratory for studying structural leakage in Graph RAG
//! pipelines: a simulated black-box retrieval oracle over a hidden knowledge
//! graph, traversal-based reconstruction attacks, structural similarity
//! metrics, and a set of composable defenses.
//!
//! Everything is seeded and byte-reproducible: the same config always
//! produces the same transcripts, recovered graphs, and result tables.

pub mod attack;
pub mod defense;
pub mod gen;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod oracle;
