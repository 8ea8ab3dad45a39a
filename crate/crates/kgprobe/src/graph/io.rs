//! Line-oriented graph file format.
//!
//! ```text
//! # comment
//! N<TAB>id<TAB>entity_type<TAB>key=value;key=value
//! E<TAB>source<TAB>relation<TAB>target
//! ```
//!
//! The writer emits a canonical form (nodes sorted by id, edges in triple
//! order, attributes sorted by key), so write -> read -> write is
//! byte-stable.

use super::{GraphBuilder, GraphError, KnowledgeGraph, Node, Triple};
use std::fmt::Write as _;
use std::path::Path;

pub fn write_graph_string(g: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for node in g.nodes() {
        let attrs = node
            .attributes
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(out, "N\t{}\t{}\t{}", node.id, node.entity_type, attrs);
    }
    for t in g.edges() {
        let _ = writeln!(out, "E\t{}\t{}\t{}", t.source, t.relation, t.target);
    }
    out
}

pub fn write_graph(g: &KnowledgeGraph, path: &Path) -> Result<(), GraphError> {
    std::fs::write(path, write_graph_string(g)).map_err(|e| GraphError::Io(e.to_string()))
}

pub fn read_graph_str(text: &str) -> Result<KnowledgeGraph, GraphError> {
    let mut b = GraphBuilder::default();
    // node lines first pass, edge lines second, so file ordering is free
    let mut edge_lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "N" => {
                if fields.len() != 4 {
                    return Err(GraphError::Parse {
                        line: lineno,
                        message: format!("node line needs 4 fields, got {}", fields.len()),
                    });
                }
                let mut node = Node::new(fields[1], fields[2]);
                if !fields[3].is_empty() {
                    for pair in fields[3].split(';') {
                        let (k, v) = pair.split_once('=').ok_or_else(|| GraphError::Parse {
                            line: lineno,
                            message: format!("bad attribute pair {pair:?}"),
                        })?;
                        if node.attributes.insert(k.to_string(), v.to_string()).is_some() {
                            return Err(GraphError::Parse {
                                line: lineno,
                                message: format!("duplicate attribute key {k:?}"),
                            });
                        }
                    }
                }
                b.add_node(node).map_err(|e| GraphError::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
            }
            "E" => edge_lines.push((lineno, fields.iter().map(|s| s.to_string()).collect::<Vec<_>>())),
            other => {
                return Err(GraphError::Parse {
                    line: lineno,
                    message: format!("unknown record type {other:?}"),
                })
            }
        }
    }
    for (lineno, fields) in edge_lines {
        if fields.len() != 4 {
            return Err(GraphError::Parse {
                line: lineno,
                message: format!("edge line needs 4 fields, got {}", fields.len()),
            });
        }
        b.add_triple(Triple::new(&fields[1], &fields[2], &fields[3]))
            .map_err(|e| GraphError::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
    }
    b.build()
}

pub fn read_graph(path: &Path) -> Result<KnowledgeGraph, GraphError> {
    let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
    read_graph_str(&text)
}
