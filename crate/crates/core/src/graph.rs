//! Ground-truth graphs of the four chamber configurations.
//!
//! Edge lists live in `data/graphs/<config>.csv` (columns `from,to,effect`)
//! and are compiled into the crate. An edge `X -> Y` asserts that intervening
//! on `X` changes the distribution of later measurements of `Y`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::variables::{Config, VariableKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown configuration '{0}' (expected one of lt_standard, lt_camera, wt_standard, wt_pressure_control)")]
    UnknownConfig(String),
    #[error("unknown node id(s) in estimate for {config}: {}", .ids.join(", "))]
    UnknownNodes { config: Config, ids: Vec<String> },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge { from: from.into(), to: to.into() }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// One row of an edge CSV file, with any extra columns kept by name.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub edge: Edge,
    pub line: usize,
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthGraph {
    config: Config,
    nodes: BTreeSet<&'static str>,
    edges: BTreeSet<Edge>,
    effects: BTreeMap<Edge, String>,
    /// Pairs that share an unobserved common cause. Documentation only: they
    /// take no part in scoring or queries.
    pub known_confounded_pairs: Vec<(&'static str, &'static str, &'static str)>,
}

fn edge_file(config: Config) -> &'static str {
    match config {
        Config::LtStandard => include_str!("../data/graphs/lt_standard.csv"),
        Config::LtCamera => include_str!("../data/graphs/lt_camera.csv"),
        Config::WtStandard => include_str!("../data/graphs/wt_standard.csv"),
        Config::WtPressureControl => include_str!("../data/graphs/wt_pressure_control.csv"),
    }
}

const BAROMETER_CONFOUNDING: &str = "atmospheric pressure acts on every barometer";

fn confounded_pairs(config: Config) -> Vec<(&'static str, &'static str, &'static str)> {
    const BAROMETERS: [&str; 4] =
        ["pressure_upwind", "pressure_downwind", "pressure_ambient", "pressure_intake"];
    match config {
        Config::WtStandard | Config::WtPressureControl => {
            let mut pairs = Vec::new();
            for (i, a) in BAROMETERS.iter().enumerate() {
                for b in &BAROMETERS[i + 1..] {
                    pairs.push((*a, *b, BAROMETER_CONFOUNDING));
                }
            }
            pairs
        }
        Config::LtStandard | Config::LtCamera => Vec::new(),
    }
}

/// Look up the ground-truth graph by configuration id (e.g. `lt_standard`).
pub fn graph_for(config_id: &str) -> Result<GroundTruthGraph, GraphError> {
    let config: Config =
        config_id.parse().map_err(|_| GraphError::UnknownConfig(config_id.to_string()))?;
    Ok(GroundTruthGraph::for_config(config))
}

impl GroundTruthGraph {
    pub fn for_config(config: Config) -> Self {
        let nodes: BTreeSet<&'static str> = config.variables().map(|v| v.id).collect();
        let records = parse_edge_csv(edge_file(config)).expect("embedded edge list is well formed");
        let mut edges = BTreeSet::new();
        let mut effects = BTreeMap::new();
        for r in records {
            assert!(
                nodes.contains(r.edge.from.as_str()) && nodes.contains(r.edge.to.as_str()),
                "embedded edge {} references an unknown node",
                r.edge
            );
            if let Some(effect) = r.extra.get("effect") {
                effects.insert(r.edge.clone(), effect.clone());
            }
            edges.insert(r.edge);
        }
        GroundTruthGraph {
            config,
            nodes,
            edges,
            effects,
            known_confounded_pairs: confounded_pairs(config),
        }
    }

    pub fn config(&self) -> Config {
        self.config
    }

    pub fn nodes(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.nodes.iter().copied()
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains(id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&Edge::new(from, to))
    }

    /// Short description of the physical mechanism behind an edge.
    pub fn effect(&self, edge: &Edge) -> Option<&str> {
        self.effects.get(edge).map(String::as_str)
    }

    pub fn parents<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |e| e.to == node).map(|e| e.from.as_str())
    }

    pub fn children<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |e| e.from == node).map(|e| e.to.as_str())
    }

    pub fn in_degree(&self, node: &str) -> usize {
        self.edges.iter().filter(|e| e.to == node).count()
    }

    /// Kahn's algorithm over the node set.
    pub fn is_acyclic(&self) -> bool {
        let mut indegree: BTreeMap<&str, usize> = self.nodes.iter().map(|n| (*n, 0)).collect();
        for e in &self.edges {
            *indegree.get_mut(e.to.as_str()).expect("edge endpoint is a node") += 1;
        }
        let mut ready: Vec<&str> =
            indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut visited = 0;
        while let Some(n) = ready.pop() {
            visited += 1;
            for child in self.children(n) {
                let d = indegree.get_mut(child).expect("edge endpoint is a node");
                *d -= 1;
                if *d == 0 {
                    ready.push(child);
                }
            }
        }
        visited == self.nodes.len()
    }

    /// Manipulable variables (actuators and sensor parameters).
    pub fn manipulable_nodes(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.config.variables().filter(|v| v.kind != VariableKind::Sensor).map(|v| v.id)
    }

    /// Adjacency list as `from,to` CSV.
    pub fn to_csv(&self) -> String {
        edges_to_csv(self.edges.iter())
    }
}

pub fn edges_to_csv<'a>(edges: impl IntoIterator<Item = &'a Edge>) -> String {
    let mut out = String::from("from,to\n");
    for e in edges {
        out.push_str(&e.from);
        out.push(',');
        out.push_str(&e.to);
        out.push('\n');
    }
    out
}

/// Parse an edge CSV. The header must start with `from,to`; further columns
/// are kept per record. `#` lines and blank lines are skipped.
pub fn parse_edge_csv(text: &str) -> Result<Vec<EdgeRecord>, GraphError> {
    let mut header: Option<Vec<String>> = None;
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let Some(cols) = &header else {
            if fields.len() < 2 || fields[0] != "from" || fields[1] != "to" {
                return Err(GraphError::Malformed {
                    line,
                    message: format!("expected header starting with 'from,to', found '{trimmed}'"),
                });
            }
            header = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        };
        if fields.len() < 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(GraphError::Malformed {
                line,
                message: format!("expected 'from,to', found '{trimmed}'"),
            });
        }
        if fields.len() > cols.len() {
            return Err(GraphError::Malformed {
                line,
                message: format!("{} fields but header has {}", fields.len(), cols.len()),
            });
        }
        let extra = cols[2..]
            .iter()
            .zip(fields.iter().skip(2))
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect();
        records.push(EdgeRecord { edge: Edge::new(fields[0], fields[1]), line, extra });
    }
    if header.is_none() {
        return Err(GraphError::Malformed { line: 1, message: "missing 'from,to' header".into() });
    }
    Ok(records)
}

/// Precision and recall of an estimated edge set against the ground truth.
///
/// An empty estimate scores precision 1 and recall 0 (or 1 if the truth is
/// also empty).
pub fn edge_precision_recall(
    estimate: &[Edge],
    truth: &GroundTruthGraph,
) -> Result<(f64, f64), GraphError> {
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    for e in estimate {
        for id in [&e.from, &e.to] {
            if !truth.contains_node(id) {
                unknown.insert(id.clone());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(GraphError::UnknownNodes {
            config: truth.config(),
            ids: unknown.into_iter().collect(),
        });
    }
    let estimate: BTreeSet<&Edge> = estimate.iter().collect();
    let hits = estimate.iter().filter(|e| truth.edges.contains(**e)).count() as f64;
    let precision = if estimate.is_empty() { 1.0 } else { hits / estimate.len() as f64 };
    let recall = if truth.edges.is_empty() { 1.0 } else { hits / truth.edges.len() as f64 };
    Ok((precision, recall))
}
