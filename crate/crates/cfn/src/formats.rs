//! CSV and JSON formats. Every JSON document carries `schema_version`.
//!
//! Nodes are named by their label, or `#<id>` when unlabelled.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use cfn_core::{EdgeId, EdgeParameters, FitResult, NodeId, SpinConfig, Tier, TreeTopology};
use serde::{Deserialize, Serialize};

use crate::error::{CfnError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn node_name(tree: &TreeTopology, v: NodeId) -> String {
    tree.label(v)
        .map(str::to_string)
        .unwrap_or_else(|| format!("#{}", v.0))
}

pub fn resolve_node(tree: &TreeTopology, name: &str) -> Result<NodeId> {
    if let Some(v) = tree.node_by_label(name) {
        return Ok(v);
    }
    name.strip_prefix('#')
        .and_then(|s| s.parse().ok())
        .map(NodeId)
        .filter(|v| v.0 < tree.node_count())
        .ok_or_else(|| CfnError::Input(format!("no node named {name:?}")))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CfnError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CfnError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub edge: usize,
    pub a: String,
    pub b: String,
    pub theta: f64,
}

fn edge_records(tree: &TreeTopology, params: &EdgeParameters) -> Vec<EdgeRecord> {
    tree.edges()
        .iter()
        .enumerate()
        .map(|(e, &(a, b))| EdgeRecord {
            edge: e,
            a: node_name(tree, a),
            b: node_name(tree, b),
            theta: params.theta(EdgeId(e)),
        })
        .collect()
}

/// Parameter vector keyed by edge id, with endpoint names for readability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema_version: u32,
    pub edges: Vec<EdgeRecord>,
}

impl ParamsFile {
    pub fn new(tree: &TreeTopology, params: &EdgeParameters) -> Self {
        ParamsFile {
            schema_version: SCHEMA_VERSION,
            edges: edge_records(tree, params),
        }
    }

    /// Matches records to `tree` by endpoint names.
    pub fn to_params(&self, tree: &TreeTopology) -> Result<EdgeParameters> {
        let mut theta = vec![f64::NAN; tree.edge_count()];
        for r in &self.edges {
            let (a, b) = (resolve_node(tree, &r.a)?, resolve_node(tree, &r.b)?);
            let e = tree
                .edge_between(a, b)
                .ok_or_else(|| CfnError::Input(format!("{} and {} are not adjacent", r.a, r.b)))?;
            theta[e.0] = r.theta;
        }
        if let Some(e) = theta.iter().position(|t| t.is_nan()) {
            return Err(CfnError::Input(format!("no theta for edge {e}")));
        }
        Ok(EdgeParameters::new(theta)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub label: Option<String>,
    pub leaf: bool,
}

/// Debugging dump of a tree with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDump {
    pub schema_version: u32,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl TreeDump {
    pub fn new(tree: &TreeTopology, params: &EdgeParameters) -> Self {
        TreeDump {
            schema_version: SCHEMA_VERSION,
            nodes: (0..tree.node_count())
                .map(|i| NodeRecord {
                    id: i,
                    label: tree.label(NodeId(i)).map(str::to_string),
                    leaf: tree.is_leaf(NodeId(i)),
                })
                .collect(),
            edges: edge_records(tree, params),
        }
    }
}

/// Writes one row per configuration with one column per node in `columns`.
pub fn write_spin_matrix<W: Write>(
    tree: &TreeTopology,
    samples: &[SpinConfig],
    columns: &[NodeId],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns.iter().map(|&v| node_name(tree, v)))?;
    for s in samples {
        w.write_record(columns.iter().map(|&v| match s.spin(v) {
            Some(1) => "1",
            Some(-1) => "-1",
            _ => "",
        }))?;
    }
    w.flush().map_err(|e| CfnError::io("<csv>", e))?;
    Ok(())
}

/// Reads a spin matrix whose header names nodes of `tree`. Every leaf must
/// have a column; columns for internal nodes are kept as extra spins.
pub fn read_spin_matrix<R: Read>(tree: &TreeTopology, input: R) -> Result<Vec<SpinConfig>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let columns: Vec<NodeId> = r
        .headers()?
        .iter()
        .map(|h| resolve_node(tree, h))
        .collect::<Result<_>>()?;
    for &l in tree.leaves() {
        if !columns.contains(&l) {
            return Err(CfnError::Input(format!(
                "no column for leaf {}",
                node_name(tree, l)
            )));
        }
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut pairs = Vec::with_capacity(columns.len());
        for (&v, field) in columns.iter().zip(rec.iter()) {
            match field {
                "1" | "+1" => pairs.push((v, 1)),
                "-1" => pairs.push((v, -1)),
                "" if !tree.is_leaf(v) => {}
                other => {
                    return Err(CfnError::Input(format!(
                        "row {}: bad spin {other:?} for {}",
                        row + 1,
                        node_name(tree, v)
                    )))
                }
            }
        }
        out.push(SpinConfig::from_pairs(tree.node_count(), &pairs)?);
    }
    if out.is_empty() {
        return Err(CfnError::Input("spin matrix has no rows".into()));
    }
    Ok(out)
}

pub fn write_loglik_csv<W: Write>(values: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_index", "log_likelihood"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:.17e}")])?;
    }
    w.flush().map_err(|e| CfnError::io("<csv>", e))?;
    Ok(())
}

/// One row of a magnetization table. `sigma` and `tier` are absent when the
/// root spin was not observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationRow {
    pub sigma: Option<i8>,
    pub z: f64,
    pub tier: Option<Tier>,
}

pub fn write_magnetization_csv<W: Write>(rows: &[MagnetizationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_index", "sigma_u", "z_u", "tier"])?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.sigma.map(|s| s.to_string()).unwrap_or_default(),
            format!("{:.17e}", r.z),
            r.tier.map(|t| t.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| CfnError::io("<csv>", e))?;
    Ok(())
}

pub fn read_magnetization_csv<R: Read>(input: R) -> Result<Vec<MagnetizationRow>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad =
            |what: &str| CfnError::Input(format!("bad {what} in magnetization row {:?}", rec));
        let sigma = match rec.get(1).unwrap_or("") {
            "" => None,
            s => Some(s.parse::<i8>().map_err(|_| bad("sigma_u"))?),
        };
        let z: f64 = rec.get(2).unwrap_or("").parse().map_err(|_| bad("z_u"))?;
        let tier = match rec.get(3).unwrap_or("") {
            "" => None,
            "good" => Some(Tier::Good),
            "moderate" => Some(Tier::Moderate),
            "severe" => Some(Tier::Severe),
            _ => return Err(bad("tier")),
        };
        rows.push(MagnetizationRow { sigma, z, tier });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEdge {
    pub edge: usize,
    pub a: String,
    pub b: String,
    pub theta: f64,
    pub gradient: f64,
}

/// Mean per-sample gradient over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub schema_version: u32,
    pub samples: usize,
    pub mean_log_likelihood: f64,
    pub edges: Vec<GradientEdge>,
}

impl GradientReport {
    pub fn new(
        tree: &TreeTopology,
        params: &EdgeParameters,
        samples: usize,
        mean_log_likelihood: f64,
        gradient: &[f64],
    ) -> Self {
        let edges = edge_records(tree, params)
            .into_iter()
            .zip(gradient)
            .map(|(r, &g)| GradientEdge {
                edge: r.edge,
                a: r.a,
                b: r.b,
                theta: r.theta,
                gradient: g,
            })
            .collect();
        GradientReport {
            schema_version: SCHEMA_VERSION,
            samples,
            mean_log_likelihood,
            edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub termination: String,
    pub sweeps: usize,
    pub max_changes: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
    pub edges: Vec<EdgeRecord>,
}

impl FitReport {
    pub fn new(tree: &TreeTopology, result: &FitResult) -> Self {
        FitReport {
            schema_version: SCHEMA_VERSION,
            termination: result.termination.as_str().to_string(),
            sweeps: result.sweeps(),
            max_changes: result.max_changes.clone(),
            log_likelihoods: result.log_likelihoods.clone(),
            edges: edge_records(tree, &result.params),
        }
    }
}
