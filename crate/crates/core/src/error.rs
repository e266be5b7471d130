use core::fmt;

use crate::tree::{EdgeId, NodeId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A topology violates the unrooted binary tree invariants.
    InvalidTopology(&'static str),
    /// A node id is outside the tree.
    UnknownNode(NodeId),
    /// An edge id is outside the tree.
    UnknownEdge(EdgeId),
    /// A descendant subtree was requested for two nodes that are not adjacent.
    NotAdjacent(NodeId, NodeId),
    /// Tree generators need at least this many leaves.
    TooFewLeaves { got: usize, min: usize },
    /// Exact enumeration is limited to small trees.
    TooManyLeaves { got: usize, max: usize },
    /// Parameter vector length does not match the edge count.
    ParameterCount { expected: usize, got: usize },
    /// A parameter value is outside the domain an operation needs.
    ParameterOutOfRange {
        edge: Option<EdgeId>,
        value: f64,
        domain: &'static str,
    },
    /// A parameter box violates `0 < c_lo < c_hi`, `c_hi * delta < 1/2`.
    InvalidBox,
    /// A spin configuration does not cover the leaves it must.
    MissingSpin(NodeId),
    /// Spin values must be exactly ±1.
    InvalidSpin(i8),
    /// The configuration has the wrong scope for this operation.
    WrongScope,
    /// `1 + s t = 0` in the combination rule.
    Pole { edge: Option<EdgeId> },
    /// The observation has probability zero under the given parameters.
    ZeroProbability,
    /// A derivative denominator `1 + theta w` vanished.
    VanishingDenominator { edge: EdgeId },
    /// Datasets must hold at least one sample.
    EmptyDataset,
    /// Samples in a dataset do not cover the same leaves, or weights are malformed.
    InconsistentDataset,
    /// Fitting configuration is invalid.
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidTopology(why) => write!(f, "invalid topology: {why}"),
            Error::UnknownNode(n) => write!(f, "unknown node {}", n.0),
            Error::UnknownEdge(e) => write!(f, "unknown edge {}", e.0),
            Error::NotAdjacent(a, b) => write!(f, "nodes {} and {} are not adjacent", a.0, b.0),
            Error::TooFewLeaves { got, min } => {
                write!(f, "need at least {min} leaves, got {got}")
            }
            Error::TooManyLeaves { got, max } => {
                write!(
                    f,
                    "exact enumeration supports at most {max} leaves, got {got}"
                )
            }
            Error::ParameterCount { expected, got } => {
                write!(f, "expected {expected} edge parameters, got {got}")
            }
            Error::ParameterOutOfRange {
                edge: Some(e),
                value,
                domain,
            } => {
                write!(f, "parameter {value} on edge {} outside {domain}", e.0)
            }
            Error::ParameterOutOfRange {
                edge: None,
                value,
                domain,
            } => {
                write!(f, "value {value} outside {domain}")
            }
            Error::InvalidBox => f.write_str("invalid parameter box"),
            Error::MissingSpin(n) => write!(f, "no spin for leaf {}", n.0),
            Error::InvalidSpin(s) => write!(f, "spin {s} is not ±1"),
            Error::WrongScope => f.write_str("spin configuration has the wrong scope"),
            Error::Pole { edge: Some(e) } => write!(f, "pole 1 + st = 0 at edge {}", e.0),
            Error::Pole { edge: None } => f.write_str("pole 1 + st = 0"),
            Error::ZeroProbability => f.write_str("observation has probability zero"),
            Error::VanishingDenominator { edge } => {
                write!(f, "1 + theta Zx Zy vanishes at edge {}", edge.0)
            }
            Error::EmptyDataset => f.write_str("dataset is empty"),
            Error::InconsistentDataset => f.write_str("dataset samples are inconsistent"),
            Error::InvalidConfig(why) => write!(f, "invalid fit configuration: {why}"),
        }
    }
}

impl core::error::Error for Error {}
