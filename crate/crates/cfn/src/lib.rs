//! Standard-library companion to `cfn-core`: Newick and tabular file
//! formats, summary statistics, seeded Monte Carlo experiments and the `cfn`
//! command line.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod newick;
pub mod stats;

pub use cfn_core as core;
pub use error::{CfnError, Result};
