//! Correlations between unsigned magnetizations of two disjoint subtrees.
//!
//! `u` and `v` are the two children of the experiment root. Each replicate
//! broadcasts down the whole view and computes `Z_u`, `Z_v` on the subtrees
//! hanging below them.

use cfn_core::magnetization::view_magnetization;
use cfn_core::{broadcast_view, descendant_subtree, stream_rng, Endpoints};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream_id, ExperimentConfig, PairSource, TreeSpec};
use crate::error::{CfnError, Result};
use crate::formats::SCHEMA_VERSION;
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceRow {
    pub delta: f64,
    pub samples: usize,
    /// `corr(sigma_u Z_u, sigma_v Z_v)`; `None` when one side is constant.
    pub corr_uv: Option<f64>,
    /// `corr(sigma_u Z_u, sigma_u)`.
    pub corr_u_sigma: Option<f64>,
    /// `4 / sqrt(N)`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub schema_version: u32,
    pub tree: TreeSpec,
    pub u: usize,
    pub v: usize,
    pub seed: u64,
    pub fixed_pair: bool,
    pub matched: bool,
    pub rows: Vec<IndependenceRow>,
}

pub fn independence_experiment(cfg: &ExperimentConfig) -> Result<IndependenceReport> {
    cfg.validate()?;
    if cfg.samples < 2 {
        return Err(CfnError::Config(
            "correlations need at least 2 samples".into(),
        ));
    }
    let (tree, view) = cfg.tree.build(cfg.seed)?;
    let root = view.root();
    let &[(u, _), (v, _)] = view.children(root) else {
        return Err(CfnError::Config(
            "experiment root needs exactly two children for a disjoint subtree pair".into(),
        ));
    };
    let (view_u, view_v) = (
        descendant_subtree(&tree, u, root)?,
        descendant_subtree(&tree, v, root)?,
    );
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for (k, &delta) in cfg.deltas.iter().enumerate() {
        let pairs = PairSource::new(cfg, &tree, k)?;
        let draws: Vec<(f64, f64, f64)> = (0..cfg.samples)
            .into_par_iter()
            .map_init(
                || (vec![0i8; tree.node_count()], Vec::new()),
                |(spins, scratch), i| -> Result<(f64, f64, f64)> {
                    let mut rng = stream_rng(cfg.seed, stream_id(k, i));
                    let pair = pairs.draw(&tree, &mut rng)?;
                    let (truth, hat) = (&pair.0, &pair.1);
                    broadcast_view(&view, truth, &mut rng, spins);
                    let zu = view_magnetization(&view_u, hat, spins, Endpoints::Clamp, scratch)?;
                    let zv = view_magnetization(&view_v, hat, spins, Endpoints::Clamp, scratch)?;
                    let (su, sv) = (spins[u.0] as f64, spins[v.0] as f64);
                    Ok((su * zu, sv * zv, su))
                },
            )
            .collect::<Result<_>>()?;
        let a: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let b: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let s: Vec<f64> = draws.iter().map(|d| d.2).collect();
        let (corr_uv, corr_u_sigma) = (pearson(&a, &b), pearson(&a, &s));
        let bound = 4.0 / (cfg.samples as f64).sqrt();
        let within = |c: Option<f64>| c.is_none_or(|c| c.abs() <= bound);
        rows.push(IndependenceRow {
            delta,
            samples: cfg.samples,
            corr_uv,
            corr_u_sigma,
            bound,
            pass: within(corr_uv) && within(corr_u_sigma),
        });
    }
    Ok(IndependenceReport {
        schema_version: SCHEMA_VERSION,
        tree: cfg.tree,
        u: u.0,
        v: v.0,
        seed: cfg.seed,
        fixed_pair: cfg.fixed_pair,
        matched: cfg.matched,
        rows,
    })
}
