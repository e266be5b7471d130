//! Monte Carlo estimate of the population gradient on one edge, compared
//! with `(theta*_e - theta_hat_e) / (1 - theta_hat_e^2)`.
//!
//! Parameters come from the common uniforms, so `theta*` and `theta_hat`
//! shrink toward 1 together as delta decreases.

use cfn_core::likelihood::leaf_distribution_by_pruning;
use cfn_core::magnetization::messages_on_view;
use cfn_core::{
    broadcast_view, population_gradient_closed_form, stream_rng, whole_tree_view, EdgeId,
    Endpoints, TreeTopology,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{common_uniforms, params_at, stream_id, ExperimentConfig, TreeSpec};
use crate::error::{CfnError, Result};
use crate::formats::SCHEMA_VERSION;
use crate::stats::mean_se;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRow {
    pub delta: f64,
    pub theta_true: f64,
    pub theta_hat: f64,
    pub samples: usize,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub closed_form: f64,
    /// `|mc_mean - closed_form|`.
    pub difference: f64,
    /// `difference / delta`.
    pub ratio: f64,
    /// Expectation over the exact leaf law, when requested.
    pub exact_mean: Option<f64>,
    pub exact_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub schema_version: u32,
    pub tree: TreeSpec,
    pub edge: usize,
    pub seed: u64,
    pub matched: bool,
    pub rows: Vec<GradientRow>,
}

/// First edge whose endpoints are both internal, else edge 0.
fn default_edge(tree: &TreeTopology) -> EdgeId {
    tree.edges()
        .iter()
        .position(|&(a, b)| !tree.is_leaf(a) && !tree.is_leaf(b))
        .map_or(EdgeId(0), EdgeId)
}

fn term(theta: f64, w: f64) -> Result<f64> {
    let den = 1.0 + theta * w;
    if den.is_nan() || den <= 0.0 {
        return Err(CfnError::Input(format!(
            "vanishing denominator 1 + theta w = {den}"
        )));
    }
    Ok(w / den)
}

pub fn gradient_population_experiment(cfg: &ExperimentConfig) -> Result<GradientReport> {
    cfg.validate()?;
    if cfg.samples < 2 {
        return Err(CfnError::Config(
            "a standard error needs at least 2 samples".into(),
        ));
    }
    let (tree, _) = cfg.tree.build(cfg.seed)?;
    let edge = match cfg.edge {
        Some(e) if e < tree.edge_count() => EdgeId(e),
        Some(e) => return Err(CfnError::Config(format!("edge {e} not in tree"))),
        None => default_edge(&tree),
    };
    let view = whole_tree_view(&tree, tree.default_root())?;
    let (u, v) = common_uniforms(cfg.seed, tree.edge_count());
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for (k, &delta) in cfg.deltas.iter().enumerate() {
        let truth = params_at(&cfg.true_box.at(delta)?, &u);
        let hat = if cfg.matched {
            truth.clone()
        } else {
            params_at(&cfg.hat_box.at(delta)?, &v)
        };
        let th = hat.theta(edge);
        let terms: Vec<f64> = (0..cfg.samples)
            .into_par_iter()
            .map_init(
                || vec![0i8; tree.node_count()],
                |spins, i| -> Result<f64> {
                    let mut rng = stream_rng(cfg.seed, stream_id(k, i));
                    broadcast_view(&view, &truth, &mut rng, spins);
                    let table = messages_on_view(&tree, &view, &hat, spins, Endpoints::Clamp)?;
                    term(th, table.product(edge))
                },
            )
            .collect::<Result<_>>()?;
        let (mc_mean, mc_se) = mean_se(&terms);
        let closed_form = population_gradient_closed_form(truth.theta(edge), th)?;
        let exact_mean = if cfg.exact {
            let dist = leaf_distribution_by_pruning(&tree, &truth)?;
            let mut acc = 0.0;
            for (spins, p) in &dist.entries {
                let table = messages_on_view(&tree, &view, &hat, spins.values(), Endpoints::Clamp)?;
                acc += p * term(th, table.product(edge))?;
            }
            Some(acc)
        } else {
            None
        };
        let difference = (mc_mean - closed_form).abs();
        rows.push(GradientRow {
            delta,
            theta_true: truth.theta(edge),
            theta_hat: th,
            samples: cfg.samples,
            mc_mean,
            mc_se,
            closed_form,
            difference,
            ratio: difference / delta,
            exact_mean,
            exact_difference: exact_mean.map(|m| (m - closed_form).abs()),
        });
    }
    Ok(GradientReport {
        schema_version: SCHEMA_VERSION,
        tree: cfg.tree,
        edge: edge.0,
        seed: cfg.seed,
        matched: cfg.matched,
        rows,
    })
}
