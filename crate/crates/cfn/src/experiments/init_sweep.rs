//! Error of one coordinate sweep started from a point of the hat box.
//!
//! `theta*` and `theta_hat_0` come from the common uniforms. The sweep sees
//! either `samples` simulated leaf configurations or, in population mode,
//! every configuration weighted by its exact probability.

use cfn_core::estimator::coordinate_sweep_observed;
use cfn_core::likelihood::leaf_distribution_by_pruning;
use cfn_core::{
    broadcast_view, stream_rng, whole_tree_view, Dataset, EdgeParameters, FitConfig, SpinConfig,
    TreeTopology,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{common_uniforms, params_at, stream_id, ExperimentConfig, SweepMode, TreeSpec};
use crate::error::{CfnError, Result};
use crate::formats::SCHEMA_VERSION;
use crate::stats::mean_se;

/// Leaf limit for population mode.
pub const MAX_POPULATION_LEAVES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSweepRow {
    pub delta: f64,
    /// `max_e |theta_hat_1 - theta*|`.
    pub max_error: f64,
    pub argmax_edge: usize,
    /// `max_error / delta^2`.
    pub ratio: f64,
    /// Sampling standard error of `ratio` at the argmax edge (sampled mode).
    pub ratio_se: Option<f64>,
    /// `max_e |theta_hat_0 - theta*|`, for scale.
    pub initial_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSweepReport {
    pub schema_version: u32,
    pub tree: TreeSpec,
    pub leaves: usize,
    pub mode: SweepMode,
    pub samples: Option<usize>,
    pub seed: u64,
    pub rows: Vec<InitSweepRow>,
    /// Largest over smallest ratio across the grid.
    pub ratio_spread: f64,
}

fn simulate(
    cfg: &ExperimentConfig,
    tree: &TreeTopology,
    truth: &EdgeParameters,
    k: usize,
) -> Result<Dataset> {
    let view = whole_tree_view(tree, tree.default_root())?;
    let samples: Vec<SpinConfig> = (0..cfg.samples)
        .into_par_iter()
        .map_init(
            || vec![0i8; tree.node_count()],
            |spins, i| -> Result<SpinConfig> {
                let mut rng = stream_rng(cfg.seed, stream_id(k, i));
                broadcast_view(&view, truth, &mut rng, spins);
                Ok(SpinConfig::full(spins.clone())?.leaves_only(tree))
            },
        )
        .collect::<Result<_>>()?;
    Ok(Dataset::new(samples)?)
}

/// Sandwich standard error of the one-dimensional root at `theta`:
/// `sd(g_i) / (sqrt(m) |mean g_i'|)` with `g_i = w_i / (1 + theta w_i)`,
/// using `g_i' = -g_i^2`.
fn root_se(products: &[f64], theta: f64) -> f64 {
    let g: Vec<f64> = products.iter().map(|&w| w / (1.0 + theta * w)).collect();
    let (_, se) = mean_se(&g);
    let slope = g.iter().map(|g| g * g).sum::<f64>() / g.len() as f64;
    se / slope
}

pub fn init_sweep_experiment(cfg: &ExperimentConfig) -> Result<InitSweepReport> {
    cfg.validate()?;
    let (tree, _) = cfg.tree.build(cfg.seed)?;
    if cfg.mode == SweepMode::Population && tree.leaf_count() > MAX_POPULATION_LEAVES {
        return Err(CfnError::Config(format!(
            "population mode supports at most {MAX_POPULATION_LEAVES} leaves, tree has {}",
            tree.leaf_count()
        )));
    }
    if cfg.mode == SweepMode::Sampled && cfg.samples < 2 {
        return Err(CfnError::Config(
            "sampled mode needs at least 2 samples".into(),
        ));
    }
    let fit_cfg = FitConfig::default();
    let (u, v) = common_uniforms(cfg.seed, tree.edge_count());
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for (k, &delta) in cfg.deltas.iter().enumerate() {
        let truth = params_at(&cfg.true_box.at(delta)?, &u);
        let init = params_at(&cfg.hat_box.at(delta)?, &v);
        let data = match cfg.mode {
            SweepMode::Sampled => simulate(cfg, &tree, &truth, k)?,
            SweepMode::Population => {
                Dataset::from_distribution(&leaf_distribution_by_pruning(&tree, &truth)?)?
            }
        };
        let mut se = vec![None; tree.edge_count()];
        let sampled = cfg.mode == SweepMode::Sampled;
        let next = coordinate_sweep_observed(&tree, &init, &data, &fit_cfg, |step| {
            if sampled {
                se[step.edge.0] = Some(root_se(&step.profile.products, step.after));
            }
        })?;
        let (argmax, max_error) = next
            .as_slice()
            .iter()
            .zip(truth.as_slice())
            .map(|(a, b)| (a - b).abs())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (e, d)| {
                if d > best.1 {
                    (e, d)
                } else {
                    best
                }
            });
        let d2 = delta * delta;
        rows.push(InitSweepRow {
            delta,
            max_error,
            argmax_edge: argmax,
            ratio: max_error / d2,
            ratio_se: se[argmax].map(|s| s / d2),
            initial_error: init.max_abs_diff(&truth),
        });
        log::debug!("init sweep delta={delta}: max error {max_error:.3e}");
    }
    let ratios = rows.iter().map(|r| r.ratio);
    let hi = ratios.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.fold(f64::INFINITY, f64::min);
    Ok(InitSweepReport {
        schema_version: SCHEMA_VERSION,
        tree: cfg.tree,
        leaves: tree.leaf_count(),
        mode: cfg.mode,
        samples: (cfg.mode == SweepMode::Sampled).then_some(cfg.samples),
        seed: cfg.seed,
        rows,
        ratio_spread: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::TreeKind;

    #[test]
    fn two_leaf_population_is_exact() {
        let mut c = ExperimentConfig::new(
            TreeSpec {
                kind: TreeKind::Random,
                size: 2,
            },
            vec![0.1, 0.05, 0.025],
            1,
            4,
        );
        c.mode = SweepMode::Population;
        let r = init_sweep_experiment(&c).unwrap();
        for row in &r.rows {
            assert!(row.max_error <= 1e-9, "{row:?}");
            assert!(row.initial_error > 1e-3);
            assert!(row.ratio_se.is_none());
        }
    }

    #[test]
    fn population_mode_limit() {
        let mut c = ExperimentConfig::new(
            TreeSpec {
                kind: TreeKind::Complete,
                size: 5,
            },
            vec![0.1],
            1,
            4,
        );
        c.mode = SweepMode::Population;
        assert!(init_sweep_experiment(&c).is_err());
    }

    #[test]
    fn sampled_mode_reports_se_and_repeats() {
        let c = ExperimentConfig::new(
            TreeSpec {
                kind: TreeKind::Random,
                size: 6,
            },
            vec![0.1],
            2000,
            4,
        );
        let a = init_sweep_experiment(&c).unwrap();
        assert_eq!(a, init_sweep_experiment(&c).unwrap());
        let row = &a.rows[0];
        assert!(row.ratio_se.unwrap() > 0.0);
        assert!(row.max_error < row.initial_error);
    }

    #[test]
    fn root_se_matches_direct_formula() {
        let w = [0.5, -0.2, 0.9, 0.1];
        let theta = 0.3;
        let g: Vec<f64> = w.iter().map(|w| w / (1.0 + theta * w)).collect();
        let mean = g.iter().sum::<f64>() / 4.0;
        let sd = (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let slope = g.iter().map(|g| g * g).sum::<f64>() / 4.0;
        assert!((root_se(&w, theta) - sd / (2.0 * slope)).abs() < 1e-14);
    }
}
