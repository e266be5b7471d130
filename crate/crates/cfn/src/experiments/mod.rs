//! Seeded Monte Carlo experiments.
//!
//! Replicate `i` at grid point `k` draws from `stream_rng(seed, k << 32 | i)`,
//! replicates run on the rayon pool and are collected in index order, so
//! every report depends only on the config and never on the worker count.

mod gradient;
mod histogram;
mod independence;
mod init_sweep;
mod tail;

use std::borrow::Cow;
use std::path::{Path, PathBuf};

use cfn_core::{
    descendant_subtree, experiment_tree, random_binary_tree, sample_parameters, stream_rng,
    EdgeParameters, ExperimentKind, ParameterBox, RootedView, TreeTopology, TrichotomyConstants,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CfnError, Result};
use crate::formats::SCHEMA_VERSION;

pub use gradient::{gradient_population_experiment, GradientReport, GradientRow};
pub use histogram::{emit_histogram, histogram, HistogramBin};
pub use independence::{independence_experiment, IndependenceReport, IndependenceRow};
pub use init_sweep::{init_sweep_experiment, InitSweepReport, InitSweepRow};
pub use tail::{
    scaling_experiment, scaling_report, tail_experiment, ClusterCounts, DeltaRow, ScalingReport,
    StrictCheck, TailOutcome, TierCounts, TierSlope, TrichotomyReport,
};

/// Minimum number of events for a grid point to enter a slope fit.
pub const MIN_EVENTS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    /// `size` is the depth; `2^size` leaves.
    Complete,
    Caterpillar,
    Balanced,
    /// Random attachment tree with `size` leaves, seeded from the master seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub kind: TreeKind,
    pub size: usize,
}

impl TreeSpec {
    /// The tree plus the rooted view whose root `u` the experiments study.
    /// Experiment kinds hang off a pendant anchor leaf; random trees are
    /// rooted at their default root, away from its first neighbour.
    pub fn build(&self, seed: u64) -> Result<(TreeTopology, RootedView)> {
        let kind = match self.kind {
            TreeKind::Complete => ExperimentKind::Complete,
            TreeKind::Caterpillar => ExperimentKind::Caterpillar,
            TreeKind::Balanced => ExperimentKind::Balanced,
            TreeKind::Random => {
                let tree = random_binary_tree(self.size, &mut stream_rng(seed, u64::MAX))?;
                let root = tree.default_root();
                let away = tree.neighbors(root)[0].0;
                let view = descendant_subtree(&tree, root, away)?;
                return Ok((tree, view));
            }
        };
        Ok(experiment_tree(kind, self.size)?)
    }
}

/// Box coefficients `(c_lo, c_hi)`: theta lies in `[1 - 2 c_hi delta, 1 - 2 c_lo delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxCoefficients {
    pub c_lo: f64,
    pub c_hi: f64,
}

impl Default for BoxCoefficients {
    fn default() -> Self {
        BoxCoefficients {
            c_lo: ParameterBox::DEFAULT_C_LO,
            c_hi: ParameterBox::DEFAULT_C_HI,
        }
    }
}

impl BoxCoefficients {
    pub fn at(&self, delta: f64) -> Result<ParameterBox> {
        Ok(ParameterBox::new(delta, self.c_lo, self.c_hi)?)
    }

    pub fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

/// Serializable mirror of [`TrichotomyConstants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    pub reconstruct_gap: f64,
    pub reconstruct_tail: f64,
    pub anti_threshold: f64,
    pub anti_tail: f64,
    pub delta0: f64,
}

impl From<TrichotomyConstants> for ConstantsSpec {
    fn from(c: TrichotomyConstants) -> Self {
        ConstantsSpec {
            reconstruct_gap: c.reconstruct_gap,
            reconstruct_tail: c.reconstruct_tail,
            anti_threshold: c.anti_threshold,
            anti_tail: c.anti_tail,
            delta0: c.delta0,
        }
    }
}

impl From<ConstantsSpec> for TrichotomyConstants {
    fn from(c: ConstantsSpec) -> Self {
        TrichotomyConstants {
            reconstruct_gap: c.reconstruct_gap,
            reconstruct_tail: c.reconstruct_tail,
            anti_threshold: c.anti_threshold,
            anti_tail: c.anti_tail,
            delta0: c.delta0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// `samples` simulated leaf configurations.
    #[default]
    Sampled,
    /// Every leaf configuration weighted by its exact probability.
    Population,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_bins() -> usize {
    200
}

/// Shared configuration of all experiments. Fields an experiment does not
/// use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub tree: TreeSpec,
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub true_box: BoxCoefficients,
    #[serde(default)]
    pub hat_box: BoxCoefficients,
    /// Defaults to the constants implied by the two boxes.
    #[serde(default)]
    pub constants: Option<ConstantsSpec>,
    /// Replicates per grid point (leaf samples `m` for the sweep experiment).
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// One `(theta*, theta_hat)` pair per grid point instead of fresh draws
    /// per replicate.
    #[serde(default)]
    pub fixed_pair: bool,
    /// Use `theta*` as `theta_hat`; the hat box is then ignored.
    #[serde(default)]
    pub matched: bool,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Edge studied by the gradient experiment; defaults to the first edge
    /// joining two internal nodes.
    #[serde(default)]
    pub edge: Option<usize>,
    /// Also compute the gradient expectation exactly (small trees only).
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub mode: SweepMode,
    /// Prefix for report files.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(tree: TreeSpec, deltas: Vec<f64>, samples: usize, seed: u64) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            tree,
            deltas,
            true_box: BoxCoefficients::default(),
            hat_box: BoxCoefficients::default(),
            constants: None,
            samples,
            seed,
            fixed_pair: false,
            matched: false,
            bins: default_bins(),
            edge: None,
            exact: false,
            mode: SweepMode::Sampled,
            output: None,
        }
    }

    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::formats::read_text(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text)?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CfnError::Config(format!(
                "schema_version {} is not supported",
                self.schema_version
            )));
        }
        if self.samples == 0 {
            return Err(CfnError::Config("samples must be at least 1".into()));
        }
        if self.deltas.is_empty() {
            return Err(CfnError::Config("deltas is empty".into()));
        }
        for &d in &self.deltas {
            if !(d > 0.0 && d < 0.5) {
                return Err(CfnError::Config(format!("delta {d} outside (0, 1/2)")));
            }
            self.true_box
                .at(d)
                .map_err(|_| CfnError::Config(format!("true box invalid at delta {d}")))?;
            self.hat_box
                .at(d)
                .map_err(|_| CfnError::Config(format!("hat box invalid at delta {d}")))?;
        }
        if self.samples > u32::MAX as usize {
            return Err(CfnError::Config("samples must fit in 32 bits".into()));
        }
        Ok(())
    }

    pub fn constants(&self) -> TrichotomyConstants {
        self.constants.map(Into::into).unwrap_or_else(|| {
            TrichotomyConstants::from_box_constants(
                self.true_box.c_lo,
                self.true_box.c_hi,
                self.hat_box.c_lo,
                self.hat_box.c_hi,
            )
        })
    }

    /// Whether delta lies in the range where the tail bounds are proven for
    /// these boxes.
    pub fn regime(&self, delta: f64) -> &'static str {
        if delta <= self.constants().delta0
            && self.true_box.is_default()
            && self.hat_box.is_default()
        {
            "strict"
        } else {
            "extrapolated"
        }
    }
}

/// Stream id of replicate `i` at grid point `k`.
pub(crate) fn stream_id(k: usize, i: usize) -> u64 {
    ((k as u64) << 32) | i as u64
}

/// Stream reserved for per-grid-point draws (the fixed pair).
pub(crate) fn pair_stream(k: usize) -> u64 {
    ((k as u64) << 32) | 0xFFFF_FFFF
}

/// Uniforms `(u_e, v_e)` shared by every grid point, so parameters move
/// smoothly with delta.
pub(crate) fn common_uniforms(seed: u64, edges: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, u64::MAX - 1);
    let u = (0..edges).map(|_| rng.random::<f64>()).collect();
    let v = (0..edges).map(|_| rng.random::<f64>()).collect();
    (u, v)
}

/// Source of `(theta*, theta_hat)` for one grid point: a fixed pair drawn
/// once from [`pair_stream`], or fresh draws from each replicate's stream.
pub(crate) struct PairSource {
    fixed: Option<(EdgeParameters, EdgeParameters)>,
    true_box: ParameterBox,
    hat_box: ParameterBox,
    matched: bool,
}

impl PairSource {
    pub(crate) fn new(cfg: &ExperimentConfig, tree: &TreeTopology, k: usize) -> Result<Self> {
        let delta = cfg.deltas[k];
        let mut src = PairSource {
            fixed: None,
            true_box: cfg.true_box.at(delta)?,
            hat_box: cfg.hat_box.at(delta)?,
            matched: cfg.matched,
        };
        if cfg.fixed_pair {
            src.fixed = Some(src.fresh(tree, &mut stream_rng(cfg.seed, pair_stream(k)))?);
        }
        Ok(src)
    }

    fn fresh<R: Rng + ?Sized>(
        &self,
        tree: &TreeTopology,
        rng: &mut R,
    ) -> Result<(EdgeParameters, EdgeParameters)> {
        let truth = sample_parameters(tree, &self.true_box, rng)?;
        let hat = if self.matched {
            truth.clone()
        } else {
            sample_parameters(tree, &self.hat_box, rng)?
        };
        Ok((truth, hat))
    }

    pub(crate) fn draw<R: Rng + ?Sized>(
        &self,
        tree: &TreeTopology,
        rng: &mut R,
    ) -> Result<Cow<'_, (EdgeParameters, EdgeParameters)>> {
        match &self.fixed {
            Some(pair) => Ok(Cow::Borrowed(pair)),
            None => Ok(Cow::Owned(self.fresh(tree, rng)?)),
        }
    }
}

pub(crate) fn params_at(bx: &ParameterBox, u: &[f64]) -> EdgeParameters {
    EdgeParameters::new(u.iter().map(|&x| bx.theta_at(x)).collect())
        .expect("box interval lies in [-1, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_from_json_and_toml() {
        let json = r#"{"tree":{"kind":"complete","size":3},"deltas":[0.1],"samples":5}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.true_box, BoxCoefficients::default());
        cfg.validate().unwrap();
        let toml_text =
            "samples = 5\ndeltas = [0.1]\nseed = 9\n[tree]\nkind = \"balanced\"\nsize = 10\n";
        let cfg: ExperimentConfig = toml::from_str(toml_text).unwrap();
        assert_eq!((cfg.tree.kind, cfg.seed), (TreeKind::Balanced, 9));
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"tree":{"kind":"complete","size":3},"deltas":[0.1],"samples":5,"typo":1}"#
        )
        .is_err());
    }

    #[test]
    fn validation() {
        let spec = TreeSpec {
            kind: TreeKind::Complete,
            size: 3,
        };
        assert!(ExperimentConfig::new(spec, vec![0.1], 0, 1)
            .validate()
            .is_err());
        assert!(ExperimentConfig::new(spec, vec![], 5, 1)
            .validate()
            .is_err());
        assert!(ExperimentConfig::new(spec, vec![0.6], 5, 1)
            .validate()
            .is_err());
        let mut cfg = ExperimentConfig::new(spec, vec![0.45], 5, 1);
        cfg.true_box.c_hi = 2.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn regime_flag() {
        let spec = TreeSpec {
            kind: TreeKind::Complete,
            size: 3,
        };
        let cfg = ExperimentConfig::new(spec, vec![0.1], 5, 1);
        assert_eq!(cfg.regime(0.1), "extrapolated");
        assert_eq!(cfg.regime(1.0 / 1190.0), "strict");
        assert_eq!(cfg.constants(), cfn_core::default_constants());
    }

    #[test]
    fn random_tree_spec_is_seeded() {
        let spec = TreeSpec {
            kind: TreeKind::Random,
            size: 12,
        };
        let (a, va) = spec.build(3).unwrap();
        let (b, _) = spec.build(3).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(va.leaves().len() < 12);
    }
}
