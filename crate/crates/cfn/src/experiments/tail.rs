//! Tail frequencies of the unsigned root magnetization and their scaling in delta.

use cfn_core::magnetization::view_magnetization;
use cfn_core::{broadcast_view, classify_trichotomy, stream_rng, Endpoints, Tier};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream_id, ConstantsSpec, ExperimentConfig, PairSource, TreeSpec, MIN_EVENTS};
use crate::error::{CfnError, Result};
use crate::formats::SCHEMA_VERSION;
use crate::stats::{ols, wilson};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCounts {
    pub good: u64,
    pub moderate: u64,
    pub severe: u64,
}

impl TierCounts {
    pub fn total(&self) -> u64 {
        self.good + self.moderate + self.severe
    }

    pub fn get(&self, tier: Tier) -> u64 {
        match tier {
            Tier::Good => self.good,
            Tier::Moderate => self.moderate,
            Tier::Severe => self.severe,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TierValues {
    pub good: f64,
    pub moderate: f64,
    pub severe: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TierIntervals {
    pub good: (f64, f64),
    pub moderate: (f64, f64),
    pub severe: (f64, f64),
}

/// Counts of `sigma_u Z_u` in the regions where the histogram clusters sit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterCounts {
    /// `(0.9, 1]`
    pub high: u64,
    /// `[-0.2, 0)`
    pub near_zero_negative: u64,
    /// `[0, 0.2]`
    pub near_zero_positive: u64,
    /// `[-1, -0.5]`
    pub low: u64,
    /// Good-tier samples with `sigma_u Z_u > 0.9`.
    pub good_high: u64,
}

/// Upper-tail check in the proven regime: the non-good frequency must not
/// exceed `reconstruct_tail * delta + 4 sqrt(reconstruct_tail * delta / N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictCheck {
    pub non_good_frequency: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub samples: u64,
    pub counts: TierCounts,
    pub frequencies: TierValues,
    pub wilson95: TierIntervals,
    /// `1 - reconstruct_gap delta^2`.
    pub good_threshold: f64,
    /// `-anti_threshold`.
    pub severe_threshold: f64,
    /// Proven lower bound `1 - reconstruct_tail delta` on the good frequency.
    pub good_bound: f64,
    /// Proven upper bound `anti_tail delta^2` on the severe frequency.
    pub severe_bound: f64,
    pub regime: String,
    pub strict_check: Option<StrictCheck>,
    pub clusters: ClusterCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrichotomyReport {
    pub schema_version: u32,
    pub tree: TreeSpec,
    pub root: usize,
    pub leaves: usize,
    pub seed: u64,
    pub fixed_pair: bool,
    pub matched: bool,
    pub constants: ConstantsSpec,
    pub rows: Vec<DeltaRow>,
    /// Good frequency never drops by more than two combined standard errors
    /// as delta decreases, over rows where all three tiers are distinct.
    pub good_monotone: bool,
}

impl TrichotomyReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "delta",
            "samples",
            "good",
            "moderate",
            "severe",
            "freq_good",
            "freq_moderate",
            "freq_severe",
            "good_threshold",
            "severe_threshold",
            "regime",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.delta.to_string(),
                r.samples.to_string(),
                r.counts.good.to_string(),
                r.counts.moderate.to_string(),
                r.counts.severe.to_string(),
                r.frequencies.good.to_string(),
                r.frequencies.moderate.to_string(),
                r.frequencies.severe.to_string(),
                r.good_threshold.to_string(),
                r.severe_threshold.to_string(),
                r.regime.clone(),
            ])?;
        }
        w.flush().map_err(|e| CfnError::io("<csv>", e))?;
        Ok(())
    }
}

/// Report plus the raw `(sigma_u, Z_u)` pairs per grid point, in replicate order.
#[derive(Debug, Clone)]
pub struct TailOutcome {
    pub report: TrichotomyReport,
    pub samples: Vec<Vec<(i8, f64)>>,
}

/// For each delta and replicate: draw `theta*` and `theta_hat` from their
/// boxes, broadcast from the root, and classify `sigma_u Z_u`.
pub fn tail_experiment(cfg: &ExperimentConfig) -> Result<TailOutcome> {
    cfg.validate()?;
    let (tree, view) = cfg.tree.build(cfg.seed)?;
    let consts = cfg.constants();
    let root = view.root();
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    let mut all = Vec::with_capacity(cfg.deltas.len());
    for (k, &delta) in cfg.deltas.iter().enumerate() {
        let pairs = PairSource::new(cfg, &tree, k)?;
        let samples: Vec<(i8, f64)> = (0..cfg.samples)
            .into_par_iter()
            .map_init(
                || (vec![0i8; tree.node_count()], Vec::new()),
                |(spins, scratch), i| -> Result<(i8, f64)> {
                    let mut rng = stream_rng(cfg.seed, stream_id(k, i));
                    let pair = pairs.draw(&tree, &mut rng)?;
                    let (truth, hat) = (&pair.0, &pair.1);
                    broadcast_view(&view, truth, &mut rng, spins);
                    let z = view_magnetization(&view, hat, spins, Endpoints::Clamp, scratch)?;
                    Ok((spins[root.0], z))
                },
            )
            .collect::<Result<_>>()?;
        rows.push(summarize(cfg, delta, &consts, &samples));
        all.push(samples);
    }
    let good_monotone = good_monotone(&rows);
    let report = TrichotomyReport {
        schema_version: SCHEMA_VERSION,
        tree: cfg.tree,
        root: root.0,
        leaves: view.leaves().len(),
        seed: cfg.seed,
        fixed_pair: cfg.fixed_pair,
        matched: cfg.matched,
        constants: consts.into(),
        rows,
        good_monotone,
    };
    log::info!(
        "tail experiment finished: {} grid points",
        report.rows.len()
    );
    Ok(TailOutcome {
        report,
        samples: all,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    delta: f64,
    consts: &cfn_core::TrichotomyConstants,
    samples: &[(i8, f64)],
) -> DeltaRow {
    let mut counts = TierCounts::default();
    let mut clusters = ClusterCounts::default();
    for &(sigma, z) in samples {
        let tier = classify_trichotomy(sigma, z, delta, consts);
        match tier {
            Tier::Good => counts.good += 1,
            Tier::Moderate => counts.moderate += 1,
            Tier::Severe => counts.severe += 1,
        }
        let x = sigma as f64 * z;
        if x > 0.9 {
            clusters.high += 1;
            if tier == Tier::Good {
                clusters.good_high += 1;
            }
        }
        if (-0.2..0.0).contains(&x) {
            clusters.near_zero_negative += 1;
        }
        if (0.0..=0.2).contains(&x) {
            clusters.near_zero_positive += 1;
        }
        if x <= -0.5 {
            clusters.low += 1;
        }
    }
    let n = counts.total();
    let freq = |c: u64| c as f64 / n as f64;
    let regime = cfg.regime(delta);
    let strict_check = (regime == "strict").then(|| {
        let non_good = freq(counts.moderate + counts.severe);
        let c = consts.reconstruct_tail * delta;
        let limit = c + 4.0 * (c / n as f64).sqrt();
        StrictCheck {
            non_good_frequency: non_good,
            limit,
            pass: non_good <= limit,
        }
    });
    DeltaRow {
        delta,
        samples: n,
        counts,
        frequencies: TierValues {
            good: freq(counts.good),
            moderate: freq(counts.moderate),
            severe: freq(counts.severe),
        },
        wilson95: TierIntervals {
            good: wilson(counts.good, n),
            moderate: wilson(counts.moderate, n),
            severe: wilson(counts.severe, n),
        },
        good_threshold: consts.good_threshold(delta),
        severe_threshold: -consts.anti_threshold,
        good_bound: 1.0 - consts.reconstruct_tail * delta,
        severe_bound: consts.anti_tail * delta * delta,
        regime: regime.to_string(),
        strict_check,
        clusters,
    }
}

/// Rows whose good threshold lies at or below the severe threshold have
/// only two tiers and are left out.
fn good_monotone(rows: &[DeltaRow]) -> bool {
    let mut sorted: Vec<&DeltaRow> = rows
        .iter()
        .filter(|r| r.good_threshold > r.severe_threshold)
        .collect();
    sorted.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    sorted.windows(2).all(|w| {
        let (a, b) = (&w[0].frequencies, &w[1].frequencies);
        let var = |p: f64, n: u64| p * (1.0 - p) / n as f64;
        let se = (var(a.good, w[0].samples) + var(b.good, w[1].samples)).sqrt();
        b.good >= a.good - 2.0 * se
    })
}

/// Log-log fit of one failure tier's frequency against delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSlope {
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    /// Deltas with at least [`MIN_EVENTS`] events.
    pub used: Vec<f64>,
    /// Deltas dropped for having fewer events.
    pub excluded: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub deltas: Vec<f64>,
    pub moderate: TierSlope,
    pub severe: TierSlope,
}

fn tier_slope(report: &TrichotomyReport, tier: Tier) -> TierSlope {
    let (mut used, mut excluded, mut xs, mut ys) = (vec![], vec![], vec![], vec![]);
    for r in &report.rows {
        let c = r.counts.get(tier);
        if c >= MIN_EVENTS {
            used.push(r.delta);
            xs.push(r.delta.ln());
            ys.push((c as f64 / r.samples as f64).ln());
        } else {
            excluded.push(r.delta);
        }
    }
    let fit = ols(&xs, &ys);
    TierSlope {
        slope: fit.map(|f| f.slope),
        slope_se: fit.and_then(|f| f.slope_se),
        used,
        excluded,
    }
}

/// Slopes from an existing tail report. Fails only when neither failure
/// tier has two usable grid points.
pub fn scaling_report(report: &TrichotomyReport) -> Result<ScalingReport> {
    let moderate = tier_slope(report, Tier::Moderate);
    let severe = tier_slope(report, Tier::Severe);
    if moderate.slope.is_none() && severe.slope.is_none() {
        return Err(CfnError::Config(format!(
            "insufficient events: no failure tier has {MIN_EVENTS}+ events at two deltas"
        )));
    }
    Ok(ScalingReport {
        schema_version: SCHEMA_VERSION,
        deltas: report.rows.iter().map(|r| r.delta).collect(),
        moderate,
        severe,
    })
}

/// Runs [`tail_experiment`] over a grid of at least three deltas and fits
/// the failure-tier slopes.
pub fn scaling_experiment(cfg: &ExperimentConfig) -> Result<(TailOutcome, ScalingReport)> {
    if cfg.deltas.len() < 3 {
        return Err(CfnError::Config(format!(
            "scaling needs at least 3 deltas, got {}",
            cfg.deltas.len()
        )));
    }
    let outcome = tail_experiment(cfg)?;
    let scaling = scaling_report(&outcome.report)?;
    Ok((outcome, scaling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{TreeKind, TreeSpec};

    fn cfg(deltas: Vec<f64>, n: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            TreeSpec {
                kind: TreeKind::Complete,
                size: 4,
            },
            deltas,
            n,
            11,
        )
    }

    #[test]
    fn counts_add_up_and_repeat() {
        let c = cfg(vec![0.1, 0.05], 2000);
        let a = tail_experiment(&c).unwrap();
        let b = tail_experiment(&c).unwrap();
        assert_eq!(a.report, b.report);
        for r in &a.report.rows {
            assert_eq!(r.counts.total(), 2000);
            let f = r.frequencies;
            assert!((f.good + f.moderate + f.severe - 1.0).abs() < 1e-12);
            assert_eq!(r.regime, "extrapolated");
            assert!(r.strict_check.is_none());
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let c = cfg(vec![0.1], 3000);
        let run = |k| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .unwrap()
                .install(|| tail_experiment(&c).unwrap())
        };
        let (one, four) = (run(1), run(4));
        assert_eq!(one.samples, four.samples);
        assert_eq!(
            serde_json::to_string(&one.report).unwrap(),
            serde_json::to_string(&four.report).unwrap()
        );
    }

    #[test]
    fn noiseless_limit_has_no_severe_failures() {
        let mut c = cfg(vec![1e-6], 2000);
        c.matched = true;
        let r = tail_experiment(&c).unwrap().report;
        assert_eq!(r.rows[0].counts.severe, 0);
        assert_eq!(r.rows[0].regime, "strict");
        assert!(r.rows[0].strict_check.unwrap().pass);
    }

    #[test]
    fn scaling_needs_three_points() {
        assert!(scaling_experiment(&cfg(vec![0.1], 10)).is_err());
        assert!(scaling_experiment(&cfg(vec![0.1, 0.05], 10)).is_err());
    }

    #[test]
    fn sparse_points_are_excluded() {
        let (_, s) = scaling_experiment(&cfg(vec![0.2, 0.1, 0.05], 3000)).unwrap();
        assert_eq!(s.moderate.used.len() + s.moderate.excluded.len(), 3);
        assert_eq!(s.severe.used.len() + s.severe.excluded.len(), 3);
    }
}
