//! Branch-length fitting by cyclic coordinate maximization.
//!
//! Edges are visited in a fixed order. For edge `e = {x, y}` the messages
//! `Z_x`, `Z_y` do not involve `theta_e`, so the per-sample products
//! `w_i = Z_x Z_y` are computed once and the one-dimensional objective
//! `sum_i log(1 + theta w_i)` is maximized by bisection on its derivative,
//! which is strictly decreasing. Each new value is installed before the next
//! edge is visited.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::likelihood::{log_likelihood_dataset, Dataset};
use crate::magnetization::{view_magnetization, Endpoints};
use crate::model::EdgeParameters;
use crate::tree::{descendant_subtree, DfsEdgeOrder, EdgeId, NodeId, RootedView, TreeTopology};

/// Order in which one sweep visits the edges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// Depth-first discovery order from `anchor`, or from the tree's default root.
    #[default]
    Dfs,
    DfsFrom(NodeId),
    /// An explicit permutation of all edge ids.
    Given(Vec<EdgeId>),
}

impl SweepOrder {
    pub fn resolve(&self, tree: &TreeTopology) -> Result<Vec<EdgeId>> {
        match self {
            SweepOrder::Dfs => Ok(DfsEdgeOrder::new(tree, tree.default_root())?
                .edges()
                .to_vec()),
            SweepOrder::DfsFrom(a) => Ok(DfsEdgeOrder::new(tree, *a)?.edges().to_vec()),
            SweepOrder::Given(list) => {
                let mut seen = alloc::vec![false; tree.edge_count()];
                for &e in list {
                    tree.check_edge(e)?;
                    if core::mem::replace(&mut seen[e.0], true) {
                        return Err(Error::InvalidConfig("sweep order repeats an edge"));
                    }
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::InvalidConfig("sweep order misses an edge"));
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub theta_min: f64,
    pub theta_max: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub root_tol: f64,
    pub max_sweeps: usize,
    pub order: SweepOrder,
    /// Converged once a sweep changes no parameter by this much or more.
    pub threshold: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            theta_min: 0.01,
            theta_max: 1.0 - 1e-9,
            root_tol: 1e-10,
            max_sweeps: 100,
            order: SweepOrder::Dfs,
            threshold: 1e-8,
        }
    }
}

impl FitConfig {
    /// Search over `[-0.999, 0.999]` for data that need not come from the
    /// near-noiseless regime.
    pub fn full_range() -> Self {
        FitConfig {
            theta_min: -0.999,
            theta_max: 0.999,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0 < self.theta_min && self.theta_min < self.theta_max && self.theta_max < 1.0) {
            return Err(Error::InvalidConfig("need -1 < theta_min < theta_max < 1"));
        }
        if !(self.root_tol > 0.0) || !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxSweeps,
    /// Converged with at least one parameter on the search interval boundary.
    Boundary,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxSweeps => "max-sweeps",
            Termination::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: EdgeParameters,
    /// Largest `|change|` per sweep.
    pub max_changes: Vec<f64>,
    /// Dataset log-likelihood before the first sweep and after each sweep.
    pub log_likelihoods: Vec<f64>,
    pub termination: Termination,
}

impl FitResult {
    pub fn sweeps(&self) -> usize {
        self.max_changes.len()
    }
}

/// Per-sample products `w_i` for one edge together with the sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProfile {
    pub products: Vec<f64>,
    /// `None` means uniform `1/m`.
    pub weights: Option<Vec<f64>>,
}

impl EdgeProfile {
    pub fn unweighted(products: Vec<f64>) -> Self {
        EdgeProfile {
            products,
            weights: None,
        }
    }

    fn sum_by(&self, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        match &self.weights {
            Some(w) => {
                for (&p, &wi) in self.products.iter().zip(w) {
                    acc += wi * f(p)?;
                }
            }
            None => {
                for &p in &self.products {
                    acc += f(p)?;
                }
                acc /= self.products.len() as f64;
            }
        }
        Ok(acc)
    }

    /// Weighted mean of `w_i / (1 + theta w_i)`.
    pub fn derivative(&self, theta: f64) -> Result<f64> {
        self.sum_by(|w| {
            let den = 1.0 + theta * w;
            if den <= 0.0 {
                Err(Error::Pole { edge: None })
            } else {
                Ok(w / den)
            }
        })
    }

    /// Weighted mean of `log(1 + theta w_i)`.
    pub fn objective(&self, theta: f64) -> Result<f64> {
        self.sum_by(|w| {
            let den = 1.0 + theta * w;
            if den <= 0.0 {
                Err(Error::Pole { edge: None })
            } else {
                Ok(libm::log(den))
            }
        })
    }

    /// Maximizer over `[theta_min, theta_max]`. The interior root of the
    /// derivative when it changes sign, otherwise the better endpoint, with
    /// ties going to `theta_min`.
    pub fn optimize(&self, config: &FitConfig) -> f64 {
        let (mut lo, mut hi) = (config.theta_min, config.theta_max);
        // Products lie in [-1, 1] and the interval in (-1, 1), so no pole.
        let d = |t: f64| self.derivative(t).unwrap_or(f64::NAN);
        if d(lo) > 0.0 && d(hi) < 0.0 {
            while hi - lo > config.root_tol {
                let mid = 0.5 * (lo + hi);
                if d(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        let f = |t: f64| self.objective(t).unwrap_or(f64::NEG_INFINITY);
        if f(hi) > f(lo) {
            hi
        } else {
            lo
        }
    }
}

/// `(1/m) sum_i w_i / (1 + theta w_i)`.
pub fn edge_derivative(products: &[f64], theta: f64) -> Result<f64> {
    EdgeProfile::unweighted(products.to_vec()).derivative(theta)
}

/// One-dimensional maximization for unweighted products.
pub fn optimize_edge(products: &[f64], config: &FitConfig) -> f64 {
    EdgeProfile::unweighted(products.to_vec()).optimize(config)
}

/// The two descendant views on either side of each edge; these depend only
/// on the topology and are reused across sweeps.
struct SideViews(Vec<(RootedView, RootedView)>);

impl SideViews {
    fn new(tree: &TreeTopology) -> Result<Self> {
        tree.edges()
            .iter()
            .map(|&(a, b)| {
                Ok((
                    descendant_subtree(tree, a, b)?,
                    descendant_subtree(tree, b, a)?,
                ))
            })
            .collect::<Result<Vec<_>>>()
            .map(SideViews)
    }

    fn products(
        &self,
        params: &EdgeParameters,
        data: &Dataset,
        edge: EdgeId,
        scratch: &mut Vec<f64>,
    ) -> Result<Vec<f64>> {
        let (vx, vy) = &self.0[edge.0];
        data.samples()
            .iter()
            .map(|s| {
                let zx = view_magnetization(vx, params, s.values(), Endpoints::Clamp, scratch)?;
                let zy = view_magnetization(vy, params, s.values(), Endpoints::Clamp, scratch)?;
                Ok(zx * zy)
            })
            .collect()
    }
}

fn profile(data: &Dataset, products: Vec<f64>) -> EdgeProfile {
    let weights = data
        .is_weighted()
        .then(|| (0..data.len()).map(|i| data.weight(i)).collect());
    EdgeProfile { products, weights }
}

/// `Z_x^(i) Z_y^(i)` for every sample under the current parameters.
pub fn edge_profile_products(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    data: &Dataset,
    edge: EdgeId,
) -> Result<Vec<f64>> {
    params_hat.check_len(tree)?;
    tree.check_edge(edge)?;
    let (a, b) = tree.endpoints(edge);
    let (vx, vy) = (
        descendant_subtree(tree, a, b)?,
        descendant_subtree(tree, b, a)?,
    );
    let mut scratch = Vec::new();
    data.samples()
        .iter()
        .map(|s| {
            let zx =
                view_magnetization(&vx, params_hat, s.values(), Endpoints::Clamp, &mut scratch)?;
            let zy =
                view_magnetization(&vy, params_hat, s.values(), Endpoints::Clamp, &mut scratch)?;
            Ok(zx * zy)
        })
        .collect()
}

/// What a sweep did at one edge, handed to the observer of
/// [`coordinate_sweep_observed`] before the new value is installed.
#[derive(Debug)]
pub struct EdgeStep<'a> {
    pub edge: EdgeId,
    /// Parameters as seen by this edge step.
    pub params: &'a EdgeParameters,
    pub profile: &'a EdgeProfile,
    pub before: f64,
    pub after: f64,
}

/// One Gauss-Seidel sweep.
pub fn coordinate_sweep(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    data: &Dataset,
    config: &FitConfig,
) -> Result<EdgeParameters> {
    coordinate_sweep_observed(tree, params_hat, data, config, |_| {})
}

pub fn coordinate_sweep_observed<F: FnMut(&EdgeStep<'_>)>(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    data: &Dataset,
    config: &FitConfig,
    observer: F,
) -> Result<EdgeParameters> {
    config.validate()?;
    params_hat.check_len(tree)?;
    let order = config.order.resolve(tree)?;
    let sides = SideViews::new(tree)?;
    let mut params = params_hat.clone();
    sweep_with(&sides, &order, &mut params, data, config, observer)?;
    Ok(params)
}

fn sweep_with<F: FnMut(&EdgeStep<'_>)>(
    sides: &SideViews,
    order: &[EdgeId],
    params: &mut EdgeParameters,
    data: &Dataset,
    config: &FitConfig,
    mut observer: F,
) -> Result<f64> {
    let mut scratch = Vec::new();
    let mut max_change = 0.0f64;
    for &edge in order {
        let prof = profile(data, sides.products(params, data, edge, &mut scratch)?);
        let before = params.theta(edge);
        let after = prof.optimize(config);
        observer(&EdgeStep {
            edge,
            params,
            profile: &prof,
            before,
            after,
        });
        params.set(edge, after)?;
        max_change = max_change.max((after - before).abs());
    }
    Ok(max_change)
}

/// Sweeps from `init` until no parameter moves by `threshold` or more, or
/// until `max_sweeps` sweeps have run.
pub fn fit(
    tree: &TreeTopology,
    data: &Dataset,
    init: &EdgeParameters,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    init.check_len(tree)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let order = config.order.resolve(tree)?;
    let sides = SideViews::new(tree)?;
    let mut params = init.clone();
    let mut result = FitResult {
        params: init.clone(),
        max_changes: Vec::new(),
        log_likelihoods: alloc::vec![log_likelihood_dataset(tree, init, data)?],
        termination: Termination::MaxSweeps,
    };
    for _ in 0..config.max_sweeps {
        let change = sweep_with(&sides, &order, &mut params, data, config, |_| {})?;
        result.max_changes.push(change);
        result
            .log_likelihoods
            .push(log_likelihood_dataset(tree, &params, data)?);
        if change < config.threshold {
            let on_edge = params
                .as_slice()
                .iter()
                .any(|&t| t == config.theta_min || t == config.theta_max);
            result.termination = if on_edge {
                Termination::Boundary
            } else {
                Termination::Converged
            };
            break;
        }
    }
    result.params = params;
    Ok(result)
}
