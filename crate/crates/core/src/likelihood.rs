//! Leaf log-likelihood and its gradient.
//!
//! The likelihood is evaluated by pruning with per-node rescaling. The
//! gradient takes the other route: across an edge `e = {x, y}` the leaf law
//! factors as `P(L) = P(L_x) P(L_y) (1 + theta_e Z_x Z_y)`, so
//! `d log P / d theta_e = Z_x Z_y / (1 + theta_e Z_x Z_y)` with the two
//! messages read from a [`MessageTable`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::magnetization::{messages_on_view, Endpoints, MessageTable};
use crate::model::{EdgeParameters, LeafDistribution, SpinConfig};
use crate::tree::{whole_tree_view, EdgeId, NodeId, RootedView, TreeTopology};

/// `d ell / d theta_e` per edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, edge: EdgeId) -> f64 {
        self.0[edge.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Leaf observations `sigma^(1..m)`, optionally weighted.
///
/// Unweighted datasets average with weight `1/m`. Weighted datasets are used
/// for population-limit computations where each leaf configuration carries
/// its exact probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<SpinConfig>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(samples: Vec<SpinConfig>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let len = samples[0].values().len();
        if samples.iter().any(|s| s.values().len() != len) {
            return Err(Error::InconsistentDataset);
        }
        Ok(Dataset {
            samples,
            weights: None,
        })
    }

    /// Weights must be non-negative with a positive sum; they are normalized.
    pub fn weighted(samples: Vec<SpinConfig>, weights: Vec<f64>) -> Result<Self> {
        let mut d = Self::new(samples)?;
        let total: f64 = weights.iter().sum();
        if weights.len() != d.samples.len()
            || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite())
            || !(total > 0.0)
        {
            return Err(Error::InconsistentDataset);
        }
        d.weights = Some(weights.iter().map(|w| w / total).collect());
        Ok(d)
    }

    /// Every configuration of `dist` weighted by its probability.
    pub fn from_distribution(dist: &LeafDistribution) -> Result<Self> {
        let (samples, weights) = dist.entries.iter().cloned().unzip();
        Self::weighted(samples, weights)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SpinConfig] {
        &self.samples
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.samples.len() as f64,
        }
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Sum of `weight(i) * f(i)` in sample order.
    pub fn mean_by<F: FnMut(usize, &SpinConfig) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (i, s) in self.samples.iter().enumerate() {
            acc += self.weight(i) * f(i, s)?;
        }
        Ok(acc)
    }
}

/// Log-probability of the observed leaves of `view` by pruning, with
/// partial likelihoods rescaled at every node.
pub fn view_log_likelihood(
    view: &RootedView,
    params: &EdgeParameters,
    spins: &[i8],
) -> Result<f64> {
    let mut partial = vec![[0.0f64; 2]; view.tree_node_count()];
    let mut log_scale = 0.0;
    for v in view.postorder() {
        let mut lik = if view.is_tree_leaf(v) {
            match spins.get(v.0) {
                Some(1) => [1.0, 0.0],
                Some(-1) => [0.0, 1.0],
                _ => return Err(Error::MissingSpin(v)),
            }
        } else {
            [1.0, 1.0]
        };
        for &(c, e) in view.children(v) {
            if e.0 >= params.len() {
                return Err(Error::UnknownEdge(e));
            }
            let t = params.theta(e);
            let (same, diff) = ((1.0 + t) / 2.0, (1.0 - t) / 2.0);
            let [cp, cm] = partial[c.0];
            lik[0] *= same * cp + diff * cm;
            lik[1] *= diff * cp + same * cm;
        }
        let scale = lik[0].max(lik[1]);
        if !(scale > 0.0) {
            return Err(Error::ZeroProbability);
        }
        partial[v.0] = [lik[0] / scale, lik[1] / scale];
        log_scale += libm::log(scale);
    }
    let [p, m] = partial[view.root().0];
    Ok(libm::log(0.5 * (p + m)) + log_scale)
}

/// `log P(leaves = sigma_L)` under `params_hat`.
pub fn log_likelihood(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
) -> Result<f64> {
    params_hat.check_len(tree)?;
    let view = whole_tree_view(tree, tree.default_root())?;
    view_log_likelihood(&view, params_hat, leaf_spins.values())
}

/// Weighted mean of per-sample log-likelihoods (plain mean when unweighted).
pub fn log_likelihood_dataset(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    data: &Dataset,
) -> Result<f64> {
    params_hat.check_len(tree)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let view = whole_tree_view(tree, tree.default_root())?;
    data.mean_by(|_, s| view_log_likelihood(&view, params_hat, s.values()))
}

#[inline]
pub(crate) fn edge_term(theta: f64, product: f64, edge: EdgeId) -> Result<f64> {
    let den = 1.0 + theta * product;
    if den <= 0.0 {
        return Err(Error::VanishingDenominator { edge });
    }
    Ok(product / den)
}

fn messages(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
) -> Result<MessageTable> {
    let view = whole_tree_view(tree, tree.default_root())?;
    messages_on_view(
        tree,
        &view,
        params_hat,
        leaf_spins.values(),
        Endpoints::Clamp,
    )
}

/// `Z_x Z_y / (1 + theta_e Z_x Z_y)` for one edge.
pub fn grad_edge(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
    edge: EdgeId,
) -> Result<f64> {
    tree.check_edge(edge)?;
    let table = messages(tree, params_hat, leaf_spins)?;
    edge_term(params_hat.theta(edge), table.product(edge), edge)
}

/// Gradient over every edge from a single message table.
pub fn grad_all(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
) -> Result<GradientVector> {
    let table = messages(tree, params_hat, leaf_spins)?;
    gradient_from_messages(params_hat, &table)
}

pub fn gradient_from_messages(
    params_hat: &EdgeParameters,
    table: &MessageTable,
) -> Result<GradientVector> {
    (0..table.edge_count())
        .map(|e| {
            edge_term(
                params_hat.theta(EdgeId(e)),
                table.product(EdgeId(e)),
                EdgeId(e),
            )
        })
        .collect::<Result<Vec<_>>>()
        .map(GradientVector)
}

/// Gradient of [`log_likelihood_dataset`].
pub fn grad_dataset(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    data: &Dataset,
) -> Result<GradientVector> {
    params_hat.check_len(tree)?;
    let view = whole_tree_view(tree, tree.default_root())?;
    let mut acc = vec![0.0; tree.edge_count()];
    for (i, s) in data.samples().iter().enumerate() {
        let table = messages_on_view(tree, &view, params_hat, s.values(), Endpoints::Clamp)?;
        let g = gradient_from_messages(params_hat, &table)?;
        for (a, v) in acc.iter_mut().zip(g.0) {
            *a += data.weight(i) * v;
        }
    }
    Ok(GradientVector(acc))
}

/// Central differences of [`log_likelihood`] with the given step.
pub fn finite_difference_grad(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
    step: f64,
) -> Result<GradientVector> {
    params_hat.check_len(tree)?;
    let view = whole_tree_view(tree, tree.default_root())?;
    let mut out = Vec::with_capacity(tree.edge_count());
    let mut shifted = params_hat.clone();
    for e in (0..tree.edge_count()).map(EdgeId) {
        let t = params_hat.theta(e);
        if !(t - step > -1.0 && t + step < 1.0) {
            return Err(Error::ParameterOutOfRange {
                edge: Some(e),
                value: t,
                domain: "(-1 + step, 1 - step)",
            });
        }
        shifted.set(e, t + step)?;
        let up = view_log_likelihood(&view, &shifted, leaf_spins.values())?;
        shifted.set(e, t - step)?;
        let down = view_log_likelihood(&view, &shifted, leaf_spins.values())?;
        shifted.set(e, t)?;
        out.push((up - down) / (2.0 * step));
    }
    Ok(GradientVector(out))
}

/// `(theta_true - theta_hat) / (1 - theta_hat^2)`.
pub fn population_gradient_closed_form(theta_true: f64, theta_hat: f64) -> Result<f64> {
    if !(theta_hat.abs() < 1.0) {
        return Err(Error::ParameterOutOfRange {
            edge: None,
            value: theta_hat,
            domain: "(-1, 1)",
        });
    }
    Ok((theta_true - theta_hat) / (1.0 - theta_hat * theta_hat))
}

/// Leaf law of the whole tree with each probability computed by pruning.
/// Usable well beyond the brute-force enumeration limit (`2^n` entries).
pub fn leaf_distribution_by_pruning(
    tree: &TreeTopology,
    params: &EdgeParameters,
) -> Result<LeafDistribution> {
    params.check_len(tree)?;
    let n = tree.leaf_count();
    if n > 24 {
        return Err(Error::TooManyLeaves { got: n, max: 24 });
    }
    let view = whole_tree_view(tree, tree.default_root())?;
    let leaves: Vec<NodeId> = tree.leaves().to_vec();
    let mut values = vec![0i8; tree.node_count()];
    let mut entries = Vec::with_capacity(1 << n);
    for key in 0usize..(1 << n) {
        for (j, &l) in leaves.iter().enumerate() {
            values[l.0] = if key >> j & 1 == 1 { -1 } else { 1 };
        }
        let spins = SpinConfig::from_pairs(
            tree.node_count(),
            &leaves.iter().map(|&l| (l, values[l.0])).collect::<Vec<_>>(),
        )?;
        let p = libm::exp(view_log_likelihood(&view, params, &values)?);
        entries.push((spins, p));
    }
    Ok(LeafDistribution { leaves, entries })
}
