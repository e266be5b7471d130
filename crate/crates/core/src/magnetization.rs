//! Posterior root magnetizations.
//!
//! The magnetization of a node `u` over a rooted view is
//! `P(sigma_u = +1 | leaves) - P(sigma_u = -1 | leaves)` under the given
//! edge parameters. It is computed bottom-up: a leaf reports its observed
//! spin and an internal node `v` with children `w1, w2` reports
//! `q(theta_1 Z_1, theta_2 Z_2)` where `q(s, t) = (s + t) / (1 + s t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{EdgeParameters, SpinConfig};
use crate::tree::{whole_tree_view, EdgeId, NodeId, RootedView, TreeTopology};

/// Distance from ±1 that parameters are clamped to in [`Endpoints::Clamp`] mode.
pub const CLAMP_MARGIN: f64 = 1e-12;

/// How parameters at or near `|theta| = 1` are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Endpoints {
    /// Clamp theta into `[-1 + 1e-12, 1 - 1e-12]`; the recursion never hits a pole.
    #[default]
    Clamp,
    /// Use theta as given; contradictory noiseless paths report [`Error::Pole`].
    Exact,
}

impl Endpoints {
    #[inline]
    fn apply(self, theta: f64) -> f64 {
        match self {
            Endpoints::Clamp => theta.clamp(-1.0 + CLAMP_MARGIN, 1.0 - CLAMP_MARGIN),
            Endpoints::Exact => theta,
        }
    }
}

/// `q(s, t) = (s + t) / (1 + s t)`.
pub fn q_combine(s: f64, t: f64) -> Result<f64> {
    let den = 1.0 + s * t;
    if den == 0.0 {
        return Err(Error::Pole { edge: None });
    }
    Ok(((s + t) / den).clamp(-1.0, 1.0))
}

#[inline]
fn q_at(s: f64, t: f64, edge: EdgeId) -> Result<f64> {
    q_combine(s, t).map_err(|_| Error::Pole { edge: Some(edge) })
}

/// Bottom-up magnetization at the view root, reading node-indexed spins from
/// `spins` (zero = unobserved) and using `scratch` as the per-node buffer.
pub fn view_magnetization(
    view: &RootedView,
    params: &EdgeParameters,
    spins: &[i8],
    endpoints: Endpoints,
    scratch: &mut Vec<f64>,
) -> Result<f64> {
    scratch.clear();
    scratch.resize(view.tree_node_count(), 0.0);
    for v in view.postorder() {
        let z = if view.is_tree_leaf(v) {
            match spins.get(v.0) {
                Some(&s) if s != 0 => s as f64,
                _ => return Err(Error::MissingSpin(v)),
            }
        } else {
            let mut acc = 0.0;
            for &(c, e) in view.children(v) {
                if e.0 >= params.len() {
                    return Err(Error::UnknownEdge(e));
                }
                acc = q_at(acc, endpoints.apply(params.theta(e)) * scratch[c.0], e)?;
            }
            acc
        };
        scratch[v.0] = z;
    }
    Ok(scratch[view.root().0])
}

/// Magnetization at the root of `view` under `params_hat` given the leaf spins.
pub fn root_magnetization(
    view: &RootedView,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
) -> Result<f64> {
    root_magnetization_with(view, params_hat, leaf_spins, Endpoints::Clamp)
}

pub fn root_magnetization_with(
    view: &RootedView,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
    endpoints: Endpoints,
) -> Result<f64> {
    let mut scratch = Vec::new();
    view_magnetization(
        view,
        params_hat,
        leaf_spins.values(),
        endpoints,
        &mut scratch,
    )
}

/// Leaf limit for [`brute_force_magnetization`].
pub const MAX_BRUTE_FORCE_LEAVES: usize = 12;

/// Magnetization straight from its definition: sums the joint law over every
/// assignment of the view's internal spins with the leaves held fixed.
pub fn brute_force_magnetization(
    view: &RootedView,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
) -> Result<f64> {
    if view.leaves().len() > MAX_BRUTE_FORCE_LEAVES {
        return Err(Error::TooManyLeaves {
            got: view.leaves().len(),
            max: MAX_BRUTE_FORCE_LEAVES,
        });
    }
    let nodes = view.preorder();
    let mut fixed = vec![0i8; view.tree_node_count()];
    let mut free = Vec::new();
    for &v in nodes {
        if view.is_tree_leaf(v) {
            fixed[v.0] = leaf_spins.spin(v).ok_or(Error::MissingSpin(v))?;
        } else {
            free.push(v);
        }
    }
    let edges: Vec<(NodeId, NodeId, f64)> = view
        .edges()
        .map(|(p, c, e)| {
            if e.0 < params_hat.len() {
                Ok((p, c, params_hat.theta(e)))
            } else {
                Err(Error::UnknownEdge(e))
            }
        })
        .collect::<Result<_>>()?;
    let root = view.root();
    let mut plus = 0.0;
    let mut minus = 0.0;
    let mut tau = fixed.clone();
    for mask in 0u64..(1u64 << free.len()) {
        for (i, v) in free.iter().enumerate() {
            tau[v.0] = if mask >> i & 1 == 1 { -1 } else { 1 };
        }
        let mut p = 0.5;
        for &(a, b, t) in &edges {
            p *= (1.0 + (tau[a.0] * tau[b.0]) as f64 * t) / 2.0;
        }
        if tau[root.0] > 0 {
            plus += p;
        } else {
            minus += p;
        }
    }
    let total = plus + minus;
    if total <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    Ok((plus - minus) / total)
}

/// Directed messages `Z_{u -> v}`: the magnetization at `u` over the
/// descendant subtree of `u` with respect to its neighbor `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageTable {
    endpoints: Vec<(NodeId, NodeId)>,
    // [Z_{a -> b}, Z_{b -> a}] for edge (a, b)
    values: Vec<[f64; 2]>,
}

impl MessageTable {
    /// Message leaving `from` along `edge`.
    #[inline]
    pub fn along(&self, edge: EdgeId, from: NodeId) -> f64 {
        let (a, _) = self.endpoints[edge.0];
        self.values[edge.0][if from == a { 0 } else { 1 }]
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.endpoints
            .iter()
            .position(|&(a, b)| (a, b) == (from, to) || (b, a) == (from, to))
            .map(|e| self.along(EdgeId(e), from))
    }

    /// `(Z_x, Z_y)` for edge `{x, y}` in stored endpoint order.
    #[inline]
    pub fn pair(&self, edge: EdgeId) -> (f64, f64) {
        let [a, b] = self.values[edge.0];
        (a, b)
    }

    /// `Z_x Z_y` across `edge`.
    #[inline]
    pub fn product(&self, edge: EdgeId) -> f64 {
        let [a, b] = self.values[edge.0];
        a * b
    }

    pub fn edge_count(&self) -> usize {
        self.values.len()
    }
}

/// All `2 |E|` directed messages by one inward and one outward pass.
pub fn all_messages(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
) -> Result<MessageTable> {
    all_messages_with(tree, params_hat, leaf_spins, Endpoints::Clamp)
}

pub fn all_messages_with(
    tree: &TreeTopology,
    params_hat: &EdgeParameters,
    leaf_spins: &SpinConfig,
    endpoints: Endpoints,
) -> Result<MessageTable> {
    let view = whole_tree_view(tree, tree.default_root())?;
    messages_on_view(tree, &view, params_hat, leaf_spins.values(), endpoints)
}

/// Message computation over a precomputed whole-tree view of `tree`.
pub fn messages_on_view(
    tree: &TreeTopology,
    view: &RootedView,
    params_hat: &EdgeParameters,
    spins: &[i8],
    endpoints: Endpoints,
) -> Result<MessageTable> {
    params_hat.check_len(tree)?;
    let ends = tree.edges().to_vec();
    let mut values = vec![[0.0f64; 2]; tree.edge_count()];
    let slot = |e: EdgeId, from: NodeId| if ends[e.0].0 == from { 0 } else { 1 };
    let theta = |e: EdgeId| endpoints.apply(params_hat.theta(e));
    let leaf_spin = |v: NodeId| match spins.get(v.0) {
        Some(&s) if s != 0 => Ok(s as f64),
        _ => Err(Error::MissingSpin(v)),
    };

    // Inward: child -> parent.
    for v in view.postorder() {
        let Some((_, up)) = view.parent(v) else {
            continue;
        };
        let z = if tree.is_leaf(v) {
            leaf_spin(v)?
        } else {
            let mut acc = 0.0;
            for &(c, e) in view.children(v) {
                acc = q_at(acc, theta(e) * values[e.0][slot(e, c)], up)?;
            }
            acc
        };
        values[up.0][slot(up, v)] = z;
    }
    // Outward: parent -> child, combining everything else around the parent.
    for &v in view.preorder() {
        for &(c, down) in view.children(v) {
            let z = if tree.is_leaf(v) {
                leaf_spin(v)?
            } else {
                let mut acc = 0.0;
                for &(w, e) in tree.neighbors(v) {
                    if w != c {
                        acc = q_at(acc, theta(e) * values[e.0][slot(e, w)], down)?;
                    }
                }
                acc
            };
            values[down.0][slot(down, v)] = z;
        }
    }
    Ok(MessageTable {
        endpoints: ends,
        values,
    })
}

/// Coefficients of the reconstruction trichotomy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrichotomyConstants {
    /// Good reconstruction iff `sigma Z >= 1 - reconstruct_gap * delta^2`.
    pub reconstruct_gap: f64,
    /// Failure probability bound `reconstruct_tail * delta`.
    pub reconstruct_tail: f64,
    /// Severe failure iff `sigma Z <= -anti_threshold`.
    pub anti_threshold: f64,
    /// Severe failure probability bound `anti_tail * delta^2`.
    pub anti_tail: f64,
    /// Largest delta for which the bounds are guaranteed.
    pub delta0: f64,
}

impl TrichotomyConstants {
    /// Constants as functions of the box coefficients: `c_true, c_hi_true`
    /// bound the true flip probabilities and `c_hat, c_hi_hat` the estimated ones.
    pub fn from_box_constants(_c_true: f64, c_hi_true: f64, c_hat: f64, c_hi_hat: f64) -> Self {
        let inner = 9.0 * c_hi_hat * c_hi_hat / c_hat + 2.0 * c_hi_hat;
        let reconstruct_gap = 0.8 * inner * inner;
        let delta0 = (1.0 / (2380.0 * c_hi_true))
            .min(c_hi_hat / (2.0 * reconstruct_gap))
            .min(5.0 / (72.0 * c_hi_hat))
            .min(c_hat);
        TrichotomyConstants {
            reconstruct_gap,
            reconstruct_tail: 7.0 * c_hi_true,
            anti_threshold: (3.0 * c_hi_hat - 2.0 * c_hat) / (3.0 * c_hi_hat),
            anti_tail: 78.0 * c_hi_true * c_hi_true,
            delta0,
        }
    }

    pub fn good_threshold(&self, delta: f64) -> f64 {
        1.0 - self.reconstruct_gap * delta * delta
    }
}

impl Default for TrichotomyConstants {
    fn default() -> Self {
        default_constants()
    }
}

/// Constants for box coefficients `1/4` and `1/2` on both boxes.
pub fn default_constants() -> TrichotomyConstants {
    TrichotomyConstants {
        reconstruct_gap: 80.0,
        reconstruct_tail: 3.5,
        anti_threshold: 2.0 / 3.0,
        anti_tail: 19.5,
        delta0: 1.0 / 1190.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Good,
    Moderate,
    Severe,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Good => "good",
            Tier::Moderate => "moderate",
            Tier::Severe => "severe",
        }
    }
}

/// Classifies the unsigned magnetization `sigma_u * z_u`. When the two
/// thresholds overlap (large delta) a severe failure is never reported as good.
pub fn classify_trichotomy(
    sigma_u: i8,
    z_u: f64,
    delta: f64,
    consts: &TrichotomyConstants,
) -> Tier {
    let unsigned = sigma_u as f64 * z_u;
    if unsigned <= -consts.anti_threshold {
        Tier::Severe
    } else if unsigned >= consts.good_threshold(delta) {
        Tier::Good
    } else {
        Tier::Moderate
    }
}
