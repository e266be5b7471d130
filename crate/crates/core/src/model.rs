//! Edge parameters, parameter boxes, spin configurations and sampling.
//!
//! Each edge is a binary symmetric channel flipping the spin with
//! probability `p = (1 - theta) / 2`; `theta` is the second eigenvalue of the
//! channel and `-ln theta` the branch length.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tree::{whole_tree_view, EdgeId, NodeId, RootedView, TreeTopology};

/// Per-edge second eigenvalues, indexed by [`EdgeId`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeParameters {
    theta: Vec<f64>,
}

impl EdgeParameters {
    /// Accepts any finite values in `[-1, 1]`.
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        for (i, &t) in theta.iter().enumerate() {
            if !(-1.0..=1.0).contains(&t) {
                return Err(Error::ParameterOutOfRange {
                    edge: Some(EdgeId(i)),
                    value: t,
                    domain: "[-1, 1]",
                });
            }
        }
        Ok(EdgeParameters { theta })
    }

    pub fn constant(edges: usize, theta: f64) -> Result<Self> {
        Self::new(vec![theta; edges])
    }

    pub fn from_lengths(lengths: &[f64]) -> Result<Self> {
        let theta = lengths
            .iter()
            .map(|&l| convert(l, Scale::Length, Scale::Theta))
            .collect::<Result<Vec<_>>>()?;
        Self::new(theta)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    #[inline]
    pub fn theta(&self, edge: EdgeId) -> f64 {
        self.theta[edge.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    /// Flip probability of the edge.
    pub fn p(&self, edge: EdgeId) -> f64 {
        (1.0 - self.theta[edge.0]) / 2.0
    }

    /// Branch length `-ln theta`; only defined for `theta > 0`.
    pub fn length(&self, edge: EdgeId) -> Result<f64> {
        convert(self.theta[edge.0], Scale::Theta, Scale::Length).map_err(|_| {
            Error::ParameterOutOfRange {
                edge: Some(edge),
                value: self.theta[edge.0],
                domain: "(0, 1] for a branch length",
            }
        })
    }

    pub fn set(&mut self, edge: EdgeId, theta: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&theta) {
            return Err(Error::ParameterOutOfRange {
                edge: Some(edge),
                value: theta,
                domain: "[-1, 1]",
            });
        }
        self.theta[edge.0] = theta;
        Ok(())
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &EdgeParameters) -> f64 {
        self.theta
            .iter()
            .zip(&other.theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, tree: &TreeTopology) -> Result<()> {
        if self.theta.len() == tree.edge_count() {
            Ok(())
        } else {
            Err(Error::ParameterCount {
                expected: tree.edge_count(),
                got: self.theta.len(),
            })
        }
    }
}

/// The per-edge interval `[1 - 2 c_hi delta, 1 - 2 c_lo delta]`, i.e. flip
/// probabilities between `c_lo delta` and `c_hi delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBox {
    pub delta: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl ParameterBox {
    pub const DEFAULT_C_LO: f64 = 0.25;
    pub const DEFAULT_C_HI: f64 = 0.5;

    pub fn new(delta: f64, c_lo: f64, c_hi: f64) -> Result<Self> {
        let b = ParameterBox { delta, c_lo, c_hi };
        b.validate()?;
        Ok(b)
    }

    /// Box with `c_lo = 1/4`, `c_hi = 1/2`, so theta lies in `[1 - delta, 1 - delta/2]`.
    pub fn with_default_constants(delta: f64) -> Result<Self> {
        Self::new(delta, Self::DEFAULT_C_LO, Self::DEFAULT_C_HI)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta.is_finite()
            && self.delta > 0.0
            && self.c_lo > 0.0
            && self.c_lo < self.c_hi
            && self.c_hi * self.delta < 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidBox)
        }
    }

    /// Closed theta interval `(lo, hi)`.
    pub fn interval(&self) -> (f64, f64) {
        (
            1.0 - 2.0 * self.c_hi * self.delta,
            1.0 - 2.0 * self.c_lo * self.delta,
        )
    }

    pub fn contains(&self, theta: f64) -> bool {
        let (lo, hi) = self.interval();
        (lo..=hi).contains(&theta)
    }

    /// Maps `u` in `[0, 1]` linearly onto the theta interval.
    pub fn theta_at(&self, u: f64) -> f64 {
        let (lo, hi) = self.interval();
        lo + (hi - lo) * u
    }

    /// Same constants, different scale.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(delta, self.c_lo, self.c_hi)
    }

    /// True when every theta interval of `self` lies inside `outer`'s for the same delta.
    pub fn nested_in(&self, outer: &ParameterBox) -> bool {
        let (a, b) = self.interval();
        let (c, d) = outer.interval();
        c <= a && b <= d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// Every node carries a spin.
    Full,
    /// Only (some) leaves carry a spin.
    Leaves,
}

/// Node-indexed spins. Entries are `+1` or `-1`; in a leaves-only
/// configuration unobserved nodes hold `0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    scope: Scope,
    values: Vec<i8>,
}

impl SpinConfig {
    pub fn full(values: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad));
        }
        Ok(SpinConfig {
            scope: Scope::Full,
            values,
        })
    }

    /// Leaf spins given in the order of [`TreeTopology::leaves`].
    pub fn from_leaf_values(tree: &TreeTopology, leaf_values: &[i8]) -> Result<Self> {
        if leaf_values.len() != tree.leaf_count() {
            return Err(Error::InconsistentDataset);
        }
        let mut values = vec![0i8; tree.node_count()];
        for (&leaf, &s) in tree.leaves().iter().zip(leaf_values) {
            if s != 1 && s != -1 {
                return Err(Error::InvalidSpin(s));
            }
            values[leaf.0] = s;
        }
        Ok(SpinConfig {
            scope: Scope::Leaves,
            values,
        })
    }

    /// Leaf spins for an explicit set of nodes.
    pub fn from_pairs(node_count: usize, pairs: &[(NodeId, i8)]) -> Result<Self> {
        let mut values = vec![0i8; node_count];
        for &(v, s) in pairs {
            if s != 1 && s != -1 {
                return Err(Error::InvalidSpin(s));
            }
            *values.get_mut(v.0).ok_or(Error::UnknownNode(v))? = s;
        }
        Ok(SpinConfig {
            scope: Scope::Leaves,
            values,
        })
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    #[inline]
    pub fn spin(&self, node: NodeId) -> Option<i8> {
        match self.values.get(node.0) {
            Some(&s) if s != 0 => Some(s),
            _ => None,
        }
    }

    /// Raw node-indexed values (`0` = unobserved).
    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Keeps only the tree's leaves.
    pub fn leaves_only(&self, tree: &TreeTopology) -> SpinConfig {
        let mut values = vec![0i8; self.values.len()];
        for &l in tree.leaves() {
            if let Some(&s) = self.values.get(l.0) {
                values[l.0] = s;
            }
        }
        SpinConfig {
            scope: Scope::Leaves,
            values,
        }
    }

    /// Leaf spins in the order of [`TreeTopology::leaves`].
    pub fn leaf_values(&self, tree: &TreeTopology) -> Result<Vec<i8>> {
        tree.leaves()
            .iter()
            .map(|&l| self.spin(l).ok_or(Error::MissingSpin(l)))
            .collect()
    }

    pub fn negated(&self) -> SpinConfig {
        SpinConfig {
            scope: self.scope,
            values: self.values.iter().map(|s| -s).collect(),
        }
    }
}

/// Exact law of the leaf spins of a view.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafDistribution {
    pub leaves: Vec<NodeId>,
    pub entries: Vec<(SpinConfig, f64)>,
}

impl LeafDistribution {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn probability_of(&self, spins: &SpinConfig) -> Option<f64> {
        self.entries
            .iter()
            .find(|(c, _)| c == spins)
            .map(|&(_, p)| p)
    }
}

/// Seeded generator for independent stream `stream` of a master seed.
///
/// ChaCha8 keyed by `seed_from_u64(seed)` with the 64-bit stream selector set
/// to `stream`. Experiments use one stream per replicate, so results do not
/// depend on how replicates are scheduled across threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws every theta independently and uniformly from the box interval.
pub fn sample_parameters<R: Rng + ?Sized>(
    tree: &TreeTopology,
    bx: &ParameterBox,
    rng: &mut R,
) -> Result<EdgeParameters> {
    bx.validate()?;
    let theta = (0..tree.edge_count())
        .map(|_| bx.theta_at(rng.random::<f64>()))
        .collect();
    Ok(EdgeParameters { theta })
}

/// True iff every theta lies in the closed box interval.
pub fn in_box(params: &EdgeParameters, bx: &ParameterBox) -> bool {
    params.as_slice().iter().all(|&t| bx.contains(t))
}

fn check_sampling_params(params: &EdgeParameters) -> Result<()> {
    for (i, &t) in params.as_slice().iter().enumerate() {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::ParameterOutOfRange {
                edge: Some(EdgeId(i)),
                value: t,
                domain: "(0, 1] for sampling",
            });
        }
    }
    Ok(())
}

/// Broadcasts spins from the view root down the view edges, writing one
/// entry per view node into the node-indexed `out`. Other entries are left
/// untouched.
pub fn broadcast_view<R: Rng + ?Sized>(
    view: &RootedView,
    params: &EdgeParameters,
    rng: &mut R,
    out: &mut [i8],
) {
    for &v in view.preorder() {
        out[v.0] = match view.parent(v) {
            None => {
                if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
            Some((p, e)) => {
                let flip = rng.random::<f64>() < (1.0 - params.theta(e)) / 2.0;
                if flip {
                    -out[p.0]
                } else {
                    out[p.0]
                }
            }
        };
    }
}

/// One full configuration: uniform spin at `anchor`, independent flips on
/// every edge going outwards.
pub fn broadcast_sample<R: Rng + ?Sized>(
    tree: &TreeTopology,
    params: &EdgeParameters,
    anchor: NodeId,
    rng: &mut R,
) -> Result<SpinConfig> {
    params.check_len(tree)?;
    check_sampling_params(params)?;
    let view = whole_tree_view(tree, anchor)?;
    let mut values = vec![1i8; tree.node_count()];
    broadcast_view(&view, params, rng, &mut values);
    Ok(SpinConfig {
        scope: Scope::Full,
        values,
    })
}

/// Leaf count limit for [`enumerate_leaf_distribution`].
pub const MAX_ENUMERATION_LEAVES: usize = 16;

/// Exact leaf law of a view, by summing
/// `P(tau) = 1/2 * prod_e (1 + tau_u tau_v theta_e) / 2` over every spin
/// assignment of the view's nodes. Cost is `2^(nodes)`, so in practice only
/// trees with a handful of leaves are cheap.
pub fn enumerate_leaf_distribution(
    view: &RootedView,
    params: &EdgeParameters,
) -> Result<LeafDistribution> {
    let leaves = view.leaves().to_vec();
    if leaves.len() > MAX_ENUMERATION_LEAVES {
        return Err(Error::TooManyLeaves {
            got: leaves.len(),
            max: MAX_ENUMERATION_LEAVES,
        });
    }
    let nodes = view.preorder();
    let pos = |v: NodeId| nodes.iter().position(|&w| w == v).unwrap();
    let edges: Vec<(usize, usize, f64)> = view
        .edges()
        .map(|(p, c, e)| (pos(p), pos(c), params.theta(e)))
        .collect();
    let leaf_bits: Vec<usize> = leaves.iter().map(|&l| pos(l)).collect();
    let mut mass = vec![0.0f64; 1 << leaves.len()];
    let spin = |mask: u64, i: usize| if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
    for mask in 0u64..(1u64 << nodes.len()) {
        let mut p = 0.5;
        for &(a, b, t) in &edges {
            p *= (1.0 + spin(mask, a) * spin(mask, b) * t) / 2.0;
        }
        let mut key = 0usize;
        for (j, &bit) in leaf_bits.iter().enumerate() {
            key |= ((mask >> bit & 1) as usize) << j;
        }
        mass[key] += p;
    }
    let node_count = view.tree_node_count();
    let entries = mass
        .into_iter()
        .enumerate()
        .map(|(key, p)| {
            let pairs: Vec<(NodeId, i8)> = leaves
                .iter()
                .enumerate()
                .map(|(j, &l)| (l, if key >> j & 1 == 1 { -1 } else { 1 }))
                .collect();
            (
                SpinConfig::from_pairs(node_count, &pairs).expect("valid spins"),
                p,
            )
        })
        .collect();
    Ok(LeafDistribution { leaves, entries })
}

/// Parameter scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Second eigenvalue, `[-1, 1]`.
    Theta,
    /// Flip probability; as an input restricted to `[0, 1/2)`.
    P,
    /// Branch length `-ln theta`, `[0, inf)`.
    Length,
}

/// Converts between theta, flip probability and branch length.
pub fn convert(value: f64, from: Scale, to: Scale) -> Result<f64> {
    let out_of = |domain| Error::ParameterOutOfRange {
        edge: None,
        value,
        domain,
    };
    let theta = match from {
        Scale::Theta if (-1.0..=1.0).contains(&value) => value,
        Scale::Theta => return Err(out_of("[-1, 1]")),
        Scale::P if (0.0..0.5).contains(&value) => 1.0 - 2.0 * value,
        Scale::P => return Err(out_of("[0, 1/2)")),
        Scale::Length if value >= 0.0 && value.is_finite() => libm::exp(-value),
        Scale::Length => return Err(out_of("[0, inf)")),
    };
    match to {
        Scale::Theta => Ok(theta),
        Scale::P => Ok((1.0 - theta) / 2.0),
        Scale::Length if theta > 0.0 => Ok(-libm::log(theta)),
        Scale::Length => Err(Error::ParameterOutOfRange {
            edge: None,
            value: theta,
            domain: "(0, 1] for a branch length",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{descendant_subtree, experiment_tree, random_binary_tree, ExperimentKind};

    fn two_leaf() -> TreeTopology {
        TreeTopology::from_edges(2, vec![(NodeId(0), NodeId(1))], vec![]).unwrap()
    }

    #[test]
    fn conversions() {
        assert!((convert(0.05, Scale::P, Scale::Theta).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(convert(1.0, Scale::Theta, Scale::Length).unwrap(), 0.0);
        let t = convert(0.2, Scale::Length, Scale::Theta).unwrap();
        assert!((t - 0.818_730_753_077_981_9).abs() < 1e-15);
        assert!(convert(0.0, Scale::Theta, Scale::Length).is_err());
        assert!(convert(-0.3, Scale::Theta, Scale::Length).is_err());
        assert!(convert(0.5, Scale::P, Scale::Theta).is_err());
        assert!(convert(-0.1, Scale::P, Scale::Theta).is_err());
        let l = convert(0.05, Scale::P, Scale::Length).unwrap();
        assert!((convert(l, Scale::Length, Scale::P).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn box_sampling_stays_inside() {
        let mut rng = stream_rng(1, 0);
        let t = random_binary_tree(30, &mut rng).unwrap();
        let bx = ParameterBox::new(0.05, 0.5, 1.0).unwrap();
        assert_eq!(bx.interval(), (0.9, 0.95));
        let p = sample_parameters(&t, &bx, &mut rng).unwrap();
        assert!(p.as_slice().iter().all(|&x| (0.9..=0.95).contains(&x)));
        assert!(in_box(&p, &bx));

        let again = sample_parameters(&t, &bx, &mut stream_rng(5, 2)).unwrap();
        let same = sample_parameters(&t, &bx, &mut stream_rng(5, 2)).unwrap();
        assert_eq!(again, same);

        let tiny = ParameterBox::with_default_constants(1e-12).unwrap();
        let p = sample_parameters(&t, &tiny, &mut rng).unwrap();
        assert!(p.as_slice().iter().all(|&x| x > 1.0 - 1e-11));
    }

    #[test]
    fn box_membership_and_validation() {
        let bx = ParameterBox::new(0.05, 0.5, 1.0).unwrap();
        let mut p = EdgeParameters::constant(5, 0.92).unwrap();
        assert!(in_box(&p, &bx));
        p.set(EdgeId(3), 0.89).unwrap();
        assert!(!in_box(&p, &bx));
        assert!(in_box(&EdgeParameters::constant(1, 0.9).unwrap(), &bx));

        assert_eq!(ParameterBox::new(0.1, 0.5, 0.25), Err(Error::InvalidBox));
        assert_eq!(ParameterBox::new(0.6, 0.25, 1.0), Err(Error::InvalidBox));
        assert_eq!(ParameterBox::new(0.0, 0.25, 0.5), Err(Error::InvalidBox));

        let inner = ParameterBox::new(0.1, 0.3, 0.4).unwrap();
        let outer = ParameterBox::new(0.1, 0.25, 0.5).unwrap();
        assert!(inner.nested_in(&outer));
        assert!(!outer.nested_in(&inner));
    }

    #[test]
    fn noiseless_edge_copies_spin() {
        let t = two_leaf();
        let p = EdgeParameters::constant(1, 1.0).unwrap();
        let mut rng = stream_rng(3, 0);
        for _ in 0..200 {
            let s = broadcast_sample(&t, &p, NodeId(0), &mut rng).unwrap();
            assert_eq!(s.spin(NodeId(0)), s.spin(NodeId(1)));
        }
        let bad = EdgeParameters::constant(1, 0.0).unwrap();
        assert!(broadcast_sample(&t, &bad, NodeId(0), &mut rng).is_err());
    }

    #[test]
    fn single_channel_agreement_rate() {
        let t = two_leaf();
        let p = EdgeParameters::constant(1, 0.8).unwrap();
        let mut rng = stream_rng(4, 0);
        let n = 100_000;
        let agree = (0..n)
            .filter(|_| {
                let s = broadcast_sample(&t, &p, NodeId(0), &mut rng).unwrap();
                s.spin(NodeId(0)) == s.spin(NodeId(1))
            })
            .count();
        assert!((agree as f64 / n as f64 - 0.9).abs() < 0.01);
    }

    #[test]
    fn marginals_and_edge_correlations() {
        let mut rng = stream_rng(9, 0);
        let t = random_binary_tree(6, &mut rng).unwrap();
        let bx = ParameterBox::with_default_constants(0.3).unwrap();
        let p = sample_parameters(&t, &bx, &mut rng).unwrap();
        let n = 40_000;
        let mut mean = vec![0.0; t.node_count()];
        let mut corr = vec![0.0; t.edge_count()];
        for _ in 0..n {
            let s = broadcast_sample(&t, &p, NodeId(0), &mut rng).unwrap();
            for (v, m) in mean.iter_mut().enumerate() {
                *m += s.spin(NodeId(v)).unwrap() as f64;
            }
            for (e, c) in corr.iter_mut().enumerate() {
                let (a, b) = t.endpoints(EdgeId(e));
                *c += (s.spin(a).unwrap() * s.spin(b).unwrap()) as f64;
            }
        }
        let tol = 4.0 / (n as f64).sqrt();
        for m in mean {
            assert!((m / n as f64).abs() < tol);
        }
        for (e, c) in corr.iter().enumerate() {
            assert!((c / n as f64 - p.theta(EdgeId(e))).abs() < tol);
        }
    }

    #[test]
    fn enumeration_single_edge_and_noiseless_cherry() {
        let t = two_leaf();
        let view = whole_tree_view(&t, NodeId(0)).unwrap();
        let d =
            enumerate_leaf_distribution(&view, &EdgeParameters::constant(1, 0.8).unwrap()).unwrap();
        for (cfg, p) in &d.entries {
            let equal = cfg.spin(NodeId(0)) == cfg.spin(NodeId(1));
            let expect = if equal { 0.45 } else { 0.05 };
            assert!((p - expect).abs() < 1e-15);
        }

        let (_, cherry) = experiment_tree(ExperimentKind::Complete, 1).unwrap();
        let p = EdgeParameters::constant(3, 1.0).unwrap();
        let d = enumerate_leaf_distribution(&cherry, &p).unwrap();
        for (cfg, prob) in &d.entries {
            let equal = cfg.spin(NodeId(1)) == cfg.spin(NodeId(2));
            assert!((prob - if equal { 0.5 } else { 0.0 }).abs() < 1e-15);
        }
    }

    #[test]
    fn enumeration_normalizes() {
        let mut rng = stream_rng(21, 0);
        for n in 2..7 {
            let t = random_binary_tree(n, &mut rng).unwrap();
            let p = EdgeParameters::new(
                (0..t.edge_count())
                    .map(|_| rng.random_range(-0.99..0.99))
                    .collect(),
            )
            .unwrap();
            let (a, b) = t.endpoints(EdgeId(0));
            for view in [
                whole_tree_view(&t, a).unwrap(),
                descendant_subtree(&t, a, b).unwrap(),
            ] {
                let d = enumerate_leaf_distribution(&view, &p).unwrap();
                assert_eq!(d.entries.len(), 1 << view.leaves().len());
                assert!((d.total_mass() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_matches_sampling_frequencies() {
        let mut rng = stream_rng(33, 0);
        let t = random_binary_tree(4, &mut rng).unwrap();
        let bx = ParameterBox::with_default_constants(0.4).unwrap();
        let p = sample_parameters(&t, &bx, &mut rng).unwrap();
        let d = enumerate_leaf_distribution(&whole_tree_view(&t, NodeId(0)).unwrap(), &p).unwrap();
        let n = 50_000;
        let mut counts = vec![0usize; d.entries.len()];
        for _ in 0..n {
            let s = broadcast_sample(&t, &p, NodeId(0), &mut rng)
                .unwrap()
                .leaves_only(&t);
            let i = d
                .entries
                .iter()
                .position(|(c, _)| c.values() == s.values())
                .unwrap();
            counts[i] += 1;
        }
        for ((_, prob), c) in d.entries.iter().zip(counts) {
            let tol = 4.0 * (prob * (1.0 - prob) / n as f64).sqrt() + 1e-9;
            assert!((c as f64 / n as f64 - prob).abs() <= tol);
        }
    }
}
