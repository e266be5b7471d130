//! Newick reading and writing.
//!
//! Branch lengths are `l = -ln theta`. A degree-2 root is collapsed by fusing
//! its two edges, so the lengths add and the thetas multiply. Internal node
//! labels are kept; `[...]` comments are skipped.

use cfn_core::{whole_tree_view, EdgeParameters, NodeId, RootedView, TreeTopology};

use crate::error::{CfnError, Result};

struct Parsed {
    label: Option<String>,
    parent: Option<usize>,
    length: Option<f64>,
    children: Vec<usize>,
    pos: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T> {
    Err(CfnError::Newick {
        pos,
        msg: msg.into(),
    })
}

impl Lexer<'_> {
    fn skip_blank(&mut self) -> Result<()> {
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'[' {
                let start = self.pos;
                match self.src[self.pos..].iter().position(|&b| b == b']') {
                    Some(off) => self.pos += off + 1,
                    None => return err(start, "unterminated comment"),
                }
            } else {
                break;
            }
        }
        Ok(())
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn label(&mut self) -> Result<String> {
        if self.peek() == Some(b'\'') {
            let start = self.pos;
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return err(start, "unterminated quoted label"),
                    Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return String::from_utf8(out).or_else(|_| err(start, "label is not UTF-8"));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if b"()[]:;,'".contains(&c) || c.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        String::from_utf8(self.src[start..self.pos].to_vec())
            .or_else(|_| err(start, "label is not UTF-8"))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b".eE+-".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
            Ok(_) => err(
                start,
                format!("branch length {text} is negative or not finite"),
            ),
            Err(_) => err(start, "expected a branch length"),
        }
    }
}

fn parse_nodes(text: &str) -> Result<Vec<Parsed>> {
    let mut lx = Lexer {
        src: text.as_bytes(),
        pos: 0,
    };
    let mut nodes: Vec<Parsed> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    // The node that a following label or `:length` attaches to.
    let mut current: Option<usize> = None;
    let mut expect_node = true;

    let new_node = |nodes: &mut Vec<Parsed>, parent: Option<usize>, pos: usize| {
        let id = nodes.len();
        nodes.push(Parsed {
            label: None,
            parent,
            length: None,
            children: Vec::new(),
            pos,
        });
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        id
    };

    loop {
        lx.skip_blank()?;
        let pos = lx.pos;
        let Some(c) = lx.peek() else {
            return err(pos, "missing terminating ';'");
        };
        match c {
            b'(' => {
                if !expect_node {
                    return err(pos, "unexpected '('");
                }
                if open.is_empty() && !nodes.is_empty() {
                    return err(pos, "text after the tree");
                }
                lx.pos += 1;
                let id = new_node(&mut nodes, open.last().copied(), pos);
                open.push(id);
                current = None;
            }
            b',' | b')' => {
                if open.is_empty() {
                    return err(pos, format!("unbalanced '{}'", c as char));
                }
                if expect_node {
                    new_node(&mut nodes, open.last().copied(), pos);
                }
                lx.pos += 1;
                if c == b',' {
                    expect_node = true;
                    current = None;
                } else {
                    current = open.pop();
                    expect_node = false;
                }
            }
            b':' => {
                lx.pos += 1;
                let Some(n) = current.or_else(|| {
                    expect_node.then(|| new_node(&mut nodes, open.last().copied(), pos))
                }) else {
                    return err(pos, "length without a node");
                };
                expect_node = false;
                current = Some(n);
                if nodes[n].length.is_some() {
                    return err(pos, "second branch length for one node");
                }
                lx.skip_blank()?;
                nodes[n].length = Some(lx.number()?);
            }
            b';' => {
                if !open.is_empty() {
                    return err(pos, "unclosed '('");
                }
                if nodes.is_empty() {
                    return err(pos, "empty tree");
                }
                lx.pos += 1;
                lx.skip_blank()?;
                if lx.pos != lx.src.len() {
                    return err(lx.pos, "text after ';'");
                }
                return Ok(nodes);
            }
            b']' => return err(pos, "unbalanced ']'"),
            _ => {
                if expect_node {
                    if open.is_empty() && !nodes.is_empty() {
                        return err(pos, "text after the tree");
                    }
                    let id = new_node(&mut nodes, open.last().copied(), pos);
                    nodes[id].label = Some(lx.label()?);
                    current = Some(id);
                    expect_node = false;
                } else {
                    match current {
                        Some(n) if nodes[n].label.is_none() && nodes[n].length.is_none() => {
                            nodes[n].label = Some(lx.label()?);
                        }
                        _ => return err(pos, "unexpected label"),
                    }
                }
            }
        }
    }
}

/// Parses one Newick tree into an unrooted binary topology and its thetas.
pub fn parse_newick(text: &str) -> Result<(TreeTopology, EdgeParameters)> {
    let nodes = parse_nodes(text)?;
    let root = &nodes[0];
    let length = |i: usize| {
        nodes[i]
            .length
            .map(Ok)
            .unwrap_or_else(|| err(nodes[i].pos, "missing branch length"))
    };
    for (i, n) in nodes.iter().enumerate().skip(1) {
        if !(n.children.is_empty() || n.children.len() == 2) {
            return err(
                n.pos,
                format!(
                    "node {i} has {} children; tree must be binary",
                    n.children.len()
                ),
            );
        }
    }
    let collapse = match root.children.len() {
        2 => true,
        3 => false,
        k => return err(root.pos, format!("root has {k} children; expected 2 or 3")),
    };
    // New ids skip the collapsed root.
    let offset = usize::from(collapse);
    let id = |i: usize| NodeId(i - offset);
    let mut edges = Vec::with_capacity(nodes.len());
    let mut lengths = Vec::with_capacity(nodes.len());
    if collapse {
        let (a, b) = (root.children[0], root.children[1]);
        edges.push((id(a), id(b)));
        lengths.push(length(a)? + length(b)?);
    }
    for (i, n) in nodes.iter().enumerate().skip(1) {
        match n.parent {
            Some(0) if collapse => {}
            Some(p) => {
                edges.push((id(p), id(i)));
                lengths.push(length(i)?);
            }
            None => unreachable!("only the first node is parentless"),
        }
    }
    let labels = nodes.iter().skip(offset).map(|n| n.label.clone()).collect();
    let tree = TreeTopology::from_edges(nodes.len() - offset, edges, labels)?;
    let params = EdgeParameters::from_lengths(&lengths)?;
    Ok((tree, params))
}

fn quote(label: &str) -> String {
    let plain = !label.is_empty()
        && label
            .bytes()
            .all(|c| !(b"()[]:;,'".contains(&c) || c.is_ascii_whitespace()));
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Length rounded to 12 significant digits, printed in shortest form.
fn format_length(theta: f64) -> Result<String> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(CfnError::Input(format!(
            "theta {theta} has no branch length"
        )));
    }
    let l = -theta.ln();
    let rounded: f64 = format!("{l:.11e}").parse().expect("formatted float");
    Ok(format!("{}", rounded.max(0.0)))
}

/// Writes the part of `tree` covered by `view`. A root with two children
/// becomes a degree-2 Newick root.
pub fn write_view(
    tree: &TreeTopology,
    view: &RootedView,
    params: &EdgeParameters,
) -> Result<String> {
    enum Step {
        Enter(NodeId),
        Leave(NodeId),
        Comma,
    }
    let mut out = String::new();
    // Explicit stack so deep caterpillars do not recurse.
    let mut stack = vec![Step::Enter(view.root())];
    while let Some(step) = stack.pop() {
        let v = match step {
            Step::Comma => {
                out.push(',');
                continue;
            }
            Step::Enter(v) if !view.children(v).is_empty() => {
                out.push('(');
                stack.push(Step::Leave(v));
                for (k, &(c, _)) in view.children(v).iter().enumerate().rev() {
                    stack.push(Step::Enter(c));
                    if k > 0 {
                        stack.push(Step::Comma);
                    }
                }
                continue;
            }
            Step::Enter(v) => v,
            Step::Leave(v) => {
                out.push(')');
                v
            }
        };
        if let Some(l) = tree.label(v) {
            out.push_str(&quote(l));
        }
        if let Some((_, e)) = view.parent(v) {
            out.push(':');
            out.push_str(&format_length(params.theta(e))?);
        }
    }
    out.push(';');
    Ok(out)
}

/// Writes the whole tree rooted at its default (internal) root.
pub fn write_newick(tree: &TreeTopology, params: &EdgeParameters) -> Result<String> {
    if params.len() != tree.edge_count() {
        return Err(cfn_core::Error::ParameterCount {
            expected: tree.edge_count(),
            got: params.len(),
        }
        .into());
    }
    if tree.node_count() == 2 {
        let name = |v| tree.label(NodeId(v)).map(quote).unwrap_or_default();
        let l = format_length(params.theta(cfn_core::EdgeId(0)))?;
        return Ok(format!("({}:{l},{}:0);", name(0), name(1)));
    }
    let view = whole_tree_view(tree, tree.default_root())?;
    write_view(tree, &view, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfn_core::{random_binary_tree, stream_rng, EdgeId};
    use rand::Rng;

    fn theta0(p: &EdgeParameters) -> f64 {
        p.theta(EdgeId(0))
    }

    #[test]
    fn two_leaves_collapse() {
        let (t, p) = parse_newick("(A:0.1,B:0.1);").unwrap();
        assert_eq!((t.node_count(), t.edge_count()), (2, 1));
        assert!((theta0(&p) - (-0.2f64).exp()).abs() < 1e-15);
        assert_eq!(t.label(t.leaves()[0]), Some("A"));
        let (_, p) = parse_newick("(A:0.0,B:0.0);").unwrap();
        assert_eq!(theta0(&p), 1.0);
    }

    #[test]
    fn quartet_collapse() {
        let (t, p) = parse_newick("((A:0.1,B:0.1):0.1,(C:0.1,D:0.1):0.1);").unwrap();
        assert_eq!((t.leaf_count(), t.edge_count()), (4, 5));
        let a = t.node_by_label("A").unwrap();
        let c = t.node_by_label("C").unwrap();
        let (x, y) = (t.neighbors(a)[0].0, t.neighbors(c)[0].0);
        let inner = t.edge_between(x, y).unwrap();
        assert!((p.length(inner).unwrap() - 0.2).abs() < 1e-15);
        let roots = parse_newick("(A:0.1,B:0.2,(C:0.3,D:0.4)x:0.5);").unwrap();
        assert_eq!(roots.0.edge_count(), 5);
        assert_eq!(roots.0.label(NodeId(3)), Some("x"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [
            ("(A:0.1,B:0.1)", 13),
            ("(A:0.1,B:0.1;", 12),
            ("(A:0.1,B);", 7),
            ("(A:0.1,B:-1);", 9),
            ("(A:0.1,B:0.1,C:0.1,D:0.1);", 0),
            ("((A:1,B:1,C:1):1,D:1);", 1),
            ("(A:0.1,B:0.1); x", 15),
            ("(A:0.1,B:abc);", 9),
        ];
        for (text, pos) in cases {
            match parse_newick(text) {
                Err(CfnError::Newick { pos: p, .. }) => assert_eq!(p, pos, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_newick("A;").is_err());
        assert!(parse_newick("(A:inf,B:1);").is_err());
    }

    #[test]
    fn quoting_and_comments() {
        let (t, _) = parse_newick("('a b':1[c],'it''s':2)[root];").unwrap();
        assert_eq!(t.label(t.leaves()[0]), Some("a b"));
        assert_eq!(t.label(t.leaves()[1]), Some("it's"));
        let back = write_newick(&t, &EdgeParameters::constant(1, 0.5).unwrap()).unwrap();
        assert_eq!(back.matches('\'').count(), 6);
        assert_eq!(
            parse_newick(&back).unwrap().0.label(NodeId(1)),
            Some("it's")
        );
    }

    #[test]
    fn round_trip() {
        let mut rng = stream_rng(5, 0);
        for n in [2, 3, 4, 10, 57] {
            let t = random_binary_tree(n, &mut rng).unwrap();
            let p = EdgeParameters::new(
                (0..t.edge_count())
                    .map(|_| rng.random_range(0.05..=1.0))
                    .collect(),
            )
            .unwrap();
            let text = write_newick(&t, &p).unwrap();
            let (t2, p2) = parse_newick(&text).unwrap();
            assert_eq!(t2.leaf_count(), n);
            assert_eq!(write_newick(&t2, &p2).unwrap(), text);
            // Match edges through the leaf bipartitions they induce.
            for (e, &(a, b)) in t.edges().iter().enumerate() {
                let side = |tree: &TreeTopology, x: NodeId, y: NodeId| {
                    let v = cfn_core::descendant_subtree(tree, x, y).unwrap();
                    let mut ls: Vec<String> = v
                        .leaves()
                        .iter()
                        .map(|&l| tree.label(l).unwrap().to_string())
                        .collect();
                    ls.sort();
                    ls
                };
                let target = side(&t, a, b);
                let found =
                    t2.edges().iter().enumerate().find(|(_, &(c, d))| {
                        side(&t2, c, d) == target || side(&t2, d, c) == target
                    });
                let (e2, _) = found.expect("bipartition preserved");
                // Lengths keep 12 significant digits.
                assert!((p.theta(EdgeId(e)) - p2.theta(EdgeId(e2))).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn unit_theta_writes_zero() {
        let (t, _) = parse_newick("(A:1,B:1);").unwrap();
        let s = write_newick(&t, &EdgeParameters::constant(1, 1.0).unwrap()).unwrap();
        assert_eq!(s, "(A:0,B:0);");
        assert!(write_newick(&t, &EdgeParameters::constant(1, 0.0).unwrap()).is_err());
    }

    #[test]
    fn rooted_experiment_view() {
        let (t, v) = cfn_core::experiment_tree(cfn_core::ExperimentKind::Complete, 3).unwrap();
        let p = EdgeParameters::constant(t.edge_count(), 0.9).unwrap();
        let text = write_view(&t, &v, &p).unwrap();
        let (t2, _) = parse_newick(&text).unwrap();
        assert_eq!(t2.leaf_count(), 8);
    }
}
