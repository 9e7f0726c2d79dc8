//! Realized random splitting trees.
//!
//! A [`SplitTree`] is one sample path of the collision-resolution process:
//! the root holds the initial contenders and every collision node (two or
//! more users) carries exactly `d` subtrees, one per group in group order.
//! Trees are fully expanded eagerly so that all CRI evaluators consume the
//! identical realization — the whole point of the comparison is per-path
//! disagreement between evaluators on the same tree.
//!
//! Trees are immutable after generation and safe to share across threads.

use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::SplitPolicy;

/// Default bound on splitting depth. The continuation probability per level
/// is bounded away from 1 for any valid policy, so this is unreachable in
/// practice; it converts a theoretical non-termination into a clean error.
pub const DEFAULT_MAX_DEPTH: usize = 10_000;

pub(crate) const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub occupancy: u32,
    /// Parent index, `NO_NODE` at the root.
    pub parent: u32,
    /// Index of the first of `d` contiguous children, `NO_NODE` for leaves.
    pub first_child: u32,
}

/// A realized splitting tree stored as a flat arena in breadth-first order;
/// children of an internal node occupy `d` contiguous slots in group order.
#[derive(Debug, Clone)]
pub struct SplitTree {
    d: usize,
    nodes: Vec<Node>,
}

impl SplitTree {
    /// Generate a fully expanded random tree for `n` initial contenders.
    ///
    /// Every collision node is split multinomially per `policy`; all `d`
    /// children are generated even where early-stop semantics would skip
    /// them, so the Yu–Giannakis evaluator can visit them on the same path.
    pub fn generate<R: Rng + ?Sized>(
        n: u32,
        policy: &SplitPolicy,
        rng: &mut R,
        max_depth: usize,
    ) -> Result<Self> {
        if max_depth < 1 {
            return Err(Error::InvalidArgument(format!(
                "max_depth must be >= 1, got {max_depth}"
            )));
        }
        let d = policy.d();
        let mut nodes = vec![Node {
            occupancy: n,
            parent: NO_NODE,
            first_child: NO_NODE,
        }];
        let mut depths = vec![0u32; 1];
        let mut i = 0usize;
        // The arena grows in breadth-first order while `i` sweeps it.
        while i < nodes.len() {
            if nodes[i].occupancy >= 2 {
                let depth = depths[i] as usize;
                if depth >= max_depth {
                    return Err(Error::DepthExceeded { max_depth });
                }
                let occ = policy.sample_split(nodes[i].occupancy, rng);
                let first = nodes.len() as u32;
                nodes[i].first_child = first;
                for &c in occ.counts() {
                    nodes.push(Node {
                        occupancy: c,
                        parent: i as u32,
                        first_child: NO_NODE,
                    });
                    depths.push(depth as u32 + 1);
                }
            }
            i += 1;
        }
        Ok(Self { d, nodes })
    }

    /// Splitting factor of this tree.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of users at the root (initial contenders).
    pub fn root_occupancy(&self) -> u32 {
        self.nodes[0].occupancy
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of collision nodes (occupancy >= 2).
    pub fn internal_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.occupancy >= 2).count()
    }

    pub(crate) fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Children of node `i` as an index range, if it is a collision node.
    pub(crate) fn children(&self, i: usize) -> Option<std::ops::Range<usize>> {
        let first = self.nodes[i].first_child;
        (first != NO_NODE).then(|| first as usize..first as usize + self.d)
    }

    /// Check the structural invariants: children occupancies sum to the
    /// parent's, leaves hold at most one user, collision nodes are expanded.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for i in 0..self.nodes.len() {
            let node = &self.nodes[i];
            match self.children(i) {
                Some(range) => {
                    if node.occupancy < 2 {
                        return Err(format!("node {i} has children but occupancy < 2"));
                    }
                    let mut sum = 0u64;
                    for c in range {
                        if self.nodes[c].parent != i as u32 {
                            return Err(format!("node {c} has wrong parent link"));
                        }
                        sum += self.nodes[c].occupancy as u64;
                    }
                    if sum != node.occupancy as u64 {
                        return Err(format!(
                            "children of node {i} sum to {sum}, expected {}",
                            node.occupancy
                        ));
                    }
                }
                None => {
                    if node.occupancy >= 2 {
                        return Err(format!(
                            "collision node {i} (occupancy {}) is not expanded",
                            node.occupancy
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Render the tree as parenthesized pre-order occupancies, e.g.
    /// `2(1,1,0)` or `2(0,0,2(1,1,0))`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)]; // (node, children emitted)
        while let Some(&(idx, emitted)) = stack.last() {
            let node = &self.nodes[idx];
            if emitted == 0 {
                out.push_str(&node.occupancy.to_string());
                if node.first_child == NO_NODE {
                    stack.pop();
                    continue;
                }
                out.push('(');
            }
            if emitted == self.d {
                out.push(')');
                stack.pop();
                continue;
            }
            if emitted > 0 {
                out.push(',');
            }
            stack.last_mut().unwrap().1 += 1;
            stack.push((self.nodes[idx].first_child as usize + emitted, 0));
        }
        out
    }

    /// Parse the [`dump`](Self::dump) format back into a tree.
    ///
    /// The splitting factor is inferred from the child-list lengths (a
    /// single-leaf tree gets d = 2, which no evaluator ever inspects).
    /// Structural invariants are enforced.
    pub fn parse(text: &str) -> Result<Self> {
        let parsed = parse_nested(text)?;
        let d = infer_d(&parsed)?.unwrap_or(2);
        let tree = linearize(&parsed, d);
        tree.validate().map_err(Error::InvalidArgument)?;
        Ok(tree)
    }
}

struct Parsed {
    occupancy: u32,
    children: Vec<Parsed>,
}

fn parse_nested(text: &str) -> Result<Parsed> {
    let bad = |msg: &str| Error::InvalidArgument(format!("bad tree literal {text:?}: {msg}"));
    let bytes = text.trim().as_bytes();
    let mut pos = 0usize;
    let mut current: Option<Parsed> = None;
    let mut stack: Vec<Parsed> = Vec::new();
    while pos < bytes.len() {
        match bytes[pos] {
            b'0'..=b'9' => {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                if current.is_some() {
                    return Err(bad("number not separated by ',' or '('"));
                }
                let occupancy: u32 = text.trim()[start..pos]
                    .parse()
                    .map_err(|_| bad("occupancy out of range"))?;
                current = Some(Parsed {
                    occupancy,
                    children: Vec::new(),
                });
            }
            b'(' => {
                let node = current.take().ok_or_else(|| bad("'(' without a node"))?;
                stack.push(node);
                pos += 1;
            }
            b',' => {
                let node = current.take().ok_or_else(|| bad("',' without a node"))?;
                let parent = stack.last_mut().ok_or_else(|| bad("',' outside '('"))?;
                parent.children.push(node);
                pos += 1;
            }
            b')' => {
                let node = current.take().ok_or_else(|| bad("')' without a node"))?;
                let mut parent = stack.pop().ok_or_else(|| bad("unbalanced ')'"))?;
                parent.children.push(node);
                current = Some(parent);
                pos += 1;
            }
            c => {
                return Err(bad(&format!("unexpected character {:?}", c as char)));
            }
        }
    }
    if !stack.is_empty() {
        return Err(bad("unbalanced '('"));
    }
    current.ok_or_else(|| bad("empty input"))
}

fn infer_d(root: &Parsed) -> Result<Option<usize>> {
    let mut d = None;
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.children.is_empty() {
            continue;
        }
        match d {
            None => d = Some(node.children.len()),
            Some(expect) if expect != node.children.len() => {
                return Err(Error::InvalidArgument(format!(
                    "inconsistent child counts: {} vs {}",
                    expect,
                    node.children.len()
                )));
            }
            _ => {}
        }
        stack.extend(node.children.iter());
    }
    Ok(d)
}

fn linearize(root: &Parsed, d: usize) -> SplitTree {
    let mut nodes = vec![Node {
        occupancy: root.occupancy,
        parent: NO_NODE,
        first_child: NO_NODE,
    }];
    let mut queue = std::collections::VecDeque::from([(root, 0usize)]);
    while let Some((pnode, idx)) = queue.pop_front() {
        if pnode.children.is_empty() {
            continue;
        }
        nodes[idx].first_child = nodes.len() as u32;
        for child in &pnode.children {
            let child_idx = nodes.len();
            nodes.push(Node {
                occupancy: child.occupancy,
                parent: idx as u32,
                first_child: NO_NODE,
            });
            queue.push_back((child, child_idx));
        }
    }
    SplitTree { d, nodes }
}
