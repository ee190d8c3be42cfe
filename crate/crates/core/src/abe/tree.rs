use std::collections::BTreeSet;
use std::fmt;

use crate::codec::{DecodeError, Reader, Writer};

use super::AbeError;

const MAX_DEPTH: usize = 32;
const MAX_NODES: usize = 4096;

const TAG_LEAF: u8 = 0;
const TAG_GATE: u8 = 1;

/// A set of attribute strings held by a key.
pub type AttributeSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(String),
    /// Satisfied when at least `threshold` children are.
    Gate { threshold: usize, children: Vec<Node> },
}

impl Node {
    pub fn leaf(attr: impl Into<String>) -> Self {
        Node::Leaf(attr.into())
    }

    pub fn gate(threshold: usize, children: Vec<Node>) -> Self {
        Node::Gate { threshold, children }
    }

    pub fn and(children: Vec<Node>) -> Self {
        Node::Gate {
            threshold: children.len(),
            children,
        }
    }

    pub fn or(children: Vec<Node>) -> Self {
        Node::Gate {
            threshold: 1,
            children,
        }
    }

    fn validate(&self, depth: usize, count: &mut usize) -> Result<(), AbeError> {
        *count += 1;
        if depth > MAX_DEPTH || *count > MAX_NODES {
            return Err(AbeError::InvalidTree("tree too large".into()));
        }
        match self {
            Node::Leaf(attr) if attr.is_empty() => Err(AbeError::InvalidTree("empty attribute".into())),
            Node::Leaf(_) => Ok(()),
            Node::Gate { threshold, children } => {
                if children.is_empty() {
                    return Err(AbeError::InvalidTree("gate without children".into()));
                }
                if *threshold == 0 || *threshold > children.len() {
                    return Err(AbeError::InvalidTree(format!(
                        "threshold {threshold} outside 1..={}",
                        children.len()
                    )));
                }
                children.iter().try_for_each(|c| c.validate(depth + 1, count))
            }
        }
    }

    fn satisfied(&self, attrs: &AttributeSet) -> bool {
        match self {
            Node::Leaf(attr) => attrs.contains(attr),
            Node::Gate { threshold, children } => {
                children.iter().filter(|c| c.satisfied(attrs)).take(*threshold).count() == *threshold
            }
        }
    }

    fn write(&self, w: &mut Writer) {
        match self {
            Node::Leaf(attr) => {
                w.u8(TAG_LEAF).string(attr);
            }
            Node::Gate { threshold, children } => {
                w.u8(TAG_GATE).u16(*threshold as u16).u16(children.len() as u16);
                for c in children {
                    c.write(w);
                }
            }
        }
    }

    fn read(r: &mut Reader<'_>, depth: usize, count: &mut usize) -> Result<Node, AbeError> {
        *count += 1;
        if depth > MAX_DEPTH || *count > MAX_NODES {
            return Err(AbeError::InvalidTree("tree too large".into()));
        }
        match r.u8()? {
            TAG_LEAF => Ok(Node::Leaf(r.string()?)),
            TAG_GATE => {
                let threshold = r.u16()? as usize;
                let arity = r.u16()? as usize;
                let children = (0..arity)
                    .map(|_| Node::read(r, depth + 1, count))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Node::Gate { threshold, children })
            }
            tag => Err(DecodeError::invalid(format!("unknown tree node tag {tag}")).into()),
        }
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Node::Leaf(a) => out.push(a),
            Node::Gate { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Gate { children, .. } => 1 + children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Leaf(a) => write!(f, "{a}"),
            Node::Gate { threshold, children } => {
                if *threshold == children.len() {
                    write!(f, "and(")?;
                } else if *threshold == 1 {
                    write!(f, "or(")?;
                } else {
                    write!(f, "atleast({threshold}, ")?;
                }
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A validated threshold-gate access policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AccessTree {
    root: Node,
}

impl AccessTree {
    pub fn new(root: Node) -> Result<Self, AbeError> {
        root.validate(1, &mut 0)?;
        Ok(AccessTree { root })
    }

    pub fn leaf(attr: impl Into<String>) -> Result<Self, AbeError> {
        Self::new(Node::leaf(attr))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Leaf attributes in preorder; duplicates are kept.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn is_satisfied_by(&self, attrs: &AttributeSet) -> bool {
        self.root.satisfied(attrs)
    }

    /// Preorder encoding: leaf = tag, attribute; gate = tag, threshold, arity.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        self.root.write(w);
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let tree = Self::read(&mut r)?;
        r.finish()?;
        Ok(tree)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, AbeError> {
        Self::new(Node::read(r, 1, &mut 0)?)
    }
}

impl fmt::Display for AccessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Recursive satisfaction check: a leaf holds when its attribute is in
/// `attrs`, a gate when at least `threshold` children hold.
pub fn tree_satisfied(tree: &AccessTree, attrs: &AttributeSet) -> bool {
    tree.is_satisfied_by(attrs)
}

/// Builds an attribute set from string slices.
pub fn attributes<I, S>(attrs: I) -> AttributeSet
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    attrs.into_iter().map(Into::into).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(a: &str) -> Node {
        Node::leaf(a)
    }

    /// Independent evaluator: counts satisfied children via an explicit
    /// stack instead of recursion.
    fn stack_eval(node: &Node, attrs: &AttributeSet) -> bool {
        enum Frame<'a> {
            Visit(&'a Node),
            Reduce(usize, usize),
        }
        let mut work = vec![Frame::Visit(node)];
        let mut values: Vec<bool> = Vec::new();
        while let Some(frame) = work.pop() {
            match frame {
                Frame::Visit(Node::Leaf(a)) => values.push(attrs.contains(a)),
                Frame::Visit(Node::Gate { threshold, children }) => {
                    work.push(Frame::Reduce(*threshold, children.len()));
                    for c in children.iter().rev() {
                        work.push(Frame::Visit(c));
                    }
                }
                Frame::Reduce(threshold, arity) => {
                    let start = values.len() - arity;
                    let hits = values.drain(start..).filter(|&v| v).count();
                    values.push(hits >= threshold);
                }
            }
        }
        values.pop().unwrap()
    }

    #[test]
    fn leaf_and_or() {
        let t = AccessTree::leaf("x").unwrap();
        assert!(t.is_satisfied_by(&attributes(["x"])));
        assert!(!t.is_satisfied_by(&attributes(["y"])));
        let or = AccessTree::new(Node::or(vec![leaf("a"), leaf("b")])).unwrap();
        assert!(or.is_satisfied_by(&attributes(["b"])));
    }

    #[test]
    fn two_of_three_against_brute_force() {
        let t = AccessTree::new(Node::gate(2, vec![leaf("a"), leaf("b"), leaf("c")])).unwrap();
        let universe = ["a", "b", "c"];
        for mask in 0u8..8 {
            let attrs: AttributeSet = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| a.to_string())
                .collect();
            assert_eq!(t.is_satisfied_by(&attrs), mask.count_ones() >= 2);
            assert_eq!(t.is_satisfied_by(&attrs), stack_eval(t.root(), &attrs));
        }
        assert!(t.is_satisfied_by(&attributes(["a", "c"])));
        assert!(!t.is_satisfied_by(&attributes(["a"])));
    }

    #[test]
    fn rejects_malformed_trees() {
        assert!(AccessTree::leaf("").is_err());
        assert!(AccessTree::new(Node::gate(0, vec![leaf("a")])).is_err());
        assert!(AccessTree::new(Node::gate(3, vec![leaf("a"), leaf("b")])).is_err());
        assert!(AccessTree::new(Node::gate(1, vec![])).is_err());
    }

    #[test]
    fn preorder_encoding() {
        let t = AccessTree::new(Node::and(vec![leaf("a"), Node::or(vec![leaf("b"), leaf("c")])])).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..5], &[TAG_GATE, 0, 2, 0, 2]);
        assert_eq!(AccessTree::from_bytes(&bytes).unwrap(), t);
        assert!(AccessTree::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert_eq!(t.to_string(), "and(a, or(b, c))");
        assert_eq!(t.leaves(), vec!["a", "b", "c"]);
        assert_eq!(t.depth(), 3);
    }

    #[test]
    fn monotone_in_attributes() {
        let t = AccessTree::new(Node::gate(
            2,
            vec![leaf("a"), Node::and(vec![leaf("b"), leaf("c")]), leaf("d")],
        ))
        .unwrap();
        let universe = ["a", "b", "c", "d", "e"];
        for mask in 0u32..32 {
            let base: AttributeSet = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| a.to_string())
                .collect();
            if t.is_satisfied_by(&base) {
                for extra in universe {
                    let mut more = base.clone();
                    more.insert(extra.to_string());
                    assert!(t.is_satisfied_by(&more));
                }
            }
        }
    }
}
