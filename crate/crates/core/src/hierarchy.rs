//! Atomic and composite classes arranged as a rooted tree.
//!
//! A hierarchy document is a JSON tree of `{ "name": ..., "children": [...] }`
//! records. Leaves omit `children`; their document order fixes the atomic class
//! indices `0..k`. Composites are listed in pre-order and include the root and
//! every atomic singleton. A node whose set equals an earlier node's set (a
//! unary chain) is folded into that earlier entry and keeps the deeper name.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::classset::ClassSet;
use crate::error::{Error, Result};

/// One node of a hierarchy document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<NodeDoc>>,
}

impl NodeDoc {
    pub fn leaf(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            children: None,
        }
    }

    pub fn node(name: impl Into<String>, children: Vec<NodeDoc>) -> Self {
        Self {
            name: name.into(),
            children: Some(children),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassHierarchy {
    k: usize,
    composites: Vec<ClassSet>,
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Atomic class -> composite index of its singleton.
    leaf_composite: Vec<usize>,
    class_names: Vec<String>,
}

impl ClassHierarchy {
    /// Parses and validates a JSON hierarchy document.
    pub fn from_json(text: &str) -> Result<Self> {
        let root: NodeDoc =
            serde_json::from_str(text).map_err(|e| Error::MalformedHierarchy(e.to_string()))?;
        Self::from_doc(&root)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_doc(root: &NodeDoc) -> Result<Self> {
        let mut class_names = Vec::new();
        let mut seen = HashSet::new();
        collect_leaves(root, &mut class_names, &mut seen)?;
        let k = class_names.len();

        let mut h = Self {
            k,
            composites: Vec::new(),
            names: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            leaf_composite: vec![usize::MAX; k],
            class_names,
        };
        let mut next_leaf = 0;
        h.visit(root, None, &mut next_leaf);
        h.validate()?;
        Ok(h)
    }

    // Pre-order insertion; returns the composite index of `node`.
    fn visit(&mut self, node: &NodeDoc, parent: Option<usize>, next_leaf: &mut usize) -> usize {
        match &node.children {
            None => {
                let atomic = *next_leaf;
                *next_leaf += 1;
                let set = ClassSet::singleton(self.k, atomic);
                let idx = match parent {
                    // Folded unary chain: the singleton is the parent itself.
                    Some(p) if self.composites[p] == set => {
                        self.names[p] = node.name.clone();
                        p
                    }
                    _ => self.push(set, node.name.clone(), parent),
                };
                self.leaf_composite[atomic] = idx;
                idx
            }
            Some(children) => {
                let set = subtree_set(node, self.k, *next_leaf);
                let idx = match parent {
                    Some(p) if self.composites[p] == set => {
                        self.names[p] = node.name.clone();
                        p
                    }
                    _ => self.push(set, node.name.clone(), parent),
                };
                for child in children {
                    self.visit(child, Some(idx), next_leaf);
                }
                idx
            }
        }
    }

    fn push(&mut self, set: ClassSet, name: String, parent: Option<usize>) -> usize {
        let idx = self.composites.len();
        self.composites.push(set);
        self.names.push(name);
        self.parent.push(parent);
        self.children.push(Vec::new());
        if let Some(p) = parent {
            self.children[p].push(idx);
        }
        idx
    }

    /// Checks the tree invariants: root is the full set, children partition
    /// their parent, exactly `k` distinct singleton leaves, no duplicate sets.
    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 {
            return Err(Error::InvalidHierarchy("hierarchy has no leaves".into()));
        }
        let m = self.composites.len();
        if self.names.len() != m || self.parent.len() != m || self.children.len() != m {
            return Err(Error::InvalidHierarchy("inconsistent table lengths".into()));
        }
        let roots: Vec<_> = (0..m).filter(|&i| self.parent[i].is_none()).collect();
        if roots.len() != 1 || !self.composites[roots[0]].is_full() {
            return Err(Error::InvalidHierarchy(
                "expected a single root covering every class".into(),
            ));
        }
        let mut distinct = HashSet::new();
        for (i, set) in self.composites.iter().enumerate() {
            if set.universe() != k || set.is_empty() {
                return Err(Error::InvalidHierarchy(format!(
                    "composite {i} is empty or sized wrongly"
                )));
            }
            if !distinct.insert(set) {
                return Err(Error::InvalidHierarchy(format!(
                    "composite {i} duplicates an earlier set"
                )));
            }
            let kids = &self.children[i];
            if kids.is_empty() {
                if set.len() != 1 {
                    return Err(Error::InvalidHierarchy(format!(
                        "leaf composite {i} is not a singleton"
                    )));
                }
                continue;
            }
            let mut union = ClassSet::empty(k);
            for &c in kids {
                if self.parent[c] != Some(i) || !union.is_disjoint(&self.composites[c]) {
                    return Err(Error::InvalidHierarchy(format!(
                        "children of composite {i} overlap or disagree on parent"
                    )));
                }
                union = union.union(&self.composites[c]);
            }
            if &union != set {
                return Err(Error::InvalidHierarchy(format!(
                    "children of composite {i} do not cover it"
                )));
            }
        }
        for (atomic, &idx) in self.leaf_composite.iter().enumerate() {
            if idx >= m || self.composites[idx] != ClassSet::singleton(k, atomic) {
                return Err(Error::InvalidHierarchy(format!(
                    "atomic class {atomic} has no singleton leaf"
                )));
            }
        }
        Ok(())
    }

    /// A root with `k` leaves named `c0..c{k-1}`.
    pub fn flat(k: usize) -> Self {
        let leaves = (0..k).map(|i| NodeDoc::leaf(format!("c{i}"))).collect();
        Self::from_doc(&NodeDoc::node("root", leaves)).expect("flat hierarchy is valid")
    }

    /// A complete tree with `branching` children per node and `depth` levels
    /// below the root.
    pub fn balanced(branching: usize, depth: u32) -> Result<Self> {
        Self::from_doc(&balanced_doc(branching, depth))
    }

    /// Atomic class count.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Composite count, singletons and root included.
    pub fn m(&self) -> usize {
        self.composites.len()
    }

    pub fn composites(&self) -> &[ClassSet] {
        &self.composites
    }

    pub fn composite(&self, index: usize) -> Result<&ClassSet> {
        self.composites
            .get(index)
            .ok_or(Error::CompositeOutOfRange { index, m: self.m() })
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Leaf names in atomic-index order.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|n| n == name)
    }

    pub fn parent(&self, index: usize) -> Option<usize> {
        self.parent[index]
    }

    pub fn children(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn full_set(&self) -> ClassSet {
        ClassSet::full(self.k)
    }

    /// Composite indices on the path from `atomic`'s singleton to the root,
    /// leaf first. Entry `L` is the level-`L` partial label of that class.
    pub fn ancestors_of(&self, atomic: usize) -> Result<Vec<usize>> {
        if atomic >= self.k {
            return Err(Error::ClassOutOfRange {
                index: atomic,
                k: self.k,
            });
        }
        let mut path = vec![self.leaf_composite[atomic]];
        while let Some(p) = self.parent[*path.last().unwrap()] {
            path.push(p);
        }
        Ok(path)
    }

    /// The level-`level` composite containing `atomic`, clipped at the root.
    pub fn level_set(&self, atomic: usize, level: usize) -> Result<&ClassSet> {
        let path = self.ancestors_of(atomic)?;
        let idx = path[level.min(path.len() - 1)];
        Ok(&self.composites[idx])
    }

    /// Rebuilds a document for this hierarchy (folded unary chains stay folded).
    pub fn to_doc(&self) -> NodeDoc {
        self.doc_for(self.root())
    }

    fn doc_for(&self, idx: usize) -> NodeDoc {
        if self.children[idx].is_empty() {
            NodeDoc::leaf(self.names[idx].clone())
        } else {
            NodeDoc::node(
                self.names[idx].clone(),
                self.children[idx]
                    .iter()
                    .map(|&c| self.doc_for(c))
                    .collect(),
            )
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("hierarchy serializes")
    }
}

fn collect_leaves(node: &NodeDoc, out: &mut Vec<String>, seen: &mut HashSet<String>) -> Result<()> {
    match &node.children {
        None => {
            if !seen.insert(node.name.clone()) {
                return Err(Error::DuplicateLeaf(node.name.clone()));
            }
            out.push(node.name.clone());
        }
        Some(children) if children.is_empty() => {
            return Err(Error::EmptyChildren(node.name.clone()));
        }
        Some(children) => {
            for child in children {
                collect_leaves(child, out, seen)?;
            }
        }
    }
    Ok(())
}

fn leaf_count(node: &NodeDoc) -> usize {
    match &node.children {
        None => 1,
        Some(children) => children.iter().map(leaf_count).sum(),
    }
}

fn subtree_set(node: &NodeDoc, k: usize, first_leaf: usize) -> ClassSet {
    ClassSet::from_indices(k, first_leaf..first_leaf + leaf_count(node))
}

/// Document for a complete tree; nodes are named by their path, e.g. `n0.1`.
pub fn balanced_doc(branching: usize, depth: u32) -> NodeDoc {
    fn build(prefix: String, branching: usize, depth: u32) -> NodeDoc {
        if depth == 0 {
            return NodeDoc::leaf(prefix);
        }
        NodeDoc::node(
            prefix.clone(),
            (0..branching)
                .map(|i| build(format!("{prefix}.{i}"), branching, depth - 1))
                .collect(),
        )
    }
    build("n".to_string(), branching, depth)
}
