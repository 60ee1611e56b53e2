//! Sub-computations of an evaluation trace.
//!
//! An [`Acc`] is a set of computation instances plus the boundary a user
//! judges it by: the premise (instances read from outside) and the outputs
//! (instances produced inside and shown as results). Identity is the
//! computation set alone.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{AttributedTree, InstanceId};
use crate::grammar::RuleId;
use crate::sentence::NodeId;
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Subtree { node: NodeId },
    Region { root: NodeId, pruned: Vec<NodeId> },
    Slice { target: InstanceId },
    SetOp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Acc {
    pub comps: BTreeSet<InstanceId>,
    pub premise: BTreeSet<InstanceId>,
    pub outputs: BTreeSet<InstanceId>,
    pub origin: Origin,
}

impl PartialEq for Acc {
    fn eq(&self, other: &Acc) -> bool {
        self.comps == other.comps
    }
}

impl Eq for Acc {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Instances,
    Rules,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AccError {
    #[error("node {0} is not a nonterminal node")]
    NotNonterminal(NodeId),
    #[error("undefined value on the boundary: {}", .0.join(", "))]
    BoundaryUndefined(Vec<String>),
    #[error("invalid pruning: {0}")]
    Nesting(String),
    #[error("{0} has no value")]
    TargetUndefined(String),
    #[error("computation trees need a completed evaluation")]
    PartialTrace,
}

impl Acc {
    pub fn empty() -> Acc {
        Acc { comps: BTreeSet::new(), premise: BTreeSet::new(), outputs: BTreeSet::new(), origin: Origin::SetOp }
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    /// Distinct semantic rules among the members.
    pub fn rules(&self, at: &AttributedTree) -> BTreeSet<RuleId> {
        self.comps.iter().map(|&c| at.comp(c).rule.clone()).collect()
    }

    pub fn size(&self, at: &AttributedTree, metric: Metric) -> usize {
        match metric {
            Metric::Instances => self.comps.len(),
            Metric::Rules => self.rules(at).len(),
        }
    }

    pub fn contains(&self, other: &Acc) -> bool {
        other.comps.is_subset(&self.comps)
    }

    pub fn is_disjoint(&self, other: &Acc) -> bool {
        self.comps.is_disjoint(&other.comps)
    }

    /// Every input of every member is a member output or in the premise.
    pub fn is_closed(&self, at: &AttributedTree) -> bool {
        self.comps
            .iter()
            .all(|&c| at.comp(c).inputs.iter().all(|i| self.comps.contains(i) || self.premise.contains(i)))
    }

    pub fn boundary(&self) -> impl Iterator<Item = InstanceId> + '_ {
        self.premise.iter().chain(&self.outputs).copied()
    }

    /// Boundary instances without a value.
    pub fn undefined_boundary(&self, at: &AttributedTree) -> Vec<InstanceId> {
        self.boundary().filter(|&i| at.value(i).is_none()).collect()
    }

    pub fn check_boundary(self, at: &AttributedTree) -> Result<Acc, AccError> {
        let bad = self.undefined_boundary(at);
        if bad.is_empty() {
            Ok(self)
        } else {
            Err(AccError::BoundaryUndefined(bad.into_iter().map(|i| at.label(i)).collect()))
        }
    }

    pub fn premise_values<'a>(&'a self, at: &'a AttributedTree) -> Vec<(InstanceId, Option<&'a Value>)> {
        self.premise.iter().map(|&i| (i, at.value(i))).collect()
    }

    pub fn output_values<'a>(&'a self, at: &'a AttributedTree) -> Vec<(InstanceId, Option<&'a Value>)> {
        self.outputs.iter().map(|&i| (i, at.value(i))).collect()
    }
}

/// Builds an Acc whose boundary is derived by closure: the premise is every
/// input read from outside, the outputs are the defined members consumed
/// outside the set or by nothing at all.
pub fn from_comps(at: &AttributedTree, comps: BTreeSet<InstanceId>, origin: Origin) -> Acc {
    let mut premise = BTreeSet::new();
    let mut outputs = BTreeSet::new();
    for &c in &comps {
        premise.extend(at.comp(c).inputs.iter().filter(|i| !comps.contains(i)));
        let mut consumers = at.consumers(c).peekable();
        let exported = consumers.peek().is_none() || at.consumers(c).any(|x| !comps.contains(&x));
        if exported && at.value(c).is_some() {
            outputs.insert(c);
        }
    }
    Acc { comps, premise, outputs, origin }
}

fn nonterminal(at: &AttributedTree, node: NodeId) -> Result<(), AccError> {
    match at.tree.nodes.get(node) {
        Some(n) if !n.symbol.is_terminal() => Ok(()),
        _ => Err(AccError::NotNonterminal(node)),
    }
}

fn located_in(at: &AttributedTree, nodes: &BTreeSet<NodeId>) -> BTreeSet<InstanceId> {
    at.comps().iter().filter(|c| nodes.contains(&c.location)).map(|c| c.id).collect()
}

/// Computations of the subtree at `node`, judged as its synth-function.
pub fn subtree_acc_unchecked(at: &AttributedTree, node: NodeId) -> Result<Acc, AccError> {
    nonterminal(at, node)?;
    let nodes: BTreeSet<NodeId> = at.tree.subtree(node).into_iter().collect();
    Ok(Acc {
        comps: located_in(at, &nodes),
        premise: at.inherited_of(node).into_iter().collect(),
        outputs: at.synthesized_of(node).into_iter().collect(),
        origin: Origin::Subtree { node },
    })
}

pub fn subtree_acc(at: &AttributedTree, node: NodeId) -> Result<Acc, AccError> {
    subtree_acc_unchecked(at, node)?.check_boundary(at)
}

pub fn region_acc_unchecked(at: &AttributedTree, root: NodeId, pruned: &[NodeId]) -> Result<Acc, AccError> {
    nonterminal(at, root)?;
    for (i, &p) in pruned.iter().enumerate() {
        nonterminal(at, p)?;
        if p == root || !at.tree.is_descendant(p, root) {
            return Err(AccError::Nesting(format!("node {p} is not a strict descendant of node {root}")));
        }
        for &q in &pruned[i + 1..] {
            if at.tree.is_descendant(p, q) || at.tree.is_descendant(q, p) {
                return Err(AccError::Nesting(format!("nodes {p} and {q} are nested")));
            }
        }
    }
    let mut nodes: BTreeSet<NodeId> = at.tree.subtree(root).into_iter().collect();
    for &p in pruned {
        for n in at.tree.subtree(p) {
            nodes.remove(&n);
        }
    }
    let mut premise: BTreeSet<InstanceId> = at.inherited_of(root).into_iter().collect();
    let mut outputs: BTreeSet<InstanceId> = at.synthesized_of(root).into_iter().collect();
    for &p in pruned {
        premise.extend(at.synthesized_of(p));
        outputs.extend(at.inherited_of(p));
    }
    let mut pruned = pruned.to_vec();
    pruned.sort_unstable();
    Ok(Acc { comps: located_in(at, &nodes), premise, outputs, origin: Origin::Region { root, pruned } })
}

/// The subtree at `root` with the subtrees at `pruned` cut out.
pub fn region_acc(at: &AttributedTree, root: NodeId, pruned: &[NodeId]) -> Result<Acc, AccError> {
    region_acc_unchecked(at, root, pruned)?.check_boundary(at)
}

/// Backward dynamic slice: every computation `target` depends on.
pub fn slice_acc(at: &AttributedTree, target: InstanceId) -> Result<Acc, AccError> {
    if at.value(target).is_none() {
        return Err(AccError::TargetUndefined(at.label(target)));
    }
    Ok(Acc {
        comps: at.backward_closure([target]),
        premise: BTreeSet::new(),
        outputs: BTreeSet::from([target]),
        origin: Origin::Slice { target },
    })
}

/// Backward slice of `target` that stops at the edge of `within`; instances
/// read across that edge form the premise.
pub fn slice_within(at: &AttributedTree, target: InstanceId, within: &BTreeSet<InstanceId>) -> Acc {
    let mut comps = BTreeSet::new();
    let mut premise = BTreeSet::new();
    let mut stack = vec![target];
    while let Some(id) = stack.pop() {
        if !within.contains(&id) {
            premise.insert(id);
        } else if comps.insert(id) {
            stack.extend(at.comp(id).inputs.iter().copied());
        }
    }
    Acc { comps, premise, outputs: BTreeSet::from([target]), origin: Origin::Slice { target } }
}

/// `a` minus the union of `bs`, with a closure-derived boundary.
pub fn acc_difference(at: &AttributedTree, a: &Acc, bs: &[Acc]) -> Acc {
    if bs.is_empty() {
        return a.clone();
    }
    let mut comps = a.comps.clone();
    for b in bs {
        comps.retain(|c| !b.comps.contains(c));
    }
    from_comps(at, comps, Origin::SetOp)
}

pub fn acc_union(at: &AttributedTree, accs: &[&Acc]) -> Acc {
    let comps = accs.iter().flat_map(|a| a.comps.iter().copied()).collect();
    from_comps(at, comps, Origin::SetOp)
}

pub fn acc_intersection(at: &AttributedTree, a: &Acc, b: &Acc) -> Acc {
    from_comps(at, a.comps.intersection(&b.comps).copied().collect(), Origin::SetOp)
}

/// All computations of the trace.
pub fn full_acc(at: &AttributedTree) -> Acc {
    subtree_acc_unchecked(at, at.root()).expect("root is a nonterminal")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompNode {
    pub node: NodeId,
    /// `synth_X` for nonterminal X.
    pub function: String,
    pub args: Vec<(InstanceId, Value)>,
    /// Token text of the subtree argument.
    pub text: String,
    pub result: Vec<(InstanceId, Value)>,
    pub children: Vec<usize>,
}

/// Computation tree of synth-functions; index 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompTree {
    pub nodes: Vec<CompNode>,
}

pub fn build_comp_tree(at: &AttributedTree) -> Result<CompTree, AccError> {
    if at.is_failed() {
        return Err(AccError::PartialTrace);
    }
    let mut tree = CompTree { nodes: vec![] };
    build_node(at, at.root(), &mut tree);
    Ok(tree)
}

fn build_node(at: &AttributedTree, node: NodeId, tree: &mut CompTree) -> usize {
    let vals = |ids: Vec<InstanceId>| -> Vec<(InstanceId, Value)> {
        ids.into_iter().map(|i| (i, at.value(i).expect("completed trace").clone())).collect()
    };
    let idx = tree.nodes.len();
    tree.nodes.push(CompNode {
        node,
        function: format!("synth_{}", at.tree.nodes[node].symbol.name()),
        args: vals(at.inherited_of(node)),
        text: at.tree.text(node),
        result: vals(at.synthesized_of(node)),
        children: vec![],
    });
    let kids: Vec<NodeId> =
        at.tree.nodes[node].children.iter().copied().filter(|&c| !at.tree.nodes[c].symbol.is_terminal()).collect();
    let children = kids.into_iter().map(|c| build_node(at, c, tree)).collect();
    tree.nodes[idx].children = children;
    idx
}

impl CompTree {
    pub fn find(&self, node: NodeId) -> Option<&CompNode> {
        self.nodes.iter().find(|n| n.node == node)
    }
}

#[cfg(test)]
mod tests;
