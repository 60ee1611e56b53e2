//! Candidate generation and selection for `get_next_acc`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GadState;
use crate::compmodel::{region_acc_unchecked, slice_within, subtree_acc_unchecked, Acc, Origin};
use crate::evaluator::{AttributedTree, InstanceId};
use crate::gad::query::render_tree;
use crate::sentence::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Subtree (synth-function) queries only.
    Ad,
    /// Backward slices bisecting the suspect set.
    Slice,
    /// Subtrees, pruned regions and slices, scored by split quality and reading cost.
    Gad,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Slice, Strategy::Ad, Strategy::Gad];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ad => "ad",
            Strategy::Slice => "slice",
            Strategy::Gad => "gad",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Strategy, String> {
        match s {
            "ad" => Ok(Strategy::Ad),
            "slice" => Ok(Strategy::Slice),
            "gad" => Ok(Strategy::Gad),
            _ => Err(format!("unknown strategy {s:?} (expected ad, slice or gad)")),
        }
    }
}

/// An admissible next composition with the permutation of the correct set
/// that puts the contained entries first.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub acc: Acc,
    pub perm: Vec<usize>,
    pub m: usize,
}

fn subtree_pool(at: &AttributedTree, suspect: &BTreeSet<InstanceId>) -> Vec<Acc> {
    at.tree
        .nonterminals()
        .filter_map(|n| subtree_acc_unchecked(at, n.id).ok())
        .filter(|a| a.comps.is_subset(suspect))
        .collect()
}

fn region_pool(at: &AttributedTree, suspect: &BTreeSet<InstanceId>, bug: &BTreeSet<InstanceId>) -> Vec<Acc> {
    // per node: does its subtree hold any suspect-but-not-cleared computation?
    let mut touches_bug = vec![false; at.tree.len()];
    for c in at.comps() {
        if bug.contains(&c.id) {
            let mut cur = Some(c.location);
            while let Some(n) = cur {
                if touches_bug[n] {
                    break;
                }
                touches_bug[n] = true;
                cur = at.tree.nodes[n].parent;
            }
        }
    }
    let mut out = Vec::new();
    for root in at.tree.nonterminals() {
        if !touches_bug[root.id] {
            continue;
        }
        let mut pruned = Vec::new();
        let mut stack: Vec<NodeId> = root.children.clone();
        while let Some(n) = stack.pop() {
            if at.tree.nodes[n].symbol.is_terminal() {
                continue;
            }
            if touches_bug[n] {
                stack.extend(at.tree.nodes[n].children.iter().copied());
            } else {
                pruned.push(n);
            }
        }
        if pruned.is_empty() {
            continue;
        }
        if let Ok(acc) = region_acc_unchecked(at, root.id, &pruned) {
            if acc.comps.is_subset(suspect) {
                out.push(acc);
            }
        }
    }
    out
}

/// Slice of `target` within the uncleared set, concluding every member whose
/// value leaves the slice.
pub fn slice_query_acc(at: &AttributedTree, target: InstanceId, within: &BTreeSet<InstanceId>) -> Acc {
    let mut acc = slice_within(at, target, within);
    let escaping: Vec<InstanceId> =
        acc.comps.iter().copied().filter(|&c| at.consumers(c).any(|x| !acc.comps.contains(&x))).collect();
    acc.outputs.extend(escaping);
    acc
}

fn slice_pool(at: &AttributedTree, bug: &BTreeSet<InstanceId>) -> Vec<Acc> {
    bug.iter().filter(|&&t| at.value(t).is_some()).map(|&t| slice_query_acc(at, t, bug)).collect()
}

impl GadState {
    /// Permutation and split index if `acc` is admissible, else `None`.
    pub(crate) fn admit(&self, acc: Acc, bug: &BTreeSet<InstanceId>) -> Option<Candidate> {
        let at = &*self.trace;
        if acc.outputs.is_empty() || !acc.comps.is_subset(&self.suspect.comps) {
            return None;
        }
        let k = acc.comps.intersection(bug).count();
        if k == 0 || k == bug.len() {
            return None;
        }
        if !acc.undefined_boundary(at).is_empty() || self.vetoed.contains(&acc.comps) {
            return None;
        }
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for (i, c) in self.correct.iter().enumerate() {
            if acc.contains(c) {
                inside.push(i);
            } else if acc.is_disjoint(c) {
                outside.push(i);
            } else {
                return None;
            }
        }
        let m = inside.len();
        inside.extend(outside);
        Some(Candidate { acc, perm: inside, m })
    }

    pub fn get_next_acc(&self) -> Option<Candidate> {
        let at = &*self.trace;
        let bug = self.bug_acs().comps;
        if bug.is_empty() {
            return None;
        }
        let suspect = &self.suspect.comps;
        let pool: Vec<Acc> = match self.config.strategy {
            Strategy::Ad => subtree_pool(at, suspect),
            Strategy::Slice => slice_pool(at, &bug),
            Strategy::Gad => {
                let mut p = subtree_pool(at, suspect);
                p.extend(region_pool(at, suspect, &bug));
                p.extend(slice_pool(at, &bug));
                p
            }
        };
        let candidates = pool.into_iter().filter_map(|a| self.admit(a, &bug));
        let n = bug.len();
        let strategy = self.config.strategy;
        let lambda = self.config.lambda;
        candidates
            .map(|c| {
                let k = c.acc.comps.intersection(&bug).count();
                let key = score(at, &c.acc, k, n, strategy, lambda);
                (key, c)
            })
            .min_by(|(a, _), (b, _)| a.cmp(b))
            .map(|(_, c)| c)
    }
}

/// Total-ordered selection key, smaller is better.
#[derive(Debug, PartialEq)]
struct Score {
    primary: f64,
    rendered: usize,
    form: u8,
    ids: Vec<(u32, u16)>,
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Score) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Score) -> Ordering {
        self.primary
            .total_cmp(&other.primary)
            .then(self.rendered.cmp(&other.rendered))
            .then(self.form.cmp(&other.form))
            .then(self.ids.cmp(&other.ids))
    }
}

fn displayed_nodes(at: &AttributedTree, acc: &Acc) -> usize {
    match &acc.origin {
        Origin::Subtree { node } => render_tree(at, *node, &[]).1,
        Origin::Region { root, pruned } => render_tree(at, *root, pruned).1,
        _ => 0,
    }
}

fn score(at: &AttributedTree, acc: &Acc, k: usize, n: usize, strategy: Strategy, lambda: f64) -> Score {
    let worst = k.max(n - k) as f64;
    let premise_len: usize = acc.premise.iter().filter_map(|&i| at.value(i)).map(|v| v.rendered_len()).sum();
    let (form, ids) = match &acc.origin {
        Origin::Subtree { node } => (0, vec![(*node as u32, 0)]),
        Origin::Region { root, pruned } => (1, std::iter::once(*root).chain(pruned.iter().copied()).map(|p| (p as u32, 0)).collect()),
        Origin::Slice { target } => (2, vec![(target.node, target.slot)]),
        Origin::SetOp => (3, vec![]),
    };
    let primary = match strategy {
        Strategy::Ad => worst,
        Strategy::Slice => (2 * k).abs_diff(n) as f64,
        Strategy::Gad => {
            let reading = displayed_nodes(at, acc) + acc.premise.len() + acc.outputs.len();
            worst + lambda * reading as f64
        }
    };
    Score { primary, rendered: premise_len, form, ids }
}
