use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compmodel::{Acc, Origin};
use crate::evaluator::{AttributedTree, InstanceId};
use crate::sentence::NodeId;
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryForm {
    Synth { node: NodeId },
    Region { root: NodeId, pruned: Vec<NodeId> },
    Slice { target: InstanceId },
}

impl QueryForm {
    pub fn name(&self) -> &'static str {
        match self {
            QueryForm::Synth { .. } => "synth",
            QueryForm::Region { .. } => "region",
            QueryForm::Slice { .. } => "slice",
        }
    }

    /// `synth L[5]`, `region L[2] - {L[5]}`, `slice L[8].val`
    pub fn describe(&self, at: &AttributedTree) -> String {
        let node = |n: NodeId| format!("{}[{n}]", at.tree.nodes[n].symbol.name());
        match self {
            QueryForm::Synth { node: n } => format!("synth {}", node(*n)),
            QueryForm::Region { root, pruned } => {
                format!("region {} - {{{}}}", node(*root), pruned.iter().map(|&p| node(p)).collect::<Vec<_>>().join(", "))
            }
            QueryForm::Slice { target } => format!("slice {}", at.label(*target)),
        }
    }
}

/// A question put to the oracle: is the relation between `premise` and
/// `conclusion` right?
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Query {
    pub form: QueryForm,
    pub premise: Vec<(InstanceId, Value)>,
    pub conclusion: Vec<(InstanceId, Value)>,
    /// Tree argument for synth and region forms, pruned subtrees elided.
    pub tree: Option<String>,
    pub acc: Acc,
    /// Number of leading entries of the permuted correct set that `acc` contains.
    pub m: usize,
    pub perm: Vec<usize>,
    pub fingerprint: String,
    /// State version the query was issued against.
    pub version: u64,
}

fn values(at: &AttributedTree, ids: &BTreeSet<InstanceId>) -> Vec<(InstanceId, Value)> {
    ids.iter().map(|&i| (i, at.value(i).expect("query boundaries are defined").clone())).collect()
}

impl Query {
    pub(crate) fn new(at: &AttributedTree, acc: Acc, perm: Vec<usize>, m: usize, version: u64) -> Query {
        let form = match &acc.origin {
            Origin::Subtree { node } => QueryForm::Synth { node: *node },
            Origin::Region { root, pruned } => QueryForm::Region { root: *root, pruned: pruned.clone() },
            Origin::Slice { target } => QueryForm::Slice { target: *target },
            Origin::SetOp => panic!("set-op compositions are not queryable"),
        };
        let tree = match &form {
            QueryForm::Synth { node } => Some(render_tree(at, *node, &[]).0),
            QueryForm::Region { root, pruned } => Some(render_tree(at, *root, pruned).0),
            QueryForm::Slice { .. } => None,
        };
        let premise = values(at, &acc.premise);
        let conclusion = values(at, &acc.outputs);
        let fingerprint = fingerprint(at, &form, &premise, &conclusion);
        Query { form, premise, conclusion, tree, acc, m, perm, fingerprint, version }
    }

    pub fn boundary(&self) -> impl Iterator<Item = InstanceId> + '_ {
        self.premise.iter().chain(&self.conclusion).map(|(i, _)| *i)
    }

    /// Tree nodes displayed plus boundary values: what the user has to read.
    pub fn reading_cost(&self, at: &AttributedTree) -> usize {
        let nodes = match &self.form {
            QueryForm::Synth { node } => render_tree(at, *node, &[]).1,
            QueryForm::Region { root, pruned } => render_tree(at, *root, pruned).1,
            QueryForm::Slice { .. } => 0,
        };
        nodes + self.premise.len() + self.conclusion.len()
    }

    /// Console text; stable format.
    pub fn render(&self, at: &AttributedTree) -> String {
        let pair = |(i, v): &(InstanceId, Value)| format!("{} = {v}", at.label(*i));
        let list = |xs: &[(InstanceId, Value)]| xs.iter().map(pair).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        match &self.form {
            QueryForm::Synth { node } => {
                let name = at.tree.nodes[*node].symbol.name();
                let args: Vec<String> = self.premise.iter().map(|(i, v)| format!("{} = {v}", at.attr_name(*i))).collect();
                let res: Vec<String> = self.conclusion.iter().map(|(i, v)| format!("{} = {v}", at.attr_name(*i))).collect();
                let mut call = args.join(", ");
                if !call.is_empty() {
                    call.push_str(", ");
                }
                write!(call, "{:?}", at.tree.text(*node)).unwrap();
                writeln!(s, "[{}] synth_{name}({call}) = ({})", self.form.describe(at), res.join(", ")).unwrap();
                writeln!(s, "  tree: {}", self.tree.as_deref().unwrap_or("")).unwrap();
            }
            QueryForm::Region { .. } => {
                writeln!(s, "[{}]", self.form.describe(at)).unwrap();
                writeln!(s, "  given: {}", list(&self.premise)).unwrap();
                writeln!(s, "  tree:  {}", self.tree.as_deref().unwrap_or("")).unwrap();
                writeln!(s, "  then:  {}", list(&self.conclusion)).unwrap();
            }
            QueryForm::Slice { target } => {
                writeln!(s, "[{}]", self.form.describe(at)).unwrap();
                if !self.premise.is_empty() {
                    writeln!(s, "  given: {}", list(&self.premise)).unwrap();
                }
                let v = at.value(*target).expect("defined");
                let others: Vec<_> = self.conclusion.iter().filter(|(i, _)| i != target).cloned().collect();
                if others.is_empty() {
                    writeln!(s, "  is {v} of {} correct?", at.label(*target)).unwrap();
                } else {
                    writeln!(s, "  is {v} of {} correct? (along with {})", at.label(*target), list(&others)).unwrap();
                }
            }
        }
        s
    }

    pub fn to_json(&self, at: &AttributedTree) -> serde_json::Value {
        let pairs = |xs: &[(InstanceId, Value)]| {
            xs.iter()
                .map(|(i, v)| serde_json::json!({"instance": at.label(*i), "value": v.to_json()}))
                .collect::<Vec<_>>()
        };
        serde_json::json!({
            "form": self.form.name(),
            "description": self.form.describe(at),
            "premise": pairs(&self.premise),
            "conclusion": pairs(&self.conclusion),
            "tree": self.tree,
            "fingerprint": self.fingerprint,
            "m": self.m,
            "text": self.render(at),
        })
    }
}

/// Hash of form, sorted boundary ids and their values.
pub fn fingerprint(at: &AttributedTree, form: &QueryForm, premise: &[(InstanceId, Value)], conclusion: &[(InstanceId, Value)]) -> String {
    let mut h = Sha256::new();
    h.update(form.describe(at).as_bytes());
    let mut boundary: Vec<(String, String)> =
        premise.iter().chain(conclusion).map(|(i, v)| (at.label(*i), v.to_string())).collect();
    boundary.sort();
    for (l, v) in boundary {
        h.update(b"\0");
        h.update(l.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Bracketed tree text with pruned subtrees shown as stubs carrying their
/// synthesized values; also returns the number of displayed nodes.
pub fn render_tree(at: &AttributedTree, root: NodeId, pruned: &[NodeId]) -> (String, usize) {
    let mut s = String::new();
    let mut count = 0;
    render_node(at, root, pruned, &mut s, &mut count);
    (s, count)
}

fn render_node(at: &AttributedTree, n: NodeId, pruned: &[NodeId], out: &mut String, count: &mut usize) {
    *count += 1;
    let node = &at.tree.nodes[n];
    if node.symbol.is_terminal() {
        write!(out, "{:?}", node.symbol.name()).unwrap();
        return;
    }
    if pruned.contains(&n) {
        let vals: Vec<String> = at
            .synthesized_of(n)
            .into_iter()
            .map(|i| format!("{} = {}", at.attr_name(i), at.value(i).map(|v| v.to_string()).unwrap_or("?".into())))
            .collect();
        write!(out, "<{}[{n}] pruned: {}>", node.symbol.name(), vals.join(", ")).unwrap();
        return;
    }
    write!(out, "({}[{n}]", node.symbol.name()).unwrap();
    for &c in &node.children {
        out.push(' ');
        render_node(at, c, pruned, out, count);
    }
    out.push(')');
}
