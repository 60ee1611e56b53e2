//! Attribute evaluation over a parse tree with a recorded dynamic trace.
//!
//! Every semantic rule is instantiated at every production instance, the
//! resulting computations are ordered topologically (ties go to the smallest
//! `(node id, attribute name)`), and each computation is executed once.
//! A runtime fault leaves its output Undefined; computations that read an
//! Undefined value are skipped, everything else still runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{AttrKind, AttrRef, BinOp, Builtin, Expr, ExprKind, Grammar, ProductionId, RuleId, Symbol, UnOp};
use crate::sentence::{NodeId, ParseTree};
use crate::value::{pow2, Sort, Value};

/// An attribute instance: slot `slot` (inherited first, then synthesized, in
/// declaration order) of the nonterminal at `node`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceId {
    pub node: u32,
    pub slot: u16,
}

impl InstanceId {
    pub fn new(node: NodeId, slot: usize) -> InstanceId {
        InstanceId { node: node as u32, slot: slot as u16 }
    }

    pub fn node(self) -> NodeId {
        self.node as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompInstance {
    /// Equal to the output instance.
    pub id: InstanceId,
    pub rule: RuleId,
    /// Node where the owning production is instantiated.
    pub location: NodeId,
    pub inputs: Vec<InstanceId>,
    pub seq: Option<usize>,
}

impl CompInstance {
    pub fn output(&self) -> InstanceId {
        self.id
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    DivisionByZero,
    LookupMiss,
    UserError,
    SortMismatch,
    Overflow,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultKind::DivisionByZero => "division by zero",
            FaultKind::LookupMiss => "lookup miss",
            FaultKind::UserError => "error()",
            FaultKind::SortMismatch => "sort mismatch",
            FaultKind::Overflow => "overflow",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}: {message}")]
pub struct RuntimeFault {
    pub kind: FaultKind,
    pub message: String,
}

impl RuntimeFault {
    fn new(kind: FaultKind, message: impl Into<String>) -> RuntimeFault {
        RuntimeFault { kind, message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub comp: InstanceId,
    pub kind: FaultKind,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalStatus {
    Completed,
    Failed(Fault),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("circular attribute dependencies: {}", .cycle.join(" -> "))]
pub struct CircularityError {
    /// Instance labels along one cycle; the first is repeated at the end.
    pub cycle: Vec<String>,
}

/// Ready-queue ordering among computations whose inputs are all available.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Smallest,
    Largest,
}

#[derive(Clone, Debug)]
pub struct AttributedTree {
    pub grammar: Arc<Grammar>,
    pub tree: ParseTree,
    base: Vec<Option<usize>>,
    ids: Vec<InstanceId>,
    values: Vec<Option<Value>>,
    comps: Vec<CompInstance>,
    consumers: Vec<Vec<usize>>,
    order: Vec<usize>,
    faults: Vec<Fault>,
    pub status: EvalStatus,
}

pub fn evaluate(g: Arc<Grammar>, tree: ParseTree) -> Result<AttributedTree, CircularityError> {
    evaluate_with(g, tree, TieBreak::Smallest)
}

pub fn evaluate_with(g: Arc<Grammar>, tree: ParseTree, tie: TieBreak) -> Result<AttributedTree, CircularityError> {
    let mut base = vec![None; tree.len()];
    let mut ids = Vec::new();
    for n in &tree.nodes {
        if let Symbol::Nonterminal(name) = &n.symbol {
            base[n.id] = Some(ids.len());
            let decl = g.nonterminal(name).expect("tree conforms to grammar");
            ids.extend((0..decl.attr_count()).map(|s| InstanceId::new(n.id, s)));
        }
    }
    let count = ids.len();
    let mut comps: Vec<Option<CompInstance>> = vec![None; count];
    let mut exprs: Vec<Option<(usize, usize)>> = vec![None; count];
    let resolve = |node: NodeId, r: &AttrRef| -> usize {
        let n = if r.pos == 0 { node } else { tree.nodes[node].children[r.pos - 1] };
        let decl = g.nonterminal(tree.nodes[n].symbol.name()).expect("declared");
        base[n].expect("nonterminal") + decl.slot(&r.attr).expect("declared attribute")
    };
    for n in &tree.nodes {
        let Some(pid) = &n.production else { continue };
        let pi = g.production_index(pid).expect("tree conforms to grammar");
        for (ri, rule) in g.productions[pi].rules.iter().enumerate() {
            let out = resolve(n.id, &rule.target);
            let inputs = rule.expr.references().iter().map(|r| ids[resolve(n.id, r)]).collect();
            comps[out] = Some(CompInstance { id: ids[out], rule: rule.id.clone(), location: n.id, inputs, seq: None });
            exprs[out] = Some((pi, ri));
        }
    }
    let comps: Vec<CompInstance> = comps.into_iter().map(|c| c.expect("every instance has a defining rule")).collect();
    let index = |id: InstanceId| base[id.node()].expect("nonterminal") + id.slot as usize;

    let mut consumers = vec![Vec::new(); count];
    let mut pending = vec![0usize; count];
    for (i, c) in comps.iter().enumerate() {
        for &inp in &c.inputs {
            consumers[index(inp)].push(i);
        }
        pending[i] = c.inputs.len();
    }

    // name rank of each slot per nonterminal, for the tie-break key
    let mut rank: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for nt in &g.nonterminals {
        let names: Vec<&str> = nt.attrs().map(|(_, a)| a.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        rank.insert(&nt.name, names.iter().map(|n| sorted.iter().position(|s| s == n).unwrap()).collect());
    }
    let key = |i: usize| -> (u32, usize, usize) {
        let id = ids[i];
        let sym = tree.nodes[id.node()].symbol.name();
        let k = (id.node, rank[sym][id.slot as usize], i);
        match tie {
            TieBreak::Smallest => k,
            TieBreak::Largest => (u32::MAX - k.0, usize::MAX - k.1, usize::MAX - k.2),
        }
    };

    let mut ready: BTreeSet<((u32, usize, usize), usize)> =
        (0..count).filter(|&i| pending[i] == 0).map(|i| (key(i), i)).collect();
    let mut values: Vec<Option<Value>> = vec![None; count];
    let mut comps = comps;
    let mut order = Vec::new();
    let mut faults = Vec::new();
    let mut processed = 0;

    while let Some((_, i)) = ready.pop_first() {
        processed += 1;
        let runnable = comps[i].inputs.iter().all(|&inp| values[index(inp)].is_some());
        if runnable {
            let (pi, ri) = exprs[i].unwrap();
            let prod = &g.productions[pi];
            let rule = &prod.rules[ri];
            let loc = comps[i].location;
            let mut env = |r: &AttrRef| -> Result<Value, RuntimeFault> {
                Ok(values[resolve(loc, r)].clone().expect("inputs are defined"))
            };
            let sort = g.occurrence_sort(prod, &rule.target).expect("checked").1;
            comps[i].seq = Some(order.len());
            order.push(i);
            match eval_expr(&rule.expr, &mut env).and_then(|v| store(v, sort)) {
                Ok(v) => values[i] = Some(v),
                Err(f) => faults.push(Fault { comp: ids[i], kind: f.kind, message: f.message }),
            }
        }
        for &c in &consumers[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.insert((key(c), c));
            }
        }
    }

    let mut at = AttributedTree {
        status: EvalStatus::Completed,
        grammar: g.clone(),
        tree,
        base,
        ids,
        values,
        comps,
        consumers,
        order,
        faults,
    };
    if processed < count {
        return Err(CircularityError { cycle: at.find_cycle(&pending) });
    }
    if let Some(f) = at.faults.first() {
        at.status = EvalStatus::Failed(f.clone());
    }
    Ok(at)
}

fn store(v: Value, sort: Sort) -> Result<Value, RuntimeFault> {
    v.coerce(sort)
        .map_err(|v| RuntimeFault::new(FaultKind::SortMismatch, format!("expected a {sort}, computed the {} {v}", v.sort())))
}

impl AttributedTree {
    fn find_cycle(&self, pending: &[usize]) -> Vec<String> {
        // every stuck computation has a stuck input; walk inputs until a repeat
        let stuck = |i: usize| pending[i] > 0;
        let start = (0..self.ids.len()).find(|&i| stuck(i)).expect("a stuck computation");
        let mut path = vec![start];
        let mut seen = BTreeMap::from([(start, 0usize)]);
        loop {
            let cur = *path.last().unwrap();
            let next = self.comps[cur]
                .inputs
                .iter()
                .map(|&id| self.index(id).unwrap())
                .find(|&j| stuck(j))
                .expect("stuck computations have stuck inputs");
            if let Some(&at) = seen.get(&next) {
                let mut cyc: Vec<String> = path[at..].iter().rev().map(|&i| self.label(self.ids[i])).collect();
                cyc.push(cyc[0].clone());
                return cyc;
            }
            seen.insert(next, path.len());
            path.push(next);
        }
    }

    pub(crate) fn index(&self, id: InstanceId) -> Option<usize> {
        let b = (*self.base.get(id.node())?)?;
        let i = b + id.slot as usize;
        (self.ids.get(i) == Some(&id)).then_some(i)
    }

    /// The instance an occurrence denotes in the production instance at `location`.
    pub fn resolve(&self, location: NodeId, r: &AttrRef) -> Option<InstanceId> {
        let node = if r.pos == 0 { location } else { *self.tree.nodes.get(location)?.children.get(r.pos - 1)? };
        let slot = self.grammar.nonterminal(self.tree.nodes[node].symbol.name())?.slot(&r.attr)?;
        Some(InstanceId::new(node, slot))
    }

    pub fn is_failed(&self) -> bool {
        matches!(self.status, EvalStatus::Failed(_))
    }

    pub fn fault(&self) -> Option<&Fault> {
        match &self.status {
            EvalStatus::Failed(f) => Some(f),
            EvalStatus::Completed => None,
        }
    }

    /// Every faulting computation; the first is the one in `status`.
    pub fn faults(&self) -> &[Fault] {
        &self.faults
    }

    pub fn instance_ids(&self) -> &[InstanceId] {
        &self.ids
    }

    pub fn contains(&self, id: InstanceId) -> bool {
        self.index(id).is_some()
    }

    /// `None` for an Undefined instance.
    pub fn value(&self, id: InstanceId) -> Option<&Value> {
        self.values[self.index(id)?].as_ref()
    }

    pub fn comp(&self, id: InstanceId) -> &CompInstance {
        &self.comps[self.index(id).expect("instance of this tree")]
    }

    pub fn comps(&self) -> &[CompInstance] {
        &self.comps
    }

    /// Executed computations in `seq` order.
    pub fn execution_order(&self) -> impl Iterator<Item = &CompInstance> {
        self.order.iter().map(|&i| &self.comps[i])
    }

    pub fn consumers(&self, id: InstanceId) -> impl Iterator<Item = InstanceId> + '_ {
        self.consumers[self.index(id).expect("instance of this tree")].iter().map(|&i| self.ids[i])
    }

    pub fn root(&self) -> NodeId {
        0
    }

    /// Slots of `node`'s nonterminal split by kind.
    fn slots_of(&self, node: NodeId, kind: AttrKind) -> Vec<InstanceId> {
        let Some(decl) = self.grammar.nonterminal(self.tree.nodes[node].symbol.name()) else { return vec![] };
        decl.attrs()
            .enumerate()
            .filter(|(_, (k, _))| *k == kind)
            .map(|(s, _)| InstanceId::new(node, s))
            .collect()
    }

    pub fn inherited_of(&self, node: NodeId) -> Vec<InstanceId> {
        self.slots_of(node, AttrKind::Inherited)
    }

    pub fn synthesized_of(&self, node: NodeId) -> Vec<InstanceId> {
        self.slots_of(node, AttrKind::Synthesized)
    }

    pub fn attr_name(&self, id: InstanceId) -> &str {
        let decl = self.grammar.nonterminal(self.tree.nodes[id.node()].symbol.name()).expect("nonterminal node");
        &decl.slot_attr(id.slot as usize).expect("slot in range").1.name
    }

    pub fn attr_kind(&self, id: InstanceId) -> AttrKind {
        let decl = self.grammar.nonterminal(self.tree.nodes[id.node()].symbol.name()).expect("nonterminal node");
        decl.slot_attr(id.slot as usize).expect("slot in range").0
    }

    pub fn attr_sort(&self, id: InstanceId) -> Sort {
        let decl = self.grammar.nonterminal(self.tree.nodes[id.node()].symbol.name()).expect("nonterminal node");
        decl.slot_attr(id.slot as usize).expect("slot in range").1.sort
    }

    /// `L[5].pos`: symbol, preorder node id, attribute.
    pub fn label(&self, id: InstanceId) -> String {
        format!("{}[{}].{}", self.tree.nodes[id.node()].symbol.name(), id.node, self.attr_name(id))
    }

    /// Accepts `L[5].pos` or `5.pos`.
    pub fn parse_instance(&self, text: &str) -> Option<InstanceId> {
        let (head, attr) = text.trim().rsplit_once('.')?;
        let node: NodeId = match head.split_once('[') {
            Some((sym, rest)) => {
                let n: NodeId = rest.strip_suffix(']')?.parse().ok()?;
                if self.tree.nodes.get(n)?.symbol.name() != sym {
                    return None;
                }
                n
            }
            None => head.parse().ok()?,
        };
        let node_ref = self.tree.nodes.get(node)?;
        if node_ref.symbol.is_terminal() {
            return None;
        }
        let slot = self.grammar.nonterminal(node_ref.symbol.name())?.slot(attr)?;
        Some(InstanceId::new(node, slot))
    }

    /// (attribute instances, tree nodes including terminal leaves)
    pub fn count_instances(&self) -> (usize, usize) {
        (self.ids.len(), self.tree.len())
    }

    pub fn production_id(&self, node: NodeId) -> Option<&ProductionId> {
        self.tree.nodes[node].production.as_ref()
    }

    /// Instances reachable backwards from `targets` through computation inputs.
    pub fn backward_closure(&self, targets: impl IntoIterator<Item = InstanceId>) -> BTreeSet<InstanceId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<InstanceId> = targets.into_iter().collect();
        while let Some(id) = stack.pop() {
            if out.insert(id) {
                stack.extend(self.comp(id).inputs.iter().copied());
            }
        }
        out
    }

    /// Instances reachable forwards from `sources` through consumers.
    pub fn forward_closure(&self, sources: impl IntoIterator<Item = InstanceId>) -> BTreeSet<InstanceId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<InstanceId> = sources.into_iter().collect();
        while let Some(id) = stack.pop() {
            if out.insert(id) {
                stack.extend(self.consumers(id));
            }
        }
        out
    }

    pub fn undefined(&self) -> BTreeSet<InstanceId> {
        self.ids.iter().zip(&self.values).filter(|(_, v)| v.is_none()).map(|(id, _)| *id).collect()
    }

    pub fn root_outputs(&self) -> Vec<(InstanceId, Option<&Value>)> {
        self.synthesized_of(self.root()).into_iter().map(|id| (id, self.value(id))).collect()
    }

    /// One JSON object per computation, in `seq` order with unexecuted
    /// computations last in instance order.
    pub fn export_trace(&self) -> String {
        let mut out = String::new();
        let executed: BTreeSet<usize> = self.order.iter().copied().collect();
        let rest = (0..self.ids.len()).filter(|i| !executed.contains(i));
        for i in self.order.iter().copied().chain(rest) {
            let c = &self.comps[i];
            let fault = self.faults.iter().find(|f| f.comp == c.id);
            let rec = serde_json::json!({
                "id": self.label(c.id),
                "rule": c.rule.0,
                "location": c.location,
                "inputs": c.inputs.iter().map(|&x| self.label(x)).collect::<Vec<_>>(),
                "output": self.label(c.id),
                "value": self.values[i].as_ref().map(Value::to_json),
                "seq": c.seq,
                "fault": fault.map(|f| serde_json::json!({"kind": f.kind, "message": f.message})),
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }
}

fn numeric(v: &Value, what: &str) -> Result<BigRational, RuntimeFault> {
    v.as_rational()
        .ok_or_else(|| RuntimeFault::new(FaultKind::SortMismatch, format!("{what} needs a number, found the {} {v}", v.sort())))
}

fn boolean(v: &Value, what: &str) -> Result<bool, RuntimeFault> {
    match v {
        Value::Bool(b) => Ok(*b),
        _ => Err(RuntimeFault::new(FaultKind::SortMismatch, format!("{what} needs a bool, found the {} {v}", v.sort()))),
    }
}

fn string<'a>(v: &'a Value, what: &str) -> Result<&'a str, RuntimeFault> {
    match v {
        Value::Str(s) => Ok(s),
        _ => Err(RuntimeFault::new(FaultKind::SortMismatch, format!("{what} needs a string, found the {} {v}", v.sort()))),
    }
}

fn map<'a>(v: &'a Value, what: &str) -> Result<&'a BTreeMap<String, Value>, RuntimeFault> {
    match v {
        Value::Map(m) => Ok(m),
        _ => Err(RuntimeFault::new(FaultKind::SortMismatch, format!("{what} needs a map, found the {} {v}", v.sort()))),
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a.as_rational(), b.as_rational()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

fn arith(op: BinOp, a: Value, b: Value) -> Result<Value, RuntimeFault> {
    if let (Value::Int(x), Value::Int(y), true) = (&a, &b, op != BinOp::Div) {
        return Ok(Value::Int(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            _ => x * y,
        }));
    }
    let (x, y) = (numeric(&a, op.symbol())?, numeric(&b, op.symbol())?);
    Ok(Value::Rational(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        _ => {
            if y.is_zero() {
                return Err(RuntimeFault::new(FaultKind::DivisionByZero, format!("{a} / {b}")));
            }
            x / y
        }
    }))
}

/// Evaluates a rule expression; `env` supplies attribute occurrences.
pub fn eval_expr(e: &Expr, env: &mut dyn FnMut(&AttrRef) -> Result<Value, RuntimeFault>) -> Result<Value, RuntimeFault> {
    Ok(match &e.kind {
        ExprKind::Int(n) => Value::Int(n.clone()),
        ExprKind::Bool(b) => Value::Bool(*b),
        ExprKind::Str(s) => Value::Str(s.clone()),
        ExprKind::Attr(r) => env(r)?,
        ExprKind::List(items) => Value::List(items.iter().map(|i| eval_expr(i, env)).collect::<Result<_, _>>()?),
        ExprKind::Unary(UnOp::Neg, x) => match eval_expr(x, env)? {
            Value::Int(n) => Value::Int(-n),
            v => Value::Rational(-numeric(&v, "negation")?),
        },
        ExprKind::Unary(UnOp::Not, x) => Value::Bool(!boolean(&eval_expr(x, env)?, "`!`")?),
        ExprKind::Binary(BinOp::And, a, b) => {
            Value::Bool(boolean(&eval_expr(a, env)?, "`&&`")? && boolean(&eval_expr(b, env)?, "`&&`")?)
        }
        ExprKind::Binary(BinOp::Or, a, b) => {
            Value::Bool(boolean(&eval_expr(a, env)?, "`||`")? || boolean(&eval_expr(b, env)?, "`||`")?)
        }
        ExprKind::Binary(op, a, b) => {
            let (x, y) = (eval_expr(a, env)?, eval_expr(b, env)?);
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => arith(*op, x, y)?,
                BinOp::Eq => Value::Bool(values_equal(&x, &y)),
                BinOp::Ne => Value::Bool(!values_equal(&x, &y)),
                _ => {
                    let (x, y) = (numeric(&x, op.symbol())?, numeric(&y, op.symbol())?);
                    Value::Bool(match op {
                        BinOp::Lt => x < y,
                        BinOp::Le => x <= y,
                        BinOp::Gt => x > y,
                        _ => x >= y,
                    })
                }
            }
        }
        ExprKind::If(c, a, b) => {
            if boolean(&eval_expr(c, env)?, "condition")? {
                eval_expr(a, env)?
            } else {
                eval_expr(b, env)?
            }
        }
        ExprKind::Call(f, args) => {
            let args = args.iter().map(|a| eval_expr(a, env)).collect::<Result<Vec<_>, _>>()?;
            call(*f, args)?
        }
    })
}

fn call(f: Builtin, mut args: Vec<Value>) -> Result<Value, RuntimeFault> {
    Ok(match f {
        Builtin::Pow2 => {
            let Value::Int(n) = &args[0] else {
                return Err(RuntimeFault::new(FaultKind::SortMismatch, format!("pow2 needs an int, found {}", args[0])));
            };
            Value::Rational(pow2(n).ok_or_else(|| RuntimeFault::new(FaultKind::Overflow, format!("pow2({n}) is too large")))?)
        }
        Builtin::Len => Value::Int(BigInt::from(match &args[0] {
            Value::Str(s) => s.chars().count(),
            Value::List(l) => l.len(),
            Value::Map(m) => m.len(),
            v => return Err(RuntimeFault::new(FaultKind::SortMismatch, format!("len of the {} {v}", v.sort()))),
        })),
        Builtin::Concat => match (args.swap_remove(0), args.swap_remove(0)) {
            (Value::Str(a), Value::Str(b)) => Value::Str(a + &b),
            (Value::List(mut a), Value::List(b)) => {
                a.extend(b);
                Value::List(a)
            }
            (a, b) => {
                return Err(RuntimeFault::new(FaultKind::SortMismatch, format!("concat of {} and {}", a.sort(), b.sort())))
            }
        },
        Builtin::MapEmpty => Value::Map(BTreeMap::new()),
        Builtin::MapInsert => {
            let mut m = map(&args[0], "map_insert")?.clone();
            m.insert(string(&args[1], "map_insert")?.to_string(), args[2].clone());
            Value::Map(m)
        }
        Builtin::MapLookup => {
            let key = string(&args[1], "map_lookup")?;
            map(&args[0], "map_lookup")?
                .get(key)
                .cloned()
                .ok_or_else(|| RuntimeFault::new(FaultKind::LookupMiss, format!("no key {key:?}")))?
        }
        Builtin::MapContains => Value::Bool(map(&args[0], "map_contains")?.contains_key(string(&args[1], "map_contains")?)),
        Builtin::ListAppend => {
            let Value::List(mut l) = args.swap_remove(0) else {
                return Err(RuntimeFault::new(FaultKind::SortMismatch, "list_append needs a list"));
            };
            l.push(args.swap_remove(0));
            Value::List(l)
        }
        Builtin::Error => {
            return Err(RuntimeFault::new(FaultKind::UserError, string(&args[0], "error").unwrap_or("error").to_string()))
        }
    })
}
