//! Single-rule mutants of a grammar, and the corpus of (mutant, input)
//! pairs whose output visibly differs from the original's.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::evaluator::{evaluate, AttributedTree};
use crate::grammar::{AttrRef, BinOp, Builtin, Expr, ExprKind, Grammar, Production, RuleId, Symbol, UnOp};
use crate::sentence::parse_input;
use crate::value::Sort;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// Integer literal plus or minus one.
    ConstShift,
    /// `+` and `-`, `*` and `/` exchanged.
    OpSwap,
    /// An attribute read replaced by another readable one of the same sort.
    OccurrenceSwap,
    /// An integer read `x` replaced by `x + 1` or `x - 1`.
    IndexShift,
    /// A divisor replaced by `0`.
    DivByZero,
    /// A string key of a map lookup altered.
    LookupBreak,
}

impl Operator {
    pub const ALL: [Operator; 6] = [
        Operator::ConstShift,
        Operator::OpSwap,
        Operator::OccurrenceSwap,
        Operator::IndexShift,
        Operator::DivByZero,
        Operator::LookupBreak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::ConstShift => "const-shift",
            Operator::OpSwap => "op-swap",
            Operator::OccurrenceSwap => "occurrence-swap",
            Operator::IndexShift => "index-shift",
            Operator::DivByZero => "div-by-zero",
            Operator::LookupBreak => "lookup-break",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operator {
    type Err = String;
    fn from_str(s: &str) -> Result<Operator, String> {
        Operator::ALL.into_iter().find(|o| o.name() == s).ok_or_else(|| format!("unknown operator {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mutation {
    pub rule: RuleId,
    pub operator: Operator,
    /// Index into the grammar's site list.
    pub site: usize,
    pub seed: Option<u64>,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutateError {
    #[error("grammar {0} has no applicable mutation site")]
    NoSite(String),
}

/// A candidate edit: the subexpression at `path` in `rule` becomes `replacement`.
#[derive(Clone, Debug)]
struct Site {
    rule: RuleId,
    path: Vec<usize>,
    operator: Operator,
    replacement: Expr,
}

fn int_lit(n: BigInt) -> Expr {
    if n < BigInt::from(0) {
        Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(Expr::new(ExprKind::Int(-n)))))
    } else {
        Expr::new(ExprKind::Int(n))
    }
}

/// Occurrences a rule of `p` may read: inherited of the left side,
/// synthesized of the right-side nonterminals.
fn readable(g: &Grammar, p: &Production) -> Vec<(AttrRef, Sort)> {
    let mut out = Vec::new();
    let lhs = g.nonterminal(&p.lhs).expect("declared");
    for a in &lhs.inherited {
        out.push((AttrRef { pos: 0, attr: a.name.clone() }, a.sort));
    }
    for (i, s) in p.rhs.iter().enumerate() {
        if let Symbol::Nonterminal(n) = s {
            for a in &g.nonterminal(n).expect("declared").synthesized {
                out.push((AttrRef { pos: i + 1, attr: a.name.clone() }, a.sort));
            }
        }
    }
    out
}

fn collect(g: &Grammar, p: &Production, rule: &RuleId, e: &Expr, path: &mut Vec<usize>, out: &mut Vec<Site>) {
    let mut push = |operator, replacement: Expr| {
        out.push(Site { rule: rule.clone(), path: path.clone(), operator, replacement });
    };
    match &e.kind {
        ExprKind::Int(n) => {
            push(Operator::ConstShift, int_lit(n + 1));
            push(Operator::ConstShift, int_lit(n - 1));
        }
        ExprKind::Attr(r) => {
            let sort = g.occurrence_sort(p, r).map(|(_, s)| s);
            for (other, s) in readable(g, p) {
                if other != *r && Some(s) == sort {
                    push(Operator::OccurrenceSwap, Expr::new(ExprKind::Attr(other)));
                }
            }
            if sort == Some(Sort::Int) {
                for op in [BinOp::Add, BinOp::Sub] {
                    let one = Box::new(Expr::new(ExprKind::Int(1.into())));
                    push(Operator::IndexShift, Expr::new(ExprKind::Binary(op, Box::new(e.clone()), one)));
                }
            }
        }
        ExprKind::Binary(op, a, b) => {
            let swapped = match op {
                BinOp::Add => Some(BinOp::Sub),
                BinOp::Sub => Some(BinOp::Add),
                BinOp::Mul => Some(BinOp::Div),
                BinOp::Div => Some(BinOp::Mul),
                _ => None,
            };
            if let Some(s) = swapped {
                push(Operator::OpSwap, Expr::new(ExprKind::Binary(s, a.clone(), b.clone())));
            }
            if *op == BinOp::Div && !matches!(&b.kind, ExprKind::Int(n) if *n == BigInt::from(0)) {
                let zero = Box::new(Expr::new(ExprKind::Int(0.into())));
                push(Operator::DivByZero, Expr::new(ExprKind::Binary(BinOp::Div, a.clone(), zero)));
            }
        }
        ExprKind::Call(f @ (Builtin::MapLookup | Builtin::MapContains | Builtin::MapInsert), args) => {
            if let ExprKind::Str(key) = &args[1].kind {
                let mut args = args.clone();
                args[1] = Expr::new(ExprKind::Str(format!("{key}_")));
                push(Operator::LookupBreak, Expr::new(ExprKind::Call(*f, args)));
            }
        }
        _ => {}
    }
    for (i, c) in e.children().into_iter().enumerate() {
        path.push(i);
        collect(g, p, rule, c, path, out);
        path.pop();
    }
}

fn apply(g: &Grammar, site: &Site) -> Grammar {
    let mut m = g.clone();
    let rule = m
        .productions
        .iter_mut()
        .flat_map(|p| p.rules.iter_mut())
        .find(|r| r.id == site.rule)
        .expect("site rule exists");
    let mut e = &mut rule.expr;
    for &i in &site.path {
        e = e.children_mut().into_iter().nth(i).expect("site path exists");
    }
    let span = e.span;
    *e = Expr { span, ..site.replacement.clone() };
    m
}

/// Every valid single-rule mutant, in a fixed order.
pub fn all_mutants(g: &Grammar) -> Vec<(Grammar, Mutation)> {
    let mut sites = Vec::new();
    for p in &g.productions {
        for r in &p.rules {
            collect(g, p, &r.id, &r.expr, &mut vec![], &mut sites);
        }
    }
    let mut out = Vec::new();
    for s in sites {
        let m = apply(g, &s);
        let (p, before) = g.rule(&s.rule).expect("rule");
        let (_, after) = m.rule(&s.rule).expect("rule");
        if before.expr == after.expr || m.check().is_err() {
            continue;
        }
        let mutation = Mutation {
            rule: s.rule.clone(),
            operator: s.operator,
            site: out.len(),
            seed: None,
            before: p.rule_text(before),
            after: p.rule_text(after),
        };
        out.push((m, mutation));
    }
    out
}

/// Picks one site with a seeded generator; the same seed gives the same mutant.
pub fn mutate_grammar(g: &Grammar, seed: u64) -> Result<(Grammar, Mutation), MutateError> {
    let mut all = all_mutants(g);
    if all.is_empty() {
        return Err(MutateError::NoSite(g.name.clone()));
    }
    let i = ChaCha8Rng::seed_from_u64(seed).gen_range(0..all.len());
    let (m, mut mutation) = all.swap_remove(i);
    mutation.seed = Some(seed);
    Ok((m, mutation))
}

/// A mutant paired with the first input on which it misbehaves.
#[derive(Clone, Debug)]
pub struct Mutant {
    pub id: String,
    pub grammar: Arc<Grammar>,
    pub intended: Arc<Grammar>,
    pub mutation: Mutation,
    pub input: String,
    pub trace: Arc<AttributedTree>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub id: String,
    pub mutation: Mutation,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub mutants: Vec<Mutant>,
    pub skipped: Vec<Skipped>,
}

impl Corpus {
    pub fn extend(&mut self, other: Corpus) {
        self.mutants.extend(other.mutants);
        self.skipped.extend(other.skipped);
    }
}

fn symptom(intended: &AttributedTree, mutant: &AttributedTree) -> bool {
    if mutant.is_failed() {
        return true;
    }
    let a = intended.root_outputs();
    let b = mutant.root_outputs();
    a != b
}

/// Builds the corpus for the given mutants: each keeps the first input where
/// the original completes and the mutant's output differs or it fails.
pub fn build_corpus(intended: Arc<Grammar>, mutants: Vec<(Grammar, Mutation)>, inputs: &[&str]) -> Corpus {
    let mut reference = Vec::new();
    for &input in inputs {
        let Ok(tree) = parse_input(&intended, input) else { continue };
        if let Ok(at) = evaluate(intended.clone(), tree.clone()) {
            if !at.is_failed() {
                reference.push((input, tree, at));
            }
        }
    }
    let mut corpus = Corpus::default();
    for (g, mutation) in mutants {
        let id = format!("{}-{:03}-{}", intended.name.to_lowercase(), mutation.site, mutation.operator);
        let g = Arc::new(g);
        let mut reason = "no input shows a symptom".to_string();
        let mut found = None;
        for (input, tree, at) in &reference {
            match evaluate(g.clone(), tree.clone()) {
                Ok(m) if symptom(at, &m) => {
                    found = Some((input.to_string(), Arc::new(m)));
                    break;
                }
                Ok(_) => {}
                Err(e) => reason = format!("circular on {input:?}: {e}"),
            }
        }
        match found {
            Some((input, trace)) => {
                corpus.mutants.push(Mutant { id, grammar: g, intended: intended.clone(), mutation, input, trace })
            }
            None => corpus.skipped.push(Skipped { id, mutation, reason }),
        }
    }
    corpus
}

/// Every mutant of `intended` against the inputs.
pub fn exhaustive_corpus(intended: Arc<Grammar>, inputs: &[&str]) -> Corpus {
    let mutants = all_mutants(&intended);
    build_corpus(intended, mutants, inputs)
}

/// Mutants for seeds `0..trials`, duplicates dropped.
pub fn seeded_corpus(intended: Arc<Grammar>, inputs: &[&str], trials: u64) -> Corpus {
    let mut seen = std::collections::BTreeSet::new();
    let mut mutants = Vec::new();
    for seed in 0..trials {
        if let Ok((g, m)) = mutate_grammar(&intended, seed) {
            if seen.insert(m.site) {
                mutants.push((g, m));
            }
        }
    }
    build_corpus(intended, mutants, inputs)
}
