//! Attribute-grammar descriptions: types, the `.ag` text format, static
//! checking and pretty-printing.
//!
//! A rule refers to attribute *occurrences* of its production. Position 0 is
//! the left-hand side; position `k` is the `k`-th right-hand-side symbol
//! (terminals included, so a position doubles as a child index).

mod check;
mod lex;
mod parse;
mod print;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::value::Sort;
pub use check::StaticSort;
pub use parse::parse_grammar;

/// A source region in a `.ag` file, 1-based, end column exclusive.
///
/// Spans never take part in equality: two grammars that differ only in
/// layout compare equal.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn to(self, end: Span) -> Span {
        Span { line: self.line, col: self.col, end_line: end.end_line, end_col: end.end_col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKind {
    Inherited,
    Synthesized,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttrDecl {
    pub name: String,
    pub sort: Sort,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonterminalDecl {
    pub name: String,
    pub inherited: Vec<AttrDecl>,
    pub synthesized: Vec<AttrDecl>,
    pub span: Span,
}

impl NonterminalDecl {
    /// Attributes in slot order: inherited first, then synthesized.
    pub fn attrs(&self) -> impl Iterator<Item = (AttrKind, &AttrDecl)> {
        self.inherited
            .iter()
            .map(|a| (AttrKind::Inherited, a))
            .chain(self.synthesized.iter().map(|a| (AttrKind::Synthesized, a)))
    }

    pub fn attr(&self, name: &str) -> Option<(AttrKind, &AttrDecl)> {
        self.attrs().find(|(_, a)| a.name == name)
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.attrs().position(|(_, a)| a.name == name)
    }

    pub fn slot_attr(&self, slot: usize) -> Option<(AttrKind, &AttrDecl)> {
        self.attrs().nth(slot)
    }

    pub fn attr_count(&self) -> usize {
        self.inherited.len() + self.synthesized.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(String),
}

impl Symbol {
    pub fn name(&self) -> &str {
        match self {
            Symbol::Terminal(s) | Symbol::Nonterminal(s) => s,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductionId(pub String);

impl fmt::Display for ProductionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `production id` + `:` + target occurrence, e.g. `L#1:B.pos`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub String);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An attribute occurrence within a production.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttrRef {
    pub pos: usize,
    pub attr: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Pow2,
    Len,
    Concat,
    MapEmpty,
    MapInsert,
    MapLookup,
    MapContains,
    ListAppend,
    Error,
}

impl Builtin {
    pub const ALL: [Builtin; 9] = [
        Builtin::Pow2,
        Builtin::Len,
        Builtin::Concat,
        Builtin::MapEmpty,
        Builtin::MapInsert,
        Builtin::MapLookup,
        Builtin::MapContains,
        Builtin::ListAppend,
        Builtin::Error,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Pow2 => "pow2",
            Builtin::Len => "len",
            Builtin::Concat => "concat",
            Builtin::MapEmpty => "map_empty",
            Builtin::MapInsert => "map_insert",
            Builtin::MapLookup => "map_lookup",
            Builtin::MapContains => "map_contains",
            Builtin::ListAppend => "list_append",
            Builtin::Error => "error",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::MapEmpty => 0,
            Builtin::Pow2 | Builtin::Len | Builtin::Error => 1,
            Builtin::Concat | Builtin::MapLookup | Builtin::MapContains | Builtin::ListAppend => 2,
            Builtin::MapInsert => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Int(BigInt),
    Bool(bool),
    Str(String),
    Attr(AttrRef),
    List(Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr { kind, span: Span::default() }
    }

    /// Immediate subexpressions, left to right.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Str(_) | ExprKind::Attr(_) => vec![],
            ExprKind::List(items) | ExprKind::Call(_, items) => items.iter().collect(),
            ExprKind::Unary(_, e) => vec![e],
            ExprKind::Binary(_, a, b) => vec![a, b],
            ExprKind::If(c, a, b) => vec![c, a, b],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Str(_) | ExprKind::Attr(_) => vec![],
            ExprKind::List(items) | ExprKind::Call(_, items) => items.iter_mut().collect(),
            ExprKind::Unary(_, e) => vec![e],
            ExprKind::Binary(_, a, b) => vec![a, b],
            ExprKind::If(c, a, b) => vec![c, a, b],
        }
    }

    /// Attribute occurrences read by the expression, deduplicated, in order
    /// of first appearance.
    pub fn references(&self) -> Vec<AttrRef> {
        fn walk(e: &Expr, out: &mut Vec<AttrRef>) {
            if let ExprKind::Attr(r) = &e.kind {
                if !out.contains(r) {
                    out.push(r.clone());
                }
            }
            for c in e.children() {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticRule {
    pub id: RuleId,
    pub target: AttrRef,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Production {
    pub id: ProductionId,
    pub lhs: String,
    pub rhs: Vec<Symbol>,
    pub rules: Vec<SemanticRule>,
    pub span: Span,
}

impl Production {
    /// The symbol at an occurrence position.
    pub fn symbol_at(&self, pos: usize) -> Option<&str> {
        if pos == 0 {
            Some(&self.lhs)
        } else {
            self.rhs.get(pos - 1).map(Symbol::name)
        }
    }

    /// Display name of an occurrence: the bare symbol when unambiguous,
    /// otherwise the symbol with its 0-based (LHS) or 1-based (RHS) index.
    pub fn occurrence_name(&self, pos: usize) -> String {
        let lhs_recurs = self.rhs.iter().any(|s| matches!(s, Symbol::Nonterminal(n) if *n == self.lhs));
        if pos == 0 {
            return if lhs_recurs { format!("{}0", self.lhs) } else { self.lhs.clone() };
        }
        let Some(sym) = self.rhs.get(pos - 1) else {
            return format!("?{pos}");
        };
        let name = sym.name();
        let same: Vec<usize> = (1..=self.rhs.len()).filter(|&p| self.rhs[p - 1] == *sym).collect();
        if *name == self.lhs || same.len() > 1 {
            let k = same.iter().position(|&p| p == pos).unwrap_or(0) + 1;
            format!("{name}{k}")
        } else {
            name.to_string()
        }
    }

    /// `L ::= B L1` style header.
    pub fn display_header(&self) -> String {
        let mut s = format!("{} ::=", self.lhs);
        for (i, sym) in self.rhs.iter().enumerate() {
            s.push(' ');
            match sym {
                Symbol::Terminal(t) => s.push_str(&format!("{t:?}")),
                Symbol::Nonterminal(_) => s.push_str(&self.occurrence_name(i + 1)),
            }
        }
        s
    }

    pub fn occurrence_text(&self, r: &AttrRef) -> String {
        format!("{}.{}", self.occurrence_name(r.pos), r.attr)
    }

    /// `B.pos = L0.pos + 1`
    pub fn rule_text(&self, rule: &SemanticRule) -> String {
        format!("{} = {}", self.occurrence_text(&rule.target), print::expr_to_string(self, &rule.expr))
    }

    pub fn rule(&self, id: &RuleId) -> Option<&SemanticRule> {
        self.rules.iter().find(|r| r.id == *id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    pub name: String,
    pub nonterminals: Vec<NonterminalDecl>,
    pub terminals: BTreeSet<String>,
    pub productions: Vec<Production>,
    pub start: String,
}

impl Grammar {
    pub fn nonterminal(&self, name: &str) -> Option<&NonterminalDecl> {
        self.nonterminals.iter().find(|n| n.name == name)
    }

    pub fn production(&self, id: &ProductionId) -> Option<&Production> {
        self.productions.iter().find(|p| p.id == *id)
    }

    pub fn production_index(&self, id: &ProductionId) -> Option<usize> {
        self.productions.iter().position(|p| p.id == *id)
    }

    /// Finds a rule and the production that owns it.
    pub fn rule(&self, id: &RuleId) -> Option<(&Production, &SemanticRule)> {
        self.productions.iter().find_map(|p| p.rule(id).map(|r| (p, r)))
    }

    pub fn rules(&self) -> impl Iterator<Item = (&Production, &SemanticRule)> {
        self.productions.iter().flat_map(|p| p.rules.iter().map(move |r| (p, r)))
    }

    pub fn rule_count(&self) -> usize {
        self.productions.iter().map(|p| p.rules.len()).sum()
    }

    /// Sort of an occurrence inside a production.
    pub fn occurrence_sort(&self, prod: &Production, r: &AttrRef) -> Option<(AttrKind, Sort)> {
        let sym = prod.symbol_at(r.pos)?;
        let (kind, decl) = self.nonterminal(sym)?.attr(&r.attr)?;
        Some((kind, decl.sort))
    }

    /// `B.pos = L0.pos + 1 in L ::= B L1`
    pub fn describe_rule(&self, id: &RuleId) -> String {
        match self.rule(id) {
            Some((p, r)) => format!("{} in {}", p.rule_text(r), p.display_header()),
            None => id.to_string(),
        }
    }

    /// Canonical `.ag` text; re-parsing it yields an equal grammar.
    /// Re-runs the static checks `parse_grammar` applies, for grammars
    /// built or edited in memory.
    pub fn check(&self) -> Result<(), GrammarError> {
        check::check(self)
    }

    pub fn to_source(&self) -> String {
        print::grammar_to_string(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GrammarErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undeclared symbol: {0}")]
    Undeclared(String),
    #[error("invalid declaration: {0}")]
    Declaration(String),
    #[error("duplicate rule: {0}")]
    DuplicateRule(String),
    #[error("missing rule: {0}")]
    MissingRule(String),
    #[error("type mismatch: {0}")]
    Type(String),
    #[error("illegal occurrence: {0}")]
    IllegalOccurrence(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{span}: {kind}")]
pub struct GrammarError {
    pub kind: GrammarErrorKind,
    pub span: Span,
}

impl GrammarError {
    pub(crate) fn new(kind: GrammarErrorKind, span: Span) -> Self {
        GrammarError { kind, span }
    }
}

/// Result of comparing two grammars' skeletons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShapeCheck {
    SameShape,
    ShapeMismatch(Vec<String>),
}

/// Checks that `g` and `reference` agree on everything except rule bodies:
/// symbols, start symbol, attribute declarations, productions and the set of
/// rule targets.
pub fn validate_against(g: &Grammar, reference: &Grammar) -> ShapeCheck {
    let mut diffs = Vec::new();
    if g.start != reference.start {
        diffs.push(format!("start symbol {} vs {}", g.start, reference.start));
    }
    if g.terminals != reference.terminals {
        diffs.push("terminal sets differ".to_string());
    }
    if g.nonterminals != reference.nonterminals {
        diffs.push("nonterminal declarations differ".to_string());
    }
    if g.productions.len() != reference.productions.len() {
        diffs.push(format!(
            "{} productions vs {}",
            g.productions.len(),
            reference.productions.len()
        ));
    }
    for (p, q) in g.productions.iter().zip(&reference.productions) {
        if p.id != q.id || p.lhs != q.lhs || p.rhs != q.rhs {
            diffs.push(format!("production {} differs from {}", p.display_header(), q.display_header()));
            continue;
        }
        let targets = |x: &Production| x.rules.iter().map(|r| (r.id.clone(), r.target.clone())).collect::<Vec<_>>();
        if targets(p) != targets(q) {
            diffs.push(format!("rule targets of {} differ", p.display_header()));
        }
    }
    if diffs.is_empty() {
        ShapeCheck::SameShape
    } else {
        ShapeCheck::ShapeMismatch(diffs)
    }
}

/// Rule ids whose bodies differ between two same-shape grammars.
pub fn differing_rules(g: &Grammar, other: &Grammar) -> Vec<RuleId> {
    g.rules()
        .filter(|(_, r)| other.rule(&r.id).is_none_or(|(_, o)| o.expr != r.expr))
        .map(|(_, r)| r.id.clone())
        .collect()
}

/// The bundled sample grammars and their test inputs.
pub mod bundled {
    pub const G1_BUGGY: &str = include_str!("../../grammars/g1_buggy.ag");
    pub const G1_FIXED: &str = include_str!("../../grammars/g1_fixed.ag");
    pub const MINISEM_FIXED: &str = include_str!("../../grammars/minisem_fixed.ag");
    pub const G1_INPUTS: &str = include_str!("../../grammars/g1_inputs.txt");
    pub const MINISEM_INPUTS: &str = include_str!("../../grammars/minisem_inputs.txt");

    pub fn lines(text: &str) -> Vec<&str> {
        text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
    }
}

#[cfg(test)]
mod tests;
