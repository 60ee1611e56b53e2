//! Static checks: declarations, normal form, completeness and sorts.

use std::collections::BTreeMap;

use super::*;

/// Sort of an expression as far as it is known statically. Values pulled out
/// of maps and lists are `Any` and get checked when they are stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StaticSort {
    Known(Sort),
    Any,
}

impl StaticSort {
    fn is(self, s: Sort) -> bool {
        matches!(self, StaticSort::Known(k) if k == s) || self == StaticSort::Any
    }

    fn numeric(self) -> bool {
        self.is(Sort::Int) || self.is(Sort::Rational)
    }

    /// Whether a value of this sort may be stored in an attribute of `target`.
    pub fn assignable_to(self, target: Sort) -> bool {
        match self {
            StaticSort::Any => true,
            StaticSort::Known(s) => s == target || (s == Sort::Int && target == Sort::Rational),
        }
    }
}

impl std::fmt::Display for StaticSort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StaticSort::Known(s) => write!(f, "{s}"),
            StaticSort::Any => f.write_str("any"),
        }
    }
}

fn err(kind: GrammarErrorKind, span: Span) -> GrammarError {
    GrammarError::new(kind, span)
}

pub(super) fn check(g: &Grammar) -> Result<(), GrammarError> {
    let mut seen = BTreeMap::new();
    for nt in &g.nonterminals {
        if seen.insert(nt.name.as_str(), ()).is_some() {
            return Err(err(GrammarErrorKind::Declaration(format!("nonterminal `{}` declared twice", nt.name)), nt.span));
        }
        if g.terminals.contains(&nt.name) {
            return Err(err(
                GrammarErrorKind::Declaration(format!("`{}` is both a terminal and a nonterminal", nt.name)),
                nt.span,
            ));
        }
    }
    let start = g.nonterminal(&g.start).expect("start resolved by the parser");
    if !start.inherited.is_empty() {
        return Err(err(
            GrammarErrorKind::Declaration(format!("start symbol `{}` may not have inherited attributes", g.start)),
            start.span,
        ));
    }
    if g.productions.is_empty() {
        return Err(err(GrammarErrorKind::Declaration("grammar has no productions".into()), Span::default()));
    }

    for p in &g.productions {
        if g.nonterminal(&p.lhs).is_none() {
            return Err(err(GrammarErrorKind::Undeclared(format!("nonterminal `{}`", p.lhs)), p.span));
        }
        for s in &p.rhs {
            if let Symbol::Nonterminal(n) = s {
                if g.nonterminal(n).is_none() {
                    return Err(err(
                        GrammarErrorKind::Undeclared(format!("nonterminal `{n}` in {}", p.display_header())),
                        p.span,
                    ));
                }
            }
        }
        check_production(g, p)?;
    }

    for nt in &g.nonterminals {
        if !g.productions.iter().any(|p| p.lhs == nt.name) {
            return Err(err(GrammarErrorKind::Declaration(format!("nonterminal `{}` has no production", nt.name)), nt.span));
        }
    }
    Ok(())
}

fn check_production(g: &Grammar, p: &Production) -> Result<(), GrammarError> {
    let mut defined: BTreeMap<AttrRef, Span> = BTreeMap::new();
    for rule in &p.rules {
        let t = &rule.target;
        let Some(sym) = p.symbol_at(t.pos) else {
            return Err(err(GrammarErrorKind::IllegalOccurrence("target out of range".into()), rule.span));
        };
        if t.pos > 0 && p.rhs[t.pos - 1].is_terminal() {
            return Err(err(
                GrammarErrorKind::IllegalOccurrence(format!("terminal {sym:?} has no attributes")),
                rule.span,
            ));
        }
        let Some((kind, decl)) = g.nonterminal(sym).and_then(|n| n.attr(&t.attr)) else {
            return Err(err(
                GrammarErrorKind::Undeclared(format!("attribute `{}`", p.occurrence_text(t))),
                rule.span,
            ));
        };
        let legal = (t.pos == 0 && kind == AttrKind::Synthesized) || (t.pos > 0 && kind == AttrKind::Inherited);
        if !legal {
            return Err(err(
                GrammarErrorKind::IllegalOccurrence(format!(
                    "{} cannot be defined in {}: rules define synthesized attributes of the left-hand side and inherited attributes of the right-hand side",
                    p.occurrence_text(t),
                    p.display_header()
                )),
                rule.span,
            ));
        }
        if defined.insert(t.clone(), rule.span).is_some() {
            return Err(err(
                GrammarErrorKind::DuplicateRule(format!("{} is defined twice in {}", p.occurrence_text(t), p.display_header())),
                rule.span,
            ));
        }
        let sort = sort_of(g, p, &rule.expr)?;
        if !sort.assignable_to(decl.sort) {
            return Err(err(
                GrammarErrorKind::Type(format!(
                    "{} has sort {} but its rule yields {}",
                    p.occurrence_text(t),
                    decl.sort,
                    sort
                )),
                rule.expr.span,
            ));
        }
    }

    // completeness: every syn of the LHS and every inh of each RHS nonterminal
    let mut required = Vec::new();
    let lhs = g.nonterminal(&p.lhs).expect("checked");
    required.extend(lhs.synthesized.iter().map(|a| AttrRef { pos: 0, attr: a.name.clone() }));
    for (i, s) in p.rhs.iter().enumerate() {
        if let Symbol::Nonterminal(n) = s {
            let nt = g.nonterminal(n).expect("checked");
            required.extend(nt.inherited.iter().map(|a| AttrRef { pos: i + 1, attr: a.name.clone() }));
        }
    }
    for r in required {
        if !defined.contains_key(&r) {
            let sym = p.symbol_at(r.pos).unwrap_or("?");
            return Err(err(
                GrammarErrorKind::MissingRule(format!(
                    "no rule defines {sym}.{} ({}) in production {}",
                    r.attr,
                    p.occurrence_text(&r),
                    p.display_header()
                )),
                p.span,
            ));
        }
    }
    Ok(())
}

/// Computes the static sort of `e` in production `p`, checking operand sorts
/// and that every attribute read is an inherited attribute of the LHS or a
/// synthesized attribute of an RHS nonterminal.
pub(crate) fn sort_of(g: &Grammar, p: &Production, e: &Expr) -> Result<StaticSort, GrammarError> {
    use StaticSort::{Any, Known};
    let ty_err = |msg: String| err(GrammarErrorKind::Type(msg), e.span);
    Ok(match &e.kind {
        ExprKind::Int(_) => Known(Sort::Int),
        ExprKind::Bool(_) => Known(Sort::Bool),
        ExprKind::Str(_) => Known(Sort::String),
        ExprKind::List(items) => {
            for i in items {
                sort_of(g, p, i)?;
            }
            Known(Sort::List)
        }
        ExprKind::Attr(r) => {
            let Some(sym) = p.symbol_at(r.pos) else {
                return Err(err(GrammarErrorKind::IllegalOccurrence("occurrence out of range".into()), e.span));
            };
            let Some((kind, decl)) = g.nonterminal(sym).and_then(|n| n.attr(&r.attr)) else {
                return Err(err(GrammarErrorKind::Undeclared(format!("attribute `{}`", p.occurrence_text(r))), e.span));
            };
            let readable = (r.pos == 0 && kind == AttrKind::Inherited) || (r.pos > 0 && kind == AttrKind::Synthesized);
            if !readable {
                return Err(err(
                    GrammarErrorKind::IllegalOccurrence(format!(
                        "{} may not be read in {}: rules read inherited attributes of the left-hand side and synthesized attributes of the right-hand side",
                        p.occurrence_text(r),
                        p.display_header()
                    )),
                    e.span,
                ));
            }
            Known(decl.sort)
        }
        ExprKind::Unary(UnOp::Neg, x) => {
            let s = sort_of(g, p, x)?;
            if !s.numeric() {
                return Err(ty_err(format!("cannot negate a {s}")));
            }
            s
        }
        ExprKind::Unary(UnOp::Not, x) => {
            let s = sort_of(g, p, x)?;
            if !s.is(Sort::Bool) {
                return Err(ty_err(format!("`!` needs a bool, found {s}")));
            }
            Known(Sort::Bool)
        }
        ExprKind::Binary(op, a, b) => {
            let (sa, sb) = (sort_of(g, p, a)?, sort_of(g, p, b)?);
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                    if !sa.numeric() || !sb.numeric() {
                        return Err(ty_err(format!("`{}` needs numbers, found {sa} and {sb}", op.symbol())));
                    }
                    if *op == BinOp::Div || sa == Known(Sort::Rational) || sb == Known(Sort::Rational) {
                        Known(Sort::Rational)
                    } else if sa == Any || sb == Any {
                        Any
                    } else {
                        Known(Sort::Int)
                    }
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    if !sa.numeric() || !sb.numeric() {
                        return Err(ty_err(format!("`{}` needs numbers, found {sa} and {sb}", op.symbol())));
                    }
                    Known(Sort::Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    let ok = sa == Any || sb == Any || sa == sb || (sa.numeric() && sb.numeric());
                    if !ok {
                        return Err(ty_err(format!("cannot compare {sa} with {sb}")));
                    }
                    Known(Sort::Bool)
                }
                BinOp::And | BinOp::Or => {
                    if !sa.is(Sort::Bool) || !sb.is(Sort::Bool) {
                        return Err(ty_err(format!("`{}` needs bools, found {sa} and {sb}", op.symbol())));
                    }
                    Known(Sort::Bool)
                }
            }
        }
        ExprKind::If(c, a, b) => {
            let sc = sort_of(g, p, c)?;
            if !sc.is(Sort::Bool) {
                return Err(ty_err(format!("condition must be a bool, found {sc}")));
            }
            let (sa, sb) = (sort_of(g, p, a)?, sort_of(g, p, b)?);
            match (sa, sb) {
                _ if sa == sb => sa,
                (Any, _) | (_, Any) => Any,
                (Known(x), Known(y)) if x != y && sa.numeric() && sb.numeric() => Known(Sort::Rational),
                _ => return Err(ty_err(format!("branches have different sorts: {sa} and {sb}"))),
            }
        }
        ExprKind::Call(f, args) => {
            let sorts = args.iter().map(|a| sort_of(g, p, a)).collect::<Result<Vec<_>, _>>()?;
            let want = |i: usize, s: Sort| -> Result<(), GrammarError> {
                if sorts[i].is(s) {
                    Ok(())
                } else {
                    Err(err(
                        GrammarErrorKind::Type(format!("argument {} of `{}` must be {s}, found {}", i + 1, f.name(), sorts[i])),
                        args[i].span,
                    ))
                }
            };
            match f {
                Builtin::Pow2 => {
                    want(0, Sort::Int)?;
                    Known(Sort::Rational)
                }
                Builtin::Len => {
                    if !(sorts[0].is(Sort::String) || sorts[0].is(Sort::List) || sorts[0].is(Sort::Map)) {
                        return Err(ty_err(format!("`len` needs a string, list or map, found {}", sorts[0])));
                    }
                    Known(Sort::Int)
                }
                Builtin::Concat => match (sorts[0], sorts[1]) {
                    (Known(Sort::String), s) | (s, Known(Sort::String)) if s.is(Sort::String) => Known(Sort::String),
                    (Known(Sort::List), s) | (s, Known(Sort::List)) if s.is(Sort::List) => Known(Sort::List),
                    (Any, Any) => Any,
                    (a, b) => return Err(ty_err(format!("`concat` needs two strings or two lists, found {a} and {b}"))),
                },
                Builtin::MapEmpty => Known(Sort::Map),
                Builtin::MapInsert => {
                    want(0, Sort::Map)?;
                    want(1, Sort::String)?;
                    Known(Sort::Map)
                }
                Builtin::MapLookup => {
                    want(0, Sort::Map)?;
                    want(1, Sort::String)?;
                    Any
                }
                Builtin::MapContains => {
                    want(0, Sort::Map)?;
                    want(1, Sort::String)?;
                    Known(Sort::Bool)
                }
                Builtin::ListAppend => {
                    want(0, Sort::List)?;
                    Known(Sort::List)
                }
                Builtin::Error => {
                    want(0, Sort::String)?;
                    Any
                }
            }
        }
    })
}
