//! Recursive-descent parser for the `.ag` format (EBNF in `docs/ag-format.md`).

use std::collections::BTreeSet;

use super::lex::{lex, Tok, Token};
use super::*;

/// Parses and statically checks an AG description.
pub fn parse_grammar(source: &str) -> Result<Grammar, GrammarError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let g = p.grammar()?;
    check::check(&g)?;
    Ok(g)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, GrammarError>;

fn syntax(msg: impl Into<String>, span: Span) -> GrammarError {
    GrammarError::new(GrammarErrorKind::Syntax(msg.into()), span)
}

/// Strips a numeric occurrence suffix: `L1` -> (`L`, Some(1)).
fn split_index(name: &str) -> (&str, Option<usize>) {
    let base = name.trim_end_matches(|c: char| c.is_ascii_digit());
    if base.len() == name.len() || base.is_empty() {
        (name, None)
    } else {
        (base, name[base.len()..].parse().ok())
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.is_punct(p) {
            Ok(self.bump().span)
        } else {
            Err(syntax(format!("expected `{p}`, found {}", self.describe()), self.span()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_keyword(kw) {
            Ok(self.bump().span)
        } else {
            Err(syntax(format!("expected `{kw}`, found {}", self.describe()), self.span()))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => Err(syntax(format!("expected identifier, found {}", self.describe()), self.span())),
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn grammar(&mut self) -> PResult<Grammar> {
        self.expect_keyword("grammar")?;
        let (name, _) = self.ident()?;
        self.expect_punct(";")?;

        let mut nonterminals: Vec<NonterminalDecl> = Vec::new();
        let mut productions: Vec<Production> = Vec::new();
        let mut start: Option<(String, Span)> = None;

        loop {
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            if self.is_keyword("nonterminal") {
                nonterminals.push(self.nonterminal()?);
            } else if self.is_keyword("start") {
                let kw = self.bump().span;
                let (s, sp) = self.ident()?;
                self.expect_punct(";")?;
                if start.is_some() {
                    return Err(GrammarError::new(
                        GrammarErrorKind::Declaration("more than one start symbol".into()),
                        kw.to(sp),
                    ));
                }
                start = Some((s, sp));
            } else if self.is_keyword("production") {
                self.production(&mut productions)?;
            } else {
                return Err(syntax(
                    format!("expected `nonterminal`, `start` or `production`, found {}", self.describe()),
                    self.span(),
                ));
            }
        }

        let start = match start {
            Some((s, sp)) => {
                if !nonterminals.iter().any(|n| n.name == s) {
                    return Err(GrammarError::new(GrammarErrorKind::Undeclared(s), sp));
                }
                s
            }
            None => match nonterminals.first() {
                Some(n) => n.name.clone(),
                None => {
                    return Err(GrammarError::new(
                        GrammarErrorKind::Declaration("no nonterminals declared".into()),
                        self.span(),
                    ))
                }
            },
        };

        let terminals: BTreeSet<String> = productions
            .iter()
            .flat_map(|p| p.rhs.iter())
            .filter_map(|s| match s {
                Symbol::Terminal(t) => Some(t.clone()),
                Symbol::Nonterminal(_) => None,
            })
            .collect();

        Ok(Grammar { name, nonterminals, terminals, productions, start })
    }

    fn nonterminal(&mut self) -> PResult<NonterminalDecl> {
        let kw = self.expect_keyword("nonterminal")?;
        let (name, name_span) = self.ident()?;
        if split_index(&name).1.is_some() {
            return Err(GrammarError::new(
                GrammarErrorKind::Declaration(format!("nonterminal name `{name}` may not end in a digit")),
                name_span,
            ));
        }
        self.expect_punct("{")?;
        let mut decl = NonterminalDecl { name, inherited: vec![], synthesized: vec![], span: kw };
        while !self.is_punct("}") {
            let (kind, kspan) = self.ident()?;
            let (attr, aspan) = self.ident()?;
            self.expect_punct(":")?;
            let (sort_name, sspan) = self.ident()?;
            self.expect_punct(";")?;
            let sort = Sort::from_name(&sort_name)
                .ok_or_else(|| GrammarError::new(GrammarErrorKind::Declaration(format!("unknown sort `{sort_name}`")), sspan))?;
            if decl.attr(&attr).is_some() {
                return Err(GrammarError::new(
                    GrammarErrorKind::Declaration(format!("attribute `{attr}` declared twice on {}", decl.name)),
                    aspan,
                ));
            }
            let a = AttrDecl { name: attr, sort };
            match kind.as_str() {
                "inh" => decl.inherited.push(a),
                "syn" => decl.synthesized.push(a),
                _ => return Err(syntax(format!("expected `inh` or `syn`, found `{kind}`"), kspan)),
            }
        }
        let close = self.expect_punct("}")?;
        decl.span = kw.to(close);
        Ok(decl)
    }

    fn production(&mut self, out: &mut Vec<Production>) -> PResult<()> {
        let kw = self.expect_keyword("production")?;
        let (lhs_raw, lhs_span) = self.ident()?;
        let (lhs, idx) = split_index(&lhs_raw);
        if idx.is_some_and(|i| i != 0) {
            return Err(syntax("the left-hand side occurrence is index 0", lhs_span));
        }
        let lhs = lhs.to_string();
        self.expect_punct("::=")?;
        let mut first = true;
        loop {
            let start = if first { kw } else { self.prev_span() };
            first = false;
            let mut rhs = Vec::new();
            while !self.is_punct("{") {
                match self.peek().clone() {
                    Tok::Str(s) => {
                        let sp = self.bump().span;
                        if s.is_empty() || s.chars().any(char::is_whitespace) {
                            return Err(GrammarError::new(
                                GrammarErrorKind::Declaration("terminals must be non-empty and contain no whitespace".into()),
                                sp,
                            ));
                        }
                        rhs.push(Symbol::Terminal(s));
                    }
                    Tok::Ident(s) => {
                        self.bump();
                        rhs.push(Symbol::Nonterminal(split_index(&s).0.to_string()));
                    }
                    _ => return Err(syntax(format!("expected a symbol or `{{`, found {}", self.describe()), self.span())),
                }
            }
            let k = out.iter().filter(|p| p.lhs == lhs).count() + 1;
            let mut prod = Production {
                id: ProductionId(format!("{lhs}#{k}")),
                lhs: lhs.clone(),
                rhs,
                rules: vec![],
                span: start,
            };
            self.expect_punct("{")?;
            while !self.is_punct("}") {
                let rule = self.rule(&prod)?;
                prod.rules.push(rule);
            }
            let close = self.expect_punct("}")?;
            prod.span = start.to(close);
            out.push(prod);
            if !self.eat_punct("|") {
                break;
            }
        }
        Ok(())
    }

    fn resolve(&self, prod: &Production, name: &str, span: Span) -> PResult<usize> {
        let nt_positions = |sym: &str| -> Vec<usize> {
            (1..=prod.rhs.len())
                .filter(|&p| matches!(&prod.rhs[p - 1], Symbol::Nonterminal(n) if n == sym))
                .collect()
        };
        if name == prod.lhs {
            return Ok(0);
        }
        let (base, idx) = split_index(name);
        if let Some(k) = idx {
            if k == 0 && base == prod.lhs {
                return Ok(0);
            }
            let ps = nt_positions(base);
            if k >= 1 && k <= ps.len() {
                return Ok(ps[k - 1]);
            }
        } else {
            let ps = nt_positions(name);
            match ps.len() {
                1 => return Ok(ps[0]),
                0 => {}
                _ => {
                    return Err(GrammarError::new(
                        GrammarErrorKind::IllegalOccurrence(format!(
                            "`{name}` is ambiguous in {}; use {name}1, {name}2, ...",
                            prod.display_header()
                        )),
                        span,
                    ))
                }
            }
        }
        Err(GrammarError::new(
            GrammarErrorKind::IllegalOccurrence(format!("`{name}` is not a symbol of {}", prod.display_header())),
            span,
        ))
    }

    fn attr_ref(&mut self, prod: &Production) -> PResult<(AttrRef, Span)> {
        let (occ, ospan) = self.ident()?;
        self.expect_punct(".")?;
        let (attr, aspan) = self.ident()?;
        let pos = self.resolve(prod, &occ, ospan)?;
        Ok((AttrRef { pos, attr }, ospan.to(aspan)))
    }

    fn rule(&mut self, prod: &Production) -> PResult<SemanticRule> {
        let (target, tspan) = self.attr_ref(prod)?;
        self.expect_punct("=")?;
        let expr = self.expr(prod)?;
        let end = self.expect_punct(";")?;
        let id = RuleId(format!("{}:{}", prod.id, prod.occurrence_text(&target)));
        Ok(SemanticRule { id, target, expr, span: tspan.to(end) })
    }

    fn expr(&mut self, prod: &Production) -> PResult<Expr> {
        if self.is_keyword("if") {
            let start = self.bump().span;
            let c = self.expr(prod)?;
            self.expect_keyword("then")?;
            let a = self.expr(prod)?;
            self.expect_keyword("else")?;
            let b = self.expr(prod)?;
            let span = start.to(b.span);
            return Ok(Expr { kind: ExprKind::If(Box::new(c), Box::new(a), Box::new(b)), span });
        }
        self.binary(prod, 1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, prod: &Production, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary(prod)?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prod, prec + 1)?;
            // comparisons do not chain
            if prec == 3 && self.peek_binop().is_some_and(|o| o.precedence() == 3) {
                return Err(syntax("comparison operators do not chain; add parentheses", self.span()));
            }
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self, prod: &Production) -> PResult<Expr> {
        let op = if self.is_punct("-") {
            Some(UnOp::Neg)
        } else if self.is_punct("!") {
            Some(UnOp::Not)
        } else {
            None
        };
        if let Some(op) = op {
            let start = self.bump().span;
            let e = self.unary(prod)?;
            let span = start.to(e.span);
            return Ok(Expr { kind: ExprKind::Unary(op, Box::new(e)), span });
        }
        self.primary(prod)
    }

    fn primary(&mut self, prod: &Production) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Int(n), span })
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Str(s), span })
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr(prod)?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("[") => {
                self.bump();
                let items = self.args(prod, "]")?;
                Ok(Expr { kind: ExprKind::List(items), span: span.to(self.prev_span()) })
            }
            Tok::Ident(name) => match name.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr { kind: ExprKind::Bool(name == "true"), span })
                }
                "if" => self.expr(prod),
                _ if matches!(self.tokens.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Punct("("))) => {
                    self.bump();
                    self.bump();
                    let b = Builtin::from_name(&name)
                        .ok_or_else(|| GrammarError::new(GrammarErrorKind::Undeclared(format!("builtin `{name}`")), span))?;
                    let args = self.args(prod, ")")?;
                    let span = span.to(self.prev_span());
                    if args.len() != b.arity() {
                        return Err(GrammarError::new(
                            GrammarErrorKind::Type(format!("`{name}` takes {} argument(s), got {}", b.arity(), args.len())),
                            span,
                        ));
                    }
                    Ok(Expr { kind: ExprKind::Call(b, args), span })
                }
                _ => {
                    let (r, span) = self.attr_ref(prod)?;
                    Ok(Expr { kind: ExprKind::Attr(r), span })
                }
            },
            _ => Err(syntax(format!("expected an expression, found {}", self.describe()), span)),
        }
    }

    fn args(&mut self, prod: &Production, close: &str) -> PResult<Vec<Expr>> {
        let mut items = Vec::new();
        if self.eat_punct(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr(prod)?);
            if self.eat_punct(close) {
                return Ok(items);
            }
            self.expect_punct(",")?;
        }
    }
}
