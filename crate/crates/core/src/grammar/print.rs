use std::fmt::Write;

use super::*;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::If(..) => 0,
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(..) => 6,
        _ => 7,
    }
}

fn write_expr(p: &Production, e: &Expr, min: u8, out: &mut String) {
    let paren = prec(e) < min;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Int(n) => write!(out, "{n}").unwrap(),
        ExprKind::Bool(b) => write!(out, "{b}").unwrap(),
        ExprKind::Str(s) => out.push_str(&quote(s)),
        ExprKind::Attr(r) => out.push_str(&p.occurrence_text(r)),
        ExprKind::List(items) => {
            out.push('[');
            write_list(p, items, out);
            out.push(']');
        }
        ExprKind::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            write_list(p, args, out);
            out.push(')');
        }
        ExprKind::Unary(op, x) => {
            out.push(if *op == UnOp::Neg { '-' } else { '!' });
            write_expr(p, x, 6, out);
        }
        ExprKind::Binary(op, a, b) => {
            let pr = op.precedence();
            // comparisons are non-associative: parenthesize nested ones on both sides
            let left_min = if pr == 3 { 4 } else { pr };
            write_expr(p, a, left_min, out);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(p, b, pr + 1, out);
        }
        ExprKind::If(c, a, b) => {
            out.push_str("if ");
            write_expr(p, c, 0, out);
            out.push_str(" then ");
            write_expr(p, a, 0, out);
            out.push_str(" else ");
            write_expr(p, b, 0, out);
        }
    }
    if paren {
        out.push(')');
    }
}

fn write_list(p: &Production, items: &[Expr], out: &mut String) {
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(p, a, 0, out);
    }
}

pub(crate) fn expr_to_string(p: &Production, e: &Expr) -> String {
    let mut s = String::new();
    write_expr(p, e, 0, &mut s);
    s
}

pub(crate) fn grammar_to_string(g: &Grammar) -> String {
    let mut out = String::new();
    writeln!(out, "grammar {};\n", g.name).unwrap();
    for nt in &g.nonterminals {
        write!(out, "nonterminal {} {{", nt.name).unwrap();
        for (kind, a) in nt.attrs() {
            let k = if kind == AttrKind::Inherited { "inh" } else { "syn" };
            write!(out, " {k} {}: {};", a.name, a.sort).unwrap();
        }
        out.push_str(" }\n");
    }
    writeln!(out, "\nstart {};", g.start).unwrap();
    for p in &g.productions {
        write!(out, "\nproduction {} ::=", p.lhs).unwrap();
        for (i, s) in p.rhs.iter().enumerate() {
            match s {
                Symbol::Terminal(t) => write!(out, " {}", quote(t)).unwrap(),
                Symbol::Nonterminal(_) => write!(out, " {}", p.occurrence_name(i + 1)).unwrap(),
            }
        }
        out.push_str(" {\n");
        for r in &p.rules {
            writeln!(out, "    {};", p.rule_text(r)).unwrap();
        }
        out.push_str("}\n");
    }
    out
}
