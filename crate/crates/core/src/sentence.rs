//! Input sentences: tokenizing against a grammar's terminals, chart parsing
//! into a unique parse tree, and the parenthesized tree format.
//!
//! Tree format: a nonterminal node is `(PRODUCTION-ID child ...)`, a terminal
//! leaf is a quoted string. For G1 and `.01`:
//!
//! ```text
//! (F#1 "." (L#2 (B#2 "0")))
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Grammar, ProductionId, Symbol};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseNode {
    pub id: NodeId,
    pub symbol: Symbol,
    /// Set for nonterminal nodes.
    pub production: Option<ProductionId>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    /// Token range `[start, end)` covered by the node.
    pub span: (usize, usize),
}

/// A parse tree whose node ids are preorder indices (terminal leaves included).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseTree {
    pub nodes: Vec<ParseNode>,
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SentenceError {
    #[error("lexical error at offset {offset}: no terminal matches {found:?}")]
    Lex { offset: usize, found: String },
    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("ambiguous input: {symbol} over tokens {start}..{end} has derivations {first} and {second}")]
    Ambiguous { symbol: String, start: usize, end: usize, first: String, second: String },
    #[error("malformed tree: {0}")]
    Format(String),
    #[error("tree does not match grammar: {0}")]
    Shape(String),
}

/// Longest-match split of `input` into terminal literals, skipping
/// whitespace between tokens. Offsets in errors count characters.
pub fn tokenize(g: &Grammar, input: &str) -> Result<Vec<String>, SentenceError> {
    let mut terminals: Vec<&str> = g.terminals.iter().map(String::as_str).collect();
    terminals.sort_by_key(|t| std::cmp::Reverse(t.len()));
    let mut out = Vec::new();
    let mut rest = input;
    while let Some(c) = rest.chars().next() {
        if c.is_whitespace() {
            rest = &rest[c.len_utf8()..];
            continue;
        }
        match terminals.iter().find(|t| rest.starts_with(**t)) {
            Some(t) => {
                out.push(t.to_string());
                rest = &rest[t.len()..];
            }
            None => {
                let offset = input[..input.len() - rest.len()].chars().count();
                return Err(SentenceError::Lex { offset, found: c.to_string() });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Item {
    prod: usize,
    dot: usize,
    origin: usize,
}

struct Chart<'g> {
    g: &'g Grammar,
    tokens: &'g [String],
    /// (production, start) -> ends where it completed
    completed: HashMap<(usize, usize), BTreeSet<usize>>,
    by_lhs: HashMap<&'g str, Vec<usize>>,
    memo: HashMap<(usize, usize, usize), u8>,
}

const MANY: u8 = 2;

fn cap(x: u32) -> u8 {
    x.min(MANY as u32) as u8
}

impl<'g> Chart<'g> {
    /// Number of derivations (capped at 2) of `sym` over `[i, j)`.
    fn count_sym(&mut self, sym: &str, i: usize, j: usize) -> u8 {
        let prods = self.by_lhs.get(sym).cloned().unwrap_or_default();
        let mut total = 0u32;
        for p in prods {
            total += self.count_prod(p, i, j) as u32;
        }
        cap(total)
    }

    fn count_prod(&mut self, p: usize, i: usize, j: usize) -> u8 {
        if !self.completed.get(&(p, i)).is_some_and(|ends| ends.contains(&j)) {
            return 0;
        }
        let key = (p, i, j);
        if let Some(&c) = self.memo.get(&key) {
            return c;
        }
        // a production re-entered over the same span means unbounded derivations
        self.memo.insert(key, MANY);
        let c = self.count_seq(p, 0, i, j);
        self.memo.insert(key, c);
        c
    }

    /// Ways the suffix `rhs[k..]` of production `p` derives `[i, j)`.
    fn count_seq(&mut self, p: usize, k: usize, i: usize, j: usize) -> u8 {
        let rhs = &self.g.productions[p].rhs;
        if k == rhs.len() {
            return (i == j) as u8;
        }
        match &rhs[k] {
            Symbol::Terminal(t) => {
                if i < j && self.tokens[i] == *t {
                    self.count_seq(p, k + 1, i + 1, j)
                } else {
                    0
                }
            }
            Symbol::Nonterminal(n) => {
                let n = n.clone();
                let mut total = 0u32;
                for m in i..=j {
                    let a = self.count_sym(&n, i, m);
                    if a == 0 {
                        continue;
                    }
                    let b = self.count_seq(p, k + 1, m, j);
                    total += a as u32 * b as u32;
                    if total >= MANY as u32 {
                        break;
                    }
                }
                cap(total)
            }
        }
    }

    /// All (production, child spans) alternatives for `sym` over `[i, j)`.
    fn alternatives(&mut self, sym: &str, i: usize, j: usize) -> Vec<(usize, Vec<(usize, usize)>)> {
        let mut out = Vec::new();
        for p in self.by_lhs.get(sym).cloned().unwrap_or_default() {
            if self.count_prod(p, i, j) == 0 {
                continue;
            }
            let mut splits = Vec::new();
            self.splits(p, 0, i, j, &mut Vec::new(), &mut splits);
            out.extend(splits.into_iter().map(|s| (p, s)));
        }
        out
    }

    fn splits(
        &mut self,
        p: usize,
        k: usize,
        i: usize,
        j: usize,
        acc: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if out.len() >= MANY as usize {
            return;
        }
        let rhs = self.g.productions[p].rhs.clone();
        if k == rhs.len() {
            if i == j {
                out.push(acc.clone());
            }
            return;
        }
        match &rhs[k] {
            Symbol::Terminal(t) => {
                if i < j && self.tokens[i] == *t {
                    acc.push((i, i + 1));
                    self.splits(p, k + 1, i + 1, j, acc, out);
                    acc.pop();
                }
            }
            Symbol::Nonterminal(n) => {
                for m in i..=j {
                    if self.count_sym(n, i, m) == 0 || self.count_seq(p, k + 1, m, j) == 0 {
                        continue;
                    }
                    acc.push((i, m));
                    self.splits(p, k + 1, m, j, acc, out);
                    acc.pop();
                }
            }
        }
    }

    /// Builds the first derivation of `sym` over `[i, j)` into `nodes`.
    fn build(&mut self, sym: &str, i: usize, j: usize, parent: Option<NodeId>, nodes: &mut Vec<ParseNode>) -> NodeId {
        let (p, spans) = self.alternatives(sym, i, j).into_iter().next().expect("counted derivation exists");
        let id = nodes.len();
        let prod = &self.g.productions[p];
        nodes.push(ParseNode {
            id,
            symbol: Symbol::Nonterminal(sym.to_string()),
            production: Some(prod.id.clone()),
            children: vec![],
            parent,
            span: (i, j),
        });
        let rhs = prod.rhs.clone();
        let mut children = Vec::with_capacity(rhs.len());
        for (s, (a, b)) in rhs.iter().zip(spans) {
            match s {
                Symbol::Terminal(t) => {
                    let cid = nodes.len();
                    nodes.push(ParseNode {
                        id: cid,
                        symbol: Symbol::Terminal(t.clone()),
                        production: None,
                        children: vec![],
                        parent: Some(id),
                        span: (a, b),
                    });
                    children.push(cid);
                }
                Symbol::Nonterminal(n) => children.push(self.build(n, a, b, Some(id), nodes)),
            }
        }
        nodes[id].children = children;
        id
    }

    fn render(&mut self, p: usize, spans: &[(usize, usize)]) -> String {
        let prod = self.g.productions[p].clone();
        let mut s = format!("({}", prod.id);
        for (sym, &(a, b)) in prod.rhs.iter().zip(spans) {
            match sym {
                Symbol::Terminal(t) => write!(s, " {t:?}").unwrap(),
                Symbol::Nonterminal(n) => {
                    let mut nodes = Vec::new();
                    self.build(n, a, b, None, &mut nodes);
                    let t = ParseTree { nodes, tokens: self.tokens.to_vec() };
                    write!(s, " {}", t.serialize()).unwrap();
                }
            }
        }
        s.push(')');
        s
    }

    /// Walks down from an ambiguous span to the first node with two
    /// distinct alternatives.
    fn find_ambiguity(&mut self, sym: &str, i: usize, j: usize) -> SentenceError {
        let alts = self.alternatives(sym, i, j);
        if alts.len() >= 2 {
            let first = self.render(alts[0].0, &alts[0].1);
            let second = self.render(alts[1].0, &alts[1].1);
            return SentenceError::Ambiguous { symbol: sym.to_string(), start: i, end: j, first, second };
        }
        let (p, spans) = alts.into_iter().next().expect("ambiguous span has a derivation");
        let rhs = self.g.productions[p].rhs.clone();
        for (s, (a, b)) in rhs.iter().zip(spans) {
            if let Symbol::Nonterminal(n) = s {
                if self.count_sym(n, a, b) >= MANY {
                    return self.find_ambiguity(n, a, b);
                }
            }
        }
        // the ambiguity is a cycle through this very span
        SentenceError::Ambiguous {
            symbol: sym.to_string(),
            start: i,
            end: j,
            first: "(cyclic derivation)".into(),
            second: "(cyclic derivation)".into(),
        }
    }
}

fn nullable_set(g: &Grammar) -> BTreeSet<String> {
    let mut nullable = BTreeSet::new();
    loop {
        let before = nullable.len();
        for p in &g.productions {
            if p.rhs.iter().all(|s| matches!(s, Symbol::Nonterminal(n) if nullable.contains(n))) {
                nullable.insert(p.lhs.clone());
            }
        }
        if nullable.len() == before {
            return nullable;
        }
    }
}

/// Earley parse of `tokens`; fails on no derivation or on more than one.
pub fn parse_sentence(g: &Grammar, tokens: &[String]) -> Result<ParseTree, SentenceError> {
    let n = tokens.len();
    let nullable = nullable_set(g);
    let mut by_lhs: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, p) in g.productions.iter().enumerate() {
        by_lhs.entry(p.lhs.as_str()).or_default().push(i);
    }

    let mut sets: Vec<Vec<Item>> = vec![Vec::new(); n + 1];
    let mut seen: Vec<BTreeSet<Item>> = vec![BTreeSet::new(); n + 1];
    let add = |sets: &mut Vec<Vec<Item>>, seen: &mut Vec<BTreeSet<Item>>, k: usize, it: Item| {
        if seen[k].insert(it) {
            sets[k].push(it);
        }
    };
    for &p in by_lhs.get(g.start.as_str()).into_iter().flatten() {
        add(&mut sets, &mut seen, 0, Item { prod: p, dot: 0, origin: 0 });
    }

    for k in 0..=n {
        let mut idx = 0;
        while idx < sets[k].len() {
            let it = sets[k][idx];
            idx += 1;
            let prod = &g.productions[it.prod];
            match prod.rhs.get(it.dot) {
                Some(Symbol::Nonterminal(x)) => {
                    for &q in by_lhs.get(x.as_str()).into_iter().flatten() {
                        add(&mut sets, &mut seen, k, Item { prod: q, dot: 0, origin: k });
                    }
                    if nullable.contains(x) {
                        add(&mut sets, &mut seen, k, Item { dot: it.dot + 1, ..it });
                    }
                }
                Some(Symbol::Terminal(t)) => {
                    if k < n && tokens[k] == *t {
                        add(&mut sets, &mut seen, k + 1, Item { dot: it.dot + 1, ..it });
                    }
                }
                None => {
                    let lhs = &prod.lhs;
                    let waiting: Vec<Item> = sets[it.origin]
                        .iter()
                        .filter(|w| matches!(g.productions[w.prod].rhs.get(w.dot), Some(Symbol::Nonterminal(x)) if x == lhs))
                        .copied()
                        .collect();
                    for w in waiting {
                        add(&mut sets, &mut seen, k, Item { dot: w.dot + 1, ..w });
                    }
                }
            }
        }
    }

    let mut completed: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
    for (k, set) in sets.iter().enumerate() {
        for it in set {
            if it.dot == g.productions[it.prod].rhs.len() {
                completed.entry((it.prod, it.origin)).or_default().insert(k);
            }
        }
    }
    let mut chart = Chart { g, tokens, completed, by_lhs, memo: HashMap::new() };

    match chart.count_sym(&g.start, 0, n) {
        0 => {
            let furthest = (0..=n).rev().find(|&k| !sets[k].is_empty()).unwrap_or(0);
            let message = match tokens.get(furthest) {
                Some(t) => format!("unexpected token {t:?}"),
                None => "unexpected end of input".to_string(),
            };
            Err(SentenceError::Parse { position: furthest, message })
        }
        1 => {
            let mut nodes = Vec::new();
            chart.build(&g.start, 0, n, None, &mut nodes);
            Ok(ParseTree { nodes, tokens: tokens.to_vec() })
        }
        _ => Err(chart.find_ambiguity(&g.start, 0, n)),
    }
}

/// Tokenizes and parses in one step.
pub fn parse_input(g: &Grammar, input: &str) -> Result<ParseTree, SentenceError> {
    parse_sentence(g, &tokenize(g, input)?)
}

impl ParseTree {
    pub fn root(&self) -> &ParseNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &ParseNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = &ParseNode> {
        self.nodes.iter().filter(|n| !n.symbol.is_terminal())
    }

    /// The token text spanned by a node, joined without separators.
    pub fn text(&self, id: NodeId) -> String {
        let (a, b) = self.nodes[id].span;
        self.tokens[a..b].concat()
    }

    /// Whether `desc` lies in the subtree rooted at `anc` (inclusive).
    pub fn is_descendant(&self, desc: NodeId, anc: NodeId) -> bool {
        let mut cur = Some(desc);
        while let Some(c) = cur {
            if c == anc {
                return true;
            }
            cur = self.nodes[c].parent;
        }
        false
    }

    /// Node ids of the subtree rooted at `id`, in preorder.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![];
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Leaf tokens left to right.
    pub fn leaves(&self) -> Vec<String> {
        self.subtree(0)
            .into_iter()
            .filter_map(|n| match &self.nodes[n].symbol {
                Symbol::Terminal(t) => Some(t.clone()),
                Symbol::Nonterminal(_) => None,
            })
            .collect()
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        self.write_node(0, &mut s);
        s
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        let n = &self.nodes[id];
        match (&n.symbol, &n.production) {
            (Symbol::Terminal(t), _) => write!(out, "{t:?}").unwrap(),
            (Symbol::Nonterminal(_), Some(p)) => {
                write!(out, "({p}").unwrap();
                for &c in &n.children {
                    out.push(' ');
                    self.write_node(c, out);
                }
                out.push(')');
            }
            (Symbol::Nonterminal(s), None) => write!(out, "({s}?)").unwrap(),
        }
    }
}

#[derive(Debug)]
enum SExpr {
    Atom(String),
    Str(String),
    List(Vec<SExpr>),
}

fn read_sexpr(text: &str) -> Result<SExpr, SentenceError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let e = read_one(&chars, &mut pos)?;
    while pos < chars.len() && chars[pos].is_whitespace() {
        pos += 1;
    }
    if pos != chars.len() {
        return Err(SentenceError::Format(format!("trailing input at offset {pos}")));
    }
    Ok(e)
}

fn read_one(chars: &[char], pos: &mut usize) -> Result<SExpr, SentenceError> {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
    let Some(&c) = chars.get(*pos) else {
        return Err(SentenceError::Format("unexpected end of document".into()));
    };
    match c {
        '(' => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                while *pos < chars.len() && chars[*pos].is_whitespace() {
                    *pos += 1;
                }
                match chars.get(*pos) {
                    None => return Err(SentenceError::Format("unclosed `(`".into())),
                    Some(')') => {
                        *pos += 1;
                        return Ok(SExpr::List(items));
                    }
                    Some(_) => items.push(read_one(chars, pos)?),
                }
            }
        }
        ')' => Err(SentenceError::Format(format!("unexpected `)` at offset {}", *pos))),
        '"' => {
            *pos += 1;
            let mut s = String::new();
            loop {
                match chars.get(*pos) {
                    None => return Err(SentenceError::Format("unterminated string".into())),
                    Some('"') => {
                        *pos += 1;
                        return Ok(SExpr::Str(s));
                    }
                    Some('\\') => {
                        let e = chars.get(*pos + 1).copied().ok_or_else(|| SentenceError::Format("bad escape".into()))?;
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                        *pos += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        *pos += 1;
                    }
                }
            }
        }
        _ => {
            let mut s = String::new();
            while let Some(&ch) = chars.get(*pos) {
                if ch.is_whitespace() || ch == '(' || ch == ')' || ch == '"' {
                    break;
                }
                s.push(ch);
                *pos += 1;
            }
            Ok(SExpr::Atom(s))
        }
    }
}

/// Reads a tree in the parenthesized format and checks it against `g`.
pub fn load_tree(g: &Grammar, serialized: &str) -> Result<ParseTree, SentenceError> {
    if serialized.trim().is_empty() {
        return Err(SentenceError::Format("empty document".into()));
    }
    let sexpr = read_sexpr(serialized)?;
    let mut tree = ParseTree { nodes: vec![], tokens: vec![] };
    load_node(g, &sexpr, &g.start, None, &mut tree)?;
    Ok(tree)
}

fn load_node(g: &Grammar, e: &SExpr, expected: &str, parent: Option<NodeId>, tree: &mut ParseTree) -> Result<NodeId, SentenceError> {
    let SExpr::List(items) = e else {
        return Err(SentenceError::Shape(format!("expected a {expected} node, found a leaf")));
    };
    let Some(SExpr::Atom(pid)) = items.first() else {
        return Err(SentenceError::Format("a node must start with a production id".into()));
    };
    let prod = g
        .production(&ProductionId(pid.clone()))
        .ok_or_else(|| SentenceError::Shape(format!("unknown production {pid}")))?;
    if prod.lhs != expected {
        return Err(SentenceError::Shape(format!("production {pid} derives {}, expected {expected}", prod.lhs)));
    }
    let kids = &items[1..];
    if kids.len() != prod.rhs.len() {
        return Err(SentenceError::Shape(format!(
            "node {pid} has {} children but {} has {}",
            kids.len(),
            prod.display_header(),
            prod.rhs.len()
        )));
    }
    let id = tree.nodes.len();
    let start = tree.tokens.len();
    tree.nodes.push(ParseNode {
        id,
        symbol: Symbol::Nonterminal(prod.lhs.clone()),
        production: Some(prod.id.clone()),
        children: vec![],
        parent,
        span: (start, start),
    });
    let mut children = Vec::new();
    for (sym, kid) in prod.rhs.iter().zip(kids) {
        match (sym, kid) {
            (Symbol::Terminal(t), SExpr::Str(s)) if s == t => {
                let cid = tree.nodes.len();
                let k = tree.tokens.len();
                tree.tokens.push(t.clone());
                tree.nodes.push(ParseNode {
                    id: cid,
                    symbol: Symbol::Terminal(t.clone()),
                    production: None,
                    children: vec![],
                    parent: Some(id),
                    span: (k, k + 1),
                });
                children.push(cid);
            }
            (Symbol::Terminal(t), _) => {
                return Err(SentenceError::Shape(format!("expected terminal {t:?} under {pid}")));
            }
            (Symbol::Nonterminal(n), kid) => children.push(load_node(g, kid, n, Some(id), tree)?),
        }
    }
    tree.nodes[id].children = children;
    tree.nodes[id].span.1 = tree.tokens.len();
    Ok(id)
}
