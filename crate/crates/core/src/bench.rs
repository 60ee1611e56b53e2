//! Query counts of each strategy over a mutant corpus.

use std::fmt::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::gad::{GadConfig, GadError, Strategy};
use crate::grammar::bundled;
use crate::mutate::{exhaustive_corpus, seeded_corpus, Corpus, Mutant, Skipped};
use crate::parse_grammar;
use crate::session::{run_trace, ReferenceOracle, SessionError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Cell {
    Done { queries: usize, candidates: usize, found: bool },
    /// The strategy cannot run on a trace that ended in a fault.
    NotApplicable,
    Error { message: String },
}

impl Cell {
    /// `4(1)`; a trailing `!` marks a report that missed the mutated rule.
    pub fn text(&self) -> String {
        match self {
            Cell::Done { queries, candidates, found } => {
                format!("{queries}({candidates}){}", if *found { "" } else { "!" })
            }
            Cell::NotApplicable => "n/a (runtime error)".into(),
            Cell::Error { message } => format!("error: {message}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub mutant: String,
    pub rule: String,
    pub operator: String,
    pub input: String,
    /// Attribute instances of the trace.
    pub attrs: usize,
    /// Parse-tree nodes.
    pub nds: usize,
    pub cells: Vec<(Strategy, Cell)>,
}

impl Row {
    pub fn cell(&self, s: Strategy) -> Option<&Cell> {
        self.cells.iter().find(|(x, _)| *x == s).map(|(_, c)| c)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchReport {
    pub strategies: Vec<Strategy>,
    pub rows: Vec<Row>,
    pub skipped: Vec<Skipped>,
}

fn run_one(m: &Mutant, s: Strategy) -> Cell {
    let mut oracle = ReferenceOracle::new(m.intended.clone());
    match run_trace(m.trace.clone(), GadConfig::new(s, 1), &mut oracle) {
        Ok(out) => Cell::Done {
            queries: out.report.queries_asked,
            candidates: out.report.candidate_rules.len(),
            found: out.report.rule_ids().contains(&&m.mutation.rule),
        },
        Err(SessionError::Gad(GadError::Inapplicable(_))) => Cell::NotApplicable,
        Err(e) => Cell::Error { message: e.to_string() },
    }
}

pub fn bench(corpus: &Corpus, strategies: &[Strategy]) -> BenchReport {
    let rows = corpus
        .mutants
        .par_iter()
        .map(|m| {
            let (attrs, _) = m.trace.count_instances();
            Row {
                mutant: m.id.clone(),
                rule: m.mutation.rule.to_string(),
                operator: m.mutation.operator.to_string(),
                input: m.input.clone(),
                attrs,
                nds: m.trace.tree.len(),
                cells: strategies.iter().map(|&s| (s, run_one(m, s))).collect(),
            }
        })
        .collect();
    BenchReport { strategies: strategies.to_vec(), rows, skipped: corpus.skipped.clone() }
}

fn header(s: Strategy) -> &'static str {
    match s {
        Strategy::Slice => "Slice",
        Strategy::Ad => "AD",
        Strategy::Gad => "GAD",
    }
}

impl BenchReport {
    fn table(&self) -> Vec<Vec<String>> {
        let mut out = vec![["mutant", "rule", "#attrs", "#nds"].iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        out[0].extend(self.strategies.iter().map(|&s| header(s).to_string()));
        for r in &self.rows {
            let mut line = vec![r.mutant.clone(), r.rule.clone(), r.attrs.to_string(), r.nds.to_string()];
            line.extend(self.strategies.iter().map(|&s| r.cell(s).map(Cell::text).unwrap_or_default()));
            out.push(line);
        }
        out
    }

    /// Aligned columns, then one summary line per strategy.
    pub fn to_text(&self) -> String {
        let table = self.table();
        let widths: Vec<usize> = (0..table[0].len()).map(|i| table.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for row in &table {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            writeln!(s, "{}", cells.join("  ").trim_end()).unwrap();
        }
        for &st in &self.strategies {
            let done: Vec<(usize, usize, bool)> = self
                .rows
                .iter()
                .filter_map(|r| match r.cell(st) {
                    Some(Cell::Done { queries, candidates, found }) => Some((*queries, *candidates, *found)),
                    _ => None,
                })
                .collect();
            let na = self.rows.iter().filter(|r| r.cell(st) == Some(&Cell::NotApplicable)).count();
            let total: usize = done.iter().map(|d| d.0).sum();
            let single = done.iter().filter(|d| d.1 == 1).count();
            let found = done.iter().filter(|d| d.2).count();
            writeln!(
                s,
                "# {}: {} runs, {} queries, {} single-rule reports, {} found the mutated rule, {} n/a",
                header(st),
                done.len(),
                total,
                single,
                found,
                na
            )
            .unwrap();
        }
        if !self.skipped.is_empty() {
            writeln!(s, "# skipped {} mutants without a symptom", self.skipped.len()).unwrap();
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let quote = |c: &str| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.to_string()
            }
        };
        self.table().iter().map(|r| r.iter().map(|c| quote(c)).collect::<Vec<_>>().join(",") + "\n").collect()
    }
}

/// `g1`, `minisem` or `all`; `trials` limits to that many seeds, otherwise
/// every mutation site is used.
pub fn named_corpus(name: &str, trials: Option<u64>) -> Option<Corpus> {
    let build = |src: &str, inputs: &str| {
        let g = Arc::new(parse_grammar(src).expect("bundled grammar"));
        let inputs = bundled::lines(inputs);
        match trials {
            Some(n) => seeded_corpus(g, &inputs, n),
            None => exhaustive_corpus(g, &inputs),
        }
    };
    match name {
        "g1" => Some(build(bundled::G1_FIXED, bundled::G1_INPUTS)),
        "minisem" => Some(build(bundled::MINISEM_FIXED, bundled::MINISEM_INPUTS)),
        "all" => {
            let mut c = build(bundled::G1_FIXED, bundled::G1_INPUTS);
            c.extend(build(bundled::MINISEM_FIXED, bundled::MINISEM_INPUTS));
            Some(c)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_gives_empty_table() {
        let r = bench(&Corpus::default(), &Strategy::ALL);
        assert!(r.rows.is_empty());
        assert_eq!(r.to_csv(), "mutant,rule,#attrs,#nds,Slice,AD,GAD\n");
        assert!(r.to_text().starts_with("mutant  rule  #attrs  #nds  Slice  AD  GAD\n"));
    }

    #[test]
    fn g1_rows() {
        let r = bench(&named_corpus("g1", None).unwrap(), &Strategy::ALL);
        assert_eq!(r.rows.len(), 18);
        for row in &r.rows {
            match row.cell(Strategy::Gad).unwrap() {
                Cell::Done { candidates, found, .. } => assert!(*candidates == 1 && *found, "{}", row.mutant),
                c => panic!("{c:?}"),
            }
        }
        let text = r.to_text();
        let line = text.lines().find(|l| l.starts_with("g1-007-index-shift")).unwrap();
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields[..4], ["g1-007-index-shift", "L#1:B.pos", "13", "11"]);
    }

    #[test]
    fn runtime_errors_mark_ad_not_applicable() {
        let c = named_corpus("minisem", None).unwrap();
        let failed = Corpus { mutants: c.mutants.into_iter().filter(|m| m.trace.is_failed()).take(3).collect(), skipped: vec![] };
        let r = bench(&failed, &Strategy::ALL);
        for row in &r.rows {
            assert_eq!(row.cell(Strategy::Ad), Some(&Cell::NotApplicable));
            assert!(matches!(row.cell(Strategy::Slice), Some(Cell::Done { found: true, .. })));
            assert!(matches!(row.cell(Strategy::Gad), Some(Cell::Done { found: true, .. })));
        }
        assert!(r.to_text().contains("n/a (runtime error)"));
    }

    #[test]
    fn unknown_corpus() {
        assert!(named_corpus("nope", None).is_none());
    }
}
