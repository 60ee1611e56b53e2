//! The debugging engine.
//!
//! State is a suspect composition plus an ordered list of compositions
//! already judged correct; the uncleared remainder `bug_acs` shrinks with
//! every Correct or Wrong answer until it holds at most `epsilon` rules or
//! no admissible query is left.

pub mod query;
pub mod strategy;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use query::{Query, QueryForm};
pub use strategy::{Candidate, Strategy};

use crate::compmodel::{acc_difference, full_acc, slice_acc, Acc, Metric};
use crate::evaluator::{AttributedTree, InstanceId};
use crate::grammar::{RuleId, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Correct,
    Wrong,
    /// The user asserts this instance holds a wrong value.
    WrongValue(InstanceId),
    Skip,
    Abort,
}

impl Answer {
    pub fn name(self) -> &'static str {
        match self {
            Answer::Correct => "correct",
            Answer::Wrong => "wrong",
            Answer::WrongValue(_) => "wrong_value",
            Answer::Skip => "skip",
            Answer::Abort => "abort",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Epsilon,
    NoAdmissibleQuery,
    Abort,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Epsilon => "epsilon",
            Termination::NoAdmissibleQuery => "no-admissible-query",
            Termination::Abort => "abort",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateRule {
    pub rule: RuleId,
    /// `B.pos = L0.pos + 1`
    pub text: String,
    /// `L ::= B L1`
    pub production: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BugReport {
    pub candidate_comps: Vec<InstanceId>,
    pub candidate_rules: Vec<CandidateRule>,
    pub queries_asked: usize,
    pub terminated_by: Termination,
}

impl BugReport {
    pub fn rule_ids(&self) -> Vec<&RuleId> {
        self.candidate_rules.iter().map(|r| &r.rule).collect()
    }

    pub fn render(&self, at: &AttributedTree) -> String {
        let mut s = format!(
            "{} candidate rule(s) after {} queries ({}):\n",
            self.candidate_rules.len(),
            self.queries_asked,
            self.terminated_by
        );
        for r in &self.candidate_rules {
            s.push_str(&format!("  {}:{}  {}  in {}  [{}]\n", r.span.line, r.span.col, r.text, r.production, r.rule));
        }
        if !self.candidate_comps.is_empty() {
            let labels: Vec<String> = self.candidate_comps.iter().map(|&c| at.label(c)).collect();
            s.push_str(&format!("  instances: {}\n", labels.join(", ")));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadConfig {
    pub strategy: Strategy,
    /// Report threshold, counted in distinct rules.
    pub epsilon: usize,
    /// Weight of the reading-cost penalty in the gad strategy.
    pub lambda: f64,
}

impl Default for GadConfig {
    fn default() -> GadConfig {
        GadConfig { strategy: Strategy::Gad, epsilon: 1, lambda: 0.25 }
    }
}

impl GadConfig {
    pub fn new(strategy: Strategy, epsilon: usize) -> GadConfig {
        GadConfig { strategy, epsilon, ..GadConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GadError {
    #[error("the trace has no computations")]
    EmptyTrace,
    #[error("strategy {0} cannot debug a trace that ended in a runtime error")]
    Inapplicable(Strategy),
    #[error("the query was issued against an older state")]
    Stale,
    #[error("{0} has no value")]
    UndefinedValue(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub fingerprint: String,
    pub form: QueryForm,
    pub acc: BTreeSet<InstanceId>,
    pub m: usize,
    pub perm: Vec<usize>,
    pub answer: Answer,
}

#[derive(Clone, Debug)]
pub struct GadState {
    pub trace: Arc<AttributedTree>,
    pub suspect: Acc,
    pub correct: Vec<Acc>,
    pub config: GadConfig,
    pub history: Vec<HistoryEntry>,
    pub(crate) vetoed: BTreeSet<BTreeSet<InstanceId>>,
    aborted: bool,
    version: u64,
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Step {
    NeedAnswer(Query),
    Done(BugReport),
}

pub fn gad_init(trace: Arc<AttributedTree>, config: GadConfig) -> Result<GadState, GadError> {
    if trace.comps().is_empty() {
        return Err(GadError::EmptyTrace);
    }
    let suspect = match trace.fault() {
        None => full_acc(&trace),
        Some(_) if config.strategy == Strategy::Ad => return Err(GadError::Inapplicable(Strategy::Ad)),
        Some(f) => {
            let comps = trace.backward_closure([f.comp]);
            crate::compmodel::from_comps(&trace, comps, crate::compmodel::Origin::SetOp)
        }
    };
    Ok(GadState {
        trace,
        suspect,
        correct: vec![],
        config,
        history: vec![],
        vetoed: BTreeSet::new(),
        aborted: false,
        version: 0,
    })
}

impl GadState {
    pub fn bug_acs(&self) -> Acc {
        acc_difference(&self.trace, &self.suspect, &self.correct)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn queries_answered(&self) -> usize {
        self.history.iter().filter(|h| !matches!(h.answer, Answer::WrongValue(_))).count()
    }

    pub fn gad_step(&self) -> Step {
        let bug = self.bug_acs();
        if self.aborted {
            return Step::Done(self.report(&bug, Termination::Abort));
        }
        if bug.size(&self.trace, Metric::Rules) <= self.config.epsilon {
            return Step::Done(self.report(&bug, Termination::Epsilon));
        }
        match self.get_next_acc() {
            Some(c) => Step::NeedAnswer(Query::new(&self.trace, c.acc, c.perm, c.m, self.version)),
            None => Step::Done(self.report(&bug, Termination::NoAdmissibleQuery)),
        }
    }

    fn report(&self, bug: &Acc, terminated_by: Termination) -> BugReport {
        let g = &self.trace.grammar;
        let candidate_rules = bug
            .rules(&self.trace)
            .into_iter()
            .map(|id| {
                let (p, r) = g.rule(&id).expect("rule of this grammar");
                CandidateRule { text: p.rule_text(r), production: p.display_header(), span: r.span, rule: id }
            })
            .collect();
        BugReport {
            candidate_comps: bug.comps.iter().copied().collect(),
            candidate_rules,
            queries_asked: self.queries_answered(),
            terminated_by,
        }
    }

    pub fn apply_answer(&mut self, q: &Query, a: Answer) -> Result<(), GadError> {
        if q.version != self.version {
            return Err(GadError::Stale);
        }
        match a {
            Answer::Correct => {
                let suffix: Vec<Acc> = q.perm[q.m..].iter().map(|&i| self.correct[i].clone()).collect();
                self.correct = std::iter::once(q.acc.clone()).chain(suffix).collect();
            }
            Answer::Wrong => {
                let prefix: Vec<Acc> = q.perm[..q.m].iter().map(|&i| self.correct[i].clone()).collect();
                self.suspect = q.acc.clone();
                self.correct = prefix;
            }
            Answer::WrongValue(t) => self.volunteer(t)?,
            Answer::Skip => {
                self.vetoed.insert(q.acc.comps.clone());
            }
            Answer::Abort => self.aborted = true,
        }
        self.history.push(HistoryEntry {
            fingerprint: q.fingerprint.clone(),
            form: q.form.clone(),
            acc: q.acc.comps.clone(),
            m: q.m,
            perm: q.perm.clone(),
            answer: a,
        });
        self.version += 1;
        Ok(())
    }

    /// The suspect becomes the whole slice of `t`; correct entries outside it are dropped.
    fn volunteer(&mut self, t: InstanceId) -> Result<(), GadError> {
        let s = slice_acc(&self.trace, t).map_err(|_| GadError::UndefinedValue(self.trace.label(t)))?;
        self.correct.retain(|c| s.contains(c));
        self.suspect = s;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
