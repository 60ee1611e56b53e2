//! One debugging session: symptom check, then queries until a report.
//!
//! The CLI, the HTTP server and the tests all drive [`Session`]; answers
//! come either from a caller (one at a time) or from an [`Oracle`].

pub mod oracle;
pub mod transcript;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

pub use oracle::{reference_judge, ConsoleOracle, Oracle, ReferenceOracle, ScriptedOracle, Verdict};
pub use transcript::{Record, RecordKind};

use crate::compmodel::full_acc;
use crate::evaluator::{evaluate, AttributedTree, CircularityError, InstanceId};
use crate::gad::{gad_init, Answer, BugReport, GadConfig, GadError, GadState, Query, Step, Termination};
use crate::grammar::Grammar;
use crate::sentence::{parse_input, SentenceError};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Sentence(#[from] SentenceError),
    #[error(transparent)]
    Circularity(#[from] CircularityError),
    #[error(transparent)]
    Gad(#[from] GadError),
    #[error("the output was judged correct; nothing to debug")]
    NothingToDebug,
    #[error("no query is pending")]
    NoPendingQuery,
    #[error("{0} is not an evaluated instance of this trace")]
    UnknownInstance(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Waiting for the verdict on the root outputs.
    Symptom,
    Debugging,
    Done,
    NothingToDebug,
}

pub struct Session {
    pub trace: Arc<AttributedTree>,
    pub config: GadConfig,
    state: Option<GadState>,
    pending: Option<Query>,
    report: Option<BugReport>,
    nothing_to_debug: bool,
    pub transcript: Vec<Record>,
}

impl Session {
    /// A completed trace starts with the symptom query; a failed one is
    /// already known to be wrong and starts debugging at the fault.
    pub fn start(trace: Arc<AttributedTree>, config: GadConfig) -> Result<Session, SessionError> {
        if trace.comps().is_empty() {
            return Err(GadError::EmptyTrace.into());
        }
        let mut s = Session {
            trace: trace.clone(),
            config,
            state: None,
            pending: None,
            report: None,
            nothing_to_debug: false,
            transcript: vec![],
        };
        if trace.is_failed() {
            s.state = Some(gad_init(trace, config)?);
            s.advance();
        } else {
            s.pending = Some(Query::new(&trace, full_acc(&trace), vec![], 0, 0));
        }
        Ok(s)
    }

    pub fn phase(&self) -> Phase {
        if self.nothing_to_debug {
            Phase::NothingToDebug
        } else if self.report.is_some() {
            Phase::Done
        } else if self.state.is_none() {
            Phase::Symptom
        } else {
            Phase::Debugging
        }
    }

    pub fn pending(&self) -> Option<&Query> {
        self.pending.as_ref()
    }

    pub fn report(&self) -> Option<&BugReport> {
        self.report.as_ref()
    }

    pub fn state(&self) -> Option<&GadState> {
        self.state.as_ref()
    }

    /// Answered queries, symptom included; volunteered values do not count.
    pub fn queries_asked(&self) -> usize {
        self.transcript.iter().filter(|r| r.kind != RecordKind::Volunteer).count()
    }

    pub fn answer(&mut self, a: Answer) -> Result<(), SessionError> {
        let q = self.pending.take().ok_or(SessionError::NoPendingQuery)?;
        if let Answer::WrongValue(t) = a {
            if self.trace.value(t).is_none() {
                self.pending = Some(q);
                return Err(SessionError::UnknownInstance(self.trace.label(t)));
            }
        }
        let kind = match (a, &self.state) {
            (Answer::WrongValue(_), _) => RecordKind::Volunteer,
            (_, None) => RecordKind::Symptom,
            _ => RecordKind::Query,
        };
        self.transcript.push(Record::new(&self.trace, kind, &q, a));
        match self.state.as_mut() {
            Some(st) => st.apply_answer(&q, a)?,
            None => match a {
                Answer::Correct => {
                    self.nothing_to_debug = true;
                    return Ok(());
                }
                Answer::Wrong => self.state = Some(gad_init(self.trace.clone(), self.config)?),
                Answer::WrongValue(_) => {
                    let mut st = gad_init(self.trace.clone(), self.config)?;
                    st.apply_answer(&Query { version: st.version(), ..q }, a)?;
                    self.state = Some(st);
                }
                // skipping the symptom leaves nothing to ask
                Answer::Skip | Answer::Abort => {
                    let mut st = gad_init(self.trace.clone(), self.config)?;
                    st.apply_answer(&Query { version: st.version(), ..q }, Answer::Abort)?;
                    self.state = Some(st);
                }
            },
        }
        self.advance();
        Ok(())
    }

    fn advance(&mut self) {
        let st = self.state.as_ref().expect("debugging");
        match st.gad_step() {
            Step::NeedAnswer(q) => self.pending = Some(q),
            Step::Done(mut r) => {
                r.queries_asked = self.queries_asked();
                self.report = Some(r);
            }
        }
    }

    /// Feeds `oracle` until the session ends.
    pub fn run(&mut self, oracle: &mut dyn Oracle) -> Result<(), SessionError> {
        while let Some(q) = self.pending.clone() {
            let a = oracle.answer(&self.trace, &q);
            self.answer(a)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Metrics {
    pub queries_asked: usize,
    pub queries_by_form: BTreeMap<String, usize>,
    pub volunteered: usize,
    pub wall_time: Duration,
}

pub struct SessionOutcome {
    pub trace: Arc<AttributedTree>,
    pub report: BugReport,
    pub transcript: Vec<Record>,
    pub metrics: Metrics,
}

impl SessionOutcome {
    pub fn terminated_by(&self) -> Termination {
        self.report.terminated_by
    }
}

/// Parses, evaluates and debugs `input` against `oracle`.
pub fn run_session(
    g: Arc<Grammar>,
    input: &str,
    config: GadConfig,
    oracle: &mut dyn Oracle,
) -> Result<SessionOutcome, SessionError> {
    let tree = parse_input(&g, input)?;
    let trace = Arc::new(evaluate(g, tree)?);
    run_trace(trace, config, oracle)
}

pub fn run_trace(trace: Arc<AttributedTree>, config: GadConfig, oracle: &mut dyn Oracle) -> Result<SessionOutcome, SessionError> {
    let started = Instant::now();
    let mut s = Session::start(trace, config)?;
    s.run(oracle)?;
    if s.phase() == Phase::NothingToDebug {
        return Err(SessionError::NothingToDebug);
    }
    let report = s.report.take().expect("a finished session has a report");
    let mut metrics = Metrics { queries_asked: s.queries_asked(), wall_time: started.elapsed(), ..Metrics::default() };
    for r in &s.transcript {
        match r.kind {
            RecordKind::Volunteer => metrics.volunteered += 1,
            RecordKind::Symptom => *metrics.queries_by_form.entry("symptom".into()).or_default() += 1,
            RecordKind::Query => {
                let form = r.form.split(' ').next().unwrap_or("").to_string();
                *metrics.queries_by_form.entry(form).or_default() += 1;
            }
        }
    }
    Ok(SessionOutcome { trace: s.trace, report, transcript: s.transcript, metrics })
}

/// Looks up an instance by label, for answers that name one.
pub fn instance(at: &AttributedTree, label: &str) -> Result<InstanceId, SessionError> {
    at.parse_instance(label)
        .filter(|&i| at.value(i).is_some())
        .ok_or_else(|| SessionError::UnknownInstance(label.trim().to_string()))
}
