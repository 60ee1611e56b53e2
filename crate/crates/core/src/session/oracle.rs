use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::compmodel::Acc;
use crate::evaluator::{eval_expr, AttributedTree, InstanceId, RuntimeFault};
use crate::gad::{Answer, Query};
use crate::grammar::{AttrRef, Grammar};
use crate::value::Value;

use super::transcript::Record;

/// Anything that can answer queries.
pub trait Oracle {
    fn answer(&mut self, at: &AttributedTree, q: &Query) -> Answer;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Correct,
    /// With a note when the intended rules could not produce a value.
    Wrong(Option<String>),
}

/// Re-evaluates the members of `acc` with the intended grammar's rules,
/// reading non-members at their trace values, and compares the outputs.
pub fn reference_judge(intended: &Grammar, at: &AttributedTree, acc: &Acc) -> Verdict {
    let mut memo = HashMap::new();
    for &o in &acc.outputs {
        let Some(actual) = at.value(o) else {
            return Verdict::Wrong(Some(format!("{} is undefined", at.label(o))));
        };
        match recompute(intended, at, acc, o, &mut memo) {
            Ok(v) if v == *actual => {}
            Ok(_) => return Verdict::Wrong(None),
            Err(note) => return Verdict::Wrong(Some(note)),
        }
    }
    Verdict::Correct
}

fn recompute(
    intended: &Grammar,
    at: &AttributedTree,
    acc: &Acc,
    id: InstanceId,
    memo: &mut HashMap<InstanceId, Result<Value, String>>,
) -> Result<Value, String> {
    if !acc.comps.contains(&id) {
        return at.value(id).cloned().ok_or_else(|| format!("{} is undefined", at.label(id)));
    }
    if let Some(r) = memo.get(&id) {
        return r.clone();
    }
    let c = at.comp(id);
    let result = (|| {
        let (prod, rule) = intended.rule(&c.rule).ok_or_else(|| format!("intended grammar has no rule {}", c.rule))?;
        let mut inputs: BTreeMap<AttrRef, Value> = BTreeMap::new();
        for r in rule.expr.references() {
            let i = at.resolve(c.location, &r).ok_or_else(|| format!("cannot resolve {}", prod.occurrence_text(&r)))?;
            inputs.insert(r, recompute(intended, at, acc, i, memo)?);
        }
        let mut env = |r: &AttrRef| -> Result<Value, RuntimeFault> { Ok(inputs[r].clone()) };
        let sort = intended.occurrence_sort(prod, &rule.target).expect("checked grammar").1;
        let v = eval_expr(&rule.expr, &mut env).map_err(|f| format!("intended rule {} fails: {f}", c.rule))?;
        v.coerce(sort).map_err(|v| format!("intended rule {} yields the {} {v}", c.rule, v.sort()))
    })();
    memo.insert(id, result.clone());
    result
}

/// Automated oracle that knows the intended grammar.
pub struct ReferenceOracle {
    pub intended: Arc<Grammar>,
}

impl ReferenceOracle {
    pub fn new(intended: Arc<Grammar>) -> ReferenceOracle {
        ReferenceOracle { intended }
    }
}

impl Oracle for ReferenceOracle {
    fn answer(&mut self, at: &AttributedTree, q: &Query) -> Answer {
        match reference_judge(&self.intended, at, &q.acc) {
            Verdict::Correct => Answer::Correct,
            Verdict::Wrong(_) => Answer::Wrong,
        }
    }
}

/// Replays recorded answers, matched by query fingerprint. Answers Abort
/// once nothing matches.
#[derive(Clone, Debug, Default)]
pub struct ScriptedOracle {
    answers: HashMap<String, VecDeque<(String, Option<String>)>>,
    pub exhausted: bool,
}

impl ScriptedOracle {
    pub fn new(records: &[Record]) -> ScriptedOracle {
        let mut answers: HashMap<String, VecDeque<_>> = HashMap::new();
        for r in records {
            answers.entry(r.fingerprint.clone()).or_default().push_back((r.answer.clone(), r.instance.clone()));
        }
        ScriptedOracle { answers, exhausted: false }
    }
}

impl Oracle for ScriptedOracle {
    fn answer(&mut self, at: &AttributedTree, q: &Query) -> Answer {
        let next = self.answers.get_mut(&q.fingerprint).and_then(VecDeque::pop_front);
        let parsed = next.and_then(|(name, inst)| match name.as_str() {
            "correct" => Some(Answer::Correct),
            "wrong" => Some(Answer::Wrong),
            "skip" => Some(Answer::Skip),
            "abort" => Some(Answer::Abort),
            "wrong_value" => inst.and_then(|i| at.parse_instance(&i)).map(Answer::WrongValue),
            _ => None,
        });
        parsed.unwrap_or_else(|| {
            self.exhausted = true;
            Answer::Abort
        })
    }
}

/// Line-based prompt: `y`, `n`, `s`, `q`, or `w INSTANCE`. End of input aborts.
pub struct ConsoleOracle<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> ConsoleOracle<R, W> {
    pub fn new(input: R, output: W) -> Self {
        ConsoleOracle { input, output }
    }
}

pub const PROMPT: &str = "correct? [y]es [n]o [s]kip [q]uit [w INSTANCE] wrong value: ";

impl<R: BufRead, W: Write> Oracle for ConsoleOracle<R, W> {
    fn answer(&mut self, at: &AttributedTree, q: &Query) -> Answer {
        let _ = write!(self.output, "\n{}", q.render(at));
        loop {
            let _ = write!(self.output, "{PROMPT}");
            let _ = self.output.flush();
            let mut line = String::new();
            match self.input.read_line(&mut line) {
                Ok(0) | Err(_) => return Answer::Abort,
                Ok(_) => {}
            }
            let line = line.trim();
            match line {
                "y" | "yes" => return Answer::Correct,
                "n" | "no" => return Answer::Wrong,
                "s" | "skip" => return Answer::Skip,
                "q" | "quit" => return Answer::Abort,
                _ => {}
            }
            if let Some(rest) = line.strip_prefix("w ") {
                if let Some(id) = at.parse_instance(rest).filter(|&i| at.value(i).is_some()) {
                    return Answer::WrongValue(id);
                }
                let _ = writeln!(self.output, "no evaluated instance {:?}", rest.trim());
                continue;
            }
            let _ = writeln!(self.output, "unrecognized answer {line:?}");
        }
    }
}
