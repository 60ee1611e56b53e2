//! Session logs: one JSON object per line, in the order answers were given.

use serde::{Deserialize, Serialize};

use crate::evaluator::AttributedTree;
use crate::gad::{Answer, Query};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Symptom,
    Query,
    Volunteer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub kind: RecordKind,
    pub fingerprint: String,
    pub form: String,
    /// Sorted labels of premise and conclusion instances.
    pub boundary: Vec<String>,
    /// Labels of the computations the query covered.
    pub acc: Vec<String>,
    pub m: usize,
    pub perm: Vec<usize>,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
}

impl Record {
    pub fn new(at: &AttributedTree, kind: RecordKind, q: &Query, a: Answer) -> Record {
        let mut boundary: Vec<String> = q.boundary().map(|i| at.label(i)).collect();
        boundary.sort();
        Record {
            kind,
            fingerprint: q.fingerprint.clone(),
            form: q.form.describe(at),
            boundary,
            acc: q.acc.comps.iter().map(|&c| at.label(c)).collect(),
            m: q.m,
            perm: q.perm.clone(),
            answer: a.name().to_string(),
            instance: match a {
                Answer::WrongValue(i) => Some(at.label(i)),
                _ => None,
            },
        }
    }
}

pub fn to_jsonl(records: &[Record]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

pub fn from_jsonl(text: &str) -> Result<Vec<Record>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
