//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use attrdbg::bench::{bench, named_corpus, Cell};
use attrdbg::compmodel::{build_comp_tree, slice_acc};
use attrdbg::evaluator::{evaluate, AttributedTree};
use attrdbg::gad::{gad_init, Answer, GadConfig, Query, QueryForm, Strategy, Termination};
use attrdbg::grammar::bundled;
use attrdbg::mutate::{Corpus, Mutant, Operator};
use attrdbg::sentence::parse_input;
use attrdbg::session::{transcript::Record, transcript::RecordKind, Oracle, Phase, ReferenceOracle, Session};
use attrdbg::{parse_grammar, Grammar};

type Check = Result<String, String>;

fn grammar(src: &str) -> Arc<Grammar> {
    Arc::new(parse_grammar(src).unwrap())
}

fn trace(g: &Arc<Grammar>, input: &str) -> Arc<AttributedTree> {
    Arc::new(evaluate(g.clone(), parse_input(g, input).unwrap()).unwrap())
}

fn cli(args: &[&str]) -> (Option<i32>, String, Duration) {
    let t = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_attrdbg")).args(args).output().expect("spawn attrdbg");
    (o.status.code(), String::from_utf8_lossy(&o.stdout).into_owned(), t.elapsed())
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn golden_eval() -> Check {
    for (file, want) in [("g1_buggy.ag", "F.val = 3/8"), ("g1_fixed.ag", "F.val = 5/8")] {
        let (code, out, took) = cli(&["eval", file, ".101"]);
        ensure(code == Some(0), format!("{file}: exit {code:?}"))?;
        ensure(out.lines().last() == Some(want), format!("{file}: last line {:?}", out.lines().last()))?;
        ensure(took < Duration::from_secs(1), format!("{file}: {took:?}"))?;
    }
    Ok("3/8 and 5/8".into())
}

fn comp_tree_node() -> Check {
    let at = trace(&grammar(bundled::G1_BUGGY), ".101");
    let tree = build_comp_tree(&at).map_err(|e| e.to_string())?;
    let n = tree.nodes.iter().find(|n| n.function == "synth_L" && n.text == "01").ok_or("no L node over \"01\"")?;
    let show = |vs: &[(attrdbg::evaluator::InstanceId, attrdbg::Value)]| {
        vs.iter().map(|(i, v)| format!("{}={v}", at.attr_name(*i))).collect::<Vec<_>>().join(",")
    };
    let (args, result) = (show(&n.args), show(&n.result));
    ensure(args == "pos=2" && result == "val=1/8", format!("({args} |- {result})"))?;
    Ok(format!("({args} |- {result})"))
}

fn end_to_end() -> Check {
    let (code, out, took) =
        cli(&["debug", "g1_buggy.ag", ".101", "--strategy", "gad", "--oracle", "reference:g1_fixed.ag", "--epsilon", "1"]);
    ensure(code == Some(0), format!("exit {code:?}"))?;
    let first = out.lines().next().unwrap_or_default();
    let queries: usize = first
        .strip_prefix("1 candidate rule(s) after ")
        .and_then(|r| r.split(' ').next())
        .and_then(|n| n.parse().ok())
        .ok_or(format!("unexpected report {first:?}"))?;
    ensure(out.contains("B.pos = L0.pos + 1  in L ::= B L1"), "wrong rule reported")?;
    ensure(queries <= 6, format!("{queries} queries"))?;
    ensure(took < Duration::from_secs(1), format!("{took:?}"))?;
    Ok(format!("1 rule after {queries} queries in {took:?}"))
}

/// The recursion replayed over label sets, straight from the pseudocode:
/// a correct answer keeps ACC and installs {ACC', ACC_m+1..ACC_n}; a wrong
/// answer recurses on ACC' with {ACC_1..ACC_m}. `perm` is the ordering the
/// engine used to put the contained entries first.
fn replay(start: BTreeSet<String>, records: &[Record], slice: impl Fn(&str) -> BTreeSet<String>) -> BTreeSet<String> {
    let mut acc = start;
    let mut correct: Vec<BTreeSet<String>> = Vec::new();
    for r in records {
        match r.answer.as_str() {
            "wrong" if r.kind == RecordKind::Symptom => {}
            "abort" => break,
            "skip" => {}
            "wrong_value" => {
                let s = slice(r.instance.as_deref().unwrap());
                correct.retain(|c| c.is_subset(&s));
                acc = s;
            }
            a => {
                let ordered: Vec<_> = r.perm.iter().map(|&i| correct[i].clone()).collect();
                let next: BTreeSet<String> = r.acc.iter().cloned().collect();
                if a == "correct" {
                    correct = std::iter::once(next).chain(ordered[r.m..].iter().cloned()).collect();
                } else {
                    acc = next;
                    correct = ordered[..r.m].to_vec();
                }
            }
        }
    }
    let covered: BTreeSet<String> = correct.into_iter().flatten().collect();
    acc.difference(&covered).cloned().collect()
}

struct Run {
    transcript: Vec<Record>,
    candidates: BTreeSet<String>,
    rules: Vec<String>,
    queries: usize,
    progress_violations: Vec<String>,
    undefined_in_query: Vec<String>,
}

fn undefined_shown(at: &AttributedTree, q: &Query) -> Option<String> {
    let mut shown: Vec<_> = q.boundary().collect();
    if let QueryForm::Region { pruned, .. } = &q.form {
        shown.extend(pruned.iter().flat_map(|&n| at.synthesized_of(n)));
    }
    shown.into_iter().find(|&i| at.value(i).is_none()).map(|i| at.label(i))
}

/// Drives a session answer by answer so the invariants can be checked
/// against the engine state before each query is answered.
fn drive(at: &Arc<AttributedTree>, intended: &Arc<Grammar>, strategy: Strategy) -> Result<Run, String> {
    let mut s = Session::start(at.clone(), GadConfig::new(strategy, 1)).map_err(|e| e.to_string())?;
    let mut oracle = ReferenceOracle::new(intended.clone());
    let mut run = Run {
        transcript: vec![],
        candidates: BTreeSet::new(),
        rules: vec![],
        queries: 0,
        progress_violations: vec![],
        undefined_in_query: vec![],
    };
    while let Some(q) = s.pending().cloned() {
        if let Some(l) = undefined_shown(at, &q) {
            run.undefined_in_query.push(format!("{}: {l}", q.form.describe(at)));
        }
        if s.phase() == Phase::Debugging {
            let bug = s.state().unwrap().bug_acs();
            let k = q.acc.comps.intersection(&bug.comps).count();
            if k == 0 || k >= bug.len() {
                run.progress_violations.push(format!("{} k={k} |bug|={}", q.form.describe(at), bug.len()));
            }
        }
        let a = oracle.answer(at, &q);
        s.answer(a).map_err(|e| e.to_string())?;
        run.queries += 1;
        if run.queries > at.comps().len() + 1 {
            return Err("did not terminate".into());
        }
    }
    let report = s.report().ok_or("no report")?;
    run.candidates = report.candidate_comps.iter().map(|&c| at.label(c)).collect();
    run.rules = report.candidate_rules.iter().map(|r| r.rule.to_string()).collect();
    run.transcript = s.transcript.clone();
    Ok(run)
}

fn start_set(at: &Arc<AttributedTree>) -> BTreeSet<String> {
    let st = gad_init(at.clone(), GadConfig::new(Strategy::Gad, 1)).unwrap();
    st.suspect.comps.iter().map(|&c| at.label(c)).collect()
}

fn slicer(at: &Arc<AttributedTree>) -> impl Fn(&str) -> BTreeSet<String> + '_ {
    move |label| {
        let id = attrdbg::session::instance(at, label).unwrap();
        slice_acc(at, id).unwrap().comps.iter().map(|&c| at.label(c)).collect()
    }
}

struct CorpusResults {
    mutants: usize,
    failed_traces: usize,
    missed: Vec<String>,
    gad_single: usize,
    gad_multi: Vec<String>,
    ad_na: usize,
    replay_mismatch: Vec<String>,
    replays: usize,
    progress: Vec<String>,
    undefined: Vec<String>,
    div_mutants: usize,
    div_missed: Vec<String>,
    errors: Vec<String>,
    took: Duration,
}

fn corpus_pass(corpus: &Corpus) -> CorpusResults {
    let t = Instant::now();
    let mut r = CorpusResults {
        mutants: corpus.mutants.len(),
        failed_traces: 0,
        missed: vec![],
        gad_single: 0,
        gad_multi: vec![],
        ad_na: 0,
        replay_mismatch: vec![],
        replays: 0,
        progress: vec![],
        undefined: vec![],
        div_mutants: 0,
        div_missed: vec![],
        errors: vec![],
        took: Duration::ZERO,
    };
    use rayon::prelude::*;
    let runs: Vec<(&Mutant, Strategy, Result<Run, String>)> = corpus
        .mutants
        .par_iter()
        .flat_map_iter(|m| Strategy::ALL.into_iter().map(move |s| (m, s)))
        .map(|(m, s)| {
            if s == Strategy::Ad && m.trace.is_failed() {
                return (m, s, Err("n/a".to_string()));
            }
            (m, s, drive(&m.trace, &m.intended, s))
        })
        .collect();
    r.failed_traces = corpus.mutants.iter().filter(|m| m.trace.is_failed()).count();
    for (m, s, run) in runs {
        let tag = format!("{} {s}", m.id);
        let run = match run {
            Ok(run) => run,
            Err(e) if e == "n/a" => {
                r.ad_na += 1;
                continue;
            }
            Err(e) => {
                r.errors.push(format!("{tag}: {e}"));
                continue;
            }
        };
        let found = run.rules.contains(&m.mutation.rule.to_string());
        if !found {
            r.missed.push(tag.clone());
        }
        if s == Strategy::Gad {
            if run.rules.len() == 1 {
                r.gad_single += 1;
            } else {
                r.gad_multi.push(format!("{} ({} rules)", m.id, run.rules.len()));
            }
        }
        if m.mutation.operator == Operator::DivByZero && m.trace.is_failed() {
            if s == Strategy::Gad {
                r.div_mutants += 1;
            }
            if !found {
                r.div_missed.push(tag.clone());
            }
        }
        r.progress.extend(run.progress_violations.iter().map(|v| format!("{tag}: {v}")));
        r.undefined.extend(run.undefined_in_query.iter().map(|v| format!("{tag}: {v}")));
        r.replays += 1;
        if replay(start_set(&m.trace), &run.transcript, slicer(&m.trace)) != run.candidates {
            r.replay_mismatch.push(tag);
        }
    }
    r.took = t.elapsed();
    r
}

fn extra_replays() -> Result<usize, String> {
    let at = trace(&grammar(bundled::G1_BUGGY), ".101");
    let fixed = grammar(bundled::G1_FIXED);
    let mut n = 0;
    for input in [".101", ".0110", ".11", ".11111"] {
        let at = trace(&grammar(bundled::G1_BUGGY), input);
        for s in Strategy::ALL {
            let run = drive(&at, &fixed, s)?;
            ensure(replay(start_set(&at), &run.transcript, slicer(&at)) == run.candidates, format!("{input} {s}"))?;
            n += 1;
        }
    }
    // A volunteered wrong value and a skip, answered by hand.
    let mut s = Session::start(at.clone(), GadConfig::new(Strategy::Gad, 1)).map_err(|e| e.to_string())?;
    let b3pos = attrdbg::session::instance(&at, "B[3].pos").unwrap();
    s.answer(Answer::WrongValue(b3pos)).map_err(|e| e.to_string())?;
    while s.pending().is_some() {
        s.answer(Answer::Skip).map_err(|e| e.to_string())?;
    }
    let report = s.report().unwrap();
    let cands: BTreeSet<String> = report.candidate_comps.iter().map(|&c| at.label(c)).collect();
    ensure(replay(start_set(&at), &s.transcript, slicer(&at)) == cands, "volunteered session")?;
    ensure(report.terminated_by != Termination::Abort, "volunteered session aborted")?;
    Ok(n + 1)
}

fn fidelity(r: &CorpusResults) -> Check {
    let extra = extra_replays()?;
    ensure(r.replay_mismatch.is_empty(), format!("mismatch: {:?}", &r.replay_mismatch[..r.replay_mismatch.len().min(5)]))?;
    Ok(format!("{} corpus sessions + {extra} sample sessions replay to the same bug set", r.replays))
}

fn soundness(r: &CorpusResults) -> Check {
    ensure(r.errors.is_empty(), format!("errors: {:?}", r.errors))?;
    ensure(r.mutants >= 100, format!("only {} mutants", r.mutants))?;
    ensure(r.missed.is_empty(), format!("missed: {:?}", r.missed))?;
    let gad_runs = r.gad_single + r.gad_multi.len();
    let pct = 100.0 * r.gad_single as f64 / gad_runs as f64;
    ensure(pct >= 95.0, format!("gad single-rule {pct:.1}%"))?;
    ensure(r.took < Duration::from_secs(120), format!("{:?}", r.took))?;
    let mut detail = format!(
        "{} mutants, containment 100% for slice/ad/gad (ad n/a on {} failed traces), gad single-rule {}/{} ({pct:.1}%), {:.1?}",
        r.mutants, r.ad_na, r.gad_single, gad_runs, r.took
    );
    if !r.gad_multi.is_empty() {
        detail.push_str(&format!("; multi-rule: {}", r.gad_multi.join(", ")));
    }
    Ok(detail)
}

fn runtime_errors(r: &CorpusResults, corpus: &Corpus) -> Check {
    ensure(r.div_mutants > 0, "no div-by-zero mutant with a failing trace")?;
    ensure(r.undefined.is_empty(), format!("undefined shown: {:?}", &r.undefined[..r.undefined.len().min(5)]))?;
    ensure(r.div_missed.is_empty(), format!("missed: {:?}", r.div_missed))?;
    let failed = Corpus { mutants: corpus.mutants.iter().filter(|m| m.trace.is_failed()).cloned().collect(), skipped: vec![] };
    let report = bench(&failed, &Strategy::ALL);
    let all_na = report.rows.iter().all(|row| row.cell(Strategy::Ad) == Some(&Cell::NotApplicable));
    ensure(all_na, "bench ran AD on a failed trace")?;
    ensure(report.to_text().contains("n/a"), "bench text lacks n/a")?;
    Ok(format!(
        "{} div-by-zero mutants localized, {} failing traces, no query showed an undefined value, bench AD n/a on all",
        r.div_mutants, r.failed_traces
    ))
}

fn progress(r: &CorpusResults) -> Check {
    ensure(r.errors.is_empty(), format!("errors: {:?}", r.errors))?;
    ensure(r.progress.is_empty(), format!("violations: {:?}", &r.progress[..r.progress.len().min(5)]))?;
    Ok(format!("{} sessions, every query strictly splits the bug set, all terminated", r.replays))
}

fn bench_columns() -> Check {
    let report = bench(&named_corpus("g1", None).ok_or("no g1 corpus")?, &Strategy::ALL);
    let text = report.to_text();
    let header: Vec<&str> = text.lines().next().unwrap_or_default().split_whitespace().collect();
    ensure(header == ["mutant", "rule", "#attrs", "#nds", "Slice", "AD", "GAD"], format!("header {header:?}"))?;
    let cell = |s: &str| {
        let (q, c) = s.split_once('(').unwrap_or(("", ""));
        !q.is_empty() && q.chars().all(|c| c.is_ascii_digit()) && c.strip_suffix(')').is_some_and(|c| c.parse::<usize>().is_ok())
    };
    for line in text.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split_whitespace().collect();
        ensure(f.len() == 7 && f[4..].iter().all(|c| cell(c)), format!("row {line:?}"))?;
    }
    Ok(format!("{} rows like {}", report.rows.len(), text.lines().nth(1).unwrap_or_default().split_whitespace().collect::<Vec<_>>().join(" ")))
}

fn main() -> ExitCode {
    let corpus = named_corpus("all", None).expect("corpus");
    let results = corpus_pass(&corpus);
    let checks: Vec<(&str, Check)> = vec![
        ("golden evaluation", golden_eval()),
        ("computation-tree node", comp_tree_node()),
        ("end-to-end localization", end_to_end()),
        ("recursion replay fidelity", fidelity(&results)),
        ("mutation soundness", soundness(&results)),
        ("runtime-error handling", runtime_errors(&results, &corpus)),
        ("progress and termination", progress(&results)),
        ("bench columns", bench_columns()),
    ];
    let mut failed = 0;
    for (i, (name, c)) in checks.iter().enumerate() {
        match c {
            Ok(d) => println!("PASS {}. {name}: {d}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {}. {name}: {e}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
