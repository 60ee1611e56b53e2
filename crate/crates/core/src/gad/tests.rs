use std::sync::Arc;

use super::*;
use crate::compmodel::subtree_acc;
use crate::evaluator::evaluate;
use crate::grammar::bundled::*;
use crate::grammar::parse_grammar;
use crate::sentence::parse_input;
use crate::session::{reference_judge, Verdict};

fn eval(src: &str, input: &str) -> Arc<AttributedTree> {
    let g = Arc::new(parse_grammar(src).unwrap());
    let t = parse_input(&g, input).unwrap();
    Arc::new(evaluate(g, t).unwrap())
}

fn g1() -> Arc<AttributedTree> {
    eval(G1_BUGGY, ".101")
}

/// Faults at B[9] on ".101": the buggy positions reach 3 there.
fn g1_faulting() -> Arc<AttributedTree> {
    eval(&G1_BUGGY.replace("B.val = pow2(-B.pos);", "B.val = 1 / (B.pos - 3);"), ".101")
}

fn id(at: &AttributedTree, label: &str) -> InstanceId {
    at.parse_instance(label).unwrap()
}

fn state(strategy: Strategy) -> GadState {
    gad_init(g1(), GadConfig::new(strategy, 1)).unwrap()
}

fn next(st: &GadState) -> Query {
    match st.gad_step() {
        Step::NeedAnswer(q) => q,
        Step::Done(r) => panic!("unexpected report {r:?}"),
    }
}

#[test]
fn fresh_state() {
    let st = state(Strategy::Gad);
    assert_eq!(st.suspect.len(), 13);
    assert!(st.correct.is_empty());
    assert_eq!(st.bug_acs().len(), 13);
}

#[test]
fn large_epsilon_reports_everything() {
    let st = gad_init(g1(), GadConfig::new(Strategy::Gad, 999)).unwrap();
    let Step::Done(r) = st.gad_step() else { panic!() };
    assert_eq!(r.terminated_by, Termination::Epsilon);
    assert_eq!(r.candidate_comps.len(), 13);
    assert_eq!(r.candidate_rules.len(), 9);
    assert_eq!(r.queries_asked, 0);
}

#[test]
fn ad_starts_at_inner_l() {
    let st = state(Strategy::Ad);
    let q = next(&st);
    assert_eq!(q.form, QueryForm::Synth { node: 5 });
    let at = &st.trace;
    assert_eq!(q.premise, vec![(id(at, "L[5].pos"), crate::Value::int(2))]);
    assert_eq!(q.conclusion, vec![(id(at, "L[5].val"), crate::Value::ratio(1, 8))]);
    assert_eq!(q.m, 0);
}

#[test]
fn slice_starts_nearest_half() {
    let st = state(Strategy::Slice);
    let q = next(&st);
    // 6 of 13; no slice has 7
    assert_eq!(q.form, QueryForm::Slice { target: id(&st.trace, "L[8].val") });
    assert_eq!(q.acc.len(), 6);
}

#[test]
fn correct_removes_the_acc() {
    let mut st = state(Strategy::Ad);
    let q = next(&st);
    let before = st.bug_acs();
    st.apply_answer(&q, Answer::Correct).unwrap();
    let after = st.bug_acs();
    let expected: BTreeSet<_> = before.comps.difference(&q.acc.comps).copied().collect();
    assert_eq!(after.comps, expected);
    assert_eq!(st.correct.len(), 1);
}

#[test]
fn wrong_narrows_to_the_acc() {
    let mut st = state(Strategy::Ad);
    let q = next(&st);
    st.apply_answer(&q, Answer::Wrong).unwrap();
    assert_eq!(st.suspect, q.acc);
    assert!(st.correct.is_empty());
}

#[test]
fn region_query_keeps_pruned_subtree_in_suffix() {
    let at = g1();
    let mut st = gad_init(at.clone(), GadConfig::new(Strategy::Gad, 1)).unwrap();
    st.correct.push(subtree_acc(&at, 5).unwrap());
    let bug = st.bug_acs().comps;
    let region = crate::compmodel::region_acc(&at, 2, &[5]).unwrap();
    let c = st.admit(region, &bug).expect("admissible");
    assert_eq!(c.m, 0);
    assert_eq!(c.perm, vec![0]);
    let containing = subtree_acc(&at, 2).unwrap();
    let c = st.admit(containing, &bug).expect("admissible");
    assert_eq!(c.m, 1);
}

#[test]
fn partial_overlap_is_inadmissible() {
    let at = g1();
    let mut st = gad_init(at.clone(), GadConfig::new(Strategy::Gad, 1)).unwrap();
    st.correct.push(subtree_acc(&at, 5).unwrap());
    let bug = st.bug_acs().comps;
    // slice of L[8].val reaches into L[5]'s subtree and up to L[2]
    let s = crate::compmodel::slice_acc(&at, id(&at, "L[8].val")).unwrap();
    assert!(!s.contains(&st.correct[0]) && !s.is_disjoint(&st.correct[0]));
    assert!(st.admit(s, &bug).is_none());
}

#[test]
fn volunteered_value_jumps_to_its_slice() {
    let mut st = state(Strategy::Gad);
    let q = next(&st);
    let t = id(&st.trace, "B[3].pos");
    st.apply_answer(&q, Answer::WrongValue(t)).unwrap();
    assert_eq!(st.suspect.len(), 2);
    assert_eq!(st.queries_answered(), 0);
    // one more query at most
    let mut asked = 0;
    let judge_g = Arc::new(parse_grammar(G1_FIXED).unwrap());
    let report = loop {
        match st.gad_step() {
            Step::Done(r) => break r,
            Step::NeedAnswer(q) => {
                asked += 1;
                let a = match reference_judge(&judge_g, &st.trace, &q.acc) {
                    Verdict::Correct => Answer::Correct,
                    Verdict::Wrong(_) => Answer::Wrong,
                };
                st.apply_answer(&q, a).unwrap();
            }
        }
    };
    assert!(asked <= 1);
    let rules: Vec<String> = report.rule_ids().iter().map(|r| r.to_string()).collect();
    assert_eq!(rules, ["L#1:B.pos"]);
}

#[test]
fn stale_query_is_refused() {
    let mut st = state(Strategy::Ad);
    let q = next(&st);
    st.apply_answer(&q, Answer::Correct).unwrap();
    assert_eq!(st.apply_answer(&q, Answer::Wrong), Err(GadError::Stale));
}

#[test]
fn skip_vetoes_the_candidate() {
    let mut st = state(Strategy::Ad);
    let q = next(&st);
    st.apply_answer(&q, Answer::Skip).unwrap();
    let q2 = next(&st);
    assert_ne!(q2.acc.comps, q.acc.comps);
    assert_eq!(st.bug_acs().len(), 13);
}

#[test]
fn skipping_everything_terminates() {
    let mut st = state(Strategy::Gad);
    let mut n = 0;
    let r = loop {
        match st.gad_step() {
            Step::Done(r) => break r,
            Step::NeedAnswer(q) => {
                n += 1;
                st.apply_answer(&q, Answer::Skip).unwrap();
            }
        }
    };
    assert!(n > 0);
    assert_eq!(r.terminated_by, Termination::NoAdmissibleQuery);
    assert_eq!(r.candidate_comps.len(), 13);
}

#[test]
fn abort_ends_the_run() {
    let mut st = state(Strategy::Slice);
    let q = next(&st);
    st.apply_answer(&q, Answer::Abort).unwrap();
    let Step::Done(r) = st.gad_step() else { panic!() };
    assert_eq!(r.terminated_by, Termination::Abort);
}

#[test]
fn ad_is_inapplicable_to_failed_traces() {
    let at = g1_faulting();
    assert!(at.is_failed());
    assert_eq!(gad_init(at.clone(), GadConfig::new(Strategy::Ad, 1)).unwrap_err(), GadError::Inapplicable(Strategy::Ad));
    let st = gad_init(at.clone(), GadConfig::new(Strategy::Gad, 1)).unwrap();
    let fault = at.fault().unwrap().comp;
    assert!(st.suspect.comps.contains(&fault));
    assert_eq!(st.suspect.comps, at.backward_closure([fault]));
}

#[test]
fn failed_trace_queries_have_defined_values() {
    let at = g1_faulting();
    for strategy in [Strategy::Slice, Strategy::Gad] {
        let mut st = gad_init(at.clone(), GadConfig::new(strategy, 1)).unwrap();
        let mut guard = 0;
        while let Step::NeedAnswer(q) = st.gad_step() {
            assert!(q.boundary().all(|i| at.value(i).is_some()));
            assert!(q.acc.comps.iter().all(|&c| at.value(c).is_some()));
            // the fault lies beyond every defined acc, so each one is correct
            st.apply_answer(&q, Answer::Correct).unwrap();
            guard += 1;
            assert!(guard < 20);
        }
    }
}

#[test]
fn progress_holds_along_a_run() {
    for strategy in Strategy::ALL {
        let judge_g = Arc::new(parse_grammar(G1_FIXED).unwrap());
        let mut st = state(strategy);
        while let Step::NeedAnswer(q) = st.gad_step() {
            let bug = st.bug_acs().comps;
            let k = q.acc.comps.intersection(&bug).count();
            assert!(0 < k && k < bug.len(), "{strategy}: {k} of {}", bug.len());
            for (j, &i) in q.perm.iter().enumerate() {
                if j < q.m {
                    assert!(q.acc.contains(&st.correct[i]));
                } else {
                    assert!(q.acc.is_disjoint(&st.correct[i]));
                }
            }
            let a = match reference_judge(&judge_g, &st.trace, &q.acc) {
                Verdict::Correct => Answer::Correct,
                Verdict::Wrong(_) => Answer::Wrong,
            };
            st.apply_answer(&q, a).unwrap();
            assert!(st.bug_acs().len() < bug.len());
        }
    }
}

#[test]
fn query_rendering() {
    let st = state(Strategy::Ad);
    let q = next(&st);
    let text = q.render(&st.trace);
    assert!(text.starts_with("[synth L[5]] synth_L(pos = 2, \"01\") = (val = 1/8)"), "{text}");
    assert_eq!(q.fingerprint.len(), 16);
    assert_eq!(q.to_json(&st.trace)["form"], "synth");
}

#[test]
fn pruned_stub_shows_synthesized_values() {
    let at = g1();
    let (text, n) = query::render_tree(&at, 2, &[5]);
    assert_eq!(text, "(L[2] (B[3] \"1\") <L[5] pruned: val = 1/8>)");
    assert_eq!(n, 4);
}

#[test]
fn fingerprints_depend_on_values() {
    let a = g1();
    let b = eval(G1_FIXED, ".101");
    let form = QueryForm::Synth { node: 0 };
    let root = |at: &AttributedTree| vec![(id(at, "F[0].val"), at.value(id(at, "F[0].val")).unwrap().clone())];
    assert_ne!(query::fingerprint(&a, &form, &[], &root(&a)), query::fingerprint(&b, &form, &[], &root(&b)));
    assert_eq!(query::fingerprint(&a, &form, &[], &root(&a)), query::fingerprint(&a, &form, &[], &root(&a)));
}

mod props {
    use super::*;
    use crate::gad::Strategy as Search;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, prop_assume, prop_oneof, proptest, Just};

    fn input() -> impl proptest::strategy::Strategy<Value = String> {
        use proptest::strategy::Strategy as _;
        proptest::collection::vec(any::<bool>(), 1..=7)
            .prop_map(|bits| std::iter::once('.').chain(bits.iter().map(|b| if *b { '1' } else { '0' })).collect())
    }

    fn strategy() -> impl proptest::strategy::Strategy<Value = Search> {
        prop_oneof![Just(Search::Slice), Just(Search::Ad), Just(Search::Gad)]
    }

    proptest! {
        /// Arbitrary answers: every query strictly splits the bug set, the bug
        /// set stays inside the suspect, correct/wrong answers number at most
        /// |trace|, and a skipped composition is never asked again.
        #[test]
        fn arbitrary_answers_keep_invariants(
            input in input(),
            s in strategy(),
            answers in proptest::collection::vec(0u8..3, 64),
            eps in 1usize..3,
        ) {
            let at = eval(G1_BUGGY, &input);
            let mut st = gad_init(at.clone(), GadConfig::new(s, eps)).unwrap();
            let mut asked = 0;
            let mut decisive = 0;
            let mut skipped = std::collections::BTreeSet::new();
            let report = loop {
                match st.gad_step() {
                    Step::Done(r) => break r,
                    Step::NeedAnswer(q) => {
                        let bug = st.bug_acs();
                        prop_assert!(bug.comps.is_subset(&st.suspect.comps));
                        let k = q.acc.comps.intersection(&bug.comps).count();
                        prop_assert!(0 < k && k < bug.len());
                        let a = match answers[asked % answers.len()] {
                            0 => Answer::Correct,
                            1 => Answer::Wrong,
                            _ => Answer::Skip,
                        };
                        if a == Answer::Skip {
                            // a skip vetoes that composition for good
                            prop_assert!(skipped.insert(q.acc.comps.clone()));
                        } else {
                            decisive += 1;
                        }
                        st.apply_answer(&q, a).unwrap();
                        asked += 1;
                        prop_assert!(decisive <= at.comps().len());
                    }
                }
            };
            prop_assert_eq!(report.queries_asked, asked);
            prop_assert!(!report.candidate_comps.is_empty());
            let rules = report.rule_ids().len();
            prop_assert!(report.terminated_by != Termination::Epsilon || rules <= eps);
        }

        /// Truthful answers from the intended grammar never lose the planted rule.
        #[test]
        fn reference_answers_contain_the_bug(input in input(), s in strategy()) {
            let at = eval(G1_BUGGY, &input);
            let intended = Arc::new(parse_grammar(G1_FIXED).unwrap());
            let full = crate::compmodel::full_acc(&at);
            prop_assume!(matches!(reference_judge(&intended, &at, &full), Verdict::Wrong(_)));
            let mut st = gad_init(at.clone(), GadConfig::new(s, 1)).unwrap();
            let report = loop {
                match st.gad_step() {
                    Step::Done(r) => break r,
                    Step::NeedAnswer(q) => {
                        let a = match reference_judge(&intended, &at, &q.acc) {
                            Verdict::Correct => Answer::Correct,
                            Verdict::Wrong(_) => Answer::Wrong,
                        };
                        st.apply_answer(&q, a).unwrap();
                    }
                }
            };
            prop_assert!(report.rule_ids().iter().any(|r| r.to_string() == "L#1:B.pos"), "{:?}", report.rule_ids());
        }
    }
}
