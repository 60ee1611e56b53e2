use std::sync::Arc;

use super::*;
use crate::evaluator::evaluate;
use crate::grammar::bundled::*;
use crate::grammar::parse_grammar;
use crate::sentence::parse_input;

fn eval(src: &str, input: &str) -> AttributedTree {
    let g = Arc::new(parse_grammar(src).unwrap());
    let t = parse_input(&g, input).unwrap();
    evaluate(g, t).unwrap()
}

fn ids(at: &AttributedTree, labels: &[&str]) -> BTreeSet<InstanceId> {
    labels.iter().map(|l| at.parse_instance(l).unwrap()).collect()
}

fn g1() -> AttributedTree {
    eval(G1_BUGGY, ".101")
}

#[test]
fn subtree_of_inner_l() {
    let at = g1();
    let a = subtree_acc(&at, 5).unwrap();
    assert_eq!(a.len(), 7);
    assert_eq!(a.premise, ids(&at, &["L[5].pos"]));
    assert_eq!(a.outputs, ids(&at, &["L[5].val"]));
    assert_eq!(at.value(at.parse_instance("L[5].pos").unwrap()), Some(&Value::int(2)));
    assert!(a.is_closed(&at));
}

#[test]
fn subtree_of_root_and_leaf() {
    let at = g1();
    let root = subtree_acc(&at, 0).unwrap();
    assert_eq!(root.len(), 13);
    assert!(root.premise.is_empty());
    assert_eq!(root.outputs, ids(&at, &["F[0].val"]));
    let b = subtree_acc(&at, 9).unwrap();
    assert_eq!(b.comps, ids(&at, &["B[9].val"]));
    assert_eq!(b.premise, ids(&at, &["B[9].pos"]));
    assert_eq!(at.value(at.parse_instance("B[9].val").unwrap()), Some(&Value::ratio(1, 8)));
}

#[test]
fn subtree_needs_nonterminal() {
    assert_eq!(subtree_acc(&g1(), 4), Err(AccError::NotNonterminal(4)));
    assert_eq!(subtree_acc(&g1(), 99), Err(AccError::NotNonterminal(99)));
}

#[test]
fn region_pruning_inner_l() {
    let at = g1();
    let r = region_acc(&at, 2, &[5]).unwrap();
    assert_eq!(r.comps, ids(&at, &["B[3].pos", "B[3].val", "L[5].pos", "L[2].val"]));
    assert_eq!(r.premise, ids(&at, &["L[2].pos", "L[5].val"]));
    assert_eq!(r.outputs, ids(&at, &["L[2].val", "L[5].pos"]));
    assert!(r.is_closed(&at));
}

#[test]
fn region_pruning_both_children() {
    let at = g1();
    let r = region_acc(&at, 2, &[3, 5]).unwrap();
    assert_eq!(r.comps, ids(&at, &["B[3].pos", "L[5].pos", "L[2].val"]));
    assert_eq!(r.premise, ids(&at, &["L[2].pos", "L[5].val", "B[3].val"]));
    assert_eq!(r.outputs, ids(&at, &["L[2].val", "L[5].pos", "B[3].pos"]));
    assert!(r.is_closed(&at));
}

#[test]
fn region_without_pruning_is_subtree() {
    let at = g1();
    for n in [0, 2, 5, 8, 9] {
        let r = region_acc(&at, n, &[]).unwrap();
        let s = subtree_acc(&at, n).unwrap();
        assert_eq!((&r.comps, &r.premise, &r.outputs), (&s.comps, &s.premise, &s.outputs));
    }
}

#[test]
fn region_rejects_bad_pruning() {
    let at = g1();
    assert!(matches!(region_acc(&at, 2, &[5, 8]), Err(AccError::Nesting(_))));
    assert!(matches!(region_acc(&at, 5, &[2]), Err(AccError::Nesting(_))));
    assert!(matches!(region_acc(&at, 5, &[5]), Err(AccError::Nesting(_))));
}

#[test]
fn slices() {
    let at = g1();
    // B.val = 0 ignores B.pos, so the pos of the "0" digit is dead
    let all = slice_acc(&at, at.parse_instance("F[0].val").unwrap()).unwrap();
    assert_eq!(all.len(), 12);
    assert!(!all.comps.contains(&at.parse_instance("B[6].pos").unwrap()));
    assert_eq!(slice_acc(&eval(G1_BUGGY, ".111"), InstanceId::new(0, 0)).unwrap().len(), 13);
    let s = slice_acc(&at, at.parse_instance("B[3].pos").unwrap()).unwrap();
    assert_eq!(s.comps, ids(&at, &["L[2].pos", "B[3].pos"]));
    let s = slice_acc(&at, at.parse_instance("L[8].val").unwrap()).unwrap();
    assert_eq!(s.comps, ids(&at, &["L[2].pos", "L[5].pos", "L[8].pos", "B[9].pos", "B[9].val", "L[8].val"]));
    assert!(s.premise.is_empty());
    assert!(s.is_closed(&at));
}

#[test]
fn slice_within_stops_at_edge() {
    let at = g1();
    let within = subtree_acc(&at, 5).unwrap().comps;
    let s = slice_within(&at, at.parse_instance("L[8].val").unwrap(), &within);
    assert_eq!(s.comps, ids(&at, &["L[8].pos", "B[9].pos", "B[9].val", "L[8].val"]));
    assert_eq!(s.premise, ids(&at, &["L[5].pos"]));
    assert!(s.is_closed(&at));
}

#[test]
fn differences() {
    let at = g1();
    let root = subtree_acc(&at, 0).unwrap();
    assert!(acc_difference(&at, &root, std::slice::from_ref(&root)).is_empty());
    assert_eq!(acc_difference(&at, &root, &[]), root);
    let inner = subtree_acc(&at, 5).unwrap();
    let d = acc_difference(&at, &root, &[inner]);
    assert_eq!(d.len(), 6);
    assert_eq!(d.origin, Origin::SetOp);
    assert!(d.is_closed(&at));
    assert_eq!(d.premise, ids(&at, &["L[5].val"]));
    assert_eq!(d.outputs, ids(&at, &["F[0].val", "L[5].pos"]));
}

#[test]
fn sizes() {
    let at = g1();
    let root = full_acc(&at);
    assert_eq!(root.size(&at, Metric::Instances), 13);
    assert_eq!(root.size(&at, Metric::Rules), 9);
    assert_eq!(Acc::empty().size(&at, Metric::Instances), 0);
    assert_eq!(Acc::empty().size(&at, Metric::Rules), 0);
}

#[test]
fn comp_tree_g1() {
    let at = g1();
    let ct = build_comp_tree(&at).unwrap();
    assert_eq!(ct.nodes.len(), 7);
    let root = &ct.nodes[0];
    assert_eq!(root.function, "synth_F");
    assert_eq!(root.text, ".101");
    assert!(root.args.is_empty());
    assert_eq!(root.result, vec![(at.parse_instance("F[0].val").unwrap(), Value::ratio(3, 8))]);
    let l = ct.find(5).unwrap();
    assert_eq!(l.function, "synth_L");
    assert_eq!(l.text, "01");
    assert_eq!(l.args[0].1, Value::int(2));
    assert_eq!(l.result[0].1, Value::ratio(1, 8));
    assert_eq!(l.children.len(), 2);
    assert_eq!(build_comp_tree(&eval(G1_BUGGY, ".0")).unwrap().nodes.len(), 3);
}

#[test]
fn failed_traces() {
    let at = eval(&G1_BUGGY.replace("B.val = pow2(-B.pos);", "B.val = 1 / 0;"), ".10");
    assert_eq!(build_comp_tree(&at), Err(AccError::PartialTrace));
    assert!(matches!(subtree_acc(&at, 0), Err(AccError::BoundaryUndefined(_))));
    assert!(matches!(slice_acc(&at, at.parse_instance("F[0].val").unwrap()), Err(AccError::TargetUndefined(_))));
    // the B subtree holding the zero digit is still fine
    assert!(subtree_acc(&at, 6).is_ok());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn tree_strategy() -> impl Strategy<Value = AttributedTree> {
        proptest::collection::vec(any::<bool>(), 1..=8).prop_map(|bits| {
            let input: String = std::iter::once('.').chain(bits.iter().map(|b| if *b { '1' } else { '0' })).collect();
            eval(G1_BUGGY, &input)
        })
    }

    proptest! {
        #[test]
        fn constructors_are_closed(at in tree_strategy(), pick in any::<proptest::sample::Index>(), pick2 in any::<proptest::sample::Index>()) {
            let nts: Vec<NodeId> = at.tree.nonterminals().map(|n| n.id).collect();
            let x = nts[pick.index(nts.len())];
            let sub = subtree_acc(&at, x).unwrap();
            prop_assert!(sub.is_closed(&at));
            let kids: Vec<NodeId> = at.tree.nodes[x].children.iter().copied().filter(|&c| !at.tree.nodes[c].symbol.is_terminal()).collect();
            let reg = region_acc(&at, x, &kids).unwrap();
            prop_assert!(reg.is_closed(&at));
            let t = at.instance_ids()[pick2.index(at.instance_ids().len())];
            let sl = slice_acc(&at, t).unwrap();
            prop_assert!(sl.is_closed(&at));
            prop_assert!(sl.comps.contains(&t));
            let d = acc_difference(&at, &full_acc(&at), std::slice::from_ref(&sub));
            prop_assert!(d.is_closed(&at));
            prop_assert_eq!(d.len() + sub.len(), at.comps().len());
            let sw = slice_within(&at, t, &d.comps);
            prop_assert!(sw.is_closed(&at));
        }

        #[test]
        fn descendant_subtrees_nest(at in tree_strategy(), pick in any::<proptest::sample::Index>()) {
            let nts: Vec<NodeId> = at.tree.nonterminals().map(|n| n.id).collect();
            let x = nts[pick.index(nts.len())];
            let sx = subtree_acc(&at, x).unwrap();
            for &y in &nts {
                if y != x && at.tree.is_descendant(y, x) {
                    let sy = subtree_acc(&at, y).unwrap();
                    prop_assert!(sy.comps.is_subset(&sx.comps) && sy.comps != sx.comps);
                }
            }
        }

        #[test]
        fn root_subtree_is_slice_of_sinks(at in tree_strategy()) {
            let root = subtree_acc(&at, 0).unwrap();
            let sinks = at.instance_ids().iter().copied().filter(|&i| at.consumers(i).next().is_none());
            prop_assert_eq!(root.comps.clone(), at.backward_closure(sinks));
            prop_assert_eq!(root.len(), at.comps().len());
        }
    }
}
