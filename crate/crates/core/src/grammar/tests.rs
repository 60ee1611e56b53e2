use super::bundled::*;
use super::*;

fn g1_buggy() -> Grammar {
    parse_grammar(G1_BUGGY).unwrap()
}

#[test]
fn g1_shape() {
    let g = g1_buggy();
    assert_eq!(g.nonterminals.len(), 3);
    assert_eq!(g.productions.len(), 5);
    // F: 2 rules, L ::= B L: 3, L ::= B: 2, B ::= 1: 1, B ::= 0: 1
    assert_eq!(g.rule_count(), 9);
    assert_eq!(g.start, "F");
    assert_eq!(g.terminals.iter().cloned().collect::<Vec<_>>(), vec![".", "0", "1"]);
}

#[test]
fn occurrence_names_follow_index_convention() {
    let g = g1_buggy();
    let p = g.production(&ProductionId("L#1".into())).unwrap();
    assert_eq!(p.display_header(), "L ::= B L1");
    assert_eq!(p.occurrence_name(0), "L0");
    assert_eq!(p.occurrence_name(1), "B");
    assert_eq!(p.occurrence_name(2), "L1");
    let f = g.production(&ProductionId("F#1".into())).unwrap();
    assert_eq!(f.display_header(), "F ::= \".\" L");
}

#[test]
fn buggy_and_fixed_differ_in_one_rule() {
    let fixed = parse_grammar(G1_FIXED).unwrap();
    let buggy = g1_buggy();
    assert_eq!(validate_against(&buggy, &fixed), ShapeCheck::SameShape);
    let diff = differing_rules(&buggy, &fixed);
    assert_eq!(diff, vec![RuleId("L#1:B.pos".into())]);
    assert_eq!(buggy.describe_rule(&diff[0]), "B.pos = L0.pos + 1 in L ::= B L1");
    assert_eq!(fixed.describe_rule(&diff[0]), "B.pos = L0.pos in L ::= B L1");
}

#[test]
fn identity_is_same_shape() {
    assert_eq!(validate_against(&g1_buggy(), &g1_buggy()), ShapeCheck::SameShape);
}

#[test]
fn extra_production_is_mismatch() {
    let src = format!("{G1_FIXED}\nproduction B ::= \"2\" {{ B.val = 2; }}\n");
    let bigger = parse_grammar(&src).unwrap();
    assert!(matches!(validate_against(&g1_buggy(), &bigger), ShapeCheck::ShapeMismatch(_)));
}

#[test]
fn empty_source_is_syntax_error() {
    let e = parse_grammar("").unwrap_err();
    assert!(matches!(e.kind, GrammarErrorKind::Syntax(_)), "{e}");
}

#[test]
fn missing_rule_names_attribute_and_production() {
    let src = G1_BUGGY.replace("    L0.val = B.val + L1.val;\n", "");
    let e = parse_grammar(&src).unwrap_err();
    let GrammarErrorKind::MissingRule(msg) = &e.kind else { panic!("{e}") };
    assert!(msg.contains("L.val"), "{msg}");
    assert!(msg.contains("L ::= B L1"), "{msg}");
}

#[test]
fn duplicate_rule_rejected() {
    let src = G1_BUGGY.replace("    L.pos = 1;\n", "    L.pos = 1;\n    L.pos = 2;\n");
    assert!(matches!(parse_grammar(&src).unwrap_err().kind, GrammarErrorKind::DuplicateRule(_)));
}

#[test]
fn undeclared_symbol_rejected() {
    let src = G1_BUGGY.replace("production F ::= \".\" L {", "production F ::= \".\" M {");
    assert!(parse_grammar(&src).is_err());
    let src = G1_BUGGY.replace("start F;", "start Q;");
    assert!(matches!(parse_grammar(&src).unwrap_err().kind, GrammarErrorKind::Undeclared(_)));
}

#[test]
fn type_mismatch_rejected() {
    let src = G1_BUGGY.replace("B.val = 0;", "B.val = \"zero\";");
    let e = parse_grammar(&src).unwrap_err();
    assert!(matches!(e.kind, GrammarErrorKind::Type(_)), "{e}");
    // int attribute cannot take a rational
    let src = G1_BUGGY.replace("L.pos = 1;", "L.pos = 1 / 2;");
    assert!(matches!(parse_grammar(&src).unwrap_err().kind, GrammarErrorKind::Type(_)));
}

#[test]
fn illegal_occurrences_rejected() {
    // reading a synthesized attribute of the LHS
    let src = G1_BUGGY.replace("L0.val = B.val;", "L0.val = L0.val;");
    assert!(matches!(parse_grammar(&src).unwrap_err().kind, GrammarErrorKind::IllegalOccurrence(_)));
    // defining an inherited attribute of the LHS
    let src = G1_BUGGY.replace("    B.pos = L0.pos;\n    L0.val = B.val;", "    B.pos = L0.pos;\n    L0.pos = 3;\n    L0.val = B.val;");
    assert!(matches!(parse_grammar(&src).unwrap_err().kind, GrammarErrorKind::IllegalOccurrence(_)));
}

#[test]
fn start_symbol_without_inherited() {
    let src = G1_BUGGY.replace("start F;", "start L;");
    assert!(matches!(parse_grammar(&src).unwrap_err().kind, GrammarErrorKind::Declaration(_)));
}

#[test]
fn errors_carry_spans() {
    let src = G1_BUGGY.replace("B.val = 0;", "B.val = 0 +;");
    let e = parse_grammar(&src).unwrap_err();
    let line = src.lines().position(|l| l.contains("0 +;")).unwrap() as u32 + 1;
    assert_eq!(e.span.line, line);
}

#[test]
fn rule_spans_point_at_rule_text() {
    let g = g1_buggy();
    let (_, r) = g.rule(&RuleId("L#1:B.pos".into())).unwrap();
    let line = G1_BUGGY.lines().nth(r.span.line as usize - 1).unwrap();
    let text: String = line.chars().skip(r.span.col as usize - 1).take((r.span.end_col - r.span.col) as usize).collect();
    assert_eq!(text, "B.pos = L0.pos + 1;");
}

#[test]
fn pretty_print_round_trips() {
    for src in [G1_BUGGY, G1_FIXED, MINISEM_FIXED] {
        let g = parse_grammar(src).unwrap();
        let printed = g.to_source();
        let again = parse_grammar(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(g, again);
        assert_eq!(printed, again.to_source());
    }
}

#[test]
fn precedence_survives_printing() {
    let src = G1_FIXED.replace("L.pos = 1;", "L.pos = (1 - 2) - (3 - 4) * -(2 + 1);");
    let g = parse_grammar(&src).unwrap();
    let p = &g.productions[0];
    assert_eq!(p.rule_text(&p.rules[0]), "L.pos = 1 - 2 - (3 - 4) * -(2 + 1)");
    assert_eq!(parse_grammar(&g.to_source()).unwrap(), g);
}

#[test]
fn minisem_parses() {
    let g = parse_grammar(MINISEM_FIXED).unwrap();
    assert_eq!(g.start, "Prog");
    assert!(g.nonterminal("Decls").unwrap().synthesized.iter().any(|a| a.sort == Sort::Map));
}

/// Every attribute read by a rule is an inherited attribute of the LHS or a
/// synthesized attribute of an RHS nonterminal.
#[test]
fn free_occurrences_are_legal() {
    for src in [G1_BUGGY, MINISEM_FIXED] {
        let g = parse_grammar(src).unwrap();
        for (p, r) in g.rules() {
            for occ in r.expr.references() {
                let (kind, _) = g.occurrence_sort(p, &occ).unwrap();
                if occ.pos == 0 {
                    assert_eq!(kind, AttrKind::Inherited, "{}", r.id);
                } else {
                    assert_eq!(kind, AttrKind::Synthesized, "{}", r.id);
                }
            }
        }
    }
}
