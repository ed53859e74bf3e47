use std::collections::BTreeSet;

use llee::bisim;
use llee::collapse::{collapse_llee, PairStrategy};
use llee::extract::{extract_solution, extraction_table, simplify};
use llee::interp::{interpret, interpret_labeled};
use llee::proof::{check_certificate, prove_equal};
use llee::props::{check_collapse, run_suite, ExprGen, SUITES};
use llee::{format_expr, parse_expr, Chart, StarExpr, VertexId};
use proptest::prelude::*;

/// Greatest fixpoint by repeated pair removal, with the sink treated as a
/// distinguished vertex.
fn naive_bisimilar(c1: &Chart, c2: &Chart) -> bool {
    let mut rel: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
    for v in c1.vertices() {
        for w in c2.vertices() {
            if c1.is_tick(v) == c2.is_tick(w) {
                rel.insert((v, w));
            }
        }
    }
    loop {
        let keep: BTreeSet<(VertexId, VertexId)> = rel
            .iter()
            .copied()
            .filter(|&(v, w)| {
                let fwd = c1.out(v).all(|t| {
                    c2.out(w)
                        .any(|u| u.action == t.action && rel.contains(&(t.tgt, u.tgt)))
                });
                let back = c2.out(w).all(|u| {
                    c1.out(v)
                        .any(|t| t.action == u.action && rel.contains(&(t.tgt, u.tgt)))
                });
                fwd && back
            })
            .collect();
        if keep.len() == rel.len() {
            return rel.contains(&(c1.start(), c2.start()));
        }
        rel = keep;
    }
}

fn same_behaviour(e: &StarExpr, f: &StarExpr) -> bool {
    naive_bisimilar(&interpret(e).0, &interpret(f).0)
}

fn expr(letters: &'static [&'static str]) -> impl Strategy<Value = StarExpr> {
    let leaf = prop_oneof![
        1 => Just(StarExpr::zero()),
        4 => proptest::sample::select(letters).prop_map(StarExpr::atom),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| StarExpr::sum(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| StarExpr::prod(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| StarExpr::star(a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn printer_parser_round_trip(e in expr(&["a", "b", "c"])) {
        prop_assert_eq!(parse_expr(&format_expr(&e)).unwrap(), e);
    }

    #[test]
    fn bisimilarity_agrees_with_naive_fixpoint(e in expr(&["a", "b"]), f in expr(&["a", "b"])) {
        let (c1, c2) = (interpret(&e).0, interpret(&f).0);
        prop_assert_eq!(bisim::bisimilar(&c1, &c2), naive_bisimilar(&c1, &c2));
    }

    #[test]
    fn collapse_matches_quotient(e in expr(&["a", "b"])) {
        for s in [PairStrategy::Exhaustive, PairStrategy::Constructive] {
            let out = check_collapse(&e, s);
            prop_assert!(out.is_ok(), "{}: {:?}", format_expr(&e), out.err());
        }
    }

    #[test]
    fn extractions_behave_like_their_vertices(e in expr(&["a", "b"])) {
        let lc = interpret_labeled(&e);
        let table = extraction_table(&lc).unwrap();
        for (&v, s) in &table.abs {
            let label = lc.chart().label(v).unwrap();
            prop_assert!(same_behaviour(s, label), "s({}) of {}", v, format_expr(&e));
        }
        for (&(w, v), t) in &table.rel {
            let lhs = StarExpr::prod(t.clone(), table.abs[&v].clone());
            prop_assert!(same_behaviour(&lhs, &table.abs[&w]), "t({}|{}) of {}", w, v, format_expr(&e));
        }
    }

    #[test]
    fn collapsed_extraction_behaves_like_input(e in expr(&["a", "b"])) {
        let (col, _) = collapse_llee(&interpret_labeled(&e)).unwrap();
        let x = extract_solution(&col, col.chart().start()).unwrap();
        prop_assert!(same_behaviour(&x, &e));
    }

    #[test]
    fn simplification_is_derivable(e in expr(&["a", "b"])) {
        let (s, p) = simplify(&e);
        prop_assert!(s.size() <= e.size());
        prop_assert!(same_behaviour(&s, &e));
        let cert = p.to_certificate();
        prop_assert!(check_certificate(&cert).is_ok());
        prop_assert_eq!(&cert.goal.lhs, &e);
    }

    #[test]
    fn certificates_exactly_for_bisimilar_pairs(e in expr(&["a"]), f in expr(&["a"])) {
        let bis = same_behaviour(&e, &f);
        match prove_equal(&e, &f) {
            Some(cert) => {
                prop_assert!(bis);
                prop_assert!(check_certificate(&cert).is_ok());
                prop_assert_eq!(&cert.goal.lhs, &e);
                prop_assert_eq!(&cert.goal.rhs, &f);
            }
            None => prop_assert!(!bis),
        }
    }
}

#[test]
fn suites_on_larger_expressions() {
    for (max_size, alphabet_size) in [(30, 2), (30, 1)] {
        let cfg = ExprGen {
            seed: 11,
            max_size,
            alphabet_size,
        };
        for name in SUITES {
            let r = run_suite(name, cfg, 150).unwrap();
            assert!(r.passed(), "{r}");
        }
    }
}
