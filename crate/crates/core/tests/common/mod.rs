#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use llee::chart::{load_chart, load_labeled, LabeledChart};
use llee::interp::interpret;
use llee::proof::{Certificate, Justification, Side};
use llee::{parse_expr, Chart, Node, StarExpr, VertexId};

pub fn fixture_text(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

pub fn chart_fixture(name: &str) -> Chart {
    load_chart(&fixture_text(name)).unwrap()
}

pub fn labeled_fixture(name: &str) -> LabeledChart {
    load_labeled(&fixture_text(name)).unwrap()
}

pub fn p(s: &str) -> StarExpr {
    parse_expr(s).unwrap()
}

/// Greatest fixpoint by repeated pair removal.
pub fn naive_bisimilar(c1: &Chart, c2: &Chart) -> bool {
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
                c1.out(v).all(|t| {
                    c2.out(w)
                        .any(|u| u.action == t.action && rel.contains(&(t.tgt, u.tgt)))
                }) && c2.out(w).all(|u| {
                    c1.out(v)
                        .any(|t| t.action == u.action && rel.contains(&(t.tgt, u.tgt)))
                })
            })
            .collect();
        if keep.len() == rel.len() {
            return rel.contains(&(c1.start(), c2.start()));
        }
        rel = keep;
    }
}

pub fn same_behaviour(e: &StarExpr, f: &StarExpr) -> bool {
    naive_bisimilar(&interpret(e).0, &interpret(f).0)
}

fn summands(e: &StarExpr, out: &mut Vec<StarExpr>) {
    match e.node() {
        Node::Sum(l, r) => {
            summands(l, out);
            summands(r, out);
        }
        _ => out.push(sort_sums(e)),
    }
}

/// Every maximal sum flattened, its summands sorted by printed form and rebuilt left-nested.
pub fn sort_sums(e: &StarExpr) -> StarExpr {
    match e.node() {
        Node::Sum(..) => {
            let mut xs = Vec::new();
            summands(e, &mut xs);
            xs.sort_by_key(llee::format_expr);
            let mut it = xs.into_iter();
            let first = it.next().unwrap();
            it.fold(first, StarExpr::sum)
        }
        Node::Prod(l, r) => StarExpr::prod(sort_sums(l), sort_sums(r)),
        Node::Star(l, r) => StarExpr::star(sort_sums(l), sort_sums(r)),
        _ => e.clone(),
    }
}

const SCHEMAS: &[(&str, &str, &str)] = &[
    ("B1", "x + y", "y + x"),
    ("B2", "(x + y) + z", "x + (y + z)"),
    ("B3", "x + x", "x"),
    ("B4", "(x + y).z", "x.z + y.z"),
    ("B5", "(x.y).z", "x.(y.z)"),
    ("B6", "x + 0", "x"),
    ("B7", "0.x", "0"),
    ("BKS1", "x.(x * y) + y", "x * y"),
    ("BKS2", "(x * y).z", "x * (y.z)"),
];

fn schema_vars(e: &StarExpr, out: &mut BTreeSet<String>) {
    match e.node() {
        Node::Act(a) => {
            out.insert(a.as_str().to_string());
        }
        Node::Zero => {}
        _ => {
            let (l, r) = e.children().unwrap();
            schema_vars(l, out);
            schema_vars(r, out);
        }
    }
}

fn instantiate(e: &StarExpr, s: &BTreeMap<String, StarExpr>) -> StarExpr {
    match e.node() {
        Node::Act(a) => s[a.as_str()].clone(),
        Node::Zero => e.clone(),
        _ => {
            let (l, r) = e.children().unwrap();
            e.with_children(instantiate(l, s), instantiate(r, s))
        }
    }
}

/// Walks both sides along `path`; the contexts must agree off the path.
fn hole<'a>(
    mut l: &'a StarExpr,
    mut r: &'a StarExpr,
    path: &[Side],
) -> Option<(&'a StarExpr, &'a StarExpr)> {
    for side in path {
        let same_kind = matches!(
            (l.node(), r.node()),
            (Node::Sum(..), Node::Sum(..))
                | (Node::Prod(..), Node::Prod(..))
                | (Node::Star(..), Node::Star(..))
        );
        if !same_kind {
            return None;
        }
        let ((l1, l2), (r1, r2)) = (l.children()?, r.children()?);
        match side {
            Side::L if l2 == r2 => (l, r) = (l1, r1),
            Side::R if l1 == r1 => (l, r) = (l2, r2),
            _ => return None,
        }
    }
    Some((l, r))
}

/// A re-checker written against the rule definitions, separate from the library's checker.
/// Returns the index of the first bad step, or `steps.len()` for a goal mismatch.
pub fn recheck(cert: &Certificate) -> Result<(), usize> {
    let steps = &cert.steps;
    for (i, st) in steps.iter().enumerate() {
        let (lhs, rhs) = (&st.eq.lhs, &st.eq.rhs);
        let eq = |j: usize| (j < i).then(|| (&steps[j].eq.lhs, &steps[j].eq.rhs));
        let ok = match &st.just {
            Justification::Refl => lhs == rhs,
            Justification::Symm(j) => eq(*j) == Some((rhs, lhs)),
            Justification::Trans(j, k) => match (eq(*j), eq(*k)) {
                (Some((a, b)), Some((c, d))) => a == lhs && b == c && d == rhs,
                _ => false,
            },
            Justification::Cong(path, j) => match (eq(*j), hole(lhs, rhs, path)) {
                (Some(pr), Some(h)) => pr == h,
                _ => false,
            },
            Justification::Rsp(j) => match eq(*j) {
                Some((e, body)) => match (body.node(), rhs.node()) {
                    (Node::Sum(fe, g), Node::Star(f2, g2)) => match fe.node() {
                        Node::Prod(f, e2) => e2 == e && lhs == e && f == f2 && g == g2,
                        _ => false,
                    },
                    _ => false,
                },
                None => false,
            },
            Justification::Axiom(ax, subst) => {
                let (_, l, r) = SCHEMAS.iter().find(|(n, _, _)| *n == ax.name()).unwrap();
                let (l, r) = (parse_expr(l).unwrap(), parse_expr(r).unwrap());
                let mut vars = BTreeSet::new();
                schema_vars(&l, &mut vars);
                schema_vars(&r, &mut vars);
                let keys: BTreeSet<String> = subst.keys().cloned().collect();
                keys == vars && &instantiate(&l, subst) == lhs && &instantiate(&r, subst) == rhs
            }
        };
        if !ok {
            return Err(i);
        }
    }
    match steps.last() {
        Some(last) if last.eq == cert.goal => Ok(()),
        _ => Err(steps.len()),
    }
}
