//! Random expressions, named property suites and a structural shrinker.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bisim;
use crate::chart::{Chart, LabeledChart, VertexId};
use crate::collapse::{self, PairStrategy};
use crate::expr::{format_expr, parse_expr, StarExpr};
use crate::extract;
use crate::interp::{interpret, interpret_labeled, is_normed, normed_structural};
use crate::llee;
use crate::proof::{self, check_certificate};

/// Configuration of the expression generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExprGen {
    pub seed: u64,
    pub max_size: usize,
    pub alphabet_size: usize,
}

impl Default for ExprGen {
    fn default() -> ExprGen {
        ExprGen {
            seed: 0,
            max_size: 12,
            alphabet_size: 3,
        }
    }
}

const LETTERS: &[&str] = &["a", "b", "c", "d", "e", "f", "g", "h"];

fn letter(i: usize) -> String {
    if i < LETTERS.len() {
        LETTERS[i].to_string()
    } else {
        format!("a{i}")
    }
}

/// An endless deterministic stream of expressions of size at most `max_size`.
pub struct ExprStream {
    rng: ChaCha8Rng,
    cfg: ExprGen,
}

impl ExprStream {
    fn sized(&mut self, n: usize) -> StarExpr {
        if n < 3 {
            return if self.rng.gen_bool(0.2) {
                StarExpr::zero()
            } else {
                let i = self.rng.gen_range(0..self.cfg.alphabet_size.max(1));
                StarExpr::atom(&letter(i))
            };
        }
        let left = self.rng.gen_range(1..n - 1);
        let l = self.sized(left);
        let r = self.sized(n - 1 - left);
        match self.rng.gen_range(0..10) {
            0..=2 => StarExpr::sum(l, r),
            3..=5 => StarExpr::prod(l, r),
            _ => StarExpr::star(l, r),
        }
    }
}

impl Iterator for ExprStream {
    type Item = StarExpr;

    fn next(&mut self) -> Option<StarExpr> {
        let n = self.rng.gen_range(1..=self.cfg.max_size.max(1));
        Some(self.sized(n))
    }
}

pub fn gen_expr(cfg: ExprGen) -> ExprStream {
    ExprStream {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
    }
}

/// Expressions one step smaller: a subterm replaced by `0` or by one of its children.
pub fn shrink_candidates(e: &StarExpr) -> Vec<StarExpr> {
    let mut out = Vec::new();
    if !e.is_zero() {
        out.push(StarExpr::zero());
    }
    if let Some((l, r)) = e.children() {
        out.push(l.clone());
        out.push(r.clone());
        for l2 in shrink_candidates(l) {
            out.push(e.with_children(l2, r.clone()));
        }
        for r2 in shrink_candidates(r) {
            out.push(e.with_children(l.clone(), r2));
        }
    }
    out
}

/// Greedily shrinks `e` while `fails` keeps holding.
pub fn shrink(e: &StarExpr, fails: impl Fn(&StarExpr) -> bool) -> StarExpr {
    let mut cur = e.clone();
    'outer: loop {
        for c in shrink_candidates(&cur) {
            if c.size() < cur.size() && fails(&c) {
                cur = c;
                continue 'outer;
            }
        }
        return cur;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub expr: StarExpr,
    pub shrunk: StarExpr,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<Counterexample>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "suite {}: {} cases, {} failures",
            self.name,
            self.cases,
            self.failures.len()
        )?;
        for c in &self.failures {
            writeln!(
                f,
                "  {} (shrunk: {}): {}",
                format_expr(&c.expr),
                format_expr(&c.shrunk),
                c.message
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown suite {0:?}")]
pub struct UnknownSuite(pub String);

type Property = fn(&StarExpr) -> Result<(), String>;

pub const SUITES: &[&str] = &[
    "parse",
    "normed",
    "llee-witness",
    "lemma-3.8",
    "collapse",
    "ft",
    "roundtrip",
];

fn property(name: &str) -> Option<Property> {
    Some(match name {
        "parse" => prop_parse,
        "normed" => prop_normed,
        "llee-witness" => prop_witness,
        "lemma-3.8" => prop_relations,
        "collapse" => prop_collapse,
        "ft" => prop_ft,
        "roundtrip" => prop_roundtrip,
        _ => return None,
    })
}

/// Runs a named suite on `cases` generated expressions.
pub fn run_suite(name: &str, cfg: ExprGen, cases: usize) -> Result<SuiteReport, UnknownSuite> {
    let prop = property(name).ok_or_else(|| UnknownSuite(name.to_string()))?;
    let mut failures = Vec::new();
    for e in gen_expr(cfg).take(cases) {
        if let Err(message) = prop(&e) {
            let shrunk = shrink(&e, |x| prop(x).is_err());
            failures.push(Counterexample {
                expr: e,
                shrunk,
                message,
            });
        }
    }
    Ok(SuiteReport {
        name: name.to_string(),
        cases,
        failures,
    })
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn prop_parse(e: &StarExpr) -> Result<(), String> {
    let s = format_expr(e);
    let back = parse_expr(&s).map_err(|err| format!("{s}: {err}"))?;
    ensure(&back == e, || {
        format!("{s} parses to {}", format_expr(&back))
    })
}

fn prop_normed(e: &StarExpr) -> Result<(), String> {
    ensure(normed_structural(e) == is_normed(e), || {
        "normedness oracles disagree".into()
    })
}

fn prop_witness(e: &StarExpr) -> Result<(), String> {
    let r = llee::check_llee_witness(&interpret_labeled(e));
    ensure(r.ok, || format!("{:?}", r.violations))
}

fn reach_sets(
    succ: &BTreeMap<VertexId, Vec<VertexId>>,
    vs: &BTreeSet<VertexId>,
) -> BTreeMap<VertexId, BTreeSet<VertexId>> {
    vs.iter()
        .map(|&v| {
            let mut seen = BTreeSet::from([v]);
            let mut q = VecDeque::from([v]);
            while let Some(x) = q.pop_front() {
                for &y in succ.get(&x).into_iter().flatten() {
                    if seen.insert(y) {
                        q.push_back(y);
                    }
                }
            }
            (v, seen)
        })
        .collect()
}

fn rtc(
    rel: &BTreeSet<(VertexId, VertexId)>,
    vs: &BTreeSet<VertexId>,
) -> BTreeMap<VertexId, BTreeSet<VertexId>> {
    let mut succ: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for &(a, b) in rel {
        succ.entry(a).or_default().push(b);
    }
    reach_sets(&succ, vs)
}

/// Relation and norm laws of a valid witness, checked from first principles.
pub fn check_relation_laws(lc: &LabeledChart) -> Result<(), String> {
    let c = lc.chart();
    let vs = c.vertex_set().clone();
    let rel = llee::relations(lc).map_err(|e| e.to_string())?;
    let norms = llee::norms(lc).map_err(|e| e.to_string())?;
    let mut all: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    let mut body: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for t in c.transitions() {
        all.entry(t.src).or_default().push(t.tgt);
        if lc.level(t) == 0 {
            body.entry(t.src).or_default().push(t.tgt);
        }
    }
    let reach = reach_sets(&all, &vs);
    let same_scc = |u: VertexId, v: VertexId| reach[&u].contains(&v) && reach[&v].contains(&u);
    // (i): Kahn's algorithm consumes every vertex iff the body graph is acyclic.
    let mut indeg: BTreeMap<VertexId, usize> = vs.iter().map(|&v| (v, 0)).collect();
    for ws in body.values() {
        for w in ws {
            *indeg.get_mut(w).unwrap() += 1;
        }
    }
    let mut q: VecDeque<VertexId> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&v, _)| v)
        .collect();
    let mut seen = 0;
    while let Some(v) = q.pop_front() {
        seen += 1;
        for w in body.get(&v).into_iter().flatten() {
            let d = indeg.get_mut(w).unwrap();
            *d -= 1;
            if *d == 0 {
                q.push_back(*w);
            }
        }
    }
    ensure(seen == vs.len(), || "(i) body cycle".into())?;

    let desc: BTreeSet<(VertexId, VertexId)> = rel
        .descends_in_loop_to
        .iter()
        .map(|&(v, w, _)| (v, w))
        .collect();
    let desc_star = rtc(&desc, &vs);
    let lb = &rel.loops_back_to;
    let lb_star = rtc(lb, &vs);
    for &u in &vs {
        for &v in &vs {
            if same_scc(u, v) && desc_star[&u].contains(&v) {
                ensure(lb_star[&v].contains(&u), || format!("(ii) {u} {v}"))?;
            }
            let common = vs
                .iter()
                .any(|w| lb_star[&u].contains(w) && lb_star[&v].contains(w));
            ensure(same_scc(u, v) == common, || format!("(iv) {u} {v}"))?;
        }
    }
    for &(_, w) in &desc {
        if !lb.iter().any(|&(x, _)| x == w) {
            ensure(!c.is_normed(w), || format!("(iii) {w} is normed"))?;
        }
    }
    // (v): partial order, and bounded pairs have least upper bounds.
    let le = |x: VertexId, y: VertexId| lb_star[&x].contains(&y);
    for &u in &vs {
        for &v in &vs {
            ensure(u == v || !(le(u, v) && le(v, u)), || {
                format!("(v) antisymmetry {u} {v}")
            })?;
            let ubs: Vec<VertexId> = vs
                .iter()
                .copied()
                .filter(|&w| le(u, w) && le(v, w))
                .collect();
            if !ubs.is_empty() {
                let least = ubs.iter().any(|&m| ubs.iter().all(|&w| le(m, w)));
                ensure(least, || format!("(v) no least upper bound of {u} {v}"))?;
            }
        }
    }
    for &w in &vs {
        let succ: Vec<VertexId> = lb
            .iter()
            .filter(|&&(x, _)| x == w)
            .map(|&(_, v)| v)
            .collect();
        for &a in &succ {
            for &b in &succ {
                let ok = a == b || lb.contains(&(a, b)) || lb.contains(&(b, a));
                ensure(ok, || format!("(vi) successors {a} {b} of {w}"))?;
            }
        }
    }
    let d = &rel.directly_loops_back_to;
    for &(v1, u) in d {
        for &(v2, u2) in d {
            if u == u2 && v1 != v2 {
                let shared = vs.iter().any(|&w| le(w, v1) && le(w, v2));
                ensure(!shared, || format!("(vii) {v1} {v2} below {u}"))?;
            }
        }
    }
    for (v, ws) in &body {
        for w in ws {
            ensure(norms.bosn[v] > norms.bosn[w], || format!("bosn {v} -> {w}"))?;
        }
    }
    for &(v, w) in &desc {
        ensure(norms.enl[&v] > norms.enl[&w], || format!("enl {v} -> {w}"))?;
    }
    Ok(())
}

fn prop_relations(e: &StarExpr) -> Result<(), String> {
    check_relation_laws(&interpret_labeled(e))
}

/// Collapse checks: witness after every step, bisimilarity per step,
/// collapsed result, isomorphic to the bisimulation quotient.
pub fn check_collapse(e: &StarExpr, strategy: PairStrategy) -> Result<LabeledChart, String> {
    let lc = interpret_labeled(e);
    let run = collapse::collapse_llee_traced(&lc, strategy).map_err(|err| err.to_string())?;
    let mut prev: Chart = lc.chart().clone();
    for s in &run.steps {
        let r = llee::check_llee_witness(&s.result);
        ensure(r.ok, || {
            format!("step ({}, {}): {:?}", s.w1, s.w2, r.violations)
        })?;
        ensure(bisim::bisimilar(&prev, s.result.chart()), || {
            format!("step ({}, {}) breaks bisimilarity", s.w1, s.w2)
        })?;
        prev = s.result.chart().clone();
    }
    ensure(llee::check_llee_witness(&run.result).ok, || {
        "final witness".into()
    })?;
    ensure(bisim::is_collapsed(run.result.chart()), || {
        "not collapsed".into()
    })?;
    let (q, _) = bisim::quotient_collapse(&interpret(e).0);
    ensure(bisim::isomorphic(run.result.chart(), &q).is_some(), || {
        "not isomorphic to the quotient".into()
    })?;
    Ok(run.result)
}

fn prop_collapse(e: &StarExpr) -> Result<(), String> {
    check_collapse(e, PairStrategy::Exhaustive)?;
    check_collapse(e, PairStrategy::Constructive).map(|_| ())
}

fn prop_ft(e: &StarExpr) -> Result<(), String> {
    check_certificate(&proof::derive_ft(e)).map_err(|err| err.to_string())?;
    proof::identity_solution(e)
        .check()
        .map_err(|err| err.to_string())
}

/// The expression extracted at the start of the collapsed witness of `e`.
pub fn collapsed_extraction(e: &StarExpr) -> Result<StarExpr, String> {
    let (col, _) = collapse::collapse_llee(&interpret_labeled(e)).map_err(|err| err.to_string())?;
    extract::extract_solution(&col, col.chart().start()).map_err(|err| err.to_string())
}

fn prop_roundtrip(e: &StarExpr) -> Result<(), String> {
    let x = collapsed_extraction(e)?;
    ensure(bisim::bisimilar(&interpret(&x).0, &interpret(e).0), || {
        format!("extraction {} not bisimilar", format_expr(&x))
    })?;
    let cert = proof::prove_equal(e, &x).ok_or("no certificate")?;
    check_certificate(&cert).map_err(|err| err.to_string())?;
    ensure(cert.goal.lhs == *e && cert.goal.rhs == x, || {
        "wrong goal".into()
    })
}
