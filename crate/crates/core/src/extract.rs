//! Extraction of star expressions from layered loop-elimination witnesses.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chart::{LabeledChart, VertexId};
use crate::expr::{big_sum, Action, Node, StarExpr};
use crate::llee::{self, Norms, Relations, Violation};
use crate::proof::build::{zero_star, Proof};
use crate::proof::Axiom;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("not a valid witness: {0:?}")]
    InvalidWitness(Vec<Violation>),
    #[error("vertex {0} is not in the chart")]
    NoVertex(VertexId),
    #[error("vertex {0} is the sink")]
    Tick(VertexId),
    #[error("{v} does not descend in a loop to {w}")]
    NotDescended { w: VertexId, v: VertexId },
}

/// One summand of an extraction bracket, tied to the transition it comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Summand {
    /// A bare action: an entry back to the vertex itself, or a body step to
    /// the loop vertex (relative) or to the sink (absolute).
    Act(Action),
    /// `a.x` where `x` is the extraction at `target`.
    Prefixed(Action, VertexId),
}

/// Relative extractions `t(w|v)` and extractions `s(w)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractionTable {
    pub rel: BTreeMap<(VertexId, VertexId), StarExpr>,
    pub abs: BTreeMap<VertexId, StarExpr>,
}

pub(crate) struct Extractor<'a> {
    pub lc: &'a LabeledChart,
    pub rel: Relations,
    pub norms: Norms,
    pub table: ExtractionTable,
}

fn sorted(mut items: Vec<(VertexId, Action)>) -> Vec<Summand> {
    items.sort();
    items
        .into_iter()
        .map(|(t, a)| Summand::Prefixed(a, t))
        .collect()
}

impl<'a> Extractor<'a> {
    pub fn new(lc: &'a LabeledChart) -> Result<Extractor<'a>, ExtractError> {
        let report = llee::check_llee_witness(lc);
        if !report.ok {
            return Err(ExtractError::InvalidWitness(report.violations));
        }
        Ok(Extractor {
            lc,
            rel: llee::relations_unchecked(lc),
            norms: llee::norms_unchecked(lc),
            table: ExtractionTable::default(),
        })
    }

    fn check_vertex(&self, w: VertexId) -> Result<(), ExtractError> {
        if !self.lc.chart().contains(w) {
            Err(ExtractError::NoVertex(w))
        } else if self.lc.chart().is_tick(w) {
            Err(ExtractError::Tick(w))
        } else {
            Ok(())
        }
    }

    /// The entry bracket at `w`: self-loop entries, then entries into the loop body.
    pub fn entry_summands(&self, w: VertexId) -> Vec<Summand> {
        let mut own: Vec<Action> = Vec::new();
        let mut other = Vec::new();
        for (t, l) in self.lc.out(w) {
            if l > 0 {
                if t.tgt == w {
                    own.push(t.action.clone());
                } else {
                    other.push((t.tgt, t.action.clone()));
                }
            }
        }
        own.sort();
        own.into_iter()
            .map(Summand::Act)
            .chain(sorted(other))
            .collect()
    }

    /// The body bracket at `w`; body steps into `stop` become bare actions.
    pub fn body_summands(&self, w: VertexId, stop: VertexId) -> Vec<Summand> {
        let mut own: Vec<Action> = Vec::new();
        let mut other = Vec::new();
        for (t, l) in self.lc.out(w) {
            if l == 0 {
                if t.tgt == stop {
                    own.push(t.action.clone());
                } else {
                    other.push((t.tgt, t.action.clone()));
                }
            }
        }
        own.sort();
        own.into_iter()
            .map(Summand::Act)
            .chain(sorted(other))
            .collect()
    }

    fn sink_or_none(&self) -> VertexId {
        self.lc.chart().tick().unwrap_or(VertexId::MAX)
    }

    fn build(
        &mut self,
        items: &[Summand],
        mut value: impl FnMut(&mut Self, VertexId) -> StarExpr,
    ) -> StarExpr {
        let terms: Vec<StarExpr> = items
            .iter()
            .map(|s| match s {
                Summand::Act(a) => StarExpr::act(a.clone()),
                Summand::Prefixed(a, t) => {
                    StarExpr::prod(StarExpr::act(a.clone()), value(self, *t))
                }
            })
            .collect();
        big_sum(terms)
    }

    pub fn relative(&mut self, w: VertexId, v: VertexId) -> Result<StarExpr, ExtractError> {
        self.check_vertex(w)?;
        if !self.rel.descends(v, w) {
            return Err(ExtractError::NotDescended { w, v });
        }
        Ok(self.rel_unchecked(w, v))
    }

    fn rel_unchecked(&mut self, w: VertexId, v: VertexId) -> StarExpr {
        if let Some(e) = self.table.rel.get(&(w, v)) {
            return e.clone();
        }
        let entries = self.entry_summands(w);
        let body = self.body_summands(w, v);
        let (enl_v, bosn_w) = (self.norms.enl[&v], self.norms.bosn[&w]);
        let e = self.build(&entries, |x, u| {
            debug_assert!(x.norms.enl[&w] < enl_v);
            x.rel_unchecked(u, w)
        });
        let g = self.build(&body, |x, u| {
            debug_assert!(x.norms.bosn[&u] < bosn_w);
            x.rel_unchecked(u, v)
        });
        let out = StarExpr::star(e, g);
        self.table.rel.insert((w, v), out.clone());
        out
    }

    pub fn solution(&mut self, w: VertexId) -> Result<StarExpr, ExtractError> {
        self.check_vertex(w)?;
        Ok(self.sol_unchecked(w))
    }

    fn sol_unchecked(&mut self, w: VertexId) -> StarExpr {
        if let Some(e) = self.table.abs.get(&w) {
            return e.clone();
        }
        let entries = self.entry_summands(w);
        let body = self.body_summands(w, self.sink_or_none());
        let bosn_w = self.norms.bosn[&w];
        let e = self.build(&entries, |x, u| x.rel_unchecked(u, w));
        let f = self.build(&body, |x, u| {
            debug_assert!(x.norms.bosn[&u] < bosn_w);
            x.sol_unchecked(u)
        });
        let out = StarExpr::star(e, f);
        self.table.abs.insert(w, out.clone());
        out
    }
}

/// `t(w|v)` for `v` descending in a loop to `w`.
pub fn extract_relative(
    lc: &LabeledChart,
    w: VertexId,
    v: VertexId,
) -> Result<StarExpr, ExtractError> {
    Extractor::new(lc)?.relative(w, v)
}

/// `s(w)` for a vertex other than the sink.
pub fn extract_solution(lc: &LabeledChart, w: VertexId) -> Result<StarExpr, ExtractError> {
    Extractor::new(lc)?.solution(w)
}

/// All extractions of the witness.
pub fn extraction_table(lc: &LabeledChart) -> Result<ExtractionTable, ExtractError> {
    let mut x = Extractor::new(lc)?;
    let c = lc.chart();
    for w in c.proper_vertices().collect::<Vec<_>>() {
        x.sol_unchecked(w);
    }
    let pairs: Vec<(VertexId, VertexId)> = x
        .rel
        .descends_in_loop_to
        .iter()
        .map(|&(v, w, _)| (w, v))
        .collect();
    for (w, v) in pairs {
        x.rel_unchecked(w, v);
    }
    Ok(x.table)
}

fn simplify_proof(e: &StarExpr) -> Proof {
    let inner = match e.children() {
        Some((l, r)) => Proof::binary(e, &simplify_proof(l), &simplify_proof(r)),
        None => Proof::refl(e.clone()),
    };
    let t = inner.rhs().clone();
    let root = match t.node() {
        Node::Star(f, x) if f.is_zero() => zero_star(x),
        Node::Sum(x, z) if z.is_zero() => Proof::axiom(Axiom::B6, std::slice::from_ref(x)),
        Node::Sum(z, x) if z.is_zero() => Proof::axiom(Axiom::B1, &[z.clone(), x.clone()])
            .then(|_| Proof::axiom(Axiom::B6, std::slice::from_ref(x))),
        Node::Prod(z, x) if z.is_zero() => Proof::axiom(Axiom::B7, std::slice::from_ref(x)),
        _ => Proof::refl(t.clone()),
    };
    inner.trans(&root)
}

/// Bottom-up rewriting with `0 * x -> x`, `x + 0 -> x`, `0 + x -> x` and
/// `0.x -> 0`, with a derivation of `e = result`.
pub fn simplify(e: &StarExpr) -> (StarExpr, Proof) {
    let p = simplify_proof(e);
    (p.rhs().clone(), p)
}
