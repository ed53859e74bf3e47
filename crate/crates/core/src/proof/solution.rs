//! Provable solutions of charts and the completeness pipeline.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::build::{aci, dist, map_summands, Proof};
use super::ft::ft_raw;
use super::{check_certificate, Axiom, Certificate, CheckError, Side};
use crate::bisim::{self, Bisimulation};
use crate::chart::{Chart, LabeledChart, VertexId};
use crate::collapse::{self, CollapseError};
use crate::expr::{big_sum, StarExpr};
use crate::extract::{simplify, ExtractError, Extractor, Summand};
use crate::interp::{interpret, interpret_labeled};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolutionError {
    #[error("not a functional bisimulation onto the solved chart")]
    NotFunctional,
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Collapse(#[from] CollapseError),
    #[error("vertex {vertex}: certificate proves the wrong equation")]
    WrongGoal { vertex: VertexId },
    #[error("vertex {vertex}: {error}")]
    Check { vertex: VertexId, error: CheckError },
    #[error("vertex {0} has no value")]
    Missing(VertexId),
    #[error("chart vertex {0} carries no expression")]
    Unlabelled(VertexId),
}

/// A value per vertex with a derivation of `value(v) = (Σ a) + (Σ b.value(w))`.
#[derive(Clone, Debug)]
pub struct ProvableSolution {
    pub chart: Chart,
    pub values: BTreeMap<VertexId, StarExpr>,
    pub certs: BTreeMap<VertexId, Proof>,
}

impl ProvableSolution {
    pub fn principal_value(&self) -> &StarExpr {
        &self.values[&self.chart.start()]
    }

    pub fn certificate(&self, v: VertexId) -> Option<Certificate> {
        self.certs.get(&v).map(Proof::to_certificate)
    }

    /// Checks every certificate and its goal.
    pub fn check(&self) -> Result<(), SolutionError> {
        for v in self.chart.proper_vertices() {
            let p = self.certs.get(&v).ok_or(SolutionError::Missing(v))?;
            let value = self.values.get(&v).ok_or(SolutionError::Missing(v))?;
            let rhs = solution_rhs(&self.chart, v, &self.values)?;
            if p.lhs() != value || p.rhs() != &rhs {
                return Err(SolutionError::WrongGoal { vertex: v });
            }
            check_certificate(&p.to_certificate())
                .map_err(|error| SolutionError::Check { vertex: v, error })?;
        }
        Ok(())
    }
}

/// `(Σ a) + (Σ b.values(w))` over the transitions from `v`, in transition order.
pub fn solution_rhs(
    chart: &Chart,
    v: VertexId,
    values: &BTreeMap<VertexId, StarExpr>,
) -> Result<StarExpr, SolutionError> {
    let mut ticks = Vec::new();
    let mut steps = Vec::new();
    for t in chart.out(v) {
        let a = StarExpr::act(t.action.clone());
        if chart.is_tick(t.tgt) {
            ticks.push(a);
        } else {
            let x = values.get(&t.tgt).ok_or(SolutionError::Missing(t.tgt))?;
            steps.push(StarExpr::prod(a, x.clone()));
        }
    }
    Ok(StarExpr::sum(big_sum(ticks), big_sum(steps)))
}

fn rhs(chart: &Chart, v: VertexId, values: &BTreeMap<VertexId, StarExpr>) -> StarExpr {
    solution_rhs(chart, v, values).expect("values cover the chart")
}

/// The identity on a chart whose vertices carry their expressions, as in `C(e)`.
pub fn identity_solution_on(chart: &Chart) -> Result<ProvableSolution, SolutionError> {
    let mut values = BTreeMap::new();
    for v in chart.proper_vertices() {
        let e = chart.label(v).ok_or(SolutionError::Unlabelled(v))?;
        values.insert(v, e.clone());
    }
    let mut certs = BTreeMap::new();
    for (&v, e) in &values {
        let raw = ft_raw(e);
        let goal = rhs(chart, v, &values);
        certs.insert(v, raw.trans(&aci(raw.rhs(), &goal)));
    }
    Ok(ProvableSolution {
        chart: chart.clone(),
        values,
        certs,
    })
}

/// The identity solution of `C(e)`.
pub fn identity_solution(e: &StarExpr) -> ProvableSolution {
    identity_solution_on(&interpret(e).0).expect("interpretation labels every vertex")
}

/// `sol ∘ phi` as a solution of `c1`, for a functional bisimulation `phi` from `c1`.
pub fn transfer_solution(
    sol: &ProvableSolution,
    c1: &Chart,
    phi: &BTreeMap<VertexId, VertexId>,
) -> Result<ProvableSolution, SolutionError> {
    let b = Bisimulation::from_map(phi);
    if c1.vertices().any(|v| !phi.contains_key(&v))
        || !bisim::verify_bisimulation(c1, &sol.chart, &b)
    {
        return Err(SolutionError::NotFunctional);
    }
    let mut values = BTreeMap::new();
    for v in c1.proper_vertices() {
        let x = sol
            .values
            .get(&phi[&v])
            .ok_or(SolutionError::Missing(phi[&v]))?;
        values.insert(v, x.clone());
    }
    let mut certs = BTreeMap::new();
    for v in c1.proper_vertices() {
        let base = &sol.certs[&phi[&v]];
        let goal = rhs(c1, v, &values);
        certs.insert(v, base.trans(&aci(base.rhs(), &goal)));
    }
    Ok(ProvableSolution {
        chart: c1.clone(),
        values,
        certs,
    })
}

struct ExtractionProofs<'a> {
    x: Extractor<'a>,
    lemma: HashMap<(VertexId, VertexId), Proof>,
}

impl ExtractionProofs<'_> {
    fn s(&mut self, w: VertexId) -> StarExpr {
        self.x.solution(w).expect("proper vertex")
    }

    fn t(&mut self, w: VertexId, v: VertexId) -> StarExpr {
        self.x.relative(w, v).expect("descends")
    }

    /// `t(w|v).s(v) = s(w)`.
    fn relative_times_solution(&mut self, w: VertexId, v: VertexId) -> Proof {
        if let Some(p) = self.lemma.get(&(w, v)) {
            return p.clone();
        }
        let t = self.t(w, v);
        let sv = self.s(v);
        let sw = self.s(w);
        let (e, g) = t
            .children()
            .map(|(a, b)| (a.clone(), b.clone()))
            .expect("star");
        let (_, f) = sw
            .children()
            .map(|(a, b)| (a.clone(), b.clone()))
            .expect("star");
        let body = self.x.body_summands(w, v);
        let d = dist(&g, &sv);
        let rewritten = map_summands(d.rhs(), &mut |i, leaf| match body.get(i) {
            Some(Summand::Prefixed(_, u)) => {
                let inner = self.relative_times_solution(*u, v);
                Proof::cong(leaf, &[Side::R], &inner)
            }
            _ => Proof::refl(leaf.clone()),
        });
        let inner = d.trans(&rewritten).then(|x| aci(x, &f));
        let p = Proof::axiom(Axiom::Bks2, &[e, g, sv]).then(|x| Proof::cong(x, &[Side::R], &inner));
        debug_assert_eq!(p.rhs(), &sw);
        self.lemma.insert((w, v), p.clone());
        p
    }

    /// `s(w) = (Σ a) + (Σ b.s(u))` over the transitions from `w`.
    fn solution_step(&mut self, w: VertexId, values: &BTreeMap<VertexId, StarExpr>) -> Proof {
        let sw = self.s(w);
        let (e, f) = sw
            .children()
            .map(|(a, b)| (a.clone(), b.clone()))
            .expect("star");
        let entries = self.x.entry_summands(w);
        let unfold = Proof::axiom(Axiom::Bks1, &[e.clone(), f.clone()]).symm();
        let d = dist(&e, &sw);
        let rewritten = map_summands(d.rhs(), &mut |i, leaf| match entries.get(i) {
            Some(Summand::Prefixed(_, u)) => {
                let inner = self.relative_times_solution(*u, w);
                Proof::cong(leaf, &[Side::R], &inner)
            }
            _ => Proof::refl(leaf.clone()),
        });
        let left = d.trans(&rewritten);
        let goal = rhs(self.x.lc.chart(), w, values);
        unfold
            .then(|x| Proof::cong(x, &[Side::L], &left))
            .then(|x| aci(x, &goal))
    }
}

/// The extraction function of a witness as a provable solution; no RSP step is used.
pub fn extraction_solution(lc: &LabeledChart) -> Result<ProvableSolution, SolutionError> {
    let mut g = ExtractionProofs {
        x: Extractor::new(lc)?,
        lemma: HashMap::new(),
    };
    let vs: Vec<VertexId> = lc.chart().proper_vertices().collect();
    let values: BTreeMap<VertexId, StarExpr> = vs.iter().map(|&v| (v, g.s(v))).collect();
    let certs = vs
        .iter()
        .map(|&v| (v, g.solution_step(v, &values)))
        .collect();
    Ok(ProvableSolution {
        chart: lc.chart().clone(),
        values,
        certs,
    })
}

struct Unifier<'a> {
    x: Extractor<'a>,
    sol: &'a ProvableSolution,
    relative: HashMap<(VertexId, VertexId), Proof>,
    absolute: HashMap<VertexId, Proof>,
}

impl Unifier<'_> {
    fn val(&self, v: VertexId) -> StarExpr {
        self.sol.values[&v].clone()
    }

    /// Rewrites the step summands of the solution equation at `w`, transition by transition.
    fn unfold(
        &mut self,
        w: VertexId,
        mut f: impl FnMut(&mut Self, VertexId, u32) -> Option<Proof>,
    ) -> Proof {
        let lc = self.x.lc;
        let chart = lc.chart();
        let steps: Vec<(VertexId, u32)> = lc
            .out(w)
            .filter(|(t, _)| !chart.is_tick(t.tgt))
            .map(|(t, l)| (t.tgt, l))
            .collect();
        let base = self.sol.certs[&w].clone();
        let tail = base.rhs().children().map(|(_, r)| r.clone()).expect("sum");
        let rewritten = map_summands(&tail, &mut |i, leaf| match steps
            .get(i)
            .and_then(|&(u, l)| f(self, u, l))
        {
            Some(inner) => Proof::cong(leaf, &[Side::R], &inner),
            None => Proof::refl(leaf.clone()),
        });
        base.then(|x| Proof::cong(x, &[Side::R], &rewritten))
    }

    /// `sol(w) = t(w|v).sol(v)`.
    fn relative(&mut self, w: VertexId, v: VertexId) -> Proof {
        if let Some(p) = self.relative.get(&(w, v)) {
            return p.clone();
        }
        let t = self.x.relative(w, v).expect("descends");
        let (e, g) = t
            .children()
            .map(|(a, b)| (a.clone(), b.clone()))
            .expect("star");
        let (sw, sv) = (self.val(w), self.val(v));
        let unfolded = self.unfold(w, |me, u, l| {
            if l > 0 && u != w {
                Some(me.relative(u, w))
            } else if l == 0 && u != v {
                Some(me.relative(u, v))
            } else {
                None
            }
        });
        let (de, dg) = (dist(&e, &sw), dist(&g, &sv));
        let split = StarExpr::sum(de.rhs().clone(), dg.rhs().clone());
        let shape = StarExpr::sum(
            StarExpr::prod(e.clone(), sw.clone()),
            StarExpr::prod(g.clone(), sv.clone()),
        );
        let back = Proof::binary(&shape, &de, &dg).symm();
        let premise = unfolded.then(|x| aci(x, &split)).trans(&back);
        let p = premise
            .rsp()
            .trans(&Proof::axiom(Axiom::Bks2, &[e, g, sv]).symm());
        self.relative.insert((w, v), p.clone());
        p
    }

    /// `sol(w) = s(w)`.
    fn absolute(&mut self, w: VertexId) -> Proof {
        if let Some(p) = self.absolute.get(&w) {
            return p.clone();
        }
        let s = self.x.solution(w).expect("proper vertex");
        let (e, _) = s
            .children()
            .map(|(a, b)| (a.clone(), b.clone()))
            .expect("star");
        let sw = self.val(w);
        let sink = self.x.lc.chart().tick().unwrap_or(VertexId::MAX);
        let body = self.x.body_summands(w, sink);
        let f_sol = big_sum(body.iter().map(|b| match b {
            Summand::Act(a) => StarExpr::act(a.clone()),
            Summand::Prefixed(a, u) => StarExpr::prod(StarExpr::act(a.clone()), self.val(*u)),
        }));
        let unfolded = self.unfold(w, |me, u, l| (l > 0 && u != w).then(|| me.relative(u, w)));
        let de = dist(&e, &sw);
        let split = StarExpr::sum(de.rhs().clone(), f_sol.clone());
        let shape = StarExpr::sum(StarExpr::prod(e.clone(), sw.clone()), f_sol.clone());
        let back = Proof::cong(&shape, &[Side::L], &de).symm();
        let premise = unfolded.then(|x| aci(x, &split)).trans(&back);
        let fixed = premise.rsp();
        let tidy = map_summands(&f_sol, &mut |i, leaf| match body.get(i) {
            Some(Summand::Prefixed(_, u)) => {
                let inner = self.absolute(*u);
                Proof::cong(leaf, &[Side::R], &inner)
            }
            _ => Proof::refl(leaf.clone()),
        });
        let p = fixed.then(|x| Proof::cong(x, &[Side::R], &tidy));
        debug_assert_eq!(p.rhs(), &s);
        self.absolute.insert(w, p.clone());
        p
    }
}

fn unifier<'a>(
    lc: &'a LabeledChart,
    sol: &'a ProvableSolution,
) -> Result<Unifier<'a>, SolutionError> {
    let x = Extractor::new(lc)?;
    for v in lc.chart().proper_vertices() {
        if !sol.values.contains_key(&v) || !sol.certs.contains_key(&v) {
            return Err(SolutionError::Missing(v));
        }
        let p = &sol.certs[&v];
        if p.lhs() != &sol.values[&v] || p.rhs() != &solution_rhs(lc.chart(), v, &sol.values)? {
            return Err(SolutionError::WrongGoal { vertex: v });
        }
    }
    Ok(Unifier {
        x,
        sol,
        relative: HashMap::new(),
        absolute: HashMap::new(),
    })
}

/// For every vertex `w`, a derivation of `sol(w) = s(w)` with `s` the extraction of `lc`.
pub fn unify_solutions(
    lc: &LabeledChart,
    sol: &ProvableSolution,
) -> Result<BTreeMap<VertexId, Proof>, SolutionError> {
    let mut u = unifier(lc, sol)?;
    Ok(lc
        .chart()
        .proper_vertices()
        .collect::<Vec<_>>()
        .into_iter()
        .map(|v| (v, u.absolute(v)))
        .collect())
}

/// A derivation of `e1 = e2` through a common value.
#[derive(Clone, Debug)]
pub struct EqualityProof {
    /// The simplified extraction from the collapsed witness.
    pub middle: StarExpr,
    pub proof: Proof,
    pub certificate: Certificate,
}

/// `e = middle` on the witness `Ĉ(e)` given the collapsed solution.
fn side(e: &StarExpr, col: &ProvableSolution) -> Result<Proof, SolutionError> {
    let lc = interpret_labeled(e);
    let phi = bisim::largest_bisimulation(lc.chart(), &col.chart)
        .and_then(|b| b.as_map())
        .ok_or(SolutionError::NotFunctional)?;
    let moved = transfer_solution(col, lc.chart(), &phi)?;
    let id = identity_solution_on(lc.chart())?;
    let start = lc.chart().start();
    let to_s = unifier(&lc, &id)?.absolute(start);
    let from_s = unifier(&lc, &moved)?.absolute(start);
    Ok(to_s.trans(&from_s.symm()))
}

/// The full pipeline; `None` iff the chart interpretations are not bisimilar.
pub fn prove_equal_traced(
    e1: &StarExpr,
    e2: &StarExpr,
) -> Result<Option<EqualityProof>, SolutionError> {
    if e1 == e2 {
        let proof = Proof::refl(e1.clone());
        return Ok(Some(EqualityProof {
            middle: e1.clone(),
            certificate: proof.to_certificate(),
            proof,
        }));
    }
    if !bisim::bisimilar(&interpret(e1).0, &interpret(e2).0) {
        return Ok(None);
    }
    let (col, _) = collapse::collapse_llee(&interpret_labeled(e1))?;
    let sol = extraction_solution(&col)?;
    let (middle, tidy) = simplify(sol.principal_value());
    let p1 = side(e1, &sol)?.trans(&tidy);
    let p2 = side(e2, &sol)?.trans(&tidy);
    let proof = p1.trans(&p2.symm());
    Ok(Some(EqualityProof {
        middle,
        certificate: proof.to_certificate(),
        proof,
    }))
}

/// A certificate of `e1 = e2` when their charts are bisimilar.
pub fn prove_equal(e1: &StarExpr, e2: &StarExpr) -> Option<Certificate> {
    prove_equal_traced(e1, e2)
        .expect("pipeline stages succeed on interpretations")
        .map(|p| p.certificate)
}
