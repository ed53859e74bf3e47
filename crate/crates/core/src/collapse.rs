//! Bisimulation collapse of charts with a layered loop-elimination witness,
//! by connect-through steps that keep a witness at every stage.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::bisim;
use crate::chart::{Chart, LabeledChart, Transition, VertexId};
use crate::graph;
use crate::llee::{self, Norms, Relations, Violation};

/// The condition under which a bisimilar pair `(w1, w2)` may be connected through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PairCondition {
    /// `w2` cannot reach `w1`; if some vertex descends in a loop to `w1`, `w2` is not normed.
    C1,
    /// `w2` loops back to `w1` transitively, with the chain `w2, ..., w1`.
    C2(Vec<VertexId>),
    /// `w1` directly loops back to the pivot, `w2` loops back to it transitively,
    /// and `w2` cannot reach `w1` by body steps.
    C3(VertexId),
}

impl PairCondition {
    pub fn name(&self) -> &'static str {
        match self {
            PairCondition::C1 => "C1",
            PairCondition::C2(_) => "C2",
            PairCondition::C3(_) => "C3",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            PairCondition::C1 => 1,
            PairCondition::C2(_) => 2,
            PairCondition::C3(_) => 3,
        }
    }
}

impl fmt::Display for PairCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairCondition::C1 => write!(f, "C1"),
            PairCondition::C2(chain) => write!(f, "C2 {chain:?}"),
            PairCondition::C3(v) => write!(f, "C3 pivot {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollapseError {
    #[error("cannot connect {0} through to itself")]
    SameVertex(VertexId),
    #[error("vertex {0} is the sink or not in the chart")]
    BadVertex(VertexId),
    #[error("not a valid witness: {0:?}")]
    InvalidWitness(Vec<Violation>),
    #[error("pair ({w1}, {w2}) does not satisfy {cond}")]
    ConditionMismatch {
        w1: VertexId,
        w2: VertexId,
        cond: String,
    },
    #[error("bisimilar vertices remain but no pair satisfies C1, C2 or C3")]
    NoQualifyingPair,
    #[error("transformation of ({w1}, {w2}) under {cond} broke the witness: {violations:?}")]
    Broken {
        w1: VertexId,
        w2: VertexId,
        cond: String,
        violations: Vec<Violation>,
    },
    #[error("connect-through of ({0}, {1}) changed the behaviour")]
    NotBisimilar(VertexId, VertexId),
}

fn check_pair(c: &Chart, w1: VertexId, w2: VertexId) -> Result<(), CollapseError> {
    if w1 == w2 {
        return Err(CollapseError::SameVertex(w1));
    }
    for w in [w1, w2] {
        if !c.contains(w) || c.is_tick(w) {
            return Err(CollapseError::BadVertex(w));
        }
    }
    Ok(())
}

fn redirect(c: &Chart, w1: VertexId, w2: VertexId) -> (Chart, BTreeMap<Transition, Transition>) {
    let mut out = Chart::new(if c.start() == w1 { w2 } else { c.start() });
    for v in c.vertices() {
        out.add_vertex(v);
        if let Some(e) = c.label(v) {
            out.set_label(v, e.clone());
        }
    }
    if let Some(t) = c.tick() {
        out.set_tick(t);
    }
    let mut origin = BTreeMap::new();
    for t in c.transitions() {
        if t.tgt != w1 {
            out.add_transition(t.src, t.action.clone(), t.tgt);
            origin.insert(t.clone(), t.clone());
        }
    }
    for t in c.transitions() {
        if t.tgt == w1 {
            let n = Transition::new(t.src, t.action.clone(), w2);
            if out.add_transition(n.src, n.action.clone(), n.tgt) {
                origin.insert(n, t.clone());
            }
        }
    }
    (out.garbage_collect(), origin)
}

/// Redirects all transitions into `w1` to `w2`, moves the start vertex if it
/// was `w1`, and garbage collects. The map sends `w1` to `w2` and every
/// other surviving vertex to itself.
pub fn connect_through(
    c: &Chart,
    w1: VertexId,
    w2: VertexId,
) -> Result<(Chart, BTreeMap<VertexId, VertexId>), CollapseError> {
    check_pair(c, w1, w2)?;
    let (out, _) = redirect(c, w1, w2);
    let mut map: BTreeMap<VertexId, VertexId> = out.vertices().map(|v| (v, v)).collect();
    map.insert(w1, w2);
    Ok((out, map))
}

/// Connect-through on a labelled chart: redirected transitions inherit their
/// label, unless they coincide with a transition already present.
pub fn connect_through_labeled(
    lc: &LabeledChart,
    w1: VertexId,
    w2: VertexId,
) -> Result<LabeledChart, CollapseError> {
    check_pair(lc.chart(), w1, w2)?;
    let (out, origin) = redirect(lc.chart(), w1, w2);
    let levels = out
        .transitions()
        .map(|t| (t.clone(), lc.level(&origin[t])))
        .collect();
    Ok(LabeledChart::new(out, levels))
}

/// Demotes entry identifiers whose entries can no longer return to their
/// source by body steps, until none is left.
pub fn clean_up(lc: &LabeledChart) -> LabeledChart {
    let mut cur = lc.clone();
    loop {
        let body = cur.body_succ();
        let mut dead = None;
        for (u, alpha) in cur.entry_identifiers() {
            let returns = cur
                .out(u)
                .filter(|(_, l)| *l == alpha)
                .any(|(t, _)| t.tgt == u || graph::reach(&body, [t.tgt]).contains(&u));
            if !returns {
                dead = Some((u, alpha));
                break;
            }
        }
        let Some((u, alpha)) = dead else {
            return cur;
        };
        let ts: Vec<Transition> = cur
            .out(u)
            .filter(|(_, l)| *l == alpha)
            .map(|(t, _)| t.clone())
            .collect();
        for t in ts {
            cur.set_level(&t, 0);
        }
    }
}

/// Precomputed facts about a witness used by the pair conditions.
struct Facts {
    rel: Relations,
    lb_plus: BTreeSet<(VertexId, VertexId)>,
    reach: BTreeMap<VertexId, BTreeSet<VertexId>>,
    body_reach: BTreeMap<VertexId, BTreeSet<VertexId>>,
    normed: BTreeSet<VertexId>,
}

impl Facts {
    fn new(lc: &LabeledChart) -> Facts {
        let c = lc.chart();
        let rel = llee::relations_unchecked(lc);
        let lb_plus = rel.loops_back_plus();
        let succ = c.succ();
        let body = lc.body_succ();
        let reach: BTreeMap<_, _> = c
            .vertices()
            .map(|v| (v, graph::reach(&succ, [v])))
            .collect();
        let body_reach = c
            .vertices()
            .map(|v| (v, graph::reach(&body, [v])))
            .collect();
        let normed = match c.tick() {
            Some(t) => c.vertices().filter(|v| reach[v].contains(&t)).collect(),
            None => BTreeSet::new(),
        };
        Facts {
            rel,
            lb_plus,
            reach,
            body_reach,
            normed,
        }
    }

    fn c1(&self, w1: VertexId, w2: VertexId) -> bool {
        !self.reach[&w2].contains(&w1)
            && (!self.rel.is_descended_to(w1) || !self.normed.contains(&w2))
    }

    fn c2(&self, w1: VertexId, w2: VertexId) -> Option<Vec<VertexId>> {
        if !self.lb_plus.contains(&(w2, w1)) {
            return None;
        }
        let mut prev: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        let mut queue = VecDeque::from([w2]);
        while let Some(x) = queue.pop_front() {
            if x == w1 {
                let mut chain = vec![w1];
                let mut y = w1;
                while y != w2 {
                    y = prev[&y];
                    chain.push(y);
                }
                chain.reverse();
                return Some(chain);
            }
            for s in self.rel.loops_back_successors(x) {
                if s != w2 && !prev.contains_key(&s) {
                    prev.insert(s, x);
                    queue.push_back(s);
                }
            }
        }
        None
    }

    fn c3(&self, w1: VertexId, w2: VertexId) -> Option<VertexId> {
        if self.body_reach[&w2].contains(&w1) {
            return None;
        }
        let v = self.rel.direct_successor(w1)?;
        self.lb_plus.contains(&(w2, v)).then_some(v)
    }

    fn condition(&self, w1: VertexId, w2: VertexId) -> Option<PairCondition> {
        if self.c1(w1, w2) {
            return Some(PairCondition::C1);
        }
        if let Some(chain) = self.c2(w1, w2) {
            return Some(PairCondition::C2(chain));
        }
        self.c3(w1, w2).map(PairCondition::C3)
    }

    fn holds(&self, w1: VertexId, w2: VertexId, cond: &PairCondition) -> bool {
        match cond {
            PairCondition::C1 => self.c1(w1, w2),
            PairCondition::C2(_) => self.c2(w1, w2).is_some(),
            PairCondition::C3(v) => self.c3(w1, w2) == Some(*v),
        }
    }
}

fn require_valid(lc: &LabeledChart) -> Result<(), CollapseError> {
    let r = llee::check_llee_witness(lc);
    if r.ok {
        Ok(())
    } else {
        Err(CollapseError::InvalidWitness(r.violations))
    }
}

/// The first condition among C1, C2, C3 that the ordered pair satisfies.
pub fn pair_condition(
    lc: &LabeledChart,
    w1: VertexId,
    w2: VertexId,
) -> Result<Option<PairCondition>, CollapseError> {
    require_valid(lc)?;
    check_pair(lc.chart(), w1, w2)?;
    Ok(Facts::new(lc).condition(w1, w2))
}

/// How the next pair is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PairStrategy {
    /// All bisimilar ordered pairs; C1 before C2 before C3, then the least pair.
    #[default]
    Exhaustive,
    /// Walk from the least bisimilar pair along loops-back-to steps, falling
    /// back to the exhaustive search if the walk does not end in a qualifying pair.
    Constructive,
}

fn bisimilar_pairs(c: &Chart) -> Vec<(VertexId, VertexId)> {
    let rep = bisim::self_classes(c);
    let mut out = Vec::new();
    for (&a, ra) in &rep {
        for (&b, rb) in &rep {
            if a != b && ra == rb && !c.is_tick(a) {
                out.push((a, b));
            }
        }
    }
    out
}

fn exhaustive(
    lc: &LabeledChart,
    facts: &Facts,
) -> Result<Option<(VertexId, VertexId, PairCondition)>, CollapseError> {
    let pairs = bisimilar_pairs(lc.chart());
    if pairs.is_empty() {
        return Ok(None);
    }
    let mut best: Option<(VertexId, VertexId, PairCondition)> = None;
    for (w1, w2) in pairs {
        if let Some(cond) = facts.condition(w1, w2) {
            let better = match &best {
                None => true,
                Some((_, _, b)) => cond.rank() < b.rank(),
            };
            if better {
                best = Some((w1, w2, cond));
            }
        }
    }
    best.map(Some).ok_or(CollapseError::NoQualifyingPair)
}

fn lub(facts: &Facts, a: VertexId, b: VertexId) -> Option<VertexId> {
    let up = |x: VertexId| -> BTreeSet<VertexId> {
        let mut s: BTreeSet<VertexId> = facts
            .lb_plus
            .range((x, 0)..=(x, VertexId::MAX))
            .map(|&(_, y)| y)
            .collect();
        s.insert(x);
        s
    };
    let (ua, ub) = (up(a), up(b));
    let common: Vec<VertexId> = ua.intersection(&ub).copied().collect();
    common.iter().copied().find(|&w| {
        common
            .iter()
            .all(|&z| z == w || facts.lb_plus.contains(&(w, z)))
    })
}

fn constructive(
    lc: &LabeledChart,
    facts: &Facts,
    norms: &Norms,
) -> Option<(VertexId, VertexId, PairCondition)> {
    let c = lc.chart();
    let rep = bisim::self_classes(c);
    let scc = c.scc_index();
    let (mut u1, mut u2) = *bisimilar_pairs(c).first()?;
    for _ in 0..=c.num_vertices() * c.num_vertices() {
        for (a, b) in [(u1, u2), (u2, u1)] {
            if let Some(cond) = facts.condition(a, b) {
                return Some((a, b, cond));
            }
        }
        if scc[&u1] != scc[&u2] {
            if facts.reach[&u2].contains(&u1) {
                std::mem::swap(&mut u1, &mut u2);
            }
        } else {
            let v = lub(facts, u1, u2)?;
            let below = |x: VertexId| {
                let mut cands: Vec<VertexId> = facts
                    .lb_plus
                    .range((x, 0)..=(x, VertexId::MAX))
                    .map(|&(_, y)| y)
                    .collect();
                cands.push(x);
                cands
                    .into_iter()
                    .find(|&y| facts.rel.directly_loops_back_to.contains(&(y, v)))
            };
            let (v1, v2) = (below(u1)?, below(u2)?);
            if facts.body_reach[&v2].contains(&v1) {
                std::mem::swap(&mut u1, &mut u2);
            }
        }
        let lbsn = norms.lbsn[&u1];
        if lbsn == 0 {
            return None;
        }
        let step = lc
            .out(u1)
            .find(|(t, l)| *l == 0 && scc[&t.tgt] == scc[&u1] && norms.lbsn[&t.tgt] + 1 == lbsn)?;
        let (a, n1) = (step.0.action.clone(), step.0.tgt);
        let n2 = c
            .out(u2)
            .find(|t| t.action == a && rep[&t.tgt] == rep[&n1])?
            .tgt;
        if n1 == n2 {
            return None;
        }
        u1 = n1;
        u2 = n2;
    }
    None
}

/// A bisimilar pair with a verified condition, or `None` if the chart is collapsed.
pub fn find_collapsible_pair(
    lc: &LabeledChart,
) -> Result<Option<(VertexId, VertexId, PairCondition)>, CollapseError> {
    find_collapsible_pair_with(lc, PairStrategy::Exhaustive)
}

pub fn find_collapsible_pair_with(
    lc: &LabeledChart,
    strategy: PairStrategy,
) -> Result<Option<(VertexId, VertexId, PairCondition)>, CollapseError> {
    require_valid(lc)?;
    let facts = Facts::new(lc);
    if strategy == PairStrategy::Constructive {
        let norms = llee::norms_unchecked(lc);
        if let Some(found) = constructive(lc, &facts, &norms) {
            return Ok(Some(found));
        }
    }
    exhaustive(lc, &facts)
}

/// Applies the level adaptation for `cond`, the connect-through step and the clean-up.
pub fn transform(
    lc: &LabeledChart,
    w1: VertexId,
    w2: VertexId,
    cond: &PairCondition,
) -> Result<LabeledChart, CollapseError> {
    require_valid(lc)?;
    check_pair(lc.chart(), w1, w2)?;
    let facts = Facts::new(lc);
    if !facts.holds(w1, w2, cond) {
        return Err(CollapseError::ConditionMismatch {
            w1,
            w2,
            cond: cond.name().to_string(),
        });
    }
    let out = match cond {
        PairCondition::C1 => {
            let from_w2 = &facts.reach[&w2];
            let m = lc
                .entries()
                .filter(|(t, _)| from_w2.contains(&t.src))
                .map(|(_, l)| l)
                .max()
                .unwrap_or(0);
            let mut adapted = lc.clone();
            let raise: Vec<(Transition, u32)> = lc
                .entries()
                .filter(|(t, _)| facts.reach[&t.tgt].contains(&w1))
                .map(|(t, l)| (t.clone(), l))
                .collect();
            for (t, l) in raise {
                adapted.set_level(&t, l + m);
            }
            connect_through_labeled(&adapted, w1, w2)?
        }
        PairCondition::C2(_) => {
            let gamma = lc.max_entry_level(w1);
            let mut ups: Vec<VertexId> = facts
                .lb_plus
                .range((w2, 0)..=(w2, VertexId::MAX))
                .map(|&(_, y)| y)
                .collect();
            ups.insert(0, w2);
            let hat = ups
                .into_iter()
                .find(|&y| facts.rel.directly_loops_back_to.contains(&(y, w1)))
                .ok_or_else(|| CollapseError::ConditionMismatch {
                    w1,
                    w2,
                    cond: "C2".into(),
                })?;
            let mut out = connect_through_labeled(lc, w1, w2)?;
            if out.chart().contains(hat) {
                let body: Vec<Transition> = out
                    .out(hat)
                    .filter(|(_, l)| *l == 0)
                    .map(|(t, _)| t.clone())
                    .collect();
                for t in body {
                    out.set_level(&t, gamma);
                }
            }
            out
        }
        PairCondition::C3(v) => {
            let gamma = lc.max_entry_level(*v);
            let mut adapted = lc.clone();
            let entries: Vec<Transition> = lc
                .out(*v)
                .filter(|(_, l)| *l > 0)
                .map(|(t, _)| t.clone())
                .collect();
            for t in entries {
                adapted.set_level(&t, gamma);
            }
            connect_through_labeled(&adapted, w1, w2)?
        }
    };
    let out = clean_up(&out);
    let report = llee::check_llee_witness(&out);
    if !report.ok {
        return Err(CollapseError::Broken {
            w1,
            w2,
            cond: cond.name().to_string(),
            violations: report.violations,
        });
    }
    Ok(out)
}

/// One connect-through step of a collapse run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollapseStep {
    pub w1: VertexId,
    pub w2: VertexId,
    pub cond: PairCondition,
    pub result: LabeledChart,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollapseRun {
    pub result: LabeledChart,
    /// Functional bisimulation from the input chart onto the result.
    /// The result is renumbered breadth-first; the steps keep the input's ids.
    pub map: BTreeMap<VertexId, VertexId>,
    pub steps: Vec<CollapseStep>,
}

/// Collapses until no bisimilar pair is left, recording every step.
pub fn collapse_llee_traced(
    lc: &LabeledChart,
    strategy: PairStrategy,
) -> Result<CollapseRun, CollapseError> {
    require_valid(lc)?;
    let mut cur = lc.clone();
    let mut steps = Vec::new();
    while let Some((w1, w2, cond)) = find_collapsible_pair_with(&cur, strategy)? {
        let next = transform(&cur, w1, w2, &cond)?;
        if !bisim::bisimilar(cur.chart(), next.chart()) {
            return Err(CollapseError::NotBisimilar(w1, w2));
        }
        steps.push(CollapseStep {
            w1,
            w2,
            cond,
            result: next.clone(),
        });
        cur = next;
    }
    let cur = cur.renumber();
    let map = bisim::largest_bisimulation(lc.chart(), cur.chart())
        .and_then(|b| b.as_map())
        .expect("collapsed chart is the image of a functional bisimulation");
    Ok(CollapseRun {
        result: cur,
        map,
        steps,
    })
}

/// Collapse with the default pair selection.
pub fn collapse_llee(
    lc: &LabeledChart,
) -> Result<(LabeledChart, BTreeMap<VertexId, VertexId>), CollapseError> {
    let run = collapse_llee_traced(lc, PairStrategy::Exhaustive)?;
    Ok((run.result, run.map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Action};
    use crate::interp::interpret_labeled;

    fn act(s: &str) -> Action {
        Action::new(s).unwrap()
    }

    #[test]
    fn unreachable_w1_is_dropped() {
        let mut c = Chart::new(0);
        c.add_transition(0, act("a"), 1);
        c.add_transition(2, act("a"), 1);
        let (out, map) = connect_through(&c, 2, 1).unwrap();
        assert!(!out.contains(2));
        assert_eq!(map[&2], 1);
        assert!(connect_through(&c, 1, 1).is_err());
    }

    #[test]
    fn self_loops_are_redirected() {
        let mut c = Chart::new(0);
        c.add_transition(0, act("a"), 1);
        c.add_transition(1, act("a"), 1);
        c.add_transition(0, act("b"), 2);
        c.add_transition(2, act("a"), 2);
        c.add_transition(2, act("a"), 1);
        let (out, _) = connect_through(&c, 1, 2).unwrap();
        assert!(out.has_transition(&Transition::new(0, act("a"), 2)));
        assert!(out.has_transition(&Transition::new(2, act("a"), 2)));
        assert!(!out.contains(1));
        assert!(bisim::bisimilar(&c, &out));
    }

    #[test]
    fn e0_is_collapsed() {
        let lc = interpret_labeled(&parse_expr("a.((c.a + a.(b + b.a)) * 0)").unwrap());
        assert_eq!(find_collapsible_pair(&lc).unwrap(), None);
        let run = collapse_llee_traced(&lc, PairStrategy::Exhaustive).unwrap();
        assert!(run.steps.is_empty());
        assert_eq!(run.result, lc);
    }

    #[test]
    fn e1_collapses_to_three() {
        let lc = interpret_labeled(&parse_expr("(a.((a.(b + b.a)) * c)) * 0").unwrap());
        let (out, map) = collapse_llee(&lc).unwrap();
        assert_eq!(out.chart().num_vertices(), 3);
        assert_eq!(map.len(), lc.chart().num_vertices());
    }
}
