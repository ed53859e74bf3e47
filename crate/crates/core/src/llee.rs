//! Loop charts, loop elimination, and layered loop-existence-and-elimination
//! witnesses with the relations and norms they induce.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::chart::{Chart, LabeledChart, Transition, VertexId};
use crate::graph::{self, Succ};

/// Which loop chart condition fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopFailure {
    /// No infinite path from the start vertex.
    L1,
    /// An infinite path does not return to the start vertex.
    L2,
    /// The sink is present.
    L3,
}

/// Checks the loop chart conditions in the order L1, L2, L3.
pub fn is_loop_chart(c: &Chart) -> Result<(), LoopFailure> {
    let succ = c.succ();
    let reach = graph::reach(&succ, [c.start()]);
    if graph::find_cycle(&succ, &reach).is_none() {
        return Err(LoopFailure::L1);
    }
    let mut rest = reach.clone();
    rest.remove(&c.start());
    if graph::find_cycle(&succ, &rest).is_some() {
        return Err(LoopFailure::L2);
    }
    if c.tick().is_some_and(|t| reach.contains(&t)) {
        return Err(LoopFailure::L3);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    W1,
    W2aL1,
    W2aL2,
    W2aL3,
    W2b,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::W1 => "W1",
            ViolationKind::W2aL1 => "W2a-L1",
            ViolationKind::W2aL2 => "W2a-L2",
            ViolationKind::W2aL3 => "W2a-L3",
            ViolationKind::W2b => "W2b",
        })
    }
}

/// Where a violation was found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Site {
    /// A cycle of body transitions.
    BodyCycle(Vec<VertexId>),
    /// An entry identifier `<v, alpha>`.
    Entry { vertex: VertexId, level: u32 },
    /// Entry transition of level `found` at `at` inside the loop of `<vertex, level>`.
    Layer {
        vertex: VertexId,
        level: u32,
        at: VertexId,
        found: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub site: Site,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.site {
            Site::BodyCycle(c) => write!(f, "{}: body cycle through {:?}", self.kind, c),
            Site::Entry { vertex, level } => {
                write!(f, "{}: entry <{}, {}>", self.kind, vertex, level)
            }
            Site::Layer {
                vertex,
                level,
                at,
                found,
            } => write!(
                f,
                "{}: loop <{}, {}> reaches vertex {} with entry level {}",
                self.kind, vertex, level, at, found
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct WitnessReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LleeError {
    #[error("not a valid witness: {0:?}")]
    InvalidWitness(Vec<Violation>),
    #[error("vertex {vertex} has {count} outgoing transitions; subset search is capped at 2^12")]
    SubsetCap { vertex: VertexId, count: usize },
}

/// The loop subchart generated by the `alpha`-entries at `v`: one such entry,
/// then body transitions only, stopping when `v` is reached again.
pub fn loop_subchart(lc: &LabeledChart, v: VertexId, alpha: u32) -> Chart {
    let c = lc.chart();
    let mut sub = Chart::new(v);
    let mut stack = Vec::new();
    for (t, l) in lc.out(v) {
        if l == alpha {
            sub.add_transition(t.src, t.action.clone(), t.tgt);
            if t.tgt != v {
                stack.push(t.tgt);
            }
        }
    }
    let mut seen = BTreeSet::new();
    while let Some(w) = stack.pop() {
        if !seen.insert(w) {
            continue;
        }
        for (t, l) in lc.out(w) {
            if l == 0 {
                sub.add_transition(t.src, t.action.clone(), t.tgt);
                if t.tgt != v {
                    stack.push(t.tgt);
                }
            }
        }
    }
    if let Some(t) = c.tick() {
        if sub.contains(t) {
            sub.set_tick(t);
        }
    }
    sub
}

/// Checks W1 (no body cycle) and W2 (each entry identifier generates a loop
/// chart, and no vertex of that loop other than its start has an entry of
/// the same or a higher level).
pub fn check_llee_witness(lc: &LabeledChart) -> WitnessReport {
    let mut violations = Vec::new();
    let body = lc.body_succ();
    if let Some(cycle) = graph::find_cycle(&body, lc.chart().vertex_set()) {
        violations.push(Violation {
            kind: ViolationKind::W1,
            site: Site::BodyCycle(cycle),
        });
    }
    for (v, alpha) in lc.entry_identifiers() {
        let sub = loop_subchart(lc, v, alpha);
        if let Err(f) = is_loop_chart(&sub) {
            let kind = match f {
                LoopFailure::L1 => ViolationKind::W2aL1,
                LoopFailure::L2 => ViolationKind::W2aL2,
                LoopFailure::L3 => ViolationKind::W2aL3,
            };
            violations.push(Violation {
                kind,
                site: Site::Entry {
                    vertex: v,
                    level: alpha,
                },
            });
        }
        for w in sub.vertices().filter(|&w| w != v) {
            let found = lc.max_entry_level(w);
            if found >= alpha {
                violations.push(Violation {
                    kind: ViolationKind::W2b,
                    site: Site::Layer {
                        vertex: v,
                        level: alpha,
                        at: w,
                        found,
                    },
                });
            }
        }
    }
    WitnessReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Relations induced by a witness.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Relations {
    /// `v ->bo w`.
    pub body_step: BTreeSet<(VertexId, VertexId)>,
    /// `(v, w, alpha)` for `v` descends in loop `alpha` to `w`.
    pub descends_in_loop_to: BTreeSet<(VertexId, VertexId, u32)>,
    /// `(w, v)` for `w` loops back to `v`.
    pub loops_back_to: BTreeSet<(VertexId, VertexId)>,
    /// `(w, v)` for `w` directly loops back to `v`.
    pub directly_loops_back_to: BTreeSet<(VertexId, VertexId)>,
}

impl Relations {
    pub fn descends(&self, v: VertexId, w: VertexId) -> bool {
        self.descends_in_loop_to
            .range((v, w, 0)..=(v, w, u32::MAX))
            .next()
            .is_some()
    }

    /// Some vertex descends in a loop to `w`.
    pub fn is_descended_to(&self, w: VertexId) -> bool {
        self.descends_in_loop_to.iter().any(|&(_, x, _)| x == w)
    }

    pub fn loops_back(&self, w: VertexId, v: VertexId) -> bool {
        self.loops_back_to.contains(&(w, v))
    }

    /// Successors of `w` under loops-back-to.
    pub fn loops_back_successors(&self, w: VertexId) -> Vec<VertexId> {
        self.loops_back_to
            .range((w, 0)..=(w, VertexId::MAX))
            .map(|&(_, v)| v)
            .collect()
    }

    /// Transitive closure of loops-back-to (irreflexive part).
    pub fn loops_back_plus(&self) -> BTreeSet<(VertexId, VertexId)> {
        closure(&self.loops_back_to)
    }

    /// The direct successor of `w`, if any.
    pub fn direct_successor(&self, w: VertexId) -> Option<VertexId> {
        self.directly_loops_back_to
            .range((w, 0)..=(w, VertexId::MAX))
            .map(|&(_, v)| v)
            .next()
    }
}

/// Transitive closure of a relation.
pub fn closure(rel: &BTreeSet<(VertexId, VertexId)>) -> BTreeSet<(VertexId, VertexId)> {
    let mut succ = Succ::new();
    let mut dom = BTreeSet::new();
    for &(a, b) in rel {
        succ.entry(a).or_default().push(b);
        dom.insert(a);
    }
    let mut out = BTreeSet::new();
    for &a in &dom {
        let starts: Vec<VertexId> = succ[&a].clone();
        for b in graph::reach(&succ, starts) {
            out.insert((a, b));
        }
    }
    out
}

fn require_valid(lc: &LabeledChart) -> Result<(), LleeError> {
    let r = check_llee_witness(lc);
    if r.ok {
        Ok(())
    } else {
        Err(LleeError::InvalidWitness(r.violations))
    }
}

/// The relations body step, descends-in-loop-to, loops-back-to and directly-loops-back-to.
pub fn relations(lc: &LabeledChart) -> Result<Relations, LleeError> {
    require_valid(lc)?;
    Ok(relations_unchecked(lc))
}

pub(crate) fn relations_unchecked(lc: &LabeledChart) -> Relations {
    let mut rel = Relations::default();
    for (t, l) in lc.levels() {
        if *l == 0 {
            rel.body_step.insert((t.src, t.tgt));
        }
    }
    for (v, alpha) in lc.entry_identifiers() {
        for w in loop_subchart(lc, v, alpha).vertices() {
            if w != v {
                rel.descends_in_loop_to.insert((v, w, alpha));
            }
        }
    }
    let body = lc.body_succ();
    let mut body_reach: BTreeMap<VertexId, BTreeSet<VertexId>> = BTreeMap::new();
    for &(v, w, _) in &rel.descends_in_loop_to {
        let r = body_reach.entry(w).or_insert_with(|| {
            let first = body.get(&w).cloned().unwrap_or_default();
            graph::reach(&body, first)
        });
        if r.contains(&v) {
            rel.loops_back_to.insert((w, v));
        }
    }
    for &(w, v) in &rel.loops_back_to {
        let direct = rel
            .loops_back_successors(w)
            .into_iter()
            .all(|u| u == v || rel.loops_back_to.contains(&(v, u)));
        if direct {
            rel.directly_loops_back_to.insert((w, v));
        }
    }
    rel
}

/// Entry step level, body step norm and loops-back-to norm of each vertex.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Norms {
    pub enl: BTreeMap<VertexId, u32>,
    pub bosn: BTreeMap<VertexId, usize>,
    pub lbsn: BTreeMap<VertexId, usize>,
}

pub fn norms(lc: &LabeledChart) -> Result<Norms, LleeError> {
    require_valid(lc)?;
    Ok(norms_unchecked(lc))
}

pub(crate) fn norms_unchecked(lc: &LabeledChart) -> Norms {
    let c = lc.chart();
    let vs = c.vertex_set();
    let enl = c.vertices().map(|v| (v, lc.max_entry_level(v))).collect();
    let body = lc.body_succ();
    let bosn = graph::longest_paths(&body, vs);
    let scc = c.scc_index();
    let mut lb = Succ::new();
    for (v, ws) in &body {
        let same: Vec<VertexId> = ws.iter().copied().filter(|w| scc[w] == scc[v]).collect();
        lb.insert(*v, same);
    }
    let lbsn = graph::longest_paths(&lb, vs);
    Norms { enl, bosn, lbsn }
}

/// How candidate entry sets are ordered at a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EntrySelection {
    /// Largest sets first.
    #[default]
    Maximal,
    /// Smallest sets first, in canonical transition order.
    FirstSingle,
    /// Smallest sets first, in reverse canonical transition order.
    LastSingle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum VertexOrder {
    #[default]
    Ascending,
    Descending,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeeStrategy {
    pub entries: EntrySelection,
    pub order: VertexOrder,
    /// Explore alternative choices when the greedy run gets stuck.
    pub backtrack: bool,
}

impl Default for LeeStrategy {
    fn default() -> LeeStrategy {
        LeeStrategy {
            entries: EntrySelection::Maximal,
            order: VertexOrder::Ascending,
            backtrack: true,
        }
    }
}

/// One elimination: the entry transitions removed at `vertex` in round `step`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationStep {
    pub vertex: VertexId,
    pub entries: Vec<Transition>,
    pub step: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeeResult {
    pub lee: bool,
    /// Removed transitions labelled with their round, everything else body.
    pub witness: LabeledChart,
    pub trace: Vec<EliminationStep>,
    /// Why the run stopped without success.
    pub diagnosis: Option<String>,
}

const SUBSET_CAP: usize = 12;
const BACKTRACK_BUDGET: usize = 20_000;

fn candidate_sets(
    c: &Chart,
    v: VertexId,
    sel: EntrySelection,
) -> Result<Vec<Vec<Transition>>, LleeError> {
    let out: Vec<Transition> = c.out(v).cloned().collect();
    if out.len() > SUBSET_CAP {
        return Err(LleeError::SubsetCap {
            vertex: v,
            count: out.len(),
        });
    }
    let n = out.len();
    let mut masks: Vec<u32> = (1u32..(1 << n)).collect();
    let key = |m: &u32| -> Vec<usize> { (0..n).filter(|i| m & (1 << i) != 0).collect() };
    match sel {
        EntrySelection::Maximal => {
            masks.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), key(m)));
        }
        EntrySelection::FirstSingle => masks.sort_by_key(|m| (m.count_ones(), key(m))),
        EntrySelection::LastSingle => masks.sort_by_key(|m| {
            let rev: Vec<std::cmp::Reverse<usize>> =
                key(m).into_iter().rev().map(std::cmp::Reverse).collect();
            (m.count_ones(), rev)
        }),
    }
    Ok(masks
        .into_iter()
        .map(|m| {
            out.iter()
                .enumerate()
                .filter(|(i, _)| m & (1 << i) != 0)
                .map(|(_, t)| t.clone())
                .collect()
        })
        .collect())
}

/// All loop subcharts of `c` as `(vertex, entry set)` in strategy order.
fn loop_choices(c: &Chart, s: &LeeStrategy) -> Result<Vec<(VertexId, Vec<Transition>)>, LleeError> {
    let mut vs: Vec<VertexId> = c.proper_vertices().collect();
    if s.order == VertexOrder::Descending {
        vs.reverse();
    }
    let mut out = Vec::new();
    for v in vs {
        for u in candidate_sets(c, v, s.entries)? {
            let sub = c.generated_subchart(v, &u).expect("transitions from v");
            if is_loop_chart(&sub).is_ok() {
                out.push((v, u));
            }
        }
    }
    Ok(out)
}

/// Repeatedly removes the entry transitions of a loop subchart and garbage
/// collects, until no cycle is left (LEE holds) or no loop subchart exists.
pub fn loop_elimination(c: &Chart, strategy: &LeeStrategy) -> Result<LeeResult, LleeError> {
    struct Search<'a> {
        strategy: &'a LeeStrategy,
        budget: usize,
    }

    fn run(
        s: &mut Search,
        current: &Chart,
        trace: &mut Vec<EliminationStep>,
    ) -> Result<Option<String>, LleeError> {
        if current.is_acyclic() {
            return Ok(None);
        }
        let choices = loop_choices(current, s.strategy)?;
        if choices.is_empty() {
            return Ok(Some("no loop subchart".to_string()));
        }
        let tries = if s.strategy.backtrack {
            choices.len()
        } else {
            1
        };
        let mut first_failure = None;
        for (v, u) in choices.into_iter().take(tries) {
            if s.budget == 0 {
                break;
            }
            s.budget -= 1;
            let mut next = current.clone();
            for t in &u {
                next.remove_transition(t);
            }
            let next = next.garbage_collect();
            trace.push(EliminationStep {
                vertex: v,
                entries: u,
                step: trace.len() as u32 + 1,
            });
            match run(s, &next, trace)? {
                None => return Ok(None),
                Some(d) => {
                    first_failure.get_or_insert(d);
                    trace.pop();
                }
            }
        }
        Ok(Some(
            first_failure.unwrap_or_else(|| "search budget exhausted".to_string()),
        ))
    }

    let mut search = Search {
        strategy,
        budget: BACKTRACK_BUDGET,
    };
    let mut trace = Vec::new();
    let current = c.garbage_collect();
    let diagnosis = match run(&mut search, &current, &mut trace)? {
        None => None,
        Some(_) => {
            let (greedy, d) = greedy_failure(&current, strategy)?;
            trace = greedy;
            Some(d)
        }
    };
    let mut levels = BTreeMap::new();
    for st in &trace {
        for t in &st.entries {
            levels.insert(t.clone(), st.step);
        }
    }
    Ok(LeeResult {
        lee: diagnosis.is_none(),
        witness: LabeledChart::new(c.clone(), levels),
        trace,
        diagnosis,
    })
}

/// The greedy run and its stopping reason, for reporting failures.
fn greedy_failure(
    c: &Chart,
    strategy: &LeeStrategy,
) -> Result<(Vec<EliminationStep>, String), LleeError> {
    let mut current = c.clone();
    let mut trace = Vec::new();
    loop {
        if current.is_acyclic() {
            return Ok((trace, "search budget exhausted".to_string()));
        }
        let choices = loop_choices(&current, strategy)?;
        let Some((v, u)) = choices.into_iter().next() else {
            return Ok((trace, "no loop subchart".to_string()));
        };
        for t in &u {
            current.remove_transition(t);
        }
        current = current.garbage_collect();
        trace.push(EliminationStep {
            vertex: v,
            entries: u,
            step: trace.len() as u32 + 1,
        });
    }
}

/// Replays the elimination encoded by a labelling: entry identifiers are
/// removed in order of increasing level, then vertex.
pub fn eliminate_by_labeling(lc: &LabeledChart) -> LeeResult {
    let mut ids = lc.entry_identifiers();
    ids.sort_by_key(|&(v, a)| (a, v));
    let mut current = lc.chart().clone();
    let mut trace = Vec::new();
    for (v, a) in ids {
        if !current.contains(v) {
            continue;
        }
        let u: Vec<Transition> = lc
            .out(v)
            .filter(|(t, l)| *l == a && current.has_transition(t))
            .map(|(t, _)| t.clone())
            .collect();
        if u.is_empty() {
            continue;
        }
        let sub = current
            .generated_subchart(v, &u)
            .expect("transitions from v");
        if is_loop_chart(&sub).is_err() {
            return LeeResult {
                lee: false,
                witness: lc.clone(),
                trace,
                diagnosis: Some(format!(
                    "entry <{v}, {a}> does not generate a loop subchart"
                )),
            };
        }
        for t in &u {
            current.remove_transition(t);
        }
        current = current.garbage_collect();
        trace.push(EliminationStep {
            vertex: v,
            entries: u,
            step: trace.len() as u32 + 1,
        });
    }
    let lee = current.is_acyclic();
    LeeResult {
        lee,
        witness: lc.clone(),
        trace,
        diagnosis: if lee {
            None
        } else {
            Some("cycle left after eliminations".into())
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Action};
    use crate::interp::{interpret, interpret_labeled};

    fn act(s: &str) -> Action {
        Action::new(s).unwrap()
    }

    fn e0() -> LabeledChart {
        interpret_labeled(&parse_expr("a.((c.a + a.(b + b.a)) * 0)").unwrap())
    }

    #[test]
    fn self_loop_is_loop_chart() {
        let mut c = Chart::new(0);
        c.add_transition(0, act("a"), 0);
        assert_eq!(is_loop_chart(&c), Ok(()));
        assert_eq!(is_loop_chart(&Chart::new(0)), Err(LoopFailure::L1));
    }

    #[test]
    fn e0_witness() {
        let lc = e0();
        assert!(check_llee_witness(&lc).ok);
        let all_body = LabeledChart::all_body(lc.chart().clone());
        let r = check_llee_witness(&all_body);
        assert!(!r.ok);
        assert_eq!(r.violations[0].kind, ViolationKind::W1);
    }

    #[test]
    fn e0_relations() {
        let rel = relations(&e0()).unwrap();
        assert_eq!(
            rel.descends_in_loop_to,
            BTreeSet::from([(1, 0, 1), (1, 2, 1)])
        );
        assert_eq!(rel.loops_back_to, BTreeSet::from([(0, 1), (2, 1)]));
        assert_eq!(rel.directly_loops_back_to, rel.loops_back_to);
        let n = norms(&e0()).unwrap();
        assert_eq!(n.enl[&1], 1);
        assert_eq!(n.enl[&0], 0);
        assert_eq!(n.bosn[&2], 2);
        assert_eq!(n.bosn[&0], 1);
        assert_eq!(n.bosn[&1], 0);
    }

    #[test]
    fn elimination_on_e0() {
        let c = interpret(&parse_expr("a.((c.a + a.(b + b.a)) * 0)").unwrap()).0;
        let r = loop_elimination(&c, &LeeStrategy::default()).unwrap();
        assert!(r.lee);
        assert_eq!(r.trace.len(), 1);
        assert!(check_llee_witness(&r.witness).ok);
    }

    #[test]
    fn acyclic_has_empty_trace() {
        let c = interpret(&parse_expr("a.b + c").unwrap()).0;
        let r = loop_elimination(&c, &LeeStrategy::default()).unwrap();
        assert!(r.lee);
        assert!(r.trace.is_empty());
    }
}
