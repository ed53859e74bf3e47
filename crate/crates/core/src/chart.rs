//! Charts: finite labelled transition graphs with a start vertex and an
//! optional termination sink, plus entry/body-labelled charts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Bound;

use thiserror::Error;

use crate::expr::{format_expr, Action, StarExpr};
use crate::graph::{self, Succ};

pub type VertexId = usize;

/// A transition `src -action-> tgt`. Ordered by source, action, target.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub src: VertexId,
    pub action: Action,
    pub tgt: VertexId,
}

impl Transition {
    pub fn new(src: VertexId, action: Action, tgt: VertexId) -> Transition {
        Transition { src, action, tgt }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChartError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: sink has outgoing transition")]
    SinkOutgoing { line: usize },
    #[error("sink has outgoing transition from vertex {vertex}")]
    SinkHasOutgoing { vertex: VertexId },
    #[error("vertex {vertex} is not reachable from the start vertex (disconnected start)")]
    Disconnected { vertex: VertexId },
    #[error("start vertex is the sink")]
    StartIsTick,
    #[error("missing `start` declaration")]
    MissingStart,
    #[error("line {line}: missing level column in labeled chart")]
    MissingLevel { line: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// A chart `<V, tick, start, A, T>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    start: VertexId,
    tick: Option<VertexId>,
    vertices: BTreeSet<VertexId>,
    transitions: BTreeSet<Transition>,
    labels: BTreeMap<VertexId, StarExpr>,
}

impl Chart {
    /// A chart with only a start vertex.
    pub fn new(start: VertexId) -> Chart {
        Chart {
            start,
            tick: None,
            vertices: BTreeSet::from([start]),
            transitions: BTreeSet::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn start(&self) -> VertexId {
        self.start
    }

    pub fn tick(&self) -> Option<VertexId> {
        self.tick
    }

    pub fn is_tick(&self, v: VertexId) -> bool {
        self.tick == Some(v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn vertex_set(&self) -> &BTreeSet<VertexId> {
        &self.vertices
    }

    /// Vertices other than the sink.
    pub fn proper_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices
            .iter()
            .copied()
            .filter(move |&v| !self.is_tick(v))
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> + '_ {
        self.transitions.iter()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn has_transition(&self, t: &Transition) -> bool {
        self.transitions.contains(t)
    }

    /// Outgoing transitions of `v` in canonical order.
    pub fn out(&self, v: VertexId) -> impl Iterator<Item = &Transition> + '_ {
        let lo = Transition::new(v, Action::bottom(), 0);
        self.transitions
            .range((Bound::Included(lo), Bound::Unbounded))
            .take_while(move |t| t.src == v)
    }

    pub fn label(&self, v: VertexId) -> Option<&StarExpr> {
        self.labels.get(&v)
    }

    pub fn set_label(&mut self, v: VertexId, e: StarExpr) {
        self.labels.insert(v, e);
    }

    pub fn max_vertex(&self) -> VertexId {
        *self.vertices.iter().next_back().unwrap_or(&0)
    }

    pub fn set_start(&mut self, v: VertexId) {
        self.vertices.insert(v);
        self.start = v;
    }

    pub fn add_vertex(&mut self, v: VertexId) {
        self.vertices.insert(v);
    }

    pub fn set_tick(&mut self, v: VertexId) {
        self.vertices.insert(v);
        self.tick = Some(v);
    }

    pub fn add_transition(&mut self, src: VertexId, action: Action, tgt: VertexId) -> bool {
        self.vertices.insert(src);
        self.vertices.insert(tgt);
        self.transitions.insert(Transition::new(src, action, tgt))
    }

    pub fn remove_transition(&mut self, t: &Transition) -> bool {
        self.transitions.remove(t)
    }

    /// Successor map of the underlying digraph.
    pub fn succ(&self) -> Succ {
        let mut s = Succ::new();
        for t in &self.transitions {
            let e = s.entry(t.src).or_default();
            if e.last() != Some(&t.tgt) && !e.contains(&t.tgt) {
                e.push(t.tgt);
            }
        }
        s
    }

    /// Vertices reachable from `v`, including `v`.
    pub fn reachable_from(&self, v: VertexId) -> BTreeSet<VertexId> {
        graph::reach(&self.succ(), [v])
    }

    /// True if the sink is reachable from `v`.
    pub fn is_normed(&self, v: VertexId) -> bool {
        match self.tick {
            Some(t) => self.reachable_from(v).contains(&t),
            None => false,
        }
    }

    /// Checks the chart invariants.
    pub fn validate(&self) -> Result<(), ChartError> {
        if self.tick == Some(self.start) {
            return Err(ChartError::StartIsTick);
        }
        if let Some(t) = self.tick {
            if self.out(t).next().is_some() {
                return Err(ChartError::SinkHasOutgoing { vertex: t });
            }
        }
        let reach = self.reachable_from(self.start);
        if let Some(&v) = self.vertices.iter().find(|v| !reach.contains(v)) {
            return Err(ChartError::Disconnected { vertex: v });
        }
        Ok(())
    }

    /// Restriction to the part reachable from the start vertex.
    pub fn garbage_collect(&self) -> Chart {
        let keep = self.reachable_from(self.start);
        Chart {
            start: self.start,
            tick: self.tick.filter(|t| keep.contains(t)),
            transitions: self
                .transitions
                .iter()
                .filter(|t| keep.contains(&t.src))
                .cloned()
                .collect(),
            labels: self
                .labels
                .iter()
                .filter(|(v, _)| keep.contains(v))
                .map(|(v, e)| (*v, e.clone()))
                .collect(),
            vertices: keep,
        }
    }

    /// The `<v,U>`-generated subchart: paths that leave `v` by a transition
    /// in `u`, then continue with arbitrary transitions until `v` is reached again.
    pub fn generated_subchart(&self, v: VertexId, u: &[Transition]) -> Result<Chart, ChartError> {
        for t in u {
            if t.src != v || !self.transitions.contains(t) {
                return Err(ChartError::Precondition(format!(
                    "transition {} -{}-> {} is not a transition from {}",
                    t.src, t.action, t.tgt, v
                )));
            }
        }
        let mut sub = Chart::new(v);
        let mut stack = Vec::new();
        for t in u {
            sub.add_transition(t.src, t.action.clone(), t.tgt);
            if t.tgt != v {
                stack.push(t.tgt);
            }
        }
        let mut seen = BTreeSet::new();
        while let Some(w) = stack.pop() {
            if !seen.insert(w) {
                continue;
            }
            for t in self.out(w) {
                sub.add_transition(t.src, t.action.clone(), t.tgt);
                if t.tgt != v && !seen.contains(&t.tgt) {
                    stack.push(t.tgt);
                }
            }
        }
        if let Some(t) = self.tick {
            if sub.vertices.contains(&t) {
                sub.tick = Some(t);
            }
        }
        for w in sub.vertices.clone() {
            if let Some(e) = self.labels.get(&w) {
                sub.labels.insert(w, e.clone());
            }
        }
        Ok(sub)
    }

    /// Strongly connected components, each sorted, ordered by least vertex.
    pub fn sccs(&self) -> Vec<Vec<VertexId>> {
        graph::sccs(&self.succ(), &self.vertices)
    }

    /// Map from vertex to the index of its component in `sccs()`.
    pub fn scc_index(&self) -> BTreeMap<VertexId, usize> {
        let mut m = BTreeMap::new();
        for (i, c) in self.sccs().into_iter().enumerate() {
            for v in c {
                m.insert(v, i);
            }
        }
        m
    }

    /// True if the chart has no cycle.
    pub fn is_acyclic(&self) -> bool {
        graph::find_cycle(&self.succ(), &self.vertices).is_none()
    }

    /// Renames vertices; `f` must be injective on the vertex set.
    pub fn rename(&self, f: impl Fn(VertexId) -> VertexId) -> Chart {
        Chart {
            start: f(self.start),
            tick: self.tick.map(&f),
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| Transition::new(f(t.src), t.action.clone(), f(t.tgt)))
                .collect(),
            labels: self
                .labels
                .iter()
                .map(|(&v, e)| (f(v), e.clone()))
                .collect(),
        }
    }

    /// The same chart without vertex labels.
    pub fn without_labels(&self) -> Chart {
        let mut c = self.clone();
        c.labels.clear();
        c
    }
}

/// A chart with a marking label on every transition: 0 is a body
/// transition, `n >= 1` a loop-entry transition of level `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledChart {
    chart: Chart,
    levels: BTreeMap<Transition, u32>,
}

impl LabeledChart {
    /// Pairs a chart with levels; transitions missing from `levels` become body transitions.
    pub fn new(chart: Chart, mut levels: BTreeMap<Transition, u32>) -> LabeledChart {
        levels.retain(|t, _| chart.has_transition(t));
        for t in chart.transitions() {
            levels.entry(t.clone()).or_insert(0);
        }
        LabeledChart { chart, levels }
    }

    /// All transitions marked as body.
    pub fn all_body(chart: Chart) -> LabeledChart {
        LabeledChart::new(chart, BTreeMap::new())
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn into_chart(self) -> Chart {
        self.chart
    }

    pub fn level(&self, t: &Transition) -> u32 {
        self.levels.get(t).copied().unwrap_or(0)
    }

    pub fn levels(&self) -> &BTreeMap<Transition, u32> {
        &self.levels
    }

    /// Outgoing transitions of `v` with their levels.
    pub fn out(&self, v: VertexId) -> impl Iterator<Item = (&Transition, u32)> + '_ {
        self.chart.out(v).map(move |t| (t, self.level(t)))
    }

    /// Loop-entry transitions with their levels.
    pub fn entries(&self) -> impl Iterator<Item = (&Transition, u32)> + '_ {
        self.levels
            .iter()
            .filter(|(_, &l)| l > 0)
            .map(|(t, &l)| (t, l))
    }

    /// Entry identifiers `<v, alpha>` in canonical order.
    pub fn entry_identifiers(&self) -> Vec<(VertexId, u32)> {
        let set: BTreeSet<(VertexId, u32)> = self.entries().map(|(t, l)| (t.src, l)).collect();
        set.into_iter().collect()
    }

    /// Successor map of body transitions.
    pub fn body_succ(&self) -> Succ {
        let mut s = Succ::new();
        for (t, &l) in &self.levels {
            if l == 0 {
                let e = s.entry(t.src).or_default();
                if !e.contains(&t.tgt) {
                    e.push(t.tgt);
                }
            }
        }
        s
    }

    /// Maximal entry level at `v`, or 0.
    pub fn max_entry_level(&self, v: VertexId) -> u32 {
        self.out(v).map(|(_, l)| l).max().unwrap_or(0)
    }

    pub fn set_level(&mut self, t: &Transition, level: u32) {
        if let Some(l) = self.levels.get_mut(t) {
            *l = level;
        }
    }

    /// Restriction to the part reachable from the start vertex.
    pub fn garbage_collect(&self) -> LabeledChart {
        LabeledChart::new(self.chart.garbage_collect(), self.levels.clone())
    }

    pub fn rename(&self, f: impl Fn(VertexId) -> VertexId) -> LabeledChart {
        let chart = self.chart.rename(&f);
        let levels = self
            .levels
            .iter()
            .map(|(t, &l)| (Transition::new(f(t.src), t.action.clone(), f(t.tgt)), l))
            .collect();
        LabeledChart { chart, levels }
    }

    /// Renumbers reachable vertices breadth-first in transition order, starting from 0.
    pub fn renumber(&self) -> LabeledChart {
        let gc = self.garbage_collect();
        let mut ids: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        let mut queue = std::collections::VecDeque::from([gc.chart.start()]);
        ids.insert(gc.chart.start(), 0);
        while let Some(v) = queue.pop_front() {
            for t in gc.chart.out(v) {
                if !ids.contains_key(&t.tgt) {
                    ids.insert(t.tgt, ids.len());
                    queue.push_back(t.tgt);
                }
            }
        }
        gc.rename(|v| ids[&v])
    }
}

struct RawLine {
    line: usize,
    src: String,
    action: Action,
    tgt: String,
    level: Option<u32>,
}

struct Raw {
    start: Option<String>,
    tick: Option<(String, usize)>,
    trans: Vec<RawLine>,
}

fn parse_raw(text: &str) -> Result<Raw, ChartError> {
    let mut raw = Raw {
        start: None,
        tick: None,
        trans: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let content = line.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        let err = |m: &str| ChartError::Parse {
            line: n,
            message: m.to_string(),
        };
        match words.as_slice() {
            [] => {}
            ["start", v] => {
                if raw.start.is_some() {
                    return Err(err("duplicate `start`"));
                }
                raw.start = Some(v.to_string());
            }
            ["tick", v] => {
                if raw.tick.is_some() {
                    return Err(err("duplicate `tick`"));
                }
                raw.tick = Some((v.to_string(), n));
            }
            ["trans", s, a, t, rest @ ..] => {
                let action = Action::new(a).map_err(|_| err("invalid action name"))?;
                let level = match rest {
                    [] => None,
                    [l] => Some(l.parse::<u32>().map_err(|_| err("invalid level"))?),
                    _ => return Err(err("too many fields")),
                };
                raw.trans.push(RawLine {
                    line: n,
                    src: s.to_string(),
                    action,
                    tgt: t.to_string(),
                    level,
                });
            }
            [kw, ..] => return Err(err(&format!("unknown or malformed declaration `{kw}`"))),
        }
    }
    Ok(raw)
}

fn build(raw: &Raw) -> Result<(Chart, BTreeMap<Transition, Option<u32>>), ChartError> {
    let start_name = raw.start.clone().ok_or(ChartError::MissingStart)?;
    let mut names: Vec<&str> = vec![&start_name];
    if let Some((t, _)) = &raw.tick {
        names.push(t);
    }
    for l in &raw.trans {
        names.push(&l.src);
        names.push(&l.tgt);
    }
    let mut ids: BTreeMap<String, VertexId> = BTreeMap::new();
    let mut used: BTreeSet<VertexId> = BTreeSet::new();
    for n in &names {
        if let Ok(k) = n.parse::<VertexId>() {
            ids.insert(n.to_string(), k);
            used.insert(k);
        }
    }
    let mut fresh = used.iter().next_back().map(|m| m + 1).unwrap_or(0);
    for n in &names {
        if !ids.contains_key(*n) {
            ids.insert(n.to_string(), fresh);
            fresh += 1;
        }
    }
    let mut chart = Chart::new(ids[&start_name]);
    if let Some((t, _)) = &raw.tick {
        chart.set_tick(ids[t]);
    }
    let mut levels = BTreeMap::new();
    for l in &raw.trans {
        let src = ids[&l.src];
        if chart.tick == Some(src) {
            return Err(ChartError::SinkOutgoing { line: l.line });
        }
        let t = Transition::new(src, l.action.clone(), ids[&l.tgt]);
        chart.add_transition(t.src, t.action.clone(), t.tgt);
        levels.insert(t, l.level);
    }
    chart.validate()?;
    Ok((chart, levels))
}

/// Reads a chart file. Level columns, if present, are ignored.
pub fn load_chart(text: &str) -> Result<Chart, ChartError> {
    Ok(build(&parse_raw(text)?)?.0)
}

/// Reads a labeled chart file; every `trans` line must carry a level.
pub fn load_labeled(text: &str) -> Result<LabeledChart, ChartError> {
    let raw = parse_raw(text)?;
    if let Some(l) = raw.trans.iter().find(|l| l.level.is_none()) {
        return Err(ChartError::MissingLevel { line: l.line });
    }
    let (chart, levels) = build(&raw)?;
    let levels = levels
        .into_iter()
        .map(|(t, l)| (t, l.unwrap_or(0)))
        .collect();
    Ok(LabeledChart::new(chart, levels))
}

fn save(chart: &Chart, levels: Option<&BTreeMap<Transition, u32>>) -> String {
    let mut out = String::new();
    for (v, e) in &chart.labels {
        let _ = writeln!(out, "# {v}: {}", format_expr(e));
    }
    let _ = writeln!(out, "start {}", chart.start);
    if let Some(t) = chart.tick {
        let _ = writeln!(out, "tick {t}");
    }
    for t in &chart.transitions {
        match levels {
            Some(ls) => {
                let _ = writeln!(
                    out,
                    "trans {} {} {} {}",
                    t.src,
                    t.action,
                    t.tgt,
                    ls.get(t).copied().unwrap_or(0)
                );
            }
            None => {
                let _ = writeln!(out, "trans {} {} {}", t.src, t.action, t.tgt);
            }
        }
    }
    out
}

pub fn save_chart(chart: &Chart) -> String {
    save(chart, None)
}

pub fn save_labeled(lc: &LabeledChart) -> String {
    save(&lc.chart, Some(&lc.levels))
}

fn dot(chart: &Chart, levels: Option<&BTreeMap<Transition, u32>>) -> String {
    let mut out = String::from("digraph chart {\n  node [shape=circle];\n");
    let _ = writeln!(out, "  init [shape=point];");
    for v in chart.vertices() {
        if chart.is_tick(v) {
            let _ = writeln!(out, "  v{v} [label=\"\u{221a}\", shape=doublecircle];");
        } else {
            let tip = chart
                .label(v)
                .map(|e| format!(", tooltip=\"{}\"", format_expr(e)))
                .unwrap_or_default();
            let _ = writeln!(out, "  v{v} [label=\"v{v}\"{tip}];");
        }
    }
    let _ = writeln!(out, "  init -> v{};", chart.start);
    for t in chart.transitions() {
        let level = levels.and_then(|ls| ls.get(t).copied()).unwrap_or(0);
        if level > 0 {
            let _ = writeln!(
                out,
                "  v{} -> v{} [label=\"{} [{}]\", style=bold];",
                t.src, t.tgt, t.action, level
            );
        } else {
            let _ = writeln!(out, "  v{} -> v{} [label=\"{}\"];", t.src, t.tgt, t.action);
        }
    }
    out.push_str("}\n");
    out
}

/// Graphviz rendering of a chart.
pub fn to_dot(chart: &Chart) -> String {
    dot(chart, None)
}

/// Graphviz rendering with entries drawn bold and annotated `[k]`.
pub fn labeled_to_dot(lc: &LabeledChart) -> String {
    dot(&lc.chart, Some(&lc.levels))
}
