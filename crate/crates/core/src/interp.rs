//! Chart interpretation of star expressions by iterated action derivatives,
//! and its entry/body-labelled refinement.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::chart::{Chart, LabeledChart, Transition, VertexId};
use crate::expr::{format_expr, star_height, Action, Node, StarExpr};

/// Target of a derivative: the sink or an expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Tick,
    Expr(StarExpr),
}

impl Target {
    fn print(&self) -> String {
        match self {
            Target::Tick => "\u{221a}".to_string(),
            Target::Expr(e) => format_expr(e),
        }
    }
}

/// A pair `<a, xi>` with `e -a-> xi`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Derivative {
    pub action: Action,
    pub target: Target,
}

fn canonical<T>(items: &mut [(Action, Target, T)]) {
    items.sort_by_cached_key(|(a, t, _)| (a.clone(), t.print()));
}

fn derivs(e: &StarExpr, out: &mut Vec<(Action, Target)>) {
    match e.node() {
        Node::Zero => {}
        Node::Act(a) => out.push((a.clone(), Target::Tick)),
        Node::Sum(f, g) => {
            derivs(f, out);
            derivs(g, out);
        }
        Node::Prod(f, g) => {
            let mut inner = Vec::new();
            derivs(f, &mut inner);
            for (a, t) in inner {
                match t {
                    Target::Tick => out.push((a, Target::Expr(g.clone()))),
                    Target::Expr(f1) => out.push((a, Target::Expr(StarExpr::prod(f1, g.clone())))),
                }
            }
        }
        Node::Star(f, g) => {
            let mut inner = Vec::new();
            derivs(f, &mut inner);
            for (a, t) in inner {
                match t {
                    Target::Tick => out.push((a, Target::Expr(e.clone()))),
                    Target::Expr(f1) => out.push((a, Target::Expr(StarExpr::prod(f1, e.clone())))),
                }
            }
            derivs(g, out);
        }
    }
}

/// The action derivatives of `e`, ordered by action name and then target print.
pub fn action_derivatives(e: &StarExpr) -> Vec<Derivative> {
    let mut raw = Vec::new();
    derivs(e, &mut raw);
    let mut items: Vec<(Action, Target, ())> = raw.into_iter().map(|(a, t)| (a, t, ())).collect();
    canonical(&mut items);
    items.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
    items
        .into_iter()
        .map(|(action, target, _)| Derivative { action, target })
        .collect()
}

/// Normedness by structural recursion.
pub fn normed_structural(e: &StarExpr) -> bool {
    match e.node() {
        Node::Zero => false,
        Node::Act(_) => true,
        Node::Sum(f, g) => normed_structural(f) || normed_structural(g),
        Node::Prod(f, g) => normed_structural(f) && normed_structural(g),
        Node::Star(_, g) => normed_structural(g),
    }
}

fn labeled(e: &StarExpr, out: &mut Vec<(Action, Target, u32)>) {
    match e.node() {
        Node::Zero => {}
        Node::Act(a) => out.push((a.clone(), Target::Tick, 0)),
        Node::Sum(f, g) => {
            let mut inner = Vec::new();
            labeled(f, &mut inner);
            labeled(g, &mut inner);
            out.extend(inner.into_iter().map(|(a, t, _)| (a, t, 0)));
        }
        Node::Prod(f, g) => {
            let mut inner = Vec::new();
            labeled(f, &mut inner);
            for (a, t, l) in inner {
                match t {
                    Target::Tick => out.push((a, Target::Expr(g.clone()), 0)),
                    Target::Expr(f1) => {
                        out.push((a, Target::Expr(StarExpr::prod(f1, g.clone())), l))
                    }
                }
            }
        }
        Node::Star(f, g) => {
            let level = star_height(f) as u32 + 1;
            let normed = normed_structural(f);
            let mut inner = Vec::new();
            labeled(f, &mut inner);
            for (a, t, _) in inner {
                match t {
                    Target::Tick => out.push((a, Target::Expr(e.clone()), level)),
                    Target::Expr(f1) => out.push((
                        a,
                        Target::Expr(StarExpr::prod(f1, e.clone())),
                        if normed { level } else { 0 },
                    )),
                }
            }
            let mut inner = Vec::new();
            labeled(g, &mut inner);
            out.extend(inner.into_iter().map(|(a, t, _)| (a, t, 0)));
        }
    }
}

/// Labelled derivatives `(a, xi, level)`; level 0 marks a body transition.
/// Should one transition be derivable with two labels, the larger level is kept.
pub fn labeled_derivatives(e: &StarExpr) -> Vec<(Action, Target, u32)> {
    let mut raw = Vec::new();
    labeled(e, &mut raw);
    let mut best: HashMap<(Action, Target), u32> = HashMap::new();
    for (a, t, l) in raw {
        let slot = best.entry((a, t)).or_insert(l);
        *slot = (*slot).max(l);
    }
    let mut items: Vec<(Action, Target, u32)> =
        best.into_iter().map(|((a, t), l)| (a, t, l)).collect();
    canonical(&mut items);
    items
}

fn explore(
    e: &StarExpr,
    step: impl Fn(&StarExpr) -> Vec<(Action, Target, u32)>,
) -> (
    Chart,
    HashMap<StarExpr, VertexId>,
    BTreeMap<Transition, u32>,
) {
    let mut ids: HashMap<StarExpr, VertexId> = HashMap::new();
    let mut chart = Chart::new(0);
    chart.set_label(0, e.clone());
    ids.insert(e.clone(), 0);
    let mut next = 1;
    let mut tick: Option<VertexId> = None;
    let mut levels = BTreeMap::new();
    let mut queue = VecDeque::from([(e.clone(), 0)]);
    while let Some((f, v)) = queue.pop_front() {
        for (a, t, l) in step(&f) {
            let w = match t {
                Target::Tick => *tick.get_or_insert_with(|| {
                    next += 1;
                    next - 1
                }),
                Target::Expr(g) => match ids.get(&g) {
                    Some(&w) => w,
                    None => {
                        let w = next;
                        next += 1;
                        ids.insert(g.clone(), w);
                        chart.add_vertex(w);
                        chart.set_label(w, g.clone());
                        queue.push_back((g, w));
                        w
                    }
                },
            };
            chart.add_transition(v, a.clone(), w);
            levels.insert(Transition::new(v, a, w), l);
        }
    }
    if let Some(t) = tick {
        chart.set_tick(t);
    }
    (chart, ids, levels)
}

/// The chart interpretation `C(e)` and the map from iterated derivatives to vertices.
pub fn interpret(e: &StarExpr) -> (Chart, HashMap<StarExpr, VertexId>) {
    let (chart, ids, _) = explore(e, |f| {
        action_derivatives(f)
            .into_iter()
            .map(|d| (d.action, d.target, 0))
            .collect()
    });
    (chart, ids)
}

/// True iff the sink is reachable in `C(e)`.
pub fn is_normed(e: &StarExpr) -> bool {
    let (c, _) = interpret(e);
    c.is_normed(c.start())
}

/// The entry/body labelling of `C(e)`.
pub fn interpret_labeled(e: &StarExpr) -> LabeledChart {
    let (chart, _, levels) = explore(e, labeled_derivatives);
    LabeledChart::new(chart, levels)
}
