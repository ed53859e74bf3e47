//! Bisimulations between charts: partition refinement, verification,
//! quotients and isomorphism tests.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::chart::{Chart, LabeledChart, Transition, VertexId};
use crate::expr::Action;

/// A relation between the vertices of two charts.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Bisimulation {
    pub pairs: BTreeSet<(VertexId, VertexId)>,
}

impl Bisimulation {
    /// The converse relation.
    pub fn converse(&self) -> Bisimulation {
        Bisimulation {
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }

    /// Image of `v`, when the relation is functional at `v`.
    pub fn image(&self, v: VertexId) -> Option<VertexId> {
        let mut it = self
            .pairs
            .range((v, 0)..=(v, VertexId::MAX))
            .map(|&(_, w)| w);
        let first = it.next()?;
        match it.next() {
            None => Some(first),
            Some(_) => None,
        }
    }

    /// The relation as a map, if it is functional.
    pub fn as_map(&self) -> Option<BTreeMap<VertexId, VertexId>> {
        let mut m = BTreeMap::new();
        for &(a, b) in &self.pairs {
            if m.insert(a, b).is_some() {
                return None;
            }
        }
        Some(m)
    }

    pub fn from_map(m: &BTreeMap<VertexId, VertexId>) -> Bisimulation {
        Bisimulation {
            pairs: m.iter().map(|(&a, &b)| (a, b)).collect(),
        }
    }
}

struct Indexed {
    tick: Vec<bool>,
    out: Vec<Vec<(Action, usize)>>,
}

fn index(charts: &[&Chart]) -> (Indexed, Vec<BTreeMap<VertexId, usize>>) {
    let mut maps = Vec::new();
    let mut tick = Vec::new();
    for c in charts {
        let mut m = BTreeMap::new();
        for v in c.vertices() {
            m.insert(v, tick.len());
            tick.push(c.is_tick(v));
        }
        maps.push(m);
    }
    let mut out = vec![Vec::new(); tick.len()];
    for (c, m) in charts.iter().zip(&maps) {
        for t in c.transitions() {
            out[m[&t.src]].push((t.action.clone(), m[&t.tgt]));
        }
    }
    (Indexed { tick, out }, maps)
}

/// Coarsest stable partition: block number per node.
fn refine(g: &Indexed) -> Vec<usize> {
    let mut block: Vec<usize> = g.tick.iter().map(|&t| if t { 0 } else { 1 }).collect();
    let mut count = block.iter().collect::<BTreeSet<_>>().len();
    loop {
        let mut sigs: HashMap<(usize, Vec<(Action, usize)>), usize> = HashMap::new();
        let mut next = vec![0; block.len()];
        for v in 0..block.len() {
            let mut sig: Vec<(Action, usize)> = g.out[v]
                .iter()
                .map(|(a, w)| (a.clone(), block[*w]))
                .collect();
            sig.sort();
            sig.dedup();
            let n = sigs.len();
            next[v] = *sigs.entry((block[v], sig)).or_insert(n);
        }
        let new_count = sigs.len();
        block = next;
        if new_count == count {
            return block;
        }
        count = new_count;
    }
}

/// The largest bisimulation between `c1` and `c2`, if it relates the start vertices.
pub fn largest_bisimulation(c1: &Chart, c2: &Chart) -> Option<Bisimulation> {
    let (g, maps) = index(&[c1, c2]);
    let block = refine(&g);
    if block[maps[0][&c1.start()]] != block[maps[1][&c2.start()]] {
        return None;
    }
    let mut by_block: BTreeMap<usize, Vec<VertexId>> = BTreeMap::new();
    for (&v, &i) in &maps[1] {
        by_block.entry(block[i]).or_default().push(v);
    }
    let mut pairs = BTreeSet::new();
    for (&v, &i) in &maps[0] {
        for &w in by_block.get(&block[i]).map(|x| x.as_slice()).unwrap_or(&[]) {
            pairs.insert((v, w));
        }
    }
    Some(Bisimulation { pairs })
}

pub fn bisimilar(c1: &Chart, c2: &Chart) -> bool {
    largest_bisimulation(c1, c2).is_some()
}

/// Checks the start, forth, back and termination clauses.
pub fn verify_bisimulation(c1: &Chart, c2: &Chart, b: &Bisimulation) -> bool {
    if !b.pairs.contains(&(c1.start(), c2.start())) {
        return false;
    }
    for &(v1, v2) in &b.pairs {
        if !c1.contains(v1) || !c2.contains(v2) {
            return false;
        }
        if c1.is_tick(v1) != c2.is_tick(v2) {
            return false;
        }
        for t in c1.out(v1) {
            if !c2
                .out(v2)
                .any(|u| u.action == t.action && b.pairs.contains(&(t.tgt, u.tgt)))
            {
                return false;
            }
        }
        for u in c2.out(v2) {
            if !c1
                .out(v1)
                .any(|t| t.action == u.action && b.pairs.contains(&(t.tgt, u.tgt)))
            {
                return false;
            }
        }
    }
    true
}

/// True iff every vertex of `c1` is related to exactly one vertex of `c2`.
pub fn is_functional(b: &Bisimulation, c1: &Chart, c2: &Chart) -> bool {
    c1.vertices().all(|v| {
        let images: Vec<_> = b
            .pairs
            .range((v, 0)..=(v, VertexId::MAX))
            .filter(|(_, w)| c2.contains(*w))
            .collect();
        images.len() == 1
    }) && b.pairs.iter().all(|(v, _)| c1.contains(*v))
}

/// Bisimilarity classes of one chart, as a map to the least member of the class.
pub fn self_classes(c: &Chart) -> BTreeMap<VertexId, VertexId> {
    let (g, maps) = index(&[c]);
    let block = refine(&g);
    let mut rep: BTreeMap<usize, VertexId> = BTreeMap::new();
    for (&v, &i) in &maps[0] {
        rep.entry(block[i]).or_insert(v);
    }
    maps[0].iter().map(|(&v, &i)| (v, rep[&block[i]])).collect()
}

/// Quotient by the largest self-bisimulation. Each class is represented by its least vertex.
pub fn quotient_collapse(c: &Chart) -> (Chart, BTreeMap<VertexId, VertexId>) {
    let rep = self_classes(c);
    let mut q = Chart::new(rep[&c.start()]);
    for v in c.vertices() {
        q.add_vertex(rep[&v]);
    }
    if let Some(t) = c.tick() {
        q.set_tick(rep[&t]);
    }
    for t in c.transitions() {
        q.add_transition(rep[&t.src], t.action.clone(), rep[&t.tgt]);
    }
    for v in q.vertices().collect::<Vec<_>>() {
        if let Some(e) = c.label(v) {
            q.set_label(v, e.clone());
        }
    }
    (q.garbage_collect(), rep)
}

/// True iff no two distinct vertices are bisimilar.
pub fn is_collapsed(c: &Chart) -> bool {
    self_classes(c).iter().all(|(v, r)| v == r)
}

type LevelOf<'a> = &'a dyn Fn(&Transition) -> u32;

fn iso_search(
    c1: &Chart,
    c2: &Chart,
    lv1: LevelOf,
    lv2: LevelOf,
) -> Option<BTreeMap<VertexId, VertexId>> {
    if c1.num_vertices() != c2.num_vertices()
        || c1.num_transitions() != c2.num_transitions()
        || c1.tick().is_some() != c2.tick().is_some()
    {
        return None;
    }
    let sig = |c: &Chart, lv: LevelOf, v: VertexId| {
        let mut outs: Vec<(Action, u32)> = c.out(v).map(|t| (t.action.clone(), lv(t))).collect();
        outs.sort();
        let indeg = c.transitions().filter(|t| t.tgt == v).count();
        (c.is_tick(v), indeg, outs)
    };
    // BFS order with parents
    let mut order = Vec::new();
    let mut parent: BTreeMap<VertexId, (VertexId, Action)> = BTreeMap::new();
    let mut seen = BTreeSet::from([c1.start()]);
    let mut queue = VecDeque::from([c1.start()]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for t in c1.out(v) {
            if seen.insert(t.tgt) {
                parent.insert(t.tgt, (v, t.action.clone()));
                queue.push_back(t.tgt);
            }
        }
    }
    if order.len() != c1.num_vertices() {
        return None;
    }
    let sig1: BTreeMap<_, _> = c1.vertices().map(|v| (v, sig(c1, lv1, v))).collect();
    let sig2: BTreeMap<_, _> = c2.vertices().map(|v| (v, sig(c2, lv2, v))).collect();

    type Signature = (bool, usize, Vec<(Action, u32)>);

    struct Ctx<'a> {
        c1: &'a Chart,
        c2: &'a Chart,
        lv1: LevelOf<'a>,
        lv2: LevelOf<'a>,
        order: Vec<VertexId>,
        parent: BTreeMap<VertexId, (VertexId, Action)>,
        sig1: BTreeMap<VertexId, Signature>,
        sig2: BTreeMap<VertexId, Signature>,
    }

    fn consistent(ctx: &Ctx, map: &BTreeMap<VertexId, VertexId>, v: VertexId, w: VertexId) -> bool {
        let img = |x: VertexId| {
            if x == v {
                Some(w)
            } else {
                map.get(&x).copied()
            }
        };
        for t in ctx.c1.out(v) {
            if let Some(y) = img(t.tgt) {
                let u = Transition::new(w, t.action.clone(), y);
                if !ctx.c2.has_transition(&u) || (ctx.lv2)(&u) != (ctx.lv1)(t) {
                    return false;
                }
            }
        }
        for t in ctx.c1.transitions().filter(|t| t.tgt == v && t.src != v) {
            if let Some(x) = map.get(&t.src) {
                let u = Transition::new(*x, t.action.clone(), w);
                if !ctx.c2.has_transition(&u) || (ctx.lv2)(&u) != (ctx.lv1)(t) {
                    return false;
                }
            }
        }
        true
    }

    fn go(
        ctx: &Ctx,
        i: usize,
        map: &mut BTreeMap<VertexId, VertexId>,
        used: &mut BTreeSet<VertexId>,
    ) -> bool {
        if i == ctx.order.len() {
            return true;
        }
        let v = ctx.order[i];
        let cands: Vec<VertexId> = match ctx.parent.get(&v) {
            None => vec![ctx.c2.start()],
            Some((p, a)) => {
                let pw = map[p];
                ctx.c2
                    .out(pw)
                    .filter(|t| &t.action == a)
                    .map(|t| t.tgt)
                    .collect()
            }
        };
        for w in cands {
            if used.contains(&w) || ctx.sig1[&v] != ctx.sig2[&w] {
                continue;
            }
            if !consistent(ctx, map, v, w) {
                continue;
            }
            map.insert(v, w);
            used.insert(w);
            if go(ctx, i + 1, map, used) {
                return true;
            }
            map.remove(&v);
            used.remove(&w);
        }
        false
    }

    let ctx = Ctx {
        c1,
        c2,
        lv1,
        lv2,
        order,
        parent,
        sig1,
        sig2,
    };
    let mut map = BTreeMap::new();
    let mut used = BTreeSet::new();
    if go(&ctx, 0, &mut map, &mut used) {
        Some(map)
    } else {
        None
    }
}

/// A start-, sink- and action-preserving isomorphism from `c1` onto `c2`.
pub fn isomorphic(c1: &Chart, c2: &Chart) -> Option<BTreeMap<VertexId, VertexId>> {
    iso_search(c1, c2, &|_| 0, &|_| 0)
}

/// Isomorphism that also preserves marking labels.
pub fn isomorphic_labeled(
    a: &LabeledChart,
    b: &LabeledChart,
) -> Option<BTreeMap<VertexId, VertexId>> {
    iso_search(a.chart(), b.chart(), &|t| a.level(t), &|t| b.level(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::interp::interpret;

    fn chart(s: &str) -> Chart {
        interpret(&parse_expr(s).unwrap()).0
    }

    #[test]
    fn distinct_actions() {
        assert!(largest_bisimulation(&chart("a"), &chart("b")).is_none());
        let c = chart("a.b + a.c");
        let b = largest_bisimulation(&c, &c).unwrap();
        for v in c.vertices() {
            assert!(b.pairs.contains(&(v, v)));
        }
        assert!(verify_bisimulation(&c, &c, &b));
        assert!(!verify_bisimulation(&c, &c, &Bisimulation::default()));
    }

    #[test]
    fn functional() {
        let c = chart("a + a");
        let id = largest_bisimulation(&c, &c).unwrap();
        assert!(is_functional(&id, &c, &c));
        let two = Bisimulation {
            pairs: BTreeSet::from([(0, 0), (0, 1)]),
        };
        assert!(!is_functional(&two, &c, &c));
    }

    #[test]
    fn iso_renamed() {
        let c = chart("a.((c.a + a.(b + b.a)) * 0)");
        let r = c.rename(|v| 10 - v);
        let m = isomorphic(&c, &r).unwrap();
        assert_eq!(m[&0], 10);
        assert!(isomorphic(&c, &chart("(a.((a.(b + b.a)) * c)) * 0")).is_none());
    }
}
