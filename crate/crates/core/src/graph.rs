//! Small digraph routines over explicit successor maps.

use std::collections::{BTreeMap, BTreeSet};

use crate::chart::VertexId;

pub type Succ = BTreeMap<VertexId, Vec<VertexId>>;

fn next(succ: &Succ, v: VertexId) -> &[VertexId] {
    succ.get(&v).map(|s| s.as_slice()).unwrap_or(&[])
}

/// Vertices reachable from the roots (roots included).
pub fn reach(succ: &Succ, roots: impl IntoIterator<Item = VertexId>) -> BTreeSet<VertexId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<VertexId> = roots.into_iter().collect();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend(next(succ, v).iter().copied());
        }
    }
    seen
}

/// A cycle among `within` if one exists, as a vertex list.
pub fn find_cycle(succ: &Succ, within: &BTreeSet<VertexId>) -> Option<Vec<VertexId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut mark: BTreeMap<VertexId, Mark> = BTreeMap::new();
    for &root in within {
        if mark.contains_key(&root) {
            continue;
        }
        let mut path: Vec<VertexId> = vec![root];
        let mut iters: Vec<usize> = vec![0];
        mark.insert(root, Mark::Open);
        while let Some(&v) = path.last() {
            let i = *iters.last().unwrap();
            let ns: Vec<VertexId> = next(succ, v)
                .iter()
                .copied()
                .filter(|w| within.contains(w))
                .collect();
            if i < ns.len() {
                *iters.last_mut().unwrap() += 1;
                let w = ns[i];
                match mark.get(&w) {
                    Some(Mark::Open) => {
                        let pos = path.iter().position(|&x| x == w).unwrap();
                        return Some(path[pos..].to_vec());
                    }
                    Some(Mark::Done) => {}
                    None => {
                        mark.insert(w, Mark::Open);
                        path.push(w);
                        iters.push(0);
                    }
                }
            } else {
                mark.insert(v, Mark::Done);
                path.pop();
                iters.pop();
            }
        }
    }
    None
}

/// Length of the longest path from each vertex. The graph must be acyclic.
pub fn longest_paths(succ: &Succ, vertices: &BTreeSet<VertexId>) -> BTreeMap<VertexId, usize> {
    let mut memo: BTreeMap<VertexId, usize> = BTreeMap::new();
    for &root in vertices {
        if memo.contains_key(&root) {
            continue;
        }
        let mut stack = vec![(root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if memo.contains_key(&v) {
                continue;
            }
            if expanded {
                let best = next(succ, v)
                    .iter()
                    .filter(|w| vertices.contains(w))
                    .map(|w| memo[w] + 1)
                    .max()
                    .unwrap_or(0);
                memo.insert(v, best);
            } else {
                stack.push((v, true));
                for &w in next(succ, v) {
                    if vertices.contains(&w) && !memo.contains_key(&w) {
                        stack.push((w, false));
                    }
                }
            }
        }
    }
    memo
}

/// Strongly connected components (Tarjan), each sorted, in order of their least vertex.
pub fn sccs(succ: &Succ, vertices: &BTreeSet<VertexId>) -> Vec<Vec<VertexId>> {
    struct State<'a> {
        succ: &'a Succ,
        index: BTreeMap<VertexId, usize>,
        low: BTreeMap<VertexId, usize>,
        on_stack: BTreeSet<VertexId>,
        stack: Vec<VertexId>,
        counter: usize,
        out: Vec<Vec<VertexId>>,
    }
    fn visit(st: &mut State, v: VertexId) {
        st.index.insert(v, st.counter);
        st.low.insert(v, st.counter);
        st.counter += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        for &w in next(st.succ, v) {
            if !st.index.contains_key(&w) {
                visit(st, w);
                let lw = st.low[&w];
                let lv = st.low.get_mut(&v).unwrap();
                *lv = (*lv).min(lw);
            } else if st.on_stack.contains(&w) {
                let iw = st.index[&w];
                let lv = st.low.get_mut(&v).unwrap();
                *lv = (*lv).min(iw);
            }
        }
        if st.low[&v] == st.index[&v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().unwrap();
                st.on_stack.remove(&w);
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.out.push(comp);
        }
    }
    let mut st = State {
        succ,
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        counter: 0,
        out: Vec::new(),
    };
    for &v in vertices {
        if !st.index.contains_key(&v) {
            visit(&mut st, v);
        }
    }
    st.out.sort();
    st.out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &[(usize, usize)]) -> (Succ, BTreeSet<usize>) {
        let mut s = Succ::new();
        let mut vs = BTreeSet::new();
        for &(a, b) in edges {
            s.entry(a).or_default().push(b);
            vs.insert(a);
            vs.insert(b);
        }
        (s, vs)
    }

    #[test]
    fn cycles_and_paths() {
        let (s, vs) = g(&[(0, 1), (1, 2), (0, 2)]);
        assert!(find_cycle(&s, &vs).is_none());
        let lp = longest_paths(&s, &vs);
        assert_eq!(lp[&0], 2);
        assert_eq!(lp[&2], 0);
        let (s, vs) = g(&[(0, 1), (1, 2), (2, 1)]);
        let c = find_cycle(&s, &vs).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn components() {
        let (s, vs) = g(&[(0, 1), (1, 0), (1, 2), (2, 3), (3, 2)]);
        assert_eq!(sccs(&s, &vs), vec![vec![0, 1], vec![2, 3]]);
    }
}
