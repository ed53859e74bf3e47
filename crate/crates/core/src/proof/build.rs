//! Derivations as shared trees, linearised into certificates on demand.

use std::collections::HashMap;
use std::sync::Arc;

use super::{
    replace_at, subterm, Axiom, Certificate, Equation, Justification, ProofStep, Side, Subst,
};
use crate::expr::{Node, StarExpr};

#[derive(Debug)]
enum Rule {
    Axiom(Axiom, Vec<StarExpr>),
    Refl,
    Symm(Proof),
    Trans(Proof, Proof),
    Cong(Vec<Side>, Proof),
    Rsp(Proof),
}

#[derive(Debug)]
struct ProofNode {
    eq: Equation,
    rule: Rule,
}

/// A derivation of one equation. Cloning is cheap and shares subproofs.
#[derive(Clone, Debug)]
pub struct Proof(Arc<ProofNode>);

impl Proof {
    fn make(eq: Equation, rule: Rule) -> Proof {
        Proof(Arc::new(ProofNode { eq, rule }))
    }

    pub fn eq(&self) -> &Equation {
        &self.0.eq
    }

    pub fn lhs(&self) -> &StarExpr {
        &self.0.eq.lhs
    }

    pub fn rhs(&self) -> &StarExpr {
        &self.0.eq.rhs
    }

    pub fn is_refl(&self) -> bool {
        matches!(self.0.rule, Rule::Refl)
    }

    pub fn refl(e: StarExpr) -> Proof {
        Proof::make(Equation::new(e.clone(), e), Rule::Refl)
    }

    /// An axiom instance; `args` in the order of the schema variables.
    pub fn axiom(ax: Axiom, args: &[StarExpr]) -> Proof {
        let eq = ax.instance(args).expect("axiom arity");
        Proof::make(eq, Rule::Axiom(ax, args.to_vec()))
    }

    pub fn symm(&self) -> Proof {
        match &self.0.rule {
            Rule::Refl => self.clone(),
            Rule::Symm(p) => p.clone(),
            _ => Proof::make(
                Equation::new(self.rhs().clone(), self.lhs().clone()),
                Rule::Symm(self.clone()),
            ),
        }
    }

    pub fn trans(&self, next: &Proof) -> Proof {
        assert_eq!(self.rhs(), next.lhs(), "proofs do not chain");
        if self.is_refl() {
            return next.clone();
        }
        if next.is_refl() {
            return self.clone();
        }
        Proof::make(
            Equation::new(self.lhs().clone(), next.rhs().clone()),
            Rule::Trans(self.clone(), next.clone()),
        )
    }

    /// Lifts `p` into `whole`, whose subterm at `path` must be `p`'s left-hand side.
    pub fn cong(whole: &StarExpr, path: &[Side], p: &Proof) -> Proof {
        assert_eq!(subterm(whole, path), Some(p.lhs()), "hole mismatch");
        if p.is_refl() {
            return Proof::refl(whole.clone());
        }
        if path.is_empty() {
            return p.clone();
        }
        let rhs = replace_at(whole, path, p.rhs().clone()).expect("path checked");
        let (path, inner) = match &p.0.rule {
            Rule::Cong(sub, q) => ([path, sub.as_slice()].concat(), q.clone()),
            _ => (path.to_vec(), p.clone()),
        };
        Proof::make(Equation::new(whole.clone(), rhs), Rule::Cong(path, inner))
    }

    /// From `l1 = r1` and `l2 = r2`, the equation between the two binary terms
    /// built like `shape` from the sides.
    pub fn binary(shape: &StarExpr, left: &Proof, right: &Proof) -> Proof {
        let start = shape.with_children(left.lhs().clone(), right.lhs().clone());
        let a = Proof::cong(&start, &[Side::L], left);
        let b = Proof::cong(a.rhs(), &[Side::R], right);
        a.trans(&b)
    }

    pub fn then(&self, step: impl FnOnce(&StarExpr) -> Proof) -> Proof {
        let next = step(self.rhs());
        self.trans(&next)
    }

    /// From `e = f.e + g`, derives `e = f * g`.
    pub fn rsp(&self) -> Proof {
        let (f, g) = match self.rhs().node() {
            Node::Sum(fe, g) => match fe.node() {
                Node::Prod(f, e) if e == self.lhs() => (f.clone(), g.clone()),
                _ => panic!("RSP premise shape"),
            },
            _ => panic!("RSP premise shape"),
        };
        Proof::make(
            Equation::new(self.lhs().clone(), StarExpr::star(f, g)),
            Rule::Rsp(self.clone()),
        )
    }

    pub fn count_rsp(&self) -> usize {
        self.to_certificate().count_rsp()
    }

    /// Post-order linearisation; shared subproofs and repeated equations appear once.
    pub fn to_certificate(&self) -> Certificate {
        let mut steps: Vec<ProofStep> = Vec::new();
        let mut by_ptr: HashMap<*const ProofNode, usize> = HashMap::new();
        let mut by_eq: HashMap<Equation, usize> = HashMap::new();
        let mut stack: Vec<(Proof, bool)> = vec![(self.clone(), false)];
        while let Some((p, expanded)) = stack.pop() {
            let key = Arc::as_ptr(&p.0);
            if by_ptr.contains_key(&key) {
                continue;
            }
            if let Some(&i) = by_eq.get(p.eq()) {
                by_ptr.insert(key, i);
                continue;
            }
            let kids: Vec<&Proof> = match &p.0.rule {
                Rule::Axiom(..) | Rule::Refl => vec![],
                Rule::Symm(a) | Rule::Cong(_, a) | Rule::Rsp(a) => vec![a],
                Rule::Trans(a, b) => vec![a, b],
            };
            if !expanded {
                stack.push((p.clone(), true));
                for k in kids.into_iter().rev() {
                    stack.push((k.clone(), false));
                }
                continue;
            }
            let idx = |q: &Proof| by_ptr[&Arc::as_ptr(&q.0)];
            let just = match &p.0.rule {
                Rule::Axiom(ax, args) => {
                    let subst: Subst = ax
                        .vars()
                        .iter()
                        .map(|v| v.to_string())
                        .zip(args.iter().cloned())
                        .collect();
                    Justification::Axiom(*ax, subst)
                }
                Rule::Refl => Justification::Refl,
                Rule::Symm(a) => Justification::Symm(idx(a)),
                Rule::Trans(a, b) => Justification::Trans(idx(a), idx(b)),
                Rule::Cong(path, a) => Justification::Cong(path.clone(), idx(a)),
                Rule::Rsp(a) => Justification::Rsp(idx(a)),
            };
            let i = steps.len();
            steps.push(ProofStep {
                eq: p.eq().clone(),
                just,
            });
            by_ptr.insert(key, i);
            by_eq.insert(p.eq().clone(), i);
        }
        if steps.last().map(|s| &s.eq) != Some(self.eq()) {
            // the goal equation was proved earlier under another node
            let i = by_eq[self.eq()];
            let e = self.lhs().clone();
            steps.push(ProofStep {
                eq: Equation::new(e.clone(), e.clone()),
                just: Justification::Refl,
            });
            let r = steps.len() - 1;
            steps.push(ProofStep {
                eq: self.eq().clone(),
                just: Justification::Trans(r, i),
            });
        }
        Certificate {
            steps,
            goal: self.eq().clone(),
        }
    }
}

fn head_tail(e: &StarExpr) -> (StarExpr, Option<StarExpr>) {
    match e.node() {
        Node::Sum(h, t) => (h.clone(), Some(t.clone())),
        _ => (e.clone(), None),
    }
}

/// `a + m = m'` with `m` canonical and `m'` the canonical form of `{a} ∪ m`.
fn insert(a: &StarExpr, m: &StarExpr) -> Proof {
    let here = StarExpr::sum(a.clone(), m.clone());
    if m.is_zero() {
        return Proof::axiom(Axiom::B6, std::slice::from_ref(a));
    }
    let (h, tail) = head_tail(m);
    match tail {
        None => {
            if a == &h {
                Proof::axiom(Axiom::B3, std::slice::from_ref(a))
            } else if a < &h {
                Proof::refl(here)
            } else {
                Proof::axiom(Axiom::B1, &[a.clone(), h])
            }
        }
        Some(t) => {
            if a == &h {
                let p = Proof::axiom(Axiom::B2, &[a.clone(), a.clone(), t.clone()]).symm();
                let b3 = Proof::axiom(Axiom::B3, std::slice::from_ref(a));
                p.then(|e| Proof::cong(e, &[Side::L], &b3))
            } else if a < &h {
                Proof::refl(here)
            } else {
                let p = Proof::axiom(Axiom::B2, &[a.clone(), h.clone(), t.clone()]).symm();
                let b1 = Proof::axiom(Axiom::B1, &[a.clone(), h.clone()]);
                p.then(|e| Proof::cong(e, &[Side::L], &b1))
                    .then(|_| Proof::axiom(Axiom::B2, &[h.clone(), a.clone(), t.clone()]))
                    .then(|e| Proof::cong(e, &[Side::R], &insert(a, &t)))
            }
        }
    }
}

/// `a + b = c` for canonical `a`, `b` and the canonical union `c`.
fn merge(a: &StarExpr, b: &StarExpr) -> Proof {
    if a.is_zero() {
        let p = Proof::axiom(Axiom::B1, &[a.clone(), b.clone()]);
        return p.then(|_| Proof::axiom(Axiom::B6, std::slice::from_ref(b)));
    }
    if b.is_zero() {
        return Proof::axiom(Axiom::B6, std::slice::from_ref(a));
    }
    let (h, tail) = head_tail(a);
    match tail {
        None => insert(&h, b),
        Some(t) => {
            let p = Proof::axiom(Axiom::B2, &[h.clone(), t.clone(), b.clone()]);
            p.then(|e| Proof::cong(e, &[Side::R], &merge(&t, b)))
                .then(|e| {
                    let (_, m) = head_tail(e);
                    insert(&h, &m.expect("sum"))
                })
        }
    }
}

/// Normalises `e` as a sum: `e = n` where `n` lists the distinct non-zero
/// summands of `e` in ascending order, nested to the right (`0` if none).
pub fn norm_sum(e: &StarExpr) -> Proof {
    match e.node() {
        Node::Sum(l, r) => {
            let both = Proof::binary(e, &norm_sum(l), &norm_sum(r));
            let (a, b) = match both.rhs().node() {
                Node::Sum(a, b) => (a.clone(), b.clone()),
                _ => unreachable!(),
            };
            both.trans(&merge(&a, &b))
        }
        _ => Proof::refl(e.clone()),
    }
}

/// A derivation of `l = r` when both have the same set of summands.
pub fn prove_aci_eq(l: &StarExpr, r: &StarExpr) -> Option<Proof> {
    if l == r {
        return Some(Proof::refl(l.clone()));
    }
    let (pl, pr) = (norm_sum(l), norm_sum(r));
    (pl.rhs() == pr.rhs()).then(|| pl.trans(&pr.symm()))
}

pub(crate) fn aci(l: &StarExpr, r: &StarExpr) -> Proof {
    prove_aci_eq(l, r).unwrap_or_else(|| panic!("no ACI match:\n  {l}\n  {r}"))
}

/// `s.z = d` distributing `z` over the summands of `s`; product summands
/// `b.u` become `b.(u.z)` and zero summands become `0`.
pub fn dist(s: &StarExpr, z: &StarExpr) -> Proof {
    match s.node() {
        Node::Zero => Proof::axiom(Axiom::B7, std::slice::from_ref(z)),
        Node::Sum(l, r) => {
            let b4 = Proof::axiom(Axiom::B4, &[l.clone(), r.clone(), z.clone()]);
            let shape = b4.rhs().clone();
            b4.trans(&Proof::binary(&shape, &dist(l, z), &dist(r, z)))
        }
        Node::Prod(b, u) => Proof::axiom(Axiom::B5, &[b.clone(), u.clone(), z.clone()]),
        _ => Proof::refl(StarExpr::prod(s.clone(), z.clone())),
    }
}

/// Rewrites the summands of the sum tree `e` one by one, in left-to-right order.
pub fn map_summands(e: &StarExpr, f: &mut dyn FnMut(usize, &StarExpr) -> Proof) -> Proof {
    fn go(e: &StarExpr, i: &mut usize, f: &mut dyn FnMut(usize, &StarExpr) -> Proof) -> Proof {
        match e.node() {
            Node::Sum(l, r) => {
                let pl = go(l, i, f);
                let pr = go(r, i, f);
                Proof::binary(e, &pl, &pr)
            }
            _ => {
                let k = *i;
                *i += 1;
                f(k, e)
            }
        }
    }
    let mut i = 0;
    go(e, &mut i, f)
}

/// `0 * x = x`.
pub fn zero_star(x: &StarExpr) -> Proof {
    let zero = StarExpr::zero();
    let unfold = Proof::axiom(Axiom::Bks1, &[zero.clone(), x.clone()]).symm();
    let b7 = Proof::axiom(Axiom::B7, &[StarExpr::star(zero.clone(), x.clone())]);
    unfold
        .then(|e| Proof::cong(e, &[Side::L], &b7))
        .then(|_| Proof::axiom(Axiom::B1, &[zero.clone(), x.clone()]))
        .then(|_| Proof::axiom(Axiom::B6, std::slice::from_ref(x)))
}
