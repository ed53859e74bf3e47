//! Reassembling an expression from its action derivatives.

use super::build::{aci, dist, Proof};
use super::{Axiom, Certificate, Side};
use crate::expr::{big_sum, Node, StarExpr};
use crate::interp::{action_derivatives, Target};

/// `e = r` where the summands of `r` are the terms `a` and `b.e'` of the derivatives of `e`.
pub(crate) fn ft_raw(e: &StarExpr) -> Proof {
    match e.node() {
        Node::Zero | Node::Act(_) => Proof::refl(e.clone()),
        Node::Sum(f, g) => Proof::binary(e, &ft_raw(f), &ft_raw(g)),
        Node::Prod(f, g) => {
            let pf = Proof::cong(e, &[Side::L], &ft_raw(f));
            pf.then(|x| {
                let (rf, _) = x.children().expect("product");
                dist(rf, g)
            })
        }
        Node::Star(f, g) => {
            let unfold = Proof::axiom(Axiom::Bks1, &[f.clone(), g.clone()]).symm();
            unfold
                .then(|x| Proof::cong(x, &[Side::L, Side::L], &ft_raw(f)))
                .then(|x| {
                    let (fe, _) = x.children().expect("sum");
                    let (rf, _) = fe.children().expect("product");
                    Proof::cong(x, &[Side::L], &dist(rf, e))
                })
                .then(|x| Proof::cong(x, &[Side::R], &ft_raw(g)))
        }
    }
}

/// The right-hand side `(Σ a) + (Σ b.e')` over the derivatives of `e` in canonical order.
pub fn ft_shape(e: &StarExpr) -> StarExpr {
    let mut ticks = Vec::new();
    let mut steps = Vec::new();
    for d in action_derivatives(e) {
        match d.target {
            Target::Tick => ticks.push(StarExpr::act(d.action)),
            Target::Expr(f) => steps.push(StarExpr::prod(StarExpr::act(d.action), f)),
        }
    }
    StarExpr::sum(big_sum(ticks), big_sum(steps))
}

pub(crate) fn ft_proof(e: &StarExpr) -> Proof {
    let raw = ft_raw(e);
    let goal = ft_shape(e);
    let tidy = aci(raw.rhs(), &goal);
    raw.trans(&tidy)
}

/// A certificate for `e = (Σ a) + (Σ b.e')` over the action derivatives of `e`.
pub fn derive_ft(e: &StarExpr) -> Certificate {
    ft_proof(e).to_certificate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::proof::check_certificate;

    fn p(s: &str) -> StarExpr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn base_cases() {
        let c = derive_ft(&p("0"));
        assert_eq!(c.goal.rhs, p("0 + 0"));
        check_certificate(&c).unwrap();
        let c = derive_ft(&p("a"));
        assert_eq!(c.goal.rhs, p("a + 0"));
        check_certificate(&c).unwrap();
    }

    #[test]
    fn star_case() {
        let c = derive_ft(&p("a * b"));
        assert_eq!(
            c.goal.rhs,
            StarExpr::sum(p("b"), StarExpr::prod(p("a"), p("a * b")))
        );
        check_certificate(&c).unwrap();
    }

    #[test]
    fn e0_and_friends() {
        for s in [
            "a.((c.a + a.(b + b.a)) * 0)",
            "(a.((a.(b + b.a)) * c)) * 0",
            "(a + b).(c * (a.b + 0))",
            "((a * b) * (c + a)).b",
        ] {
            let e = p(s);
            let c = derive_ft(&e);
            assert_eq!(c.goal.lhs, e);
            check_certificate(&c).unwrap();
        }
    }
}
