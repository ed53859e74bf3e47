//! The proof system BBP: axioms B1-B7, BKS1, BKS2, equational logic and the
//! fixed-point rule RSP, as linear certificates with an independent checker,
//! plus the generators of the completeness pipeline.

pub(crate) mod build;
mod ft;
mod solution;
mod text;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::{format_expr, Node, StarExpr};

pub use build::{norm_sum, prove_aci_eq, Proof};
pub use ft::{derive_ft, ft_shape};
pub use solution::{
    extraction_solution, identity_solution, identity_solution_on, prove_equal, prove_equal_traced,
    solution_rhs, transfer_solution, unify_solutions, EqualityProof, ProvableSolution,
    SolutionError,
};
pub use text::{parse_certificate, parse_steps, write_certificate, FormatError};

/// An equation `lhs = rhs` between star expressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Equation {
    pub lhs: StarExpr,
    pub rhs: StarExpr,
}

impl Equation {
    pub fn new(lhs: StarExpr, rhs: StarExpr) -> Equation {
        Equation { lhs, rhs }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", format_expr(&self.lhs), format_expr(&self.rhs))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axiom {
    B1,
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    Bks1,
    Bks2,
}

impl Axiom {
    pub const ALL: [Axiom; 9] = [
        Axiom::B1,
        Axiom::B2,
        Axiom::B3,
        Axiom::B4,
        Axiom::B5,
        Axiom::B6,
        Axiom::B7,
        Axiom::Bks1,
        Axiom::Bks2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::B1 => "B1",
            Axiom::B2 => "B2",
            Axiom::B3 => "B3",
            Axiom::B4 => "B4",
            Axiom::B5 => "B5",
            Axiom::B6 => "B6",
            Axiom::B7 => "B7",
            Axiom::Bks1 => "BKS1",
            Axiom::Bks2 => "BKS2",
        }
    }

    pub fn from_name(s: &str) -> Option<Axiom> {
        Axiom::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Schema variables, in order.
    pub fn vars(self) -> &'static [&'static str] {
        match self {
            Axiom::B3 | Axiom::B6 | Axiom::B7 => &["x"],
            Axiom::B1 | Axiom::Bks1 => &["x", "y"],
            _ => &["x", "y", "z"],
        }
    }

    /// The instance of the schema under `args`, given in the order of [`Axiom::vars`].
    pub fn instance(self, args: &[StarExpr]) -> Option<Equation> {
        if args.len() != self.vars().len() {
            return None;
        }
        let v = |i: usize| args[i].clone();
        use StarExpr as E;
        let (l, r) = match self {
            Axiom::B1 => (E::sum(v(0), v(1)), E::sum(v(1), v(0))),
            Axiom::B2 => (
                E::sum(E::sum(v(0), v(1)), v(2)),
                E::sum(v(0), E::sum(v(1), v(2))),
            ),
            Axiom::B3 => (E::sum(v(0), v(0)), v(0)),
            Axiom::B4 => (
                E::prod(E::sum(v(0), v(1)), v(2)),
                E::sum(E::prod(v(0), v(2)), E::prod(v(1), v(2))),
            ),
            Axiom::B5 => (
                E::prod(E::prod(v(0), v(1)), v(2)),
                E::prod(v(0), E::prod(v(1), v(2))),
            ),
            Axiom::B6 => (E::sum(v(0), E::zero()), v(0)),
            Axiom::B7 => (E::prod(E::zero(), v(0)), E::zero()),
            Axiom::Bks1 => (
                E::sum(E::prod(v(0), E::star(v(0), v(1))), v(1)),
                E::star(v(0), v(1)),
            ),
            Axiom::Bks2 => (
                E::prod(E::star(v(0), v(1)), v(2)),
                E::star(v(0), E::prod(v(1), v(2))),
            ),
        };
        Some(Equation::new(l, r))
    }
}

/// Substitution for the schema variables of an axiom.
pub type Subst = BTreeMap<String, StarExpr>;

/// Direction into a binary node; for a star, `L` is the body and `R` the exit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    L,
    R,
}

pub fn subterm<'a>(e: &'a StarExpr, path: &[Side]) -> Option<&'a StarExpr> {
    let mut cur = e;
    for s in path {
        let (l, r) = cur.children()?;
        cur = if *s == Side::L { l } else { r };
    }
    Some(cur)
}

/// `e` with the subterm at `path` replaced by `new`.
pub fn replace_at(e: &StarExpr, path: &[Side], new: StarExpr) -> Option<StarExpr> {
    match path.split_first() {
        None => Some(new),
        Some((s, rest)) => {
            let (l, r) = e.children()?;
            Some(match s {
                Side::L => e.with_children(replace_at(l, rest, new)?, r.clone()),
                Side::R => e.with_children(l.clone(), replace_at(r, rest, new)?),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Justification {
    Axiom(Axiom, Subst),
    Refl,
    Symm(usize),
    Trans(usize, usize),
    Cong(Vec<Side>, usize),
    Rsp(usize),
}

impl Justification {
    pub fn premises(&self) -> Vec<usize> {
        match self {
            Justification::Axiom(..) | Justification::Refl => vec![],
            Justification::Symm(i) | Justification::Cong(_, i) | Justification::Rsp(i) => vec![*i],
            Justification::Trans(i, j) => vec![*i, *j],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofStep {
    pub eq: Equation,
    pub just: Justification,
}

/// A linear derivation; every premise index points to an earlier step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub steps: Vec<ProofStep>,
    pub goal: Equation,
}

impl Certificate {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn count_rsp(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s.just, Justification::Rsp(_)))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {index}: {reason}")]
pub struct CheckError {
    /// Index of the failing step; `steps.len()` for a goal mismatch.
    pub index: usize,
    pub reason: String,
}

fn check_step(steps: &[ProofStep], i: usize) -> Result<(), String> {
    let step = &steps[i];
    let eq = &step.eq;
    let prem = |j: usize| -> Result<&Equation, String> {
        if j < i {
            Ok(&steps[j].eq)
        } else {
            Err(format!("premise {j} is not an earlier step"))
        }
    };
    match &step.just {
        Justification::Axiom(ax, subst) => {
            let vars = ax.vars();
            if subst.len() != vars.len() || vars.iter().any(|v| !subst.contains_key(*v)) {
                return Err(format!(
                    "{} needs exactly the variables {:?}",
                    ax.name(),
                    vars
                ));
            }
            let args: Vec<StarExpr> = vars.iter().map(|v| subst[*v].clone()).collect();
            let inst = ax.instance(&args).expect("arity checked");
            if &inst != eq {
                return Err(format!("not an instance of {}", ax.name()));
            }
        }
        Justification::Refl => {
            if eq.lhs != eq.rhs {
                return Err("sides differ".into());
            }
        }
        Justification::Symm(j) => {
            let p = prem(*j)?;
            if p.lhs != eq.rhs || p.rhs != eq.lhs {
                return Err(format!("not the converse of step {j}"));
            }
        }
        Justification::Trans(j, k) => {
            let (p, q) = (prem(*j)?, prem(*k)?);
            if p.rhs != q.lhs {
                return Err(format!("steps {j} and {k} do not chain"));
            }
            if p.lhs != eq.lhs || q.rhs != eq.rhs {
                return Err(format!("endpoints differ from steps {j} and {k}"));
            }
        }
        Justification::Cong(path, j) => {
            let p = prem(*j)?;
            let a = subterm(&eq.lhs, path).ok_or("path leaves the left-hand side")?;
            let b = subterm(&eq.rhs, path).ok_or("path leaves the right-hand side")?;
            if a != &p.lhs || b != &p.rhs {
                return Err(format!("hole does not match step {j}"));
            }
            if replace_at(&eq.lhs, path, b.clone()).as_ref() != Some(&eq.rhs) {
                return Err("contexts differ".into());
            }
        }
        Justification::Rsp(j) => {
            let p = prem(*j)?;
            let Node::Sum(fe, g) = p.rhs.node() else {
                return Err("premise is not e = f.e + g".into());
            };
            let Node::Prod(f, e) = fe.node() else {
                return Err("premise is not e = f.e + g".into());
            };
            if e != &p.lhs {
                return Err("premise is not e = f.e + g".into());
            }
            if eq.lhs != p.lhs || eq.rhs != StarExpr::star(f.clone(), g.clone()) {
                return Err(format!("conclusion is not e = f * g for step {j}"));
            }
        }
    }
    Ok(())
}

/// Checks every step and that the last step proves the goal.
pub fn check_certificate(cert: &Certificate) -> Result<(), CheckError> {
    for i in 0..cert.steps.len() {
        check_step(&cert.steps, i).map_err(|reason| CheckError { index: i, reason })?;
    }
    match cert.steps.last() {
        Some(last) if last.eq == cert.goal => Ok(()),
        Some(_) => Err(CheckError {
            index: cert.steps.len(),
            reason: "last step does not prove the goal".into(),
        }),
        None => Err(CheckError {
            index: 0,
            reason: "empty certificate".into(),
        }),
    }
}
