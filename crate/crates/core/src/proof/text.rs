//! Line-based certificate format.
//!
//! ```text
//! <idx> TAB <lhs> TAB <rhs> TAB <rule> [TAB <arg>]*
//! goal <lhs> = <rhs>
//! ```
//! Axiom arguments are bindings `x=<expr>`; `SYMM` and `RSP` take one index,
//! `TRANS` two, `CONG` a path of `L`/`R` letters (`.` when empty) and an index.

use std::collections::HashMap;

use thiserror::Error;

use super::{Axiom, Certificate, Equation, Justification, ProofStep, Side, Subst};
use crate::expr::{format_expr, parse_expr, StarExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("certificate line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

pub fn write_certificate(cert: &Certificate) -> String {
    let mut out = String::new();
    let mut cache: HashMap<StarExpr, String> = HashMap::new();
    let mut show = |e: &StarExpr| {
        cache
            .entry(e.clone())
            .or_insert_with(|| format_expr(e))
            .clone()
    };
    for (i, step) in cert.steps.iter().enumerate() {
        let mut fields = vec![i.to_string(), show(&step.eq.lhs), show(&step.eq.rhs)];
        match &step.just {
            Justification::Axiom(ax, subst) => {
                fields.push(ax.name().to_string());
                for (v, e) in subst {
                    fields.push(format!("{v}={}", show(e)));
                }
            }
            Justification::Refl => fields.push("REFL".into()),
            Justification::Symm(j) => fields.extend(["SYMM".into(), j.to_string()]),
            Justification::Trans(j, k) => {
                fields.extend(["TRANS".into(), j.to_string(), k.to_string()])
            }
            Justification::Cong(path, j) => {
                let p: String = if path.is_empty() {
                    ".".into()
                } else {
                    path.iter()
                        .map(|s| if *s == Side::L { 'L' } else { 'R' })
                        .collect()
                };
                fields.extend(["CONG".into(), p, j.to_string()]);
            }
            Justification::Rsp(j) => fields.extend(["RSP".into(), j.to_string()]),
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out.push_str(&format!(
        "goal {} = {}\n",
        format_expr(&cert.goal.lhs),
        format_expr(&cert.goal.rhs)
    ));
    out
}

/// Shares equal subterms so that repeated comparisons stay cheap.
struct Interner(HashMap<StarExpr, StarExpr>);

impl Interner {
    fn intern(&mut self, e: StarExpr) -> StarExpr {
        if let Some(x) = self.0.get(&e) {
            return x.clone();
        }
        let shared = match e.children() {
            Some((l, r)) => {
                let (l, r) = (self.intern(l.clone()), self.intern(r.clone()));
                e.with_children(l, r)
            }
            None => e,
        };
        self.0.insert(shared.clone(), shared.clone());
        shared
    }

    fn parse(&mut self, s: &str, line: usize) -> Result<StarExpr, FormatError> {
        let e = parse_expr(s).map_err(|err| FormatError {
            line,
            message: err.to_string(),
        })?;
        Ok(self.intern(e))
    }
}

fn index(s: Option<&&str>, line: usize) -> Result<usize, FormatError> {
    s.and_then(|x| x.parse().ok()).ok_or(FormatError {
        line,
        message: "expected a step index".into(),
    })
}

/// Parses a certificate file.
pub fn parse_certificate(text: &str) -> Result<Certificate, FormatError> {
    let (steps, goal) = parse_steps(text)?;
    let goal = goal.ok_or(FormatError {
        line: text.lines().count(),
        message: "missing goal line".into(),
    })?;
    Ok(Certificate { steps, goal })
}

/// The steps of a certificate file and its goal line, if present.
pub fn parse_steps(text: &str) -> Result<(Vec<ProofStep>, Option<Equation>), FormatError> {
    let mut ints = Interner(HashMap::new());
    let mut steps = Vec::new();
    let mut goal = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let l = raw.trim_end_matches('\r');
        if l.trim().is_empty() || l.trim_start().starts_with('#') {
            continue;
        }
        let err = |m: &str| FormatError {
            line,
            message: m.to_string(),
        };
        if goal.is_some() {
            return Err(err("content after the goal line"));
        }
        if let Some(rest) = l.strip_prefix("goal ") {
            let (a, b) = rest
                .split_once(" = ")
                .ok_or_else(|| err("goal needs ' = '"))?;
            goal = Some(Equation::new(ints.parse(a, line)?, ints.parse(b, line)?));
            continue;
        }
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() < 4 {
            return Err(err("expected index, lhs, rhs and rule"));
        }
        if f[0].parse::<usize>().ok() != Some(steps.len()) {
            return Err(err("step indices must count up from 0"));
        }
        let eq = Equation::new(ints.parse(f[1], line)?, ints.parse(f[2], line)?);
        let args = &f[4..];
        let just = match f[3] {
            "REFL" => Justification::Refl,
            "SYMM" => Justification::Symm(index(args.first(), line)?),
            "RSP" => Justification::Rsp(index(args.first(), line)?),
            "TRANS" => Justification::Trans(index(args.first(), line)?, index(args.get(1), line)?),
            "CONG" => {
                let p = args.first().ok_or_else(|| err("CONG needs a path"))?;
                let path = if *p == "." {
                    vec![]
                } else {
                    p.chars()
                        .map(|c| match c {
                            'L' => Ok(Side::L),
                            'R' => Ok(Side::R),
                            _ => Err(err("path letters are L and R")),
                        })
                        .collect::<Result<Vec<_>, _>>()?
                };
                Justification::Cong(path, index(args.get(1), line)?)
            }
            name => {
                let ax = Axiom::from_name(name).ok_or_else(|| err("unknown rule"))?;
                let mut subst = Subst::new();
                for a in args {
                    let (v, e) = a.split_once('=').ok_or_else(|| err("binding needs '='"))?;
                    subst.insert(v.to_string(), ints.parse(e, line)?);
                }
                Justification::Axiom(ax, subst)
            }
        };
        if !matches!(just, Justification::Axiom(..) | Justification::Refl)
            && just.premises().len() + 4 + usize::from(matches!(just, Justification::Cong(..)))
                != f.len()
        {
            return Err(err("wrong number of arguments"));
        }
        steps.push(ProofStep { eq, just });
    }
    Ok((steps, goal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::{check_certificate, derive_ft};

    #[test]
    fn round_trip() {
        let e = parse_expr("(a.((a.(b + b.a)) * c)) * 0").unwrap();
        let cert = derive_ft(&e);
        let text = write_certificate(&cert);
        let back = parse_certificate(&text).unwrap();
        assert_eq!(back, cert);
        check_certificate(&back).unwrap();
    }

    #[test]
    fn errors() {
        assert!(parse_certificate("").is_err());
        assert!(parse_certificate("0\ta\ta\tREFL\n").is_err());
        assert!(parse_certificate("0\ta\ta\tFOO\ngoal a = a\n").is_err());
        assert!(parse_certificate("1\ta\ta\tREFL\ngoal a = a\n").is_err());
        assert!(parse_certificate("0\ta\ta\tREFL\ngoal a = a\n").is_ok());
    }
}
