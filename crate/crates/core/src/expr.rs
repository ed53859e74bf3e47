//! Star expressions: syntax tree, parser, printer and structural measures.
//!
//! Expressions are immutable and reference counted, so subterms are shared
//! freely between larger terms. Every node caches its hash and size, which
//! keeps equality tests on large shared terms cheap.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

/// An action name over `[a-z][a-z0-9_]*`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(Arc<str>);

impl Action {
    /// Creates an action, checking the identifier syntax.
    pub fn new(name: &str) -> Result<Action, ParseError> {
        if is_action_name(name) {
            Ok(Action(Arc::from(name)))
        } else {
            Err(ParseError {
                offset: 0,
                message: format!("invalid action name `{name}`"),
            })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// A value below every valid action, used as a range bound.
    pub(crate) fn bottom() -> Action {
        Action(Arc::from(""))
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Returns true if `name` matches `[a-z][a-z0-9_]*`.
pub fn is_action_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// One node of a star expression.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Zero,
    Act(Action),
    Sum(StarExpr, StarExpr),
    Prod(StarExpr, StarExpr),
    /// Binary star `body * exit`.
    Star(StarExpr, StarExpr),
}

struct Inner {
    node: Node,
    hash: u64,
    size: usize,
}

/// A 1-free star expression.
#[derive(Clone)]
pub struct StarExpr(Arc<Inner>);

impl StarExpr {
    fn make(node: Node) -> StarExpr {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let size = match &node {
            Node::Zero => {
                0u8.hash(&mut h);
                1
            }
            Node::Act(a) => {
                1u8.hash(&mut h);
                a.hash(&mut h);
                1
            }
            Node::Sum(l, r) | Node::Prod(l, r) | Node::Star(l, r) => {
                let tag = match &node {
                    Node::Sum(..) => 2u8,
                    Node::Prod(..) => 3,
                    _ => 4,
                };
                tag.hash(&mut h);
                l.0.hash.hash(&mut h);
                r.0.hash.hash(&mut h);
                1 + l.size() + r.size()
            }
        };
        StarExpr(Arc::new(Inner {
            node,
            hash: h.finish(),
            size,
        }))
    }

    pub fn zero() -> StarExpr {
        StarExpr::make(Node::Zero)
    }

    pub fn act(a: Action) -> StarExpr {
        StarExpr::make(Node::Act(a))
    }

    /// Action from a name. Panics on an invalid name.
    pub fn atom(name: &str) -> StarExpr {
        StarExpr::act(Action::new(name).expect("valid action name"))
    }

    pub fn sum(l: StarExpr, r: StarExpr) -> StarExpr {
        StarExpr::make(Node::Sum(l, r))
    }

    pub fn prod(l: StarExpr, r: StarExpr) -> StarExpr {
        StarExpr::make(Node::Prod(l, r))
    }

    pub fn star(body: StarExpr, exit: StarExpr) -> StarExpr {
        StarExpr::make(Node::Star(body, exit))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Number of nodes in the syntax tree.
    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Zero)
    }

    /// The two children of a binary node.
    pub fn children(&self) -> Option<(&StarExpr, &StarExpr)> {
        match self.node() {
            Node::Sum(l, r) | Node::Prod(l, r) | Node::Star(l, r) => Some((l, r)),
            _ => None,
        }
    }

    /// Same constructor as `self` with new children. Panics on leaves.
    pub fn with_children(&self, l: StarExpr, r: StarExpr) -> StarExpr {
        match self.node() {
            Node::Sum(..) => StarExpr::sum(l, r),
            Node::Prod(..) => StarExpr::prod(l, r),
            Node::Star(..) => StarExpr::star(l, r),
            _ => panic!("with_children on a leaf"),
        }
    }

    /// Actions occurring in the expression, sorted.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = std::collections::BTreeSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            match e.node() {
                Node::Zero => {}
                Node::Act(a) => {
                    out.insert(a.clone());
                }
                Node::Sum(l, r) | Node::Prod(l, r) | Node::Star(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        out.into_iter().collect()
    }
}

impl PartialEq for StarExpr {
    fn eq(&self, other: &StarExpr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash
                && self.0.size == other.0.size
                && self.0.node == other.0.node)
    }
}

impl Eq for StarExpr {}

impl Hash for StarExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for StarExpr {
    fn partial_cmp(&self, other: &StarExpr) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StarExpr {
    fn cmp(&self, other: &StarExpr) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0.node.cmp(&other.0.node)
    }
}

impl fmt::Debug for StarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_expr(self))
    }
}

impl fmt::Display for StarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_expr(self))
    }
}

impl std::str::FromStr for StarExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<StarExpr, ParseError> {
        parse_expr(s)
    }
}

/// Syntax error with a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn sum(&mut self) -> Result<StarExpr, ParseError> {
        let mut e = self.prod()?;
        while self.peek() == Some(b'+') {
            self.pos += 1;
            e = StarExpr::sum(e, self.prod()?);
        }
        Ok(e)
    }

    fn prod(&mut self) -> Result<StarExpr, ParseError> {
        let mut e = self.star()?;
        while self.peek() == Some(b'.') {
            self.pos += 1;
            e = StarExpr::prod(e, self.star()?);
        }
        Ok(e)
    }

    fn star(&mut self) -> Result<StarExpr, ParseError> {
        let mut e = self.atom()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            e = StarExpr::star(e, self.atom()?);
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<StarExpr, ParseError> {
        match self.peek() {
            Some(b'0') => {
                self.pos += 1;
                Ok(StarExpr::zero())
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return self.error("expected `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_lowercase()
                        || self.src[self.pos].is_ascii_digit()
                        || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                Ok(StarExpr::act(Action(Arc::from(name))))
            }
            Some(_) => self.error("unexpected character"),
            None => self.error("unexpected end of input"),
        }
    }
}

/// Parses the concrete syntax `sum := prod ('+' prod)*`, `prod := star ('.' star)*`,
/// `star := atom ('*' atom)*`, `atom := '0' | ACTION | '(' sum ')'`.
pub fn parse_expr(text: &str) -> Result<StarExpr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    if p.peek().is_none() {
        return p.error("empty input");
    }
    let e = p.sum()?;
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

fn prec(e: &StarExpr) -> u8 {
    match e.node() {
        Node::Sum(..) => 0,
        Node::Prod(..) => 1,
        Node::Star(..) => 2,
        _ => 3,
    }
}

fn write_expr(e: &StarExpr, out: &mut String) {
    fn child(e: &StarExpr, parens: bool, out: &mut String) {
        if parens {
            out.push('(');
            write_expr(e, out);
            out.push(')');
        } else {
            write_expr(e, out);
        }
    }
    match e.node() {
        Node::Zero => out.push('0'),
        Node::Act(a) => out.push_str(a.as_str()),
        Node::Sum(l, r) => {
            child(l, false, out);
            out.push_str(" + ");
            child(r, prec(r) == 0, out);
        }
        Node::Prod(l, r) => {
            // stars are bracketed inside products for readability
            child(l, prec(l) != 1 && prec(l) != 3, out);
            out.push('.');
            child(r, prec(r) != 3, out);
        }
        Node::Star(l, r) => {
            child(l, prec(l) < 2, out);
            out.push_str(" * ");
            child(r, prec(r) < 3, out);
        }
    }
}

/// Prints an expression so that `parse_expr` gives it back.
pub fn format_expr(e: &StarExpr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

/// Maximal nesting depth of stars in body position.
pub fn star_height(e: &StarExpr) -> usize {
    match e.node() {
        Node::Zero | Node::Act(_) => 0,
        Node::Sum(l, r) | Node::Prod(l, r) => star_height(l).max(star_height(r)),
        Node::Star(l, r) => (star_height(l) + 1).max(star_height(r)),
    }
}

/// Left-nested sum of the terms; `0` when empty.
pub fn big_sum<I: IntoIterator<Item = StarExpr>>(terms: I) -> StarExpr {
    let mut it = terms.into_iter();
    match it.next() {
        None => StarExpr::zero(),
        Some(first) => it.fold(first, StarExpr::sum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> StarExpr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn parses_e0() {
        let a = StarExpr::atom("a");
        let b = StarExpr::atom("b");
        let c = StarExpr::atom("c");
        let inner = StarExpr::sum(
            StarExpr::prod(c, a.clone()),
            StarExpr::prod(
                a.clone(),
                StarExpr::sum(b.clone(), StarExpr::prod(b, a.clone())),
            ),
        );
        let expected = StarExpr::prod(a, StarExpr::star(inner, StarExpr::zero()));
        assert_eq!(p("a.((c.a + a.(b + b.a)) * 0)"), expected);
    }

    #[test]
    fn dangling_operator_offset() {
        let err = parse_expr("a+").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(parse_expr("").is_err());
        assert!(parse_expr("(a").is_err());
        assert!(parse_expr("a b").is_err());
        assert!(parse_expr("A").is_err());
    }

    #[test]
    fn associativity() {
        assert_eq!(p("a+b+c"), p("(a+b)+c"));
        assert_eq!(p("a.b.c"), p("(a.b).c"));
        assert_eq!(p("a*b*c"), p("(a*b)*c"));
        assert_eq!(p("a+b.c*d"), p("a+(b.(c*d))"));
        assert_ne!(p("a+(b+c)"), p("(a+b)+c"));
    }

    #[test]
    fn printing() {
        assert_eq!(format_expr(&StarExpr::zero()), "0");
        assert_eq!(format_expr(&p("(a+b)*0")), "(a + b) * 0");
        assert_eq!(format_expr(&p("a.(c*0)")), "a.(c * 0)");
        assert_eq!(format_expr(&p("a+(b+c)")), "a + (b + c)");
        assert_eq!(format_expr(&p("a*(b*c)")), "a * (b * c)");
        assert_eq!(format_expr(&p("(a.b).c")), "a.b.c");
        assert_eq!(format_expr(&p("a.(b.c)")), "a.(b.c)");
    }

    #[test]
    fn heights() {
        assert_eq!(star_height(&p("a")), 0);
        assert_eq!(star_height(&p("a*b")), 1);
        assert_eq!(star_height(&p("(a*b)*c")), 2);
        assert_eq!(star_height(&p("a*(b*c)")), 1);
    }

    #[test]
    fn sums() {
        assert_eq!(big_sum(vec![]), StarExpr::zero());
        assert_eq!(big_sum(vec![p("a")]), p("a"));
        assert_eq!(big_sum(vec![p("a"), p("b"), p("c")]), p("(a+b)+c"));
    }
}
