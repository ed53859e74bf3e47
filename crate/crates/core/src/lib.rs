//! Bisimilarity of 1-free star expressions with checkable equational proofs.
//!
//! The crate interprets star expressions as charts, recognises and builds
//! layered loop-elimination witnesses, collapses such charts while keeping a
//! witness, extracts star expressions back from witnesses, and produces
//! derivations in the proof system BBP that an independent checker verifies.

pub mod bisim;
pub mod chart;
pub mod collapse;
pub mod expr;
pub mod extract;
mod graph;
pub mod interp;
pub mod llee;
pub mod proof;
pub mod props;

pub use chart::{Chart, ChartError, LabeledChart, Transition, VertexId};
pub use expr::{big_sum, format_expr, parse_expr, star_height, Action, Node, StarExpr};
