//! Reflection models: typed attributed graphs with metamodel conformance,
//! annotations, reversible transactions, and structural pattern matching.

mod annotation;
mod conformance;
mod digest;
mod edit;
mod graph;
pub mod io;
mod metamodel;
mod pattern;
mod value;

use thiserror::Error;

pub use annotation::{Annotations, ChangeEvent, EvaluationResult, EventKind, EventSource};
pub use conformance::{validate_conformance, Rule, Violation};
pub use digest::{canonical_bytes, ModelDigest};
pub use edit::{AppliedOp, EditOp, Savepoint, Transaction, TxnStatus};
pub use graph::{Edge, Mode, Node, ReflectionModel};
pub use metamodel::{AttrDecl, Bound, EdgeType, Metamodel, Multiplicity, NodeType, Range};
pub use pattern::{
    match_pattern, match_seeded, Binding, NegativePattern, Pattern, PatternEdge, PatternNode, VarPredicate,
};
pub use value::{CmpOp, Operand, Predicate, ScalarKind, Value};

/// Caller-supplied identifier of a node or edge.
pub type ElementId = String;

/// Id used for edges created by the runtime itself: `<type>:<source>-><target>`.
pub fn edge_id(edge_type: &str, source: &str, target: &str) -> ElementId {
    format!("{edge_type}:{source}->{target}")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("stale op: {0}")]
    StaleOp(String),
    #[error("type violation: {0}")]
    TypeViolation(String),
    #[error("transaction {0} is closed")]
    TxnClosed(u64),
    #[error("transaction {0} is already open on this model")]
    AlreadyOpen(u64),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("unknown anchor: {0}")]
    UnknownAnchor(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid metamodel: {0}")]
    InvalidMetamodel(String),
    #[error("invalid model document: {0}")]
    InvalidDocument(String),
}
