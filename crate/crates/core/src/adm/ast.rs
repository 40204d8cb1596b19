//! Unresolved syntax tree. Names are plain strings with spans; types,
//! attributes and references are bound later by the resolver.

use crate::model::{CmpOp, ScalarKind, Value};
use crate::objectives::{Aggregator, Direction};

use super::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct Name {
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    pub file: String,
    pub name: Name,
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Param(ParamAst),
    Quality(QualityAst),
    Preferences(PreferencesAst),
    Goal(GoalAst),
    Condition(ConditionAst),
    Option(OptionAst),
    Rule(RuleAst),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Literal(Value),
    /// Parameter reference.
    Name(Name),
    /// `var.attr`, only meaningful in effect values.
    Attr(Name, Name),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamAst {
    pub name: Name,
    pub kind: ScalarKind,
    pub value: Value,
    pub value_span: Span,
}

/// `attr op rhs` inside a metric filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterAst {
    pub attr: Name,
    pub op: CmpOp,
    pub rhs: Rhs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityAst {
    pub name: Name,
    pub aggregator: Aggregator,
    pub node_type: Name,
    pub attribute: Option<Name>,
    pub filter: Vec<FilterAst>,
    pub direction: Direction,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencesAst {
    pub span: Span,
    pub weights: Vec<(Name, f64)>,
}

/// `var.attr op rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmpAst {
    pub var: Name,
    pub attr: Name,
    pub op: CmpOp,
    pub rhs: Rhs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    Node {
        node_type: Name,
        var: Name,
        anchor: bool,
    },
    Edge {
        source: Name,
        edge_type: Name,
        target: Name,
    },
    Not(PatternAst),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternAst {
    pub clauses: Vec<Clause>,
    pub conditions: Vec<CmpAst>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalAst {
    pub name: Name,
    pub require: bool,
    pub pattern: PatternAst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerAst {
    pub kind: Name,
    pub attribute: Option<Name>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAst {
    pub name: Name,
    pub priority: i64,
    pub fast: bool,
    pub linked: Option<Name>,
    pub triggers: Vec<TriggerAst>,
    pub pattern: PatternAst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalAst {
    pub name: Name,
    pub kind: ScalarKind,
    pub default: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EditAst {
    Set {
        var: Name,
        attr: Name,
        value: Rhs,
    },
    Clone {
        source: Name,
        new_var: Name,
    },
    Link {
        source: Name,
        edge_type: Name,
        target: Name,
    },
    Unlink {
        source: Name,
        edge_type: Name,
        target: Name,
    },
    Delete {
        var: Name,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodyAst {
    Effect(Vec<EditAst>),
    Compose(Vec<Name>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionAst {
    pub name: Name,
    pub params: Vec<FormalAst>,
    pub pre: PatternAst,
    pub body: BodyAst,
    /// Empty means `true`.
    pub post: Vec<CmpAst>,
    pub invariants: Vec<PatternAst>,
    pub cost: f64,
    pub benefit: Vec<(Name, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionAst {
    pub option: Name,
    pub args: Vec<(Name, Value)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleAst {
    pub name: Name,
    pub condition: Name,
    pub actions: Vec<ActionAst>,
}
