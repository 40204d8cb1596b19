use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Kind of an attribute value as declared by a metamodel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Int,
    Float,
    String,
    Bool,
}

impl ScalarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalarKind::Int => "int",
            ScalarKind::Float => "float",
            ScalarKind::String => "string",
            ScalarKind::Bool => "bool",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "int" => Some(ScalarKind::Int),
            "float" => Some(ScalarKind::Float),
            "string" => Some(ScalarKind::String),
            "bool" => Some(ScalarKind::Bool),
            _ => None,
        }
    }
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Attribute value stored on a reflection-model node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn kind(&self) -> ScalarKind {
        match self {
            Value::Int(_) => ScalarKind::Int,
            Value::Float(_) => ScalarKind::Float,
            Value::Str(_) => ScalarKind::String,
            Value::Bool(_) => ScalarKind::Bool,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Converts a value into `kind` where the conversion is lossless
    /// (int literals are accepted for float attributes).
    pub fn coerce(self, kind: ScalarKind) -> Option<Value> {
        match (self, kind) {
            (v, k) if v.kind() == k => Some(v),
            (Value::Int(i), ScalarKind::Float) => Some(Value::Float(i as f64)),
            (Value::Float(x), ScalarKind::Int) if x.fract() == 0.0 && x.abs() < 9.0e15 => Some(Value::Int(x as i64)),
            _ => None,
        }
    }

    /// Ordering between comparable values. Numbers compare numerically
    /// across int/float; strings lexicographically; bools false < true.
    /// Values of unrelated kinds are incomparable.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (a, b) => a.as_f64()?.partial_cmp(&b.as_f64()?),
        }
    }

    pub fn from_json(json: &serde_json::Value, kind: ScalarKind) -> Option<Value> {
        match kind {
            ScalarKind::Int => json.as_i64().map(Value::Int),
            ScalarKind::Float => json.as_f64().map(Value::Float),
            ScalarKind::String => json.as_str().map(|s| Value::Str(s.to_string())),
            ScalarKind::Bool => json.as_bool().map(Value::Bool),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Float(x) => serde_json::Value::from(*x),
            Value::Str(s) => serde_json::Value::from(s.as_str()),
            Value::Bool(b) => serde_json::Value::from(*b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => {
                if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

/// Comparison operator used by attribute predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// Evaluates `lhs op rhs`. Incomparable operands only satisfy `!=`
    /// when they are of different kinds; otherwise the result is false.
    pub fn holds(self, lhs: &Value, rhs: &Value) -> bool {
        match lhs.compare(rhs) {
            Some(ord) => match self {
                CmpOp::Eq => ord == Ordering::Equal,
                CmpOp::Ne => ord != Ordering::Equal,
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Gt => ord == Ordering::Greater,
                CmpOp::Ge => ord != Ordering::Less,
            },
            None => false,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Right-hand side of a predicate: a literal, or a formal parameter of an
/// adaptation option that is bound when a candidate is instantiated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Literal(Value),
    Param(String),
}

/// `attribute op operand`, evaluated against a single node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub attr: String,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl Predicate {
    pub fn new(attr: impl Into<String>, op: CmpOp, rhs: impl Into<Value>) -> Self {
        Predicate {
            attr: attr.into(),
            op,
            rhs: Operand::Literal(rhs.into()),
        }
    }

    /// True iff the attribute is present and the comparison holds. A
    /// predicate whose operand is an unbound parameter never holds.
    pub fn eval(&self, attrs: &std::collections::BTreeMap<String, Value>) -> bool {
        let Some(lhs) = attrs.get(&self.attr) else {
            return false;
        };
        match &self.rhs {
            Operand::Literal(rhs) => self.op.holds(lhs, rhs),
            Operand::Param(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_comparison_crosses_int_and_float() {
        assert!(CmpOp::Gt.holds(&Value::Float(700.0), &Value::Int(500)));
        assert!(CmpOp::Eq.holds(&Value::Int(3), &Value::Float(3.0)));
        assert!(!CmpOp::Lt.holds(&Value::from("a"), &Value::Int(1)));
    }

    #[test]
    fn coercion_is_lossless_only() {
        assert_eq!(Value::Int(5).coerce(ScalarKind::Float), Some(Value::Float(5.0)));
        assert_eq!(Value::Float(5.5).coerce(ScalarKind::Int), None);
        assert_eq!(Value::from("x").coerce(ScalarKind::Bool), None);
    }
}
