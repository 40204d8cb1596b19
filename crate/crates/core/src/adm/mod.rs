//! The `.adm` adaptation-model language: lexer, parser, resolver, static
//! checker, and canonical serializer.
//!
//! ```text
//! adaptation shop;
//! param MAX_RT: float = 500;
//! condition FailedComp priority 10 lane fast on (attr-changed, state) {
//!     Component @c where c.state = "FAILED"
//! }
//! ```

mod ast;
mod check;
mod lexer;
mod parser;
mod resolve;
mod serialize;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::change::OptionTable;
use crate::evaluation::EvaluationCondition;
use crate::model::{Metamodel, ScalarKind, Value};
use crate::objectives::{GoalSpec, PreferenceWeights, QualityDimension};

pub use ast::SourceFile;
pub use check::static_check;
pub use parser::parse;
pub use resolve::resolve;
pub use serialize::serialize;

/// Position in a source file; line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Span {
    pub file: String,
    pub line: u32,
    pub col: u32,
    /// Byte offset into the source text.
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Stable kebab-case identifier, e.g. `unknown-type`.
    pub code: &'static str,
    pub message: String,
    pub span: Option<Span>,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>, span: Option<Span>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn warning(code: &'static str, message: impl Into<String>, span: Option<Span>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.span {
            Some(s) => write!(f, "{}:{}:{}: {sev}: {}", s.file, s.line, s.col, self.message),
            None => write!(f, "<bundle>: {sev}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub kind: ScalarKind,
    pub value: Value,
}

/// Option invocation inside a rule, with parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleAction {
    pub option: String,
    #[serde(default)]
    pub args: BTreeMap<String, Value>,
}

/// Event-condition-action rule of the coupled engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRule {
    pub id: String,
    pub condition: String,
    pub actions: Vec<RuleAction>,
    pub enabled: bool,
}

/// Declaration spans keyed by declaration id. Ignored by equality so that
/// bundles compare structurally.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Spans(pub BTreeMap<String, Span>);

impl PartialEq for Spans {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Spans {
    pub fn get(&self, id: &str) -> Option<Span> {
        self.0.get(id).cloned()
    }
}

/// A fully resolved adaptation model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptationModel {
    pub name: String,
    pub params: BTreeMap<String, ParamDecl>,
    pub qualities: Vec<QualityDimension>,
    pub preferences: PreferenceWeights,
    pub goals: Vec<GoalSpec>,
    pub conditions: Vec<EvaluationCondition>,
    pub options: OptionTable,
    pub rules: Vec<CoupledRule>,
    #[serde(skip)]
    pub spans: Spans,
}

impl AdaptationModel {
    pub fn condition(&self, id: &str) -> Option<&EvaluationCondition> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

/// Errors from loading `.adm` files end to end.
#[derive(Debug)]
pub enum LoadError {
    Io(String, std::io::Error),
    Invalid(Vec<Diagnostic>),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(path, e) => write!(f, "{path}: {e}"),
            LoadError::Invalid(diags) => {
                for (i, d) in diags.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for LoadError {}

/// Parses, resolves, and statically checks source texts given as
/// `(file name, text)` pairs. Returns the bundle with any warnings, or all
/// diagnostics if there is an error.
pub fn compile(
    sources: &[(String, String)],
    mm: &Metamodel,
) -> Result<(AdaptationModel, Vec<Diagnostic>), Vec<Diagnostic>> {
    let mut files = Vec::new();
    let mut diags = Vec::new();
    for (name, text) in sources {
        match parse(text, name) {
            Ok(f) => files.push(f),
            Err(mut d) => diags.append(&mut d),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let bundle = resolve(&files, mm)?;
    let diags = static_check(&bundle, mm);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    Ok((bundle, diags))
}

/// Reads and compiles `.adm` files.
pub fn load_files(paths: &[impl AsRef<Path>], mm: &Metamodel) -> Result<(AdaptationModel, Vec<Diagnostic>), LoadError> {
    let mut sources = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| LoadError::Io(p.display().to_string(), e))?;
        sources.push((p.display().to_string(), text));
    }
    compile(&sources, mm).map_err(LoadError::Invalid)
}
