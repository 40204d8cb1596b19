//! Requirements assessment: the frozen comparison of Stitch and Story
//! Diagrams plus a self-assessment of this runtime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SupportLevel {
    #[serde(rename = "--")]
    None,
    #[serde(rename = "M")]
    Medium,
    #[serde(rename = "F")]
    Full,
}

impl SupportLevel {
    pub fn symbol(self) -> &'static str {
        match self {
            SupportLevel::None => "--",
            SupportLevel::Medium => "M",
            SupportLevel::Full => "F",
        }
    }
}

impl FromStr for SupportLevel {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "--" => Ok(SupportLevel::None),
            "M" => Ok(SupportLevel::Medium),
            "F" => Ok(SupportLevel::Full),
            other => Err(AssessError::Parse(format!("unknown support level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    Stitch,
    StoryDiagrams,
    #[serde(rename = "self")]
    SelfAssessment,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Stitch, Approach::StoryDiagrams, Approach::SelfAssessment];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Stitch => "stitch",
            Approach::StoryDiagrams => "story-diagrams",
            Approach::SelfAssessment => "self",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Approach::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| AssessError::UnknownApproach(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    FunctionalLr,
    NonFunctionalLr,
    Fr,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::FunctionalLr => "functional-LR",
            Category::NonFunctionalLr => "non-functional-LR",
            Category::Fr => "FR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: &'static str,
    pub name: &'static str,
    pub category: Category,
    /// Short statement of what the requirement asks for.
    pub summary: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub level: SupportLevel,
    pub rationale: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum AssessError {
    #[error("unknown approach `{0}` (expected stitch, story-diagrams or self)")]
    UnknownApproach(String),
    #[error("unknown requirement `{0}`")]
    UnknownRequirement(String),
    #[error("unknown format `{0}` (expected text or csv)")]
    UnknownFormat(String),
    #[error("malformed assessment table: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

impl FromStr for Format {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            other => Err(AssessError::UnknownFormat(other.to_string())),
        }
    }
}

use Category::{Fr, FunctionalLr as Flr, NonFunctionalLr as Nlr};
use SupportLevel::{Full as F, Medium as M, None as N};

/// (id, name, category, summary, stitch, story diagrams, self level, self rationale)
type Row = (
    &'static str,
    &'static str,
    Category,
    &'static str,
    SupportLevel,
    SupportLevel,
    SupportLevel,
    &'static str,
);

const ROWS: [Row; 23] = [
    ("LR-Goals", "Goals", Flr, "state the functional behavior the system must provide", N, F, F,
     "goal declarations are hard planner constraints; objectives::tests::forbid_failed_goal"),
    ("LR-Quality", "Quality Dimensions", Flr, "measure how well the system provides it", F, F, F,
     "quality metrics normalized to [0,1]; objectives::tests::normalize_examples"),
    ("LR-Preferences", "Preferences", Flr, "weigh competing quality dimensions", F, F, M,
     "weights over qualities only, goals are not ranked; adm::check::tests::weights_summing_to_point_nine_fail"),
    ("LR-ReflectionModels", "Access to Reflection Models", Flr, "read and change the runtime model", M, F, F,
     "options edit the model in transactions before execution; engine::tests::execute_plan_outcomes"),
    ("LR-Events", "Events", Flr, "use change events to locate where to evaluate", M, F, F,
     "anchored incremental evaluation; acceptance criterion incremental-equals-full"),
    ("LR-EvalConditions", "Evaluation Conditions", Flr, "express structural and attribute constraints", F, F, F,
     "graph patterns with negative application conditions; acceptance criterion pattern-matcher-oracle"),
    ("LR-EvalResults", "Evaluation Results", Flr, "keep and annotate analysis results", N, F, F,
     "results annotated on model elements and traced; evaluation::tests::publish_counts_and_skips_stale"),
    ("LR-AdaptOptions", "Adaptation Options", Flr, "describe the space of possible changes", F, F, F,
     "primitive and composite options; change::tests::composite_equals_sequential_parts"),
    ("LR-AdaptConditions", "Adaptation Conditions", Flr, "restrict options to applicable ones", F, F, M,
     "pattern preconditions; references between options are not supported"),
    ("LR-AdaptCostsBenefits", "Costs and Benefits", Flr, "attach costs and expected benefits to options", F, F, F,
     "cost and per-quality benefit drive planner ordering and score; change::tests::estimate_weighs_benefits"),
    ("LR-History", "History", Flr, "record decisions for later use", M, F, M,
     "decision history is recorded and queryable but never consulted; engine::tests::history_filters"),
    ("LR-Modularity", "Modularity, Abstractions and Scalability", Nlr, "compose models from parts at several levels", M, F, F,
     "multi-file bundles and nested composite options; adm::resolve::tests"),
    ("LR-SideEffects", "Side Effects", Nlr, "separate concepts that change things from those that do not", N, M, F,
     "only options carry effects; evaluation and planning are digest-checked; acceptance criterion side-effect-freedom"),
    ("LR-Parameters", "Parameters", Nlr, "parameterize adaptation models", M, F, M,
     "scalar parameters only, no object references"),
    ("LR-Formality", "Formality", Nlr, "support validation and verification", N, M, M,
     "static well-formedness and overlap checks only; adm::check::tests"),
    ("LR-Reusability", "Reusability", Nlr, "stay independent of the reflection model language", M, M, M,
     "engine is metamodel-generic but bundles name metamodel types"),
    ("LR-EaseOfUse", "Ease of Use", Nlr, "declarative notation with tool support", M, F, M,
     "textual declarative language with diagnostics, no graphical tooling"),
    ("FR-Consistency", "Consistency", Fr, "apply changes atomically and only when checks pass", M, F, F,
     "gate verifies post-conditions and invariants before commit; engine::tests::gate_failure_rolls_back"),
    ("FR-Incrementality", "Incrementality", Fr, "evaluate and apply changes incrementally", N, M, F,
     "event-anchored evaluation with periodic sweeps; acceptance criterion incremental-equals-full"),
    ("FR-Reversibility", "Reversibility", Fr, "undo performed model operations", N, M, F,
     "transactions with savepoints and inverse edits; acceptance criterion reversibility"),
    ("FR-Priorities", "Priorities", Fr, "handle urgent problems first", N, F, F,
     "results ordered by priority; engine::tests::higher_priority_fires_first"),
    ("FR-TimeScales", "Time Scales", Fr, "run analysis and planning at different rates", N, F, F,
     "fast and slow lanes with escalation; engine::tests::critical_result_escalates_to_decoupled"),
    ("FR-Flexibility", "Flexibility", Fr, "change adaptation models at runtime", N, F, F,
     "staged hot swap at tick boundaries; acceptance criterion hot-swap"),
];

/// Requirements by approach. Third-party cells are a frozen fixture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssessmentMatrix {
    pub requirements: Vec<Requirement>,
    /// Row-major: `cells[i][approach index]`.
    cells: Vec<[Cell; 3]>,
}

const STITCH_RATIONALE: &str = "published assessment";

impl AssessmentMatrix {
    pub fn fixture() -> Self {
        let mut requirements = Vec::new();
        let mut cells = Vec::new();
        for (id, name, category, summary, st, sd, own, why) in ROWS {
            requirements.push(Requirement {
                id,
                name,
                category,
                summary,
            });
            let cell = |level, r: &str| Cell {
                level,
                rationale: r.to_string(),
            };
            cells.push([cell(st, STITCH_RATIONALE), cell(sd, STITCH_RATIONALE), cell(own, why)]);
        }
        AssessmentMatrix { requirements, cells }
    }

    fn row(&self, requirement: &str) -> Result<usize, AssessError> {
        self.requirements
            .iter()
            .position(|r| r.id == requirement)
            .ok_or_else(|| AssessError::UnknownRequirement(requirement.to_string()))
    }

    pub fn cell(&self, approach: Approach, requirement: &str) -> Result<&Cell, AssessError> {
        let i = self.row(requirement)?;
        Ok(&self.cells[i][approach as usize])
    }

    pub fn lookup(&self, approach: Approach, requirement: &str) -> Result<SupportLevel, AssessError> {
        self.cell(approach, requirement).map(|c| c.level)
    }

    pub fn render(&self, format: Format, only: Option<Approach>) -> String {
        let approaches: Vec<Approach> = match only {
            Some(a) => vec![a],
            None => Approach::ALL.to_vec(),
        };
        match format {
            Format::Text => self.render_text(&approaches),
            Format::Csv => self.render_csv(&approaches),
        }
    }

    fn render_text(&self, approaches: &[Approach]) -> String {
        let mut out = format!("{:<22} {:<18}", "requirement", "category");
        for a in approaches {
            out.push_str(&format!(" {:<15}", a.as_str()));
        }
        out.push('\n');
        for (r, cells) in self.requirements.iter().zip(&self.cells) {
            out.push_str(&format!("{:<22} {:<18}", r.id, r.category.as_str()));
            for a in approaches {
                out.push_str(&format!(" {:<15}", cells[*a as usize].level.symbol()));
            }
            out.push('\n');
        }
        out.push_str("legend: -- no support, M medium support, F full support\n");
        if approaches.contains(&Approach::SelfAssessment) {
            out.push_str("\nself-assessment rationale:\n");
            for (r, cells) in self.requirements.iter().zip(&self.cells) {
                out.push_str(&format!(
                    "  {}: {}\n",
                    r.id,
                    cells[Approach::SelfAssessment as usize].rationale
                ));
            }
        }
        out
    }

    fn render_csv(&self, approaches: &[Approach]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["requirement".to_string(), "category".to_string()];
        header.extend(approaches.iter().map(|a| a.as_str().to_string()));
        w.write_record(&header).expect("in-memory write");
        for (r, cells) in self.requirements.iter().zip(&self.cells) {
            let mut rec = vec![r.id.to_string(), r.category.as_str().to_string()];
            rec.extend(approaches.iter().map(|a| cells[*a as usize].level.symbol().to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Parses CSV produced by [`AssessmentMatrix::render`] into
/// `(requirement, approach) -> level` rows.
pub fn parse_csv(text: &str) -> Result<Vec<(String, Approach, SupportLevel)>, AssessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| AssessError::Parse(e.to_string()))?.clone();
    let approaches: Vec<Approach> = header.iter().skip(2).map(str::parse).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| AssessError::Parse(e.to_string()))?;
        let id = rec.get(0).ok_or_else(|| AssessError::Parse("empty row".into()))?;
        for (i, a) in approaches.iter().enumerate() {
            let level = rec
                .get(i + 2)
                .ok_or_else(|| AssessError::Parse(format!("short row `{id}`")))?;
            out.push((id.to_string(), *a, level.parse()?));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_cells() {
        let m = AssessmentMatrix::fixture();
        assert_eq!(m.lookup(Approach::Stitch, "LR-Goals"), Ok(SupportLevel::None));
        assert_eq!(
            m.lookup(Approach::StoryDiagrams, "FR-Flexibility"),
            Ok(SupportLevel::Full)
        );
        assert_eq!(m.lookup(Approach::Stitch, "LR-Reusability"), Ok(SupportLevel::Medium));
    }

    #[test]
    fn unknown_ids() {
        let m = AssessmentMatrix::fixture();
        assert!(matches!(
            m.lookup(Approach::Stitch, "LR-Nope"),
            Err(AssessError::UnknownRequirement(_))
        ));
        assert!("acme".parse::<Approach>().is_err());
        assert!("html".parse::<Format>().is_err());
    }

    #[test]
    fn shape_and_categories() {
        let m = AssessmentMatrix::fixture();
        let count = |c| m.requirements.iter().filter(|r| r.category == c).count();
        assert_eq!((count(Flr), count(Nlr), count(Fr)), (11, 6, 6));
        let text = m.render(Format::Text, None);
        let rows = text
            .lines()
            .filter(|l| l.starts_with("LR-") || l.starts_with("FR-"))
            .count();
        assert_eq!(rows, 23);
        assert!(text.contains("legend: -- no support, M medium support, F full support"));
    }

    #[test]
    fn csv_round_trip() {
        let m = AssessmentMatrix::fixture();
        let rows = parse_csv(&m.render(Format::Csv, None)).unwrap();
        assert_eq!(rows.len(), 69);
        for (id, a, level) in rows {
            assert_eq!(m.lookup(a, &id), Ok(level));
        }
    }
}
