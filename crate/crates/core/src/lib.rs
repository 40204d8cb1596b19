//! Runtime for adaptation models over a reflection model of a running
//! system.
//!
//! A [`model::ReflectionModel`] mirrors the managed system ([`sim`]) through
//! a causal connection. Evaluation conditions ([`evaluation`]) read it and
//! annotate violations, objectives ([`objectives`]) score it, and adaptation
//! options ([`change`]) edit it inside transactions that are gate-checked
//! before being enacted. [`engine`] drives both feedback-loop styles: a
//! coupled rule engine and a decoupled analyze/plan/execute loop. Bundles of
//! all of these are authored in the `.adm` language ([`adm`]).

pub mod adm;
pub mod change;
pub mod engine;
pub mod evaluation;
pub mod fixture;
pub mod model;
pub mod num;
pub mod objectives;
pub mod purity;
pub mod sim;

/// Scalar for utilities and planner scores. Objective functions are generic
/// over [`num::Real`]; the engine fixes this choice.
pub type Utility = f64;

pub use adm::{compile, AdaptationModel, Diagnostic};
pub use engine::{Engine, EngineError, EngineMode, PlannerConfig};
pub use model::{Metamodel, ReflectionModel};
pub use num::Real;
pub use sim::SimSystem;
