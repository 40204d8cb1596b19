//! Change events and evaluation results, both of which are annotated onto
//! reflection-model elements.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::pattern::Binding;
use super::value::Value;
use super::ElementId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    AttrChanged,
    NodeAdded,
    NodeRemoved,
    EdgeAdded,
    EdgeRemoved,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::AttrChanged,
        EventKind::NodeAdded,
        EventKind::NodeRemoved,
        EventKind::EdgeAdded,
        EventKind::EdgeRemoved,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::AttrChanged => "attr-changed",
            EventKind::NodeAdded => "node-added",
            EventKind::NodeRemoved => "node-removed",
            EventKind::EdgeAdded => "edge-added",
            EventKind::EdgeRemoved => "edge-removed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventSource {
    System,
    Adaptation,
}

/// A located notification of a runtime phenomenon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeEvent {
    pub event_id: u64,
    pub tick: u64,
    pub kind: EventKind,
    pub element_id: ElementId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub old_value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_value: Option<Value>,
    pub source: EventSource,
    /// Source and target of the edge for edge events, so a removed edge can
    /// still be located at its endpoints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<(ElementId, ElementId)>,
}

impl ChangeEvent {
    pub fn attr_changed(
        event_id: u64,
        tick: u64,
        element: impl Into<ElementId>,
        attr: impl Into<String>,
        old: Option<Value>,
        new: Option<Value>,
        source: EventSource,
    ) -> Self {
        ChangeEvent {
            event_id,
            tick,
            kind: EventKind::AttrChanged,
            element_id: element.into(),
            attribute_name: Some(attr.into()),
            old_value: old,
            new_value: new,
            source,
            endpoints: None,
        }
    }

    pub fn structural(
        event_id: u64,
        tick: u64,
        kind: EventKind,
        element: impl Into<ElementId>,
        source: EventSource,
    ) -> Self {
        ChangeEvent {
            event_id,
            tick,
            kind,
            element_id: element.into(),
            attribute_name: None,
            old_value: None,
            new_value: None,
            source,
            endpoints: None,
        }
    }

    pub fn with_endpoints(mut self, source: impl Into<ElementId>, target: impl Into<ElementId>) -> Self {
        self.endpoints = Some((source.into(), target.into()));
        self
    }
}

/// Outcome of checking one evaluation condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationResult {
    pub result_id: String,
    pub condition_id: String,
    pub priority: i64,
    pub tick: u64,
    pub violated: bool,
    pub bindings: Vec<Binding>,
    /// Element the evaluation was anchored at (incremental evaluation), or
    /// `None` for a full sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor_element_id: Option<ElementId>,
    /// Set when the condition could not be evaluated (quarantined).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Annotations attached to one element.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Annotations {
    pub events: Vec<ChangeEvent>,
    pub results: Vec<EvaluationResult>,
    /// The element no longer exists in the model.
    pub stale: bool,
}
