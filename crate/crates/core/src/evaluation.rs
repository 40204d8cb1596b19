//! Evaluation conditions and their full or event-anchored evaluation.
//!
//! A condition's pattern describes the bad situation: every match is one
//! violation instance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{match_pattern, ChangeEvent, ElementId, EvaluationResult, EventKind, Pattern, ReflectionModel};
use crate::purity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Fast,
    Slow,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Fast => "fast",
            Lane::Slow => "slow",
        }
    }
}

/// Event kind plus optional attribute filter, e.g. `(attr-changed, state)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub kind: EventKind,
    pub attribute: Option<String>,
}

impl Trigger {
    pub fn new(kind: EventKind, attribute: Option<&str>) -> Self {
        Trigger {
            kind,
            attribute: attribute.map(str::to_string),
        }
    }

    pub fn matches(&self, ev: &ChangeEvent) -> bool {
        self.kind == ev.kind
            && match &self.attribute {
                None => true,
                Some(a) => ev.attribute_name.as_deref() == Some(a.as_str()),
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationCondition {
    pub id: String,
    /// Higher is more critical.
    pub priority: i64,
    pub triggers: Vec<Trigger>,
    pub pattern: Pattern,
    pub lane: Lane,
    /// Quality or goal this condition explains; informational only.
    pub linked: Option<String>,
}

impl EvaluationCondition {
    pub fn triggered_by(&self, ev: &ChangeEvent) -> bool {
        self.triggers.iter().any(|t| t.matches(ev))
    }
}

fn quarantined(model: &ReflectionModel, cond: &EvaluationCondition) -> Option<String> {
    cond.pattern
        .check_types(model.metamodel())
        .and_then(|()| cond.pattern.validate())
        .err()
        .map(|e| e.to_string())
}

fn result(
    result_id: String,
    cond: &EvaluationCondition,
    tick: u64,
    anchor: Option<ElementId>,
    outcome: Result<Vec<crate::model::Binding>, String>,
) -> EvaluationResult {
    let (bindings, error) = match outcome {
        Ok(b) => (b, None),
        Err(e) => (Vec::new(), Some(e)),
    };
    EvaluationResult {
        result_id,
        condition_id: cond.id.clone(),
        priority: cond.priority,
        tick,
        violated: !bindings.is_empty(),
        bindings,
        anchor_element_id: anchor,
        error,
    }
}

/// Evaluates every condition over the whole model. Results come in
/// descending priority; a condition that cannot be evaluated yields an
/// error result instead of aborting the others.
pub fn evaluate_full(model: &ReflectionModel, conditions: &[EvaluationCondition], tick: u64) -> Vec<EvaluationResult> {
    purity::guarded_ref(model, "evaluate_full", |model| {
        let mut ordered: Vec<&EvaluationCondition> = conditions.iter().collect();
        ordered.sort_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id)));
        ordered
            .into_iter()
            .map(|c| {
                let outcome = match quarantined(model, c) {
                    Some(e) => Err(e),
                    None => match_pattern(model, &c.pattern, None).map_err(|e| e.to_string()),
                };
                result(format!("{tick}:{}", c.id), c, tick, None, outcome)
            })
            .collect()
    })
}

/// Nodes where an event can anchor a pattern whose anchor variable has
/// type `anchor_type`: the element itself or, for edge events, its
/// endpoints.
fn anchors_for(model: &ReflectionModel, ev: &ChangeEvent, anchor_type: &str) -> Vec<ElementId> {
    let mut candidates = vec![ev.element_id.clone()];
    if let Some((s, t)) = &ev.endpoints {
        candidates.push(s.clone());
        candidates.push(t.clone());
    }
    let mut seen = BTreeSet::new();
    candidates
        .into_iter()
        .filter(|id| model.node(id).is_some_and(|n| n.node_type == anchor_type))
        .filter(|id| seen.insert(id.clone()))
        .collect()
}

/// Evaluates only conditions triggered by `events`, anchored at the
/// events' locations. One result per (condition, anchor); ordered by
/// descending priority, then by the position of the first triggering event.
pub fn evaluate_incremental(
    model: &ReflectionModel,
    conditions: &[EvaluationCondition],
    events: &[ChangeEvent],
    tick: u64,
) -> Vec<EvaluationResult> {
    purity::guarded_ref(model, "evaluate_incremental", |model| {
        // (priority, event position, condition position, result)
        let mut keyed: Vec<(i64, usize, usize, EvaluationResult)> = Vec::new();
        for (ci, c) in conditions.iter().enumerate() {
            let mut done: BTreeSet<ElementId> = BTreeSet::new();
            let error = quarantined(model, c);
            for (ei, ev) in events.iter().enumerate() {
                if !c.triggered_by(ev) {
                    continue;
                }
                let id = format!("{tick}:{}:{}", c.id, ev.event_id);
                if let Some(e) = &error {
                    if done.insert(String::new()) {
                        keyed.push((c.priority, ei, ci, result(id, c, tick, None, Err(e.clone()))));
                    }
                    continue;
                }
                let Some(anchor_type) = c.pattern.anchor_type() else {
                    continue;
                };
                for anchor in anchors_for(model, ev, anchor_type) {
                    if !done.insert(anchor.clone()) {
                        continue;
                    }
                    let outcome = match_pattern(model, &c.pattern, Some(&anchor)).map_err(|e| e.to_string());
                    keyed.push((c.priority, ei, ci, result(id.clone(), c, tick, Some(anchor), outcome)));
                }
            }
        }
        keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        keyed.into_iter().map(|k| k.3).collect()
    })
}

/// Outcome of publishing results onto the model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Publication {
    pub annotated: usize,
    /// Violated results whose location vanished before publishing.
    pub stale: usize,
}

/// Where a result is annotated: its anchor, or for sweep results the first
/// element of the first binding.
pub fn result_location(r: &EvaluationResult) -> Option<&ElementId> {
    r.anchor_element_id
        .as_ref()
        .or_else(|| r.bindings.first().and_then(|b| b.values().next()))
}

/// Annotates every violated result at its location.
pub fn annotate_and_publish(model: &mut ReflectionModel, results: &[EvaluationResult]) -> Publication {
    let mut out = Publication::default();
    for r in results.iter().filter(|r| r.violated) {
        match result_location(r) {
            Some(loc) if model.contains(loc) => {
                let loc = loc.clone();
                model.annotate_result(&loc, r.clone()).expect("location exists");
                out.annotated += 1;
            }
            _ => out.stale += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::model::{Binding, CmpOp, EventSource, PatternNode, Predicate};

    fn failed_comp() -> EvaluationCondition {
        EvaluationCondition {
            id: "FailedComp".into(),
            priority: 10,
            triggers: vec![Trigger::new(EventKind::AttrChanged, Some("state"))],
            pattern: Pattern::new()
                .node(
                    "c",
                    PatternNode::new("Component").with(Predicate::new("state", CmpOp::Eq, "FAILED")),
                )
                .anchored("c"),
            lane: Lane::Fast,
            linked: None,
        }
    }

    fn high_rt() -> EvaluationCondition {
        EvaluationCondition {
            id: "HighRT".into(),
            priority: 5,
            triggers: vec![Trigger::new(EventKind::AttrChanged, Some("rt"))],
            pattern: Pattern::new()
                .node(
                    "c",
                    PatternNode::new("Component").with(Predicate::new("rt", CmpOp::Gt, 500.0)),
                )
                .anchored("c"),
            lane: Lane::Slow,
            linked: Some("perf".into()),
        }
    }

    fn fail_c2(m: &mut ReflectionModel) -> ChangeEvent {
        let mut t = m.begin_transaction().unwrap();
        let op = m.set_attr_op("C2", "state", "FAILED").unwrap();
        m.apply_edit(&mut t, op).unwrap();
        m.commit(&mut t).unwrap();
        ChangeEvent::attr_changed(
            1,
            1,
            "C2",
            "state",
            Some("RUNNING".into()),
            Some("FAILED".into()),
            EventSource::System,
        )
    }

    #[test]
    fn full_sweep_orders_by_priority() {
        let m = fixture::m0();
        let before = m.digest();
        let rs = evaluate_full(&m, &[high_rt(), failed_comp()], 0);
        let ids: Vec<_> = rs.iter().map(|r| r.condition_id.as_str()).collect();
        assert_eq!(ids, ["FailedComp", "HighRT"]);
        assert!(rs.iter().all(|r| !r.violated));
        assert_eq!(m.digest(), before);
    }

    #[test]
    fn full_sweep_finds_failure() {
        let mut m = fixture::m0();
        fail_c2(&mut m);
        let rs = evaluate_full(&m, &[failed_comp()], 1);
        assert!(rs[0].violated);
        assert_eq!(
            rs[0].bindings,
            vec![Binding::from([("c".to_string(), "C2".to_string())])]
        );
    }

    #[test]
    fn incremental_anchors_at_event() {
        let mut m = fixture::m0();
        assert!(evaluate_incremental(&m, &[failed_comp(), high_rt()], &[], 1).is_empty());
        let ev = fail_c2(&mut m);
        let rs = evaluate_incremental(&m, &[failed_comp(), high_rt()], &[ev], 1);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].anchor_element_id.as_deref(), Some("C2"));
        assert!(rs[0].violated);
    }

    #[test]
    fn broken_condition_is_quarantined() {
        let m = fixture::m0();
        let mut bad = failed_comp();
        bad.id = "Typo".into();
        bad.priority = 99;
        bad.pattern = Pattern::new().node("c", PatternNode::new("Cmponent")).anchored("c");
        let rs = evaluate_full(&m, &[bad, failed_comp()], 0);
        assert!(rs[0].error.is_some());
        assert!(!rs[0].violated);
        assert!(rs[1].error.is_none());
    }

    #[test]
    fn publish_counts_and_skips_stale() {
        let mut m = fixture::m0();
        let ev = fail_c2(&mut m);
        let none = evaluate_full(&m, &[high_rt()], 1);
        assert_eq!(annotate_and_publish(&mut m, &none), Publication::default());
        let rs = evaluate_incremental(&m, &[failed_comp()], &[ev], 1);
        assert_eq!(annotate_and_publish(&mut m, &rs).annotated, 1);
        assert_eq!(m.read_annotations("C2").results.len(), 1);

        let mut t = m.begin_transaction().unwrap();
        for e in m.incident_edges("C2") {
            let op = m.remove_edge_op(&e).unwrap();
            m.apply_edit(&mut t, op).unwrap();
        }
        let op = m.remove_node_op("C2").unwrap();
        m.apply_edit(&mut t, op).unwrap();
        m.commit(&mut t).unwrap();
        assert_eq!(
            annotate_and_publish(&mut m, &rs),
            Publication { annotated: 0, stale: 1 }
        );
    }
}
