//! Causal connection between a [`SimSystem`] and its reflection model.
//!
//! Monitor direction: [`monitor_sync`] rewrites the model to the projection
//! of the system and reports every difference as an annotated event.
//! Execute direction: [`execute_sync`] maps a committed delta onto
//! [`Command`]s and runs them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use super::{Command, RoutingChange, SimError, SimSystem};
use crate::model::{
    edge_id, validate_conformance, ChangeEvent, EditOp, ElementId, EventKind, EventSource, Metamodel, Mode, ModelError,
    ReflectionModel, Value, Violation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyncError {
    #[error("model is not in descriptive mode")]
    NotDescriptive,
    #[error("projected model does not conform: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Conformance(Vec<Violation>),
    #[error("unmappable delta: {0}")]
    Unmappable(String),
    #[error("command failed: {0}")]
    Command(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Commands issued for a delta and the events they produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyncOutcome {
    pub commands: Vec<Command>,
    pub events: Vec<ChangeEvent>,
}

type EdgeKey = (String, ElementId, ElementId);

struct Projection {
    nodes: BTreeMap<ElementId, (&'static str, BTreeMap<String, Value>)>,
    edges: BTreeSet<EdgeKey>,
}

fn projection(sys: &SimSystem) -> Projection {
    let mut nodes = BTreeMap::new();
    let mut edges = BTreeSet::new();
    for (id, cap) in sys.servers() {
        nodes.insert(
            id.clone(),
            ("Server", BTreeMap::from([("capacity".to_string(), Value::Float(*cap))])),
        );
    }
    for (id, c) in sys.components() {
        let attrs = BTreeMap::from([
            ("ctype".to_string(), Value::from(c.ctype.as_str())),
            ("load".to_string(), Value::Float(c.load)),
            ("rt".to_string(), Value::Float(c.rt)),
            ("state".to_string(), Value::from(c.state.as_str())),
        ]);
        nodes.insert(id.clone(), ("Component", attrs));
        edges.insert(("deployedOn".to_string(), id.clone(), c.host.clone()));
    }
    for (a, b) in sys.connections() {
        edges.insert(("connects".to_string(), a.clone(), b.clone()));
    }
    Projection { nodes, edges }
}

/// Builds a fresh descriptive model mirroring `sys`.
pub fn project(sys: &SimSystem, mm: Arc<Metamodel>) -> Result<ReflectionModel, ModelError> {
    let p = projection(sys);
    let mut model = ReflectionModel::new(mm);
    let mut txn = model.begin_transaction()?;
    for (id, (ty, attrs)) in p.nodes {
        model.apply_edit(&mut txn, EditOp::add_node(id, ty, attrs))?;
    }
    for (ty, s, t) in p.edges {
        model.apply_edit(&mut txn, EditOp::add_edge(edge_id(&ty, &s, &t), ty, s, t))?;
    }
    model.commit(&mut txn)?;
    Ok(model)
}

/// Brings `model` in line with `sys`. Edges are matched by
/// `(type, source, target)` so existing edge ids are kept.
pub fn monitor_sync(sys: &mut SimSystem, model: &mut ReflectionModel) -> Result<Vec<ChangeEvent>, SyncError> {
    if model.mode() != Mode::Descriptive {
        return Err(SyncError::NotDescriptive);
    }
    let target = projection(sys);
    let current_edges: BTreeMap<EdgeKey, ElementId> = model
        .edges()
        .map(|(id, e)| ((e.edge_type.clone(), e.source.clone(), e.target.clone()), id.clone()))
        .collect();

    let mut ops = Vec::new();
    let mut diffs: Vec<Diff> = Vec::new();
    for (key, id) in &current_edges {
        if !target.edges.contains(key) {
            ops.push(model.remove_edge_op(id)?);
            diffs.push(Diff::structural(EventKind::EdgeRemoved, id).ends(&key.1, &key.2));
        }
    }
    let current_nodes: Vec<ElementId> = model.nodes().map(|(id, _)| id.clone()).collect();
    for id in &current_nodes {
        let keep = target
            .nodes
            .get(id)
            .is_some_and(|(ty, _)| model.node(id).is_some_and(|n| n.node_type == *ty));
        if !keep {
            ops.push(model.remove_node_op(id)?);
            diffs.push(Diff::structural(EventKind::NodeRemoved, id));
        }
    }
    for (id, (ty, attrs)) in &target.nodes {
        match model.node(id).filter(|n| n.node_type == *ty) {
            None => {
                ops.push(EditOp::add_node(id.clone(), *ty, attrs.clone()));
                diffs.push(Diff::structural(EventKind::NodeAdded, id));
            }
            Some(node) => {
                let names: BTreeSet<&String> = node.attrs.keys().chain(attrs.keys()).collect();
                for name in names {
                    let old = node.attrs.get(name);
                    let new = attrs.get(name);
                    if old != new {
                        ops.push(EditOp::set_attr(id.clone(), name.clone(), old.cloned(), new.cloned()));
                        diffs.push(Diff {
                            kind: EventKind::AttrChanged,
                            element: id.clone(),
                            attr: Some((name.clone(), old.cloned(), new.cloned())),
                            endpoints: None,
                        });
                    }
                }
            }
        }
    }
    for key in &target.edges {
        if !current_edges.contains_key(key) {
            let (ty, s, t) = key;
            let id = model.fresh_edge_id(ty, s, t);
            ops.push(EditOp::add_edge(id.clone(), ty.clone(), s.clone(), t.clone()));
            diffs.push(Diff::structural(EventKind::EdgeAdded, &id).ends(s, t));
        }
    }
    if ops.is_empty() {
        return Ok(Vec::new());
    }

    let mut txn = model.begin_transaction()?;
    for op in ops {
        if let Err(e) = model.apply_edit(&mut txn, op) {
            model.rollback(&mut txn)?;
            return Err(e.into());
        }
    }
    let violations = validate_conformance(model, model.metamodel());
    if !violations.is_empty() {
        model.rollback(&mut txn)?;
        return Err(SyncError::Conformance(violations));
    }
    model.commit(&mut txn)?;

    let tick = sys.clock();
    let mut events = Vec::with_capacity(diffs.len());
    for d in diffs {
        let eid = sys.next_event_id();
        let mut ev = match d.attr {
            Some((name, old, new)) => {
                ChangeEvent::attr_changed(eid, tick, d.element, name, old, new, EventSource::System)
            }
            None => ChangeEvent::structural(eid, tick, d.kind, d.element, EventSource::System),
        };
        ev.endpoints = d.endpoints;
        annotate_located(model, &ev)?;
        events.push(ev);
    }
    Ok(events)
}

/// Annotates at the element itself, or at a surviving edge endpoint when
/// the element is gone. Events on vanished nodes stay unannotated.
fn annotate_located(model: &mut ReflectionModel, ev: &ChangeEvent) -> Result<(), ModelError> {
    if model.contains(&ev.element_id) {
        return model.annotate_event(ev.clone());
    }
    if let Some((s, t)) = &ev.endpoints {
        for end in [s, t] {
            if model.contains(end) {
                let mut located = ev.clone();
                located.element_id = end.clone();
                return model.annotate_event(located);
            }
        }
    }
    Ok(())
}

struct Diff {
    kind: EventKind,
    element: ElementId,
    attr: Option<(String, Option<Value>, Option<Value>)>,
    endpoints: Option<(ElementId, ElementId)>,
}

impl Diff {
    fn structural(kind: EventKind, element: &str) -> Self {
        Diff {
            kind,
            element: element.to_string(),
            attr: None,
            endpoints: None,
        }
    }

    fn ends(mut self, s: &str, t: &str) -> Self {
        self.endpoints = Some((s.to_string(), t.to_string()));
        self
    }
}

/// Source component of a replica id `<src>#r<k>`.
fn replica_source(id: &str) -> Option<&str> {
    let (src, k) = id.rsplit_once("#r")?;
    (!src.is_empty() && !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit())).then_some(src)
}

/// Maps a committed delta to system commands without touching the system.
/// `sys` is consulted for the current host of replica sources.
pub fn translate_delta(delta: &[EditOp], sys: &SimSystem) -> Result<Vec<Command>, SyncError> {
    let mut used = vec![false; delta.len()];
    let mut commands = Vec::new();
    let unmappable = |op: &EditOp| SyncError::Unmappable(format!("{op:?}"));

    // Edges removed together with their component belong to its RemoveReplica.
    for op in delta {
        if let EditOp::RemoveNode { id, captured } = op {
            if captured.node_type != "Component" {
                continue;
            }
            for (j, other) in delta.iter().enumerate() {
                if let EditOp::RemoveEdge { captured: e, .. } = other {
                    if &e.source == id || &e.target == id {
                        used[j] = true;
                    }
                }
            }
        }
    }

    for i in 0..delta.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        match &delta[i] {
            EditOp::SetAttr { id, name, old, new } => {
                let restart = name == "state"
                    && old.as_ref().and_then(Value::as_str) == Some("FAILED")
                    && new.as_ref().and_then(Value::as_str) == Some("RUNNING");
                if !restart {
                    return Err(unmappable(&delta[i]));
                }
                commands.push(Command::Restart { component: id.clone() });
            }
            EditOp::AddNode { id, node_type, .. } if node_type == "Component" => {
                let src = replica_source(id).ok_or_else(|| unmappable(&delta[i]))?;
                let j = (0..delta.len())
                    .find(|&j| {
                        !used[j]
                            && matches!(&delta[j], EditOp::AddEdge { edge_type, source, .. }
                                if edge_type == "deployedOn" && source == id)
                    })
                    .ok_or_else(|| SyncError::Unmappable(format!("replica `{id}` has no deployment")))?;
                used[j] = true;
                let EditOp::AddEdge { target: server, .. } = &delta[j] else {
                    unreachable!("matched above")
                };
                commands.push(Command::AddReplica {
                    component: src.to_string(),
                    new_id: id.clone(),
                });
                let src_host = sys.component(src).map(|c| c.host.as_str());
                if src_host != Some(server.as_str()) {
                    commands.push(Command::Migrate {
                        component: id.clone(),
                        server: server.clone(),
                    });
                }
            }
            EditOp::RemoveNode { id, captured } if captured.node_type == "Component" => {
                commands.push(Command::RemoveReplica { component: id.clone() });
            }
            op if is_deploy(op) => {
                // A retarget is one removal plus one addition for the same component.
                let component = deploy_source(op).expect("deploy edge").to_string();
                let partner = (0..delta.len()).find(|&j| {
                    !used[j]
                        && is_deploy(&delta[j])
                        && std::mem::discriminant(&delta[j]) != std::mem::discriminant(&delta[i])
                        && deploy_source(&delta[j]) == Some(component.as_str())
                });
                let j = partner.ok_or_else(|| unmappable(&delta[i]))?;
                used[j] = true;
                let server = [&delta[i], &delta[j]]
                    .into_iter()
                    .find_map(|op| match op {
                        EditOp::AddEdge { target, .. } => Some(target.clone()),
                        _ => None,
                    })
                    .expect("one side adds");
                commands.push(Command::Migrate { component, server });
            }
            EditOp::AddEdge {
                edge_type,
                source,
                target,
                ..
            } if edge_type == "connects" => commands.push(Command::SetLoadRouting {
                from: source.clone(),
                to: target.clone(),
                change: RoutingChange::Add,
            }),
            EditOp::RemoveEdge { captured: e, .. } if e.edge_type == "connects" => {
                commands.push(Command::SetLoadRouting {
                    from: e.source.clone(),
                    to: e.target.clone(),
                    change: RoutingChange::Remove,
                })
            }
            other => return Err(unmappable(other)),
        }
    }
    Ok(commands)
}

fn is_deploy(op: &EditOp) -> bool {
    match op {
        EditOp::AddEdge { edge_type, .. } => edge_type == "deployedOn",
        EditOp::RemoveEdge { captured, .. } => captured.edge_type == "deployedOn",
        _ => false,
    }
}

fn deploy_source(op: &EditOp) -> Option<&str> {
    match op {
        EditOp::AddEdge { source, .. } => Some(source),
        EditOp::RemoveEdge { captured, .. } => Some(&captured.source),
        _ => None,
    }
}

/// Translates the whole delta first, then executes the commands in order.
/// Nothing is executed when any op is unmappable.
pub fn execute_sync(delta: &[EditOp], sys: &mut SimSystem) -> Result<SyncOutcome, SyncError> {
    let commands = translate_delta(delta, sys)?;
    let mut events = Vec::new();
    for cmd in &commands {
        events.extend(sys.execute_command(cmd)?);
    }
    Ok(SyncOutcome { commands, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::sim::{CompState, WorkloadSchedule};

    fn synced() -> (SimSystem, ReflectionModel) {
        let sys = SimSystem::shop(3);
        let model = project(&sys, fixture::shop_metamodel()).unwrap();
        (sys, model)
    }

    #[test]
    fn projection_of_shop_is_m0() {
        let (_, model) = synced();
        assert_eq!(model.digest(), fixture::m0().digest());
    }

    #[test]
    fn sync_is_a_fixpoint() {
        let (mut sys, mut model) = synced();
        sys.tick(&WorkloadSchedule::default());
        assert!(!monitor_sync(&mut sys, &mut model).unwrap().is_empty());
        assert_eq!(monitor_sync(&mut sys, &mut model).unwrap(), vec![]);
    }

    #[test]
    fn fault_yields_one_annotated_event() {
        let (mut sys, mut model) = synced();
        sys.inject_fault("C2").unwrap();
        // Clear the rt/load differences of the failed component first.
        let events = monitor_sync(&mut sys, &mut model).unwrap();
        let state: Vec<_> = events
            .iter()
            .filter(|e| e.attribute_name.as_deref() == Some("state"))
            .collect();
        assert_eq!(state.len(), 1);
        assert_eq!(state[0].element_id, "C2");
        assert_eq!(
            model.read_annotations("C2").events.len(),
            events.iter().filter(|e| e.element_id == "C2").count()
        );
        assert_eq!(model.attr("C2", "state"), Some(&Value::from("FAILED")));
    }

    #[test]
    fn only_state_event_when_fault_leaves_sensors_alone() {
        let (mut sys, mut model) = synced();
        // Fail C2 with its sensor values already at their failed readings.
        sys.inject_fault("C2").unwrap();
        let mut t = model.begin_transaction().unwrap();
        for (a, v) in [("rt", 0.0), ("load", 0.0)] {
            let op = model.set_attr_op("C2", a, v).unwrap();
            model.apply_edit(&mut t, op).unwrap();
        }
        model.commit(&mut t).unwrap();
        let events = monitor_sync(&mut sys, &mut model).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::AttrChanged);
        assert_eq!(events[0].element_id, "C2");
        assert_eq!(model.read_annotations("C2").events.len(), 1);
    }

    #[test]
    fn prescriptive_model_rejected() {
        let (mut sys, mut model) = synced();
        model.set_mode(Mode::Prescriptive);
        assert_eq!(monitor_sync(&mut sys, &mut model), Err(SyncError::NotDescriptive));
    }

    #[test]
    fn restart_delta_translates_and_round_trips() {
        let (mut sys, mut model) = synced();
        sys.inject_fault("C2").unwrap();
        monitor_sync(&mut sys, &mut model).unwrap();
        let mut t = model.begin_transaction().unwrap();
        let op = model.set_attr_op("C2", "state", "RUNNING").unwrap();
        model.apply_edit(&mut t, op).unwrap();
        let delta = model.commit(&mut t).unwrap();
        let post = model.digest();
        let out = execute_sync(&delta, &mut sys).unwrap();
        assert_eq!(out.commands, vec![Command::Restart { component: "C2".into() }]);
        assert_eq!(sys.component("C2").unwrap().state, CompState::Running);
        assert_eq!(monitor_sync(&mut sys, &mut model).unwrap(), vec![]);
        assert_eq!(model.digest(), post);
    }

    #[test]
    fn sensor_write_is_unmappable() {
        let (mut sys, model) = synced();
        let delta = vec![model.set_attr_op("C2", "rt", 1.0).unwrap()];
        assert!(matches!(execute_sync(&delta, &mut sys), Err(SyncError::Unmappable(_))));
        assert_eq!(execute_sync(&[], &mut sys).unwrap(), SyncOutcome::default());
    }

    #[test]
    fn replica_migration_and_routing_deltas() {
        let (sys, model) = synced();
        let mut attrs = model.node("C1").unwrap().attrs.clone();
        attrs.insert("load".into(), Value::Float(0.0));
        let delta = vec![
            EditOp::add_node("C1#r1", "Component", attrs),
            EditOp::add_edge("deployedOn:C1#r1->S1", "deployedOn", "C1#r1", "S1"),
            EditOp::add_edge("connects:C1#r1->C2", "connects", "C1#r1", "C2"),
            model.remove_edge_op("connects:C2->C3").unwrap(),
        ];
        assert_eq!(
            translate_delta(&delta, &sys).unwrap(),
            vec![
                Command::AddReplica {
                    component: "C1".into(),
                    new_id: "C1#r1".into()
                },
                Command::SetLoadRouting {
                    from: "C1#r1".into(),
                    to: "C2".into(),
                    change: RoutingChange::Add
                },
                Command::SetLoadRouting {
                    from: "C2".into(),
                    to: "C3".into(),
                    change: RoutingChange::Remove
                },
            ]
        );
        let delta = vec![
            model.remove_edge_op("deployedOn:C3->S1").unwrap(),
            EditOp::add_edge("deployedOn:C3->S2", "deployedOn", "C3", "S2"),
        ];
        assert_eq!(
            translate_delta(&delta, &sys).unwrap(),
            vec![Command::Migrate {
                component: "C3".into(),
                server: "S2".into()
            }]
        );
        let delta = vec![
            model.remove_edge_op("deployedOn:C3->S1").unwrap(),
            model.remove_edge_op("connects:C2->C3").unwrap(),
            model.remove_node_op("C3").unwrap(),
        ];
        assert_eq!(
            translate_delta(&delta, &sys).unwrap(),
            vec![Command::RemoveReplica { component: "C3".into() }]
        );
    }
}
