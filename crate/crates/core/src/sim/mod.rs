//! Deterministic simulated component system and its causal connection to a
//! reflection model.
//!
//! Response time of a running component is
//! `baseRt × (1 + serverLoad / capacity)`, where `serverLoad` sums the loads
//! of running components on the same server. Failed components serve no
//! load and report `rt = 0`.

mod causal;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{edge_id, ChangeEvent, EventKind, EventSource, Value};

pub use causal::{execute_sync, monitor_sync, project, translate_delta, SyncError, SyncOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("invalid command: {0}")]
    Invalid(String),
    #[error("component `{0}` has already failed")]
    AlreadyFailed(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompState {
    #[serde(rename = "RUNNING")]
    Running,
    #[serde(rename = "FAILED")]
    Failed,
}

impl CompState {
    pub fn as_str(self) -> &'static str {
        match self {
            CompState::Running => "RUNNING",
            CompState::Failed => "FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimComponent {
    pub ctype: String,
    pub state: CompState,
    pub base_rt: f64,
    pub rt: f64,
    pub load: f64,
    pub host: String,
}

impl SimComponent {
    pub fn is_running(&self) -> bool {
        self.state == CompState::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingChange {
    Add,
    Remove,
}

/// System-level actuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "camelCase")]
pub enum Command {
    Restart {
        component: String,
    },
    AddReplica {
        component: String,
        new_id: String,
    },
    RemoveReplica {
        component: String,
    },
    Migrate {
        component: String,
        server: String,
    },
    SetLoadRouting {
        from: String,
        to: String,
        change: RoutingChange,
    },
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Restart { component } => write!(f, "Restart({component})"),
            Command::AddReplica { component, new_id } => write!(f, "AddReplica({component}, {new_id})"),
            Command::RemoveReplica { component } => write!(f, "RemoveReplica({component})"),
            Command::Migrate { component, server } => write!(f, "Migrate({component}, {server})"),
            Command::SetLoadRouting { from, to, change } => write!(f, "SetLoadRouting({from}, {to}, {change:?})"),
        }
    }
}

/// Per-tick load assignments and scheduled faults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSchedule {
    /// tick -> component -> load from that tick on.
    #[serde(default)]
    pub entries: BTreeMap<u64, BTreeMap<String, f64>>,
    #[serde(default)]
    pub faults: Vec<FaultInjection>,
    /// Relative uniform noise applied to scheduled loads, drawn from the
    /// seeded generator. Zero disables it.
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub tick: u64,
    pub component: String,
}

impl WorkloadSchedule {
    pub fn set_load(&mut self, tick: u64, component: &str, load: f64) {
        self.entries
            .entry(tick)
            .or_default()
            .insert(component.to_string(), load);
    }

    pub fn fault(&mut self, tick: u64, component: &str) {
        self.faults.push(FaultInjection {
            tick,
            component: component.to_string(),
        });
    }
}

/// JSON form of the initial system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub servers: Vec<ServerDoc>,
    pub components: Vec<ComponentDoc>,
    #[serde(default)]
    pub connections: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerDoc {
    pub id: String,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentDoc {
    pub id: String,
    pub ctype: String,
    pub base_rt: f64,
    #[serde(default)]
    pub load: f64,
    pub host: String,
    #[serde(default = "running")]
    pub state: CompState,
    /// Initial response time; defaults to `baseRt`.
    #[serde(default)]
    pub rt: Option<f64>,
}

fn running() -> CompState {
    CompState::Running
}

#[derive(Debug, Clone)]
pub struct SimSystem {
    servers: BTreeMap<String, f64>,
    components: BTreeMap<String, SimComponent>,
    connections: BTreeSet<(String, String)>,
    clock: u64,
    seed: u64,
    rng: ChaCha8Rng,
    next_event_id: u64,
}

type AttrSnapshot = BTreeMap<String, (f64, f64, CompState)>;

impl SimSystem {
    pub fn new(doc: &SystemDoc, seed: u64) -> Result<Self, SimError> {
        let mut servers = BTreeMap::new();
        for s in &doc.servers {
            if s.capacity <= 0.0 {
                return Err(SimError::InvalidSystem(format!("server `{}` needs capacity > 0", s.id)));
            }
            if servers.insert(s.id.clone(), s.capacity).is_some() {
                return Err(SimError::InvalidSystem(format!("duplicate server `{}`", s.id)));
            }
        }
        let mut components = BTreeMap::new();
        for c in &doc.components {
            if !servers.contains_key(&c.host) {
                return Err(SimError::InvalidSystem(format!(
                    "`{}` hosted on unknown server `{}`",
                    c.id, c.host
                )));
            }
            if servers.contains_key(&c.id) || components.contains_key(&c.id) {
                return Err(SimError::InvalidSystem(format!("duplicate id `{}`", c.id)));
            }
            let failed = c.state == CompState::Failed;
            components.insert(
                c.id.clone(),
                SimComponent {
                    ctype: c.ctype.clone(),
                    state: c.state,
                    base_rt: c.base_rt,
                    rt: if failed { 0.0 } else { c.rt.unwrap_or(c.base_rt) },
                    load: if failed { 0.0 } else { c.load },
                    host: c.host.clone(),
                },
            );
        }
        let mut connections = BTreeSet::new();
        for (a, b) in &doc.connections {
            for end in [a, b] {
                if !components.contains_key(end) {
                    return Err(SimError::InvalidSystem(format!(
                        "connection references unknown `{end}`"
                    )));
                }
            }
            connections.insert((a.clone(), b.clone()));
        }
        Ok(SimSystem {
            servers,
            components,
            connections,
            clock: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_event_id: 1,
        })
    }

    /// The simulated counterpart of the shop fixture M0.
    pub fn shop(seed: u64) -> Self {
        let doc = SystemDoc {
            servers: vec![ServerDoc {
                id: "S1".into(),
                capacity: 100.0,
            }],
            components: [("C1", "Shop", 200.0), ("C2", "Auth", 300.0), ("C3", "DB", 250.0)]
                .into_iter()
                .map(|(id, ctype, base_rt)| ComponentDoc {
                    id: id.into(),
                    ctype: ctype.into(),
                    base_rt,
                    load: 10.0,
                    host: "S1".into(),
                    state: CompState::Running,
                    rt: None,
                })
                .collect(),
            connections: vec![("C1".into(), "C2".into()), ("C2".into(), "C3".into())],
        };
        SimSystem::new(&doc, seed).expect("shop system is valid")
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn servers(&self) -> &BTreeMap<String, f64> {
        &self.servers
    }

    pub fn components(&self) -> &BTreeMap<String, SimComponent> {
        &self.components
    }

    pub fn component(&self, id: &str) -> Option<&SimComponent> {
        self.components.get(id)
    }

    pub fn connections(&self) -> &BTreeSet<(String, String)> {
        &self.connections
    }

    pub fn total_load(&self) -> f64 {
        self.components.values().map(|c| c.load).sum()
    }

    /// Share of components currently running.
    pub fn availability(&self) -> f64 {
        if self.components.is_empty() {
            return 0.0;
        }
        let up = self.components.values().filter(|c| c.is_running()).count();
        up as f64 / self.components.len() as f64
    }

    pub fn next_event_id(&mut self) -> u64 {
        let id = self.next_event_id;
        self.next_event_id += 1;
        id
    }

    fn snapshot(&self) -> AttrSnapshot {
        self.components
            .iter()
            .map(|(id, c)| (id.clone(), (c.load, c.rt, c.state)))
            .collect()
    }

    /// One event per attribute that differs from `before`, for components
    /// present in both snapshots; ordered by component id then attribute.
    fn diff_events(&mut self, before: &AttrSnapshot, source: EventSource) -> Vec<ChangeEvent> {
        let mut changes = Vec::new();
        for (id, c) in &self.components {
            let Some(&(load, rt, state)) = before.get(id) else {
                continue;
            };
            if load != c.load {
                changes.push((id.clone(), "load", Value::Float(load), Value::Float(c.load)));
            }
            if rt != c.rt {
                changes.push((id.clone(), "rt", Value::Float(rt), Value::Float(c.rt)));
            }
            if state != c.state {
                changes.push((id.clone(), "state", state.as_str().into(), c.state.as_str().into()));
            }
        }
        changes
            .into_iter()
            .map(|(id, attr, old, new)| {
                let eid = self.next_event_id();
                ChangeEvent::attr_changed(eid, self.clock, id, attr, Some(old), Some(new), source)
            })
            .collect()
    }

    fn structural_event(&mut self, kind: EventKind, element: String) -> ChangeEvent {
        let eid = self.next_event_id();
        ChangeEvent::structural(eid, self.clock, kind, element, EventSource::Adaptation)
    }

    fn recompute_rt(&mut self) {
        let mut server_load: BTreeMap<&str, f64> = BTreeMap::new();
        for c in self.components.values().filter(|c| c.is_running()) {
            *server_load.entry(c.host.as_str()).or_default() += c.load;
        }
        let rts: Vec<(String, f64)> = self
            .components
            .iter()
            .map(|(id, c)| {
                let rt = if c.is_running() {
                    let cap = self.servers[&c.host];
                    let sl = server_load.get(c.host.as_str()).copied().unwrap_or(0.0);
                    c.base_rt * (1.0 + sl / cap)
                } else {
                    0.0
                };
                (id.clone(), rt)
            })
            .collect();
        for (id, rt) in rts {
            self.components.get_mut(&id).expect("own component").rt = rt;
        }
    }

    /// Running components of `ctype`, excluding `except`.
    fn running_peers(&self, ctype: &str, except: &str) -> Vec<String> {
        self.components
            .iter()
            .filter(|(id, c)| c.ctype == ctype && c.is_running() && id.as_str() != except)
            .map(|(id, _)| id.clone())
            .collect()
    }

    fn spread_load(&mut self, onto: &[String], load: f64) {
        if onto.is_empty() {
            return;
        }
        let share = load / onto.len() as f64;
        for id in onto {
            self.components.get_mut(id).expect("peer exists").load += share;
        }
    }

    /// Marks a component failed; its load moves to running peers of the
    /// same type, or is dropped when there are none.
    fn fail(&mut self, id: &str) {
        let (ctype, load) = {
            let c = self.components.get_mut(id).expect("caller checked");
            let load = c.load;
            c.state = CompState::Failed;
            c.load = 0.0;
            c.rt = 0.0;
            (c.ctype.clone(), load)
        };
        let peers = self.running_peers(&ctype, id);
        self.spread_load(&peers, load);
    }

    /// Advances the clock by one tick and applies the schedule.
    pub fn tick(&mut self, schedule: &WorkloadSchedule) -> Vec<ChangeEvent> {
        self.clock += 1;
        let t = self.clock;
        let before = self.snapshot();
        if let Some(loads) = schedule.entries.get(&t) {
            for (id, &load) in loads {
                let noise = if schedule.jitter > 0.0 {
                    1.0 + schedule.jitter * self.rng.gen_range(-1.0..=1.0)
                } else {
                    1.0
                };
                if let Some(c) = self.components.get_mut(id) {
                    if c.is_running() {
                        c.load = (load * noise).max(0.0);
                    }
                }
            }
        }
        for f in schedule.faults.iter().filter(|f| f.tick == t) {
            if self.components.get(&f.component).is_some_and(|c| c.is_running()) {
                self.fail(&f.component);
            }
        }
        self.recompute_rt();
        self.diff_events(&before, EventSource::System)
    }

    pub fn inject_fault(&mut self, id: &str) -> Result<ChangeEvent, SimError> {
        let c = self
            .components
            .get(id)
            .ok_or_else(|| SimError::UnknownTarget(id.to_string()))?;
        if !c.is_running() {
            return Err(SimError::AlreadyFailed(id.to_string()));
        }
        self.fail(id);
        let eid = self.next_event_id();
        Ok(ChangeEvent::attr_changed(
            eid,
            self.clock,
            id,
            "state",
            Some("RUNNING".into()),
            Some("FAILED".into()),
            EventSource::System,
        ))
    }

    /// Applies a command immediately. Derived response times are refreshed
    /// on the next tick.
    pub fn execute_command(&mut self, cmd: &Command) -> Result<Vec<ChangeEvent>, SimError> {
        let before = self.snapshot();
        let mut structural = Vec::new();
        match cmd {
            Command::Restart { component } => {
                let c = self.component_mut(component)?;
                if c.is_running() {
                    return Err(SimError::Invalid(format!("`{component}` is already running")));
                }
                c.state = CompState::Running;
            }
            Command::AddReplica { component, new_id } => {
                let src = self
                    .components
                    .get(component)
                    .ok_or_else(|| SimError::UnknownTarget(component.clone()))?
                    .clone();
                if self.components.contains_key(new_id) || self.servers.contains_key(new_id) {
                    return Err(SimError::Invalid(format!("id `{new_id}` already in use")));
                }
                let mut group = self.running_peers(&src.ctype, "");
                let total: f64 = group.iter().map(|id| self.components[id].load).sum();
                self.components.insert(
                    new_id.clone(),
                    SimComponent {
                        ctype: src.ctype.clone(),
                        state: CompState::Running,
                        base_rt: src.base_rt,
                        rt: src.rt,
                        load: 0.0,
                        host: src.host.clone(),
                    },
                );
                group.push(new_id.clone());
                let share = total / group.len() as f64;
                for id in &group {
                    self.components.get_mut(id).expect("group member").load = share;
                }
                structural.push(self.structural_event(EventKind::NodeAdded, new_id.clone()));
                let e = self
                    .structural_event(EventKind::EdgeAdded, edge_id("deployedOn", new_id, &src.host))
                    .with_endpoints(new_id.clone(), src.host.clone());
                structural.push(e);
            }
            Command::RemoveReplica { component } => {
                let c = self
                    .components
                    .get(component)
                    .ok_or_else(|| SimError::UnknownTarget(component.clone()))?
                    .clone();
                let same_type = self.components.values().filter(|o| o.ctype == c.ctype).count();
                if same_type <= 1 {
                    return Err(SimError::Invalid(format!(
                        "`{component}` is the last `{}` instance",
                        c.ctype
                    )));
                }
                let mut removed_edges = vec![(
                    edge_id("deployedOn", component, &c.host),
                    component.clone(),
                    c.host.clone(),
                )];
                let conns: Vec<(String, String)> = self
                    .connections
                    .iter()
                    .filter(|(a, b)| a == component || b == component)
                    .cloned()
                    .collect();
                for (a, b) in conns {
                    self.connections.remove(&(a.clone(), b.clone()));
                    removed_edges.push((edge_id("connects", &a, &b), a, b));
                }
                removed_edges.sort();
                self.components.remove(component);
                let peers = self.running_peers(&c.ctype, component);
                self.spread_load(&peers, c.load);
                for (id, a, b) in removed_edges {
                    let e = self.structural_event(EventKind::EdgeRemoved, id).with_endpoints(a, b);
                    structural.push(e);
                }
                structural.push(self.structural_event(EventKind::NodeRemoved, component.clone()));
            }
            Command::Migrate { component, server } => {
                if !self.servers.contains_key(server) {
                    return Err(SimError::UnknownTarget(server.clone()));
                }
                let c = self.component_mut(component)?;
                if &c.host == server {
                    return Err(SimError::Invalid(format!("`{component}` already runs on `{server}`")));
                }
                let old = std::mem::replace(&mut c.host, server.clone());
                let e = self
                    .structural_event(EventKind::EdgeRemoved, edge_id("deployedOn", component, &old))
                    .with_endpoints(component.clone(), old);
                structural.push(e);
                let e = self
                    .structural_event(EventKind::EdgeAdded, edge_id("deployedOn", component, server))
                    .with_endpoints(component.clone(), server.clone());
                structural.push(e);
            }
            Command::SetLoadRouting { from, to, change } => {
                for end in [from, to] {
                    if !self.components.contains_key(end) {
                        return Err(SimError::UnknownTarget(end.clone()));
                    }
                }
                let key = (from.clone(), to.clone());
                let kind = match change {
                    RoutingChange::Add => {
                        if !self.connections.insert(key) {
                            return Err(SimError::Invalid(format!("`{from}` already routes to `{to}`")));
                        }
                        EventKind::EdgeAdded
                    }
                    RoutingChange::Remove => {
                        if !self.connections.remove(&key) {
                            return Err(SimError::Invalid(format!("`{from}` does not route to `{to}`")));
                        }
                        EventKind::EdgeRemoved
                    }
                };
                let e = self
                    .structural_event(kind, edge_id("connects", from, to))
                    .with_endpoints(from.clone(), to.clone());
                structural.push(e);
            }
        }
        let mut events = structural;
        events.extend(self.diff_events(&before, EventSource::Adaptation));
        Ok(events)
    }

    fn component_mut(&mut self, id: &str) -> Result<&mut SimComponent, SimError> {
        self.components
            .get_mut(id)
            .ok_or_else(|| SimError::UnknownTarget(id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_tick_scales_base_rt() {
        let mut sys = SimSystem::shop(7);
        sys.tick(&WorkloadSchedule::default());
        // serverLoad 30 on capacity 100.
        for (id, base) in [("C1", 200.0), ("C2", 300.0), ("C3", 250.0)] {
            let rt = sys.component(id).unwrap().rt;
            assert!((rt - base * 1.3).abs() < 1e-9, "{id}: {rt}");
        }
        assert_eq!(sys.component("C1").unwrap().rt, 260.0);
    }

    #[test]
    fn scheduled_fault_emits_state_event_on_its_tick() {
        let mut sys = SimSystem::shop(1);
        let mut sched = WorkloadSchedule::default();
        sched.fault(3, "C2");
        for t in 1..=3 {
            let events = sys.tick(&sched);
            let state_events: Vec<_> = events
                .iter()
                .filter(|e| e.attribute_name.as_deref() == Some("state"))
                .collect();
            if t < 3 {
                assert!(state_events.is_empty());
            } else {
                assert_eq!(state_events.len(), 1);
                let e = state_events[0];
                assert_eq!((e.element_id.as_str(), e.tick), ("C2", 3));
                assert_eq!(e.old_value, Some("RUNNING".into()));
                assert_eq!(e.new_value, Some("FAILED".into()));
            }
        }
    }

    #[test]
    fn equal_seed_and_schedule_give_equal_streams() {
        let mut sched = WorkloadSchedule {
            jitter: 0.2,
            ..Default::default()
        };
        for t in 1..=20 {
            sched.set_load(t, "C1", 10.0 + t as f64);
        }
        sched.fault(9, "C3");
        let run = |seed| {
            let mut sys = SimSystem::shop(seed);
            (1..=20).flat_map(|_| sys.tick(&sched)).collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn restart_failed_component() {
        let mut sys = SimSystem::shop(1);
        sys.inject_fault("C2").unwrap();
        let events = sys
            .execute_command(&Command::Restart { component: "C2".into() })
            .unwrap();
        assert_eq!(sys.component("C2").unwrap().state, CompState::Running);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].attribute_name.as_deref(), Some("state"));
        assert_eq!(events[0].source, EventSource::Adaptation);
    }

    #[test]
    fn add_replica_conserves_load() {
        let mut sys = SimSystem::shop(1);
        let total = sys.total_load();
        let events = sys
            .execute_command(&Command::AddReplica {
                component: "C1".into(),
                new_id: "C1#r1".into(),
            })
            .unwrap();
        let kinds: Vec<_> = events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds[..2], [EventKind::NodeAdded, EventKind::EdgeAdded]);
        assert_eq!(sys.component("C1").unwrap().load, 5.0);
        assert_eq!(sys.component("C1#r1").unwrap().load, 5.0);
        assert!((sys.total_load() - total).abs() < 1e-9);
    }

    #[test]
    fn command_errors() {
        let mut sys = SimSystem::shop(1);
        assert_eq!(
            sys.execute_command(&Command::Restart {
                component: "nope".into()
            }),
            Err(SimError::UnknownTarget("nope".into()))
        );
        assert!(matches!(
            sys.execute_command(&Command::RemoveReplica { component: "C1".into() }),
            Err(SimError::Invalid(_))
        ));
    }

    #[test]
    fn inject_fault_contract() {
        let mut sys = SimSystem::shop(1);
        let e = sys.inject_fault("C2").unwrap();
        assert_eq!(e.new_value, Some("FAILED".into()));
        assert_eq!(sys.inject_fault("C2"), Err(SimError::AlreadyFailed("C2".into())));
        assert!(matches!(sys.inject_fault("C9"), Err(SimError::UnknownTarget(_))));
        let events = sys
            .execute_command(&Command::Restart { component: "C2".into() })
            .unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(sys.component("C2").unwrap().state, CompState::Running);
    }

    #[test]
    fn fault_moves_load_to_running_replica() {
        let mut sys = SimSystem::shop(1);
        sys.execute_command(&Command::AddReplica {
            component: "C2".into(),
            new_id: "C2#r1".into(),
        })
        .unwrap();
        let total = sys.total_load();
        sys.inject_fault("C2").unwrap();
        assert_eq!(sys.component("C2#r1").unwrap().load, 10.0);
        assert!((sys.total_load() - total).abs() < 1e-9);
    }
}
