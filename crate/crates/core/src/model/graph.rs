use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::annotation::{Annotations, ChangeEvent, EvaluationResult};
use super::metamodel::Metamodel;
use super::value::Value;
use super::{ElementId, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    #[serde(rename = "type")]
    pub node_type: String,
    pub attrs: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(rename = "type")]
    pub edge_type: String,
    pub source: ElementId,
    pub target: ElementId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Mirrors the current state of the running system.
    Descriptive,
    /// A candidate future state explored during planning.
    Prescriptive,
}

/// Typed attributed graph mirroring the managed system.
///
/// All mutation goes through [`Transaction`](super::Transaction)s; the
/// model tracks at most one open transaction at a time.
#[derive(Debug, Clone)]
pub struct ReflectionModel {
    metamodel: Arc<Metamodel>,
    pub(super) nodes: BTreeMap<ElementId, Node>,
    pub(super) edges: BTreeMap<ElementId, Edge>,
    mode: Mode,
    event_annotations: BTreeMap<ElementId, Vec<ChangeEvent>>,
    result_annotations: BTreeMap<ElementId, Vec<EvaluationResult>>,
    pub(super) by_type: BTreeMap<String, BTreeSet<ElementId>>,
    pub(super) out_edges: BTreeMap<ElementId, BTreeSet<ElementId>>,
    pub(super) in_edges: BTreeMap<ElementId, BTreeSet<ElementId>>,
    pub(super) open_txn: Option<u64>,
    pub(super) next_txn_id: u64,
}

impl ReflectionModel {
    pub fn new(metamodel: Arc<Metamodel>) -> Self {
        ReflectionModel {
            metamodel,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            mode: Mode::Descriptive,
            event_annotations: BTreeMap::new(),
            result_annotations: BTreeMap::new(),
            by_type: BTreeMap::new(),
            out_edges: BTreeMap::new(),
            in_edges: BTreeMap::new(),
            open_txn: None,
            next_txn_id: 1,
        }
    }

    pub fn metamodel(&self) -> &Arc<Metamodel> {
        &self.metamodel
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&ElementId, &Node)> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&ElementId, &Edge)> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id) || self.edges.contains_key(id)
    }

    pub fn attr(&self, node: &str, attr: &str) -> Option<&Value> {
        self.nodes.get(node)?.attrs.get(attr)
    }

    /// Ids of nodes of the given type, in id order.
    pub fn nodes_of_type<'a>(&'a self, node_type: &str) -> impl Iterator<Item = &'a ElementId> + 'a {
        self.by_type.get(node_type).into_iter().flatten()
    }

    /// Ids of edges leaving `node`, in id order. Includes dangling edges.
    pub fn outgoing<'a>(&'a self, node: &str) -> impl Iterator<Item = (&'a ElementId, &'a Edge)> + 'a {
        self.out_edges
            .get(node)
            .into_iter()
            .flatten()
            .filter_map(|id| self.edges.get_key_value(id))
    }

    pub fn incoming<'a>(&'a self, node: &str) -> impl Iterator<Item = (&'a ElementId, &'a Edge)> + 'a {
        self.in_edges
            .get(node)
            .into_iter()
            .flatten()
            .filter_map(|id| self.edges.get_key_value(id))
    }

    /// Edge ids touching `node` in either direction, sorted and deduplicated.
    pub fn incident_edges(&self, node: &str) -> Vec<ElementId> {
        let mut ids: BTreeSet<ElementId> = BTreeSet::new();
        ids.extend(self.out_edges.get(node).into_iter().flatten().cloned());
        ids.extend(self.in_edges.get(node).into_iter().flatten().cloned());
        ids.into_iter().collect()
    }

    pub fn has_edge(&self, source: &str, edge_type: &str, target: &str) -> bool {
        self.outgoing(source)
            .any(|(_, e)| e.edge_type == edge_type && e.target == target)
    }

    /// `edge_id(type, source, target)`, suffixed `#r<k>` (smallest free k)
    /// when already taken.
    pub fn fresh_edge_id(&self, edge_type: &str, source: &str, target: &str) -> ElementId {
        self.fresh_id(super::edge_id(edge_type, source, target))
    }

    /// `<source>#r<k>` with the smallest unused `k ≥ 1`.
    pub fn fresh_replica_id(&self, source: &str) -> ElementId {
        (1..)
            .map(|k| format!("{source}#r{k}"))
            .find(|id| !self.contains(id))
            .expect("unbounded suffixes")
    }

    fn fresh_id(&self, base: ElementId) -> ElementId {
        if !self.contains(&base) {
            return base;
        }
        self.fresh_replica_id(&base)
    }

    pub fn has_open_transaction(&self) -> bool {
        self.open_txn.is_some()
    }

    // --- raw mutation, used by transactions only -------------------------

    pub(super) fn raw_insert_node(&mut self, id: ElementId, node: Node) {
        self.by_type
            .entry(node.node_type.clone())
            .or_default()
            .insert(id.clone());
        self.nodes.insert(id, node);
    }

    pub(super) fn raw_remove_node(&mut self, id: &str) -> Option<Node> {
        let node = self.nodes.remove(id)?;
        if let Some(set) = self.by_type.get_mut(&node.node_type) {
            set.remove(id);
            if set.is_empty() {
                self.by_type.remove(&node.node_type);
            }
        }
        Some(node)
    }

    pub(super) fn raw_insert_edge(&mut self, id: ElementId, edge: Edge) {
        self.out_edges
            .entry(edge.source.clone())
            .or_default()
            .insert(id.clone());
        self.in_edges.entry(edge.target.clone()).or_default().insert(id.clone());
        self.edges.insert(id, edge);
    }

    pub(super) fn raw_remove_edge(&mut self, id: &str) -> Option<Edge> {
        let edge = self.edges.remove(id)?;
        for (index, end) in [(&mut self.out_edges, &edge.source), (&mut self.in_edges, &edge.target)] {
            if let Some(set) = index.get_mut(end) {
                set.remove(id);
                if set.is_empty() {
                    index.remove(end);
                }
            }
        }
        Some(edge)
    }

    pub(super) fn raw_set_attr(&mut self, id: &str, name: &str, value: Option<Value>) {
        if let Some(node) = self.nodes.get_mut(id) {
            match value {
                Some(v) => {
                    node.attrs.insert(name.to_string(), v);
                }
                None => {
                    node.attrs.remove(name);
                }
            }
        }
    }

    // --- annotations -------------------------------------------------------

    pub fn annotate_event(&mut self, event: ChangeEvent) -> Result<(), ModelError> {
        if !self.contains(&event.element_id) {
            return Err(ModelError::UnknownElement(event.element_id));
        }
        self.event_annotations
            .entry(event.element_id.clone())
            .or_default()
            .push(event);
        Ok(())
    }

    pub fn annotate_result(&mut self, element: &str, result: EvaluationResult) -> Result<(), ModelError> {
        if !self.contains(element) {
            return Err(ModelError::UnknownElement(element.to_string()));
        }
        self.result_annotations
            .entry(element.to_string())
            .or_default()
            .push(result);
        Ok(())
    }

    /// Annotations recorded on `element`. Annotations outlive their element;
    /// reading them after removal flags them as stale.
    pub fn read_annotations(&self, element: &str) -> Annotations {
        Annotations {
            events: self.event_annotations.get(element).cloned().unwrap_or_default(),
            results: self.result_annotations.get(element).cloned().unwrap_or_default(),
            stale: !self.contains(element),
        }
    }

    /// Drops all annotations recorded before `tick`.
    pub fn prune_annotations(&mut self, before_tick: u64) {
        for list in self.event_annotations.values_mut() {
            list.retain(|e| e.tick >= before_tick);
        }
        for list in self.result_annotations.values_mut() {
            list.retain(|r| r.tick >= before_tick);
        }
        self.event_annotations.retain(|_, l| !l.is_empty());
        self.result_annotations.retain(|_, l| !l.is_empty());
    }

    /// Structural equality of the domain content (nodes and edges only).
    pub fn same_content(&self, other: &ReflectionModel) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}
