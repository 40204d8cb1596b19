use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{Edge, Node, ReflectionModel};
use super::value::Value;
use super::{ElementId, ModelError};

/// A primitive, invertible model edit. Removals capture the full removed
/// content so that every edit has a total inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum EditOp {
    AddNode {
        id: ElementId,
        #[serde(rename = "type")]
        node_type: String,
        attrs: BTreeMap<String, Value>,
    },
    RemoveNode {
        id: ElementId,
        captured: Node,
    },
    SetAttr {
        id: ElementId,
        name: String,
        old: Option<Value>,
        new: Option<Value>,
    },
    AddEdge {
        id: ElementId,
        #[serde(rename = "type")]
        edge_type: String,
        source: ElementId,
        target: ElementId,
    },
    RemoveEdge {
        id: ElementId,
        captured: Edge,
    },
}

impl EditOp {
    pub fn add_node(id: impl Into<ElementId>, node_type: impl Into<String>, attrs: BTreeMap<String, Value>) -> Self {
        EditOp::AddNode {
            id: id.into(),
            node_type: node_type.into(),
            attrs,
        }
    }

    pub fn add_edge(
        id: impl Into<ElementId>,
        edge_type: impl Into<String>,
        source: impl Into<ElementId>,
        target: impl Into<ElementId>,
    ) -> Self {
        EditOp::AddEdge {
            id: id.into(),
            edge_type: edge_type.into(),
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn set_attr(id: impl Into<ElementId>, name: impl Into<String>, old: Option<Value>, new: Option<Value>) -> Self {
        EditOp::SetAttr {
            id: id.into(),
            name: name.into(),
            old,
            new,
        }
    }

    /// The element this op creates, removes, or modifies.
    pub fn element(&self) -> &ElementId {
        match self {
            EditOp::AddNode { id, .. }
            | EditOp::RemoveNode { id, .. }
            | EditOp::SetAttr { id, .. }
            | EditOp::AddEdge { id, .. }
            | EditOp::RemoveEdge { id, .. } => id,
        }
    }

    pub fn inverse(&self) -> EditOp {
        match self {
            EditOp::AddNode { id, node_type, attrs } => EditOp::RemoveNode {
                id: id.clone(),
                captured: Node {
                    node_type: node_type.clone(),
                    attrs: attrs.clone(),
                },
            },
            EditOp::RemoveNode { id, captured } => EditOp::AddNode {
                id: id.clone(),
                node_type: captured.node_type.clone(),
                attrs: captured.attrs.clone(),
            },
            EditOp::SetAttr { id, name, old, new } => EditOp::SetAttr {
                id: id.clone(),
                name: name.clone(),
                old: new.clone(),
                new: old.clone(),
            },
            EditOp::AddEdge {
                id,
                edge_type,
                source,
                target,
            } => EditOp::RemoveEdge {
                id: id.clone(),
                captured: Edge {
                    edge_type: edge_type.clone(),
                    source: source.clone(),
                    target: target.clone(),
                },
            },
            EditOp::RemoveEdge { id, captured } => EditOp::AddEdge {
                id: id.clone(),
                edge_type: captured.edge_type.clone(),
                source: captured.source.clone(),
                target: captured.target.clone(),
            },
        }
    }
}

/// An op together with its inverse, as recorded by a transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedOp {
    pub op: EditOp,
    pub inverse: EditOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TxnStatus {
    Open,
    Committed,
    RolledBack,
}

/// Handle for a unit of reversible work on one model.
#[derive(Debug)]
pub struct Transaction {
    id: u64,
    status: TxnStatus,
    ops: Vec<EditOp>,
}

/// Position inside an open transaction that can be rolled back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Savepoint(usize);

impl Transaction {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn status(&self) -> TxnStatus {
        self.status
    }

    pub fn ops(&self) -> &[EditOp] {
        &self.ops
    }

    pub fn is_open(&self) -> bool {
        self.status == TxnStatus::Open
    }
}

impl ReflectionModel {
    pub fn begin_transaction(&mut self) -> Result<Transaction, ModelError> {
        if let Some(open) = self.open_txn {
            return Err(ModelError::AlreadyOpen(open));
        }
        let id = self.next_txn_id;
        self.next_txn_id += 1;
        self.open_txn = Some(id);
        Ok(Transaction {
            id,
            status: TxnStatus::Open,
            ops: Vec::new(),
        })
    }

    fn ensure_open(&self, txn: &Transaction) -> Result<(), ModelError> {
        if txn.status != TxnStatus::Open || self.open_txn != Some(txn.id) {
            return Err(ModelError::TxnClosed(txn.id));
        }
        Ok(())
    }

    /// Validates `op` against the current state and applies it inside
    /// `txn`. On error the model is left untouched.
    pub fn apply_edit(&mut self, txn: &mut Transaction, op: EditOp) -> Result<AppliedOp, ModelError> {
        self.ensure_open(txn)?;
        self.validate_op(&op)?;
        self.raw_apply(&op);
        let inverse = op.inverse();
        txn.ops.push(op.clone());
        Ok(AppliedOp { op, inverse })
    }

    /// Returns the ordered delta and closes the transaction.
    pub fn commit(&mut self, txn: &mut Transaction) -> Result<Vec<EditOp>, ModelError> {
        self.ensure_open(txn)?;
        txn.status = TxnStatus::Committed;
        self.open_txn = None;
        Ok(txn.ops.clone())
    }

    /// Undoes every op of the transaction in strict reverse order.
    pub fn rollback(&mut self, txn: &mut Transaction) -> Result<(), ModelError> {
        self.ensure_open(txn)?;
        self.undo_to(txn, 0);
        txn.status = TxnStatus::RolledBack;
        self.open_txn = None;
        Ok(())
    }

    pub fn savepoint(&self, txn: &Transaction) -> Result<Savepoint, ModelError> {
        self.ensure_open(txn)?;
        Ok(Savepoint(txn.ops.len()))
    }

    /// Undoes the ops applied after `sp`; the transaction stays open.
    pub fn rollback_to(&mut self, txn: &mut Transaction, sp: Savepoint) -> Result<(), ModelError> {
        self.ensure_open(txn)?;
        self.undo_to(txn, sp.0);
        Ok(())
    }

    fn undo_to(&mut self, txn: &mut Transaction, len: usize) {
        while txn.ops.len() > len {
            let op = txn.ops.pop().expect("length checked");
            self.raw_apply(&op.inverse());
        }
    }

    /// Builds a `SetAttr` capturing the current value as `old`.
    pub fn set_attr_op(&self, id: &str, name: &str, new: impl Into<Value>) -> Result<EditOp, ModelError> {
        let node = self
            .node(id)
            .ok_or_else(|| ModelError::StaleOp(format!("set-attr on missing node `{id}`")))?;
        Ok(EditOp::set_attr(
            id,
            name,
            node.attrs.get(name).cloned(),
            Some(new.into()),
        ))
    }

    pub fn remove_node_op(&self, id: &str) -> Result<EditOp, ModelError> {
        let node = self
            .node(id)
            .ok_or_else(|| ModelError::StaleOp(format!("remove of missing node `{id}`")))?;
        Ok(EditOp::RemoveNode {
            id: id.to_string(),
            captured: node.clone(),
        })
    }

    pub fn remove_edge_op(&self, id: &str) -> Result<EditOp, ModelError> {
        let edge = self
            .edge(id)
            .ok_or_else(|| ModelError::StaleOp(format!("remove of missing edge `{id}`")))?;
        Ok(EditOp::RemoveEdge {
            id: id.to_string(),
            captured: edge.clone(),
        })
    }

    fn validate_op(&self, op: &EditOp) -> Result<(), ModelError> {
        let mm = self.metamodel().clone();
        match op {
            EditOp::AddNode { id, node_type, attrs } => {
                if self.contains(id) {
                    return Err(ModelError::StaleOp(format!("id `{id}` already in use")));
                }
                let nt = mm
                    .node_type(node_type)
                    .ok_or_else(|| ModelError::TypeViolation(format!("unknown node type `{node_type}`")))?;
                for (name, value) in attrs {
                    let decl = nt
                        .attributes
                        .get(name)
                        .ok_or_else(|| ModelError::TypeViolation(format!("`{node_type}` has no attribute `{name}`")))?;
                    if decl.kind != value.kind() {
                        return Err(ModelError::TypeViolation(format!(
                            "{id}.{name}: expected {}, found {}",
                            decl.kind,
                            value.kind()
                        )));
                    }
                }
            }
            EditOp::RemoveNode { id, captured } => match self.node(id) {
                Some(current) if current == captured => {}
                Some(_) => return Err(ModelError::StaleOp(format!("node `{id}` changed since capture"))),
                None => return Err(ModelError::StaleOp(format!("remove of missing node `{id}`"))),
            },
            EditOp::SetAttr { id, name, old, new } => {
                let node = self
                    .node(id)
                    .ok_or_else(|| ModelError::StaleOp(format!("set-attr on missing node `{id}`")))?;
                if node.attrs.get(name) != old.as_ref() {
                    return Err(ModelError::StaleOp(format!(
                        "{id}.{name} no longer holds the expected old value"
                    )));
                }
                let decl = mm.attr(&node.node_type, name).ok_or_else(|| {
                    ModelError::TypeViolation(format!("`{}` has no attribute `{name}`", node.node_type))
                })?;
                if let Some(v) = new {
                    if v.kind() != decl.kind {
                        return Err(ModelError::TypeViolation(format!(
                            "{id}.{name}: expected {}, found {}",
                            decl.kind,
                            v.kind()
                        )));
                    }
                }
            }
            EditOp::AddEdge {
                id,
                edge_type,
                source,
                target,
            } => {
                if self.contains(id) {
                    return Err(ModelError::StaleOp(format!("id `{id}` already in use")));
                }
                let et = mm
                    .edge_type(edge_type)
                    .ok_or_else(|| ModelError::TypeViolation(format!("unknown edge type `{edge_type}`")))?;
                for (end, expected) in [(source, &et.source), (target, &et.target)] {
                    let node = self
                        .node(end)
                        .ok_or_else(|| ModelError::StaleOp(format!("edge endpoint `{end}` missing")))?;
                    if &node.node_type != expected {
                        return Err(ModelError::TypeViolation(format!(
                            "`{edge_type}` endpoint `{end}` is a {}, expected {expected}",
                            node.node_type
                        )));
                    }
                }
            }
            EditOp::RemoveEdge { id, captured } => match self.edge(id) {
                Some(current) if current == captured => {}
                Some(_) => return Err(ModelError::StaleOp(format!("edge `{id}` changed since capture"))),
                None => return Err(ModelError::StaleOp(format!("remove of missing edge `{id}`"))),
            },
        }
        Ok(())
    }

    fn raw_apply(&mut self, op: &EditOp) {
        match op {
            EditOp::AddNode { id, node_type, attrs } => self.raw_insert_node(
                id.clone(),
                Node {
                    node_type: node_type.clone(),
                    attrs: attrs.clone(),
                },
            ),
            EditOp::RemoveNode { id, .. } => {
                self.raw_remove_node(id);
            }
            EditOp::SetAttr { id, name, new, .. } => self.raw_set_attr(id, name, new.clone()),
            EditOp::AddEdge {
                id,
                edge_type,
                source,
                target,
            } => self.raw_insert_edge(
                id.clone(),
                Edge {
                    edge_type: edge_type.clone(),
                    source: source.clone(),
                    target: target.clone(),
                },
            ),
            EditOp::RemoveEdge { id, .. } => {
                self.raw_remove_edge(id);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn set_attr_inverse_swaps_values() {
        let mut m = fixture::m0();
        let mut txn = m.begin_transaction().unwrap();
        let op = m.set_attr_op("C2", "state", "FAILED").unwrap();
        let applied = m.apply_edit(&mut txn, op).unwrap();
        assert_eq!(m.attr("C2", "state"), Some(&Value::from("FAILED")));
        assert_eq!(
            applied.inverse,
            EditOp::set_attr("C2", "state", Some("FAILED".into()), Some("RUNNING".into()))
        );
    }

    #[test]
    fn add_then_remove_in_one_txn_cancels() {
        let mut m = fixture::m0();
        let before = m.digest();
        let mut txn = m.begin_transaction().unwrap();
        let attrs = BTreeMap::from([("capacity".to_string(), Value::Float(50.0))]);
        m.apply_edit(&mut txn, EditOp::add_node("S9", "Server", attrs)).unwrap();
        let rm = m.remove_node_op("S9").unwrap();
        m.apply_edit(&mut txn, rm).unwrap();
        m.commit(&mut txn).unwrap();
        assert_eq!(m.digest(), before);
    }

    #[test]
    fn set_attr_on_absent_node_is_stale() {
        let mut m = fixture::m0();
        let mut txn = m.begin_transaction().unwrap();
        let op = EditOp::set_attr("C9", "state", None, Some("FAILED".into()));
        assert!(matches!(m.apply_edit(&mut txn, op), Err(ModelError::StaleOp(_))));
    }

    #[test]
    fn kind_mismatch_is_type_violation() {
        let mut m = fixture::m0();
        let mut txn = m.begin_transaction().unwrap();
        let op = m.set_attr_op("C2", "rt", "fast").unwrap();
        assert!(matches!(m.apply_edit(&mut txn, op), Err(ModelError::TypeViolation(_))));
    }

    #[test]
    fn transaction_ids_are_monotone_and_exclusive() {
        let mut m = ReflectionModel::new(fixture::shop_metamodel());
        let mut t1 = m.begin_transaction().unwrap();
        assert_eq!(t1.id(), 1);
        assert!(matches!(m.begin_transaction(), Err(ModelError::AlreadyOpen(1))));
        m.commit(&mut t1).unwrap();
        let t2 = m.begin_transaction().unwrap();
        assert_eq!(t2.id(), 2);
    }

    #[test]
    fn commit_returns_delta_in_order_and_closes() {
        let mut m = fixture::m0();
        let mut empty = m.begin_transaction().unwrap();
        assert!(m.commit(&mut empty).unwrap().is_empty());

        let mut txn = m.begin_transaction().unwrap();
        for (id, v) in [("C1", 1.0), ("C2", 2.0), ("C3", 3.0)] {
            let op = m.set_attr_op(id, "load", v).unwrap();
            m.apply_edit(&mut txn, op).unwrap();
        }
        let delta = m.commit(&mut txn).unwrap();
        let ids: Vec<_> = delta.iter().map(|op| op.element().as_str()).collect();
        assert_eq!(ids, ["C1", "C2", "C3"]);
        assert_eq!(txn.status(), TxnStatus::Committed);
        assert!(matches!(m.commit(&mut txn), Err(ModelError::TxnClosed(_))));
    }

    #[test]
    fn rollback_restores_digest_and_closes() {
        let mut m = fixture::m0();
        let mut empty = m.begin_transaction().unwrap();
        let d0 = m.digest();
        m.rollback(&mut empty).unwrap();
        assert_eq!(m.digest(), d0);

        let oracle = m.clone().digest();
        let mut txn = m.begin_transaction().unwrap();
        let attrs = BTreeMap::from([("capacity".to_string(), Value::Float(10.0))]);
        m.apply_edit(&mut txn, EditOp::add_node("S2", "Server", attrs)).unwrap();
        let op = m.set_attr_op("C1", "state", "FAILED").unwrap();
        m.apply_edit(&mut txn, op).unwrap();
        m.apply_edit(&mut txn, EditOp::add_edge("e", "connects", "C3", "C1"))
            .unwrap();
        assert_ne!(m.digest(), oracle);
        m.rollback(&mut txn).unwrap();
        assert_eq!(m.digest(), oracle);
        assert_eq!(txn.status(), TxnStatus::RolledBack);
        assert!(matches!(m.commit(&mut txn), Err(ModelError::TxnClosed(_))));
    }

    #[test]
    fn savepoints_undo_suffix_only() {
        let mut m = fixture::m0();
        let mut txn = m.begin_transaction().unwrap();
        let op = m.set_attr_op("C1", "load", 5.0).unwrap();
        m.apply_edit(&mut txn, op).unwrap();
        let mid = m.digest();
        let sp = m.savepoint(&txn).unwrap();
        let op = m.set_attr_op("C2", "load", 7.0).unwrap();
        m.apply_edit(&mut txn, op).unwrap();
        m.rollback_to(&mut txn, sp).unwrap();
        assert_eq!(m.digest(), mid);
        assert_eq!(txn.ops().len(), 1);
    }
}
