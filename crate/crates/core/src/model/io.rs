//! JSON documents for metamodels and initial reflection models.
//!
//! Model document:
//! `{"nodes": [{"id", "type", "attrs": {..}}], "edges": [{"id", "type", "source", "target"}]}`.
//! Attribute values are typed by the metamodel while loading.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::edit::EditOp;
use super::graph::ReflectionModel;
use super::metamodel::Metamodel;
use super::value::Value;
use super::{ElementId, ModelError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: ElementId,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: ElementId,
    #[serde(rename = "type")]
    pub edge_type: String,
    pub source: ElementId,
    pub target: ElementId,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelDoc {
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
}

impl ModelDoc {
    pub fn from_model(model: &ReflectionModel) -> Self {
        ModelDoc {
            nodes: model
                .nodes()
                .map(|(id, n)| NodeDoc {
                    id: id.clone(),
                    node_type: n.node_type.clone(),
                    attrs: n.attrs.iter().map(|(k, v)| (k.clone(), v.to_json())).collect(),
                })
                .collect(),
            edges: model
                .edges()
                .map(|(id, e)| EdgeDoc {
                    id: id.clone(),
                    edge_type: e.edge_type.clone(),
                    source: e.source.clone(),
                    target: e.target.clone(),
                })
                .collect(),
        }
    }

    /// Builds a descriptive model through one committed transaction.
    pub fn into_model(self, mm: Arc<Metamodel>) -> Result<ReflectionModel, ModelError> {
        let mut model = ReflectionModel::new(mm.clone());
        let mut txn = model.begin_transaction()?;
        for n in self.nodes {
            let nt = mm
                .node_type(&n.node_type)
                .ok_or_else(|| ModelError::InvalidDocument(format!("unknown node type `{}`", n.node_type)))?;
            let mut attrs = BTreeMap::new();
            for (name, json) in n.attrs {
                let decl = nt.attributes.get(&name).ok_or_else(|| {
                    ModelError::InvalidDocument(format!("`{}` has no attribute `{name}`", n.node_type))
                })?;
                let v = Value::from_json(&json, decl.kind)
                    .ok_or_else(|| ModelError::InvalidDocument(format!("{}.{name}: expected {}", n.id, decl.kind)))?;
                attrs.insert(name, v);
            }
            model.apply_edit(&mut txn, EditOp::add_node(n.id, n.node_type, attrs))?;
        }
        for e in self.edges {
            model.apply_edit(&mut txn, EditOp::add_edge(e.id, e.edge_type, e.source, e.target))?;
        }
        model.commit(&mut txn)?;
        Ok(model)
    }
}

pub fn load_model(json: &str, mm: Arc<Metamodel>) -> Result<ReflectionModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(json).map_err(|e| ModelError::InvalidDocument(e.to_string()))?;
    doc.into_model(mm)
}

pub fn dump_model(model: &ReflectionModel) -> String {
    serde_json::to_string_pretty(&ModelDoc::from_model(model)).expect("model documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn dump_and_load_preserve_digest() {
        let m = fixture::m0();
        let text = dump_model(&m);
        let back = load_model(&text, m.metamodel().clone()).unwrap();
        assert_eq!(back.digest(), m.digest());
    }

    #[test]
    fn wrong_kind_rejected() {
        let mm = fixture::shop_metamodel();
        let bad = r#"{"nodes":[{"id":"S1","type":"Server","attrs":{"capacity":"big"}}]}"#;
        assert!(matches!(load_model(bad, mm), Err(ModelError::InvalidDocument(_))));
    }
}
