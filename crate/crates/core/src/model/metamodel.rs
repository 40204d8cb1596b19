use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::value::{ScalarKind, Value};
use super::ModelError;

/// Bound of a numeric attribute range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    #[serde(default)]
    pub exclusive: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Range {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Bound>,
}

impl Range {
    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = match self.min {
            Some(Bound { value, exclusive: true }) => x > value,
            Some(Bound {
                value,
                exclusive: false,
            }) => x >= value,
            None => true,
        };
        let hi_ok = match self.max {
            Some(Bound { value, exclusive: true }) => x < value,
            Some(Bound {
                value,
                exclusive: false,
            }) => x <= value,
            None => true,
        };
        lo_ok && hi_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttrDecl {
    pub kind: ScalarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enum_domain: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
    /// Written only by the monitor; adaptation effects may not assign it.
    #[serde(default)]
    pub sensor_owned: bool,
}

impl AttrDecl {
    pub fn new(kind: ScalarKind) -> Self {
        AttrDecl {
            kind,
            enum_domain: None,
            range: None,
            sensor_owned: false,
        }
    }

    pub fn with_enum(mut self, domain: &[&str]) -> Self {
        self.enum_domain = Some(domain.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_range(mut self, range: Range) -> Self {
        self.range = Some(range);
        self
    }

    pub fn sensor(mut self) -> Self {
        self.sensor_owned = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeType {
    pub name: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttrDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplicity {
    /// Every source node has exactly one outgoing edge of this type.
    ExactlyOne,
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeType {
    pub name: String,
    pub source: String,
    pub target: String,
    pub multiplicity: Multiplicity,
}

/// Type system of a reflection model. The runtime core only ever talks to
/// models through this description, so any component metamodel can be used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", try_from = "MetamodelDoc", into = "MetamodelDoc")]
pub struct Metamodel {
    node_types: BTreeMap<String, NodeType>,
    edge_types: BTreeMap<String, EdgeType>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct MetamodelDoc {
    node_types: Vec<NodeType>,
    #[serde(default)]
    edge_types: Vec<EdgeType>,
}

impl TryFrom<MetamodelDoc> for Metamodel {
    type Error = ModelError;

    fn try_from(doc: MetamodelDoc) -> Result<Self, Self::Error> {
        Metamodel::new(doc.node_types, doc.edge_types)
    }
}

impl From<Metamodel> for MetamodelDoc {
    fn from(mm: Metamodel) -> Self {
        MetamodelDoc {
            node_types: mm.node_types.into_values().collect(),
            edge_types: mm.edge_types.into_values().collect(),
        }
    }
}

impl Metamodel {
    pub fn new(node_types: Vec<NodeType>, edge_types: Vec<EdgeType>) -> Result<Self, ModelError> {
        let mut nodes = BTreeMap::new();
        for nt in node_types {
            if nodes.contains_key(&nt.name) {
                return Err(ModelError::InvalidMetamodel(format!(
                    "duplicate node type `{}`",
                    nt.name
                )));
            }
            nodes.insert(nt.name.clone(), nt);
        }
        let mut edges = BTreeMap::new();
        for et in edge_types {
            if edges.contains_key(&et.name) || nodes.contains_key(&et.name) {
                return Err(ModelError::InvalidMetamodel(format!(
                    "duplicate type name `{}`",
                    et.name
                )));
            }
            for end in [&et.source, &et.target] {
                if !nodes.contains_key(end) {
                    return Err(ModelError::InvalidMetamodel(format!(
                        "edge type `{}` references undeclared node type `{end}`",
                        et.name
                    )));
                }
            }
            edges.insert(et.name.clone(), et);
        }
        Ok(Metamodel {
            node_types: nodes,
            edge_types: edges,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::InvalidMetamodel(e.to_string()))
    }

    pub fn node_type(&self, name: &str) -> Option<&NodeType> {
        self.node_types.get(name)
    }

    pub fn edge_type(&self, name: &str) -> Option<&EdgeType> {
        self.edge_types.get(name)
    }

    pub fn node_types(&self) -> impl Iterator<Item = &NodeType> {
        self.node_types.values()
    }

    pub fn edge_types(&self) -> impl Iterator<Item = &EdgeType> {
        self.edge_types.values()
    }

    pub fn attr(&self, node_type: &str, attr: &str) -> Option<&AttrDecl> {
        self.node_types.get(node_type)?.attributes.get(attr)
    }

    /// Checks a value against an attribute declaration; returns the broken
    /// rule on failure.
    pub fn check_value(decl: &AttrDecl, value: &Value) -> Result<(), String> {
        if value.kind() != decl.kind {
            return Err(format!("expected {}, found {}", decl.kind, value.kind()));
        }
        if let (Some(domain), Value::Str(s)) = (&decl.enum_domain, value) {
            if !domain.iter().any(|d| d == s) {
                return Err(format!("value {s:?} outside enum domain {domain:?}"));
            }
        }
        if let (Some(range), Some(x)) = (&decl.range, value.as_f64()) {
            if !range.contains(x) {
                return Err(format!("value {x} outside declared range"));
            }
        }
        Ok(())
    }
}
