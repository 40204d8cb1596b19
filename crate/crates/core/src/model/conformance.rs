use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::graph::ReflectionModel;
use super::metamodel::{Metamodel, Multiplicity};
use super::ElementId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    UnknownNodeType,
    UnknownEdgeType,
    UnknownAttribute,
    MissingAttribute,
    AttributeValue,
    DanglingEdge,
    EndpointType,
    Multiplicity,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::UnknownNodeType => "unknown node type",
            Rule::UnknownEdgeType => "unknown edge type",
            Rule::UnknownAttribute => "unknown attribute",
            Rule::MissingAttribute => "missing attribute",
            Rule::AttributeValue => "attribute value",
            Rule::DanglingEdge => "dangling edge",
            Rule::EndpointType => "endpoint type",
            Rule::Multiplicity => "multiplicity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub element: ElementId,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.element, self.rule.as_str(), self.detail)
    }
}

/// Lists every way `model` fails to conform to `mm`. Empty iff conformant.
/// Every declared attribute must be present on each node.
pub fn validate_conformance(model: &ReflectionModel, mm: &Metamodel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |element: &str, rule: Rule, detail: String| {
        out.push(Violation {
            element: element.to_string(),
            rule,
            detail,
        })
    };
    for (id, node) in model.nodes() {
        let Some(nt) = mm.node_type(&node.node_type) else {
            push(id, Rule::UnknownNodeType, node.node_type.clone());
            continue;
        };
        for (name, decl) in &nt.attributes {
            match node.attrs.get(name) {
                None => push(id, Rule::MissingAttribute, name.clone()),
                Some(v) => {
                    if let Err(why) = Metamodel::check_value(decl, v) {
                        push(id, Rule::AttributeValue, format!("{name}: {why}"));
                    }
                }
            }
        }
        for name in node.attrs.keys() {
            if !nt.attributes.contains_key(name) {
                push(id, Rule::UnknownAttribute, name.clone());
            }
        }
    }
    // (source node, edge type) -> outgoing count, for multiplicity checks.
    let mut out_count: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (id, edge) in model.edges() {
        let Some(et) = mm.edge_type(&edge.edge_type) else {
            push(id, Rule::UnknownEdgeType, edge.edge_type.clone());
            continue;
        };
        let src = model.node(&edge.source);
        let tgt = model.node(&edge.target);
        for (end, node) in [(&edge.source, src), (&edge.target, tgt)] {
            if node.is_none() {
                push(id, Rule::DanglingEdge, format!("endpoint `{end}` does not exist"));
            }
        }
        if let Some(s) = src {
            if s.node_type != et.source {
                push(
                    id,
                    Rule::EndpointType,
                    format!("source is {}, expected {}", s.node_type, et.source),
                );
            }
        }
        if let Some(t) = tgt {
            if t.node_type != et.target {
                push(
                    id,
                    Rule::EndpointType,
                    format!("target is {}, expected {}", t.node_type, et.target),
                );
            }
        }
        *out_count
            .entry((edge.source.as_str(), edge.edge_type.as_str()))
            .or_default() += 1;
    }
    for et in mm.edge_types() {
        if et.multiplicity != Multiplicity::ExactlyOne {
            continue;
        }
        for id in model.nodes_of_type(&et.source) {
            let n = out_count.get(&(id.as_str(), et.name.as_str())).copied().unwrap_or(0);
            if n != 1 {
                push(
                    id,
                    Rule::Multiplicity,
                    format!("{n} outgoing `{}` edges, expected exactly one", et.name),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::model::EditOp;

    #[test]
    fn empty_model_conforms() {
        let mm = fixture::shop_metamodel();
        let m = ReflectionModel::new(mm.clone());
        assert!(validate_conformance(&m, &mm).is_empty());
    }

    #[test]
    fn m0_conforms() {
        let m = fixture::m0();
        assert_eq!(validate_conformance(&m, m.metamodel()), vec![]);
    }

    #[test]
    fn dangling_edge_reported_once() {
        let mut m = fixture::m0();
        let mut t = m.begin_transaction().unwrap();
        m.apply_edit(&mut t, EditOp::add_edge("x", "connects", "C3", "C1"))
            .unwrap();
        // Remove C1 alone (its edges stay behind, dangling).
        let rm = m.remove_node_op("C1").unwrap();
        m.apply_edit(&mut t, rm).unwrap();
        m.commit(&mut t).unwrap();
        let v = validate_conformance(&m, m.metamodel());
        let dangling: Vec<_> = v.iter().filter(|v| v.rule == Rule::DanglingEdge).collect();
        // C1->C2, deployedOn C1->S1 and the new C3->C1.
        assert_eq!(dangling.len(), 3);
    }

    #[test]
    fn single_dangling_edge_is_one_violation() {
        let mm = fixture::shop_metamodel();
        let mut m = ReflectionModel::new(mm.clone());
        let mut t = m.begin_transaction().unwrap();
        for op in fixture::m0_ops() {
            m.apply_edit(&mut t, op).unwrap();
        }
        m.apply_edit(
            &mut t,
            EditOp::add_node(
                "C4",
                "Component",
                fixture::component_attrs("Log", "RUNNING", 100.0, 1.0),
            ),
        )
        .unwrap();
        m.apply_edit(&mut t, EditOp::add_edge("deployedOn:C4->S1", "deployedOn", "C4", "S1"))
            .unwrap();
        m.apply_edit(&mut t, EditOp::add_edge("connects:C3->C4", "connects", "C3", "C4"))
            .unwrap();
        m.commit(&mut t).unwrap();
        // Drop C4 and its deployment edge; the connects edge now dangles.
        let mut t = m.begin_transaction().unwrap();
        let e = m.remove_edge_op("deployedOn:C4->S1").unwrap();
        m.apply_edit(&mut t, e).unwrap();
        let n = m.remove_node_op("C4").unwrap();
        m.apply_edit(&mut t, n).unwrap();
        m.commit(&mut t).unwrap();
        let v = validate_conformance(&m, &mm);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::DanglingEdge);
        assert_eq!(v[0].element, "connects:C3->C4");
    }

    #[test]
    fn enum_and_range_and_multiplicity() {
        let mut m = fixture::m0();
        let mut t = m.begin_transaction().unwrap();
        let op = m.set_attr_op("C1", "state", "SLEEPING").unwrap();
        m.apply_edit(&mut t, op).unwrap();
        let op = m.set_attr_op("S1", "capacity", 0.0).unwrap();
        m.apply_edit(&mut t, op).unwrap();
        let e = m.remove_edge_op("deployedOn:C2->S1").unwrap();
        m.apply_edit(&mut t, e).unwrap();
        m.commit(&mut t).unwrap();
        let rules: Vec<_> = validate_conformance(&m, m.metamodel())
            .into_iter()
            .map(|v| (v.element, v.rule))
            .collect();
        assert!(rules.contains(&("C1".into(), Rule::AttributeValue)));
        assert!(rules.contains(&("S1".into(), Rule::AttributeValue)));
        assert!(rules.contains(&("C2".into(), Rule::Multiplicity)));
        assert_eq!(rules.len(), 3);
    }
}
