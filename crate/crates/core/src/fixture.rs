//! The shop fixture: a small component-based system (one server, three
//! components) used by examples, tests, and the bundled scenarios.

pub mod gen;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::model::{
    edge_id, AttrDecl, Bound, EdgeType, EditOp, Metamodel, Multiplicity, NodeType, Range, ReflectionModel, ScalarKind,
    Value,
};

/// Component metamodel: `Server{capacity > 0}`,
/// `Component{state, rt >= 0, load >= 0, ctype}`, `deployedOn` (exactly one
/// per component) and `connects`. `rt` and `load` are sensor-owned.
pub fn shop_metamodel() -> Arc<Metamodel> {
    let non_negative = Range {
        min: Some(Bound {
            value: 0.0,
            exclusive: false,
        }),
        max: None,
    };
    let server = NodeType {
        name: "Server".into(),
        attributes: BTreeMap::from([(
            "capacity".into(),
            AttrDecl::new(ScalarKind::Float).with_range(Range {
                min: Some(Bound {
                    value: 0.0,
                    exclusive: true,
                }),
                max: None,
            }),
        )]),
    };
    let component = NodeType {
        name: "Component".into(),
        attributes: BTreeMap::from([
            (
                "state".into(),
                AttrDecl::new(ScalarKind::String).with_enum(&["RUNNING", "FAILED"]),
            ),
            (
                "rt".into(),
                AttrDecl::new(ScalarKind::Float)
                    .with_range(non_negative.clone())
                    .sensor(),
            ),
            (
                "load".into(),
                AttrDecl::new(ScalarKind::Float).with_range(non_negative).sensor(),
            ),
            ("ctype".into(), AttrDecl::new(ScalarKind::String)),
        ]),
    };
    let edges = vec![
        EdgeType {
            name: "deployedOn".into(),
            source: "Component".into(),
            target: "Server".into(),
            multiplicity: Multiplicity::ExactlyOne,
        },
        EdgeType {
            name: "connects".into(),
            source: "Component".into(),
            target: "Component".into(),
            multiplicity: Multiplicity::Any,
        },
    ];
    Arc::new(Metamodel::new(vec![server, component], edges).expect("fixture metamodel is valid"))
}

pub fn component_attrs(ctype: &str, state: &str, rt: f64, load: f64) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("ctype".to_string(), Value::from(ctype)),
        ("state".to_string(), Value::from(state)),
        ("rt".to_string(), Value::Float(rt)),
        ("load".to_string(), Value::Float(load)),
    ])
}

/// The edits that build M0, nodes first.
pub fn m0_ops() -> Vec<EditOp> {
    let mut ops = vec![EditOp::add_node(
        "S1",
        "Server",
        BTreeMap::from([("capacity".to_string(), Value::Float(100.0))]),
    )];
    for (id, ctype, rt) in [("C1", "Shop", 200.0), ("C2", "Auth", 300.0), ("C3", "DB", 250.0)] {
        ops.push(EditOp::add_node(
            id,
            "Component",
            component_attrs(ctype, "RUNNING", rt, 10.0),
        ));
    }
    for c in ["C1", "C2", "C3"] {
        ops.push(EditOp::add_edge(edge_id("deployedOn", c, "S1"), "deployedOn", c, "S1"));
    }
    for (a, b) in [("C1", "C2"), ("C2", "C3")] {
        ops.push(EditOp::add_edge(edge_id("connects", a, b), "connects", a, b));
    }
    ops
}

/// M0: S1{capacity=100}; C1 Shop rt 200, C2 Auth rt 300, C3 DB rt 250, all
/// RUNNING with load 10 and deployed on S1; C1→C2→C3.
pub fn m0() -> ReflectionModel {
    let mut model = ReflectionModel::new(shop_metamodel());
    let mut txn = model.begin_transaction().expect("fresh model");
    for op in m0_ops() {
        model.apply_edit(&mut txn, op).expect("fixture edits are valid");
    }
    model.commit(&mut txn).expect("open transaction");
    model
}

pub const OBJECTIVES_ADM: &str = include_str!("../fixtures/adm/objectives.adm");
pub const ADAPTATION_ADM: &str = include_str!("../fixtures/adm/adaptation.adm");
/// [`ADAPTATION_ADM`] without the restart rule.
pub const ADAPTATION_V1_ADM: &str = include_str!("../fixtures/adm/adaptation-v1.adm");

fn compile_fixture(adaptation: &str) -> crate::adm::AdaptationModel {
    let sources = [
        ("objectives.adm".to_string(), OBJECTIVES_ADM.to_string()),
        ("adaptation.adm".to_string(), adaptation.to_string()),
    ];
    match crate::adm::compile(&sources, &shop_metamodel()) {
        Ok((bundle, _)) => bundle,
        Err(diags) => panic!("fixture bundle is invalid: {diags:?}"),
    }
}

/// Objectives plus conditions, options and the restart rule.
pub fn shop_bundle() -> crate::adm::AdaptationModel {
    compile_fixture(ADAPTATION_ADM)
}

/// Like [`shop_bundle`] but without rules.
pub fn shop_bundle_v1() -> crate::adm::AdaptationModel {
    compile_fixture(ADAPTATION_V1_ADM)
}
