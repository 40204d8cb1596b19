//! Seeded random shop models, edits and patterns for property tests and
//! the acceptance suite.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{component_attrs, shop_metamodel};
use crate::model::{
    edge_id, CmpOp, EditOp, NegativePattern, Pattern, PatternEdge, PatternNode, Predicate, ReflectionModel, Value,
    VarPredicate,
};

const CTYPES: [&str; 3] = ["Shop", "Auth", "DB"];
const STATES: [&str; 2] = ["RUNNING", "FAILED"];

fn server_attrs(capacity: f64) -> std::collections::BTreeMap<String, Value> {
    std::collections::BTreeMap::from([("capacity".to_string(), Value::Float(capacity))])
}

/// A conforming shop model with `1..=max_nodes` nodes: at least one
/// server, every component deployed on exactly one server, random
/// `connects` edges. Attribute values are drawn from small domains so that
/// predicates both hold and fail.
pub fn random_model(rng: &mut impl Rng, max_nodes: usize) -> ReflectionModel {
    let total = rng.gen_range(1..=max_nodes.max(1));
    let servers = rng.gen_range(1..=total.min(3));
    let mut model = ReflectionModel::new(shop_metamodel());
    let mut txn = model.begin_transaction().expect("fresh model");
    let mut ops = Vec::new();
    for s in 0..servers {
        ops.push(EditOp::add_node(
            format!("S{s}"),
            "Server",
            server_attrs(rng.gen_range(1..=4) as f64 * 50.0),
        ));
    }
    let comps: Vec<String> = (0..total - servers).map(|c| format!("C{c}")).collect();
    for c in &comps {
        let attrs = component_attrs(
            CTYPES.choose(rng).expect("non-empty"),
            STATES.choose(rng).expect("non-empty"),
            rng.gen_range(0..=8) as f64 * 100.0,
            rng.gen_range(0..=4) as f64 * 10.0,
        );
        ops.push(EditOp::add_node(c.clone(), "Component", attrs));
        let s = format!("S{}", rng.gen_range(0..servers));
        ops.push(EditOp::add_edge(
            edge_id("deployedOn", c, &s),
            "deployedOn",
            c.clone(),
            s,
        ));
    }
    for a in &comps {
        for b in &comps {
            if a != b && rng.gen_bool(0.25) {
                ops.push(EditOp::add_edge(
                    edge_id("connects", a, b),
                    "connects",
                    a.clone(),
                    b.clone(),
                ));
            }
        }
    }
    for op in ops {
        model.apply_edit(&mut txn, op).expect("generated edits are valid");
    }
    model.commit(&mut txn).expect("open transaction");
    model
}

/// A random edit against the current model. It may be rejected by
/// `apply_edit` (for example removing a node that still has edges).
pub fn random_edit(rng: &mut impl Rng, model: &ReflectionModel) -> EditOp {
    let comps: Vec<String> = model.nodes_of_type("Component").cloned().collect();
    let servers: Vec<String> = model.nodes_of_type("Server").cloned().collect();
    let edges: Vec<String> = model.edges().map(|(id, _)| id.clone()).collect();
    let nodes: Vec<String> = model.nodes().map(|(id, _)| id.clone()).collect();
    loop {
        match rng.gen_range(0..7) {
            0 | 1 if !comps.is_empty() => {
                let c = comps.choose(rng).expect("non-empty");
                let op = match rng.gen_range(0..4) {
                    0 => model.set_attr_op(c, "state", *STATES.choose(rng).expect("non-empty")),
                    1 => model.set_attr_op(c, "rt", rng.gen_range(0..=8) as f64 * 100.0),
                    2 => model.set_attr_op(c, "load", rng.gen_range(0..=4) as f64 * 10.0),
                    _ => model.set_attr_op(c, "ctype", *CTYPES.choose(rng).expect("non-empty")),
                };
                return op.expect("component exists");
            }
            2 => {
                let id = format!("N{}", rng.gen_range(0..1000));
                return if rng.gen_bool(0.7) {
                    EditOp::add_node(id, "Component", component_attrs("Shop", "RUNNING", 100.0, 0.0))
                } else {
                    EditOp::add_node(id, "Server", server_attrs(100.0))
                };
            }
            3 if !comps.is_empty() && !servers.is_empty() => {
                let c = comps.choose(rng).expect("non-empty");
                let s = servers.choose(rng).expect("non-empty");
                return EditOp::add_edge(
                    model.fresh_edge_id("deployedOn", c, s),
                    "deployedOn",
                    c.clone(),
                    s.clone(),
                );
            }
            4 if comps.len() >= 2 => {
                let mut pair = comps.choose_multiple(rng, 2);
                let a = pair.next().expect("two");
                let b = pair.next().expect("two");
                return EditOp::add_edge(model.fresh_edge_id("connects", a, b), "connects", a.clone(), b.clone());
            }
            5 if !edges.is_empty() => {
                return model
                    .remove_edge_op(edges.choose(rng).expect("non-empty"))
                    .expect("edge exists");
            }
            6 if !nodes.is_empty() => {
                return model
                    .remove_node_op(nodes.choose(rng).expect("non-empty"))
                    .expect("node exists");
            }
            _ => {}
        }
    }
}

fn random_predicate(rng: &mut impl Rng, node_type: &str) -> Predicate {
    let op = *CmpOp::ALL.choose(rng).expect("non-empty");
    if node_type == "Server" {
        return Predicate::new("capacity", op, rng.gen_range(1..=4) as f64 * 50.0);
    }
    match rng.gen_range(0..3) {
        0 => Predicate::new(
            "state",
            if rng.gen_bool(0.5) { CmpOp::Eq } else { CmpOp::Ne },
            *STATES.choose(rng).expect("non-empty"),
        ),
        1 => Predicate::new("rt", op, rng.gen_range(0..=8) as f64 * 100.0),
        _ => Predicate::new("load", op, rng.gen_range(0..=4) as f64 * 10.0),
    }
}

fn random_type(rng: &mut impl Rng) -> &'static str {
    if rng.gen_bool(0.7) {
        "Component"
    } else {
        "Server"
    }
}

/// Random well-typed edge between two of `vars` (with their types), if one
/// exists in the metamodel.
fn random_edge(rng: &mut impl Rng, vars: &[(String, &str)]) -> Option<PatternEdge> {
    let (a, ta) = vars.choose(rng)?;
    let (b, tb) = vars.choose(rng)?;
    match (*ta, *tb) {
        ("Component", "Server") => Some(PatternEdge::new(a, "deployedOn", b)),
        ("Component", "Component") if a != b => Some(PatternEdge::new(a, "connects", b)),
        _ => None,
    }
}

/// A pattern with `1..=max_vars` variables, optional edges and predicates,
/// and sometimes one negative application condition with a single extra
/// variable.
pub fn random_pattern(rng: &mut impl Rng, max_vars: usize) -> Pattern {
    let n = rng.gen_range(1..=max_vars.max(1));
    let mut p = Pattern::new();
    let mut vars = Vec::new();
    for i in 0..n {
        let ty = random_type(rng);
        let var = format!("v{i}");
        let mut node = PatternNode::new(ty);
        if rng.gen_bool(0.5) {
            node = node.with(random_predicate(rng, ty));
        }
        p = p.node(var.clone(), node);
        vars.push((var, ty));
    }
    for _ in 0..rng.gen_range(0..=2) {
        if let Some(e) = random_edge(rng, &vars) {
            if !p.edges.contains(&e) {
                p.edges.push(e);
            }
        }
    }
    if rng.gen_bool(0.3) {
        let ty = random_type(rng);
        let mut node = PatternNode::new(ty);
        if rng.gen_bool(0.5) {
            node = node.with(random_predicate(rng, ty));
        }
        let mut all = vars.clone();
        all.push(("x".to_string(), ty));
        let mut nac = NegativePattern::default();
        nac.nodes.insert("x".into(), node);
        // Tie the NAC to the outer pattern when the types allow it.
        for _ in 0..3 {
            if let Some(e) = random_edge(rng, &all) {
                if e.source == "x" || e.target == "x" {
                    nac.edges.push(e);
                    break;
                }
            }
        }
        if rng.gen_bool(0.3) {
            let (v, t) = vars.choose(rng).expect("non-empty");
            nac.conditions.push(VarPredicate {
                var: v.clone(),
                predicate: random_predicate(rng, t),
            });
        }
        p = p.forbid(nac);
    }
    if rng.gen_bool(0.5) {
        p = p.anchored("v0");
    }
    p
}
