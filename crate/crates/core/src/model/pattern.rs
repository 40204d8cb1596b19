//! Structural graph patterns and the matcher.
//!
//! Matching is injective: distinct pattern variables bind distinct nodes.
//! Edges are checked for existence but not bound, so a binding maps node
//! variables only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::ReflectionModel;
use super::metamodel::Metamodel;
use super::value::{Operand, Predicate, Value};
use super::{ElementId, ModelError};

/// Assignment of pattern variables to node ids. `BTreeMap` ordering gives
/// the canonical order of bindings (lexicographic by variable, then id).
pub type Binding = BTreeMap<String, ElementId>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternNode {
    pub node_type: String,
    #[serde(default)]
    pub predicates: Vec<Predicate>,
}

impl PatternNode {
    pub fn new(node_type: impl Into<String>) -> Self {
        PatternNode {
            node_type: node_type.into(),
            predicates: Vec::new(),
        }
    }

    pub fn with(mut self, pred: Predicate) -> Self {
        self.predicates.push(pred);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternEdge {
    pub source: String,
    pub edge_type: String,
    pub target: String,
}

impl PatternEdge {
    pub fn new(source: impl Into<String>, edge_type: impl Into<String>, target: impl Into<String>) -> Self {
        PatternEdge {
            source: source.into(),
            edge_type: edge_type.into(),
            target: target.into(),
        }
    }
}

/// Predicate on a variable bound by the enclosing positive pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarPredicate {
    pub var: String,
    pub predicate: Predicate,
}

/// Negative application condition: a binding is rejected if the NAC can be
/// extended to a match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NegativePattern {
    #[serde(default)]
    pub nodes: BTreeMap<String, PatternNode>,
    #[serde(default)]
    pub edges: Vec<PatternEdge>,
    #[serde(default)]
    pub conditions: Vec<VarPredicate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Pattern {
    pub nodes: BTreeMap<String, PatternNode>,
    #[serde(default)]
    pub edges: Vec<PatternEdge>,
    #[serde(default)]
    pub anchor: Option<String>,
    #[serde(default)]
    pub negatives: Vec<NegativePattern>,
}

impl Pattern {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, var: impl Into<String>, node: PatternNode) -> Self {
        self.nodes.insert(var.into(), node);
        self
    }

    pub fn edge(mut self, source: &str, edge_type: &str, target: &str) -> Self {
        self.edges.push(PatternEdge::new(source, edge_type, target));
        self
    }

    pub fn anchored(mut self, var: impl Into<String>) -> Self {
        self.anchor = Some(var.into());
        self
    }

    pub fn forbid(mut self, nac: NegativePattern) -> Self {
        self.negatives.push(nac);
        self
    }

    /// Structural well-formedness independent of any metamodel.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidPattern(msg));
        if self.nodes.is_empty() {
            return bad("pattern declares no variables".into());
        }
        for e in &self.edges {
            for v in [&e.source, &e.target] {
                if !self.nodes.contains_key(v) {
                    return bad(format!("edge references undeclared variable `{v}`"));
                }
            }
        }
        if let Some(a) = &self.anchor {
            if !self.nodes.contains_key(a) {
                return bad(format!("anchor `{a}` is not a declared variable"));
            }
        }
        for nac in &self.negatives {
            for v in nac.nodes.keys() {
                if self.nodes.contains_key(v) {
                    return bad(format!("negative variable `{v}` shadows a positive one"));
                }
            }
            for e in &nac.edges {
                for v in [&e.source, &e.target] {
                    if !self.nodes.contains_key(v) && !nac.nodes.contains_key(v) {
                        return bad(format!("negative edge references undeclared variable `{v}`"));
                    }
                }
            }
            for c in &nac.conditions {
                if !self.nodes.contains_key(&c.var) {
                    return bad(format!("negative condition on undeclared variable `{}`", c.var));
                }
            }
        }
        Ok(())
    }

    /// Checks every type and attribute reference against a metamodel.
    pub fn check_types(&self, mm: &Metamodel) -> Result<(), ModelError> {
        let check_node = |var: &str, n: &PatternNode| -> Result<(), ModelError> {
            let nt = mm.node_type(&n.node_type).ok_or_else(|| {
                ModelError::InvalidPattern(format!("unknown node type `{}` for `{var}`", n.node_type))
            })?;
            for p in &n.predicates {
                if !nt.attributes.contains_key(&p.attr) {
                    return Err(ModelError::InvalidPattern(format!(
                        "`{}` has no attribute `{}`",
                        n.node_type, p.attr
                    )));
                }
            }
            Ok(())
        };
        let check_edge = |e: &PatternEdge, lookup: &dyn Fn(&str) -> Option<String>| -> Result<(), ModelError> {
            let et = mm
                .edge_type(&e.edge_type)
                .ok_or_else(|| ModelError::InvalidPattern(format!("unknown edge type `{}`", e.edge_type)))?;
            if lookup(&e.source).as_deref() != Some(et.source.as_str())
                || lookup(&e.target).as_deref() != Some(et.target.as_str())
            {
                return Err(ModelError::InvalidPattern(format!(
                    "edge `{} -{}-> {}` does not fit endpoint types",
                    e.source, e.edge_type, e.target
                )));
            }
            Ok(())
        };
        for (v, n) in &self.nodes {
            check_node(v, n)?;
        }
        let pos = |v: &str| self.nodes.get(v).map(|n| n.node_type.clone());
        for e in &self.edges {
            check_edge(e, &pos)?;
        }
        for nac in &self.negatives {
            for (v, n) in &nac.nodes {
                check_node(v, n)?;
            }
            let lookup = |v: &str| pos(v).or_else(|| nac.nodes.get(v).map(|n| n.node_type.clone()));
            for e in &nac.edges {
                check_edge(e, &lookup)?;
            }
            for c in &nac.conditions {
                let ty = &self.nodes[&c.var].node_type;
                if mm.attr(ty, &c.predicate.attr).is_none() {
                    return Err(ModelError::InvalidPattern(format!(
                        "`{ty}` has no attribute `{}`",
                        c.predicate.attr
                    )));
                }
            }
        }
        Ok(())
    }

    /// Replaces parameter operands with the given values.
    pub fn instantiate(&self, params: &BTreeMap<String, Value>) -> Pattern {
        let subst = |p: &Predicate| -> Predicate {
            match &p.rhs {
                Operand::Param(name) => match params.get(name) {
                    Some(v) => Predicate {
                        attr: p.attr.clone(),
                        op: p.op,
                        rhs: Operand::Literal(v.clone()),
                    },
                    None => p.clone(),
                },
                Operand::Literal(_) => p.clone(),
            }
        };
        let subst_node = |n: &PatternNode| PatternNode {
            node_type: n.node_type.clone(),
            predicates: n.predicates.iter().map(subst).collect(),
        };
        Pattern {
            nodes: self.nodes.iter().map(|(k, n)| (k.clone(), subst_node(n))).collect(),
            edges: self.edges.clone(),
            anchor: self.anchor.clone(),
            negatives: self
                .negatives
                .iter()
                .map(|nac| NegativePattern {
                    nodes: nac.nodes.iter().map(|(k, n)| (k.clone(), subst_node(n))).collect(),
                    edges: nac.edges.clone(),
                    conditions: nac
                        .conditions
                        .iter()
                        .map(|c| VarPredicate {
                            var: c.var.clone(),
                            predicate: subst(&c.predicate),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Type of the anchor variable, if any.
    pub fn anchor_type(&self) -> Option<&str> {
        let a = self.anchor.as_ref()?;
        self.nodes.get(a).map(|n| n.node_type.as_str())
    }
}

/// Finds all bindings of `pattern` in `model`. With an anchor, only
/// bindings that map the pattern's anchor variable to that element are
/// returned. Bindings come back sorted and duplicate-free.
pub fn match_pattern(
    model: &ReflectionModel,
    pattern: &Pattern,
    anchor: Option<&str>,
) -> Result<Vec<Binding>, ModelError> {
    pattern.validate()?;
    let mut seed = Binding::new();
    if let Some(anchor) = anchor {
        let var = pattern
            .anchor
            .as_ref()
            .ok_or_else(|| ModelError::UnknownAnchor(format!("pattern has no anchor variable (got `{anchor}`)")))?;
        if !model.contains(anchor) {
            return Err(ModelError::UnknownAnchor(anchor.to_string()));
        }
        seed.insert(var.clone(), anchor.to_string());
    }
    Ok(match_seeded(model, pattern, &seed))
}

/// Matches with some variables pre-bound. Seed entries for variables the
/// pattern does not declare are ignored.
pub fn match_seeded(model: &ReflectionModel, pattern: &Pattern, seed: &Binding) -> Vec<Binding> {
    let seed: Binding = seed
        .iter()
        .filter(|(k, _)| pattern.nodes.contains_key(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let mut out = Vec::new();
    let mut search = Search {
        model,
        nodes: &pattern.nodes,
        edges: &pattern.edges,
        order: Vec::new(),
        stop_at_first: false,
    };
    let Some(order) = search.plan(&seed) else {
        return out;
    };
    search.order = order;
    let mut used: BTreeSet<ElementId> = seed.values().cloned().collect();
    if used.len() != seed.len() {
        return out;
    }
    let mut binding = seed;
    search.run(0, &mut binding, &mut used, &mut |b| {
        if pattern.negatives.iter().all(|nac| !nac_matches(model, nac, b)) {
            out.push(b.clone());
        }
        true
    });
    out.sort();
    out.dedup();
    out
}

fn nac_matches(model: &ReflectionModel, nac: &NegativePattern, positive: &Binding) -> bool {
    for c in &nac.conditions {
        let attrs = &model.node(&positive[&c.var]).expect("bound node exists").attrs;
        if !c.predicate.eval(attrs) {
            return false;
        }
    }
    // The NAC's own node set, plus the positive variables as fixed context.
    let mut nodes: BTreeMap<String, PatternNode> = nac.nodes.clone();
    for var in positive.keys() {
        nodes.entry(var.clone()).or_insert_with(|| PatternNode::new(""));
    }
    let mut search = Search {
        model,
        nodes: &nodes,
        edges: &nac.edges,
        order: Vec::new(),
        stop_at_first: true,
    };
    let Some(order) = search.plan(positive) else {
        return false;
    };
    search.order = order;
    let mut used: BTreeSet<ElementId> = positive.values().cloned().collect();
    let mut binding = positive.clone();
    let mut found = false;
    search.run(0, &mut binding, &mut used, &mut |_| {
        found = true;
        false
    });
    found
}

struct Search<'a> {
    model: &'a ReflectionModel,
    nodes: &'a BTreeMap<String, PatternNode>,
    edges: &'a [PatternEdge],
    order: Vec<String>,
    stop_at_first: bool,
}

impl Search<'_> {
    /// Verifies the seeded variables and fixes a variable order that
    /// prefers variables adjacent to already-bound ones.
    fn plan(&self, seed: &Binding) -> Option<Vec<String>> {
        for (var, id) in seed {
            let pn = self.nodes.get(var)?;
            // Context variables of a NAC carry an empty type: already checked.
            if !pn.node_type.is_empty() && !self.node_fits(pn, id) {
                return None;
            }
        }
        for e in self.edges {
            if let (Some(s), Some(t)) = (seed.get(&e.source), seed.get(&e.target)) {
                if !self.model.has_edge(s, &e.edge_type, t) {
                    return None;
                }
            }
        }
        let mut bound: BTreeSet<&str> = seed.keys().map(String::as_str).collect();
        let mut order = Vec::new();
        let mut remaining: Vec<&str> = self
            .nodes
            .keys()
            .map(String::as_str)
            .filter(|v| !bound.contains(v))
            .collect();
        while !remaining.is_empty() {
            let adjacent = remaining.iter().position(|v| {
                self.edges.iter().any(|e| {
                    (e.source == *v && bound.contains(e.target.as_str()))
                        || (e.target == *v && bound.contains(e.source.as_str()))
                })
            });
            let idx = adjacent.unwrap_or_else(|| {
                (0..remaining.len())
                    .min_by_key(|&i| {
                        let ty = &self.nodes[remaining[i]].node_type;
                        self.model.nodes_of_type(ty).count()
                    })
                    .expect("non-empty")
            });
            let v = remaining.remove(idx);
            bound.insert(v);
            order.push(v.to_string());
        }
        Some(order)
    }

    fn node_fits(&self, pn: &PatternNode, id: &str) -> bool {
        match self.model.node(id) {
            Some(node) => node.node_type == pn.node_type && pn.predicates.iter().all(|p| p.eval(&node.attrs)),
            None => false,
        }
    }

    fn candidates(&self, var: &str, binding: &Binding) -> Vec<ElementId> {
        let pn = &self.nodes[var];
        for e in self.edges {
            if e.target == var {
                if let Some(src) = binding.get(&e.source) {
                    return self
                        .model
                        .outgoing(src)
                        .filter(|(_, edge)| edge.edge_type == e.edge_type)
                        .map(|(_, edge)| edge.target.clone())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                }
            }
            if e.source == var {
                if let Some(tgt) = binding.get(&e.target) {
                    return self
                        .model
                        .incoming(tgt)
                        .filter(|(_, edge)| edge.edge_type == e.edge_type)
                        .map(|(_, edge)| edge.source.clone())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                }
            }
        }
        self.model.nodes_of_type(&pn.node_type).cloned().collect()
    }

    /// Depth-first extension. `emit` returns false to stop the search.
    fn run(
        &self,
        depth: usize,
        binding: &mut Binding,
        used: &mut BTreeSet<ElementId>,
        emit: &mut dyn FnMut(&Binding) -> bool,
    ) -> bool {
        if depth == self.order.len() {
            return emit(binding) || !self.stop_at_first;
        }
        let var = &self.order[depth];
        let pn = &self.nodes[var];
        for id in self.candidates(var, binding) {
            if used.contains(&id) || !self.node_fits(pn, &id) {
                continue;
            }
            binding.insert(var.clone(), id.clone());
            let edges_ok = self.edges.iter().all(|e| {
                if e.source != *var && e.target != *var {
                    return true;
                }
                match (binding.get(&e.source), binding.get(&e.target)) {
                    (Some(s), Some(t)) => self.model.has_edge(s, &e.edge_type, t),
                    _ => true,
                }
            });
            if edges_ok {
                used.insert(id.clone());
                let go_on = self.run(depth + 1, binding, used, emit);
                used.remove(&id);
                if !go_on {
                    binding.remove(var);
                    return false;
                }
            }
            binding.remove(var);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::model::{CmpOp, EditOp};

    fn high_rt() -> Pattern {
        Pattern::new()
            .node(
                "c",
                PatternNode::new("Component").with(Predicate::new("rt", CmpOp::Gt, 500.0)),
            )
            .anchored("c")
    }

    #[test]
    fn absent_type_matches_nothing() {
        let m = fixture::m0();
        let p = Pattern::new().node("x", PatternNode::new("Database"));
        assert!(match_pattern(&m, &p, None).unwrap().is_empty());
    }

    #[test]
    fn threshold_pattern_after_rt_change() {
        let mut m = fixture::m0();
        assert!(match_pattern(&m, &high_rt(), None).unwrap().is_empty());
        let mut t = m.begin_transaction().unwrap();
        let op = m.set_attr_op("C2", "rt", 700.0).unwrap();
        m.apply_edit(&mut t, op).unwrap();
        m.commit(&mut t).unwrap();
        let got = match_pattern(&m, &high_rt(), None).unwrap();
        assert_eq!(got, vec![Binding::from([("c".into(), "C2".into())])]);
        assert_eq!(match_pattern(&m, &high_rt(), Some("C2")).unwrap().len(), 1);
        assert!(match_pattern(&m, &high_rt(), Some("C1")).unwrap().is_empty());
    }

    #[test]
    fn unknown_anchor_is_an_error() {
        let m = fixture::m0();
        assert!(matches!(
            match_pattern(&m, &high_rt(), Some("nope")),
            Err(ModelError::UnknownAnchor(_))
        ));
        let unanchored = Pattern::new().node("c", PatternNode::new("Component"));
        assert!(matches!(
            match_pattern(&m, &unanchored, Some("C1")),
            Err(ModelError::UnknownAnchor(_))
        ));
    }

    #[test]
    fn edges_and_negatives() {
        let m = fixture::m0();
        let chain = Pattern::new()
            .node("a", PatternNode::new("Component"))
            .node("b", PatternNode::new("Component"))
            .edge("a", "connects", "b");
        let got = match_pattern(&m, &chain, None).unwrap();
        assert_eq!(got.len(), 2);
        // Components with no outgoing connection: only C3.
        let sink = Pattern::new()
            .node("a", PatternNode::new("Component"))
            .forbid(NegativePattern {
                nodes: BTreeMap::from([("b".into(), PatternNode::new("Component"))]),
                edges: vec![PatternEdge::new("a", "connects", "b")],
                conditions: vec![],
            });
        let got = match_pattern(&m, &sink, None).unwrap();
        assert_eq!(got, vec![Binding::from([("a".into(), "C3".into())])]);
    }

    #[test]
    fn matching_is_injective() {
        let m = fixture::m0();
        let two = Pattern::new()
            .node("a", PatternNode::new("Component"))
            .node("b", PatternNode::new("Component"));
        assert_eq!(match_pattern(&m, &two, None).unwrap().len(), 6);
    }

    #[test]
    fn ill_formed_pattern_rejected() {
        let m = fixture::m0();
        let p = Pattern::new()
            .node("a", PatternNode::new("Component"))
            .edge("a", "connects", "zz");
        assert!(matches!(
            match_pattern(&m, &p, None),
            Err(ModelError::InvalidPattern(_))
        ));
    }

    #[test]
    fn parameters_instantiate_to_literals() {
        let p = Pattern::new().node(
            "c",
            PatternNode::new("Component").with(Predicate {
                attr: "rt".into(),
                op: CmpOp::Gt,
                rhs: Operand::Param("MAX".into()),
            }),
        );
        let m = {
            let mut m = fixture::m0();
            let mut t = m.begin_transaction().unwrap();
            m.apply_edit(
                &mut t,
                EditOp::set_attr("C3", "rt", Some(Value::Float(250.0)), Some(Value::Float(900.0))),
            )
            .unwrap();
            m.commit(&mut t).unwrap();
            m
        };
        assert!(match_pattern(&m, &p, None).unwrap().is_empty());
        let q = p.instantiate(&BTreeMap::from([("MAX".into(), Value::Float(500.0))]));
        assert_eq!(match_pattern(&m, &q, None).unwrap().len(), 1);
    }
}
