//! Adaptation options: applicability, effects as model edits, verification,
//! composition, and cost/benefit estimates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    match_pattern, match_seeded, validate_conformance, Binding, EditOp, ElementId, ModelError, Pattern,
    ReflectionModel, ScalarKind, Transaction, Value, VarPredicate,
};
use crate::num::Real;
use crate::objectives::PreferenceWeights;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChangeError {
    #[error("precondition of `{0}` no longer holds")]
    PreconditionVanished(String),
    #[error("unknown option `{0}`")]
    UnknownOption(String),
    #[error("composition cycle through `{0}`")]
    CycleDetected(String),
    #[error("effect of `{0}` failed: {1}")]
    Effect(String, String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalParam {
    pub name: String,
    pub kind: ScalarKind,
    pub default: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expr", rename_all = "camelCase")]
pub enum ValueExpr {
    Literal { value: Value },
    Param { name: String },
    Attr { var: String, attr: String },
}

/// Edit template over pattern variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "camelCase")]
pub enum Effect {
    Set {
        var: String,
        attr: String,
        value: ValueExpr,
    },
    /// Copies the node bound to `source` (type and attributes, no edges)
    /// under a fresh `<source>#r<k>` id bound to `new_var`.
    Clone { source: String, new_var: String },
    Link {
        source: String,
        edge_type: String,
        target: String,
    },
    Unlink {
        source: String,
        edge_type: String,
        target: String,
    },
    /// Removes the node and its incident edges.
    Delete { var: String },
}

impl Effect {
    /// `(var, attribute)` written by this effect, if any.
    pub fn writes(&self) -> Option<(&str, &str)> {
        match self {
            Effect::Set { var, attr, .. } => Some((var, attr)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum OptionKind {
    Primitive { effects: Vec<Effect> },
    Composite { parts: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdaptationOption {
    pub id: String,
    pub params: Vec<FormalParam>,
    pub pre: Pattern,
    pub kind: OptionKind,
    /// Conjunction over bound variables; empty means `true`.
    pub post: Vec<VarPredicate>,
    /// Patterns that must not match after application.
    pub invariants: Vec<Pattern>,
    pub cost: f64,
    pub benefit: BTreeMap<String, f64>,
}

impl AdaptationOption {
    pub fn default_params(&self) -> BTreeMap<String, Value> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.default.clone()))
            .collect()
    }

    pub fn effects(&self) -> &[Effect] {
        match &self.kind {
            OptionKind::Primitive { effects } => effects,
            OptionKind::Composite { .. } => &[],
        }
    }
}

pub type OptionTable = BTreeMap<String, AdaptationOption>;

/// An option with a binding that satisfied its precondition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub option_id: String,
    pub binding: Binding,
    pub params: BTreeMap<String, ValueKey>,
}

/// Totally ordered wrapper so candidates sort canonically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueKey(pub Value);

impl Eq for ValueKey {}

impl PartialOrd for ValueKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ValueKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let rank = |v: &Value| match v {
            Value::Bool(_) => 0,
            Value::Int(_) | Value::Float(_) => 1,
            Value::Str(_) => 2,
        };
        rank(&self.0)
            .cmp(&rank(&other.0))
            .then_with(|| match (&self.0, &other.0) {
                (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
                (Value::Str(a), Value::Str(b)) => a.cmp(b),
                (a, b) => a.as_f64().unwrap_or(0.0).total_cmp(&b.as_f64().unwrap_or(0.0)),
            })
    }
}

impl Candidate {
    pub fn new(option_id: impl Into<String>, binding: Binding, params: BTreeMap<String, Value>) -> Self {
        Candidate {
            option_id: option_id.into(),
            binding,
            params: params.into_iter().map(|(k, v)| (k, ValueKey(v))).collect(),
        }
    }

    pub fn param_values(&self) -> BTreeMap<String, Value> {
        self.params.iter().map(|(k, v)| (k.clone(), v.0.clone())).collect()
    }
}

impl std::fmt::Display for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(", self.option_id)?;
        let mut first = true;
        for (k, v) in &self.binding {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Precondition with actual parameters substituted.
fn precondition(option: &AdaptationOption, params: &BTreeMap<String, Value>) -> Pattern {
    option.pre.instantiate(params)
}

/// Candidates of one option whose bindings extend `seed` (restricted to
/// variables the precondition declares with the same node type).
pub fn candidates_seeded(
    model: &ReflectionModel,
    option: &AdaptationOption,
    params: &BTreeMap<String, Value>,
    seed: &Binding,
) -> Vec<Candidate> {
    let pre = precondition(option, params);
    let seed: Binding = seed
        .iter()
        .filter(|(var, id)| {
            pre.nodes
                .get(*var)
                .is_some_and(|pn| model.node(id).is_some_and(|n| n.node_type == pn.node_type))
        })
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    match_seeded(model, &pre, &seed)
        .into_iter()
        .map(|b| Candidate::new(option.id.clone(), b, params.clone()))
        .collect()
}

/// Every (option, binding) whose precondition matches, with default
/// parameters. Anchored preconditions are matched at each of `anchors`
/// whose type fits; with no anchors, or for unanchored preconditions, the
/// whole model is searched. Canonical order by `(optionId, binding)`.
pub fn applicable_options(model: &ReflectionModel, options: &OptionTable, anchors: &[ElementId]) -> Vec<Candidate> {
    let mut out = BTreeSet::new();
    for option in options.values() {
        let params = option.default_params();
        let pre = precondition(option, &params);
        let anchored = match (pre.anchor_type(), anchors.is_empty()) {
            (Some(ty), false) => Some(ty.to_string()),
            _ => None,
        };
        let bindings: Vec<Binding> = match anchored {
            None => match_pattern(model, &pre, None).unwrap_or_default(),
            Some(ty) => anchors
                .iter()
                .filter(|a| model.node(a).is_some_and(|n| n.node_type == ty))
                .flat_map(|a| match_pattern(model, &pre, Some(a)).unwrap_or_default())
                .collect(),
        };
        for b in bindings {
            out.insert(Candidate::new(option.id.clone(), b, params.clone()));
        }
    }
    out.into_iter().collect()
}

/// Depth-first, left-to-right flattening into primitive option ids.
pub fn expand_composite(options: &OptionTable, id: &str) -> Result<Vec<String>, ChangeError> {
    fn walk(
        options: &OptionTable,
        id: &str,
        stack: &mut Vec<String>,
        out: &mut Vec<String>,
    ) -> Result<(), ChangeError> {
        if stack.iter().any(|s| s == id) {
            return Err(ChangeError::CycleDetected(id.to_string()));
        }
        let opt = options
            .get(id)
            .ok_or_else(|| ChangeError::UnknownOption(id.to_string()))?;
        match &opt.kind {
            OptionKind::Primitive { .. } => out.push(id.to_string()),
            OptionKind::Composite { parts } => {
                stack.push(id.to_string());
                for p in parts {
                    walk(options, p, stack, out)?;
                }
                stack.pop();
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(options, id, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// Variables bound after application: the candidate binding plus every
/// variable introduced by clones and sub-option matches.
pub type Env = Binding;

fn eval_expr(
    model: &ReflectionModel,
    env: &Env,
    params: &BTreeMap<String, Value>,
    expr: &ValueExpr,
) -> Result<Value, String> {
    match expr {
        ValueExpr::Literal { value } => Ok(value.clone()),
        ValueExpr::Param { name } => params
            .get(name)
            .cloned()
            .ok_or_else(|| format!("unbound parameter `{name}`")),
        ValueExpr::Attr { var, attr } => {
            let id = env.get(var).ok_or_else(|| format!("unbound variable `{var}`"))?;
            model
                .attr(id, attr)
                .cloned()
                .ok_or_else(|| format!("`{id}` has no `{attr}`"))
        }
    }
}

fn lookup<'a>(env: &'a Env, var: &str) -> Result<&'a ElementId, String> {
    env.get(var).ok_or_else(|| format!("unbound variable `{var}`"))
}

fn apply_effects(
    model: &mut ReflectionModel,
    txn: &mut Transaction,
    option: &AdaptationOption,
    params: &BTreeMap<String, Value>,
    env: &mut Env,
) -> Result<(), ChangeError> {
    let fail = |e: String| ChangeError::Effect(option.id.clone(), e);
    for effect in option.effects() {
        match effect {
            Effect::Set { var, attr, value } => {
                let id = lookup(env, var).map_err(fail)?.clone();
                let v = eval_expr(model, env, params, value).map_err(fail)?;
                let ty = model.node(&id).map(|n| n.node_type.clone()).unwrap_or_default();
                let v = match model.metamodel().attr(&ty, attr) {
                    Some(decl) => v.clone().coerce(decl.kind).unwrap_or(v),
                    None => v,
                };
                let op = model.set_attr_op(&id, attr, v)?;
                model.apply_edit(txn, op)?;
            }
            Effect::Clone { source, new_var } => {
                let src = lookup(env, source).map_err(fail)?.clone();
                let node = model
                    .node(&src)
                    .ok_or_else(|| fail(format!("`{src}` does not exist")))?
                    .clone();
                let id = model.fresh_replica_id(&src);
                model.apply_edit(txn, EditOp::add_node(id.clone(), node.node_type, node.attrs))?;
                env.insert(new_var.clone(), id);
            }
            Effect::Link {
                source,
                edge_type,
                target,
            } => {
                let s = lookup(env, source).map_err(fail)?.clone();
                let t = lookup(env, target).map_err(fail)?.clone();
                let id = model.fresh_edge_id(edge_type, &s, &t);
                model.apply_edit(txn, EditOp::add_edge(id, edge_type.clone(), s, t))?;
            }
            Effect::Unlink {
                source,
                edge_type,
                target,
            } => {
                let s = lookup(env, source).map_err(fail)?;
                let t = lookup(env, target).map_err(fail)?;
                let id = model
                    .outgoing(s)
                    .find(|(_, e)| &e.edge_type == edge_type && &e.target == t)
                    .map(|(id, _)| id.clone())
                    .ok_or_else(|| fail(format!("no `{edge_type}` edge from `{s}` to `{t}`")))?;
                let op = model.remove_edge_op(&id)?;
                model.apply_edit(txn, op)?;
            }
            Effect::Delete { var } => {
                let id = lookup(env, var).map_err(fail)?.clone();
                for e in model.incident_edges(&id) {
                    let op = model.remove_edge_op(&e)?;
                    model.apply_edit(txn, op)?;
                }
                let op = model.remove_node_op(&id)?;
                model.apply_edit(txn, op)?;
            }
        }
    }
    Ok(())
}

fn apply_unguarded(
    model: &mut ReflectionModel,
    txn: &mut Transaction,
    options: &OptionTable,
    cand: &Candidate,
) -> Result<Env, ChangeError> {
    let option = options
        .get(&cand.option_id)
        .ok_or_else(|| ChangeError::UnknownOption(cand.option_id.clone()))?;
    let params = cand.param_values();
    let pre = precondition(option, &params);
    if !match_seeded(model, &pre, &cand.binding).contains(&cand.binding) {
        return Err(ChangeError::PreconditionVanished(cand.option_id.clone()));
    }
    let mut env = cand.binding.clone();
    match &option.kind {
        OptionKind::Primitive { .. } => apply_effects(model, txn, option, &params, &mut env)?,
        OptionKind::Composite { .. } => {
            for part in expand_composite(options, &option.id)? {
                let sub = &options[&part];
                let mut sub_params = sub.default_params();
                for (k, v) in &params {
                    if sub_params.contains_key(k) {
                        sub_params.insert(k.clone(), v.clone());
                    }
                }
                let first = candidates_seeded(model, sub, &sub_params, &env)
                    .into_iter()
                    .next()
                    .ok_or_else(|| ChangeError::PreconditionVanished(part.clone()))?;
                for (k, v) in first.binding {
                    env.entry(k).or_insert(v);
                }
                apply_effects(model, txn, sub, &sub_params, &mut env)?;
            }
        }
    }
    Ok(env)
}

/// Applies `cand` inside an open transaction. On error every edit made by
/// this call is undone and the transaction stays open.
pub fn apply_option_in(
    model: &mut ReflectionModel,
    txn: &mut Transaction,
    options: &OptionTable,
    cand: &Candidate,
) -> Result<Env, ChangeError> {
    let sp = model.savepoint(txn)?;
    match apply_unguarded(model, txn, options, cand) {
        Ok(env) => Ok(env),
        Err(e) => {
            model.rollback_to(txn, sp)?;
            Err(e)
        }
    }
}

/// Applies `cand` in a new transaction that is left open for the gate.
/// On error the transaction is rolled back.
pub fn apply_option(
    model: &mut ReflectionModel,
    options: &OptionTable,
    cand: &Candidate,
) -> Result<(Transaction, Env), ChangeError> {
    let mut txn = model.begin_transaction()?;
    match apply_unguarded(model, &mut txn, options, cand) {
        Ok(env) => Ok((txn, env)),
        Err(e) => {
            model.rollback(&mut txn)?;
            Err(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reasons", rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail(Vec<String>),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// Post-application gate: postcondition on the bound elements, option
/// invariants (of the option and all its parts), and metamodel conformance.
pub fn verify_option(model: &ReflectionModel, options: &OptionTable, cand: &Candidate, env: &Env) -> Verdict {
    let mut reasons = Vec::new();
    let Some(option) = options.get(&cand.option_id) else {
        return Verdict::Fail(vec![format!("unknown option `{}`", cand.option_id)]);
    };
    let params = cand.param_values();
    for c in &option.post {
        let ok = env
            .get(&c.var)
            .and_then(|id| model.node(id))
            .is_some_and(|n| instantiate_pred(&c.predicate, &params).eval(&n.attrs));
        if !ok {
            reasons.push(format!(
                "postcondition {}.{} {} {} does not hold",
                c.var,
                c.predicate.attr,
                c.predicate.op.symbol(),
                operand_text(&c.predicate.rhs)
            ));
        }
    }
    let mut with_parts = vec![option];
    if let Ok(parts) = expand_composite(options, &option.id) {
        with_parts.extend(parts.iter().filter(|p| *p != &option.id).filter_map(|p| options.get(p)));
    }
    for opt in with_parts {
        for (i, inv) in opt.invariants.iter().enumerate() {
            let inv = inv.instantiate(&params);
            if !match_pattern(model, &inv, None).unwrap_or_default().is_empty() {
                reasons.push(format!("invariant {} of `{}` violated", i + 1, opt.id));
            }
        }
    }
    for v in validate_conformance(model, model.metamodel()) {
        reasons.push(format!("conformance: {v}"));
    }
    if reasons.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail(reasons)
    }
}

fn instantiate_pred(p: &crate::model::Predicate, params: &BTreeMap<String, Value>) -> crate::model::Predicate {
    use crate::model::Operand;
    match &p.rhs {
        Operand::Param(name) => match params.get(name) {
            Some(v) => crate::model::Predicate {
                attr: p.attr.clone(),
                op: p.op,
                rhs: Operand::Literal(v.clone()),
            },
            None => p.clone(),
        },
        Operand::Literal(_) => p.clone(),
    }
}

fn operand_text(o: &crate::model::Operand) -> String {
    match o {
        crate::model::Operand::Literal(v) => v.to_string(),
        crate::model::Operand::Param(p) => p.clone(),
    }
}

/// Raw score components for the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<F> {
    pub cost: F,
    /// `Σ_q w_q · benefit_q`.
    pub benefit: F,
}

pub fn estimate<F: Real>(option: &AdaptationOption, prefs: &PreferenceWeights) -> Estimate<F> {
    let benefit = option
        .benefit
        .iter()
        .fold(F::zero(), |acc, (q, &b)| acc + F::lit(prefs.weight(q)) * F::lit(b));
    Estimate {
        cost: F::lit(option.cost),
        benefit,
    }
}
