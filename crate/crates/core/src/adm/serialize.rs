//! Canonical text form of a bundle. Declarations are emitted in the order
//! params, qualities, preferences, goals, conditions, options, rules;
//! comments and original layout are not preserved.

use std::fmt::Write;

use crate::change::{AdaptationOption, Effect, OptionKind, ValueExpr};
use crate::evaluation::{EvaluationCondition, Lane};
use crate::model::{NegativePattern, Operand, Pattern, PatternNode, Predicate, Value, VarPredicate};
use crate::objectives::{Direction, GoalKind, QualityDimension};

use super::AdaptationModel;

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn literal(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => num(*x),
        Value::Str(s) => {
            let mut out = String::from('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
            out
        }
    }
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Literal(v) => literal(v),
        Operand::Param(p) => p.clone(),
    }
}

fn cmp(var: &str, p: &Predicate) -> String {
    format!("{var}.{} {} {}", p.attr, p.op.symbol(), operand(&p.rhs))
}

fn node_clauses<'a>(
    nodes: impl Iterator<Item = (&'a String, &'a PatternNode)>,
    anchor: Option<&str>,
    clauses: &mut Vec<String>,
    conds: &mut Vec<String>,
) {
    for (var, n) in nodes {
        let at = if anchor == Some(var.as_str()) { "@" } else { "" };
        clauses.push(format!("{} {at}{var}", n.node_type));
        conds.extend(n.predicates.iter().map(|p| cmp(var, p)));
    }
}

fn where_clause(conds: &[String]) -> String {
    if conds.is_empty() {
        String::new()
    } else {
        format!(" where {}", conds.join(" and "))
    }
}

fn negative(nac: &NegativePattern) -> String {
    let mut clauses = Vec::new();
    let mut conds = Vec::new();
    node_clauses(nac.nodes.iter(), None, &mut clauses, &mut conds);
    clauses.extend(
        nac.edges
            .iter()
            .map(|e| format!("{} -{}-> {}", e.source, e.edge_type, e.target)),
    );
    conds.extend(nac.conditions.iter().map(|c| cmp(&c.var, &c.predicate)));
    format!("not ({}{})", clauses.join(", "), where_clause(&conds))
}

fn pattern(p: &Pattern) -> String {
    let mut clauses = Vec::new();
    let mut conds = Vec::new();
    node_clauses(p.nodes.iter(), p.anchor.as_deref(), &mut clauses, &mut conds);
    clauses.extend(
        p.edges
            .iter()
            .map(|e| format!("{} -{}-> {}", e.source, e.edge_type, e.target)),
    );
    clauses.extend(p.negatives.iter().map(negative));
    format!("{}{}", clauses.join(", "), where_clause(&conds))
}

fn var_predicates(ps: &[VarPredicate]) -> String {
    if ps.is_empty() {
        return "true".to_string();
    }
    ps.iter()
        .map(|p| cmp(&p.var, &p.predicate))
        .collect::<Vec<_>>()
        .join(" and ")
}

fn quality(out: &mut String, q: &QualityDimension) {
    let m = &q.metric;
    let target = match &m.attribute {
        Some(a) => format!("{}.{a}", m.node_type),
        None => m.node_type.clone(),
    };
    let filter: Vec<String> = m
        .filter
        .iter()
        .map(|p| format!("{} {} {}", p.attr, p.op.symbol(), operand(&p.rhs)))
        .collect();
    let filter = if filter.is_empty() {
        String::new()
    } else {
        format!(" where {}", filter.join(" and "))
    };
    let dir = match q.direction {
        Direction::Minimize => "minimize",
        Direction::Maximize => "maximize",
    };
    let _ = writeln!(
        out,
        "quality {} {{\n    metric {}({target}{filter});\n    direction {dir};\n    bounds [{}, {}];\n}}",
        q.id,
        m.aggregator.as_str(),
        num(q.lo),
        num(q.hi)
    );
}

fn condition(out: &mut String, c: &EvaluationCondition) {
    let lane = match c.lane {
        Lane::Fast => "fast",
        Lane::Slow => "slow",
    };
    let _ = write!(out, "condition {} priority {} lane {lane}", c.id, c.priority);
    if let Some(l) = &c.linked {
        let _ = write!(out, " for {l}");
    }
    for t in &c.triggers {
        match &t.attribute {
            Some(a) => {
                let _ = write!(out, " on ({}, {a})", t.kind.as_str());
            }
            None => {
                let _ = write!(out, " on ({})", t.kind.as_str());
            }
        }
    }
    let _ = writeln!(out, " {{\n    {}\n}}", pattern(&c.pattern));
}

fn value_expr(v: &ValueExpr) -> String {
    match v {
        ValueExpr::Literal { value } => literal(value),
        ValueExpr::Param { name } => name.clone(),
        ValueExpr::Attr { var, attr } => format!("{var}.{attr}"),
    }
}

fn effect(e: &Effect) -> String {
    match e {
        Effect::Set { var, attr, value } => format!("set {var}.{attr} = {}", value_expr(value)),
        Effect::Clone { source, new_var } => format!("clone {source} as {new_var}"),
        Effect::Link {
            source,
            edge_type,
            target,
        } => format!("link {source} -{edge_type}-> {target}"),
        Effect::Unlink {
            source,
            edge_type,
            target,
        } => format!("unlink {source} -{edge_type}-> {target}"),
        Effect::Delete { var } => format!("delete {var}"),
    }
}

fn option(out: &mut String, o: &AdaptationOption) {
    let params: Vec<String> = o
        .params
        .iter()
        .map(|p| format!("{}: {} = {}", p.name, p.kind, literal(&p.default)))
        .collect();
    let _ = writeln!(out, "option {}({}) {{", o.id, params.join(", "));
    let _ = writeln!(out, "    pre {};", pattern(&o.pre));
    match &o.kind {
        OptionKind::Primitive { effects } => {
            let edits: Vec<String> = effects.iter().map(effect).collect();
            let _ = writeln!(out, "    effect {};", edits.join(", "));
        }
        OptionKind::Composite { parts } => {
            let _ = writeln!(out, "    compose {};", parts.join(", "));
        }
    }
    let _ = writeln!(out, "    post {};", var_predicates(&o.post));
    for inv in &o.invariants {
        let _ = writeln!(out, "    invariant {};", pattern(inv));
    }
    let _ = writeln!(out, "    cost {};", num(o.cost));
    if !o.benefit.is_empty() {
        let _ = write!(out, "    benefit {{");
        for (q, b) in &o.benefit {
            let _ = write!(out, " {q} = {};", num(*b));
        }
        let _ = writeln!(out, " }}");
    }
    let _ = writeln!(out, "}}");
}

/// Renders a bundle as `.adm` text that parses and resolves back to an
/// equal bundle. Rules are always emitted enabled.
pub fn serialize(bundle: &AdaptationModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "adaptation {};", bundle.name);
    for (name, p) in &bundle.params {
        let _ = writeln!(out, "param {name}: {} = {};", p.kind, literal(&p.value));
    }
    for q in &bundle.qualities {
        quality(&mut out, q);
    }
    if !bundle.preferences.0.is_empty() {
        let _ = write!(out, "preferences {{");
        for (q, w) in &bundle.preferences.0 {
            let _ = write!(out, " {q} = {};", num(*w));
        }
        let _ = writeln!(out, " }}");
    }
    for g in &bundle.goals {
        let kind = match g.kind {
            GoalKind::Require => "require",
            GoalKind::Forbid => "forbid",
        };
        let _ = writeln!(out, "goal {} {{\n    {kind} {}\n}}", g.id, pattern(&g.pattern));
    }
    for c in &bundle.conditions {
        condition(&mut out, c);
    }
    for o in bundle.options.values() {
        option(&mut out, o);
    }
    for r in &bundle.rules {
        let actions: Vec<String> = r
            .actions
            .iter()
            .map(|a| {
                if a.args.is_empty() {
                    a.option.clone()
                } else {
                    let args: Vec<String> = a.args.iter().map(|(k, v)| format!("{k} = {}", literal(v))).collect();
                    format!("{}({})", a.option, args.join(", "))
                }
            })
            .collect();
        let _ = writeln!(out, "rule {}: when {} do {};", r.id, r.condition, actions.join(", "));
    }
    out
}
