//! Binds names in parsed files to the metamodel and to each other.

use std::collections::{BTreeMap, BTreeSet};

use crate::change::{AdaptationOption, Effect, FormalParam, OptionKind, ValueExpr};
use crate::evaluation::{EvaluationCondition, Lane, Trigger};
use crate::model::{
    EventKind, Metamodel, NegativePattern, Operand, Pattern, PatternEdge, PatternNode, Predicate, ScalarKind, Value,
    VarPredicate,
};
use crate::objectives::{Aggregator, GoalKind, GoalSpec, Metric, PreferenceWeights, QualityDimension};

use super::ast::*;
use super::{AdaptationModel, CoupledRule, Diagnostic, ParamDecl, RuleAction, Span, Spans};

struct Resolver<'a> {
    mm: &'a Metamodel,
    params: BTreeMap<String, ParamDecl>,
    diags: Vec<Diagnostic>,
}

/// Names visible while resolving one declaration.
#[derive(Default, Clone)]
struct Scope {
    /// Formal parameters of the enclosing option.
    formals: BTreeMap<String, ScalarKind>,
    /// Pattern variable -> node type.
    vars: BTreeMap<String, String>,
}

impl Resolver<'_> {
    fn err(&mut self, code: &'static str, msg: String, span: &Span) {
        self.diags.push(Diagnostic::error(code, msg, Some(span.clone())));
    }

    fn check_type(&mut self, name: &Name) -> bool {
        if self.mm.node_type(&name.text).is_some() {
            return true;
        }
        self.err("unknown-type", format!("unknown node type `{}`", name.text), &name.span);
        false
    }

    fn attr_kind(&mut self, node_type: &str, attr: &Name) -> Option<ScalarKind> {
        match self.mm.attr(node_type, &attr.text) {
            Some(d) => Some(d.kind),
            None => {
                self.err(
                    "unknown-attribute",
                    format!("`{node_type}` has no attribute `{}`", attr.text),
                    &attr.span,
                );
                None
            }
        }
    }

    fn coerce(&mut self, v: Value, kind: ScalarKind, span: &Span) -> Option<Value> {
        let found = v.kind();
        match v.coerce(kind) {
            Some(v) => Some(v),
            None => {
                self.err("kind-mismatch", format!("expected {kind}, found {found}"), span);
                None
            }
        }
    }

    /// Right-hand side of a comparison against an attribute of `kind`.
    fn operand(&mut self, rhs: &Rhs, kind: Option<ScalarKind>, scope: &Scope, span: &Span) -> Option<Operand> {
        match rhs {
            Rhs::Literal(v) => match kind {
                Some(k) => self.coerce(v.clone(), k, span).map(Operand::Literal),
                None => Some(Operand::Literal(v.clone())),
            },
            Rhs::Name(n) => {
                if let Some(&fk) = scope.formals.get(&n.text) {
                    if let Some(k) = kind {
                        if fk != k && !(fk == ScalarKind::Int && k == ScalarKind::Float) {
                            self.err(
                                "kind-mismatch",
                                format!("parameter `{}` is {fk}, expected {k}", n.text),
                                &n.span,
                            );
                        }
                    }
                    return Some(Operand::Param(n.text.clone()));
                }
                match self.params.get(&n.text).cloned() {
                    Some(p) => match kind {
                        Some(k) => self.coerce(p.value, k, &n.span).map(Operand::Literal),
                        None => Some(Operand::Literal(p.value)),
                    },
                    None => {
                        self.err("unknown-id", format!("unknown parameter `{}`", n.text), &n.span);
                        None
                    }
                }
            }
            Rhs::Attr(v, _) => {
                self.err(
                    "unsupported",
                    "attribute references are only allowed in effect values".to_string(),
                    &v.span,
                );
                None
            }
        }
    }

    fn predicate(&mut self, node_type: &str, c: &CmpAst, scope: &Scope) -> Option<Predicate> {
        let kind = self.attr_kind(node_type, &c.attr)?;
        let rhs = self.operand(&c.rhs, Some(kind), scope, &c.attr.span)?;
        Some(Predicate {
            attr: c.attr.text.clone(),
            op: c.op,
            rhs,
        })
    }

    fn edge(
        &mut self,
        source: &Name,
        edge_type: &Name,
        target: &Name,
        vars: &BTreeMap<String, String>,
    ) -> Option<PatternEdge> {
        let mut ok = true;
        for v in [source, target] {
            if !vars.contains_key(&v.text) {
                self.err("unknown-id", format!("undeclared variable `{}`", v.text), &v.span);
                ok = false;
            }
        }
        let Some(et) = self.mm.edge_type(&edge_type.text) else {
            self.err(
                "unknown-type",
                format!("unknown edge type `{}`", edge_type.text),
                &edge_type.span,
            );
            return None;
        };
        if ok && (vars[&source.text] != et.source || vars[&target.text] != et.target) {
            self.err(
                "kind-mismatch",
                format!(
                    "`{}` connects {} to {}, not {} to {}",
                    et.name, et.source, et.target, vars[&source.text], vars[&target.text]
                ),
                &edge_type.span,
            );
            ok = false;
        }
        ok.then(|| PatternEdge::new(&source.text, &edge_type.text, &target.text))
    }

    /// Resolves a positive pattern; `scope.vars` receives its variables.
    fn pattern(&mut self, ast: &PatternAst, scope: &mut Scope) -> Pattern {
        let mut p = Pattern::new();
        for c in &ast.clauses {
            if let Clause::Node { node_type, var, anchor } = c {
                if scope.vars.contains_key(&var.text) {
                    self.err(
                        "duplicate-id",
                        format!("variable `{}` declared twice", var.text),
                        &var.span,
                    );
                    continue;
                }
                if !self.check_type(node_type) {
                    continue;
                }
                scope.vars.insert(var.text.clone(), node_type.text.clone());
                p.nodes.insert(var.text.clone(), PatternNode::new(&node_type.text));
                if *anchor {
                    if p.anchor.is_some() {
                        self.err(
                            "duplicate-id",
                            "a pattern has at most one anchor".to_string(),
                            &var.span,
                        );
                    }
                    p.anchor = Some(var.text.clone());
                }
            }
        }
        for c in &ast.clauses {
            match c {
                Clause::Node { .. } => {}
                Clause::Edge {
                    source,
                    edge_type,
                    target,
                } => {
                    let vars = scope.vars.clone();
                    if let Some(e) = self.edge(source, edge_type, target, &vars) {
                        p.edges.push(e);
                    }
                }
                Clause::Not(inner) => {
                    if let Some(nac) = self.negative(inner, scope) {
                        p.negatives.push(nac);
                    }
                }
            }
        }
        for c in &ast.conditions {
            let Some(ty) = scope.vars.get(&c.var.text).cloned() else {
                self.err(
                    "unknown-id",
                    format!("undeclared variable `{}`", c.var.text),
                    &c.var.span,
                );
                continue;
            };
            if let (Some(pred), Some(node)) = (self.predicate(&ty, c, scope), p.nodes.get_mut(&c.var.text)) {
                node.predicates.push(pred);
            }
        }
        p
    }

    fn negative(&mut self, ast: &PatternAst, outer: &Scope) -> Option<NegativePattern> {
        let mut nac = NegativePattern::default();
        let mut vars = outer.vars.clone();
        for c in &ast.clauses {
            match c {
                Clause::Node { node_type, var, anchor } => {
                    if *anchor {
                        self.err("syntax", "anchors are not allowed inside `not`".to_string(), &var.span);
                    }
                    if vars.contains_key(&var.text) {
                        self.err(
                            "duplicate-id",
                            format!("variable `{}` declared twice", var.text),
                            &var.span,
                        );
                        continue;
                    }
                    if self.check_type(node_type) {
                        vars.insert(var.text.clone(), node_type.text.clone());
                        nac.nodes.insert(var.text.clone(), PatternNode::new(&node_type.text));
                    }
                }
                Clause::Not(inner) => {
                    self.err("unsupported", "nested `not` is not supported".to_string(), &inner.span);
                }
                Clause::Edge { .. } => {}
            }
        }
        for c in &ast.clauses {
            if let Clause::Edge {
                source,
                edge_type,
                target,
            } = c
            {
                if let Some(e) = self.edge(source, edge_type, target, &vars) {
                    nac.edges.push(e);
                }
            }
        }
        let scope = Scope {
            formals: outer.formals.clone(),
            vars: vars.clone(),
        };
        for c in &ast.conditions {
            let Some(ty) = vars.get(&c.var.text).cloned() else {
                self.err(
                    "unknown-id",
                    format!("undeclared variable `{}`", c.var.text),
                    &c.var.span,
                );
                continue;
            };
            let Some(pred) = self.predicate(&ty, c, &scope) else {
                continue;
            };
            match nac.nodes.get_mut(&c.var.text) {
                Some(n) => n.predicates.push(pred),
                None => nac.conditions.push(VarPredicate {
                    var: c.var.text.clone(),
                    predicate: pred,
                }),
            }
        }
        if nac.nodes.is_empty() && nac.edges.is_empty() && nac.conditions.is_empty() {
            return None;
        }
        Some(nac)
    }

    fn var_predicates(&mut self, cmps: &[CmpAst], scope: &Scope) -> Vec<VarPredicate> {
        let mut out = Vec::new();
        for c in cmps {
            let Some(ty) = scope.vars.get(&c.var.text).cloned() else {
                self.err("unknown-id", format!("unbound variable `{}`", c.var.text), &c.var.span);
                continue;
            };
            if let Some(pred) = self.predicate(&ty, c, scope) {
                out.push(VarPredicate {
                    var: c.var.text.clone(),
                    predicate: pred,
                });
            }
        }
        out
    }

    fn quality(&mut self, q: &QualityAst) -> Option<QualityDimension> {
        if !self.check_type(&q.node_type) {
            return None;
        }
        let ty = q.node_type.text.clone();
        let attribute = match (&q.attribute, q.aggregator) {
            (Some(a), Aggregator::Fraction) => {
                self.err(
                    "syntax",
                    "`fraction` counts nodes and takes no attribute".to_string(),
                    &a.span,
                );
                return None;
            }
            (None, Aggregator::Fraction) => None,
            (None, agg) => {
                self.err(
                    "syntax",
                    format!("`{}` needs an attribute, e.g. `{ty}.attr`", agg.as_str()),
                    &q.node_type.span,
                );
                return None;
            }
            (Some(a), _) => {
                let kind = self.attr_kind(&ty, a)?;
                if !matches!(kind, ScalarKind::Int | ScalarKind::Float) {
                    self.err("kind-mismatch", format!("`{ty}.{}` is not numeric", a.text), &a.span);
                    return None;
                }
                Some(a.text.clone())
            }
        };
        let scope = Scope::default();
        let mut filter = Vec::new();
        for f in &q.filter {
            let kind = self.attr_kind(&ty, &f.attr)?;
            let rhs = self.operand(&f.rhs, Some(kind), &scope, &f.attr.span)?;
            filter.push(Predicate {
                attr: f.attr.text.clone(),
                op: f.op,
                rhs,
            });
        }
        if q.lo >= q.hi || !q.lo.is_finite() || !q.hi.is_finite() {
            self.err(
                "invalid-bounds",
                format!("bounds [{}, {}] need lo < hi", q.lo, q.hi),
                &q.name.span,
            );
            return None;
        }
        Some(QualityDimension {
            id: q.name.text.clone(),
            metric: Metric {
                aggregator: q.aggregator,
                node_type: ty,
                attribute,
                filter,
            },
            direction: q.direction,
            lo: q.lo,
            hi: q.hi,
        })
    }

    fn effect_value(&mut self, rhs: &Rhs, kind: Option<ScalarKind>, scope: &Scope, span: &Span) -> Option<ValueExpr> {
        match rhs {
            Rhs::Attr(var, attr) => {
                let Some(ty) = scope.vars.get(&var.text).cloned() else {
                    self.err("unknown-id", format!("unbound variable `{}`", var.text), &var.span);
                    return None;
                };
                self.attr_kind(&ty, attr)?;
                Some(ValueExpr::Attr {
                    var: var.text.clone(),
                    attr: attr.text.clone(),
                })
            }
            other => match self.operand(other, kind, scope, span)? {
                Operand::Literal(value) => Some(ValueExpr::Literal { value }),
                Operand::Param(name) => Some(ValueExpr::Param { name }),
            },
        }
    }

    fn bound_var(&mut self, scope: &Scope, v: &Name) -> Option<String> {
        match scope.vars.get(&v.text) {
            Some(ty) => Some(ty.clone()),
            None => {
                self.err("unknown-id", format!("unbound variable `{}`", v.text), &v.span);
                None
            }
        }
    }

    fn edit(&mut self, e: &EditAst, scope: &mut Scope) -> Option<Effect> {
        match e {
            EditAst::Set { var, attr, value } => {
                let ty = self.bound_var(scope, var)?;
                let kind = self.attr_kind(&ty, attr)?;
                let value = self.effect_value(value, Some(kind), scope, &attr.span)?;
                Some(Effect::Set {
                    var: var.text.clone(),
                    attr: attr.text.clone(),
                    value,
                })
            }
            EditAst::Clone { source, new_var } => {
                let ty = self.bound_var(scope, source)?;
                if scope.vars.contains_key(&new_var.text) {
                    self.err(
                        "duplicate-id",
                        format!("variable `{}` already bound", new_var.text),
                        &new_var.span,
                    );
                    return None;
                }
                scope.vars.insert(new_var.text.clone(), ty);
                Some(Effect::Clone {
                    source: source.text.clone(),
                    new_var: new_var.text.clone(),
                })
            }
            EditAst::Link {
                source,
                edge_type,
                target,
            }
            | EditAst::Unlink {
                source,
                edge_type,
                target,
            } => {
                let vars = scope.vars.clone();
                let pe = self.edge(source, edge_type, target, &vars)?;
                Some(if matches!(e, EditAst::Link { .. }) {
                    Effect::Link {
                        source: pe.source,
                        edge_type: pe.edge_type,
                        target: pe.target,
                    }
                } else {
                    Effect::Unlink {
                        source: pe.source,
                        edge_type: pe.edge_type,
                        target: pe.target,
                    }
                })
            }
            EditAst::Delete { var } => {
                self.bound_var(scope, var)?;
                Some(Effect::Delete { var: var.text.clone() })
            }
        }
    }

    fn option(&mut self, o: &OptionAst, option_ids: &BTreeSet<String>) -> Option<AdaptationOption> {
        let before = self.diags.len();
        let mut scope = Scope::default();
        let mut params = Vec::new();
        for f in &o.params {
            if scope.formals.contains_key(&f.name.text) {
                self.err(
                    "duplicate-id",
                    format!("parameter `{}` declared twice", f.name.text),
                    &f.name.span,
                );
                continue;
            }
            let Some(default) = self.coerce(f.default.clone(), f.kind, &f.name.span) else {
                continue;
            };
            scope.formals.insert(f.name.text.clone(), f.kind);
            params.push(FormalParam {
                name: f.name.text.clone(),
                kind: f.kind,
                default,
            });
        }
        let pre = self.pattern(&o.pre, &mut scope);
        let pre_scope = scope.clone();
        let kind = match &o.body {
            BodyAst::Effect(edits) => OptionKind::Primitive {
                effects: edits.iter().filter_map(|e| self.edit(e, &mut scope)).collect(),
            },
            BodyAst::Compose(parts) => {
                for p in parts {
                    if !option_ids.contains(&p.text) {
                        self.err("unknown-id", format!("unknown option `{}`", p.text), &p.span);
                    }
                }
                scope = pre_scope;
                OptionKind::Composite {
                    parts: parts.iter().map(|p| p.text.clone()).collect(),
                }
            }
        };
        let post = self.var_predicates(&o.post, &scope);
        let mut invariants = Vec::new();
        for inv in &o.invariants {
            let mut s = Scope {
                formals: scope.formals.clone(),
                vars: BTreeMap::new(),
            };
            invariants.push(self.pattern(inv, &mut s));
        }
        if o.cost < 0.0 {
            self.err("invalid-cost", format!("cost {} must be >= 0", o.cost), &o.name.span);
        }
        let benefit = o.benefit.iter().map(|(q, b)| (q.text.clone(), *b)).collect();
        (self.diags.len() == before).then(|| AdaptationOption {
            id: o.name.text.clone(),
            params,
            pre,
            kind,
            post,
            invariants,
            cost: o.cost,
            benefit,
        })
    }
}

/// Resolves parsed files against a metamodel into one bundle. The bundle
/// name is the first file's header name.
pub fn resolve(files: &[SourceFile], mm: &Metamodel) -> Result<AdaptationModel, Vec<Diagnostic>> {
    let mut r = Resolver {
        mm,
        params: BTreeMap::new(),
        diags: Vec::new(),
    };
    let mut spans = BTreeMap::new();
    let decls: Vec<&Decl> = files.iter().flat_map(|f| f.decls.iter()).collect();

    // Global uniqueness of declaration ids.
    for d in &decls {
        let name = match d {
            Decl::Param(p) => &p.name,
            Decl::Quality(q) => &q.name,
            Decl::Goal(g) => &g.name,
            Decl::Condition(c) => &c.name,
            Decl::Option(o) => &o.name,
            Decl::Rule(x) => &x.name,
            Decl::Preferences(_) => continue,
        };
        if spans.contains_key(&name.text) {
            r.err(
                "duplicate-id",
                format!("`{}` is declared more than once", name.text),
                &name.span,
            );
        } else {
            spans.insert(name.text.clone(), name.span.clone());
        }
    }

    for d in &decls {
        if let Decl::Param(p) = d {
            if let Some(value) = r.coerce(p.value.clone(), p.kind, &p.value_span) {
                r.params.insert(p.name.text.clone(), ParamDecl { kind: p.kind, value });
            }
        }
    }
    let option_ids: BTreeSet<String> = decls
        .iter()
        .filter_map(|d| match d {
            Decl::Option(o) => Some(o.name.text.clone()),
            _ => None,
        })
        .collect();

    let mut bundle = AdaptationModel {
        name: files.first().map(|f| f.name.text.clone()).unwrap_or_default(),
        ..Default::default()
    };
    let mut weights = BTreeMap::new();
    for d in &decls {
        match d {
            Decl::Param(_) => {}
            Decl::Quality(q) => {
                if let Some(q) = r.quality(q) {
                    bundle.qualities.push(q);
                }
            }
            Decl::Preferences(p) => {
                spans.entry("preferences".to_string()).or_insert_with(|| p.span.clone());
                for (q, w) in &p.weights {
                    if weights.insert(q.text.clone(), *w).is_some() {
                        r.err("duplicate-id", format!("second weight for `{}`", q.text), &q.span);
                    }
                }
            }
            Decl::Goal(g) => {
                let mut scope = Scope::default();
                let pattern = r.pattern(&g.pattern, &mut scope);
                bundle.goals.push(GoalSpec {
                    id: g.name.text.clone(),
                    kind: if g.require { GoalKind::Require } else { GoalKind::Forbid },
                    pattern,
                });
            }
            Decl::Condition(c) => {
                let mut scope = Scope::default();
                let pattern = r.pattern(&c.pattern, &mut scope);
                let mut triggers = Vec::new();
                for t in &c.triggers {
                    let Some(kind) = EventKind::parse(&t.kind.text) else {
                        r.err(
                            "unknown-id",
                            format!("unknown event kind `{}`", t.kind.text),
                            &t.kind.span,
                        );
                        continue;
                    };
                    if let Some(a) = &t.attribute {
                        if !mm.node_types().any(|nt| nt.attributes.contains_key(&a.text)) {
                            r.err(
                                "unknown-attribute",
                                format!("no node type has attribute `{}`", a.text),
                                &a.span,
                            );
                        }
                    }
                    triggers.push(Trigger {
                        kind,
                        attribute: t.attribute.as_ref().map(|a| a.text.clone()),
                    });
                }
                bundle.conditions.push(EvaluationCondition {
                    id: c.name.text.clone(),
                    priority: c.priority,
                    triggers,
                    pattern,
                    lane: if c.fast { Lane::Fast } else { Lane::Slow },
                    linked: c.linked.as_ref().map(|l| l.text.clone()),
                });
            }
            Decl::Option(o) => {
                if let Some(opt) = r.option(o, &option_ids) {
                    bundle.options.insert(opt.id.clone(), opt);
                }
            }
            Decl::Rule(_) => {}
        }
    }
    bundle.preferences = PreferenceWeights(weights);

    let quality_ids: BTreeSet<&str> = bundle.qualities.iter().map(|q| q.id.as_str()).collect();
    let goal_ids: BTreeSet<&str> = bundle.goals.iter().map(|g| g.id.as_str()).collect();
    for d in &decls {
        match d {
            Decl::Preferences(p) => {
                for (q, _) in &p.weights {
                    if !quality_ids.contains(q.text.as_str()) {
                        r.err(
                            "unknown-id",
                            format!("preference for undeclared quality `{}`", q.text),
                            &q.span,
                        );
                    }
                }
            }
            Decl::Option(o) => {
                for (q, _) in &o.benefit {
                    if !quality_ids.contains(q.text.as_str()) {
                        r.err(
                            "unknown-id",
                            format!("benefit on undeclared quality `{}`", q.text),
                            &q.span,
                        );
                    }
                }
            }
            Decl::Condition(c) => {
                if let Some(l) = &c.linked {
                    if !quality_ids.contains(l.text.as_str()) && !goal_ids.contains(l.text.as_str()) {
                        r.err(
                            "unknown-id",
                            format!("`{}` is neither a quality nor a goal", l.text),
                            &l.span,
                        );
                    }
                }
            }
            Decl::Rule(rule) => {
                if bundle.condition(&rule.condition.text).is_none() {
                    r.err(
                        "unknown-id",
                        format!("unknown condition `{}`", rule.condition.text),
                        &rule.condition.span,
                    );
                }
                let mut actions = Vec::new();
                for a in &rule.actions {
                    let Some(opt) = bundle.options.get(&a.option.text) else {
                        if !option_ids.contains(&a.option.text) {
                            r.err(
                                "unknown-id",
                                format!("unknown option `{}`", a.option.text),
                                &a.option.span,
                            );
                        }
                        continue;
                    };
                    let mut args = BTreeMap::new();
                    for (n, v) in &a.args {
                        match opt.params.iter().find(|p| p.name == n.text) {
                            None => r.err(
                                "unknown-id",
                                format!("`{}` has no parameter `{}`", opt.id, n.text),
                                &n.span,
                            ),
                            Some(p) => {
                                let kind = p.kind;
                                if let Some(v) = r.coerce(v.clone(), kind, &n.span) {
                                    args.insert(n.text.clone(), v);
                                }
                            }
                        }
                    }
                    actions.push(RuleAction {
                        option: a.option.text.clone(),
                        args,
                    });
                }
                bundle.rules.push(CoupledRule {
                    id: rule.name.text.clone(),
                    condition: rule.condition.text.clone(),
                    actions,
                    enabled: true,
                });
            }
            _ => {}
        }
    }

    bundle.params = r.params;
    bundle.spans = Spans(spans);
    if r.diags.is_empty() {
        Ok(bundle)
    } else {
        Err(r.diags)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use crate::fixture;

    fn resolve_src(src: &str) -> Result<AdaptationModel, Vec<Diagnostic>> {
        let f = parse(src, "t.adm").expect("parses");
        resolve(&[f], &fixture::shop_metamodel())
    }

    #[test]
    fn condition_over_component_resolves() {
        let b = resolve_src(
            r#"adaptation t;
            param LIMIT: float = 500;
            condition HighRT priority 5 lane slow on (attr-changed, rt) { Component @c where c.rt > LIMIT }"#,
        )
        .unwrap();
        let c = &b.conditions[0];
        assert_eq!(c.pattern.anchor.as_deref(), Some("c"));
        assert_eq!(
            c.pattern.nodes["c"].predicates[0],
            Predicate::new("rt", crate::model::CmpOp::Gt, 500.0)
        );
    }

    #[test]
    fn misspelled_type_has_span() {
        let errs = resolve_src("adaptation t;\ngoal G { forbid Cmponent c }").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].code, "unknown-type");
        let s = errs[0].span.as_ref().unwrap();
        assert_eq!((s.line, s.col), (2, 17));
    }

    #[test]
    fn rule_with_undeclared_option() {
        let errs = resolve_src(
            r#"adaptation t;
            condition F priority 1 lane fast { Component c where c.state = "FAILED" }
            rule R: when F do Reboot;"#,
        )
        .unwrap_err();
        assert_eq!(errs[0].code, "unknown-id");
        assert!(errs[0].message.contains("Reboot"));
    }

    #[test]
    fn kind_mismatch_in_where() {
        let errs = resolve_src("adaptation t;\ngoal G { forbid Component c where c.rt = \"slow\" }").unwrap_err();
        assert_eq!(errs[0].code, "kind-mismatch");
    }

    #[test]
    fn negative_clause_splits_conditions() {
        let b = resolve_src(
            r#"adaptation t;
            goal G { forbid Component c, not (Component d, d -connects-> c where d.state = "RUNNING" and c.load > 0) }"#,
        )
        .unwrap();
        let nac = &b.goals[0].pattern.negatives[0];
        assert_eq!(nac.nodes["d"].predicates.len(), 1);
        assert_eq!(nac.conditions[0].var, "c");
    }
}
