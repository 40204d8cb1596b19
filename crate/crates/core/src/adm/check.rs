//! Lightweight well-formedness checks over a resolved bundle.

use std::collections::{BTreeMap, BTreeSet};

use crate::change::{expand_composite, AdaptationOption, ChangeError, Effect, OptionKind};
use crate::evaluation::Lane;
use crate::model::Metamodel;

use super::{AdaptationModel, Diagnostic};

/// Node type of every variable an option's effects can refer to: pre
/// pattern variables plus clones, which inherit their source's type.
fn var_types(opt: &AdaptationOption) -> BTreeMap<&str, &str> {
    let mut out: BTreeMap<&str, &str> = opt
        .pre
        .nodes
        .iter()
        .map(|(v, n)| (v.as_str(), n.node_type.as_str()))
        .collect();
    for e in opt.effects() {
        if let Effect::Clone { source, new_var } = e {
            if let Some(&t) = out.get(source.as_str()) {
                out.insert(new_var, t);
            }
        }
    }
    out
}

/// `(var, attr)` pairs written by an option, composites expanded. Cycles
/// and unknown parts are reported elsewhere and contribute nothing.
fn written(bundle: &AdaptationModel, option: &str) -> BTreeSet<(String, String)> {
    let parts = expand_composite(&bundle.options, option).unwrap_or_default();
    parts
        .iter()
        .filter_map(|p| bundle.options.get(p))
        .flat_map(|o| o.effects().iter().filter_map(Effect::writes))
        .map(|(v, a)| (v.to_string(), a.to_string()))
        .collect()
}

/// Checks a resolved bundle. Errors make the bundle unusable; warnings are
/// advisory.
pub fn static_check(bundle: &AdaptationModel, mm: &Metamodel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let span = |id: &str| bundle.spans.get(id);

    if let Err(e) = bundle.preferences.validate(&bundle.qualities) {
        out.push(Diagnostic::error("weight-sum", e.to_string(), span("preferences")));
    }
    if bundle.preferences.0.is_empty() && !bundle.qualities.is_empty() {
        out.push(Diagnostic::error(
            "weight-sum",
            "qualities are declared but no preference weights are given",
            None,
        ));
    }

    let mut by_priority: BTreeMap<i64, &str> = BTreeMap::new();
    for c in &bundle.conditions {
        if let Some(first) = by_priority.insert(c.priority, &c.id) {
            by_priority.insert(c.priority, first);
            out.push(Diagnostic::error(
                "duplicate-priority",
                format!("`{}` has priority {} already used by `{first}`", c.id, c.priority),
                span(&c.id),
            ));
        }
        if !c.triggers.is_empty() && c.pattern.anchor.is_none() {
            out.push(Diagnostic::error(
                "missing-anchor",
                format!("`{}` has triggers but no `@` anchor variable", c.id),
                span(&c.id),
            ));
        }
    }

    let qualities: BTreeSet<&str> = bundle.qualities.iter().map(|q| q.id.as_str()).collect();
    for opt in bundle.options.values() {
        match expand_composite(&bundle.options, &opt.id) {
            Err(ChangeError::CycleDetected(at)) => out.push(Diagnostic::error(
                "composite-cycle",
                format!("composite `{}` reaches itself through `{at}`", opt.id),
                span(&opt.id),
            )),
            Err(ChangeError::UnknownOption(p)) => out.push(Diagnostic::error(
                "unknown-id",
                format!("`{}` composes unknown option `{p}`", opt.id),
                span(&opt.id),
            )),
            _ => {}
        }
        if let OptionKind::Primitive { effects } = &opt.kind {
            let types = var_types(opt);
            for (var, attr) in effects.iter().filter_map(Effect::writes) {
                let Some(ty) = types.get(var) else { continue };
                if mm.attr(ty, attr).is_some_and(|d| d.sensor_owned) {
                    out.push(Diagnostic::error(
                        "sensor-owned-write",
                        format!("`{}` writes `{ty}.{attr}`, which only the monitor may set", opt.id),
                        span(&opt.id),
                    ));
                }
            }
        }
        for q in opt.benefit.keys() {
            if !qualities.contains(q.as_str()) {
                out.push(Diagnostic::error(
                    "unknown-id",
                    format!("`{}` declares a benefit on undeclared quality `{q}`", opt.id),
                    span(&opt.id),
                ));
            }
        }
    }

    for r in &bundle.rules {
        if bundle.condition(&r.condition).is_none() {
            out.push(Diagnostic::error(
                "unknown-id",
                format!("rule `{}` names unknown condition `{}`", r.id, r.condition),
                span(&r.id),
            ));
        }
        for a in &r.actions {
            if !bundle.options.contains_key(&a.option) {
                out.push(Diagnostic::error(
                    "unknown-id",
                    format!("rule `{}` names unknown option `{}`", r.id, a.option),
                    span(&r.id),
                ));
            }
        }
    }

    // Rules sharing a condition whose effects write the same variable
    // attribute may fight over it.
    for (i, a) in bundle.rules.iter().enumerate() {
        let wa: BTreeSet<_> = a.actions.iter().flat_map(|x| written(bundle, &x.option)).collect();
        for b in &bundle.rules[i + 1..] {
            if a.condition != b.condition {
                continue;
            }
            let wb: BTreeSet<_> = b.actions.iter().flat_map(|x| written(bundle, &x.option)).collect();
            for (var, attr) in wa.intersection(&wb) {
                out.push(Diagnostic::warning(
                    "rule-overlap",
                    format!(
                        "rules `{}` and `{}` both fire on `{}` and write `{var}.{attr}`",
                        a.id, b.id, a.condition
                    ),
                    span(&b.id),
                ));
            }
        }
    }

    let has_slow = bundle.conditions.iter().any(|c| c.lane == Lane::Slow);
    if !has_slow {
        let reachable: BTreeSet<String> = bundle
            .rules
            .iter()
            .flat_map(|r| &r.actions)
            .flat_map(|a| {
                let mut v = expand_composite(&bundle.options, &a.option).unwrap_or_default();
                v.push(a.option.clone());
                v
            })
            .collect();
        for id in bundle.options.keys() {
            if !reachable.contains(id) {
                out.push(Diagnostic::warning(
                    "unreachable-option",
                    format!("option `{id}` is used by no rule and there is no slow-lane condition"),
                    span(id),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::compile;
    use super::*;
    use crate::fixture;

    const BASE: &str = r#"adaptation t;
        quality perf { metric avg(Component.rt); direction minimize; bounds [0, 1000]; }
        quality avail { metric fraction(Component where state = "RUNNING"); direction maximize; bounds [0, 1]; }
        condition FailedComp priority 10 lane fast on (attr-changed, state) { Component @c where c.state = "FAILED" }
        option Restart() { pre Component c where c.state = "FAILED"; effect set c.state = "RUNNING"; post c.state = "RUNNING"; cost 1; }
        option Reset() { pre Component c where c.state = "FAILED"; effect set c.state = "RUNNING"; post true; cost 2; }
    "#;

    fn check(extra: &str) -> Vec<Diagnostic> {
        let mm = fixture::shop_metamodel();
        let f = super::super::parse(&format!("{BASE}{extra}"), "t.adm").unwrap();
        let b = super::super::resolve(&[f], &mm).unwrap();
        static_check(&b, &mm)
    }

    fn codes(d: &[Diagnostic]) -> Vec<&str> {
        d.iter().map(|d| d.code).collect()
    }

    #[test]
    fn weights_that_sum_to_one_pass() {
        let d = check("preferences { perf = 0.4; avail = 0.6; } rule R: when FailedComp do Restart, Reset;");
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn weights_summing_to_point_nine_fail() {
        let d = check("preferences { perf = 0.3; avail = 0.6; } rule R: when FailedComp do Restart, Reset;");
        assert_eq!(codes(&d), ["weight-sum"]);
    }

    #[test]
    fn overlap_matches_hand_computed_intersection() {
        // R1 writes {(c, state)}, R2 writes {(c, state)}: one shared target.
        let d = check(
            "preferences { perf = 0.4; avail = 0.6; }
             rule R1: when FailedComp do Restart;
             rule R2: when FailedComp do Reset;",
        );
        assert_eq!(codes(&d), ["rule-overlap"]);
        assert!(d[0].message.contains("c.state"));
        assert!(!d[0].is_error());
    }

    #[test]
    fn duplicate_priority_and_unreachable() {
        let d = check(
            "preferences { perf = 0.4; avail = 0.6; }
             condition Other priority 10 lane fast { Component c }",
        );
        assert_eq!(
            codes(&d),
            ["duplicate-priority", "unreachable-option", "unreachable-option"]
        );
    }

    #[test]
    fn composite_cycle_and_sensor_write() {
        let d = check(
            "preferences { perf = 0.4; avail = 0.6; }
             option A() { pre Component c; compose B; post true; cost 1; }
             option B() { pre Component c; compose A; post true; cost 1; }
             option Poke() { pre Component c; effect set c.rt = 1.0; post true; cost 1; }
             condition Slow priority 1 lane slow { Component c }",
        );
        assert_eq!(codes(&d), ["composite-cycle", "composite-cycle", "sensor-owned-write"]);
    }

    #[test]
    fn compile_returns_warnings_separately() {
        let mm = fixture::shop_metamodel();
        let src = format!("{BASE} preferences {{ perf = 0.4; avail = 0.6; }} rule R1: when FailedComp do Restart; rule R2: when FailedComp do Reset;");
        let (_, warnings) = compile(&[("t.adm".into(), src)], &mm).unwrap();
        assert_eq!(warnings.len(), 1);
    }
}
