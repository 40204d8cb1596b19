use super::*;
use crate::adm::compile;
use crate::fixture;
use crate::model::{CmpOp, Predicate};
use crate::sim::{monitor_sync, project, CompState, WorkloadSchedule};

fn bundle(extra: &str) -> AdaptationModel {
    let sources = [
        ("objectives.adm".to_string(), fixture::OBJECTIVES_ADM.to_string()),
        ("extra.adm".to_string(), format!("adaptation extra;\n{extra}")),
    ];
    compile(&sources, &fixture::shop_metamodel()).unwrap().0
}

fn synced(seed: u64) -> (SimSystem, ReflectionModel) {
    let sys = SimSystem::shop(seed);
    let model = project(&sys, fixture::shop_metamodel()).unwrap();
    (sys, model)
}

/// Runs `ticks` ticks of the loop and returns every item per tick.
fn run(
    engine: &mut Engine,
    sys: &mut SimSystem,
    model: &mut ReflectionModel,
    schedule: &WorkloadSchedule,
    ticks: u64,
) -> Vec<(u64, Vec<StepItem>)> {
    let mut out = Vec::new();
    for _ in 0..ticks {
        sys.tick(schedule);
        let tick = sys.clock();
        let events = monitor_sync(sys, model).unwrap();
        out.push((tick, engine.step(tick, model, sys, &events).unwrap()));
    }
    out
}

fn decisions(items: &[(u64, Vec<StepItem>)]) -> Vec<DecisionRecord> {
    items
        .iter()
        .flat_map(|(_, it)| it)
        .filter_map(|i| match i {
            StepItem::Decision(d) => Some(d.clone()),
            _ => None,
        })
        .collect()
}

/// M0 with C2 marked FAILED and its sensor readings untouched.
fn m0_c2_failed() -> ReflectionModel {
    let mut m = fixture::m0();
    let mut t = m.begin_transaction().unwrap();
    let op = m.set_attr_op("C2", "state", "FAILED").unwrap();
    m.apply_edit(&mut t, op).unwrap();
    m.commit(&mut t).unwrap();
    m
}

fn failed_result(model: &ReflectionModel, bundle: &AdaptationModel) -> Vec<EvaluationResult> {
    evaluate_full(model, &bundle.conditions, 1)
}

#[test]
fn schedule_examples() {
    let cfg = PlannerConfig::default();
    assert_eq!(
        schedule_tick(7, &cfg, false),
        Scheduled {
            coupled: true,
            decoupled: false
        }
    );
    assert!(schedule_tick(10, &cfg, false).decoupled);
    assert!(schedule_tick(3, &cfg, true).decoupled);
}

#[test]
fn config_bounds() {
    let mut cfg = PlannerConfig::default();
    assert!(cfg.validate().is_ok());
    cfg.beam_width = Some(0);
    assert!(cfg.validate().is_err());
    let cfg = PlannerConfig {
        slow_lane_period: 0,
        ..Default::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn fault_is_restarted_in_the_same_tick() {
    let (mut sys, mut model) = synced(1);
    let mut engine = Engine::new(
        fixture::shop_bundle(),
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Both,
    )
    .unwrap();
    let mut schedule = WorkloadSchedule::default();
    schedule.fault(5, "C2");
    let items = run(&mut engine, &mut sys, &mut model, &schedule, 5);
    let d = decisions(&items);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].tick, 5);
    assert_eq!(d[0].rule_id.as_deref(), Some("RestartFailed"));
    assert_eq!(
        d[0].executed_commands,
        vec![Command::Restart { component: "C2".into() }]
    );
    assert_eq!(d[0].reaction_latency, Some(0));
    assert_eq!(sys.component("C2").unwrap().state, CompState::Running);
}

#[test]
fn higher_priority_fires_first() {
    let b = bundle(
        r#"condition DbDown priority 10 lane fast on (attr-changed, state) { Component @c where c.state = "FAILED" and c.ctype = "DB" }
        condition AuthDown priority 5 lane fast on (attr-changed, state) { Component @c where c.state = "FAILED" and c.ctype = "Auth" }
        option Restart() { pre Component @c where c.state = "FAILED"; effect set c.state = "RUNNING"; post c.state = "RUNNING"; cost 1; }
        rule A: when AuthDown do Restart;
        rule D: when DbDown do Restart;"#,
    );
    let (mut sys, mut model) = synced(1);
    let mut engine = Engine::new(
        b,
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Coupled,
    )
    .unwrap();
    let mut schedule = WorkloadSchedule::default();
    schedule.fault(2, "C2");
    schedule.fault(2, "C3");
    let d = decisions(&run(&mut engine, &mut sys, &mut model, &schedule, 2));
    let fired: Vec<_> = d.iter().map(|r| r.condition_ids[0].as_str()).collect();
    assert_eq!(fired, ["DbDown", "AuthDown"]);
    assert!(d.iter().all(|r| r.gate_outcome.passed()));
}

#[test]
fn gate_failure_rolls_back() {
    let b = bundle(
        r#"condition Down priority 10 lane fast on (attr-changed, state) { Component @c where c.state = "FAILED" }
        option Broken() { pre Component @c where c.state = "FAILED"; effect set c.state = "RUNNING"; post c.state = "FAILED"; cost 1; }
        rule R: when Down do Broken;"#,
    );
    let (mut sys, mut model) = synced(1);
    let mut engine = Engine::new(
        b,
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Coupled,
    )
    .unwrap();
    sys.tick(&WorkloadSchedule::default());
    monitor_sync(&mut sys, &mut model).unwrap();
    sys.inject_fault("C2").unwrap();
    let events = monitor_sync(&mut sys, &mut model).unwrap();
    let before = model.digest();
    let items = engine.step(1, &mut model, &mut sys, &events).unwrap();
    assert_eq!(model.digest(), before);
    let StepItem::Decision(d) = items.iter().find(|i| matches!(i, StepItem::Decision(_))).unwrap() else {
        unreachable!()
    };
    assert!(matches!(d.gate_outcome, GateOutcome::Failed { .. }));
    assert!(d.executed_commands.is_empty());
    assert_eq!(sys.component("C2").unwrap().state, CompState::Failed);
}

#[test]
fn planner_restarts_failed_component() {
    let b = fixture::shop_bundle();
    let mut model = m0_c2_failed();
    let results = failed_result(&model, &b);
    let cfg = PlannerConfig {
        max_depth: 1,
        ..Default::default()
    };
    let before = model.digest();
    let p = plan(&mut model, &b, &results, &cfg).unwrap();
    assert_eq!(model.digest(), before);
    assert_eq!(p.steps.len(), 1);
    assert_eq!(p.steps[0].to_string(), "RestartComponent(c=C2)");
    assert!((p.current_utility - 0.71).abs() < 1e-9);
    assert!((p.predicted_utility - 0.9).abs() < 1e-9);
    assert!((p.score - (0.9 - 0.01)).abs() < 1e-9);
}

#[test]
fn nothing_to_plan_on_healthy_model() {
    let b = fixture::shop_bundle();
    let mut model = fixture::m0();
    let results = failed_result(&model, &b);
    let before = model.digest();
    let p = plan(&mut model, &b, &results, &PlannerConfig::default()).unwrap();
    assert!(p.is_empty());
    assert_eq!(model.digest(), before);
}

#[test]
fn beam_truncation_is_flagged() {
    let b = fixture::shop_bundle();
    let mut model = fixture::m0();
    let mut t = model.begin_transaction().unwrap();
    for c in ["C1", "C2", "C3"] {
        let op = model.set_attr_op(c, "state", "FAILED").unwrap();
        model.apply_edit(&mut t, op).unwrap();
    }
    model.commit(&mut t).unwrap();
    let results = failed_result(&model, &b);
    let cfg = PlannerConfig {
        beam_width: Some(1),
        ..Default::default()
    };
    let p = plan(&mut model, &b, &results, &cfg).unwrap();
    assert!(p.budget_exhausted);
    // Greedy still restarts all three.
    assert_eq!(p.steps.len(), 3);
    let full = plan(&mut model, &b, &results, &PlannerConfig::default()).unwrap();
    assert!(!full.budget_exhausted);
    assert_eq!(full.steps.len(), 3);
    assert!((full.score - p.score).abs() < 1e-9);
}

#[test]
fn execute_plan_outcomes() {
    let b = fixture::shop_bundle();
    let (mut sys, mut model) = synced(1);
    sys.inject_fault("C2").unwrap();
    monitor_sync(&mut sys, &mut model).unwrap();
    let results = failed_result(&model, &b);
    let p = plan(&mut model, &b, &results, &PlannerConfig::default()).unwrap();

    let empty = Plan {
        steps: vec![],
        ..p.clone()
    };
    let before = model.digest();
    assert_eq!(
        execute_plan(&mut model, &mut sys, &b, &empty).unwrap().gate,
        GateOutcome::Empty
    );
    assert_eq!(model.digest(), before);

    // Stale: C2 is restarted behind the planner's back.
    let mut stale_model = model.clone();
    let mut t = stale_model.begin_transaction().unwrap();
    let op = stale_model.set_attr_op("C2", "state", "RUNNING").unwrap();
    stale_model.apply_edit(&mut t, op).unwrap();
    stale_model.commit(&mut t).unwrap();
    let stale_digest = stale_model.digest();
    let out = execute_plan(&mut stale_model, &mut sys.clone(), &b, &p).unwrap();
    assert!(matches!(out.gate, GateOutcome::Aborted { .. }));
    assert_eq!(stale_model.digest(), stale_digest);

    let u0: f64 = utility(&model, &b.qualities, &b.preferences).unwrap();
    let out = execute_plan(&mut model, &mut sys, &b, &p).unwrap();
    assert!(out.gate.passed());
    assert_eq!(out.commands, vec![Command::Restart { component: "C2".into() }]);
    let u1: f64 = utility(&model, &b.qualities, &b.preferences).unwrap();
    assert!(u1 >= u0);
}

#[test]
fn decoupled_only_repairs_on_the_next_slow_tick() {
    let (mut sys, mut model) = synced(1);
    let mut engine = Engine::new(
        fixture::shop_bundle(),
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Decoupled,
    )
    .unwrap();
    let mut schedule = WorkloadSchedule::default();
    schedule.fault(7, "C2");
    let d = decisions(&run(&mut engine, &mut sys, &mut model, &schedule, 10));
    let passed: Vec<_> = d.iter().filter(|r| r.gate_outcome.passed()).collect();
    assert_eq!(passed.len(), 1);
    assert_eq!(passed[0].tick, 10);
    assert_eq!(passed[0].engine, EngineKind::Decoupled);
    assert_eq!(passed[0].reaction_latency, Some(3));
    assert_eq!(sys.component("C2").unwrap().state, CompState::Running);
}

#[test]
fn critical_result_escalates_to_decoupled() {
    let b = bundle(
        r#"condition Down priority 100 lane fast on (attr-changed, state) { Component @c where c.state = "FAILED" }
        condition Slow priority 1 lane slow { Component c where c.rt > 100000.0 }
        option Restart() { pre Component @c where c.state = "FAILED"; effect set c.state = "RUNNING"; post c.state = "RUNNING"; cost 1; }"#,
    );
    let (mut sys, mut model) = synced(1);
    let mut engine = Engine::new(b, fixture::shop_metamodel(), PlannerConfig::default(), EngineMode::Both).unwrap();
    let mut schedule = WorkloadSchedule::default();
    schedule.fault(3, "C1");
    let d = decisions(&run(&mut engine, &mut sys, &mut model, &schedule, 3));
    assert_eq!(d.len(), 1);
    assert_eq!((d[0].tick, d[0].engine), (3, EngineKind::Decoupled));
    assert!(d[0].gate_outcome.passed());
}

#[test]
fn hot_swap_applies_at_the_next_boundary() {
    let (mut sys, mut model) = synced(1);
    let mut engine = Engine::new(
        fixture::shop_bundle_v1(),
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Coupled,
    )
    .unwrap();
    let mut schedule = WorkloadSchedule::default();
    schedule.fault(2, "C2");
    let d = decisions(&run(&mut engine, &mut sys, &mut model, &schedule, 3));
    assert!(d.is_empty());

    engine.hot_swap(fixture::shop_bundle()).unwrap();
    assert!(engine.bundle().rules.is_empty(), "staged, not active");
    assert!(engine.swap_handle().is_pending());

    let items = run(&mut engine, &mut sys, &mut model, &schedule, 1);
    assert!(matches!(items[0].1[0], StepItem::Swap { .. }));
    let d = decisions(&items);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].tick, 4);
    assert_eq!(sys.component("C2").unwrap().state, CompState::Running);
}

#[test]
fn swap_with_dangling_reference_is_rejected() {
    let engine = Engine::new(
        fixture::shop_bundle(),
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Both,
    )
    .unwrap();
    let mut bad = fixture::shop_bundle();
    bad.rules[0].actions[0].option = "Reboot".into();
    assert!(matches!(engine.hot_swap(bad), Err(EngineError::InvalidModel(_))));
    assert!(!engine.swap_handle().is_pending());
}

#[test]
fn swap_can_be_staged_from_another_thread() {
    let engine = Engine::new(
        fixture::shop_bundle_v1(),
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Both,
    )
    .unwrap();
    let handle = engine.swap_handle();
    std::thread::spawn(move || handle.stage(fixture::shop_bundle()).unwrap())
        .join()
        .unwrap();
    assert!(engine.swap_handle().is_pending());
}

#[test]
fn history_filters() {
    assert!(history_query(&[], &HistoryFilter::default()).is_empty());
    let (mut sys, mut model) = synced(1);
    let mut engine = Engine::new(
        fixture::shop_bundle(),
        fixture::shop_metamodel(),
        PlannerConfig::default(),
        EngineMode::Both,
    )
    .unwrap();
    let mut schedule = WorkloadSchedule::default();
    schedule.fault(3, "C2");
    schedule.fault(8, "C3");
    run(&mut engine, &mut sys, &mut model, &schedule, 10);
    let all = history_query(engine.history(), &HistoryFilter::default());
    assert!(all.windows(2).all(|w| w[0].tick <= w[1].tick));
    let coupled = history_query(
        engine.history(),
        &HistoryFilter {
            engine: Some(EngineKind::Coupled),
            ..Default::default()
        },
    );
    assert_eq!(coupled.iter().map(|r| r.tick).collect::<Vec<_>>(), [3, 8]);
    let ranged = history_query(
        engine.history(),
        &HistoryFilter {
            ticks: Some((4, 10)),
            condition_id: Some("FailedComp".into()),
            ..Default::default()
        },
    );
    assert!(ranged.iter().all(|r| r.tick >= 4));
    assert!(ranged.iter().any(|r| r.tick == 8));
}

#[test]
fn sweep_finds_latent_violation() {
    // A violation present before the loop starts has no event; the first
    // sweep reports it.
    let b = bundle(
        r#"condition Slow priority 1 lane slow { Component c where c.rt > 100.0 }
        option Restart() { pre Component @c where c.state = "FAILED"; effect set c.state = "RUNNING"; post c.state = "RUNNING"; cost 1; }"#,
    );
    let mut model = fixture::m0();
    let conds = b.conditions.clone();
    assert!(analyze(&mut model, &conds, &[], 1, false).is_empty());
    let r = analyze(&mut model, &conds, &[], 1, true);
    assert_eq!(r.len(), 1);
    assert!(r[0].violated);
    assert_eq!(r[0].bindings.len(), 3);
    let _ = Predicate::new("rt", CmpOp::Gt, 100.0);
}
