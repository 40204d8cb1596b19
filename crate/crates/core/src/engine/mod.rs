//! Feedback-loop engines over a reflection model and its managed system.
//!
//! Per tick, after the monitor has synchronized the model: the coupled
//! engine evaluates its conditions and fires rules directly, then the
//! decoupled engine (every `K` ticks, or at once on escalation) analyzes,
//! searches for a plan, and executes it. Every adaptation is one
//! transaction that passes the consistency gate before it is committed
//! and actuated.

mod planner;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adm::{static_check, AdaptationModel, CoupledRule, Diagnostic};
use crate::change::{apply_option_in, candidates_seeded, verify_option, Candidate, Verdict};
use crate::evaluation::{annotate_and_publish, evaluate_full, evaluate_incremental, EvaluationCondition, Lane};
use crate::model::{Binding, ChangeEvent, ElementId, EvaluationResult, Metamodel, ModelError, ReflectionModel};
use crate::objectives::{goals_hold, utility, ObjectiveError};
use crate::sim::{execute_sync, translate_delta, Command, SimSystem, SyncError};
use crate::Utility;

pub use planner::{anchors_of, plan, Plan, SCORE_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid adaptation model:\n{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    InvalidModel(Vec<Diagnostic>),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Sync(#[from] SyncError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Coupled,
    Decoupled,
}

/// Which engines a run uses. Lanes only partition conditions in `Both`;
/// a single engine handles every condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    Coupled,
    Decoupled,
    #[default]
    Both,
}

impl EngineMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coupled" => Some(EngineMode::Coupled),
            "decoupled" => Some(EngineMode::Decoupled),
            "both" => Some(EngineMode::Both),
            _ => None,
        }
    }

    fn runs(self, kind: EngineKind) -> bool {
        !matches!(
            (self, kind),
            (EngineMode::Coupled, EngineKind::Decoupled) | (EngineMode::Decoupled, EngineKind::Coupled)
        )
    }

    fn handles(self, kind: EngineKind, lane: Lane) -> bool {
        match self {
            EngineMode::Both => (kind == EngineKind::Coupled) == (lane == Lane::Fast),
            _ => self.runs(kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Maximum plan length `D`.
    pub max_depth: usize,
    /// States kept per search level `B`; `None` keeps all.
    pub beam_width: Option<usize>,
    /// `λ` in `utility − λ·Σcost`.
    pub cost_weight: f64,
    /// Full sweep period `F` in ticks.
    pub full_sweep_period: u64,
    /// Decoupled engine period `K` in ticks.
    pub slow_lane_period: u64,
    /// Fast-lane results at or above this priority run the decoupled
    /// engine in the same tick.
    pub critical_priority: i64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_depth: 3,
            beam_width: Some(8),
            cost_weight: 0.01,
            full_sweep_period: 20,
            slow_lane_period: 5,
            critical_priority: 100,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        if self.max_depth < 1 {
            return bad("maxDepth must be at least 1");
        }
        if self.beam_width == Some(0) {
            return bad("beamWidth must be at least 1");
        }
        if !self.cost_weight.is_finite() || self.cost_weight < 0.0 {
            return bad("costWeight must be a finite number >= 0");
        }
        if self.full_sweep_period < 1 {
            return bad("fullSweepPeriod must be at least 1");
        }
        if self.slow_lane_period < 1 {
            return bad("slowLanePeriod must be at least 1");
        }
        Ok(())
    }
}

/// Consistency-gate verdict for one adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "camelCase")]
pub enum GateOutcome {
    /// Verified, committed and actuated.
    Passed,
    /// Verification or translation failed; the transaction was rolled back.
    Failed { reasons: Vec<String> },
    /// A plan step no longer applied; nothing was changed.
    Aborted { reason: String },
    /// Committed, but a command failed on the system. The next monitor
    /// pass brings the model back in line.
    ExecutionFailed { reason: String },
    /// Nothing to do.
    Empty,
}

impl GateOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, GateOutcome::Passed)
    }
}

/// One adaptation decision. Coupled records are one rule firing;
/// decoupled records are one planning round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecisionRecord {
    pub tick: u64,
    pub engine: EngineKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    pub condition_ids: Vec<String>,
    pub consumed_event_ids: Vec<u64>,
    pub result_ids: Vec<String>,
    pub chosen_candidates: Vec<Candidate>,
    pub utility_before: Utility,
    pub utility_after: Utility,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_utility: Option<Utility>,
    pub gate_outcome: GateOutcome,
    pub executed_commands: Vec<Command>,
    pub budget_exhausted: bool,
    /// Ticks from the earliest consumed event to this decision.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reaction_latency: Option<u64>,
}

/// Engines scheduled for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheduled {
    pub coupled: bool,
    pub decoupled: bool,
}

/// The coupled engine runs every tick; the decoupled one on multiples of
/// `K` or when a critical fast-lane result escalates.
pub fn schedule_tick(tick: u64, cfg: &PlannerConfig, escalated: bool) -> Scheduled {
    Scheduled {
        coupled: true,
        decoupled: tick.is_multiple_of(cfg.slow_lane_period) || escalated,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HistoryFilter {
    /// Inclusive tick range.
    pub ticks: Option<(u64, u64)>,
    pub engine: Option<EngineKind>,
    pub condition_id: Option<String>,
}

/// Records matching every set field of `filter`, in tick order.
pub fn history_query<'a>(history: &'a [DecisionRecord], filter: &HistoryFilter) -> Vec<&'a DecisionRecord> {
    let mut out: Vec<&DecisionRecord> = history
        .iter()
        .filter(|r| filter.ticks.is_none_or(|(lo, hi)| (lo..=hi).contains(&r.tick)))
        .filter(|r| filter.engine.is_none_or(|e| r.engine == e))
        .filter(|r| {
            filter
                .condition_id
                .as_ref()
                .is_none_or(|c| r.condition_ids.iter().any(|x| x == c))
        })
        .collect();
    out.sort_by_key(|r| r.tick);
    out
}

/// Evaluates `conditions` on the events (and over the whole model when
/// `sweep` is set) and annotates violated results on the model.
pub fn analyze(
    model: &mut ReflectionModel,
    conditions: &[EvaluationCondition],
    events: &[ChangeEvent],
    tick: u64,
    sweep: bool,
) -> Vec<EvaluationResult> {
    let mut results = evaluate_incremental(model, conditions, events, tick);
    if sweep {
        results.extend(evaluate_full(model, conditions, tick));
    }
    // Stable: incremental before sweep results of equal priority.
    results.sort_by_key(|r| std::cmp::Reverse(r.priority));
    annotate_and_publish(model, &results);
    results
}

/// What the adaptation transaction did.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub gate: GateOutcome,
    pub commands: Vec<Command>,
    /// Events reported by the system while executing the commands.
    pub events: Vec<ChangeEvent>,
}

impl Execution {
    fn not_run(gate: GateOutcome) -> Self {
        Execution {
            gate,
            commands: Vec::new(),
            events: Vec::new(),
        }
    }
}

/// Translates the open transaction's delta; commits and actuates it when
/// every command maps, rolls back otherwise.
fn commit_and_execute(
    model: &mut ReflectionModel,
    txn: &mut crate::model::Transaction,
    sys: &mut SimSystem,
) -> Result<Execution, EngineError> {
    if let Err(e) = translate_delta(txn.ops(), sys) {
        model.rollback(txn)?;
        return Ok(Execution::not_run(GateOutcome::Failed {
            reasons: vec![e.to_string()],
        }));
    }
    let delta = model.commit(txn)?;
    debug_assert!(crate::model::validate_conformance(model, model.metamodel()).is_empty());
    Ok(match execute_sync(&delta, sys) {
        Ok(out) => Execution {
            gate: GateOutcome::Passed,
            commands: out.commands,
            events: out.events,
        },
        Err(e) => Execution::not_run(GateOutcome::ExecutionFailed { reason: e.to_string() }),
    })
}

/// Re-applies a plan in one transaction, gates each step, then commits and
/// actuates. A step whose precondition vanished aborts the whole plan.
pub fn execute_plan(
    model: &mut ReflectionModel,
    sys: &mut SimSystem,
    bundle: &AdaptationModel,
    plan: &Plan,
) -> Result<Execution, EngineError> {
    if plan.is_empty() {
        return Ok(Execution::not_run(GateOutcome::Empty));
    }
    let mut txn = model.begin_transaction()?;
    for cand in &plan.steps {
        let env = match apply_option_in(model, &mut txn, &bundle.options, cand) {
            Ok(env) => env,
            Err(e) => {
                model.rollback(&mut txn)?;
                return Ok(Execution::not_run(GateOutcome::Aborted {
                    reason: format!("{cand}: {e}"),
                }));
            }
        };
        if let Verdict::Fail(reasons) = verify_option(model, &bundle.options, cand, &env) {
            model.rollback(&mut txn)?;
            return Ok(Execution::not_run(GateOutcome::Failed { reasons }));
        }
    }
    commit_and_execute(model, &mut txn, sys)
}

/// Stages replacement adaptation models, possibly from another thread.
#[derive(Debug, Clone)]
pub struct SwapHandle {
    mm: Arc<Metamodel>,
    staged: Arc<Mutex<Option<AdaptationModel>>>,
}

impl SwapHandle {
    /// Stages `bundle` for the next tick boundary, replacing any bundle
    /// staged earlier. Rejected if the static check reports errors.
    pub fn stage(&self, bundle: AdaptationModel) -> Result<(), EngineError> {
        let errors: Vec<Diagnostic> = static_check(&bundle, &self.mm)
            .into_iter()
            .filter(Diagnostic::is_error)
            .collect();
        if !errors.is_empty() {
            return Err(EngineError::InvalidModel(errors));
        }
        *self.staged.lock().expect("swap lock poisoned") = Some(bundle);
        Ok(())
    }

    fn take(&self) -> Option<AdaptationModel> {
        self.staged.lock().expect("swap lock poisoned").take()
    }

    pub fn is_pending(&self) -> bool {
        self.staged.lock().expect("swap lock poisoned").is_some()
    }
}

/// Something that happened during [`Engine::step`], in order.
#[derive(Debug, Clone, PartialEq)]
pub enum StepItem {
    /// A staged adaptation model became active.
    Swap {
        name: String,
    },
    Evaluation {
        engine: EngineKind,
        sweep: bool,
        result: EvaluationResult,
    },
    Decision(DecisionRecord),
    /// Reported by the system while executing an adaptation.
    Event(ChangeEvent),
}

/// Engine state: the active adaptation model, history, and lane
/// bookkeeping.
#[derive(Debug)]
pub struct Engine {
    bundle: Arc<AdaptationModel>,
    cfg: PlannerConfig,
    mode: EngineMode,
    history: Vec<DecisionRecord>,
    swap: SwapHandle,
    /// Events not yet seen by the decoupled engine.
    buffered: Vec<ChangeEvent>,
    last_sweep: BTreeMap<EngineKind, u64>,
}

impl Engine {
    pub fn new(
        bundle: AdaptationModel,
        mm: Arc<Metamodel>,
        cfg: PlannerConfig,
        mode: EngineMode,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        let errors: Vec<Diagnostic> = static_check(&bundle, &mm)
            .into_iter()
            .filter(Diagnostic::is_error)
            .collect();
        if !errors.is_empty() {
            return Err(EngineError::InvalidModel(errors));
        }
        Ok(Engine {
            bundle: Arc::new(bundle),
            cfg,
            mode,
            history: Vec::new(),
            swap: SwapHandle {
                mm,
                staged: Arc::new(Mutex::new(None)),
            },
            buffered: Vec::new(),
            last_sweep: BTreeMap::new(),
        })
    }

    pub fn bundle(&self) -> &AdaptationModel {
        &self.bundle
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn history(&self) -> &[DecisionRecord] {
        &self.history
    }

    pub fn swap_handle(&self) -> SwapHandle {
        self.swap.clone()
    }

    /// Stages a new adaptation model; it becomes active at the start of
    /// the next [`step`](Self::step).
    pub fn hot_swap(&self, bundle: AdaptationModel) -> Result<(), EngineError> {
        self.swap.stage(bundle)
    }

    fn conditions(&self, kind: EngineKind) -> Vec<EvaluationCondition> {
        self.bundle
            .conditions
            .iter()
            .filter(|c| self.mode.handles(kind, c.lane))
            .cloned()
            .collect()
    }

    fn sweep_due(&self, kind: EngineKind, tick: u64) -> bool {
        match self.last_sweep.get(&kind) {
            None => true,
            Some(&last) => tick >= last + self.cfg.full_sweep_period,
        }
    }

    fn utility(&self, model: &ReflectionModel) -> Result<f64, EngineError> {
        Ok(utility(model, &self.bundle.qualities, &self.bundle.preferences)?)
    }

    /// One tick of the loop. `events` are the monitor's events for this
    /// tick; the model must be synchronized with `sys`.
    pub fn step(
        &mut self,
        tick: u64,
        model: &mut ReflectionModel,
        sys: &mut SimSystem,
        events: &[ChangeEvent],
    ) -> Result<Vec<StepItem>, EngineError> {
        let mut items = Vec::new();
        if let Some(b) = self.swap.take() {
            items.push(StepItem::Swap { name: b.name.clone() });
            self.bundle = Arc::new(b);
            // Conditions may have changed: re-sweep both lanes.
            self.last_sweep.clear();
        }
        let mut escalated = Vec::new();
        if self.mode.runs(EngineKind::Coupled) {
            escalated = self.coupled_step(tick, model, sys, events, &mut items)?;
        }
        if self.mode.runs(EngineKind::Decoupled) {
            self.buffered.extend(events.iter().cloned());
            let escalate = self.mode == EngineMode::Both && !escalated.is_empty();
            if schedule_tick(tick, &self.cfg, escalate).decoupled {
                self.decoupled_step(tick, model, sys, escalated, &mut items)?;
            }
        }
        Ok(items)
    }

    /// Evaluates the coupled engine's conditions and fires matching rules,
    /// highest priority first. Returns violated critical results.
    fn coupled_step(
        &mut self,
        tick: u64,
        model: &mut ReflectionModel,
        sys: &mut SimSystem,
        events: &[ChangeEvent],
        items: &mut Vec<StepItem>,
    ) -> Result<Vec<EvaluationResult>, EngineError> {
        let conds = self.conditions(EngineKind::Coupled);
        let sweep = self.sweep_due(EngineKind::Coupled, tick);
        if sweep {
            self.last_sweep.insert(EngineKind::Coupled, tick);
        }
        let results = analyze(model, &conds, events, tick, sweep);
        for r in &results {
            items.push(StepItem::Evaluation {
                engine: EngineKind::Coupled,
                sweep: r.anchor_element_id.is_none(),
                result: r.clone(),
            });
        }
        let bundle = Arc::clone(&self.bundle);
        let mut adapted: BTreeSet<ElementId> = BTreeSet::new();
        for r in results.iter().filter(|r| r.violated) {
            let Some(cond) = bundle.condition(&r.condition_id) else {
                continue;
            };
            let rules: Vec<&CoupledRule> = bundle
                .rules
                .iter()
                .filter(|x| x.enabled && x.condition == r.condition_id)
                .collect();
            if rules.is_empty() {
                continue;
            }
            let consumed: Vec<&ChangeEvent> = events.iter().filter(|e| consumed_by(cond, r, e)).collect();
            for binding in &r.bindings {
                let key = key_element(cond, binding, r);
                if adapted.contains(&key) {
                    continue;
                }
                for rule in &rules {
                    let record = self.fire(tick, model, sys, rule, r, binding, &consumed, items)?;
                    let passed = record.gate_outcome.passed();
                    self.history.push(record.clone());
                    items.push(StepItem::Decision(record));
                    if passed {
                        adapted.insert(key.clone());
                        break;
                    }
                }
            }
        }
        Ok(results
            .into_iter()
            .filter(|r| r.violated && r.priority >= self.cfg.critical_priority)
            .collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn fire(
        &self,
        tick: u64,
        model: &mut ReflectionModel,
        sys: &mut SimSystem,
        rule: &CoupledRule,
        result: &EvaluationResult,
        binding: &Binding,
        consumed: &[&ChangeEvent],
        items: &mut Vec<StepItem>,
    ) -> Result<DecisionRecord, EngineError> {
        let before = self.utility(model)?;
        let mut txn = model.begin_transaction()?;
        let mut chosen = Vec::new();
        let mut failure = None;
        for action in &rule.actions {
            let Some(opt) = self.bundle.options.get(&action.option) else {
                failure = Some(vec![format!("unknown option `{}`", action.option)]);
                break;
            };
            let mut params = opt.default_params();
            params.extend(action.args.clone());
            let Some(cand) = candidates_seeded(model, opt, &params, binding).into_iter().next() else {
                failure = Some(vec![format!("precondition of `{}` does not match", opt.id)]);
                break;
            };
            let env = match apply_option_in(model, &mut txn, &self.bundle.options, &cand) {
                Ok(env) => env,
                Err(e) => {
                    failure = Some(vec![e.to_string()]);
                    break;
                }
            };
            let verdict = verify_option(model, &self.bundle.options, &cand, &env);
            chosen.push(cand);
            if let Verdict::Fail(reasons) = verdict {
                failure = Some(reasons);
                break;
            }
        }
        let exec = match failure {
            Some(reasons) => {
                model.rollback(&mut txn)?;
                Execution::not_run(GateOutcome::Failed { reasons })
            }
            None => commit_and_execute(model, &mut txn, sys)?,
        };
        items.extend(exec.events.iter().cloned().map(StepItem::Event));
        let after = self.utility(model)?;
        Ok(DecisionRecord {
            tick,
            engine: EngineKind::Coupled,
            rule_id: Some(rule.id.clone()),
            condition_ids: vec![result.condition_id.clone()],
            consumed_event_ids: consumed.iter().map(|e| e.event_id).collect(),
            result_ids: vec![result.result_id.clone()],
            chosen_candidates: chosen,
            utility_before: before,
            utility_after: after,
            predicted_utility: None,
            gate_outcome: exec.gate,
            executed_commands: exec.commands,
            budget_exhausted: false,
            reaction_latency: consumed.iter().map(|e| e.tick).min().map(|t| tick.saturating_sub(t)),
        })
    }

    /// Analyze, plan, execute. Appends a record whenever planning ran.
    fn decoupled_step(
        &mut self,
        tick: u64,
        model: &mut ReflectionModel,
        sys: &mut SimSystem,
        escalated: Vec<EvaluationResult>,
        items: &mut Vec<StepItem>,
    ) -> Result<(), EngineError> {
        let conds = self.conditions(EngineKind::Decoupled);
        let events = std::mem::take(&mut self.buffered);
        let goals_ok = goals_hold(model, &self.bundle.goals);
        let sweep = self.sweep_due(EngineKind::Decoupled, tick) || !goals_ok;
        if sweep {
            self.last_sweep.insert(EngineKind::Decoupled, tick);
        }
        let mut results = analyze(model, &conds, &events, tick, sweep);
        for r in &results {
            items.push(StepItem::Evaluation {
                engine: EngineKind::Decoupled,
                sweep: r.anchor_element_id.is_none(),
                result: r.clone(),
            });
        }
        results.extend(escalated);
        let violated: Vec<&EvaluationResult> = results.iter().filter(|r| r.violated).collect();
        if violated.is_empty() && goals_ok {
            return Ok(());
        }
        let bundle = Arc::clone(&self.bundle);
        let plan = plan(model, &bundle, &results, &self.cfg)?;
        let exec = execute_plan(model, sys, &bundle, &plan)?;
        items.extend(exec.events.iter().cloned().map(StepItem::Event));
        let after = self.utility(model)?;
        let mut condition_ids: Vec<String> = Vec::new();
        for r in &violated {
            if !condition_ids.contains(&r.condition_id) {
                condition_ids.push(r.condition_id.clone());
            }
        }
        let record = DecisionRecord {
            tick,
            engine: EngineKind::Decoupled,
            rule_id: None,
            condition_ids,
            consumed_event_ids: events.iter().map(|e| e.event_id).collect(),
            result_ids: violated.iter().map(|r| r.result_id.clone()).collect(),
            chosen_candidates: plan.steps.clone(),
            utility_before: plan.current_utility,
            utility_after: after,
            predicted_utility: Some(plan.predicted_utility),
            gate_outcome: exec.gate,
            executed_commands: exec.commands,
            budget_exhausted: plan.budget_exhausted,
            reaction_latency: events.iter().map(|e| e.tick).min().map(|t| tick.saturating_sub(t)),
        };
        self.history.push(record.clone());
        items.push(StepItem::Decision(record));
        Ok(())
    }
}

/// The element a violation instance is "about": the anchor variable's
/// node, else the first bound node.
fn key_element(cond: &EvaluationCondition, binding: &Binding, r: &EvaluationResult) -> ElementId {
    cond.pattern
        .anchor
        .as_ref()
        .and_then(|a| binding.get(a))
        .or_else(|| binding.values().next())
        .or(r.anchor_element_id.as_ref())
        .cloned()
        .unwrap_or_default()
}

/// Whether `e` triggered `cond` at the result's anchor.
fn consumed_by(cond: &EvaluationCondition, r: &EvaluationResult, e: &ChangeEvent) -> bool {
    let Some(anchor) = &r.anchor_element_id else {
        return false;
    };
    cond.triggered_by(e)
        && (&e.element_id == anchor || e.endpoints.as_ref().is_some_and(|(s, t)| s == anchor || t == anchor))
}

#[cfg(test)]
mod tests;
