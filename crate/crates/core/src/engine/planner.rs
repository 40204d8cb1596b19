//! Decoupled planning: a level-wise beam search over prescriptive variants
//! of the reflection model, explored in place with savepoints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adm::AdaptationModel;
use crate::change::{applicable_options, apply_option_in, estimate, verify_option, Candidate};
use crate::evaluation::result_location;
use crate::model::{EvaluationResult, Mode, ModelDigest, ReflectionModel};
use crate::objectives::{check_goal, utility};
use crate::purity;
use crate::Utility;

use super::{EngineError, PlannerConfig};

/// Scores closer than this are treated as equal; the lexicographically
/// smaller plan wins.
pub const SCORE_TOLERANCE: f64 = 1e-12;

/// Result of [`plan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Plan {
    pub steps: Vec<Candidate>,
    /// `utility − λ·Σcost` of the selected state.
    pub score: f64,
    pub predicted_utility: Utility,
    pub current_utility: Utility,
    /// The beam dropped states at some level; the plan is the best found.
    pub budget_exhausted: bool,
    pub states_explored: usize,
}

impl Plan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A scored state of the search: the candidate sequence that reaches it.
#[derive(Debug, Clone)]
pub(crate) struct Scored {
    pub steps: Vec<Candidate>,
    pub cost: f64,
    pub utility: f64,
    pub score: f64,
}

/// Strict preference used for dedupe and selection: higher score beyond the
/// tolerance, else the lexicographically smaller sequence.
fn better(a: &Scored, b: &Scored) -> bool {
    if a.score > b.score + SCORE_TOLERANCE {
        return true;
    }
    if b.score > a.score + SCORE_TOLERANCE {
        return false;
    }
    a.steps < b.steps
}

/// Order-independent selection: among states within tolerance of the best
/// score, the lexicographically smallest sequence.
pub(crate) fn select(states: &[Scored]) -> Option<&Scored> {
    let max = states.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    states
        .iter()
        .filter(|s| s.score >= max - SCORE_TOLERANCE)
        .min_by(|a, b| a.steps.cmp(&b.steps))
}

/// Distinct locations of violated results followed by every element bound
/// in their bindings, in result order. A full sweep reports one result per
/// condition, so the location alone would hide all matches but the first.
pub fn anchors_of(results: &[EvaluationResult]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in results.iter().filter(|r| r.violated) {
        let bound = r.bindings.iter().flat_map(|b| b.values());
        for id in result_location(r).into_iter().chain(bound) {
            if !out.contains(id) {
                out.push(id.clone());
            }
        }
    }
    out
}

/// Searches for the option sequence maximizing `utility − λ·Σcost`.
///
/// Successors of a state are [`applicable_options`] at the violated
/// results' locations. A state is pruned when its last candidate fails
/// [`verify_option`] or it breaks a goal that held before planning. The
/// current state competes as the empty plan. The model is explored in
/// place and restored before returning.
pub fn plan(
    model: &mut ReflectionModel,
    bundle: &AdaptationModel,
    results: &[EvaluationResult],
    cfg: &PlannerConfig,
) -> Result<Plan, EngineError> {
    purity::guarded(model, "plan", |model| {
        let mode = model.mode();
        model.set_mode(Mode::Prescriptive);
        let out = search(model, bundle, results, cfg);
        model.set_mode(mode);
        out
    })
}

fn search(
    model: &mut ReflectionModel,
    bundle: &AdaptationModel,
    results: &[EvaluationResult],
    cfg: &PlannerConfig,
) -> Result<Plan, EngineError> {
    let u0: Utility = utility(model, &bundle.qualities, &bundle.preferences)?;
    let held: Vec<_> = bundle.goals.iter().filter(|g| check_goal(model, g).satisfied).collect();
    let anchors = anchors_of(results);
    let root = Scored {
        steps: Vec::new(),
        cost: 0.0,
        utility: u0,
        score: u0,
    };
    let mut plan = Plan {
        steps: Vec::new(),
        score: u0,
        predicted_utility: u0,
        current_utility: u0,
        budget_exhausted: false,
        states_explored: 1,
    };
    if anchors.is_empty() && held.len() == bundle.goals.len() {
        return Ok(plan);
    }

    let mut txn = model.begin_transaction()?;
    let root_sp = model.savepoint(&txn)?;
    let mut visited = vec![root.clone()];
    let mut frontier = vec![root];
    for _ in 0..cfg.max_depth {
        let mut children: Vec<Scored> = Vec::new();
        let mut by_digest: BTreeMap<ModelDigest, usize> = BTreeMap::new();
        for node in &frontier {
            model.rollback_to(&mut txn, root_sp)?;
            let replayed = node
                .steps
                .iter()
                .all(|c| apply_option_in(model, &mut txn, &bundle.options, c).is_ok());
            if !replayed {
                continue;
            }
            let mut succ = applicable_options(model, &bundle.options, &anchors);
            // Most promising first by static estimate; stable on canonical order.
            let key = |c: &Candidate| {
                let e = estimate::<f64>(&bundle.options[&c.option_id], &bundle.preferences);
                e.benefit - cfg.cost_weight * e.cost
            };
            succ.sort_by(|a, b| key(b).total_cmp(&key(a)));
            for cand in succ {
                let sp = model.savepoint(&txn)?;
                let Ok(env) = apply_option_in(model, &mut txn, &bundle.options, &cand) else {
                    continue;
                };
                let keep = verify_option(model, &bundle.options, &cand, &env).passed()
                    && held.iter().all(|g| check_goal(model, g).satisfied);
                if keep {
                    let u: Utility = utility(model, &bundle.qualities, &bundle.preferences)?;
                    let cost = node.cost + bundle.options[&cand.option_id].cost;
                    let mut steps = node.steps.clone();
                    steps.push(cand);
                    let child = Scored {
                        steps,
                        cost,
                        utility: u,
                        score: u - cfg.cost_weight * cost,
                    };
                    match by_digest.get(&model.digest()) {
                        Some(&i) => {
                            if better(&child, &children[i]) {
                                children[i] = child;
                            }
                        }
                        None => {
                            by_digest.insert(model.digest(), children.len());
                            children.push(child);
                        }
                    }
                }
                model.rollback_to(&mut txn, sp)?;
            }
        }
        plan.states_explored += children.len();
        visited.extend(children.iter().cloned());
        children.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.steps.cmp(&b.steps)));
        if let Some(b) = cfg.beam_width {
            if children.len() > b {
                children.truncate(b);
                plan.budget_exhausted = true;
            }
        }
        if children.is_empty() {
            break;
        }
        frontier = children;
    }
    model.rollback(&mut txn)?;

    let best = select(&visited).expect("root is always visited");
    plan.steps = best.steps.clone();
    plan.score = best.score;
    plan.predicted_utility = best.utility;
    Ok(plan)
}
