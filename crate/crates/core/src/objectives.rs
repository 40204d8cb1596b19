//! Goals, quality dimensions, preferences, and utility.
//!
//! Utility is the preference-weighted sum of clamped, normalized quality
//! values: `U = Σ w_q · n_q` with `n_q ∈ [0, 1]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{match_pattern, match_seeded, Binding, Pattern, Predicate, ReflectionModel};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("unknown node type `{0}`")]
    UnknownType(String),
    #[error("`{0}` has no attribute `{1}`")]
    UnknownAttribute(String, String),
    #[error("attribute `{0}.{1}` is not numeric")]
    NotNumeric(String, String),
    #[error("preference weight for undeclared quality `{0}`")]
    UndeclaredQuality(String),
    #[error("preference weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("preference weight {1} for `{0}` outside [0, 1]")]
    WeightRange(String, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Avg,
    Min,
    Max,
    Sum,
    /// Share of nodes of the type that satisfy the filter.
    Fraction,
}

impl Aggregator {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Avg => "avg",
            Aggregator::Min => "min",
            Aggregator::Max => "max",
            Aggregator::Sum => "sum",
            Aggregator::Fraction => "fraction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Aggregator::Avg,
            Aggregator::Min,
            Aggregator::Max,
            Aggregator::Sum,
            Aggregator::Fraction,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
    }
}

/// `aggregator(NodeType.attribute where filter)`. For `fraction` the
/// attribute is absent and the filter is the counted predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metric {
    pub aggregator: Aggregator,
    pub node_type: String,
    pub attribute: Option<String>,
    pub filter: Vec<Predicate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QualityDimension {
    pub id: String,
    pub metric: Metric,
    pub direction: Direction,
    pub lo: f64,
    pub hi: f64,
}

impl QualityDimension {
    /// Raw value reported for an empty aggregate.
    pub fn worst<F: Real>(&self) -> F {
        match self.direction {
            Direction::Minimize => F::lit(self.hi),
            Direction::Maximize => F::lit(self.lo),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceWeights(pub BTreeMap<String, f64>);

impl PreferenceWeights {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(weights: impl IntoIterator<Item = (String, f64)>) -> Self {
        PreferenceWeights(weights.into_iter().collect())
    }

    pub fn sum(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn validate(&self, qualities: &[QualityDimension]) -> Result<(), ObjectiveError> {
        for (q, &w) in &self.0 {
            if !qualities.iter().any(|d| &d.id == q) {
                return Err(ObjectiveError::UndeclaredQuality(q.clone()));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(ObjectiveError::WeightRange(q.clone(), w));
            }
        }
        let sum = self.sum();
        if !self.0.is_empty() && (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(ObjectiveError::WeightSum(sum));
        }
        Ok(())
    }

    pub fn weight(&self, quality: &str) -> f64 {
        self.0.get(quality).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalKind {
    /// Every scope element (nodes matching the anchor variable's own
    /// clause) must extend to a full match; without an anchor, at least one
    /// match must exist.
    Require,
    /// The pattern must not match at all.
    Forbid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub id: String,
    pub kind: GoalKind,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalCheck {
    pub satisfied: bool,
    /// Violating scope elements (require) or offending matches (forbid).
    pub witnesses: Vec<Binding>,
}

/// Raw value of a quality dimension on a model.
pub fn measure<F: Real>(model: &ReflectionModel, q: &QualityDimension) -> Result<F, ObjectiveError> {
    let m = &q.metric;
    let mm = model.metamodel();
    let nt = mm
        .node_type(&m.node_type)
        .ok_or_else(|| ObjectiveError::UnknownType(m.node_type.clone()))?;
    for p in &m.filter {
        if !nt.attributes.contains_key(&p.attr) {
            return Err(ObjectiveError::UnknownAttribute(m.node_type.clone(), p.attr.clone()));
        }
    }
    let selected = model
        .nodes_of_type(&m.node_type)
        .filter_map(|id| model.node(id))
        .filter(|n| m.filter.iter().all(|p| p.eval(&n.attrs)));
    if m.aggregator == Aggregator::Fraction {
        let total = model.nodes_of_type(&m.node_type).count();
        if total == 0 {
            return Ok(q.worst());
        }
        let hits = selected.count();
        return Ok(F::lit(hits as f64) / F::lit(total as f64));
    }
    let attr = m
        .attribute
        .as_ref()
        .ok_or_else(|| ObjectiveError::UnknownAttribute(m.node_type.clone(), String::new()))?;
    if !nt.attributes.contains_key(attr) {
        return Err(ObjectiveError::UnknownAttribute(m.node_type.clone(), attr.clone()));
    }
    let mut values = Vec::new();
    for n in selected {
        if let Some(v) = n.attrs.get(attr) {
            let x = v
                .as_f64()
                .ok_or_else(|| ObjectiveError::NotNumeric(m.node_type.clone(), attr.clone()))?;
            values.push(F::lit(x));
        }
    }
    if values.is_empty() {
        return Ok(match m.aggregator {
            Aggregator::Sum => F::zero(),
            _ => q.worst(),
        });
    }
    let sum = values.iter().fold(F::zero(), |a, &b| a + b);
    Ok(match m.aggregator {
        Aggregator::Avg => sum / F::lit(values.len() as f64),
        Aggregator::Sum => sum,
        Aggregator::Min => values.iter().copied().fold(F::infinity(), F::min),
        Aggregator::Max => values.iter().copied().fold(F::neg_infinity(), F::max),
        Aggregator::Fraction => unreachable!("handled above"),
    })
}

/// Maps a raw value into `[0, 1]`, where 1 is best.
pub fn normalize<F: Real>(raw: F, q: &QualityDimension) -> F {
    let lo = F::lit(q.lo);
    let hi = F::lit(q.hi);
    let n = ((raw - lo) / (hi - lo)).clamp01();
    match q.direction {
        Direction::Maximize => n,
        Direction::Minimize => F::one() - n,
    }
}

/// Preference-weighted utility of a model, in `[0, 1]`.
pub fn utility<F: Real>(
    model: &ReflectionModel,
    qualities: &[QualityDimension],
    prefs: &PreferenceWeights,
) -> Result<F, ObjectiveError> {
    let mut u = F::zero();
    for (qid, &w) in &prefs.0 {
        let q = qualities
            .iter()
            .find(|q| &q.id == qid)
            .ok_or_else(|| ObjectiveError::UndeclaredQuality(qid.clone()))?;
        u = u + F::lit(w) * normalize(measure::<F>(model, q)?, q);
    }
    Ok(u.clamp01())
}

pub fn check_goal(model: &ReflectionModel, goal: &GoalSpec) -> GoalCheck {
    let p = &goal.pattern;
    match goal.kind {
        GoalKind::Forbid => {
            let witnesses = match_pattern(model, p, None).unwrap_or_default();
            GoalCheck {
                satisfied: witnesses.is_empty(),
                witnesses,
            }
        }
        GoalKind::Require => match &p.anchor {
            None => {
                let found = !match_pattern(model, p, None).unwrap_or_default().is_empty();
                GoalCheck {
                    satisfied: found,
                    witnesses: Vec::new(),
                }
            }
            Some(var) => {
                let scope = &p.nodes[var];
                let mut witnesses = Vec::new();
                for id in model.nodes_of_type(&scope.node_type) {
                    let node = model.node(id).expect("indexed node exists");
                    if !scope.predicates.iter().all(|pr| pr.eval(&node.attrs)) {
                        continue;
                    }
                    let seed = Binding::from([(var.clone(), id.clone())]);
                    if match_seeded(model, p, &seed).is_empty() {
                        witnesses.push(seed);
                    }
                }
                GoalCheck {
                    satisfied: witnesses.is_empty(),
                    witnesses,
                }
            }
        },
    }
}

/// Whether every goal holds on the model.
pub fn goals_hold(model: &ReflectionModel, goals: &[GoalSpec]) -> bool {
    goals.iter().all(|g| check_goal(model, g).satisfied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::model::{CmpOp, PatternNode};

    fn perf() -> QualityDimension {
        QualityDimension {
            id: "perf".into(),
            metric: Metric {
                aggregator: Aggregator::Avg,
                node_type: "Component".into(),
                attribute: Some("rt".into()),
                filter: vec![Predicate::new("state", CmpOp::Eq, "RUNNING")],
            },
            direction: Direction::Minimize,
            lo: 0.0,
            hi: 1000.0,
        }
    }

    fn avail() -> QualityDimension {
        QualityDimension {
            id: "avail".into(),
            metric: Metric {
                aggregator: Aggregator::Fraction,
                node_type: "Component".into(),
                attribute: None,
                filter: vec![Predicate::new("state", CmpOp::Eq, "RUNNING")],
            },
            direction: Direction::Maximize,
            lo: 0.0,
            hi: 1.0,
        }
    }

    fn prefs() -> PreferenceWeights {
        PreferenceWeights::new([("perf".to_string(), 0.4), ("avail".to_string(), 0.6)])
    }

    fn fail(model: &mut ReflectionModel, id: &str) {
        let mut t = model.begin_transaction().unwrap();
        let op = model.set_attr_op(id, "state", "FAILED").unwrap();
        model.apply_edit(&mut t, op).unwrap();
        let op = model.set_attr_op(id, "rt", 0.0).unwrap();
        model.apply_edit(&mut t, op).unwrap();
        model.commit(&mut t).unwrap();
    }

    #[test]
    fn avg_rt_on_m0() {
        assert_eq!(measure::<f64>(&fixture::m0(), &perf()).unwrap(), 250.0);
    }

    #[test]
    fn fraction_running_after_fault() {
        let mut m = fixture::m0();
        fail(&mut m, "C2");
        let v: f64 = measure(&m, &avail()).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_aggregate_is_worst_bound() {
        let m = ReflectionModel::new(fixture::shop_metamodel());
        assert_eq!(measure::<f64>(&m, &perf()).unwrap(), 1000.0);
        assert_eq!(measure::<f64>(&m, &avail()).unwrap(), 0.0);
    }

    #[test]
    fn unknown_type_or_attribute() {
        let m = fixture::m0();
        let mut q = perf();
        q.metric.node_type = "Cmponent".into();
        assert!(matches!(measure::<f64>(&m, &q), Err(ObjectiveError::UnknownType(_))));
        let mut q = perf();
        q.metric.attribute = Some("latency".into());
        assert!(matches!(
            measure::<f64>(&m, &q),
            Err(ObjectiveError::UnknownAttribute(..))
        ));
    }

    #[test]
    fn normalize_examples() {
        let mut q = perf();
        assert_eq!(normalize(250.0f64, &q), 0.75);
        q.direction = Direction::Maximize;
        assert_eq!(normalize(0.0f64, &q), 0.0);
        assert_eq!(normalize(5000.0f64, &q), 1.0);
    }

    #[test]
    fn single_quality_degenerate_sum() {
        let p = PreferenceWeights::new([("perf".to_string(), 1.0)]);
        let u: f64 = utility(&fixture::m0(), &[perf()], &p).unwrap();
        assert_eq!(u, 0.75);
    }

    #[test]
    fn m0_utility_healthy_and_after_fault() {
        let qs = [perf(), avail()];
        let mut m = fixture::m0();
        let u: f64 = utility(&m, &qs, &prefs()).unwrap();
        assert!((u - 0.9).abs() < 1e-9);
        fail(&mut m, "C2");
        let u: f64 = utility(&m, &qs, &prefs()).unwrap();
        assert!((u - 0.71).abs() < 1e-9);
        let u32: f32 = utility(&m, &qs, &prefs()).unwrap();
        assert!((u32 - 0.71).abs() < 1e-6);
    }

    #[test]
    fn weights_validation() {
        let qs = [perf(), avail()];
        assert!(prefs().validate(&qs).is_ok());
        let bad = PreferenceWeights::new([("perf".to_string(), 0.4), ("avail".to_string(), 0.5)]);
        assert!(matches!(bad.validate(&qs), Err(ObjectiveError::WeightSum(_))));
        let undeclared = PreferenceWeights::new([("cost".to_string(), 1.0)]);
        assert!(matches!(
            undeclared.validate(&qs),
            Err(ObjectiveError::UndeclaredQuality(_))
        ));
    }

    #[test]
    fn forbid_failed_goal() {
        let goal = GoalSpec {
            id: "noFailures".into(),
            kind: GoalKind::Forbid,
            pattern: Pattern::new().node(
                "c",
                PatternNode::new("Component").with(Predicate::new("state", CmpOp::Eq, "FAILED")),
            ),
        };
        let mut m = fixture::m0();
        assert!(check_goal(&m, &goal).satisfied);
        fail(&mut m, "C2");
        let check = check_goal(&m, &goal);
        assert!(!check.satisfied);
        assert_eq!(check.witnesses, vec![Binding::from([("c".into(), "C2".into())])]);
    }

    #[test]
    fn require_each_shop_connects_to_auth() {
        let goal = GoalSpec {
            id: "shopAuth".into(),
            kind: GoalKind::Require,
            pattern: Pattern::new()
                .node(
                    "s",
                    PatternNode::new("Component").with(Predicate::new("ctype", CmpOp::Eq, "Shop")),
                )
                .node(
                    "a",
                    PatternNode::new("Component").with(Predicate::new("ctype", CmpOp::Eq, "Auth")),
                )
                .edge("s", "connects", "a")
                .anchored("s"),
        };
        let mut m = fixture::m0();
        assert!(check_goal(&m, &goal).satisfied);
        let mut t = m.begin_transaction().unwrap();
        let e = m.remove_edge_op("connects:C1->C2").unwrap();
        m.apply_edit(&mut t, e).unwrap();
        m.commit(&mut t).unwrap();
        let check = check_goal(&m, &goal);
        assert!(!check.satisfied);
        assert_eq!(check.witnesses, vec![Binding::from([("s".into(), "C1".into())])]);
    }
}
