//! The decision problem: criteria tree, alternatives, categorical scales and
//! knock-out screening.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{PriorityVector, UNIT_SUM_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("value {value} is outside the coverage of scale for `{criterion}`")]
    OutOfCoverage { criterion: String, value: String },
    #[error("label `{label}` is not defined by the scale for `{criterion}`")]
    UnknownLabel { criterion: String, label: String },
    #[error("scale for `{criterion}` expects {expected} input, got `{value}`")]
    WrongInputKind { criterion: String, expected: &'static str, value: String },
    #[error("knock-out rule references unknown criterion `{0}`")]
    UnknownRuleCriterion(String),
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("unknown alternative `{0}`")]
    UnknownAlternative(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    #[default]
    Quantitative,
    Qualitative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Benefit,
    Cost,
}

/// A raw metric: a number (with the criterion's unit) or a qualitative label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Number(f64),
    Label(String),
}

impl MetricValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            MetricValue::Number(v) => Some(*v),
            MetricValue::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            MetricValue::Label(l) => Some(l),
            MetricValue::Number(_) => None,
        }
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Number(v) => write!(f, "{v}"),
            MetricValue::Label(l) => f.write_str(l),
        }
    }
}

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        MetricValue::Number(v)
    }
}

impl From<&str> for MetricValue {
    fn from(v: &str) -> Self {
        MetricValue::Label(v.to_owned())
    }
}

/// Half-open numeric bin `[lower, upper)`; `upper = None` is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericBin {
    pub label: String,
    pub lower: f64,
    pub upper: Option<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelLevel {
    pub label: String,
    pub score: f64,
}

/// Maps a raw metric to a score in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CategoricalScale {
    Numeric { bins: Vec<NumericBin> },
    Labels { levels: Vec<LabelLevel> },
}

impl CategoricalScale {
    fn scores(&self) -> Vec<(&str, f64)> {
        match self {
            CategoricalScale::Numeric { bins } => bins.iter().map(|b| (b.label.as_str(), b.score)).collect(),
            CategoricalScale::Labels { levels } => levels.iter().map(|l| (l.label.as_str(), l.score)).collect(),
        }
    }

    /// Invariant violations as plain messages.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        let scores = self.scores();
        if scores.is_empty() {
            out.push("scale has no bins".to_owned());
        }
        for (i, (label, score)) in scores.iter().enumerate() {
            if !(score.is_finite() && *score > 0.0 && *score <= 1.0) {
                out.push(format!("score {score} of `{label}` is not in (0, 1]"));
            }
            if scores[..i].iter().any(|(l, _)| l == label) {
                out.push(format!("duplicate label `{label}`"));
            }
        }
        if let CategoricalScale::Numeric { bins } = self {
            for (i, b) in bins.iter().enumerate() {
                if !b.lower.is_finite() {
                    out.push(format!("bin `{}` has a non-finite lower bound", b.label));
                }
                match b.upper {
                    Some(u) if !(u > b.lower) => {
                        out.push(format!("bin `{}` is empty: [{}, {u})", b.label, b.lower));
                    }
                    None if i + 1 != bins.len() => {
                        out.push(format!("only the last bin may be unbounded, `{}` is not last", b.label));
                    }
                    _ => {}
                }
                if let Some(next) = bins.get(i + 1) {
                    if b.upper != Some(next.lower) {
                        out.push(format!("bins `{}` and `{}` are not contiguous", b.label, next.label));
                    }
                }
            }
        }
        out
    }
}

/// Maps a raw value to its `(label, score)`; bins are lower-inclusive and
/// upper-exclusive, so a value on a boundary belongs to the higher bin.
pub fn map_categorical(
    criterion: &str,
    value: &MetricValue,
    scale: &CategoricalScale,
) -> Result<(String, f64), ModelError> {
    match (scale, value) {
        (CategoricalScale::Numeric { bins }, MetricValue::Number(v)) => bins
            .iter()
            .find(|b| *v >= b.lower && b.upper.is_none_or(|u| *v < u))
            .map(|b| (b.label.clone(), b.score))
            .ok_or_else(|| ModelError::OutOfCoverage { criterion: criterion.into(), value: v.to_string() }),
        (CategoricalScale::Labels { levels }, MetricValue::Label(l)) => levels
            .iter()
            .find(|lv| lv.label == *l)
            .map(|lv| (lv.label.clone(), lv.score))
            .ok_or_else(|| ModelError::UnknownLabel { criterion: criterion.into(), label: l.clone() }),
        (CategoricalScale::Numeric { .. }, v) => Err(ModelError::WrongInputKind {
            criterion: criterion.into(),
            expected: "numeric",
            value: v.to_string(),
        }),
        (CategoricalScale::Labels { .. }, v) => Err(ModelError::WrongInputKind {
            criterion: criterion.into(),
            expected: "label",
            value: v.to_string(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub kind: CriterionKind,
    #[serde(default)]
    pub direction: Direction,
    /// Short column heading, e.g. `F` or `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<CategoricalScale>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
}

impl Criterion {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn heading(&self) -> &str {
        self.symbol.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alternative {
    pub id: String,
    pub metrics: IndexMap<String, MetricValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Ge(f64),
    Le(f64),
    Eq(f64),
    LabelIn(Vec<String>),
}

impl Predicate {
    pub fn holds(&self, value: &MetricValue) -> bool {
        match (self, value) {
            (Predicate::Ge(t), MetricValue::Number(v)) => v >= t,
            (Predicate::Le(t), MetricValue::Number(v)) => v <= t,
            (Predicate::Eq(t), MetricValue::Number(v)) => v == t,
            (Predicate::LabelIn(set), MetricValue::Label(l)) => set.contains(l),
            _ => false,
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Predicate::Ge(_) => ">=",
            Predicate::Le(_) => "<=",
            Predicate::Eq(_) => "==",
            Predicate::LabelIn(_) => "in",
        }
    }

    fn threshold_text(&self) -> String {
        match self {
            Predicate::Ge(t) | Predicate::Le(t) | Predicate::Eq(t) => t.to_string(),
            Predicate::LabelIn(set) => format!("{{{}}}", set.join(", ")),
        }
    }
}

/// A hard constraint an alternative must satisfy to be retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleDoc", into = "RuleDoc")]
pub struct KnockoutRule {
    pub criterion: String,
    pub predicate: Predicate,
    /// Placeholders: `{alternative}`, `{criterion}`, `{value}`, `{predicate}`, `{threshold}`.
    pub reason: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PredicateKind {
    Ge,
    Le,
    Eq,
    LabelIn,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Threshold {
    Number(f64),
    Labels(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    criterion: String,
    predicate: PredicateKind,
    threshold: Threshold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

impl TryFrom<RuleDoc> for KnockoutRule {
    type Error = String;

    fn try_from(d: RuleDoc) -> Result<Self, String> {
        let predicate = match (d.predicate, d.threshold) {
            (PredicateKind::Ge, Threshold::Number(t)) => Predicate::Ge(t),
            (PredicateKind::Le, Threshold::Number(t)) => Predicate::Le(t),
            (PredicateKind::Eq, Threshold::Number(t)) => Predicate::Eq(t),
            (PredicateKind::LabelIn, Threshold::Labels(l)) => Predicate::LabelIn(l),
            (PredicateKind::LabelIn, _) => return Err("label_in needs a list of labels as threshold".into()),
            _ => return Err("numeric predicates need a numeric threshold".into()),
        };
        Ok(Self { criterion: d.criterion, predicate, reason: d.reason })
    }
}

impl From<KnockoutRule> for RuleDoc {
    fn from(r: KnockoutRule) -> Self {
        let (predicate, threshold) = match r.predicate {
            Predicate::Ge(t) => (PredicateKind::Ge, Threshold::Number(t)),
            Predicate::Le(t) => (PredicateKind::Le, Threshold::Number(t)),
            Predicate::Eq(t) => (PredicateKind::Eq, Threshold::Number(t)),
            Predicate::LabelIn(l) => (PredicateKind::LabelIn, Threshold::Labels(l)),
        };
        RuleDoc { criterion: r.criterion, predicate, threshold, reason: r.reason }
    }
}

const DEFAULT_REASON: &str = "{criterion} = {value} fails {predicate} {threshold}";

impl KnockoutRule {
    pub fn new(criterion: impl Into<String>, predicate: Predicate) -> Self {
        Self { criterion: criterion.into(), predicate, reason: None }
    }

    fn describe(&self, alternative: &str, value: Option<&MetricValue>) -> String {
        let value = value.map_or_else(|| "missing".to_owned(), ToString::to_string);
        self.reason
            .as_deref()
            .unwrap_or(DEFAULT_REASON)
            .replace("{alternative}", alternative)
            .replace("{criterion}", &self.criterion)
            .replace("{value}", &value)
            .replace("{predicate}", self.predicate.symbol())
            .replace("{threshold}", &self.predicate.threshold_text())
    }
}

/// How raw quantitative leaves without a scale become scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Values are already fractions in [0, 1] and are used as-is.
    #[default]
    None,
    /// Rescaled over the scored alternatives; cost criteria are inverted.
    MinMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblem {
    pub objective: String,
    /// Column heading for alternative ids in reports.
    pub alternative_heading: String,
    pub criteria: Vec<Criterion>,
    pub top_level_weights: PriorityVector,
    /// Weights of each composite criterion's children, keyed by composite id.
    pub sub_weights: IndexMap<String, PriorityVector>,
    pub alternatives: Vec<Alternative>,
    pub knockouts: Vec<KnockoutRule>,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemViolation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ProblemViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

fn violation(location: impl Into<String>, message: impl Into<String>) -> ProblemViolation {
    ProblemViolation { location: location.into(), message: message.into() }
}

impl DecisionProblem {
    pub fn criterion(&self, id: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn alternative(&self, id: &str) -> Option<&Alternative> {
        self.alternatives.iter().find(|a| a.id == id)
    }

    fn parent_of(&self, id: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.children.iter().any(|ch| ch == id))
    }

    /// Criteria without a parent, in declaration order.
    pub fn top_level(&self) -> Vec<&Criterion> {
        self.criteria.iter().filter(|c| self.parent_of(&c.id).is_none()).collect()
    }

    pub fn leaves(&self) -> Vec<&Criterion> {
        self.criteria.iter().filter(|c| c.is_leaf()).collect()
    }

    pub fn children_of(&self, c: &Criterion) -> Vec<&Criterion> {
        c.children.iter().filter_map(|id| self.criterion(id)).collect()
    }

    pub fn validate(&self) -> Vec<ProblemViolation> {
        validate_problem(self)
    }
}

fn check_weights(out: &mut Vec<ProblemViolation>, location: &str, w: &PriorityVector, expected: &[&str]) {
    if w.labels.len() != w.weights.len() {
        out.push(violation(location, "labels and weights differ in length"));
        return;
    }
    for (l, v) in w.iter() {
        if !(v.is_finite() && v >= 0.0) {
            out.push(violation(location, format!("weight of `{l}` is {v}")));
        }
    }
    let sum = w.sum();
    if (sum - 1.0).abs() > UNIT_SUM_TOLERANCE {
        out.push(violation(location, format!("weights sum {sum:.2} ≠ 1")));
    }
    let mut claimed: Vec<&str> = w.labels.iter().map(String::as_str).collect();
    let mut wanted = expected.to_vec();
    claimed.sort_unstable();
    wanted.sort_unstable();
    if claimed != wanted {
        out.push(violation(
            location,
            format!("weights cover [{}] but criteria are [{}]", claimed.join(", "), wanted.join(", ")),
        ));
    }
}

/// Reports every broken invariant; never aborts.
///
/// Alternatives that a knock-out rule eliminates only need values for the
/// criteria their rules test. Every retained alternative must cover every
/// leaf criterion.
pub fn validate_problem(p: &DecisionProblem) -> Vec<ProblemViolation> {
    let mut out = Vec::new();

    for (i, c) in p.criteria.iter().enumerate() {
        let loc = format!("criteria.{}", c.id);
        if p.criteria[..i].iter().any(|o| o.id == c.id) {
            out.push(violation(&loc, "duplicate criterion id"));
        }
        let parents = p.criteria.iter().filter(|o| o.children.contains(&c.id)).count();
        if parents > 1 {
            out.push(violation(&loc, "criterion has more than one parent"));
        }
        for ch in &c.children {
            match p.criterion(ch) {
                None => out.push(violation(&loc, format!("unknown child `{ch}`"))),
                Some(child) if !child.is_leaf() => {
                    out.push(violation(&loc, format!("child `{ch}` is not a leaf; hierarchies are two levels deep")))
                }
                Some(_) => {}
            }
        }
        if !c.is_leaf() {
            if c.scale.is_some() {
                out.push(violation(&loc, "composite criterion carries a scale"));
            }
            if p.parent_of(&c.id).is_some() {
                out.push(violation(&loc, "composite criterion has a parent"));
            }
        }
        if let Some(s) = &c.scale {
            for m in s.check() {
                out.push(violation(format!("{loc}.scale"), m));
            }
            let expects_label = matches!(s, CategoricalScale::Labels { .. });
            if expects_label != (c.kind == CriterionKind::Qualitative) {
                out.push(violation(&loc, "label scales belong to qualitative criteria, bin scales to quantitative ones"));
            }
        } else if c.is_leaf() && c.kind == CriterionKind::Qualitative {
            out.push(violation(&loc, "qualitative criterion needs a label scale"));
        }
    }

    let top: Vec<&str> = p.top_level().iter().map(|c| c.id.as_str()).collect();
    check_weights(&mut out, "weights.top_level", &p.top_level_weights, &top);
    for c in p.criteria.iter().filter(|c| !c.is_leaf()) {
        let loc = format!("weights.sub.{}", c.id);
        match p.sub_weights.get(&c.id) {
            Some(w) => {
                let kids: Vec<&str> = c.children.iter().map(String::as_str).collect();
                check_weights(&mut out, &loc, w, &kids);
            }
            None => out.push(violation(loc, "composite criterion has no sub-weights")),
        }
    }
    for id in p.sub_weights.keys() {
        if !p.criterion(id).is_some_and(|c| !c.is_leaf()) {
            out.push(violation(format!("weights.sub.{id}"), "not a composite criterion"));
        }
    }

    for (i, r) in p.knockouts.iter().enumerate() {
        let loc = format!("knockouts[{i}]");
        match p.criterion(&r.criterion) {
            None => out.push(violation(loc, format!("unknown criterion `{}`", r.criterion))),
            Some(c) if !c.is_leaf() => out.push(violation(loc, format!("`{}` is not a leaf", r.criterion))),
            Some(_) => {}
        }
    }

    let leaves = p.leaves();
    for (i, a) in p.alternatives.iter().enumerate() {
        let loc = format!("alternatives.{}", a.id);
        if p.alternatives[..i].iter().any(|o| o.id == a.id) {
            out.push(violation(&loc, "duplicate alternative id"));
        }
        for (k, v) in &a.metrics {
            if p.criterion(k).is_none() {
                out.push(violation(format!("{loc}.{k}"), "value for unknown criterion"));
            }
            if let MetricValue::Number(x) = v {
                if !x.is_finite() {
                    out.push(violation(format!("{loc}.{k}"), "value is not finite"));
                }
            }
        }
        let mut eliminated = false;
        for r in &p.knockouts {
            match a.metrics.get(&r.criterion) {
                None if p.criterion(&r.criterion).is_some() => out.push(violation(
                    format!("{loc}.{}", r.criterion),
                    format!("alternative `{}` has no value for knock-out criterion `{}`", a.id, r.criterion),
                )),
                Some(v) if !r.predicate.holds(v) => eliminated = true,
                _ => {}
            }
        }
        if eliminated {
            continue;
        }
        for leaf in &leaves {
            if !a.metrics.contains_key(&leaf.id) {
                out.push(violation(
                    format!("{loc}.{}", leaf.id),
                    format!("alternative `{}` is missing a value for `{}`", a.id, leaf.id),
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFailure {
    pub rule_index: usize,
    pub criterion: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub alternative: String,
    /// The first failing rule in rule order.
    pub rule: RuleFailure,
    /// All failing rules; filled only in verbose screening.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub all_failures: Vec<RuleFailure>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Screening {
    pub retained: Vec<String>,
    pub eliminated: Vec<Elimination>,
}

impl Screening {
    pub fn retained_alternatives<'a>(&self, p: &'a DecisionProblem) -> Vec<&'a Alternative> {
        self.retained.iter().filter_map(|id| p.alternative(id)).collect()
    }
}

pub fn apply_knockouts(p: &DecisionProblem) -> Result<Screening, ModelError> {
    screen(p, false)
}

/// Like [`apply_knockouts`] but lists every failing rule per elimination.
pub fn apply_knockouts_verbose(p: &DecisionProblem) -> Result<Screening, ModelError> {
    screen(p, true)
}

fn screen(p: &DecisionProblem, verbose: bool) -> Result<Screening, ModelError> {
    for r in &p.knockouts {
        if p.criterion(&r.criterion).is_none() {
            return Err(ModelError::UnknownRuleCriterion(r.criterion.clone()));
        }
    }
    let mut out = Screening::default();
    for a in &p.alternatives {
        let failures = p.knockouts.iter().enumerate().filter_map(|(i, r)| {
            let v = a.metrics.get(&r.criterion);
            if v.is_some_and(|v| r.predicate.holds(v)) {
                None
            } else {
                Some(RuleFailure { rule_index: i, criterion: r.criterion.clone(), reason: r.describe(&a.id, v) })
            }
        });
        let all: Vec<RuleFailure> = if verbose { failures.collect() } else { failures.take(1).collect() };
        match all.first() {
            None => out.retained.push(a.id.clone()),
            Some(first) => out.eliminated.push(Elimination {
                alternative: a.id.clone(),
                rule: first.clone(),
                all_failures: if verbose { all.clone() } else { Vec::new() },
            }),
        }
    }
    Ok(out)
}
