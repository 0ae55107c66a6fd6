//! Weighted-sum scoring and ranking, plus entropy-based objective weights.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::PriorityVector;
use crate::model::{map_categorical, Alternative, Criterion, DecisionProblem, Direction, MetricValue, ModelError, Normalization};
use crate::par::{self, Execution};

/// Totals closer than this share a rank.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("`{criterion}` value {value} is outside [0, 1]")]
    OutOfRange { criterion: String, value: f64 },
    #[error("alternative `{alternative}` has no value for `{criterion}`")]
    MissingMetric { alternative: String, criterion: String },
    #[error("`{criterion}` of alternative `{alternative}` needs a scale to score label `{label}`")]
    UnscaledLabel { alternative: String, criterion: String, label: String },
    #[error("no weights for `{0}`")]
    MissingWeights(String),
    #[error("entropy weighting: {0}")]
    Entropy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How a categorical leaf was scored, kept for the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMapping {
    pub criterion: String,
    pub raw: MetricValue,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub alternative_id: String,
    /// Score per top-level criterion, in criteria order.
    pub criterion_scores: IndexMap<String, f64>,
    /// Normalized value used for each leaf under a composite criterion.
    pub sub_scores: IndexMap<String, f64>,
    pub mappings: Vec<ScaleMapping>,
    pub total: f64,
    pub rank: usize,
}

/// Convex combination of leaf metrics under `sub_weights`.
pub fn composite_quality(metrics: &IndexMap<String, f64>, sub_weights: &PriorityVector) -> Result<f64, ScoringError> {
    sub_weights.iter().try_fold(0.0, |acc, (label, w)| {
        let v = *metrics
            .get(label)
            .ok_or_else(|| ScoringError::MissingMetric { alternative: String::new(), criterion: label.into() })?;
        if !(0.0..=1.0).contains(&v) {
            return Err(ScoringError::OutOfRange { criterion: label.into(), value: v });
        }
        Ok(acc + w * v)
    })
}

/// Value ranges of unscaled quantitative leaves over the scored set, used for
/// min-max normalization.
struct Ranges(IndexMap<String, (f64, f64)>);

impl Ranges {
    fn over(p: &DecisionProblem, alts: &[&Alternative]) -> Self {
        let mut out = IndexMap::new();
        if p.normalization == Normalization::MinMax {
            for leaf in p.leaves().into_iter().filter(|c| c.scale.is_none()) {
                let vals = alts.iter().filter_map(|a| a.metrics.get(&leaf.id).and_then(MetricValue::as_number));
                let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                out.insert(leaf.id.clone(), (lo, hi));
            }
        }
        Ranges(out)
    }
}

struct LeafScore {
    value: f64,
    mapping: Option<ScaleMapping>,
}

fn score_leaf(
    p: &DecisionProblem,
    ranges: &Ranges,
    alt: &Alternative,
    leaf: &Criterion,
) -> Result<LeafScore, ScoringError> {
    let raw = alt.metrics.get(&leaf.id).ok_or_else(|| ScoringError::MissingMetric {
        alternative: alt.id.clone(),
        criterion: leaf.id.clone(),
    })?;
    if let Some(scale) = &leaf.scale {
        let (label, score) = map_categorical(&leaf.id, raw, scale)?;
        return Ok(LeafScore {
            value: score,
            mapping: Some(ScaleMapping { criterion: leaf.id.clone(), raw: raw.clone(), label, score }),
        });
    }
    let v = match raw {
        MetricValue::Number(v) => *v,
        MetricValue::Label(l) => {
            return Err(ScoringError::UnscaledLabel {
                alternative: alt.id.clone(),
                criterion: leaf.id.clone(),
                label: l.clone(),
            })
        }
    };
    let value = match (p.normalization, ranges.0.get(&leaf.id)) {
        (Normalization::MinMax, Some(&(lo, hi))) => {
            if hi > lo {
                match leaf.direction {
                    Direction::Benefit => (v - lo) / (hi - lo),
                    Direction::Cost => (hi - v) / (hi - lo),
                }
            } else {
                1.0
            }
        }
        _ => v,
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(ScoringError::OutOfRange { criterion: leaf.id.clone(), value });
    }
    Ok(LeafScore { value, mapping: None })
}

fn score_alternative(p: &DecisionProblem, ranges: &Ranges, alt: &Alternative) -> Result<ScoreBreakdown, ScoringError> {
    let mut criterion_scores = IndexMap::new();
    let mut sub_scores = IndexMap::new();
    let mut mappings = Vec::new();
    let mut total = 0.0;
    for top in p.top_level() {
        let score = if top.is_leaf() {
            let s = score_leaf(p, ranges, alt, top)?;
            mappings.extend(s.mapping);
            s.value
        } else {
            let weights = p.sub_weights.get(&top.id).ok_or_else(|| ScoringError::MissingWeights(top.id.clone()))?;
            let mut leaf_values = IndexMap::new();
            for child in p.children_of(top) {
                let s = score_leaf(p, ranges, alt, child)?;
                mappings.extend(s.mapping);
                leaf_values.insert(child.id.clone(), s.value);
            }
            let c = composite_quality(&leaf_values, weights).map_err(|e| match e {
                ScoringError::MissingMetric { criterion, .. } => {
                    ScoringError::MissingMetric { alternative: alt.id.clone(), criterion }
                }
                e => e,
            })?;
            sub_scores.extend(leaf_values);
            c
        };
        let w = p.top_level_weights.get(&top.id).ok_or_else(|| ScoringError::MissingWeights(top.id.clone()))?;
        total += w * score;
        criterion_scores.insert(top.id.clone(), score);
    }
    Ok(ScoreBreakdown { alternative_id: alt.id.clone(), criterion_scores, sub_scores, mappings, total, rank: 0 })
}

/// Scores and ranks `retained`. Output is sorted best first.
pub fn total_scores(p: &DecisionProblem, retained: &[&Alternative]) -> Result<Vec<ScoreBreakdown>, ScoringError> {
    total_scores_with(p, retained, Execution::default())
}

pub fn total_scores_with(
    p: &DecisionProblem,
    retained: &[&Alternative],
    exec: Execution,
) -> Result<Vec<ScoreBreakdown>, ScoringError> {
    let ranges = Ranges::over(p, retained);
    let scored = par::map_slice(exec, retained, |a| score_alternative(p, &ranges, a));
    Ok(rank(scored.into_iter().collect::<Result<Vec<_>, _>>()?))
}

/// Orders `(id, total)` pairs best first: descending total, ties (within
/// [`TIE_TOLERANCE`]) by ascending id. Returns competition ranks alongside.
pub fn order_totals<'a>(items: impl IntoIterator<Item = (&'a str, f64)>) -> Vec<(&'a str, f64, usize)> {
    let mut v: Vec<(&str, f64)> = items.into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut out = Vec::with_capacity(v.len());
    let mut start = 0;
    while start < v.len() {
        let mut end = start + 1;
        while end < v.len() && (v[end - 1].1 - v[end].1).abs() <= TIE_TOLERANCE {
            end += 1;
        }
        let group = &mut v[start..end];
        group.sort_by(|a, b| a.0.cmp(b.0));
        out.extend(group.iter().map(|&(id, t)| (id, t, start + 1)));
        start = end;
    }
    out
}

/// Sorts breakdowns best first and assigns rank numbers.
pub fn rank(breakdowns: Vec<ScoreBreakdown>) -> Vec<ScoreBreakdown> {
    let order: Vec<(String, usize)> = order_totals(breakdowns.iter().map(|b| (b.alternative_id.as_str(), b.total)))
        .into_iter()
        .map(|(id, _, r)| (id.to_owned(), r))
        .collect();
    let mut by_id: IndexMap<String, ScoreBreakdown> =
        breakdowns.into_iter().map(|b| (b.alternative_id.clone(), b)).collect();
    order
        .into_iter()
        .filter_map(|(id, r)| {
            by_id.swap_remove(&id).map(|mut b| {
                b.rank = r;
                b
            })
        })
        .collect()
}

/// Objective weights from the dispersion of each column.
///
/// Columns are normalized to distributions; entropy uses the natural log
/// scaled by `1 / ln m`. Criteria whose column is constant get weight zero;
/// if every column is constant the weights are uniform.
pub fn entropy_weights<S: AsRef<str>>(labels: &[S], performance: &[Vec<f64>]) -> Result<PriorityVector, ScoringError> {
    let n = labels.len();
    if n == 0 {
        return Err(ScoringError::Entropy("no criteria".into()));
    }
    if let Some(i) = performance.iter().position(|r| r.len() != n) {
        return Err(ScoringError::Entropy(format!("row {i} has {} values, expected {n}", performance[i].len())));
    }
    if performance.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(ScoringError::Entropy("scores must be finite and nonnegative".into()));
    }
    let m = performance.len();
    let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_owned()).collect();
    let mut divergence = Vec::with_capacity(n);
    for (j, label) in labels.iter().enumerate() {
        let col_sum: f64 = performance.iter().map(|r| r[j]).sum();
        if !(col_sum > 0.0) {
            return Err(ScoringError::Entropy(format!("column `{label}` sums to zero")));
        }
        let constant = performance.iter().all(|r| r[j] == performance[0][j]);
        let e = if m > 1 && !constant {
            let h: f64 = performance
                .iter()
                .map(|r| r[j] / col_sum)
                .filter(|&p| p > 0.0)
                .map(|p| p * p.ln())
                .sum();
            -h / (m as f64).ln()
        } else {
            1.0
        };
        divergence.push((1.0 - e).max(0.0));
    }
    let total: f64 = divergence.iter().sum();
    let weights = if total > 0.0 {
        divergence.iter().map(|d| d / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    Ok(PriorityVector::unchecked(labels, weights))
}

/// Top-level criterion scores of every scored alternative, detached from
/// the weights. Totals under any weight vector follow by a dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub alternatives: Vec<String>,
    pub criteria: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn from_breakdowns(criteria: &[String], breakdowns: &[ScoreBreakdown]) -> Self {
        let mut sorted: Vec<&ScoreBreakdown> = breakdowns.iter().collect();
        sorted.sort_by(|a, b| a.alternative_id.cmp(&b.alternative_id));
        Self {
            alternatives: sorted.iter().map(|b| b.alternative_id.clone()).collect(),
            criteria: criteria.to_vec(),
            rows: sorted
                .iter()
                .map(|b| criteria.iter().map(|c| b.criterion_scores.get(c).copied().unwrap_or(0.0)).collect())
                .collect(),
        }
    }

    /// Totals in `alternatives` order; `weights` follows `criteria` order.
    pub fn totals(&self, weights: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().zip(weights).map(|(s, w)| s * w).sum()).collect()
    }

    /// Alternatives best first with their totals and ranks.
    pub fn ranking(&self, weights: &[f64]) -> Vec<(&str, f64, usize)> {
        let totals = self.totals(weights);
        order_totals(self.alternatives.iter().map(String::as_str).zip(totals))
    }

    /// Index of the best alternative (ties broken by id).
    pub fn top(&self, weights: &[f64]) -> Option<usize> {
        let totals = self.totals(weights);
        (0..totals.len()).reduce(|best, i| {
            if totals[i] > totals[best] + TIE_TOLERANCE {
                i
            } else {
                best
            }
        })
    }

    /// Matrix of scores for [`entropy_weights`].
    pub fn performance(&self) -> &[Vec<f64>] {
        &self.rows
    }
}
