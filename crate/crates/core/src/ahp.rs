//! Pairwise-comparison weighting.
//!
//! Converts reciprocal judgment matrices into priority vectors (row geometric
//! mean or principal eigenvector), measures their consistency against Saaty's
//! random index, and combines several stakeholders either by averaging their
//! priority vectors or by averaging their judgments.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when checking `a_ji * a_ij == 1`.
pub const RECIPROCITY_TOLERANCE: f64 = 1e-6;

/// Lower-triangle entries within this relative distance of the exact
/// reciprocal are replaced by it before prioritization (so that rounded
/// inputs such as 0.33 for 1/3 are accepted).
pub const SNAP_TOLERANCE: f64 = 0.02;

// Rounded two-decimal inputs like 0.17 (1/6) and 0.14 (1/7) sit exactly on
// the 2% boundary; without slack float error decides their fate.
const SNAP_SLACK: f64 = 1e-9;

pub const UNIT_SUM_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_CR_THRESHOLD: f64 = 0.10;

pub const DEFAULT_EIGEN_TOL: f64 = 1e-12;
pub const DEFAULT_EIGEN_MAX_ITER: usize = 10_000;

/// Saaty's random consistency index for n = 1..=10.
const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AhpError {
    #[error("invalid pairwise matrix: {}", join_violations(.0))]
    InvalidMatrix(Vec<MatrixViolation>),
    #[error("power iteration on matrix [{labels}] did not converge within {iterations} iterations")]
    NotConverged { labels: String, iterations: usize },
    #[error("eigen tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("consistency table exhausted: no random index for n = {0} (max 10)")]
    ConsistencyTableExhausted(usize),
    #[error("degenerate priority: weight of `{0}` is zero")]
    DegeneratePriority(String),
    #[error("priority vector does not match matrix labels")]
    PriorityMismatch,
    #[error("label mismatch: expected [{expected}], found [{found}]")]
    LabelMismatch { expected: String, found: String },
    #[error("nothing to aggregate")]
    Empty,
    #[error("invalid priority vector: {0}")]
    InvalidPriorities(String),
}

fn join_violations(v: &[MatrixViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixRule {
    Shape,
    Positive,
    Diagonal,
    Reciprocity,
    DuplicateLabel,
}

/// One broken invariant, located at a cell where that makes sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixViolation {
    pub rule: MatrixRule,
    pub cell: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for MatrixViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cell {
            Some((i, j)) => write!(f, "({i},{j}) {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// A square reciprocal judgment matrix over `labels`.
///
/// Entry `(i, j)` states how much more important `labels[i]` is than
/// `labels[j]`. The constructor does not check anything; call
/// [`PairwiseMatrix::validate`] to obtain a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>, entries: Vec<Vec<f64>>) -> Self {
        Self { labels: labels.into_iter().map(Into::into).collect(), entries }
    }

    /// Builds a matrix from the strict upper triangle given row by row,
    /// filling the diagonal with 1 and the lower triangle with exact reciprocals.
    pub fn from_upper<S: Into<String>>(labels: impl IntoIterator<Item = S>, upper: &[f64]) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = labels.len();
        let mut entries = vec![vec![1.0; n]; n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("upper triangle too short");
                entries[i][j] = v;
                entries[j][i] = 1.0 / v;
            }
        }
        Self { labels, entries }
    }

    /// The perfectly consistent matrix `m_ij = w_i / w_j`.
    pub fn from_weights(w: &PriorityVector) -> Self {
        let entries = w
            .weights
            .iter()
            .map(|wi| w.weights.iter().map(|wj| wi / wj).collect())
            .collect();
        Self { labels: w.labels.clone(), entries }
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Vec<MatrixViolation> {
        let mut out = Vec::new();
        let n = self.labels.len();
        if n < 2 {
            out.push(MatrixViolation {
                rule: MatrixRule::Shape,
                cell: None,
                message: format!("matrix must be at least 2x2, has {n} labels"),
            });
        }
        for (i, a) in self.labels.iter().enumerate() {
            if self.labels[..i].contains(a) {
                out.push(MatrixViolation {
                    rule: MatrixRule::DuplicateLabel,
                    cell: None,
                    message: format!("duplicate label `{a}`"),
                });
            }
        }
        if self.entries.len() != n || self.entries.iter().any(|r| r.len() != n) {
            out.push(MatrixViolation {
                rule: MatrixRule::Shape,
                cell: None,
                message: format!("entries must be {n}x{n} to match the labels"),
            });
            return out;
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.entries[i][j];
                if !(v.is_finite() && v > 0.0) {
                    out.push(MatrixViolation {
                        rule: MatrixRule::Positive,
                        cell: Some((i, j)),
                        message: format!("entry {v} is not strictly positive and finite"),
                    });
                } else if i == j && v != 1.0 {
                    out.push(MatrixViolation {
                        rule: MatrixRule::Diagonal,
                        cell: Some((i, j)),
                        message: format!("diagonal entry is {v}, expected 1"),
                    });
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (self.entries[i][j], self.entries[j][i]);
                if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                    continue;
                }
                if (a * b - 1.0).abs() > RECIPROCITY_TOLERANCE {
                    out.push(MatrixViolation {
                        rule: MatrixRule::Reciprocity,
                        cell: Some((j, i)),
                        message: format!("entry {b} is not the reciprocal of ({i},{j}) = {a}"),
                    });
                }
            }
        }
        out
    }

    /// Returns a copy whose lower-triangle entries are replaced by exact
    /// reciprocals of the upper triangle wherever they are within
    /// [`SNAP_TOLERANCE`] of it. Entries further off are left untouched so
    /// that validation still reports them.
    pub fn snapped(&self) -> Self {
        let mut out = self.clone();
        let n = self.labels.len();
        if self.entries.len() != n || self.entries.iter().any(|r| r.len() != n) {
            return out;
        }
        for i in 0..n {
            for j in i + 1..n {
                let upper = self.entries[i][j];
                let lower = self.entries[j][i];
                if !(upper.is_finite() && upper > 0.0 && lower.is_finite()) {
                    continue;
                }
                let exact = 1.0 / upper;
                if ((lower - exact) / exact).abs() <= SNAP_TOLERANCE + SNAP_SLACK {
                    out.entries[j][i] = exact;
                }
            }
        }
        out
    }

    /// Snaps rounded reciprocals and validates; the working matrix for every
    /// prioritization routine.
    pub fn prepared(&self) -> Result<Self, AhpError> {
        let m = self.snapped();
        let violations = m.validate();
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(AhpError::InvalidMatrix(violations))
        }
    }

    /// Relabels and reorders rows and columns: row `k` of the result is row
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        let entries = perm
            .iter()
            .map(|&p| perm.iter().map(|&q| self.entries[p][q]).collect())
            .collect();
        Self { labels, entries }
    }
}

/// Normalized weights over an ordered label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityVector {
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
}

impl PriorityVector {
    /// Checked constructor: equal lengths, nonnegative finite weights,
    /// unit sum within [`UNIT_SUM_TOLERANCE`].
    pub fn new<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        weights: Vec<f64>,
    ) -> Result<Self, AhpError> {
        let v = Self::unchecked(labels, weights);
        v.check()?;
        Ok(v)
    }

    /// Stores the values as given. Used when a weight set has to be
    /// represented before it can be reported on.
    pub fn unchecked<S: Into<String>>(labels: impl IntoIterator<Item = S>, weights: Vec<f64>) -> Self {
        Self { labels: labels.into_iter().map(Into::into).collect(), weights }
    }

    pub fn check(&self) -> Result<(), AhpError> {
        if self.labels.len() != self.weights.len() {
            return Err(AhpError::InvalidPriorities(format!(
                "{} labels but {} weights",
                self.labels.len(),
                self.weights.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(AhpError::InvalidPriorities(format!("weight {w} is negative or not finite")));
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > UNIT_SUM_TOLERANCE {
            return Err(AhpError::InvalidPriorities(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.position(label).map(|i| self.weights[i])
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels.iter().map(String::as_str).zip(self.weights.iter().copied())
    }

    /// Divides by the sum. Leaves an all-zero vector alone.
    pub fn normalized(mut self) -> Self {
        let s = self.sum();
        if s > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= s);
        }
        self
    }

    /// Weights rounded to `decimals` places, for display and comparisons
    /// against printed values.
    pub fn rounded(&self, decimals: i32) -> Vec<f64> {
        let f = 10f64.powi(decimals);
        self.weights.iter().map(|w| (w * f).round() / f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub lambda_max: f64,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub threshold: f64,
    pub acceptable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeholderJudgment {
    pub stakeholder_id: String,
    pub matrix: PairwiseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityMethod {
    #[default]
    Geometric,
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    ArithmeticMean,
    GeometricMean,
}

/// How a group of stakeholder matrices becomes one weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    /// Aggregate individual priorities.
    #[default]
    Aip,
    /// Aggregate individual judgments, then prioritize.
    Aij,
}

pub fn random_index(n: usize) -> Result<f64, AhpError> {
    match n {
        1..=10 => Ok(RANDOM_INDEX[n - 1]),
        _ => Err(AhpError::ConsistencyTableExhausted(n)),
    }
}

/// Row geometric means, normalized to unit sum.
pub fn priorities_geometric(m: &PairwiseMatrix) -> Result<PriorityVector, AhpError> {
    let m = m.prepared()?;
    let n = m.order() as f64;
    // log domain keeps long rows of large ratios from overflowing
    let logs: Vec<f64> = m
        .entries
        .iter()
        .map(|row| row.iter().map(|v| v.ln()).sum::<f64>() / n)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    Ok(PriorityVector { labels: m.labels, weights: g }.normalized())
}

/// Principal right eigenvector by power iteration from the uniform vector.
///
/// Iterates are kept at unit sum; stops when the max-norm difference between
/// successive iterates drops below `tol`.
pub fn priorities_eigen(m: &PairwiseMatrix, tol: f64, max_iter: usize) -> Result<PriorityVector, AhpError> {
    if !(tol > 0.0) {
        return Err(AhpError::BadTolerance(tol));
    }
    let m = m.prepared()?;
    let n = m.order();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut y: Vec<f64> = m
            .entries
            .iter()
            .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        let s: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= s);
        let diff = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if diff < tol {
            return Ok(PriorityVector { labels: m.labels, weights: x });
        }
    }
    Err(AhpError::NotConverged { labels: m.labels.join(", "), iterations: max_iter })
}

pub fn priorities(m: &PairwiseMatrix, method: PriorityMethod) -> Result<PriorityVector, AhpError> {
    match method {
        PriorityMethod::Geometric => priorities_geometric(m),
        PriorityMethod::Eigen => priorities_eigen(m, DEFAULT_EIGEN_TOL, DEFAULT_EIGEN_MAX_ITER),
    }
}

pub fn consistency(m: &PairwiseMatrix, w: &PriorityVector) -> Result<ConsistencyReport, AhpError> {
    consistency_with_threshold(m, w, DEFAULT_CR_THRESHOLD)
}

/// `lambda_max` is estimated as the mean of `(A w)_i / w_i`.
pub fn consistency_with_threshold(
    m: &PairwiseMatrix,
    w: &PriorityVector,
    threshold: f64,
) -> Result<ConsistencyReport, AhpError> {
    let m = m.prepared()?;
    if w.labels != m.labels {
        return Err(AhpError::PriorityMismatch);
    }
    if let Some(i) = w.weights.iter().position(|&x| x == 0.0) {
        return Err(AhpError::DegeneratePriority(w.labels[i].clone()));
    }
    let n = m.order();
    let ri = random_index(n)?;
    let lambda_max = m
        .entries
        .iter()
        .zip(&w.weights)
        .map(|(row, wi)| row.iter().zip(&w.weights).map(|(a, b)| a * b).sum::<f64>() / wi)
        .sum::<f64>()
        / n as f64;
    let ci = (lambda_max - n as f64) / (n as f64 - 1.0);
    let cr = if ri > 0.0 { ci / ri } else { 0.0 };
    Ok(ConsistencyReport { lambda_max, ci, ri, cr, threshold, acceptable: cr <= threshold })
}

fn labels_match(expected: &[String], found: &[String]) -> Result<(), AhpError> {
    if expected == found {
        Ok(())
    } else {
        Err(AhpError::LabelMismatch { expected: expected.join(", "), found: found.join(", ") })
    }
}

pub fn aggregate_priorities(vectors: &[PriorityVector], method: Aggregation) -> Result<PriorityVector, AhpError> {
    let first = vectors.first().ok_or(AhpError::Empty)?;
    for v in &vectors[1..] {
        labels_match(&first.labels, &v.labels)?;
    }
    let k = vectors.len() as f64;
    let n = first.len();
    let weights: Vec<f64> = match method {
        Aggregation::ArithmeticMean => {
            (0..n).map(|i| vectors.iter().map(|v| v.weights[i]).sum::<f64>() / k).collect()
        }
        Aggregation::GeometricMean => (0..n)
            .map(|i| (vectors.iter().map(|v| v.weights[i].ln()).sum::<f64>() / k).exp())
            .collect(),
    };
    let out = PriorityVector { labels: first.labels.clone(), weights };
    Ok(match method {
        Aggregation::ArithmeticMean => out,
        Aggregation::GeometricMean => out.normalized(),
    })
}

/// Element-wise geometric mean of the (snapped) stakeholder matrices.
pub fn aggregate_judgments(judgments: &[StakeholderJudgment]) -> Result<PairwiseMatrix, AhpError> {
    let first = judgments.first().ok_or(AhpError::Empty)?;
    let prepared = judgments
        .iter()
        .map(|j| {
            labels_match(&first.matrix.labels, &j.matrix.labels)?;
            j.matrix.prepared()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = first.matrix.order();
    let k = prepared.len() as f64;
    let mut entries = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = (prepared.iter().map(|m| m.entries[i][j].ln()).sum::<f64>() / k).exp();
            entries[i][j] = v;
            entries[j][i] = 1.0 / v;
        }
    }
    Ok(PairwiseMatrix { labels: first.matrix.labels.clone(), entries })
}

/// Per-stakeholder outcome within a group derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeholderPriorities {
    pub stakeholder_id: String,
    pub priorities: PriorityVector,
    pub consistency: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPriorities {
    pub method: PriorityMethod,
    pub mode: GroupMode,
    pub stakeholders: Vec<StakeholderPriorities>,
    pub group: PriorityVector,
    /// Consistency of the aggregated matrix; only present for AIJ.
    pub aggregated_consistency: Option<ConsistencyReport>,
}

impl GroupPriorities {
    pub fn inconsistent(&self) -> impl Iterator<Item = &StakeholderPriorities> {
        self.stakeholders.iter().filter(|s| !s.consistency.acceptable)
    }
}

/// Prioritizes every stakeholder, attaches consistency reports, and forms
/// the group vector. Inconsistent judgments are reported, never rejected.
pub fn derive_group(
    judgments: &[StakeholderJudgment],
    method: PriorityMethod,
    mode: GroupMode,
    cr_threshold: f64,
) -> Result<GroupPriorities, AhpError> {
    if judgments.is_empty() {
        return Err(AhpError::Empty);
    }
    let stakeholders = judgments
        .iter()
        .map(|j| {
            let p = priorities(&j.matrix, method)?;
            let c = consistency_with_threshold(&j.matrix, &p, cr_threshold)?;
            Ok(StakeholderPriorities { stakeholder_id: j.stakeholder_id.clone(), priorities: p, consistency: c })
        })
        .collect::<Result<Vec<_>, AhpError>>()?;
    let (group, aggregated_consistency) = match mode {
        GroupMode::Aip => {
            let vs: Vec<_> = stakeholders.iter().map(|s| s.priorities.clone()).collect();
            (aggregate_priorities(&vs, Aggregation::ArithmeticMean)?, None)
        }
        GroupMode::Aij => {
            let m = aggregate_judgments(judgments)?;
            let p = priorities(&m, method)?;
            let c = consistency_with_threshold(&m, &p, cr_threshold)?;
            (p, Some(c))
        }
    };
    Ok(GroupPriorities { method, mode, stakeholders, group, aggregated_consistency })
}
