//! Scenario documents and metric tables on disk.
//!
//! A scenario is one JSON document (`format_version: 1`). Sub-weights of a
//! composite criterion are either given literally under `weights.sub` or
//! derived at load time from the stakeholder matrices under `judgments`;
//! literal weights win when both are present.

use std::fs;
use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{
    derive_group, AhpError, GroupMode, GroupPriorities, PairwiseMatrix, PriorityMethod, PriorityVector,
    StakeholderJudgment, DEFAULT_CR_THRESHOLD,
};
use crate::model::{Alternative, Criterion, DecisionProblem, KnockoutRule, MetricValue, Normalization, ProblemViolation};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("judgments for `{criterion}`: {source}")]
    Judgments { criterion: String, source: AhpError },
    #[error("scenario is invalid:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ProblemViolation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub top_level: IndexMap<String, f64>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub sub: IndexMap<String, IndexMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeholderDoc {
    pub id: String,
    pub labels: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl StakeholderDoc {
    pub fn judgment(&self) -> StakeholderJudgment {
        StakeholderJudgment {
            stakeholder_id: self.id.clone(),
            matrix: PairwiseMatrix::new(self.labels.clone(), self.entries.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentGroupDoc {
    #[serde(default)]
    pub method: PriorityMethod,
    #[serde(default)]
    pub mode: GroupMode,
    pub stakeholders: Vec<StakeholderDoc>,
}

impl JudgmentGroupDoc {
    pub fn judgments(&self) -> Vec<StakeholderJudgment> {
        self.stakeholders.iter().map(StakeholderDoc::judgment).collect()
    }
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub format_version: u32,
    pub objective: String,
    /// Free-form remarks carried along with the data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Heading of the alternative column in reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative_heading: Option<String>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub normalization: Normalization,
    pub criteria: Vec<Criterion>,
    pub weights: WeightsDoc,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub judgments: IndexMap<String, JudgmentGroupDoc>,
    #[serde(default)]
    pub knockouts: Vec<KnockoutRule>,
    pub alternatives: Vec<Alternative>,
}

/// A document turned into a problem, with the AHP derivations that fed it.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub document: ScenarioDocument,
    pub problem: DecisionProblem,
    pub groups: IndexMap<String, GroupPriorities>,
    pub warnings: Vec<String>,
}

pub fn parse_document(text: &str) -> Result<ScenarioDocument, ScenarioError> {
    let doc: ScenarioDocument = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(ScenarioError::Version(doc.format_version));
    }
    Ok(doc)
}

/// Canonical serialization: two-space indented JSON with a trailing newline.
pub fn save_document(doc: &ScenarioDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("scenario documents always serialize");
    s.push('\n');
    s
}

pub fn save_scenario(path: impl AsRef<Path>, doc: &ScenarioDocument) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, save_document(doc))
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario, ScenarioError> {
    load_scenario_with(path, DEFAULT_CR_THRESHOLD)
}

pub fn load_scenario_with(path: impl AsRef<Path>, cr_threshold: f64) -> Result<LoadedScenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    load_scenario_str(&text, cr_threshold)
}

/// Parses, resolves and validates.
pub fn load_scenario_str(text: &str, cr_threshold: f64) -> Result<LoadedScenario, ScenarioError> {
    let loaded = resolve(parse_document(text)?, cr_threshold)?;
    let violations = loaded.problem.validate();
    if violations.is_empty() {
        Ok(loaded)
    } else {
        Err(ScenarioError::Invalid(violations))
    }
}

fn to_vector(map: &IndexMap<String, f64>) -> PriorityVector {
    PriorityVector::unchecked(map.keys().cloned(), map.values().copied().collect())
}

/// Builds the problem without validating it. Judgment groups are always
/// derived (so their consistency can be reported); they supply sub-weights
/// only where no literal weights are given.
pub fn resolve(document: ScenarioDocument, cr_threshold: f64) -> Result<LoadedScenario, ScenarioError> {
    if document.format_version != FORMAT_VERSION {
        return Err(ScenarioError::Version(document.format_version));
    }
    let mut groups = IndexMap::new();
    let mut warnings = Vec::new();
    for (criterion, g) in &document.judgments {
        let derived = derive_group(&g.judgments(), g.method, g.mode, cr_threshold)
            .map_err(|source| ScenarioError::Judgments { criterion: criterion.clone(), source })?;
        for s in derived.inconsistent() {
            warnings.push(format!(
                "{criterion}: {} CR {:.2} > {:.2}",
                s.stakeholder_id, s.consistency.cr, s.consistency.threshold
            ));
        }
        groups.insert(criterion.clone(), derived);
    }
    let mut sub_weights: IndexMap<String, PriorityVector> =
        document.weights.sub.iter().map(|(k, v)| (k.clone(), to_vector(v))).collect();
    for (criterion, g) in &groups {
        if !sub_weights.contains_key(criterion) {
            sub_weights.insert(criterion.clone(), g.group.clone());
        }
    }
    let problem = DecisionProblem {
        objective: document.objective.clone(),
        alternative_heading: document.alternative_heading.clone().unwrap_or_else(|| "Alternative".to_owned()),
        criteria: document.criteria.clone(),
        top_level_weights: to_vector(&document.weights.top_level),
        sub_weights,
        alternatives: document.alternatives.clone(),
        knockouts: document.knockouts.clone(),
        normalization: document.normalization,
    };
    Ok(LoadedScenario { document, problem, groups, warnings })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("cannot read metrics: {0}")]
    Io(String),
    #[error("missing header")]
    MissingHeader,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub id: String,
    pub values: Vec<f64>,
}

/// Per-alternative numeric metrics; the first CSV column holds ids, the
/// remaining header cells are criterion ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub header: Vec<String>,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, id: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn get(&self, id: &str, criterion: &str) -> Option<f64> {
        let col = self.header.iter().position(|h| h == criterion)?;
        self.row(id).map(|r| r.values[col])
    }

    /// Writes every value into the matching alternative, adding alternatives
    /// for unknown ids.
    pub fn merge_into(&self, alternatives: &mut Vec<Alternative>) {
        for row in &self.rows {
            let idx = match alternatives.iter().position(|a| a.id == row.id) {
                Some(i) => i,
                None => {
                    alternatives.push(Alternative { id: row.id.clone(), metrics: IndexMap::new() });
                    alternatives.len() - 1
                }
            };
            for (h, v) in self.header.iter().zip(&row.values) {
                alternatives[idx].metrics.insert(h.clone(), MetricValue::Number(*v));
            }
        }
    }
}

pub fn load_metrics_csv(path: impl AsRef<Path>) -> Result<MetricsTable, MetricsError> {
    let file = fs::File::open(path.as_ref()).map_err(|e| MetricsError::Io(e.to_string()))?;
    read_metrics_csv(file)
}

/// Row numbers in errors are 1-based file lines, the header being row 1.
pub fn read_metrics_csv(reader: impl Read) -> Result<MetricsTable, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(MetricsError::MissingHeader),
        Some(r) => r.map_err(|e| MetricsError::Csv { row: 1, message: e.to_string() })?,
    };
    if header.iter().all(str::is_empty) {
        return Err(MetricsError::MissingHeader);
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = header.len();
    let mut rows: Vec<MetricsRow> = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| MetricsError::Csv { row, message: e.to_string() })?;
        if rec.len() != width {
            return Err(MetricsError::Ragged { row, expected: width, found: rec.len() });
        }
        let id = rec[0].to_owned();
        if rows.iter().any(|r| r.id == id) {
            return Err(MetricsError::DuplicateId { row, id });
        }
        let values = rec
            .iter()
            .skip(1)
            .zip(&columns)
            .map(|(cell, column)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| MetricsError::NonNumeric {
                    row,
                    column: column.clone(),
                    value: cell.to_owned(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(MetricsRow { id, values });
    }
    Ok(MetricsTable { header: columns, rows })
}
