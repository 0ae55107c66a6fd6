use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use indexmap::IndexMap;
use mcdm_core::ahp::{ConsistencyReport, GroupPriorities, PairwiseMatrix, PriorityVector};
use mcdm_core::io::{parse_document, resolve, JudgmentGroupDoc, LoadedScenario, ScenarioDocument, StakeholderDoc};
use mcdm_core::model::{apply_knockouts, KnockoutRule, Screening};
use mcdm_core::scoring::{total_scores, ScoreBreakdown};
use mcdm_core::sensitivity::{oat_sweep, random_weight_sampling, SamplingResult, SensitivityError, SensitivityResult};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::OwnedMutexGuard;

use crate::error::ApiError;
use crate::store::{Session, Store};

pub const DEFAULT_GRID: usize = 101;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
}

pub fn routes(state: AppState) -> Router {
    Router::new()
        .route("/problems", post(create_problem))
        .route("/problems/{id}", get(get_problem))
        .route("/problems/{id}/judgments/{stakeholder}", put(put_judgment))
        .route("/problems/{id}/weights", put(put_weights))
        .route("/problems/{id}/knockouts", put(put_knockouts))
        .route("/problems/{id}/ranking", get(get_ranking))
        .route("/problems/{id}/sensitivity", post(post_sensitivity))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route", None) })
        .with_state(state)
}

fn json_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::bad_request(format!("malformed request body: {e}"), Some(format!("line {}, column {}", e.line(), e.column())))
    })
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are valid header bytes")
}

fn versioned<T: Serialize>(status: StatusCode, version: u64, body: T) -> Response {
    (status, [(header::ETAG, etag(version))], Json(body)).into_response()
}

/// Accepts `3`, `"3"`, `W/"3"` and `*`.
fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(raw) = headers.get(header::IF_MATCH) else { return Ok(None) };
    let bad = || ApiError::bad_request("If-Match must carry a session version", Some("If-Match".into()));
    let s = raw.to_str().map_err(|_| bad())?.trim();
    if s == "*" {
        return Ok(None);
    }
    let s = s.strip_prefix("W/").unwrap_or(s).trim_matches('"');
    s.parse().map(Some).map_err(|_| bad())
}

fn validated(document: ScenarioDocument, cr_threshold: f64) -> Result<LoadedScenario, ApiError> {
    let loaded = resolve(document, cr_threshold)?;
    let violations = loaded.problem.validate();
    if violations.is_empty() {
        Ok(loaded)
    } else {
        Err(ApiError::invalid(violations))
    }
}

fn weight_map(v: &PriorityVector) -> IndexMap<String, f64> {
    v.iter().map(|(l, w)| (l.to_owned(), w)).collect()
}

/// Applies `edit` to a copy of the document, validates and persists it, and
/// only then swaps it in with version + 1.
async fn mutate<F>(store: &Store, id: &str, headers: &HeaderMap, edit: F) -> Result<OwnedMutexGuard<Session>, ApiError>
where
    F: FnOnce(&mut ScenarioDocument) -> Result<(), ApiError>,
{
    let expected = if_match(headers)?;
    let handle = store.get(id).await?;
    let mut s = handle.lock_owned().await;
    if let Some(v) = expected {
        if v != s.version {
            return Err(ApiError::conflict(v, s.version));
        }
    }
    let mut document = s.document.clone();
    edit(&mut document)?;
    let loaded = validated(document.clone(), store.cr_threshold())?;
    let version = s.version + 1;
    store.persist(id, version, &document).await?;
    s.version = version;
    s.document = document;
    s.loaded = loaded;
    s.ranking = None;
    Ok(s)
}

#[derive(Serialize)]
struct Created {
    id: String,
    version: u64,
}

async fn create_problem(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8", None))?;
    let document = parse_document(text)?;
    let loaded = validated(document.clone(), st.store.cr_threshold())?;
    let (id, version) = st.store.create(document, loaded).await?;
    let mut resp = versioned(StatusCode::CREATED, version, Created { id: id.clone(), version });
    if let Ok(loc) = HeaderValue::from_str(&format!("/problems/{id}")) {
        resp.headers_mut().insert(header::LOCATION, loc);
    }
    Ok(resp)
}

#[derive(Serialize)]
struct Derived<'a> {
    top_level_weights: IndexMap<String, f64>,
    sub_weights: IndexMap<String, IndexMap<String, f64>>,
    groups: &'a IndexMap<String, GroupPriorities>,
    warnings: &'a [String],
}

impl<'a> Derived<'a> {
    fn of(l: &'a LoadedScenario) -> Self {
        Derived {
            top_level_weights: weight_map(&l.problem.top_level_weights),
            sub_weights: l.problem.sub_weights.iter().map(|(k, v)| (k.clone(), weight_map(v))).collect(),
            groups: &l.groups,
            warnings: &l.warnings,
        }
    }
}

#[derive(Serialize)]
struct ProblemView<'a> {
    id: &'a str,
    version: u64,
    document: &'a ScenarioDocument,
    derived: Derived<'a>,
}

async fn get_problem(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = st.store.get(&id).await?;
    let s = handle.lock().await;
    let view = ProblemView { id: &s.id, version: s.version, document: &s.document, derived: Derived::of(&s.loaded) };
    Ok(versioned(StatusCode::OK, s.version, view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgmentBody {
    /// Composite criterion the matrix compares; inferred when omitted.
    #[serde(default)]
    criterion: Option<String>,
    /// Defaults to the criterion's children in declaration order.
    #[serde(default)]
    labels: Option<Vec<String>>,
    entries: Vec<Vec<f64>>,
}

fn judgment_target(doc: &ScenarioDocument, stakeholder: &str, body: &JudgmentBody) -> Result<String, ApiError> {
    if let Some(c) = &body.criterion {
        return Ok(c.clone());
    }
    if let Some((c, _)) = doc.judgments.iter().find(|(_, g)| g.stakeholders.iter().any(|s| s.id == stakeholder)) {
        return Ok(c.clone());
    }
    let composites: Vec<&str> = doc.criteria.iter().filter(|c| !c.children.is_empty()).map(|c| c.id.as_str()).collect();
    match composites.as_slice() {
        [only] => Ok((*only).to_owned()),
        _ => Err(ApiError::unprocessable(
            "ambiguous_criterion",
            "several composite criteria exist; name one in `criterion`",
            Some("criterion".into()),
        )),
    }
}

#[derive(Serialize)]
struct JudgmentView {
    id: String,
    version: u64,
    criterion: String,
    stakeholder: String,
    consistency: ConsistencyReport,
    weights: IndexMap<String, f64>,
    group: GroupPriorities,
    warnings: Vec<String>,
}

async fn put_judgment(
    State(st): State<AppState>,
    Path((id, stakeholder)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: JudgmentBody = json_body(&body)?;
    let mut target = String::new();
    let s = mutate(&st.store, &id, &headers, |doc| {
        let criterion = judgment_target(doc, &stakeholder, &body)?;
        let Some(c) = doc.criteria.iter().find(|c| c.id == criterion) else {
            return Err(ApiError::unprocessable(
                "unknown_criterion",
                format!("unknown criterion `{criterion}`"),
                Some("criterion".into()),
            ));
        };
        if c.children.is_empty() {
            return Err(ApiError::unprocessable(
                "not_composite",
                format!("criterion `{criterion}` has no sub-criteria to weight"),
                Some("criterion".into()),
            ));
        }
        let labels = body.labels.clone().unwrap_or_else(|| c.children.clone());
        let mut sorted_labels = labels.clone();
        sorted_labels.sort();
        let mut children = c.children.clone();
        children.sort();
        if sorted_labels != children {
            return Err(ApiError::unprocessable(
                "label_mismatch",
                format!("labels must be the sub-criteria of `{criterion}`: {}", c.children.join(", ")),
                Some("labels".into()),
            ));
        }
        let matrix = PairwiseMatrix::new(labels.clone(), body.entries.clone());
        if let Some(v) = matrix.snapped().validate().into_iter().next() {
            let location = match v.cell {
                Some((i, j)) => format!("judgments.{criterion}.{stakeholder}.entries[{i}][{j}]"),
                None => format!("judgments.{criterion}.{stakeholder}.entries"),
            };
            return Err(ApiError::unprocessable("invalid_matrix", v.to_string(), Some(location)));
        }
        let entry = StakeholderDoc { id: stakeholder.clone(), labels, entries: body.entries.clone() };
        let group = doc.judgments.entry(criterion.clone()).or_insert_with(|| JudgmentGroupDoc {
            method: Default::default(),
            mode: Default::default(),
            stakeholders: Vec::new(),
        });
        match group.stakeholders.iter_mut().find(|s| s.id == stakeholder) {
            Some(existing) => *existing = entry,
            None => group.stakeholders.push(entry),
        }
        // Fresh judgments replace any literal weights for this criterion.
        doc.weights.sub.shift_remove(&criterion);
        target = criterion;
        Ok(())
    })
    .await?;
    let group = s.loaded.groups.get(&target).cloned().ok_or_else(|| ApiError::internal("judgment group vanished"))?;
    let consistency = group
        .stakeholders
        .iter()
        .find(|p| p.stakeholder_id == stakeholder)
        .map(|p| p.consistency.clone())
        .ok_or_else(|| ApiError::internal("stakeholder vanished"))?;
    let view = JudgmentView {
        id: s.id.clone(),
        version: s.version,
        criterion: target.clone(),
        stakeholder,
        consistency,
        weights: weight_map(&group.group),
        group,
        warnings: s.loaded.warnings.iter().filter(|w| w.starts_with(&format!("{target}:"))).cloned().collect(),
    };
    Ok(versioned(StatusCode::OK, s.version, view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsBody {
    #[serde(default)]
    top_level: Option<IndexMap<String, f64>>,
    #[serde(default)]
    sub: IndexMap<String, IndexMap<String, f64>>,
}

#[derive(Serialize)]
struct WeightsView {
    id: String,
    version: u64,
    top_level_weights: IndexMap<String, f64>,
    sub_weights: IndexMap<String, IndexMap<String, f64>>,
}

async fn put_weights(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: WeightsBody = json_body(&body)?;
    if body.top_level.is_none() && body.sub.is_empty() {
        return Err(ApiError::bad_request("provide `top_level` and/or `sub` weights", None));
    }
    let s = mutate(&st.store, &id, &headers, |doc| {
        if let Some(t) = body.top_level {
            doc.weights.top_level = t;
        }
        for (k, v) in body.sub {
            doc.weights.sub.insert(k, v);
        }
        Ok(())
    })
    .await?;
    let d = Derived::of(&s.loaded);
    let view =
        WeightsView { id: s.id.clone(), version: s.version, top_level_weights: d.top_level_weights, sub_weights: d.sub_weights };
    Ok(versioned(StatusCode::OK, s.version, view))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum KnockoutsBody {
    List(Vec<KnockoutRule>),
    Wrapped { knockouts: Vec<KnockoutRule> },
}

#[derive(Serialize)]
struct KnockoutsView {
    id: String,
    version: u64,
    knockouts: Vec<KnockoutRule>,
    screening: Screening,
}

async fn put_knockouts(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let rules = match json_body::<KnockoutsBody>(&body)? {
        KnockoutsBody::List(r) | KnockoutsBody::Wrapped { knockouts: r } => r,
    };
    let s = mutate(&st.store, &id, &headers, |doc| {
        doc.knockouts = rules;
        Ok(())
    })
    .await?;
    let screening = apply_knockouts(&s.loaded.problem)
        .map_err(|e| ApiError::unprocessable("screening_failed", e.to_string(), Some("knockouts".into())))?;
    let view = KnockoutsView { id: s.id.clone(), version: s.version, knockouts: s.document.knockouts.clone(), screening };
    Ok(versioned(StatusCode::OK, s.version, view))
}

#[derive(Serialize)]
struct RankingView<'a> {
    id: &'a str,
    version: u64,
    screening: Screening,
    breakdowns: Vec<ScoreBreakdown>,
}

async fn get_ranking(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = st.store.get(&id).await?;
    let mut s = handle.lock().await;
    let body = match &s.ranking {
        Some((v, body)) if *v == s.version => body.clone(),
        _ => {
            let p = &s.loaded.problem;
            let screening = apply_knockouts(p)
                .map_err(|e| ApiError::unprocessable("screening_failed", e.to_string(), Some("knockouts".into())))?;
            let breakdowns = total_scores(p, &screening.retained_alternatives(p))
                .map_err(|e| ApiError::unprocessable("scoring_failed", e.to_string(), None))?;
            let view = RankingView { id: &s.id, version: s.version, screening, breakdowns };
            let body = Arc::new(serde_json::to_value(view).map_err(|e| ApiError::internal(e.to_string()))?);
            s.ranking = Some((s.version, body.clone()));
            body
        }
    };
    Ok(versioned(StatusCode::OK, s.version, body.as_ref()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensitivityBody {
    criterion: String,
    #[serde(default)]
    grid: Option<usize>,
    /// Also run Monte Carlo weight sampling with this seed.
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    samples: Option<usize>,
}

#[derive(Serialize)]
struct SensitivityView {
    id: String,
    version: u64,
    #[serde(flatten)]
    result: SensitivityResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampling: Option<SamplingResult>,
}

fn sensitivity_error(e: SensitivityError) -> ApiError {
    match e {
        SensitivityError::UnknownCriterion(_) => {
            ApiError::unprocessable("unknown_criterion", e.to_string(), Some("criterion".into()))
        }
        SensitivityError::BadGrid(_) => ApiError::bad_request(e.to_string(), Some("grid".into())),
        SensitivityError::NoSamples => ApiError::bad_request(e.to_string(), Some("samples".into())),
        other => ApiError::unprocessable("sensitivity_failed", other.to_string(), None),
    }
}

async fn post_sensitivity(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let body: SensitivityBody = json_body(&body)?;
    let handle = st.store.get(&id).await?;
    let (version, problem) = {
        let s = handle.lock().await;
        (s.version, s.loaded.problem.clone())
    };
    let grid = body.grid.unwrap_or(DEFAULT_GRID);
    let (result, sampling) = tokio::task::spawn_blocking(move || {
        let result = oat_sweep(&problem, &body.criterion, grid)?;
        let sampling = match body.seed {
            Some(seed) => Some(random_weight_sampling(&problem, body.samples.unwrap_or(DEFAULT_SAMPLES), seed)?),
            None => None,
        };
        Ok::<_, SensitivityError>((result, sampling))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(sensitivity_error)?;
    Ok(versioned(StatusCode::OK, version, SensitivityView { id, version, result, sampling }))
}
