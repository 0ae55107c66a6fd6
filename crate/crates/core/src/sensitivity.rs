//! Ranking stability under top-level weight perturbation.
//!
//! One weight is moved while the others are rescaled proportionally, so every
//! alternative's total is affine in the moved weight. Knock-out screening is
//! applied once, before any perturbation.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::PriorityVector;
use crate::model::{apply_knockouts, DecisionProblem, ModelError};
use crate::par::{self, Execution};
use crate::scoring::{total_scores_with, ScoreTable, ScoringError, TIE_TOLERANCE};

pub const DEFAULT_INTERVAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("unknown top-level criterion `{0}`")]
    UnknownCriterion(String),
    #[error("new weight {0} is outside [0, 1)")]
    WeightOutOfRange(f64),
    #[error("setting `{0}` to 1 leaves no weight for the other criteria")]
    Degenerate(String),
    #[error("base weights must be strictly positive; `{0}` is not")]
    NonPositiveBase(String),
    #[error("grid needs at least 2 points, got {0}")]
    BadGrid(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPerturbation {
    pub criterion_id: String,
    pub new_weight: f64,
}

/// Sets one weight and rescales the rest by `(1 - new) / (1 - old)`.
pub fn reweight(base: &PriorityVector, p: &WeightPerturbation) -> Result<PriorityVector, SensitivityError> {
    let idx = base.position(&p.criterion_id).ok_or_else(|| SensitivityError::UnknownCriterion(p.criterion_id.clone()))?;
    if let Some((l, _)) = base.iter().find(|(_, w)| !(*w > 0.0)) {
        return Err(SensitivityError::NonPositiveBase(l.to_owned()));
    }
    if p.new_weight == 1.0 && base.len() > 1 {
        return Err(SensitivityError::Degenerate(p.criterion_id.clone()));
    }
    if !(0.0..1.0).contains(&p.new_weight) && base.len() > 1 {
        return Err(SensitivityError::WeightOutOfRange(p.new_weight));
    }
    Ok(PriorityVector::unchecked(base.labels.clone(), perturbed(&base.weights, idx, p.new_weight)))
}

/// Proportional perturbation; `x = 1` yields the one-hot limit.
fn perturbed(base: &[f64], idx: usize, x: f64) -> Vec<f64> {
    let old = base[idx];
    base.iter()
        .enumerate()
        .map(|(i, &w)| {
            if i == idx {
                x
            } else if x >= 1.0 {
                0.0
            } else {
                w * ((1.0 - x) / (1.0 - old))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub weight: f64,
    /// Alternative ids best first.
    pub ranking: Vec<String>,
    /// Totals aligned with `ranking`.
    pub totals: Vec<f64>,
}

/// Two alternatives swapping order between neighbouring sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reversal {
    /// Interpolated weight where the two totals cross.
    pub weight: f64,
    /// Sweep weights on either side of the crossing, in sweep order.
    pub bracket: (f64, f64),
    pub displaced: String,
    pub displacing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityInterval {
    pub lower: f64,
    pub upper: f64,
    pub baseline: f64,
    pub top: Option<String>,
    /// The two best alternatives tie at the baseline, so the interval is
    /// the single baseline point.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub criterion_id: String,
    pub baseline_weight: f64,
    pub baseline_ranking: Vec<String>,
    pub sweep: Vec<SweepPoint>,
    pub stability_interval: StabilityInterval,
    pub reversals: Vec<Reversal>,
}

/// Scores of the screened alternatives plus the baseline weights, ready for
/// repeated re-weighting.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: ScoreTable,
    pub base: Vec<f64>,
}

impl Prepared {
    pub fn new(p: &DecisionProblem, exec: Execution) -> Result<Self, SensitivityError> {
        let screening = apply_knockouts(p)?;
        let retained = screening.retained_alternatives(p);
        let breakdowns = total_scores_with(p, &retained, exec)?;
        let criteria: Vec<String> = p.top_level().iter().map(|c| c.id.clone()).collect();
        let base = criteria
            .iter()
            .map(|c| p.top_level_weights.get(c).ok_or_else(|| ScoringError::MissingWeights(c.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { table: ScoreTable::from_breakdowns(&criteria, &breakdowns), base })
    }

    pub fn index_of(&self, criterion: &str) -> Result<usize, SensitivityError> {
        self.table
            .criteria
            .iter()
            .position(|c| c == criterion)
            .ok_or_else(|| SensitivityError::UnknownCriterion(criterion.to_owned()))
    }

    pub fn point(&self, idx: usize, x: f64) -> SweepPoint {
        let w = perturbed(&self.base, idx, x);
        let ranked = self.table.ranking(&w);
        SweepPoint {
            weight: x,
            ranking: ranked.iter().map(|(id, _, _)| (*id).to_owned()).collect(),
            totals: ranked.iter().map(|(_, t, _)| *t).collect(),
        }
    }

    fn top_at(&self, idx: usize, x: f64) -> Option<usize> {
        self.table.top(&perturbed(&self.base, idx, x))
    }
}

/// Pairs whose relative order differs between consecutive points. Works for
/// sweeps in either direction.
pub fn detect_reversals(points: &[SweepPoint]) -> Vec<Reversal> {
    let mut out = Vec::new();
    for pair in points.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let pos_b: IndexMap<&str, usize> = b.ranking.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut found = Vec::new();
        for i in 0..a.ranking.len() {
            for j in i + 1..a.ranking.len() {
                let (u, v) = (&a.ranking[i], &a.ranking[j]);
                let (Some(&bu), Some(&bv)) = (pos_b.get(u.as_str()), pos_b.get(v.as_str())) else {
                    continue;
                };
                if bv < bu {
                    let da = a.totals[i] - a.totals[j];
                    let db = b.totals[bu] - b.totals[bv];
                    let frac = if da - db != 0.0 { da / (da - db) } else { 0.5 };
                    found.push(Reversal {
                        weight: a.weight + (b.weight - a.weight) * frac,
                        bracket: (a.weight, b.weight),
                        displaced: u.clone(),
                        displacing: v.clone(),
                    });
                }
            }
        }
        found.sort_by(|x, y| x.weight.total_cmp(&y.weight).then_with(|| x.displaced.cmp(&y.displaced)));
        out.extend(found);
    }
    out
}

pub fn oat_sweep(p: &DecisionProblem, criterion_id: &str, grid: usize) -> Result<SensitivityResult, SensitivityError> {
    oat_sweep_with(p, criterion_id, grid, Execution::default())
}

/// Evaluates the ranking at `grid` evenly spaced weights `k / (grid - 1)`.
/// The final point, weight 1, is the one-hot limit of the perturbation.
pub fn oat_sweep_with(
    p: &DecisionProblem,
    criterion_id: &str,
    grid: usize,
    exec: Execution,
) -> Result<SensitivityResult, SensitivityError> {
    if grid < 2 {
        return Err(SensitivityError::BadGrid(grid));
    }
    let prep = Prepared::new(p, exec)?;
    let idx = prep.index_of(criterion_id)?;
    let step = 1.0 / (grid - 1) as f64;
    let sweep = par::map_range(exec, grid, |k| prep.point(idx, if k + 1 == grid { 1.0 } else { k as f64 * step }));
    let reversals = detect_reversals(&sweep);
    let baseline = prep.point(idx, prep.base[idx]);
    Ok(SensitivityResult {
        criterion_id: criterion_id.to_owned(),
        baseline_weight: prep.base[idx],
        baseline_ranking: baseline.ranking,
        sweep,
        stability_interval: interval(&prep, idx, DEFAULT_INTERVAL_TOL)?,
        reversals,
    })
}

/// Largest interval around the baseline weight on which the top-ranked
/// alternative does not change, bracketed by bisection to width `tol`.
/// Bounds are reported on the stable side.
pub fn stability_interval(
    p: &DecisionProblem,
    criterion_id: &str,
    tol: f64,
) -> Result<StabilityInterval, SensitivityError> {
    let prep = Prepared::new(p, Execution::Sequential)?;
    let idx = prep.index_of(criterion_id)?;
    interval(&prep, idx, tol)
}

fn interval(prep: &Prepared, idx: usize, tol: f64) -> Result<StabilityInterval, SensitivityError> {
    if !(tol > 0.0) {
        return Err(SensitivityError::BadTolerance(tol));
    }
    let x0 = prep.base[idx];
    let Some(top) = prep.top_at(idx, x0) else {
        return Ok(StabilityInterval { lower: 0.0, upper: 1.0, baseline: x0, top: None, tied: false });
    };
    let top_id = Some(prep.table.alternatives[top].clone());
    let totals = prep.table.totals(&prep.base);
    let tied = totals.iter().enumerate().any(|(i, t)| i != top && (t - totals[top]).abs() <= TIE_TOLERANCE);
    if tied {
        return Ok(StabilityInterval { lower: x0, upper: x0, baseline: x0, top: top_id, tied });
    }
    let same = |x: f64| prep.top_at(idx, x) == Some(top);
    let bisect = |mut inside: f64, mut outside: f64| {
        while (outside - inside).abs() > tol {
            let mid = 0.5 * (inside + outside);
            if same(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let upper = if same(1.0) { 1.0 } else { bisect(x0, 1.0) };
    let lower = if same(0.0) { 0.0 } else { bisect(x0, 0.0) };
    Ok(StabilityInterval { lower, upper, baseline: x0, top: top_id, tied })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingResult {
    pub n_samples: usize,
    pub seed: u64,
    /// Share of samples in which each screened alternative ranks first,
    /// keyed by id in ascending order.
    pub frequencies: IndexMap<String, f64>,
}

pub fn random_weight_sampling(
    p: &DecisionProblem,
    n_samples: usize,
    seed: u64,
) -> Result<SamplingResult, SensitivityError> {
    random_weight_sampling_with(p, n_samples, seed, Execution::default())
}

/// Draws top-level weight vectors uniformly from the simplex (normalized
/// exponential spacings) and counts how often each alternative ranks first.
/// Sample `i` uses ChaCha stream `i` of `seed`, so results do not depend on
/// the execution mode.
pub fn random_weight_sampling_with(
    p: &DecisionProblem,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<SamplingResult, SensitivityError> {
    if n_samples == 0 {
        return Err(SensitivityError::NoSamples);
    }
    let prep = Prepared::new(p, exec)?;
    let k = prep.base.len();
    let n_alts = prep.table.alternatives.len();
    let counts = par::count_range(exec, n_samples, n_alts.max(1), |i| {
        let w = simplex_sample(seed, i as u64, k);
        prep.table.top(&w).unwrap_or(0)
    });
    let frequencies = prep
        .table
        .alternatives
        .iter()
        .zip(&counts)
        .map(|(id, c)| (id.clone(), *c as f64 / n_samples as f64))
        .collect();
    Ok(SamplingResult { n_samples, seed, frequencies })
}

fn simplex_sample(seed: u64, index: u64, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let e: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
