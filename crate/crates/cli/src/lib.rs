//! `mcdm` command line.
//!
//! Every command renders its whole output into memory before anything is
//! printed, so failures never leave partial output behind. Exit codes:
//! 0 success, 1 invalid or unparsable scenario, 2 usage error (bad flags,
//! unreadable file, unknown criterion).

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use mcdm_core::ahp::{derive_group, GroupMode, GroupPriorities, PriorityMethod, PriorityVector, DEFAULT_CR_THRESHOLD};
use mcdm_core::io::{load_metrics_csv, parse_document, resolve, LoadedScenario, ScenarioError};
use mcdm_core::model::{apply_knockouts, apply_knockouts_verbose, DecisionProblem, Screening};
use mcdm_core::report::{text_table, Report, ReportFormat};
use mcdm_core::scoring::{total_scores, ScoreBreakdown};
use mcdm_core::sensitivity::{oat_sweep, random_weight_sampling, SamplingResult, SensitivityResult};
use serde::Serialize;

pub const DEFAULT_GRID: usize = 101;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "mcdm", version, about = "Rank alternatives under multiple criteria with AHP weights")]
pub struct Cli {
    /// Consistency ratio above which judgments are flagged.
    #[arg(long, global = true, default_value_t = DEFAULT_CR_THRESHOLD)]
    pub cr_threshold: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario and report every violation.
    Validate(Input),
    /// Derive criteria weights from stakeholder judgments.
    Weights {
        #[command(flatten)]
        input: Input,
        /// Prioritization method; defaults to the one in the scenario.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Group aggregation; defaults to the one in the scenario.
        #[arg(long, value_enum)]
        aggregate: Option<AggregateArg>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Apply knock-out rules.
    Screen {
        #[command(flatten)]
        input: Input,
        /// List every failing rule, not only the first.
        #[arg(long)]
        verbose: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Screen, score and rank.
    Rank {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Sweep one top-level weight and sample random weights.
    Sensitivity {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Full report: screening, ranking and sensitivity of every top-level weight.
    Report {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Weights { .. } => "weights",
            Command::Screen { .. } => "screen",
            Command::Rank { .. } => "rank",
            Command::Sensitivity { .. } => "sensitivity",
            Command::Report { .. } => "report",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Args)]
pub struct Input {
    /// Scenario document (JSON).
    pub scenario: PathBuf,
    /// Metrics CSV whose values replace the scenario's.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Top-level criterion to sweep; all of them when omitted.
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Seed for random weight sampling.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of random weight vectors; 0 disables sampling.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MCDM_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "MCDM_PORT", default_value_t = mcdm_service::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, env = "MCDM_DATA_DIR", default_value = "mcdm-data")]
    pub data_dir: PathBuf,
    /// Allowed browser origin(s), comma separated, or `*`.
    #[arg(long, env = "MCDM_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
    Markdown,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Geometric,
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateArg {
    Aip,
    Aij,
}

/// Result of one invocation, not yet written anywhere.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    /// Set by `serve`; the caller starts the service.
    pub serve: Option<mcdm_service::Config>,
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => usage(e.to_string()),
            other => invalid(other.to_string()),
        }
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: 2, stderr: text, ..Outcome::default() }
            } else {
                Outcome { code: 0, stdout: text, ..Outcome::default() }
            };
        }
    };
    match execute(&cli) {
        Ok(out) => out,
        Err(f) => {
            let mut stderr = format!("error: {}\n", f.message.trim_end());
            if f.code == 2 {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(cli.command.name()) {
                    let _ = write!(stderr, "\n{}\n\nFor more information, try '--help'.\n", sub.render_usage());
                }
            }
            Outcome { code: f.code, stderr, ..Outcome::default() }
        }
    }
}

fn load(input: &Input, cr_threshold: f64) -> Result<LoadedScenario, Failure> {
    let text = std::fs::read_to_string(&input.scenario)
        .map_err(|e| usage(format!("cannot read {}: {e}", input.scenario.display())))?;
    let mut doc = parse_document(&text)?;
    if let Some(path) = &input.metrics {
        let table = load_metrics_csv(path).map_err(|e| match e {
            mcdm_core::io::MetricsError::Io(_) => usage(format!("{}: {e}", path.display())),
            other => invalid(format!("{}: {other}", path.display())),
        })?;
        table.merge_into(&mut doc.alternatives);
    }
    Ok(resolve(doc, cr_threshold)?)
}

fn load_valid(input: &Input, cr_threshold: f64) -> Result<LoadedScenario, Failure> {
    let loaded = load(input, cr_threshold)?;
    let v = loaded.problem.validate();
    if v.is_empty() {
        Ok(loaded)
    } else {
        Err(ScenarioError::Invalid(v).into())
    }
}

fn ranked(p: &DecisionProblem) -> Result<(Screening, Vec<ScoreBreakdown>), Failure> {
    let screening = apply_knockouts(p).map_err(|e| invalid(e.to_string()))?;
    let breakdowns = total_scores(p, &screening.retained_alternatives(p)).map_err(|e| invalid(e.to_string()))?;
    Ok((screening, breakdowns))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs always serialize");
    s.push('\n');
    s
}

fn success(stdout: String) -> Result<Outcome, Failure> {
    Ok(Outcome { stdout, ..Outcome::default() })
}

fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    let thr = cli.cr_threshold;
    if !(thr > 0.0) {
        return Err(usage(format!("--cr-threshold must be positive, got {thr}")));
    }
    match &cli.command {
        Command::Validate(input) => validate(input, thr),
        Command::Weights { input, method, aggregate, format } => weights(input, thr, *method, *aggregate, *format),
        Command::Screen { input, verbose, format } => screen(input, thr, *verbose, *format),
        Command::Rank { input, format } => {
            let loaded = load_valid(input, thr)?;
            let (screening, breakdowns) = ranked(&loaded.problem)?;
            let report =
                Report { problem: &loaded.problem, screening: Some(&screening), ranking: &breakdowns, sensitivity: &[], sampling: None };
            success(report.render((*format).into()))
        }
        Command::Sensitivity { input, sweep, format } => analysis(input, thr, sweep, *format),
        Command::Report { input, sweep, format } => analysis(input, thr, sweep, *format),
        Command::Serve(a) => Ok(Outcome {
            serve: Some(mcdm_service::Config {
                host: a.host.clone(),
                port: a.port,
                data_dir: a.data_dir.clone(),
                cors_origin: a.cors_origin.clone(),
                cr_threshold: thr,
            }),
            ..Outcome::default()
        }),
    }
}

fn validate(input: &Input, thr: f64) -> Result<Outcome, Failure> {
    let loaded = load(input, thr)?;
    let violations = loaded.problem.validate();
    let mut out = String::new();
    for w in &loaded.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    if !violations.is_empty() {
        let _ = writeln!(out, "{}: {} violation(s)", input.scenario.display(), violations.len());
        for v in &violations {
            let _ = writeln!(out, "  {v}");
        }
        return Ok(Outcome { code: 1, stderr: out, ..Outcome::default() });
    }
    let p = &loaded.problem;
    let _ = writeln!(
        out,
        "{}: valid ({} alternatives, {} criteria, {} knock-out rule(s))",
        input.scenario.display(),
        p.alternatives.len(),
        p.criteria.len(),
        p.knockouts.len()
    );
    success(out)
}

#[derive(Serialize)]
struct WeightsOutput<'a> {
    cr_threshold: f64,
    top_level_weights: IndexMap<String, f64>,
    groups: &'a IndexMap<String, GroupPriorities>,
    /// Sub-weights used for scoring (literal weights win over judgments).
    sub_weights: IndexMap<String, IndexMap<String, f64>>,
    warnings: &'a [String],
}

fn weight_map(v: &PriorityVector) -> IndexMap<String, f64> {
    v.iter().map(|(l, w)| (l.to_owned(), w)).collect()
}

fn weights(
    input: &Input,
    thr: f64,
    method: Option<MethodArg>,
    aggregate: Option<AggregateArg>,
    format: Format,
) -> Result<Outcome, Failure> {
    let loaded = load_valid(input, thr)?;
    let mut groups = IndexMap::new();
    let mut warnings = Vec::new();
    for (criterion, g) in &loaded.document.judgments {
        let m = match method {
            Some(MethodArg::Geometric) => PriorityMethod::Geometric,
            Some(MethodArg::Eigen) => PriorityMethod::Eigen,
            None => g.method,
        };
        let mode = match aggregate {
            Some(AggregateArg::Aip) => GroupMode::Aip,
            Some(AggregateArg::Aij) => GroupMode::Aij,
            None => g.mode,
        };
        let derived = derive_group(&g.judgments(), m, mode, thr).map_err(|e| invalid(format!("judgments for `{criterion}`: {e}")))?;
        for s in derived.inconsistent() {
            warnings.push(format!("{criterion}: {} CR {:.2} > {:.2}", s.stakeholder_id, s.consistency.cr, thr));
        }
        groups.insert(criterion.clone(), derived);
    }
    let p = &loaded.problem;
    let sub_weights = p
        .sub_weights
        .iter()
        .map(|(k, v)| {
            let effective = match (loaded.document.weights.sub.contains_key(k), groups.get(k)) {
                (false, Some(g)) => weight_map(&g.group),
                _ => weight_map(v),
            };
            (k.clone(), effective)
        })
        .collect();
    let output = WeightsOutput {
        cr_threshold: thr,
        top_level_weights: weight_map(&p.top_level_weights),
        groups: &groups,
        sub_weights,
        warnings: &warnings,
    };
    match format {
        Format::Json => success(json(&output)),
        Format::Text | Format::Markdown | Format::Csv => success(weights_text(&output, &loaded)),
    }
}

fn fmt_weights(m: &IndexMap<String, f64>, decimals: usize) -> String {
    m.iter().map(|(k, v)| format!("{k} {v:.decimals$}")).collect::<Vec<_>>().join(", ")
}

fn weights_text(o: &WeightsOutput, loaded: &LoadedScenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Top-level weights: {}", fmt_weights(&o.top_level_weights, 2));
    for (criterion, g) in o.groups {
        let method = match g.method {
            PriorityMethod::Geometric => "geometric mean",
            PriorityMethod::Eigen => "principal eigenvector",
        };
        let mode = match g.mode {
            GroupMode::Aip => "AIP",
            GroupMode::Aij => "AIJ",
        };
        let _ = writeln!(out, "\nJudgments for `{criterion}` ({method}, {mode})\n");
        let labels = &g.group.labels;
        let mut header = vec!["Stakeholder".to_owned()];
        header.extend(labels.iter().cloned());
        header.extend(["lambda_max", "CI", "CR", "Status"].map(String::from));
        let mut rows: Vec<Vec<String>> = g
            .stakeholders
            .iter()
            .map(|s| {
                let c = &s.consistency;
                let mut r = vec![s.stakeholder_id.clone()];
                r.extend(s.priorities.weights.iter().map(|w| format!("{w:.3}")));
                r.push(format!("{:.4}", c.lambda_max));
                r.push(format!("{:.4}", c.ci));
                r.push(format!("{:.4}", c.cr));
                r.push(if c.acceptable { "ok".into() } else { format!("CR {:.2} > {:.2}", c.cr, c.threshold) });
                r
            })
            .collect();
        let mut group_row = vec![format!("group ({mode})")];
        group_row.extend(g.group.weights.iter().map(|w| format!("{w:.3}")));
        match &g.aggregated_consistency {
            Some(c) => {
                group_row.push(format!("{:.4}", c.lambda_max));
                group_row.push(format!("{:.4}", c.ci));
                group_row.push(format!("{:.4}", c.cr));
                group_row.push(if c.acceptable { "ok".into() } else { format!("CR {:.2} > {:.2}", c.cr, c.threshold) });
            }
            None => group_row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        rows.push(group_row);
        out.push_str(&text_table(&header, &rows));
        let rounded: IndexMap<String, f64> = labels.iter().cloned().zip(g.group.rounded(2)).collect();
        let _ = writeln!(out, "\nGroup weights (2 dp): {}", fmt_weights(&rounded, 2));
    }
    if !o.sub_weights.is_empty() {
        out.push_str("\nSub-weights used for scoring:\n");
        for (k, v) in &o.sub_weights {
            let source = if loaded.document.weights.sub.contains_key(k) { "literal" } else { "derived" };
            let _ = writeln!(out, "  {k} ({source}): {}", fmt_weights(v, 3));
        }
    }
    if !o.warnings.is_empty() {
        out.push_str("\nWarnings:\n");
        for w in o.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}

fn screen(input: &Input, thr: f64, verbose: bool, format: Format) -> Result<Outcome, Failure> {
    let loaded = load_valid(input, thr)?;
    let p = &loaded.problem;
    let s = if verbose { apply_knockouts_verbose(p) } else { apply_knockouts(p) }.map_err(|e| invalid(e.to_string()))?;
    match format {
        Format::Json => success(json(&s)),
        Format::Csv => {
            let mut out = String::from("alternative,status,rule,reason\n");
            for id in &s.retained {
                let _ = writeln!(out, "{},retained,,", csv_field(id));
            }
            for e in &s.eliminated {
                let failures = if e.all_failures.is_empty() { std::slice::from_ref(&e.rule) } else { &e.all_failures[..] };
                for f in failures {
                    let _ = writeln!(out, "{},eliminated,{},{}", csv_field(&e.alternative), f.rule_index, csv_field(&f.reason));
                }
            }
            success(out)
        }
        Format::Text | Format::Markdown => {
            let total = s.retained.len() + s.eliminated.len();
            let mut out = format!("Retained {} of {total}: {}\n", s.retained.len(), s.retained.join(", "));
            if !s.eliminated.is_empty() {
                out.push('\n');
                let rows: Vec<Vec<String>> = s
                    .eliminated
                    .iter()
                    .flat_map(|e| {
                        let failures =
                            if e.all_failures.is_empty() { vec![e.rule.clone()] } else { e.all_failures.clone() };
                        failures.into_iter().map(move |f| vec![e.alternative.clone(), f.rule_index.to_string(), f.reason])
                    })
                    .collect();
                out.push_str(&text_table(&[p.alternative_heading.clone(), "Rule".into(), "Reason".into()], &rows));
            }
            success(out)
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn analysis(input: &Input, thr: f64, sweep: &SweepArgs, format: Format) -> Result<Outcome, Failure> {
    let loaded = load_valid(input, thr)?;
    let p = &loaded.problem;
    let tops: Vec<String> = p.top_level().iter().map(|c| c.id.clone()).collect();
    let criteria = match &sweep.criterion {
        Some(c) if tops.contains(c) => vec![c.clone()],
        Some(c) => return Err(usage(format!("unknown top-level criterion `{c}` (expected one of: {})", tops.join(", ")))),
        None => tops,
    };
    if sweep.grid < 2 {
        return Err(usage(format!("--grid needs at least 2 points, got {}", sweep.grid)));
    }
    let (screening, breakdowns) = ranked(p)?;
    let results: Vec<SensitivityResult> = criteria
        .iter()
        .map(|c| oat_sweep(p, c, sweep.grid))
        .collect::<Result<_, _>>()
        .map_err(|e| invalid(e.to_string()))?;
    let sampling: Option<SamplingResult> = match sweep.samples {
        0 => None,
        n => Some(random_weight_sampling(p, n, sweep.seed).map_err(|e| invalid(e.to_string()))?),
    };
    let report = Report {
        problem: p,
        screening: Some(&screening),
        ranking: &breakdowns,
        sensitivity: &results,
        sampling: sampling.as_ref(),
    };
    success(report.render(format.into()))
}
