//! Deterministic report rendering.
//!
//! Markdown and CSV use three decimals for scores; JSON keeps full precision.

use std::fmt::Write as _;

use serde::Serialize;

use crate::model::{DecisionProblem, MetricValue, Screening};
use crate::scoring::ScoreBreakdown;
use crate::sensitivity::{SamplingResult, SensitivityResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Space-aligned columns for terminals.
    Text,
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Report<'a> {
    #[serde(skip)]
    pub problem: &'a DecisionProblem,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screening: Option<&'a Screening>,
    pub ranking: &'a [ScoreBreakdown],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    pub sensitivity: &'a [SensitivityResult],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<&'a SamplingResult>,
}

pub fn export_report(
    problem: &DecisionProblem,
    breakdowns: &[ScoreBreakdown],
    sensitivity: &[SensitivityResult],
    format: ReportFormat,
) -> String {
    Report { problem, screening: None, ranking: breakdowns, sensitivity, sampling: None }.render(format)
}

enum Column {
    /// Raw value of a leaf, 3 decimals.
    Fraction(String),
    /// Raw value of a leaf with a unit, printed as given.
    Quantity(String),
    /// Top-level score, 3 decimals.
    Score(String),
    /// Top-level score followed by its category label.
    Category(String),
    Total,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn layout(p: &DecisionProblem) -> (Vec<String>, Vec<Column>) {
    let mut header = Vec::new();
    let mut cols = Vec::new();
    for (i, top) in p.top_level().into_iter().enumerate() {
        let c_head = format!("C_{}", i + 1);
        if top.is_leaf() {
            match &top.scale {
                Some(_) => {
                    let numeric = p.alternatives.iter().any(|a| matches!(a.metrics.get(&top.id), Some(MetricValue::Number(_))));
                    if numeric {
                        header.push(match &top.unit {
                            Some(u) => format!("{} ({u})", top.heading()),
                            None => top.heading().to_owned(),
                        });
                        cols.push(Column::Quantity(top.id.clone()));
                    }
                    header.push(c_head);
                    cols.push(Column::Category(top.id.clone()));
                }
                None => {
                    header.push(c_head);
                    cols.push(Column::Score(top.id.clone()));
                }
            }
        } else {
            for child in p.children_of(top) {
                header.push(child.heading().to_owned());
                cols.push(Column::Fraction(child.id.clone()));
            }
            header.push(c_head);
            cols.push(Column::Score(top.id.clone()));
        }
    }
    header.push("C_total".to_owned());
    cols.push(Column::Total);
    (header, cols)
}

fn cell(p: &DecisionProblem, b: &ScoreBreakdown, col: &Column, bold_total: bool) -> String {
    let raw = |id: &str| p.alternative(&b.alternative_id).and_then(|a| a.metrics.get(id));
    match col {
        Column::Fraction(id) => match raw(id) {
            Some(MetricValue::Number(v)) => format!("{v:.3}"),
            Some(v) => v.to_string(),
            None => String::new(),
        },
        Column::Quantity(id) => raw(id).map(ToString::to_string).unwrap_or_default(),
        Column::Score(id) => b.criterion_scores.get(id).map(|v| format!("{v:.3}")).unwrap_or_default(),
        Column::Category(id) => {
            let score = b.criterion_scores.get(id).copied().unwrap_or_default();
            match b.mappings.iter().find(|m| &m.criterion == id) {
                Some(m) => format!("{score:.3} ({})", m.label),
                None => format!("{score:.3}"),
            }
        }
        Column::Total if bold_total => format!("**{:.3}**", b.total),
        Column::Total => format!("{:.3}", b.total),
    }
}

fn ranking_table(p: &DecisionProblem, ranking: &[ScoreBreakdown], with_rank: bool, bold_best: bool) -> Table {
    let (mut header, cols) = layout(p);
    header.insert(0, p.alternative_heading.clone());
    if with_rank {
        header.insert(0, "Rank".to_owned());
    }
    let rows = ranking
        .iter()
        .map(|b| {
            let mut row = Vec::with_capacity(header.len());
            if with_rank {
                row.push(b.rank.to_string());
            }
            row.push(b.alternative_id.clone());
            row.extend(cols.iter().map(|c| cell(p, b, c, bold_best && b.rank == 1)));
            row
        })
        .collect();
    Table { header, rows }
}

fn markdown_table(out: &mut String, t: &Table) {
    let _ = writeln!(out, "| {} |", t.header.join(" | "));
    let _ = writeln!(out, "|{}|", t.header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in &t.rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
}

/// Left-aligned columns separated by two spaces, no trailing whitespace.
pub fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(n) {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let mut l = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                l.push_str("  ");
            }
            let _ = write!(l, "{c:<w$}", w = widths[i]);
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(header);
    line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in rows {
        line(r);
    }
    out
}

fn ranking_chain(ids: &[String]) -> String {
    ids.join(" > ")
}

impl Report<'_> {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
                s.push('\n');
                s
            }
            ReportFormat::Csv => self.csv(),
            ReportFormat::Markdown => self.markdown(),
            ReportFormat::Text => self.text(),
        }
    }

    fn screening_line(&self) -> Option<String> {
        self.screening.map(|s| {
            format!("Retained {} of {} alternatives after knock-out screening.", s.retained.len(), s.retained.len() + s.eliminated.len())
        })
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        if let Some(l) = self.screening_line() {
            let _ = writeln!(out, "{l}\n");
        }
        markdown_table(&mut out, &ranking_table(self.problem, self.ranking, false, true));
        for s in self.sensitivity {
            let iv = &s.stability_interval;
            let _ = writeln!(out, "\n### Sensitivity: {}\n", s.criterion_id);
            let _ = writeln!(
                out,
                "Baseline weight {:.3}; top alternative {} stable on [{:.3}, {:.3}]{}.\n",
                s.baseline_weight,
                iv.top.as_deref().unwrap_or("-"),
                iv.lower,
                iv.upper,
                if iv.tied { " (tied at baseline)" } else { "" }
            );
            let sweep = Table {
                header: vec!["Weight".into(), "Ranking".into()],
                rows: s.sweep.iter().map(|p| vec![format!("{:.3}", p.weight), ranking_chain(&p.ranking)]).collect(),
            };
            markdown_table(&mut out, &sweep);
            if !s.reversals.is_empty() {
                out.push('\n');
                markdown_table(&mut out, &reversal_table(s));
            }
        }
        if let Some(sm) = self.sampling {
            let _ = writeln!(out, "\n### Random weights ({} samples, seed {})\n", sm.n_samples, sm.seed);
            markdown_table(&mut out, &sampling_table(sm));
        }
        out
    }

    fn text(&self) -> String {
        let mut out = String::new();
        if let Some(l) = self.screening_line() {
            let _ = writeln!(out, "{l}\n");
        }
        let t = ranking_table(self.problem, self.ranking, true, false);
        out.push_str(&text_table(&t.header, &t.rows));
        for s in self.sensitivity {
            let iv = &s.stability_interval;
            let _ = writeln!(out, "\nSensitivity of `{}` (baseline weight {:.3})", s.criterion_id, s.baseline_weight);
            let _ = writeln!(
                out,
                "Stability interval for top alternative {}: [{:.4}, {:.4}]{}\n",
                iv.top.as_deref().unwrap_or("-"),
                iv.lower,
                iv.upper,
                if iv.tied { " (tied at baseline)" } else { "" }
            );
            let rows: Vec<Vec<String>> = s
                .sweep
                .iter()
                .map(|p| vec![format!("{:.3}", p.weight), ranking_chain(&p.ranking)])
                .collect();
            out.push_str(&text_table(&["weight".into(), "ranking".into()], &rows));
            if !s.reversals.is_empty() {
                out.push('\n');
                let t = reversal_table(s);
                out.push_str(&text_table(&t.header, &t.rows));
            }
        }
        if let Some(sm) = self.sampling {
            let _ = writeln!(out, "\nRandom weights: {} samples, seed {}\n", sm.n_samples, sm.seed);
            let t = sampling_table(sm);
            out.push_str(&text_table(&t.header, &t.rows));
        }
        out
    }

    fn csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let t = ranking_table(self.problem, self.ranking, true, false);
        let _ = w.write_record(&t.header);
        for r in &t.rows {
            let _ = w.write_record(r);
        }
        if !self.sensitivity.is_empty() {
            let _ = w.write_record([""; 0]);
            let _ = w.write_record(["criterion", "weight", "ranking"]);
            for s in self.sensitivity {
                for p in &s.sweep {
                    let _ = w.write_record([s.criterion_id.clone(), format!("{:.3}", p.weight), ranking_chain(&p.ranking)]);
                }
            }
            let _ = w.write_record([""; 0]);
            let _ = w.write_record(["criterion", "reversal_weight", "displaced", "displacing"]);
            for s in self.sensitivity {
                for r in &s.reversals {
                    let _ = w.write_record([
                        s.criterion_id.clone(),
                        format!("{:.3}", r.weight),
                        r.displaced.clone(),
                        r.displacing.clone(),
                    ]);
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
    }
}

fn reversal_table(s: &SensitivityResult) -> Table {
    Table {
        header: vec!["Crossing".into(), "Bracket".into(), "Displaced".into(), "Displacing".into()],
        rows: s
            .reversals
            .iter()
            .map(|r| {
                vec![
                    format!("{:.4}", r.weight),
                    format!("[{:.3}, {:.3}]", r.bracket.0, r.bracket.1),
                    r.displaced.clone(),
                    r.displacing.clone(),
                ]
            })
            .collect(),
    }
}

fn sampling_table(s: &SamplingResult) -> Table {
    Table {
        header: vec!["Alternative".into(), "Top frequency".into()],
        rows: s.frequencies.iter().map(|(id, f)| vec![id.clone(), format!("{f:.4}")]).collect(),
    }
}
