//! Relative-improvement tables and their aligned text rendering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::eer::{Cell, EerReport};
use super::similarity::CosineSimilarityReport;

/// Signed percentage `(baseline − experimental) / baseline · 100`; `None`
/// when the baseline cell is zero or missing.
pub fn relative_change(baseline: Option<f64>, experimental: Option<f64>) -> Option<f64> {
    match (baseline, experimental) {
        (Some(b), Some(e)) if b != 0.0 => Some((b - e) / b * 100.0),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeImprovementReport {
    pub label: String,
    pub cells: BTreeMap<Cell, Option<f64>>,
    /// Experimental emotional − neutral EER in percentage points.
    pub gap_points: Option<f64>,
}

pub fn relative_improvement(
    label: &str,
    baseline: &EerReport,
    experimental: &EerReport,
) -> RelativeImprovementReport {
    RelativeImprovementReport {
        label: label.to_string(),
        cells: Cell::ALL
            .into_iter()
            .map(|c| (c, relative_change(baseline.cell(c), experimental.cell(c))))
            .collect(),
        gap_points: experimental.neutral_vs_emotional_gap.map(|g| g * 100.0),
    }
}

/// `3.64%`; rounds to two decimals and never prints `-0.00%`.
pub fn format_percent(v: Option<f64>) -> String {
    match v {
        None => "-".to_string(),
        Some(x) => {
            let r = (x * 100.0).round() / 100.0;
            let r = if r == 0.0 { 0.0 } else { r };
            format!("{r:.2}%")
        }
    }
}

/// Column-aligned text table. `groups` lists the column indices before
/// which a `|` separator is drawn.
pub fn render_table(header: &[String], rows: &[Vec<String>], groups: &[usize]) -> String {
    let ncol = header.len();
    let mut width = vec![0usize; ncol];
    for r in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |r: &[String]| {
        let mut s = String::new();
        for (i, c) in r.iter().enumerate() {
            if i > 0 {
                s.push_str(if groups.contains(&i) { " | " } else { "  " });
            }
            s.push_str(c);
            if i + 1 < ncol {
                s.extend(std::iter::repeat(' ').take(width[i] - c.chars().count()));
            }
        }
        s.trim_end().to_string()
    };
    let mut rule = String::new();
    for (i, w) in width.iter().enumerate() {
        if i > 0 {
            rule.push_str(if groups.contains(&i) { "-+-" } else { "--" });
        }
        rule.extend(std::iter::repeat('-').take(*w));
    }
    let mut out = line(header);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

/// Improvement table with one row per experimental configuration; with
/// `with_gap` an extra performance-gap column is appended and the baseline
/// row carries its own gap.
pub fn render_improvement_table(
    baseline_label: &str,
    baseline: &EerReport,
    rows: &[RelativeImprovementReport],
    with_gap: bool,
) -> String {
    let mut header = vec!["Experiment Configuration".to_string(), String::new()];
    header.extend(Cell::ALL.iter().map(|c| c.title().to_string()));
    let mut groups = vec![2, 3, 5];
    if with_gap {
        header.push("Performance gap (Emotional - Neutral)".to_string());
        groups.push(9);
    }
    let mut body = Vec::new();
    let mut base = vec!["Baseline".to_string(), baseline_label.to_string()];
    base.extend(Cell::ALL.iter().map(|_| "-".to_string()));
    if with_gap {
        base.push(format_percent(baseline.neutral_vs_emotional_gap.map(|g| g * 100.0)));
    }
    body.push(base);
    for (i, r) in rows.iter().enumerate() {
        let mut row = vec![
            if i == 0 { "Experimental" } else { "" }.to_string(),
            r.label.clone(),
        ];
        row.extend(Cell::ALL.iter().map(|c| format_percent(r.cells.get(c).copied().flatten())));
        if with_gap {
            row.push(format_percent(r.gap_points));
        }
        body.push(row);
    }
    render_table(&header, &body, &groups)
}

/// Absolute EERs (in percent) per configuration.
pub fn render_absolute_table(rows: &[(String, EerReport)]) -> String {
    let mut header = vec!["Model".to_string()];
    header.extend(Cell::ALL.iter().map(|c| c.title().to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, r)| {
            let mut row = vec![label.clone()];
            row.extend(Cell::ALL.iter().map(|&c| format_percent(r.cell(c).map(|v| v * 100.0))));
            row
        })
        .collect();
    render_table(&header, &body, &[1, 2, 4])
}

/// Cosine-similarity table: one column per speaker.
pub fn render_similarity_table(report: &CosineSimilarityReport) -> String {
    let name = report.emotion.as_str();
    let title = format!("{}{}", name[..1].to_uppercase(), &name[1..]);
    let mut header = vec!["Case".to_string()];
    header.extend((1..=report.speakers.len()).map(|i| format!("Speaker {i}")));
    let mut auth = vec![format!("Neutral vs. Authentic {title}")];
    auth.extend(report.speakers.iter().map(|s| s.authentic.display()));
    let mut synth = vec![format!("Neutral vs. Synthetic {title}")];
    synth.extend(report.speakers.iter().map(|s| s.synthetic.display()));
    let mut ids = vec!["Speaker id".to_string()];
    ids.extend(report.speakers.iter().map(|s| s.speaker_id.clone()));
    let mut out = String::from("Cosine Similarity\n");
    out.push_str(&render_table(&header, &[ids, auth, synth], &[1]));
    out
}
