//! Experiment results and their text and JSON reports.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use evsv_core::corpus::AugmentationPlan;
use evsv_core::eval::{
    format_percent, relative_improvement, render_absolute_table, render_improvement_table, render_similarity_table,
    render_table, write_projection_csv, CosineSimilarityReport, EerReport, ProjectedPoint, RelativeImprovementReport,
};

use crate::pipeline::{FarCheck, Workspace};
use crate::record::Outputs;

pub const RESULTS_FILE: &str = "results.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelResult {
    pub plan: AugmentationPlan,
    pub label: String,
    /// Absolute EERs; only printed with `--absolute`.
    pub eer: EerReport,
    pub far: Option<FarCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentResults {
    pub config_hash: String,
    /// Baseline first.
    pub models: Vec<ModelResult>,
    pub similarity: Option<CosineSimilarityReport>,
}

impl ExperimentResults {
    pub fn baseline(&self) -> Result<&ModelResult> {
        match self.models.first() {
            Some(m) if m.plan.is_baseline() => Ok(m),
            _ => bail!("results carry no baseline model"),
        }
    }

    pub fn experimental(&self) -> &[ModelResult] {
        self.models.get(1..).unwrap_or(&[])
    }

    pub fn relative(&self) -> Result<Vec<RelativeImprovementReport>> {
        let b = self.baseline()?;
        Ok(self
            .experimental()
            .iter()
            .map(|m| relative_improvement(&m.label, &b.eer, &m.eer))
            .collect())
    }

    /// Relative improvement per cell.
    pub fn improvement_table(&self) -> Result<String> {
        let b = self.baseline()?;
        Ok(format!(
            "Relative improvement in EER (positive values signify an improvement)\n{}",
            render_improvement_table(&b.label, &b.eer, &self.relative()?, false)
        ))
    }

    /// Relative improvement plus the emotional − neutral gap column.
    pub fn gap_table(&self) -> Result<String> {
        let b = self.baseline()?;
        Ok(format!(
            "Relative improvement in EER comparing the SV models\n{}",
            render_improvement_table(&b.label, &b.eer, &self.relative()?, true)
        ))
    }

    pub fn similarity_table(&self) -> Option<String> {
        self.similarity.as_ref().map(render_similarity_table)
    }

    pub fn far_table(&self) -> String {
        let header: Vec<String> = [
            "Model",
            "Target FAR",
            "Threshold",
            "Dev FAR",
            "Media trials",
            "Media accepts",
            "Media FAR",
            "Within target",
        ]
        .map(String::from)
        .to_vec();
        let rows: Vec<Vec<String>> = self
            .models
            .iter()
            .filter_map(|m| m.far.as_ref().map(|f| (m, f)))
            .map(|(m, f)| {
                vec![
                    m.label.clone(),
                    format_percent(Some(f.target_far * 100.0)),
                    format!("{:.4}", f.threshold),
                    format_percent(Some(f.dev_far * 100.0)),
                    f.media_trials.to_string(),
                    f.media_accepts.to_string(),
                    format_percent(Some(f.media_far * 100.0)),
                    if f.within_target { "yes" } else { "no" }.to_string(),
                ]
            })
            .collect();
        format!("Media speech FAR check\n{}", render_table(&header, &rows, &[1]))
    }

    pub fn absolute_table(&self) -> String {
        let rows: Vec<(String, EerReport)> = self.models.iter().map(|m| (m.label.clone(), m.eer.clone())).collect();
        format!("Absolute EER\n{}", render_absolute_table(&rows))
    }

    /// Every text report, in print order.
    pub fn render_all(&self, absolute: bool) -> Result<String> {
        let mut parts = Vec::new();
        if let Some(t) = self.similarity_table() {
            parts.push(t);
        }
        parts.push(self.improvement_table()?);
        parts.push(self.gap_table()?);
        parts.push(self.far_table());
        if absolute {
            parts.push(self.absolute_table());
        }
        Ok(parts.join("\n"))
    }
}

/// Writes the text tables, the JSON results and the projection CSV.
pub fn write_reports(
    ws: &Workspace,
    out: &mut Outputs,
    results: &ExperimentResults,
    projection: Option<&[ProjectedPoint]>,
    absolute: bool,
) -> Result<()> {
    let dir = ws.reports_dir();
    if let Some(t) = results.similarity_table() {
        out.write(dir.join("table2_similarity.txt"), t.as_bytes())?;
    }
    out.write(dir.join("table3_relative.txt"), results.improvement_table()?.as_bytes())?;
    out.write(dir.join("table4_gap.txt"), results.gap_table()?.as_bytes())?;
    out.write(dir.join("far_check.txt"), results.far_table().as_bytes())?;
    if absolute {
        out.write(dir.join("eer_absolute.txt"), results.absolute_table().as_bytes())?;
    }
    out.write(dir.join(RESULTS_FILE), &serde_json::to_vec_pretty(results)?)?;
    if let Some(points) = projection {
        let mut csv = Vec::new();
        write_projection_csv(&mut csv, points)?;
        out.write(dir.join("projection.csv"), &csv)?;
    }
    Ok(())
}

pub fn load_results(ws: &Workspace) -> Result<ExperimentResults> {
    let path = ws.reports_dir().join(RESULTS_FILE);
    if !path.is_file() {
        bail!("no results at {}: run evaluate or run-experiment first", path.display());
    }
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
