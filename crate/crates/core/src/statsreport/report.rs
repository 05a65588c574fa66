//! Metric reports in JSON, CSV and a tab-separated text table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, StatsError, Summary, TestMethod, WilcoxonResult};
use crate::util::write_atomic;

/// Column order and direction markers of the text table.
pub const TABLE_HEADER: &str = "Model\tFID ↓\tMMD ↓\tMS-SSIM ↑\tPSNR (dB) ↑";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub name: String,
    /// `None` when the metric was skipped.
    pub fid: Option<f64>,
    pub mmd: Option<f64>,
    pub ms_ssim: Option<f64>,
    pub psnr_db: Option<f64>,
    pub feature_source: String,
    pub n_volumes: usize,
    /// Pairs left out of the PSNR mean because they were identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_mse_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl ModelRow {
    pub fn new(name: &str, fid: f64, mmd: f64, ms_ssim: f64, psnr_db: f64) -> Self {
        Self {
            name: name.to_string(),
            fid: Some(fid),
            mmd: Some(mmd),
            ms_ssim: Some(ms_ssim),
            psnr_db: Some(psnr_db),
            feature_source: String::new(),
            n_volumes: 0,
            zero_mse_pairs: None,
            skipped: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub name: String,
    #[serde(rename = "W")]
    pub w: f64,
    pub p: f64,
    pub n: usize,
    pub method: TestMethod,
}

impl TestRow {
    pub fn from_result(name: &str, r: &WilcoxonResult) -> Self {
        Self {
            name: name.to_string(),
            w: r.w_plus,
            p: r.p,
            n: r.n,
            method: r.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl SummaryRow {
    pub fn new(name: &str, s: &Summary) -> Self {
        Self {
            name: name.to_string(),
            mean: s.mean,
            std: s.std,
            n: s.n,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub models: Vec<ModelRow>,
    #[serde(default)]
    pub tests: Vec<TestRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summaries: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

fn render_table(r: &MetricsReport) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for m in &r.models {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            m.name,
            cell(m.fid),
            cell(m.mmd),
            cell(m.ms_ssim),
            cell(m.psnr_db)
        ));
    }
    if !r.summaries.is_empty() {
        out.push_str("\nMetric\tMean ± SD\tn\n");
        for s in &r.summaries {
            out.push_str(&format!("{}\t{:.3} ± {:.4}\t{}\n", s.name, s.mean, s.std, s.n));
        }
    }
    if !r.tests.is_empty() {
        out.push_str("\nTest\tW\tp\tn\tmethod\n");
        for t in &r.tests {
            let method = serde_json::to_value(t.method).unwrap_or_default();
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\t{}\n",
                t.name,
                t.w,
                t.p,
                t.n,
                method.as_str().unwrap_or("")
            ));
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_csv(r: &MetricsReport) -> Result<String> {
    let err = |e: csv::Error| StatsError::Serialize(e.to_string());
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(["name", "fid", "mmd", "ms_ssim", "psnr_db", "feature_source", "n_volumes"])
        .map_err(err)?;
    for m in &r.models {
        w.write_record([
            m.name.clone(),
            opt(m.fid),
            opt(m.mmd),
            opt(m.ms_ssim),
            opt(m.psnr_db),
            m.feature_source.clone(),
            m.n_volumes.to_string(),
        ])
        .map_err(err)?;
    }
    if !r.tests.is_empty() {
        w.write_record([""]).map_err(err)?;
        w.write_record(["test", "W", "p", "n", "method"]).map_err(err)?;
        for t in &r.tests {
            let method = match t.method {
                TestMethod::Exact => "exact",
                TestMethod::Normal => "normal",
            };
            w.write_record([t.name.clone(), t.w.to_string(), t.p.to_string(), t.n.to_string(), method.into()])
                .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| StatsError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| StatsError::Serialize(e.to_string()))
}

pub fn render_report(r: &MetricsReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(r)
            .map(|s| s + "\n")
            .map_err(|e| StatsError::Serialize(e.to_string())),
        ReportFormat::Csv => render_csv(r),
        ReportFormat::Table => Ok(render_table(r)),
    }
}

/// Renders and writes atomically.
pub fn emit_report(r: &MetricsReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(r, format)?;
    write_atomic(path, text.as_bytes()).map_err(|source| StatsError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}
