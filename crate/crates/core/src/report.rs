//! JSON and CSV report persistence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{Method, ThresholdSet};
use crate::metrics::{ObjectReport, ObjectSummary, PixelMetrics};
use crate::threshold::{Candidate, ExtentThreshold, SearchOutcome};

pub const EVAL_REPORT_KIND: &str = "evaluation";
pub const OPTIMIZATION_REPORT_KIND: &str = "optimization";

/// Schemas for the JSON reports, shipped with the crate.
pub const EVAL_REPORT_SCHEMA: &str = include_str!("../schemas/eval_report.schema.json");
pub const OPTIMIZATION_REPORT_SCHEMA: &str =
    include_str!("../schemas/optimization_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: String,
    pub name: String,
    /// Pixel metrics of the extracted extent against the reference extent.
    pub pixel: PixelMetrics,
    pub object: ObjectReport,
}

impl EvalReport {
    pub fn new(name: impl Into<String>, pixel: PixelMetrics, object: ObjectReport) -> Self {
        Self {
            kind: EVAL_REPORT_KIND.into(),
            name: name.into(),
            pixel,
            object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub kind: String,
    pub method: Method,
    pub seed: u64,
    pub budget: usize,
    pub extent: Option<ExtentThreshold>,
    pub n_candidates: usize,
    pub front: Vec<Candidate>,
    pub selected: Candidate,
    pub thresholds: ThresholdSet,
}

impl OptimizationReport {
    pub fn new(outcome: &SearchOutcome, seed: u64, budget: usize) -> Self {
        Self {
            kind: OPTIMIZATION_REPORT_KIND.into(),
            method: outcome.method,
            seed,
            budget,
            extent: outcome.extent,
            n_candidates: outcome.candidates.len(),
            front: outcome.front.clone(),
            selected: outcome.selected,
            thresholds: outcome.selected.thresholds,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    name: &'a str,
    hit_rate: f64,
    oversegmentation: f64,
    undersegmentation: f64,
    eccentricity: f64,
    shift: f64,
}

/// CSV table with one row per named summary.
pub fn summary_csv(rows: &[(String, ObjectSummary)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (name, s) in rows {
        w.serialize(SummaryRow {
            name,
            hit_rate: s.hit_rate,
            oversegmentation: s.s_over,
            undersegmentation: s.s_under,
            eccentricity: s.eccentricity_factor,
            shift: s.location_shift,
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(["name", "hit_rate", "oversegmentation", "undersegmentation", "eccentricity", "shift"])
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_summary_csv(rows: &[(String, ObjectSummary)], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &summary_csv(rows)?)
}

#[derive(Debug, Serialize)]
struct CandidateRow {
    t_extent: f64,
    t_boundary: f64,
    t_distance: f64,
    s_over: f64,
    s_under: f64,
    hit_rate: f64,
    n_fields: usize,
}

/// CSV of candidates, one per row.
pub fn candidates_csv(cands: &[Candidate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cands {
        w.serialize(CandidateRow {
            t_extent: c.thresholds.t_extent,
            t_boundary: c.thresholds.t_boundary,
            t_distance: c.thresholds.t_distance,
            s_over: c.s_over,
            s_under: c.s_under,
            hit_rate: c.hit_rate,
            n_fields: c.n_fields,
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_candidates_csv(cands: &[Candidate], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &candidates_csv(cands)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_csv_has_table_columns() {
        let s = ObjectSummary {
            n_reference: 2,
            n_extracted: 2,
            n_detected: 2,
            hit_rate: 1.0,
            s_over: 0.9,
            s_under: 0.8,
            eccentricity_factor: 0.99,
            location_shift: 0.25,
        };
        let text = summary_csv(&[("a".into(), s)]).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "name,hit_rate,oversegmentation,undersegmentation,eccentricity,shift"
        );
        assert_eq!(lines.next().unwrap(), "a,1.0,0.9,0.8,0.99,0.25");
    }

    #[test]
    fn empty_summary_csv_keeps_header() {
        assert!(summary_csv(&[]).unwrap().starts_with("name,hit_rate"));
    }
}
