//! Q-error and MonoM statistics over a workload, and report files.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimator::{baseline_estimate, EstimatorModel, HistogramBaseline};
use crate::workload::{Query, Workload};
use crate::{Error, Result};

/// Anything that maps queries to cardinality estimates.
pub trait CardinalityEstimator: Sync {
    fn estimate_all(&self, queries: &[Query]) -> Result<Vec<f64>>;
}

impl CardinalityEstimator for EstimatorModel {
    fn estimate_all(&self, queries: &[Query]) -> Result<Vec<f64>> {
        self.predict(queries)
    }
}

impl CardinalityEstimator for HistogramBaseline {
    fn estimate_all(&self, queries: &[Query]) -> Result<Vec<f64>> {
        queries.par_iter().map(|q| baseline_estimate(self, q)).collect()
    }
}

/// Replays the stored labels; useful for checking a workload and the metrics.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleReplay;

impl CardinalityEstimator for OracleReplay {
    fn estimate_all(&self, queries: &[Query]) -> Result<Vec<f64>> {
        queries
            .iter()
            .map(|q| {
                q.label
                    .map(|c| c as f64)
                    .ok_or_else(|| Error::Evaluation(format!("query {} has no label", q.id)))
            })
            .collect()
    }
}

/// Adapts a per-query closure.
pub struct FnEstimator<F>(pub F);

impl<F> CardinalityEstimator for FnEstimator<F>
where
    F: Fn(&Query) -> f64 + Sync,
{
    fn estimate_all(&self, queries: &[Query]) -> Result<Vec<f64>> {
        Ok(queries.par_iter().map(|q| (self.0)(q)).collect())
    }
}

/// `max(c/ĉ, ĉ/c)` for positive inputs.
pub fn qerror(c_true: f64, c_est: f64) -> Result<f64> {
    if !(c_true > 0.0 && c_est > 0.0) {
        return Err(Error::Argument(format!(
            "Q-error needs positive cardinalities, got {c_true} and {c_est}"
        )));
    }
    Ok((c_true / c_est).max(c_est / c_true))
}

/// 1 when the looser query's estimate is at least the tighter one's.
pub fn monom_pair(est_loose: f64, est_tight: f64) -> u8 {
    u8::from(est_loose >= est_tight)
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty list");
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QErrorStats {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub mean: f64,
}

impl QErrorStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Evaluation("no queries to summarize".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(QErrorStats {
            median: percentile_nearest_rank(&sorted, 50.0),
            p25: percentile_nearest_rank(&sorted, 25.0),
            p75: percentile_nearest_rank(&sorted, 75.0),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonoMStats {
    pub mean: f64,
    /// Population standard deviation of the per-pair indicators.
    pub std: f64,
    #[serde(rename = "satisfied")]
    pub satisfied_count: u64,
    #[serde(rename = "total")]
    pub total_pairs: u64,
}

impl MonoMStats {
    pub fn from_counts(satisfied: u64, total: u64) -> Self {
        if total == 0 {
            return MonoMStats {
                mean: f64::NAN,
                std: f64::NAN,
                satisfied_count: 0,
                total_pairs: 0,
            };
        }
        let p = satisfied as f64 / total as f64;
        MonoMStats {
            mean: p,
            std: (p * (1.0 - p)).sqrt(),
            satisfied_count: satisfied,
            total_pairs: total,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub qerror: QErrorStats,
    pub monom: MonoMStats,
    pub per_query_qerrors: Option<Vec<f64>>,
    /// Per-epoch wall times, when the report describes a training run.
    pub timing: Option<Vec<f64>>,
}

/// Scores `estimator` on every labeled query and every constraint pair of `workload`.
pub fn evaluate<E: CardinalityEstimator + ?Sized>(estimator: &E, workload: &Workload) -> Result<MetricsReport> {
    let queries = workload.queries();
    if let Some(q) = queries.iter().find(|q| q.label.is_none()) {
        return Err(Error::Evaluation(format!("query {} has no label", q.id)));
    }
    let estimates = estimator.estimate_all(queries)?;
    if estimates.len() != queries.len() {
        return Err(Error::Evaluation("estimator returned the wrong number of estimates".into()));
    }
    if let Some(i) = estimates.iter().position(|e| !e.is_finite()) {
        return Err(Error::Numeric(format!("estimate for query {} is {}", queries[i].id, estimates[i])));
    }
    let per_query = queries
        .iter()
        .zip(&estimates)
        .map(|(q, &e)| qerror((q.label.unwrap() as f64).max(1.0), e.max(1.0)))
        .collect::<Result<Vec<f64>>>()?;

    let satisfied: u64 = workload
        .pair_positions()
        .iter()
        .map(|&(l, t)| u64::from(monom_pair(estimates[l], estimates[t])))
        .sum();

    Ok(MetricsReport {
        qerror: QErrorStats::from_values(&per_query)?,
        monom: MonoMStats::from_counts(satisfied, workload.constraints().len() as u64),
        per_query_qerrors: Some(per_query),
        timing: None,
    })
}

/// Provenance written under `meta` in report files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub workload: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    qerror: QErrorStats,
    monom: MonoMStats,
    meta: ReportMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_query_qerrors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timing: Option<Vec<f64>>,
}

pub fn emit_report(report: &MetricsReport, meta: &ReportMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if report.monom.total_pairs == 0 {
        return Err(Error::Argument("report has no constraint pairs".into()));
    }
    let file = ReportFile {
        qerror: report.qerror,
        monom: report.monom,
        meta: meta.clone(),
        per_query_qerrors: report.per_query_qerrors.clone(),
        timing: report.timing.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Evaluation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<(MetricsReport, ReportMeta)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ReportFile = serde_json::from_str(&text).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok((
        MetricsReport {
            qerror: file.qerror,
            monom: file.monom,
            per_query_qerrors: file.per_query_qerrors,
            timing: file.timing,
        },
        file.meta,
    ))
}
