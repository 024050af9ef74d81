//! Specialization statistics for a finished Cournot run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::export::{log_baselines, ExportError};
use super::log::RunLog;
use crate::agent::GameMode;
use crate::stats::{bootstrap_test, cv_series, BootstrapConfig, BootstrapResult, StatsError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("CV statistics are defined for the Cournot game only")]
    NotCournot,
    #[error("the log has no rounds")]
    Empty,
    #[error("no Nash baseline for this market: {0}")]
    NoNull(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTest {
    /// 1-based firm number, or `None` for the pooled series.
    pub firm: Option<usize>,
    pub rounds: usize,
    pub mean_cv: f64,
    pub null_cv: f64,
    pub test: BootstrapResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub per_firm: Vec<SeriesTest>,
    /// Round-by-round mean CV across firms, tested against the mean Nash CV.
    pub pooled: SeriesTest,
}

/// Tests each firm's CV series against its Nash CV.
pub fn stats_report(log: &RunLog, config: &BootstrapConfig) -> Result<StatsReport, ReportError> {
    if log.config.mode != GameMode::Cournot {
        return Err(ReportError::NotCournot);
    }
    let records = log.cournot_records();
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let baselines = log_baselines(log)?;
    let nash = baselines
        .nash
        .ok_or_else(|| ReportError::NoNull(baselines.nash_error.unwrap_or_default()))?;
    let n = log.config.n_firms();
    let mut per_firm = Vec::with_capacity(n);
    let mut series: Vec<Vec<f64>> = Vec::with_capacity(n);
    for firm in 0..n {
        let cvs: Vec<f64> = cv_series(&records, firm)?.into_iter().map(|p| p.cv).collect();
        let null_cv = nash.cv[firm];
        let test = bootstrap_test(&cvs, null_cv, config)?;
        per_firm.push(SeriesTest {
            firm: Some(firm + 1),
            rounds: cvs.len(),
            mean_cv: test.observed_mean,
            null_cv,
            test,
        });
        series.push(cvs);
    }
    let pooled_series: Vec<f64> = (0..records.len())
        .map(|t| series.iter().map(|s| s[t]).sum::<f64>() / n as f64)
        .collect();
    let pooled_null = nash.cv.iter().sum::<f64>() / n as f64;
    let test = bootstrap_test(&pooled_series, pooled_null, config)?;
    Ok(StatsReport {
        per_firm,
        pooled: SeriesTest {
            firm: None,
            rounds: pooled_series.len(),
            mean_cv: test.observed_mean,
            null_cv: pooled_null,
            test,
        },
    })
}
