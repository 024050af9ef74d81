//! Append-only JSONL run log: a config snapshot, one line per round, a summary.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::RunConfig;
use crate::agent::{AgentDecision, DecisionOutcome};
use crate::bertrand::{BertrandFirmState, BertrandRoundRecord};
use crate::equilibrium::EquilibriumResult;
use crate::gateway::{CompletionExchange, UsageTotals};
use crate::market::RoundRecord;

pub const LOG_FILE: &str = "run.jsonl";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot access run log {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("run log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("run log integrity error at round {round}: {message}")]
    Integrity { round: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRound {
    pub firm: usize,
    #[serde(flatten)]
    pub outcome: DecisionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RoundOutcome {
    Cournot {
        record: RoundRecord,
    },
    Bertrand {
        records: Vec<BertrandRoundRecord>,
        states: Vec<BertrandFirmState>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEvent {
    pub round: usize,
    pub agents: Vec<AgentRound>,
    pub outcome: RoundOutcome,
}

impl RoundEvent {
    pub fn decisions(&self) -> impl Iterator<Item = &AgentDecision> {
        self.agents.iter().map(|a| &a.outcome.decision)
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &CompletionExchange> {
        self.agents.iter().flat_map(|a| a.outcome.exchanges.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineProfile {
    pub result: EquilibriumResult,
    /// Per-firm coefficient of variation of the baseline allocation.
    pub cv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash: Option<BaselineProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monopoly: Option<BaselineProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monopoly_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rounds_completed: usize,
    pub cumulative_profits: Vec<f64>,
    pub usage: UsageTotals,
    pub retry_events: usize,
    pub fallbacks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<Baselines>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Config { config: RunConfig },
    Round(RoundEvent),
    Summary(RunSummary),
}

/// A parsed run log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub config: RunConfig,
    pub rounds: Vec<RoundEvent>,
    pub summary: Option<RunSummary>,
}

impl RunLog {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            rounds: Vec::new(),
            summary: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.summary.is_some()
    }

    /// Cournot round records in order; empty for Bertrand logs.
    pub fn cournot_records(&self) -> Vec<RoundRecord> {
        self.rounds
            .iter()
            .filter_map(|r| match &r.outcome {
                RoundOutcome::Cournot { record } => Some(record.clone()),
                RoundOutcome::Bertrand { .. } => None,
            })
            .collect()
    }

    pub fn bertrand_records(&self) -> Vec<Vec<BertrandRoundRecord>> {
        self.rounds
            .iter()
            .filter_map(|r| match &r.outcome {
                RoundOutcome::Bertrand { records, .. } => Some(records.clone()),
                RoundOutcome::Cournot { .. } => None,
            })
            .collect()
    }

    /// Parses a log. A final line without its newline is a torn write and is dropped.
    pub fn parse(text: &str) -> Result<Self, LogError> {
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        let mut config = None;
        let mut rounds: Vec<RoundEvent> = Vec::new();
        let mut summary = None;
        for (k, line) in complete.lines().enumerate() {
            let lineno = k + 1;
            if line.trim().is_empty() {
                continue;
            }
            let event: LogEvent = serde_json::from_str(line).map_err(|e| LogError::Corrupt {
                line: lineno,
                message: e.to_string(),
            })?;
            let corrupt = |message: &str| LogError::Corrupt {
                line: lineno,
                message: message.to_string(),
            };
            match event {
                LogEvent::Config { config: c } => {
                    if config.is_some() {
                        return Err(corrupt("second config event"));
                    }
                    config = Some(c);
                }
                LogEvent::Round(r) => {
                    if config.is_none() {
                        return Err(corrupt("round event before the config event"));
                    }
                    if summary.is_some() {
                        return Err(corrupt("round event after the summary"));
                    }
                    let expected = rounds.len() + 1;
                    if r.round != expected {
                        return Err(LogError::Integrity {
                            round: r.round,
                            message: format!("expected round {expected}"),
                        });
                    }
                    rounds.push(r);
                }
                LogEvent::Summary(s) => {
                    if config.is_none() || summary.is_some() {
                        return Err(corrupt("unexpected summary event"));
                    }
                    summary = Some(s);
                }
            }
        }
        let config = config.ok_or(LogError::Corrupt {
            line: 1,
            message: "missing config event".into(),
        })?;
        Ok(Self {
            config,
            rounds,
            summary,
        })
    }

    pub fn read(path: &Path) -> Result<Self, LogError> {
        let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Reads `dir/run.jsonl`.
    pub fn read_dir(dir: &Path) -> Result<Self, LogError> {
        Self::read(&dir.join(LOG_FILE))
    }
}

pub fn encode(event: &LogEvent) -> String {
    let mut s = serde_json::to_string(event).expect("log events serialize");
    s.push('\n');
    s
}

/// Single writer appending one flushed line per event.
pub struct LogWriter {
    path: String,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new()
            .create_new(true)
            .write(true)
            .open(path)
            .map_err(|source| LogError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(Self {
            path: path.display().to_string(),
            out: BufWriter::new(file),
        })
    }

    /// Reopens an existing log, cutting it back to `keep_bytes`.
    pub fn reopen(path: &Path, keep_bytes: u64) -> Result<Self, LogError> {
        let io = |source| LogError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = OpenOptions::new().write(true).open(path).map_err(io)?;
        file.set_len(keep_bytes).map_err(io)?;
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        Ok(Self {
            path: path.display().to_string(),
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, event: &LogEvent) -> Result<(), LogError> {
        let line = encode(event);
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .and_then(|_| self.out.get_ref().sync_data())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }
}
