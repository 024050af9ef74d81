//! Long-format CSV tables for plotting, plus a replay integrity check.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::log::{Baselines, LogError, RoundOutcome, RunLog};
use super::run::compute_baselines;
use crate::agent::{DecisionAction, GameMode};
use crate::bertrand::{clear_bertrand_round, BertrandDecision};
use crate::market::{clear_round, product_label, Allocation, AllocationProfile};
use crate::stats::cv_series;

pub const COURNOT_ALLOCATIONS: [&str; 9] = [
    "round",
    "firm",
    "product",
    "quantity",
    "price",
    "market_share",
    "profit",
    "nash_quantity",
    "monopoly_quantity",
];
pub const COURNOT_CV: [&str; 6] = ["round", "firm", "cv", "zero_mean", "nash_cv", "monopoly_cv"];
pub const COURNOT_PROFITS: [&str; 6] = [
    "round",
    "firm",
    "round_profit",
    "cumulative_profit",
    "nash_profit",
    "monopoly_profit",
];
pub const BERTRAND_PRICES: [&str; 10] = [
    "round",
    "firm",
    "product",
    "price",
    "competitor_price",
    "marginal_cost",
    "quantity",
    "market_share",
    "profit",
    "levels_owned",
];
pub const BERTRAND_PROFITS: [&str; 7] = [
    "round",
    "firm",
    "round_profit",
    "cumulative_profit",
    "cash",
    "investment",
    "investment_cost",
];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
    #[error("{0}")]
    Baselines(String),
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn all_close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y))
}

fn integrity(round: usize, message: impl Into<String>) -> LogError {
    LogError::Integrity {
        round,
        message: message.into(),
    }
}

/// Re-clears every logged round from its logged decisions and compares.
pub fn verify_log(log: &RunLog) -> Result<(), LogError> {
    let config = &log.config;
    let n = config.n_firms();
    match config.mode {
        GameMode::Cournot => {
            let model = config
                .cournot_model()
                .map_err(|e| integrity(0, format!("config snapshot: {e}")))?;
            let mut prev: Option<Vec<f64>> = None;
            for event in &log.rounds {
                let t = event.round;
                let RoundOutcome::Cournot { record } = &event.outcome else {
                    return Err(integrity(t, "bertrand outcome in a cournot log"));
                };
                if event.agents.len() != n {
                    return Err(integrity(
                        t,
                        format!("expected {n} agents, found {}", event.agents.len()),
                    ));
                }
                let profile = AllocationProfile(
                    event
                        .decisions()
                        .map(|d| match &d.action {
                            DecisionAction::Quantities { quantities } => Ok(Allocation(quantities.clone())),
                            _ => Err(integrity(t, "decision is not a quantity choice")),
                        })
                        .collect::<Result<_, _>>()?,
                );
                let replay =
                    clear_round(&model, &profile, t, prev.as_deref()).map_err(|e| integrity(t, e.to_string()))?;
                let same = all_close(&replay.prices, &record.prices)
                    && all_close(&replay.profits, &record.profits)
                    && all_close(&replay.cumulative_profits, &record.cumulative_profits)
                    && replay
                        .quantities
                        .iter()
                        .zip(&record.quantities)
                        .all(|(a, b)| all_close(a, b))
                    && replay
                        .market_shares
                        .iter()
                        .zip(&record.market_shares)
                        .all(|(a, b)| all_close(a, b))
                    && replay
                        .product_profits
                        .iter()
                        .zip(&record.product_profits)
                        .all(|(a, b)| all_close(a, b));
                if !same {
                    return Err(integrity(
                        t,
                        "recorded prices or profits differ from a re-clear of the recorded decisions",
                    ));
                }
                prev = Some(record.cumulative_profits.clone());
            }
        }
        GameMode::Bertrand => {
            let market = config.bertrand_market();
            let mut states = market.initial_states();
            for event in &log.rounds {
                let t = event.round;
                let RoundOutcome::Bertrand {
                    records,
                    states: logged,
                } = &event.outcome
                else {
                    return Err(integrity(t, "cournot outcome in a bertrand log"));
                };
                let decisions: Vec<BertrandDecision> = event
                    .decisions()
                    .map(|d| match &d.action {
                        DecisionAction::Prices { prices, investment } => Ok(BertrandDecision {
                            prices: prices.clone(),
                            investment: *investment,
                        }),
                        _ => Err(integrity(t, "decision is not a price choice")),
                    })
                    .collect::<Result<_, _>>()?;
                let (next, replay) =
                    clear_bertrand_round(&market, &states, &decisions, t).map_err(|e| integrity(t, e.to_string()))?;
                let same = replay.len() == records.len()
                    && replay.iter().zip(records).all(|(a, b)| {
                        a.investment == b.investment
                            && close(a.round_profit, b.round_profit)
                            && close(a.cash, b.cash)
                            && close(a.cumulative_profit, b.cumulative_profit)
                            && a.products.iter().zip(&b.products).all(|(p, q)| {
                                close(p.price, q.price)
                                    && close(p.quantity, q.quantity)
                                    && close(p.profit, q.profit)
                                    && close(p.mc, q.mc)
                                    && p.levels_owned == q.levels_owned
                            })
                    })
                    && next
                        .iter()
                        .zip(logged)
                        .all(|(a, b)| a.levels == b.levels && close(a.cash, b.cash));
                if !same {
                    return Err(integrity(
                        t,
                        "recorded outcome differs from a re-clear of the recorded decisions",
                    ));
                }
                states = next;
            }
        }
    }
    Ok(())
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<std::fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, ExportError> {
        let path = dir.join(name);
        let err = |message: String| ExportError::Write {
            path: path.display().to_string(),
            message,
        };
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&path)
            .map_err(|e| err(e.to_string()))?;
        writer.write_record(header).map_err(|e| err(e.to_string()))?;
        Ok(Self { path, writer })
    }

    fn row(&mut self, row: impl Serialize) -> Result<(), ExportError> {
        self.writer.serialize(row).map_err(|e| ExportError::Write {
            path: self.path.display().to_string(),
            message: e.to_string(),
        })
    }

    fn finish(mut self) -> Result<PathBuf, ExportError> {
        self.writer.flush().map_err(|e| ExportError::Write {
            path: self.path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(self.path)
    }
}

#[derive(Serialize)]
struct AllocationRow {
    round: usize,
    firm: usize,
    product: String,
    quantity: f64,
    price: f64,
    market_share: f64,
    profit: f64,
    nash_quantity: Option<f64>,
    monopoly_quantity: Option<f64>,
}

#[derive(Serialize)]
struct CvRow {
    round: usize,
    firm: usize,
    cv: f64,
    zero_mean: bool,
    nash_cv: Option<f64>,
    monopoly_cv: Option<f64>,
}

#[derive(Serialize)]
struct ProfitRow {
    round: usize,
    firm: usize,
    round_profit: f64,
    cumulative_profit: f64,
    nash_profit: Option<f64>,
    monopoly_profit: Option<f64>,
}

#[derive(Serialize)]
struct PriceRow {
    round: usize,
    firm: usize,
    product: String,
    price: f64,
    competitor_price: f64,
    marginal_cost: f64,
    quantity: f64,
    market_share: f64,
    profit: f64,
    levels_owned: u8,
}

#[derive(Serialize)]
struct BertrandProfitRow {
    round: usize,
    firm: usize,
    round_profit: f64,
    cumulative_profit: f64,
    cash: f64,
    investment: String,
    investment_cost: f64,
}

/// Baselines from the log summary, or recomputed from the config snapshot.
pub fn log_baselines(log: &RunLog) -> Result<Baselines, ExportError> {
    match log.summary.as_ref().and_then(|s| s.baselines.clone()) {
        Some(b) => Ok(b),
        None => compute_baselines(&log.config).map_err(|e| ExportError::Baselines(e.to_string())),
    }
}

/// Writes the tables for `log` into `dir` and returns their paths.
pub fn export_csv(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    verify_log(log)?;
    std::fs::create_dir_all(dir).map_err(|e| ExportError::Write {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    match log.config.mode {
        GameMode::Cournot => export_cournot(log, dir),
        GameMode::Bertrand => export_bertrand(log, dir),
    }
}

fn export_cournot(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    let baselines = log_baselines(log)?;
    let nash = baselines.nash.as_ref();
    let mono = baselines.monopoly.as_ref();
    let records = log.cournot_records();
    let n = log.config.n_firms();

    let mut alloc = Table::create(dir, "allocations.csv", &COURNOT_ALLOCATIONS)?;
    let mut cv = Table::create(dir, "cv.csv", &COURNOT_CV)?;
    let mut profits = Table::create(dir, "profits.csv", &COURNOT_PROFITS)?;
    for firm in 0..n {
        let cvs = if records.is_empty() || records[0].prices.len() < 2 {
            Vec::new()
        } else {
            cv_series(&records, firm).map_err(|e| ExportError::Baselines(e.to_string()))?
        };
        for (k, r) in records.iter().enumerate() {
            for j in 0..r.prices.len() {
                alloc.row(AllocationRow {
                    round: r.round,
                    firm: firm + 1,
                    product: product_label(j),
                    quantity: r.quantities[firm][j],
                    price: r.prices[j],
                    market_share: r.market_shares[firm][j],
                    profit: r.product_profits[firm][j],
                    nash_quantity: nash.map(|b| b.result.profile.firms()[firm].0[j]),
                    monopoly_quantity: mono.map(|b| b.result.profile.firms()[firm].0[j]),
                })?;
            }
            if let Some(p) = cvs.get(k) {
                cv.row(CvRow {
                    round: r.round,
                    firm: firm + 1,
                    cv: p.cv,
                    zero_mean: p.zero_mean,
                    nash_cv: nash.and_then(|b| b.cv.get(firm).copied()),
                    monopoly_cv: mono.and_then(|b| b.cv.get(firm).copied()),
                })?;
            }
            profits.row(ProfitRow {
                round: r.round,
                firm: firm + 1,
                round_profit: r.profits[firm],
                cumulative_profit: r.cumulative_profits[firm],
                nash_profit: nash.map(|b| b.result.firm_profits[firm]),
                monopoly_profit: mono.map(|b| b.result.firm_profits[firm]),
            })?;
        }
    }
    Ok(vec![alloc.finish()?, cv.finish()?, profits.finish()?])
}

fn export_bertrand(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    let mut prices = Table::create(dir, "prices.csv", &BERTRAND_PRICES)?;
    let mut profits = Table::create(dir, "profits.csv", &BERTRAND_PROFITS)?;
    let rounds = log.bertrand_records();
    for firm in 0..log.config.n_firms() {
        for round in &rounds {
            let r = &round[firm];
            for (j, p) in r.products.iter().enumerate() {
                prices.row(PriceRow {
                    round: r.round,
                    firm: firm + 1,
                    product: product_label(j),
                    price: p.price,
                    competitor_price: p.competitor_prices.iter().copied().fold(f64::INFINITY, f64::min),
                    marginal_cost: p.mc,
                    quantity: p.quantity,
                    market_share: p.share,
                    profit: p.profit,
                    levels_owned: p.levels_owned,
                })?;
            }
            profits.row(BertrandProfitRow {
                round: r.round,
                firm: firm + 1,
                round_profit: r.round_profit,
                cumulative_profit: r.cumulative_profit,
                cash: r.cash,
                investment: serde_json::to_value(r.investment)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                investment_cost: r.investment_cost,
            })?;
        }
    }
    Ok(vec![prices.finish()?, profits.finish()?])
}
