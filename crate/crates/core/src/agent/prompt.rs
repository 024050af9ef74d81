//! Observation windows and prompt assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::template::{Template, TemplateError};
use super::AgentMemory;
use crate::bertrand::{money, BertrandRoundRecord, InvestmentLadder, InvestmentOption};
use crate::market::{product_label, MarketModel, RoundRecord};

pub const COURNOT_WINDOW: usize = 30;
pub const BERTRAND_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PromptStyle {
    /// Fixes the known label slips in the market data block.
    #[serde(default)]
    pub correct_label_typos: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CournotProductView {
    pub marginal_cost: f64,
    pub quantity: f64,
    pub market_share: f64,
    pub price: f64,
    pub profit: f64,
}

/// What one firm saw of one Cournot round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CournotObservation {
    pub round: usize,
    pub products: Vec<CournotProductView>,
    pub round_profit: f64,
    pub cumulative_profit: f64,
}

impl CournotObservation {
    pub fn from_record(model: &MarketModel, record: &RoundRecord, firm: usize) -> Self {
        let products = (0..model.n_commodities())
            .map(|j| CournotProductView {
                marginal_cost: model.costs(firm)[j],
                quantity: record.quantities[firm][j],
                market_share: record.market_shares[firm][j],
                price: record.prices[j],
                profit: record.product_profits[firm][j],
            })
            .collect();
        Self {
            round: record.round,
            products,
            round_profit: record.profits[firm],
            cumulative_profit: record.cumulative_profits[firm],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertrandProductView {
    pub marginal_cost: f64,
    pub price: f64,
    pub competitor_price: f64,
    pub market_share: f64,
    pub quantity: f64,
    pub profit: f64,
    pub power_ups: u8,
}

/// What one firm saw of one Bertrand round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertrandObservation {
    pub round: usize,
    pub products: Vec<BertrandProductView>,
    pub cash: f64,
}

impl BertrandObservation {
    pub fn from_record(record: &BertrandRoundRecord) -> Self {
        let products = record
            .products
            .iter()
            .map(|p| BertrandProductView {
                marginal_cost: p.mc,
                price: p.price,
                competitor_price: p.competitor_prices.iter().copied().fold(f64::INFINITY, f64::min),
                market_share: p.share,
                quantity: p.quantity,
                profit: p.profit,
                power_ups: p.levels_owned,
            })
            .collect();
        Self {
            round: record.round,
            products,
            cash: record.cash,
        }
    }
}

/// The most recent `max_len` rounds seen by one firm, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow<T> {
    pub max_len: usize,
    pub entries: Vec<T>,
}

impl<T> ObservationWindow<T> {
    pub fn new(max_len: usize) -> Self {
        Self {
            max_len,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: T) {
        self.entries.push(entry);
        if self.entries.len() > self.max_len {
            let excess = self.entries.len() - self.max_len;
            self.entries.drain(..excess);
        }
    }
}

impl ObservationWindow<CournotObservation> {
    /// Window for the decision of round `history.len() + 1`.
    pub fn cournot(model: &MarketModel, history: &[RoundRecord], firm: usize, max_len: usize) -> Self {
        let start = history.len().saturating_sub(max_len);
        Self {
            max_len,
            entries: history[start..]
                .iter()
                .map(|r| CournotObservation::from_record(model, r, firm))
                .collect(),
        }
    }
}

impl ObservationWindow<BertrandObservation> {
    /// `history[t]` holds every firm's record for round `t + 1`.
    pub fn bertrand(history: &[Vec<BertrandRoundRecord>], firm: usize, max_len: usize) -> Self {
        let start = history.len().saturating_sub(max_len);
        Self {
            max_len,
            entries: history[start..]
                .iter()
                .map(|round| BertrandObservation::from_record(&round[firm]))
                .collect(),
        }
    }
}

/// Two decimals, with negative zero printed as zero.
pub fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn percent(share: f64) -> String {
    format!("{}%", num(share * 100.0))
}

/// Money with thousands separators, e.g. `8,500`.
pub fn grouped_money(v: f64) -> String {
    let plain = money(v);
    let (sign, digits) = match plain.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", plain.as_str()),
    };
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let mut grouped = String::new();
    for (k, ch) in int.chars().enumerate() {
        if k > 0 && (int.len() - k) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    match frac {
        Some(f) => format!("{sign}{grouped}.{f}"),
        None => format!("{sign}{grouped}"),
    }
}

fn share_label(j: usize, style: PromptStyle) -> String {
    if style.correct_label_typos {
        product_label(j)
    } else {
        "A".to_string()
    }
}

pub fn render_cournot_entry(obs: &CournotObservation, style: PromptStyle) -> String {
    let mut s = format!("Round {}:\n\n", obs.round);
    for (j, p) in obs.products.iter().enumerate() {
        let label = product_label(j);
        s.push_str(&format!("* Product {label}:\n"));
        s.push_str(&format!("    - My marginal cost: {}\n", num(p.marginal_cost)));
        s.push_str(&format!("    - My quantity: {}\n", num(p.quantity)));
        s.push_str(&format!(
            "    - My Product {} Market Share: {}\n",
            share_label(j, style),
            percent(p.market_share)
        ));
        s.push_str(&format!("    - Market price: {}\n", num(p.price)));
        s.push_str(&format!("    - My profit earned: {}\n", num(p.profit)));
        s.push_str("    \n");
    }
    s.push_str("* Aggregate Statistics\n");
    s.push_str(&format!("    - Current round profits: {}\n", num(obs.round_profit)));
    s.push_str(&format!("    - Total profit so far: {}", num(obs.cumulative_profit)));
    s
}

pub fn render_bertrand_entry(obs: &BertrandObservation, style: PromptStyle) -> String {
    let mut s = format!("Round {}:\n", obs.round);
    for (j, p) in obs.products.iter().enumerate() {
        let label = product_label(j);
        s.push_str(&format!("* Product {label}:\n"));
        s.push_str(&format!("    - My marginal cost: {}\n", num(p.marginal_cost)));
        s.push_str(&format!("    - My price: {}\n", num(p.price)));
        s.push_str(&format!("    - Competitor's price: {}\n", num(p.competitor_price)));
        s.push_str(&format!(
            "    - My Product {label} Market Share: {}\n",
            percent(p.market_share)
        ));
        s.push_str(&format!("    - My quantity sold: {}\n", num(p.quantity)));
        s.push_str(&format!("    - My profit earned: {}\n", num(p.profit)));
        s.push_str(&format!("    - Product {label} power ups purchased: {}\n", p.power_ups));
        s.push_str("    \n");
    }
    s.push_str("* Aggregate Statistics\n");
    let label = if style.correct_label_typos {
        "Total profit so far"
    } else {
        "Total profit so"
    };
    s.push_str(&format!("    - {label}: {}", num(obs.cash)));
    s
}

pub fn render_market_data<T>(window: &ObservationWindow<T>, render: impl Fn(&T) -> String) -> String {
    window.entries.iter().map(render).collect::<Vec<_>>().join("\n\n")
}

pub fn render_investment_options(options: &[InvestmentOption], ladder: &InvestmentLadder) -> String {
    options
        .iter()
        .map(|o| format!("    {}", o.render(ladder)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Private information a Cournot firm sees about itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CournotFirmView {
    pub costs: Vec<f64>,
    pub capacity: f64,
}

/// Private information a Bertrand firm sees about itself.
#[derive(Debug, Clone, PartialEq)]
pub struct BertrandFirmView {
    pub mc: Vec<f64>,
    pub ladder: InvestmentLadder,
    pub endowment: f64,
    pub offered: Vec<InvestmentOption>,
}

pub fn cournot_prompt(
    view: &CournotFirmView,
    memory: &AgentMemory,
    window: &ObservationWindow<CournotObservation>,
    style: PromptStyle,
) -> Result<String, TemplateError> {
    let mut v: BTreeMap<&str, String> = BTreeMap::new();
    v.insert("HISTORY_WINDOW", window.max_len.to_string());
    v.insert("COST_A", money(view.costs.first().copied().unwrap_or(0.0)));
    v.insert("COST_B", money(view.costs.get(1).copied().unwrap_or(0.0)));
    v.insert("CAPACITY", money(view.capacity));
    v.insert("PLANS", memory.plans.clone());
    v.insert("INSIGHTS", memory.insights.clone());
    v.insert(
        "MARKET_DATA",
        render_market_data(window, |o| render_cournot_entry(o, style)),
    );
    Template::cournot().render(&v)
}

pub fn bertrand_prompt(
    view: &BertrandFirmView,
    memory: &AgentMemory,
    window: &ObservationWindow<BertrandObservation>,
    style: PromptStyle,
) -> Result<String, TemplateError> {
    let ladder = &view.ladder;
    let mut v: BTreeMap<&str, String> = BTreeMap::new();
    v.insert("HISTORY_WINDOW", window.max_len.to_string());
    v.insert("LEVEL1_COST", money(ladder.levels[0].cost));
    v.insert("LEVEL2_COST", money(ladder.levels[1].cost));
    v.insert("MC_LEVEL0", money(ladder.initial_mc));
    v.insert("MC_LEVEL1", money(ladder.levels[0].mc));
    v.insert("MC_LEVEL2", money(ladder.levels[1].mc));
    v.insert("ENDOWMENT", grouped_money(view.endowment));
    v.insert("COST_A", money(view.mc.first().copied().unwrap_or(0.0)));
    v.insert("COST_B", money(view.mc.get(1).copied().unwrap_or(0.0)));
    v.insert("PLANS", memory.plans.clone());
    v.insert("INSIGHTS", memory.insights.clone());
    v.insert(
        "MARKET_DATA",
        render_market_data(window, |o| render_bertrand_entry(o, style)),
    );
    v.insert("INVESTMENT_OPTIONS", render_investment_options(&view.offered, ladder));
    Template::bertrand().render(&v)
}
