//! Price-setting market with logit demand and marginal-cost investments.
//!
//! Each product is an independent demand system. Firms start with an
//! endowment and can buy a two-level marginal-cost ladder per product; costs
//! are paid out of the firm's cash, which is the endowment plus accumulated
//! profit minus earlier investments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::product_label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BertrandError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("investment option {0} is not offered")]
    NotOffered(String),
    #[error("firm {firm}: {reason}")]
    InvalidDecision { firm: usize, reason: String },
}

/// Logit demand parameters shared by every product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogitDemandParams {
    /// Quality index per firm.
    pub a: Vec<f64>,
    /// Outside-option index.
    pub a0: f64,
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
}

impl Default for LogitDemandParams {
    fn default() -> Self {
        Self {
            a: vec![75.0, 75.0],
            a0: 0.0,
            alpha: 1.0,
            mu: 8.0,
            beta: 1000.0,
        }
    }
}

impl LogitDemandParams {
    pub fn validate(&self, n_firms: usize) -> Result<(), BertrandError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(BertrandError::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        if !self.a0.is_finite() || self.a.iter().any(|a| !a.is_finite()) {
            return Err(BertrandError::InvalidParameter("quality indices must be finite".into()));
        }
        if self.a.len() != n_firms {
            return Err(BertrandError::InvalidParameter(format!(
                "expected {n_firms} quality indices, got {}",
                self.a.len()
            )));
        }
        Ok(())
    }
}

/// Quantities sold by every firm of one product.
///
/// Firms with `active[i] == false` sell nothing and are left out of the
/// denominator.
pub fn logit_quantities(params: &LogitDemandParams, prices: &[f64], active: &[bool]) -> Vec<f64> {
    let z: Vec<f64> = prices
        .iter()
        .zip(&params.a)
        .map(|(p, a)| (a - p / params.alpha) / params.mu)
        .collect();
    let z0 = params.a0 / params.mu;
    let shift = z
        .iter()
        .zip(active)
        .filter(|(_, on)| **on)
        .map(|(z, _)| *z)
        .fold(z0, f64::max);
    let weights: Vec<f64> = z
        .iter()
        .zip(active)
        .map(|(z, on)| if *on { (z - shift).exp() } else { 0.0 })
        .collect();
    let denom = weights.iter().sum::<f64>() + (z0 - shift).exp();
    weights.iter().map(|w| params.beta * w / denom).collect()
}

/// Quantity sold by `firm` when every firm is in the market.
pub fn logit_quantity(params: &LogitDemandParams, prices: &[f64], firm: usize) -> f64 {
    logit_quantities(params, prices, &vec![true; prices.len()])[firm]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub mc: f64,
    pub cost: f64,
}

/// Marginal-cost ladder, identical for both products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InvestmentLadder {
    pub initial_mc: f64,
    pub levels: [LadderLevel; 2],
}

impl Default for InvestmentLadder {
    fn default() -> Self {
        Self {
            initial_mc: 100.0,
            levels: [
                LadderLevel {
                    mc: 80.0,
                    cost: 10_000.0,
                },
                LadderLevel {
                    mc: 50.0,
                    cost: 10_000.0,
                },
            ],
        }
    }
}

impl InvestmentLadder {
    pub fn mc_at(&self, level: u8) -> f64 {
        match level {
            0 => self.initial_mc,
            l => self.levels[(l as usize - 1).min(1)].mc,
        }
    }

    pub fn validate(&self) -> Result<(), BertrandError> {
        let mcs = [self.initial_mc, self.levels[0].mc, self.levels[1].mc];
        if mcs.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(BertrandError::InvalidParameter("marginal costs must be >= 0".into()));
        }
        if self.levels.iter().any(|l| !(l.cost.is_finite() && l.cost >= 0.0)) {
            return Err(BertrandError::InvalidParameter("investment costs must be >= 0".into()));
        }
        Ok(())
    }
}

/// The seven investment choices, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvestmentKind {
    None,
    PhaseOneA,
    PhaseOneB,
    PhaseOneBoth,
    PhaseTwoA,
    PhaseTwoB,
    PhaseTwoBoth,
}

impl InvestmentKind {
    pub const ALL: [InvestmentKind; 7] = [
        InvestmentKind::None,
        InvestmentKind::PhaseOneA,
        InvestmentKind::PhaseOneB,
        InvestmentKind::PhaseOneBoth,
        InvestmentKind::PhaseTwoA,
        InvestmentKind::PhaseTwoB,
        InvestmentKind::PhaseTwoBoth,
    ];

    /// Level purchased for each product: `(product, level_after)`.
    fn upgrades(self) -> &'static [(usize, u8)] {
        match self {
            InvestmentKind::None => &[],
            InvestmentKind::PhaseOneA => &[(0, 1)],
            InvestmentKind::PhaseOneB => &[(1, 1)],
            InvestmentKind::PhaseOneBoth => &[(0, 1), (1, 1)],
            InvestmentKind::PhaseTwoA => &[(0, 2)],
            InvestmentKind::PhaseTwoB => &[(1, 2)],
            InvestmentKind::PhaseTwoBoth => &[(0, 2), (1, 2)],
        }
    }

    pub fn cost(self, ladder: &InvestmentLadder) -> f64 {
        self.upgrades()
            .iter()
            .map(|&(_, level)| ladder.levels[level as usize - 1].cost)
            .fold(0.0, |a, c| a + c)
    }

    pub fn is_available(self, levels: &[u8]) -> bool {
        self.upgrades()
            .iter()
            .all(|&(product, level)| levels.get(product) == Some(&(level - 1)))
    }

    pub fn describe(self, ladder: &InvestmentLadder) -> String {
        let m0 = money(ladder.initial_mc);
        let m1 = money(ladder.levels[0].mc);
        let m2 = money(ladder.levels[1].mc);
        let cost = money(self.cost(ladder));
        match self {
            InvestmentKind::None => format!("No investments for either product at this time. (Cost: ${cost})"),
            InvestmentKind::PhaseOneA => format!(
                "Invest in Phase I Product A Production ONLY to decrease MC from ${m0} to ${m1}. (Cost: ${cost})"
            ),
            InvestmentKind::PhaseOneB => format!(
                "Invest in Phase I Product B Production ONLY to decrease MC from ${m0} to ${m1}. (Cost: ${cost})"
            ),
            InvestmentKind::PhaseOneBoth => format!(
                "Invest in BOTH Phase I Product A and Product B Production ONLY to decrease MCs to ${m1}. (Cost: ${cost})"
            ),
            InvestmentKind::PhaseTwoA => format!(
                "Invest in Phase II Product A Production ONLY to decrease MC from ${m1} to ${m2}. (Cost: ${cost})"
            ),
            InvestmentKind::PhaseTwoB => format!(
                "Invest in Phase II Product B Production ONLY to decrease MC from ${m1} to ${m2}. (Cost: ${cost})"
            ),
            InvestmentKind::PhaseTwoBoth => format!(
                "Invest in BOTH Phase II Product A and Product B Production to decrease MCs from ${m1} to ${m2}. (Cost: ${cost})"
            ),
        }
    }
}

/// Whole-number amounts print without decimals, everything else with two.
pub fn money(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestmentOption {
    pub letter: char,
    pub kind: InvestmentKind,
    pub cost: f64,
}

impl InvestmentOption {
    pub fn render(&self, ladder: &InvestmentLadder) -> String {
        format!("{}: {}", self.letter, self.kind.describe(ladder))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertrandFirmState {
    pub cash: f64,
    pub mc: Vec<f64>,
    pub levels: Vec<u8>,
    pub cumulative_profit: f64,
    pub total_invested: f64,
}

impl BertrandFirmState {
    pub fn new(endowment: f64, ladder: &InvestmentLadder) -> Self {
        Self {
            cash: endowment,
            mc: vec![ladder.initial_mc; 2],
            levels: vec![0; 2],
            cumulative_profit: 0.0,
            total_invested: 0.0,
        }
    }
}

/// Options the firm may choose this round, re-lettered from `A`.
pub fn offer_investments(state: &BertrandFirmState, ladder: &InvestmentLadder) -> Vec<InvestmentOption> {
    InvestmentKind::ALL
        .iter()
        .filter(|k| **k == InvestmentKind::None || (k.is_available(&state.levels) && state.cash >= k.cost(ladder)))
        .enumerate()
        .map(|(i, &kind)| InvestmentOption {
            letter: (b'A' + i as u8) as char,
            kind,
            cost: kind.cost(ladder),
        })
        .collect()
}

/// Resolves a chosen letter against the offered list.
pub fn resolve_choice(choice: &str, offered: &[InvestmentOption]) -> Result<InvestmentKind, BertrandError> {
    let letter = choice.trim();
    offered
        .iter()
        .find(|o| letter.len() == 1 && letter.eq_ignore_ascii_case(&o.letter.to_string()))
        .map(|o| o.kind)
        .ok_or_else(|| BertrandError::NotOffered(letter.to_string()))
}

/// Applies a chosen option to a firm's state.
pub fn apply_investments(
    state: &BertrandFirmState,
    choice: &str,
    offered: &[InvestmentOption],
    ladder: &InvestmentLadder,
) -> Result<BertrandFirmState, BertrandError> {
    let kind = resolve_choice(choice, offered)?;
    apply_investment_kind(state, kind, ladder)
}

pub fn apply_investment_kind(
    state: &BertrandFirmState,
    kind: InvestmentKind,
    ladder: &InvestmentLadder,
) -> Result<BertrandFirmState, BertrandError> {
    let cost = kind.cost(ladder);
    if !kind.is_available(&state.levels) || (kind != InvestmentKind::None && state.cash < cost) {
        return Err(BertrandError::NotOffered(format!("{kind:?}")));
    }
    let mut next = state.clone();
    for &(product, level) in kind.upgrades() {
        next.levels[product] = level;
        next.mc[product] = ladder.mc_at(level);
    }
    next.cash -= cost;
    next.total_invested += cost;
    Ok(next)
}

/// Static description of a Bertrand market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BertrandMarket {
    pub demand: LogitDemandParams,
    pub ladder: InvestmentLadder,
    pub endowment: f64,
    /// Remove a firm pricing at exactly 0 from that product's demand system.
    pub treat_zero_price_as_exit: bool,
}

impl Default for BertrandMarket {
    fn default() -> Self {
        Self {
            demand: LogitDemandParams::default(),
            ladder: InvestmentLadder::default(),
            endowment: 8_500.0,
            treat_zero_price_as_exit: false,
        }
    }
}

impl BertrandMarket {
    pub const PRODUCTS: usize = 2;

    pub fn n_firms(&self) -> usize {
        self.demand.a.len()
    }

    pub fn validate(&self) -> Result<(), BertrandError> {
        if self.n_firms() < 2 {
            return Err(BertrandError::InvalidParameter(
                "a Bertrand market needs at least two firms".into(),
            ));
        }
        self.demand.validate(self.n_firms())?;
        self.ladder.validate()?;
        if !(self.endowment.is_finite() && self.endowment >= 0.0) {
            return Err(BertrandError::InvalidParameter(format!(
                "endowment must be >= 0, got {}",
                self.endowment
            )));
        }
        Ok(())
    }

    pub fn initial_states(&self) -> Vec<BertrandFirmState> {
        (0..self.n_firms())
            .map(|_| BertrandFirmState::new(self.endowment, &self.ladder))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertrandDecision {
    pub prices: Vec<f64>,
    pub investment: InvestmentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertrandProductRecord {
    pub price: f64,
    pub competitor_prices: Vec<f64>,
    pub mc: f64,
    pub quantity: f64,
    pub share: f64,
    pub profit: f64,
    pub levels_owned: u8,
    pub purchased_this_round: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertrandRoundRecord {
    pub round: usize,
    pub firm: usize,
    pub products: Vec<BertrandProductRecord>,
    pub investment: InvestmentKind,
    pub investment_cost: f64,
    pub round_profit: f64,
    pub cumulative_profit: f64,
    /// Funds after this round: endowment + profits - investments.
    pub cash: f64,
}

/// Clears one round: investments first, then demand and profits.
pub fn clear_bertrand_round(
    market: &BertrandMarket,
    states: &[BertrandFirmState],
    decisions: &[BertrandDecision],
    round: usize,
) -> Result<(Vec<BertrandFirmState>, Vec<BertrandRoundRecord>), BertrandError> {
    let n = market.n_firms();
    if states.len() != n || decisions.len() != n {
        return Err(BertrandError::InvalidParameter(format!(
            "expected {n} states and decisions, got {} and {}",
            states.len(),
            decisions.len()
        )));
    }
    for (i, d) in decisions.iter().enumerate() {
        if d.prices.len() != BertrandMarket::PRODUCTS {
            return Err(BertrandError::InvalidDecision {
                firm: i + 1,
                reason: format!("expected 2 prices, got {}", d.prices.len()),
            });
        }
        if let Some(p) = d.prices.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(BertrandError::InvalidDecision {
                firm: i + 1,
                reason: format!("price {p} is not a finite nonnegative number"),
            });
        }
    }

    let mut next: Vec<BertrandFirmState> = states
        .iter()
        .zip(decisions)
        .enumerate()
        .map(|(i, (s, d))| {
            apply_investment_kind(s, d.investment, &market.ladder).map_err(|e| BertrandError::InvalidDecision {
                firm: i + 1,
                reason: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut products: Vec<Vec<BertrandProductRecord>> = vec![Vec::new(); n];
    for j in 0..BertrandMarket::PRODUCTS {
        let prices: Vec<f64> = decisions.iter().map(|d| d.prices[j]).collect();
        let active: Vec<bool> = prices
            .iter()
            .map(|p| !(market.treat_zero_price_as_exit && *p == 0.0))
            .collect();
        let quantities = logit_quantities(&market.demand, &prices, &active);
        let sold: f64 = quantities.iter().sum();
        for i in 0..n {
            let mc = next[i].mc[j];
            let q = quantities[i];
            products[i].push(BertrandProductRecord {
                price: prices[i],
                competitor_prices: prices
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, p)| *p)
                    .collect(),
                mc,
                quantity: q,
                share: if sold > 0.0 { q / sold } else { 0.0 },
                profit: (prices[i] - mc) * q,
                levels_owned: next[i].levels[j],
                purchased_this_round: next[i].levels[j] - states[i].levels[j],
            });
        }
    }

    let records = products
        .into_iter()
        .enumerate()
        .map(|(i, prods)| {
            let round_profit: f64 = prods.iter().map(|p| p.profit).sum();
            let state = &mut next[i];
            state.cash += round_profit;
            state.cumulative_profit += round_profit;
            BertrandRoundRecord {
                round,
                firm: i,
                products: prods,
                investment: decisions[i].investment,
                investment_cost: decisions[i].investment.cost(&market.ladder),
                round_profit,
                cumulative_profit: state.cumulative_profit,
                cash: state.cash,
            }
        })
        .collect();
    Ok((next, records))
}

/// Product name used in prompts.
pub fn product_name(j: usize) -> String {
    format!("Product {}", product_label(j))
}
