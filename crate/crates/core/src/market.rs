//! Multi-firm, multi-commodity Cournot market.
//!
//! Every commodity clears through a linear inverse demand `p = alpha - Q / beta`
//! where `Q` is the aggregate quantity brought to that market. A firm's round
//! profit is `sum_j (p_j - c_ij) * q_ij`. All functions here are pure.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Tolerance used when checking the capacity constraint.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Linear inverse demand parameters for one commodity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandParams {
    pub alpha: f64,
    pub beta: f64,
}

impl DemandParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        let params = Self { alpha, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "demand alpha must be finite and > 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "demand beta must be finite and > 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Market-clearing price for an aggregate quantity. Negative prices are
/// returned as-is.
pub fn clearing_price(demand: &DemandParams, total_quantity: f64) -> Result<f64, ModelError> {
    if total_quantity.is_nan() || total_quantity < 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "total quantity must be >= 0, got {total_quantity}"
        )));
    }
    Ok(demand.alpha - total_quantity / demand.beta)
}

/// The Cournot market: firms, commodities, demand, costs and capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarketModel", into = "RawMarketModel")]
pub struct MarketModel {
    commodities: Vec<String>,
    demand: Vec<DemandParams>,
    costs: Vec<Vec<f64>>,
    capacity: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMarketModel {
    commodities: Vec<String>,
    demand: Vec<DemandParams>,
    costs: Vec<Vec<f64>>,
    capacity: Vec<f64>,
}

impl TryFrom<RawMarketModel> for MarketModel {
    type Error = ModelError;

    fn try_from(raw: RawMarketModel) -> Result<Self, Self::Error> {
        MarketModel::new(raw.commodities, raw.demand, raw.costs, raw.capacity)
    }
}

impl From<MarketModel> for RawMarketModel {
    fn from(model: MarketModel) -> Self {
        RawMarketModel {
            commodities: model.commodities,
            demand: model.demand,
            costs: model.costs,
            capacity: model.capacity,
        }
    }
}

impl MarketModel {
    pub fn new(
        commodities: Vec<String>,
        demand: Vec<DemandParams>,
        costs: Vec<Vec<f64>>,
        capacity: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let m = commodities.len();
        if m == 0 {
            return Err(ModelError::InvalidParameter(
                "at least one commodity is required".into(),
            ));
        }
        if demand.len() != m {
            return Err(ModelError::Shape(format!(
                "expected {m} demand entries, got {}",
                demand.len()
            )));
        }
        for d in &demand {
            d.validate()?;
        }
        if costs.is_empty() {
            return Err(ModelError::InvalidParameter("at least one firm is required".into()));
        }
        if capacity.len() != costs.len() {
            return Err(ModelError::Shape(format!(
                "{} firms have costs but {} have capacities",
                costs.len(),
                capacity.len()
            )));
        }
        for (i, row) in costs.iter().enumerate() {
            if row.len() != m {
                return Err(ModelError::Shape(format!(
                    "firm {} has {} costs, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(c) = row.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                return Err(ModelError::InvalidParameter(format!(
                    "firm {} has invalid cost {c}",
                    i + 1
                )));
            }
        }
        for (i, k) in capacity.iter().enumerate() {
            if !(k.is_finite() && *k > 0.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "firm {} capacity must be > 0, got {k}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            commodities,
            demand,
            costs,
            capacity,
        })
    }

    /// Identical demand in every market.
    pub fn uniform(alpha: f64, beta: f64, costs: Vec<Vec<f64>>, capacity: Vec<f64>) -> Result<Self, ModelError> {
        let m = costs.first().map_or(0, Vec::len);
        let commodities = (0..m).map(product_label).collect();
        let demand = vec![DemandParams::new(alpha, beta)?; m];
        Self::new(commodities, demand, costs, capacity)
    }

    pub fn n_firms(&self) -> usize {
        self.costs.len()
    }

    pub fn n_commodities(&self) -> usize {
        self.commodities.len()
    }

    pub fn commodities(&self) -> &[String] {
        &self.commodities
    }

    pub fn demand(&self) -> &[DemandParams] {
        &self.demand
    }

    pub fn costs(&self, firm: usize) -> &[f64] {
        &self.costs[firm]
    }

    pub fn capacity(&self, firm: usize) -> f64 {
        self.capacity[firm]
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacity
    }
}

/// Letter label for the `j`-th product: A, B, C, ...
pub fn product_label(j: usize) -> String {
    let mut n = j;
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// One firm's strategy: a quantity per commodity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(pub Vec<f64>);

impl Allocation {
    pub fn zeros(m: usize) -> Self {
        Allocation(vec![0.0; m])
    }

    /// `capacity / m` in every market.
    pub fn even_split(capacity: f64, m: usize) -> Self {
        Allocation(vec![capacity / m as f64; m])
    }

    pub fn quantities(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Allocation) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for Allocation {
    fn from(v: Vec<f64>) -> Self {
        Allocation(v)
    }
}

/// One allocation per firm, in firm order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllocationProfile(pub Vec<Allocation>);

impl AllocationProfile {
    pub fn firms(&self) -> &[Allocation] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Aggregate quantity per commodity, optionally leaving one firm out.
    pub fn totals(&self, m: usize, exclude: Option<usize>) -> Vec<f64> {
        let mut totals = vec![0.0; m];
        for (i, a) in self.0.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            for (t, q) in totals.iter_mut().zip(&a.0) {
                *t += q;
            }
        }
        totals
    }

    pub fn max_abs_diff(&self, other: &AllocationProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Which constraint an allocation violates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    WrongLength { expected: usize, got: usize },
    NonFinite { commodity: usize },
    NegativeQuantity { commodity: usize, quantity: f64 },
    CapacityExceeded { capacity: f64, total: f64, excess: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::WrongLength { expected, got } => {
                write!(f, "expected {expected} quantities, got {got}")
            }
            Violation::NonFinite { commodity } => {
                write!(
                    f,
                    "quantity for Product {} is not a finite number",
                    product_label(*commodity)
                )
            }
            Violation::NegativeQuantity { commodity, quantity } => write!(
                f,
                "negative quantity {quantity} for Product {}",
                product_label(*commodity)
            ),
            Violation::CapacityExceeded {
                capacity,
                total,
                excess,
            } => write!(
                f,
                "total production {total} exceeds the capacity of {capacity} units by {excess}"
            ),
        }
    }
}

/// Result of a feasibility check. An empty violation list means feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub firm: usize,
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Human-readable reason, suitable for re-prompting an agent.
    pub fn describe(&self) -> String {
        self.violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub fn validate_allocation(model: &MarketModel, firm: usize, allocation: &Allocation) -> Feasibility {
    let m = model.n_commodities();
    let mut violations = Vec::new();
    if allocation.0.len() != m {
        violations.push(Violation::WrongLength {
            expected: m,
            got: allocation.0.len(),
        });
        return Feasibility { firm, violations };
    }
    for (j, &q) in allocation.0.iter().enumerate() {
        if !q.is_finite() {
            violations.push(Violation::NonFinite { commodity: j });
        } else if q < 0.0 {
            violations.push(Violation::NegativeQuantity {
                commodity: j,
                quantity: q,
            });
        }
    }
    if violations.is_empty() {
        let capacity = model.capacity(firm);
        let total = allocation.total();
        if total > capacity + FEASIBILITY_TOL {
            violations.push(Violation::CapacityExceeded {
                capacity,
                total,
                excess: total - capacity,
            });
        }
    }
    Feasibility { firm, violations }
}

/// Outcome of one Cournot round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub prices: Vec<f64>,
    pub quantities: Vec<Vec<f64>>,
    pub market_shares: Vec<Vec<f64>>,
    /// Per-firm, per-commodity profit; `profits[i]` is the row sum.
    pub product_profits: Vec<Vec<f64>>,
    pub profits: Vec<f64>,
    pub cumulative_profits: Vec<f64>,
}

/// Clears one round. `previous_cumulative` carries the firms' running
/// totals (pass zeros, or `None`, for the first round).
pub fn clear_round(
    model: &MarketModel,
    profile: &AllocationProfile,
    round: usize,
    previous_cumulative: Option<&[f64]>,
) -> Result<RoundRecord, ModelError> {
    let n = model.n_firms();
    let m = model.n_commodities();
    if profile.len() != n {
        return Err(ModelError::Shape(format!(
            "profile has {} allocations for {n} firms",
            profile.len()
        )));
    }
    for (i, alloc) in profile.firms().iter().enumerate() {
        let verdict = validate_allocation(model, i, alloc);
        if !verdict.is_feasible() {
            return Err(ModelError::Infeasible {
                firm: i + 1,
                reason: verdict.describe(),
            });
        }
    }

    let totals = profile.totals(m, None);
    let prices = model
        .demand()
        .iter()
        .zip(&totals)
        .map(|(d, &q)| clearing_price(d, q))
        .collect::<Result<Vec<_>, _>>()?;

    let quantities: Vec<Vec<f64>> = profile.firms().iter().map(|a| a.0.clone()).collect();
    let market_shares = quantities
        .iter()
        .map(|row| {
            row.iter()
                .zip(&totals)
                .map(|(&q, &total)| if total > 0.0 { q / total } else { 0.0 })
                .collect()
        })
        .collect();
    let product_profits: Vec<Vec<f64>> = quantities
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(&prices)
                .zip(model.costs(i))
                .map(|((&q, &p), &c)| (p - c) * q)
                .collect()
        })
        .collect();
    let profits: Vec<f64> = product_profits.iter().map(|r| r.iter().sum()).collect();
    let cumulative_profits = match previous_cumulative {
        Some(prev) if prev.len() == n => prev.iter().zip(&profits).map(|(a, b)| a + b).collect(),
        Some(prev) => {
            return Err(ModelError::Shape(format!(
                "cumulative profits have {} entries for {n} firms",
                prev.len()
            )))
        }
        None => profits.clone(),
    };

    Ok(RoundRecord {
        round,
        prices,
        quantities,
        market_shares,
        product_profits,
        profits,
        cumulative_profits,
    })
}

/// Profit of one firm under a full profile, without building a record.
pub fn firm_profit(model: &MarketModel, profile: &AllocationProfile, firm: usize) -> f64 {
    let totals = profile.totals(model.n_commodities(), None);
    profile.0[firm]
        .0
        .iter()
        .zip(&totals)
        .zip(model.demand())
        .zip(model.costs(firm))
        .map(|(((&q, &total), d), &c)| (d.alpha - total / d.beta - c) * q)
        .sum()
}
