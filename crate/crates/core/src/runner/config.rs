//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::prompt::{BERTRAND_WINDOW, COURNOT_WINDOW};
use crate::agent::{AgentSettings, AgentSpec, GameMode};
use crate::bertrand::{BertrandMarket, InvestmentKind};
use crate::equilibrium::SolverConfig;
use crate::gateway::{GatewayKind, ModelConfig};
use crate::market::{product_label, validate_allocation, Allocation, DemandParams, MarketModel};
use crate::stats::BootstrapConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|p| format!("  - {p}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    Shared(DemandParams),
    PerMarket(Vec<DemandParams>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CournotMarketConfig {
    #[serde(default = "default_commodities")]
    pub commodities: Vec<String>,
    #[serde(default = "default_demand")]
    pub demand: DemandSpec,
}

fn default_commodities() -> Vec<String> {
    vec![product_label(0), product_label(1)]
}

fn default_demand() -> DemandSpec {
    DemandSpec::Shared(DemandParams {
        alpha: 100.0,
        beta: 2.0,
    })
}

impl Default for CournotMarketConfig {
    fn default() -> Self {
        Self {
            commodities: default_commodities(),
            demand: default_demand(),
        }
    }
}

impl CournotMarketConfig {
    pub fn demand_params(&self) -> Vec<DemandParams> {
        match &self.demand {
            DemandSpec::Shared(d) => vec![*d; self.commodities.len()],
            DemandSpec::PerMarket(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    pub agent: AgentSpec,
}

fn default_in_flight() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub kind: GatewayKind,
    /// Mock replay file; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub model: ModelConfig,
}

fn default_rounds() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: GameMode,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_window: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<CournotMarketConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bertrand: Option<BertrandMarket>,
    pub firms: Vec<FirmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway: Option<GatewayConfig>,
    #[serde(default)]
    pub agents: AgentSettings,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub stats: BootstrapConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(config)
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(replay) = self.gateway.as_mut().and_then(|g| g.replay.as_mut()) {
            if replay.is_relative() {
                let joined = base.join(&*replay);
                *replay = std::path::absolute(&joined).unwrap_or(joined);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn window_len(&self) -> usize {
        self.history_window.unwrap_or(match self.mode {
            GameMode::Cournot => COURNOT_WINDOW,
            GameMode::Bertrand => BERTRAND_WINDOW,
        })
    }

    pub fn cournot_market(&self) -> CournotMarketConfig {
        self.market.clone().unwrap_or_default()
    }

    pub fn bertrand_market(&self) -> BertrandMarket {
        self.bertrand.clone().unwrap_or_default()
    }

    /// The Cournot market model; only valid on a validated Cournot config.
    pub fn cournot_model(&self) -> Result<MarketModel, ConfigError> {
        let market = self.cournot_market();
        let costs = self.firms.iter().map(|f| f.costs.clone().unwrap_or_default()).collect();
        let capacity = self.firms.iter().map(|f| f.capacity.unwrap_or(0.0)).collect();
        MarketModel::new(market.commodities.clone(), market.demand_params(), costs, capacity)
            .map_err(|e| ConfigError::Invalid(vec![format!("market: {e}")]))
    }

    pub fn model_config(&self, firm: usize) -> ModelConfig {
        let base = self.gateway.as_ref().map(|g| g.model.clone()).unwrap_or_default();
        self.firms[firm].agent.model_config(&base)
    }

    pub fn uses_llm(&self) -> bool {
        self.firms.iter().any(|f| f.agent.is_llm())
    }

    /// Every problem found, each prefixed with the offending field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(format!(
                "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.rounds == 0 {
            out.push("rounds: must be at least 1".into());
        }
        if self.history_window == Some(0) {
            out.push("history_window: must be at least 1".into());
        }
        if self.firms.is_empty() {
            out.push("firms: at least one firm is required".into());
        }
        if let Err(e) = self.solver.validate() {
            out.push(format!("solver: {e}"));
        }
        if self.stats.block_size == 0 {
            out.push("stats.block_size: must be at least 1".into());
        }
        if self.stats.resamples == 0 {
            out.push("stats.resamples: must be at least 1".into());
        }
        if !(self.stats.significance > 0.0 && self.stats.significance < 1.0) {
            out.push("stats.significance: must lie in (0, 1)".into());
        }
        match self.mode {
            GameMode::Cournot => self.cournot_problems(&mut out),
            GameMode::Bertrand => self.bertrand_problems(&mut out),
        }
        self.gateway_problems(&mut out);
        out
    }

    fn cournot_problems(&self, out: &mut Vec<String>) {
        if self.bertrand.is_some() {
            out.push("bertrand: not used in cournot mode".into());
        }
        let market = self.cournot_market();
        let m = market.commodities.len();
        if m == 0 {
            out.push("market.commodities: at least one commodity is required".into());
        }
        if let DemandSpec::PerMarket(v) = &market.demand {
            if v.len() != m {
                out.push(format!("market.demand: expected {m} entries, got {}", v.len()));
            }
        }
        for (j, d) in market.demand_params().iter().enumerate() {
            if let Err(e) = d.validate() {
                out.push(format!("market.demand[{j}]: {e}"));
            }
        }
        let mut shapes_ok = true;
        for (i, f) in self.firms.iter().enumerate() {
            match &f.costs {
                None => {
                    shapes_ok = false;
                    out.push(format!("firms[{i}].costs: required in cournot mode"));
                }
                Some(c) if c.len() != m => {
                    shapes_ok = false;
                    out.push(format!("firms[{i}].costs: expected {m} values, got {}", c.len()));
                }
                Some(c) => {
                    if c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                        shapes_ok = false;
                        out.push(format!("firms[{i}].costs: values must be finite and nonnegative"));
                    }
                }
            }
            match f.capacity {
                None => {
                    shapes_ok = false;
                    out.push(format!("firms[{i}].capacity: required in cournot mode"));
                }
                Some(k) if !(k.is_finite() && k > 0.0) => {
                    shapes_ok = false;
                    out.push(format!("firms[{i}].capacity: must be positive, got {k}"));
                }
                _ => {}
            }
            match &f.agent {
                AgentSpec::Llm { .. } if m != 2 => {
                    out.push(format!(
                        "firms[{i}].agent: language-model agents need exactly 2 commodities, got {m}"
                    ));
                }
                AgentSpec::Constant { values, invest } => {
                    if values.len() != m {
                        shapes_ok = false;
                        out.push(format!(
                            "firms[{i}].agent.values: expected {m} quantities, got {}",
                            values.len()
                        ));
                    }
                    if !invest.is_empty() {
                        out.push(format!(
                            "firms[{i}].agent.invest: investments exist only in bertrand mode"
                        ));
                    }
                }
                AgentSpec::Random {
                    price_range: Some(_), ..
                } => {
                    out.push(format!("firms[{i}].agent.price_range: only used in bertrand mode"));
                }
                _ => {}
            }
        }
        if shapes_ok && !self.firms.is_empty() && m > 0 {
            match self.cournot_model() {
                Ok(model) => {
                    for (i, f) in self.firms.iter().enumerate() {
                        if let AgentSpec::Constant { values, .. } = &f.agent {
                            let feas = validate_allocation(&model, i, &Allocation(values.clone()));
                            if !feas.is_feasible() {
                                out.push(format!("firms[{i}].agent.values: {}", feas.describe()));
                            }
                        }
                    }
                }
                Err(ConfigError::Invalid(p)) => out.extend(p),
                Err(e) => out.push(e.to_string()),
            }
        }
    }

    fn bertrand_problems(&self, out: &mut Vec<String>) {
        if self.market.is_some() {
            out.push("market: not used in bertrand mode; use [bertrand]".into());
        }
        let market = self.bertrand_market();
        if let Err(e) = market.validate() {
            out.push(format!("bertrand: {e}"));
        }
        if market.n_firms() != self.firms.len() {
            out.push(format!(
                "bertrand.demand.a: has {} entries but {} firms are configured",
                market.n_firms(),
                self.firms.len()
            ));
        }
        for (i, f) in self.firms.iter().enumerate() {
            if f.costs.is_some() {
                out.push(format!(
                    "firms[{i}].costs: not used in bertrand mode; costs follow the investment ladder"
                ));
            }
            if f.capacity.is_some() {
                out.push(format!("firms[{i}].capacity: not used in bertrand mode"));
            }
            match &f.agent {
                AgentSpec::NashBestResponse | AgentSpec::MonopolistShare => {
                    out.push(format!("firms[{i}].agent: strategy is only defined in cournot mode"));
                }
                AgentSpec::Constant { values, invest } => {
                    if values.len() != BertrandMarket::PRODUCTS {
                        out.push(format!(
                            "firms[{i}].agent.values: expected 2 prices, got {}",
                            values.len()
                        ));
                    }
                    if values.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                        out.push(format!(
                            "firms[{i}].agent.values: prices must be finite and nonnegative"
                        ));
                    }
                    if invest.contains(&InvestmentKind::None) {
                        out.push(format!("firms[{i}].agent.invest: list only actual investments"));
                    }
                }
                AgentSpec::Random {
                    price_range: Some([lo, hi]),
                    ..
                } => {
                    if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi) {
                        out.push(format!("firms[{i}].agent.price_range: need 0 <= low <= high"));
                    }
                }
                _ => {}
            }
        }
    }

    fn gateway_problems(&self, out: &mut Vec<String>) {
        let first_llm = self.firms.iter().position(|f| f.agent.is_llm());
        let Some(gateway) = &self.gateway else {
            if let Some(i) = first_llm {
                out.push(format!("gateway: required because firms[{i}] uses a language model"));
            }
            return;
        };
        for (i, f) in self.firms.iter().enumerate() {
            if let AgentSpec::Llm {
                gateway: Some(kind), ..
            } = &f.agent
            {
                if *kind != gateway.kind {
                    out.push(format!(
                        "firms[{i}].agent.gateway: a run uses a single gateway; cannot mix {kind:?} with the run's {:?}",
                        gateway.kind
                    ));
                }
            }
            if f.agent.is_llm() {
                out.extend(self.model_config(i).problems(&format!("firms[{i}].agent")));
            }
        }
        if gateway.max_in_flight == 0 {
            out.push("gateway.max_in_flight: must be at least 1".into());
        }
        out.extend(gateway.model.problems("gateway.model"));
        match (gateway.kind, &gateway.replay) {
            (GatewayKind::Mock, None) => out.push("gateway.replay: required for the mock gateway".into()),
            (GatewayKind::Mock, Some(p)) if !p.is_file() => {
                out.push(format!("gateway.replay: file {} does not exist", p.display()))
            }
            (GatewayKind::Live, Some(_)) => out.push("gateway.replay: only used by the mock gateway".into()),
            _ => {}
        }
    }
}
