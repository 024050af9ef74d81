//! Pricing and production agents: prompt-driven and scripted.

pub mod parse;
pub mod prompt;
pub mod template;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bertrand::{resolve_choice, InvestmentKind, InvestmentOption};
use crate::equilibrium::{best_response, random_allocation};
use crate::gateway::{CompletionExchange, Gateway, GatewayError, GatewayKind, ModelConfig};
use crate::market::{validate_allocation, Allocation, AllocationProfile, MarketModel};
use prompt::{
    bertrand_prompt, cournot_prompt, BertrandFirmView, BertrandObservation, CournotFirmView, CournotObservation,
    ObservationWindow, PromptStyle,
};
use template::TemplateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameMode {
    Cournot,
    Bertrand,
}

/// The two notes files an agent rewrites every round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMemory {
    pub plans: String,
    pub insights: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionAction {
    Quantities {
        quantities: Vec<f64>,
    },
    Prices {
        prices: Vec<f64>,
        investment: InvestmentKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDecision {
    pub observations_and_thoughts: String,
    pub new_plans: String,
    pub new_insights: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub investment_letter: Option<char>,
    pub action: DecisionAction,
}

impl AgentDecision {
    fn scripted(action: DecisionAction) -> Self {
        Self {
            observations_and_thoughts: String::new(),
            new_plans: String::new(),
            new_insights: String::new(),
            investment_letter: None,
            action,
        }
    }

    pub fn memory(&self) -> AgentMemory {
        AgentMemory {
            plans: self.new_plans.clone(),
            insights: self.new_insights.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Llm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
        /// Must match the run's gateway when given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gateway: Option<GatewayKind>,
    },
    NashBestResponse,
    MonopolistShare,
    Constant {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        invest: Vec<InvestmentKind>,
    },
    Random {
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        price_range: Option<[f64; 2]>,
    },
}

impl AgentSpec {
    pub fn is_llm(&self) -> bool {
        matches!(self, AgentSpec::Llm { .. })
    }

    pub fn model_config(&self, base: &ModelConfig) -> ModelConfig {
        let mut m = base.clone();
        if let AgentSpec::Llm {
            model_id, temperature, ..
        } = self
        {
            if let Some(id) = model_id {
                m.model_id = id.clone();
            }
            if let Some(t) = temperature {
                m.temperature = *t;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentSettings {
    /// Re-prompts allowed after an unusable response.
    pub retry_limit: usize,
    pub strict_json: bool,
    #[serde(flatten)]
    pub style: PromptStyle,
}

impl Default for AgentSettings {
    fn default() -> Self {
        Self {
            retry_limit: 3,
            strict_json: false,
            style: PromptStyle::default(),
        }
    }
}

/// Everything a Cournot firm may condition on when deciding round `round`.
#[derive(Debug, Clone)]
pub struct CournotContext<'a> {
    pub model: &'a MarketModel,
    pub window: ObservationWindow<CournotObservation>,
    /// Everyone's allocations last round; scripted strategies only.
    pub last_profile: Option<&'a AllocationProfile>,
    pub nash: Option<&'a AllocationProfile>,
    pub monopoly: Option<&'a AllocationProfile>,
}

#[derive(Debug, Clone)]
pub struct BertrandContext {
    pub view: BertrandFirmView,
    pub levels: Vec<u8>,
    pub window: ObservationWindow<BertrandObservation>,
}

#[derive(Debug, Clone)]
pub enum GameContext<'a> {
    Cournot(CournotContext<'a>),
    Bertrand(BertrandContext),
}

impl GameContext<'_> {
    pub fn mode(&self) -> GameMode {
        match self {
            GameContext::Cournot(_) => GameMode::Cournot,
            GameContext::Bertrand(_) => GameMode::Bertrand,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecisionRequest<'a> {
    pub round: usize,
    pub firm: usize,
    pub seed: u64,
    pub spec: &'a AgentSpec,
    pub memory: &'a AgentMemory,
    pub previous: Option<&'a AgentDecision>,
    pub game: GameContext<'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryEvent {
    pub attempt: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub decision: AgentDecision,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchanges: Vec<CompletionExchange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retries: Vec<RetryEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("firm {firm}: {reason}")]
    Strategy { firm: usize, reason: String },
    #[error("firm {0} uses a language model but no gateway is configured")]
    NoGateway(usize),
}

fn strategy_err(firm: usize, reason: impl Into<String>) -> AgentError {
    AgentError::Strategy {
        firm: firm + 1,
        reason: reason.into(),
    }
}

/// Suffix appended to the original prompt when asking again.
pub fn reprompt_suffix(reason: &str) -> String {
    format!(
        "\n\nYour previous response could not be used: {reason}. Respond again using exactly the JSON format above."
    )
}

fn round_seed(seed: u64, round: usize, firm: usize) -> u64 {
    seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (firm as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Produces one firm's decision for one round.
pub fn decide(
    req: &DecisionRequest<'_>,
    settings: &AgentSettings,
    gateway: Option<&Gateway>,
    model: &ModelConfig,
) -> Result<DecisionOutcome, AgentError> {
    if req.spec.is_llm() {
        let gateway = gateway.ok_or(AgentError::NoGateway(req.firm + 1))?;
        return decide_llm(req, settings, gateway, model);
    }
    let action = match &req.game {
        GameContext::Cournot(ctx) => scripted_cournot(req, ctx)?,
        GameContext::Bertrand(ctx) => scripted_bertrand(req, ctx)?,
    };
    Ok(DecisionOutcome {
        decision: AgentDecision::scripted(action),
        exchanges: Vec::new(),
        retries: Vec::new(),
        fallback: None,
    })
}

fn scripted_cournot(req: &DecisionRequest<'_>, ctx: &CournotContext<'_>) -> Result<DecisionAction, AgentError> {
    let model = ctx.model;
    let firm = req.firm;
    let m = model.n_commodities();
    let quantities = match req.spec {
        AgentSpec::Constant { values, .. } => values.clone(),
        AgentSpec::NashBestResponse => match (ctx.last_profile, ctx.nash) {
            (Some(last), _) => {
                best_response(model, firm, last)
                    .map_err(|e| strategy_err(firm, e.to_string()))?
                    .0
            }
            (None, Some(nash)) => nash.firms()[firm].0.clone(),
            (None, None) => {
                let even = AllocationProfile(
                    (0..model.n_firms())
                        .map(|i| Allocation::even_split(model.capacity(i), m))
                        .collect(),
                );
                best_response(model, firm, &even)
                    .map_err(|e| strategy_err(firm, e.to_string()))?
                    .0
            }
        },
        AgentSpec::MonopolistShare => match ctx.monopoly {
            Some(p) => p.firms()[firm].0.clone(),
            None => crate::equilibrium::solve_monopoly(model)
                .map_err(|e| strategy_err(firm, e.to_string()))?
                .profile
                .firms()[firm]
                .0
                .clone(),
        },
        AgentSpec::Random { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(round_seed(*seed ^ req.seed, req.round, firm));
            random_allocation(model.capacity(firm), m, &mut rng).0
        }
        AgentSpec::Llm { .. } => unreachable!("handled by decide_llm"),
    };
    let feas = validate_allocation(model, firm, &Allocation(quantities.clone()));
    if !feas.is_feasible() {
        return Err(strategy_err(firm, feas.describe()));
    }
    Ok(DecisionAction::Quantities { quantities })
}

fn scripted_bertrand(req: &DecisionRequest<'_>, ctx: &BertrandContext) -> Result<DecisionAction, AgentError> {
    let firm = req.firm;
    match req.spec {
        AgentSpec::Constant { values, invest } => {
            let investment = next_planned_investment(invest, &ctx.levels, &ctx.view.offered);
            Ok(DecisionAction::Prices {
                prices: values.clone(),
                investment,
            })
        }
        AgentSpec::Random { seed, price_range } => {
            let [lo, hi] = price_range.unwrap_or([0.0, 150.0]);
            let mut rng = ChaCha8Rng::seed_from_u64(round_seed(*seed ^ req.seed, req.round, firm));
            let prices = (0..2).map(|_| rng.random_range(lo..=hi)).collect();
            Ok(DecisionAction::Prices {
                prices,
                investment: InvestmentKind::None,
            })
        }
        other => Err(strategy_err(
            firm,
            format!("strategy {other:?} is not available in the Bertrand game"),
        )),
    }
}

/// First planned investment not yet owned; waits until it is affordable.
fn next_planned_investment(plan: &[InvestmentKind], levels: &[u8], offered: &[InvestmentOption]) -> InvestmentKind {
    let pending = plan
        .iter()
        .find(|k| **k != InvestmentKind::None && k.is_available(levels));
    match pending {
        Some(k) if offered.iter().any(|o| o.kind == *k) => *k,
        _ => InvestmentKind::None,
    }
}

fn build_prompt(req: &DecisionRequest<'_>, style: PromptStyle) -> Result<String, TemplateError> {
    match &req.game {
        GameContext::Cournot(ctx) => cournot_prompt(
            &CournotFirmView {
                costs: ctx.model.costs(req.firm).to_vec(),
                capacity: ctx.model.capacity(req.firm),
            },
            req.memory,
            &ctx.window,
            style,
        ),
        GameContext::Bertrand(ctx) => bertrand_prompt(&ctx.view, req.memory, &ctx.window, style),
    }
}

/// Checks a parsed response against the firm's constraints.
fn validate_response(req: &DecisionRequest<'_>, parsed: parse::ParsedResponse) -> Result<AgentDecision, String> {
    let action = match &req.game {
        GameContext::Cournot(ctx) => {
            let feas = validate_allocation(ctx.model, req.firm, &Allocation(parsed.values.clone()));
            if !feas.is_feasible() {
                return Err(feas.describe());
            }
            DecisionAction::Quantities {
                quantities: parsed.values,
            }
        }
        GameContext::Bertrand(ctx) => {
            let letter = parsed.investment_letter.expect("bertrand responses carry a letter");
            let investment = resolve_choice(&letter.to_string(), &ctx.view.offered).map_err(|_| {
                let letters: Vec<String> = ctx.view.offered.iter().map(|o| o.letter.to_string()).collect();
                format!(
                    "investment option {letter} is not offered; choose one of {}",
                    letters.join(", ")
                )
            })?;
            DecisionAction::Prices {
                prices: parsed.values,
                investment,
            }
        }
    };
    Ok(AgentDecision {
        observations_and_thoughts: parsed.observations_and_thoughts,
        new_plans: parsed.new_plans,
        new_insights: parsed.new_insights,
        investment_letter: parsed.investment_letter,
        action,
    })
}

/// Decision used when every attempt failed: repeat last round, or a safe default in round 1.
pub fn fallback_decision(req: &DecisionRequest<'_>) -> AgentDecision {
    let action = match (req.previous, &req.game) {
        (Some(prev), GameContext::Cournot(_)) => prev.action.clone(),
        (Some(prev), GameContext::Bertrand(_)) => match &prev.action {
            DecisionAction::Prices { prices, .. } => DecisionAction::Prices {
                prices: prices.clone(),
                investment: InvestmentKind::None,
            },
            other => other.clone(),
        },
        (None, GameContext::Cournot(ctx)) => DecisionAction::Quantities {
            quantities: Allocation::even_split(ctx.model.capacity(req.firm), ctx.model.n_commodities()).0,
        },
        (None, GameContext::Bertrand(ctx)) => DecisionAction::Prices {
            prices: ctx.view.mc.clone(),
            investment: InvestmentKind::None,
        },
    };
    AgentDecision {
        observations_and_thoughts: String::new(),
        new_plans: req.memory.plans.clone(),
        new_insights: req.memory.insights.clone(),
        investment_letter: None,
        action,
    }
}

fn decide_llm(
    req: &DecisionRequest<'_>,
    settings: &AgentSettings,
    gateway: &Gateway,
    model: &ModelConfig,
) -> Result<DecisionOutcome, AgentError> {
    let base = build_prompt(req, settings.style)?;
    let mut exchanges = Vec::new();
    let mut retries = Vec::new();
    let mut reason = String::new();
    for attempt in 0..=settings.retry_limit {
        let prompt = if attempt == 0 {
            base.clone()
        } else {
            format!("{base}{}", reprompt_suffix(&reason))
        };
        let completion = gateway.complete(req.firm, &prompt, model)?;
        exchanges.extend(completion.exchanges);
        let outcome = parse::parse_response(req.game.mode(), &completion.text, settings.strict_json)
            .map_err(|e| e.0)
            .and_then(|p| validate_response(req, p));
        match outcome {
            Ok(decision) => {
                return Ok(DecisionOutcome {
                    decision,
                    exchanges,
                    retries,
                    fallback: None,
                })
            }
            Err(why) => {
                tracing::debug!(firm = req.firm + 1, round = req.round, "unusable response: {why}");
                reason = why;
                if attempt < settings.retry_limit {
                    retries.push(RetryEvent {
                        attempt: attempt + 1,
                        reason: reason.clone(),
                    });
                }
            }
        }
    }
    Ok(DecisionOutcome {
        decision: fallback_decision(req),
        exchanges,
        retries,
        fallback: Some(reason),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bertrand::{offer_investments, BertrandFirmState, InvestmentLadder};
    use crate::gateway::{MockReply, MockScript};

    fn model() -> MarketModel {
        MarketModel::uniform(100.0, 2.0, vec![vec![40.0, 60.0], vec![60.0, 40.0]], vec![100.0, 100.0]).unwrap()
    }

    fn valid(qa: &str, qb: &str) -> String {
        format!(
            r#"{{"observations_and_thoughts":"t","new_content":{{"PLANS.txt":"plan {qa}","INSIGHTS.txt":"ins"}},"chosen_quantities":{{"Product_A":"{qa}","Product_B":"{qb}"}}}}"#
        )
    }

    fn cournot_req<'a>(
        model: &'a MarketModel,
        spec: &'a AgentSpec,
        memory: &'a AgentMemory,
        previous: Option<&'a AgentDecision>,
    ) -> DecisionRequest<'a> {
        DecisionRequest {
            round: 1,
            firm: 0,
            seed: 7,
            spec,
            memory,
            previous,
            game: GameContext::Cournot(CournotContext {
                model,
                window: ObservationWindow::new(30),
                last_profile: None,
                nash: None,
                monopoly: None,
            }),
        }
    }

    fn run(replies: Vec<MockReply>, previous: Option<&AgentDecision>) -> DecisionOutcome {
        let m = model();
        let spec = AgentSpec::Llm {
            model_id: None,
            temperature: None,
            gateway: None,
        };
        let mem = AgentMemory {
            plans: "old plan".into(),
            insights: "old ins".into(),
        };
        let (g, _) = Gateway::mock(MockScript { agents: vec![replies] });
        decide(
            &cournot_req(&m, &spec, &mem, previous),
            &AgentSettings::default(),
            Some(&g),
            &ModelConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn two_malformed_then_valid() {
        let out = run(
            vec![
                MockReply::Text("garbage".into()),
                MockReply::Text(valid("-5", "10")),
                MockReply::Text(valid("30", "20")),
            ],
            None,
        );
        assert_eq!(out.retries.len(), 2);
        assert!(out.retries[1].reason.contains("negative quantity"));
        assert_eq!(out.fallback, None);
        assert_eq!(
            out.decision.action,
            DecisionAction::Quantities {
                quantities: vec![30.0, 20.0]
            }
        );
        assert_eq!(out.decision.memory().plans, "plan 30");
        assert!(out.exchanges[1].prompt.contains("could not be used: no JSON object"));
    }

    #[test]
    fn capacity_violation_is_reprompted_with_reason() {
        let out = run(
            vec![MockReply::Text(valid("80", "30")), MockReply::Text(valid("50", "50"))],
            None,
        );
        assert_eq!(out.retries.len(), 1);
        assert!(out.retries[0]
            .reason
            .contains("exceeds the capacity of 100 units by 10"));
        assert!(out.exchanges[1].prompt.contains("exceeds the capacity"));
    }

    #[test]
    fn exhausted_retries_fall_back() {
        let bad = || MockReply::Text("nope".into());
        let out = run(vec![bad(), bad(), bad(), bad()], None);
        assert_eq!(out.retries.len(), 3);
        assert_eq!(out.exchanges.len(), 4);
        assert!(out.fallback.is_some());
        assert_eq!(
            out.decision.action,
            DecisionAction::Quantities {
                quantities: vec![50.0, 50.0]
            }
        );
        assert_eq!(out.decision.new_plans, "old plan");

        let prev = AgentDecision::scripted(DecisionAction::Quantities {
            quantities: vec![10.0, 20.0],
        });
        let out = run(vec![bad(), bad(), bad(), bad()], Some(&prev));
        assert_eq!(out.decision.action, prev.action);
    }

    #[test]
    fn missing_gateway_is_an_error() {
        let m = model();
        let spec = AgentSpec::Llm {
            model_id: None,
            temperature: None,
            gateway: None,
        };
        let mem = AgentMemory::default();
        let err = decide(
            &cournot_req(&m, &spec, &mem, None),
            &AgentSettings::default(),
            None,
            &ModelConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::NoGateway(1)));
    }

    #[test]
    fn scripted_strategies() {
        let m = model();
        let mem = AgentMemory::default();
        let go = |spec: &AgentSpec| {
            let out = decide(
                &cournot_req(&m, spec, &mem, None),
                &AgentSettings::default(),
                None,
                &ModelConfig::default(),
            )
            .unwrap();
            match out.decision.action {
                DecisionAction::Quantities { quantities } => quantities,
                _ => panic!(),
            }
        };
        assert_eq!(
            go(&AgentSpec::Constant {
                values: vec![50.0, 50.0],
                invest: vec![]
            }),
            vec![50.0, 50.0]
        );
        let mono = go(&AgentSpec::MonopolistShare);
        assert!((mono[0] - 60.0).abs() < 1e-6 && mono[1].abs() < 1e-6);
        let br = go(&AgentSpec::NashBestResponse);
        assert!(br.iter().sum::<f64>() <= 100.0 + 1e-9);
        let r1 = go(&AgentSpec::Random {
            seed: 3,
            price_range: None,
        });
        let r2 = go(&AgentSpec::Random {
            seed: 3,
            price_range: None,
        });
        assert_eq!(r1, r2);
        assert!(r1.iter().sum::<f64>() <= 100.0 + 1e-9);
        let err = decide(
            &cournot_req(
                &m,
                &AgentSpec::Constant {
                    values: vec![90.0, 20.0],
                    invest: vec![],
                },
                &mem,
                None,
            ),
            &AgentSettings::default(),
            None,
            &ModelConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("exceeds the capacity"));
    }

    #[test]
    fn nash_best_response_uses_last_profile() {
        let m = model();
        let mem = AgentMemory::default();
        let spec = AgentSpec::NashBestResponse;
        let last = AllocationProfile(vec![Allocation(vec![0.0, 0.0]), Allocation(vec![20.0, 40.0])]);
        let mut req = cournot_req(&m, &spec, &mem, None);
        if let GameContext::Cournot(ctx) = &mut req.game {
            ctx.last_profile = Some(&last);
        }
        let out = decide(&req, &AgentSettings::default(), None, &ModelConfig::default()).unwrap();
        let expected = best_response(&m, 0, &last).unwrap();
        assert_eq!(
            out.decision.action,
            DecisionAction::Quantities { quantities: expected.0 }
        );
    }

    fn bertrand_ctx(cash: f64) -> BertrandContext {
        let ladder = InvestmentLadder::default();
        let mut state = BertrandFirmState::new(8500.0, &ladder);
        state.cash = cash;
        BertrandContext {
            view: BertrandFirmView {
                mc: state.mc.clone(),
                ladder: ladder.clone(),
                endowment: 8500.0,
                offered: offer_investments(&state, &ladder),
            },
            levels: state.levels.clone(),
            window: ObservationWindow::new(10),
        }
    }

    #[test]
    fn planned_investment_waits_for_cash() {
        let spec = AgentSpec::Constant {
            values: vec![120.0, 120.0],
            invest: vec![InvestmentKind::PhaseOneA],
        };
        let mem = AgentMemory::default();
        for (cash, want) in [(8500.0, InvestmentKind::None), (12000.0, InvestmentKind::PhaseOneA)] {
            let req = DecisionRequest {
                round: 3,
                firm: 0,
                seed: 0,
                spec: &spec,
                memory: &mem,
                previous: None,
                game: GameContext::Bertrand(bertrand_ctx(cash)),
            };
            let out = decide(&req, &AgentSettings::default(), None, &ModelConfig::default()).unwrap();
            assert_eq!(
                out.decision.action,
                DecisionAction::Prices {
                    prices: vec![120.0, 120.0],
                    investment: want
                }
            );
        }
    }

    #[test]
    fn bertrand_letter_must_be_offered() {
        let spec = AgentSpec::Llm {
            model_id: None,
            temperature: None,
            gateway: None,
        };
        let mem = AgentMemory::default();
        let resp = |letter: &str| {
            MockReply::Text(format!(
                r#"{{"observations_and_thoughts":"t","new_content":{{"PLANS.txt":"p","INSIGHTS.txt":"i"}},"chosen_prices":{{"Product_A":"110","Product_B":"105"}},"investment_option":"{letter}"}}"#
            ))
        };
        let (g, _) = Gateway::mock(MockScript {
            agents: vec![vec![resp("E"), resp("B")]],
        });
        let req = DecisionRequest {
            round: 2,
            firm: 0,
            seed: 0,
            spec: &spec,
            memory: &mem,
            previous: None,
            game: GameContext::Bertrand(bertrand_ctx(10500.0)),
        };
        let out = decide(&req, &AgentSettings::default(), Some(&g), &ModelConfig::default()).unwrap();
        assert_eq!(out.retries.len(), 1);
        assert!(
            out.retries[0].reason.contains("choose one of A, B, C"),
            "{}",
            out.retries[0].reason
        );
        assert!(out.retries[0].reason.contains("option E is not offered"));
        assert_eq!(out.decision.investment_letter, Some('B'));
        assert_eq!(
            out.decision.action,
            DecisionAction::Prices {
                prices: vec![110.0, 105.0],
                investment: InvestmentKind::PhaseOneA
            }
        );
    }

    #[test]
    fn model_overrides() {
        let spec = AgentSpec::Llm {
            model_id: Some("other".into()),
            temperature: Some(0.2),
            gateway: None,
        };
        let m = spec.model_config(&ModelConfig::default());
        assert_eq!(m.model_id, "other");
        assert_eq!(m.temperature, 0.2);
        assert_eq!(m.max_output_tokens, 4096);
    }
}
