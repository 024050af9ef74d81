//! The round loop: gather decisions, clear the market, persist, repeat.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use super::log::{
    AgentRound, BaselineProfile, Baselines, LogError, LogEvent, LogWriter, RoundEvent, RoundOutcome, RunLog,
    RunSummary, LOG_FILE,
};
use crate::agent::prompt::{BertrandFirmView, ObservationWindow};
use crate::agent::{
    decide, AgentDecision, AgentError, AgentMemory, BertrandContext, CournotContext, DecisionAction, DecisionOutcome,
    DecisionRequest, GameContext, GameMode,
};
use crate::bertrand::{
    clear_bertrand_round, offer_investments, BertrandDecision, BertrandFirmState, BertrandMarket, BertrandRoundRecord,
};
use crate::equilibrium::{solve_monopoly, solve_nash, EquilibriumResult};
use crate::gateway::{Gateway, GatewayError, GatewayKind, LiveTransport, MockScript, MockTransport, UsageTotals};
use crate::market::{clear_round, Allocation, AllocationProfile, MarketModel, RoundRecord};
use crate::stats::coefficient_of_variation;

pub const INTENT_FILE: &str = "intents.jsonl";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("round {round} aborted, rounds before it are saved and the run can be resumed: {source}")]
    Aborted {
        round: usize,
        #[source]
        source: AgentError,
    },
    #[error("round {round}: {message}")]
    Market { round: usize, message: String },
    #[error("{} already holds a run log; use resume instead", .0.display())]
    Exists(PathBuf),
    #[error("cannot create output directory {}: {source}", .path.display())]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Stop cleanly after this many rounds have been persisted.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub completed: bool,
}

/// Nash and monopoly baselines for a Cournot config.
pub fn compute_baselines(config: &RunConfig) -> Result<Baselines, ConfigError> {
    let model = config.cournot_model()?;
    Ok(baselines_for(&model, config))
}

fn profile_cv(result: &EquilibriumResult) -> Vec<f64> {
    result
        .profile
        .firms()
        .iter()
        .filter_map(|a| coefficient_of_variation(a.quantities()).ok())
        .collect()
}

fn baselines_for(model: &MarketModel, config: &RunConfig) -> Baselines {
    let mut b = Baselines {
        nash: None,
        nash_error: None,
        monopoly: None,
        monopoly_error: None,
    };
    match solve_nash(model, &config.solver) {
        Ok(r) => {
            b.nash = Some(BaselineProfile {
                cv: profile_cv(&r),
                result: r,
            })
        }
        Err(e) => b.nash_error = Some(e.to_string()),
    }
    match solve_monopoly(model) {
        Ok(r) => {
            b.monopoly = Some(BaselineProfile {
                cv: profile_cv(&r),
                result: r,
            })
        }
        Err(e) => b.monopoly_error = Some(e.to_string()),
    }
    b
}

enum Game {
    Cournot {
        model: MarketModel,
        history: Vec<RoundRecord>,
        baselines: Baselines,
    },
    Bertrand {
        market: BertrandMarket,
        states: Vec<BertrandFirmState>,
        history: Vec<Vec<BertrandRoundRecord>>,
    },
}

struct Engine {
    config: RunConfig,
    gateway: Option<Gateway>,
    mock: Option<Arc<MockTransport>>,
    game: Game,
    memories: Vec<AgentMemory>,
    previous: Vec<Option<AgentDecision>>,
}

fn build_gateway(
    config: &RunConfig,
    out_dir: &Path,
) -> Result<(Option<Gateway>, Option<Arc<MockTransport>>), RunError> {
    let Some(gw) = config.gateway.as_ref().filter(|_| config.uses_llm()) else {
        return Ok((None, None));
    };
    match gw.kind {
        GatewayKind::Mock => {
            let path = gw
                .replay
                .as_ref()
                .ok_or_else(|| GatewayError::Config("mock gateway without a replay file".into()))?;
            let (gateway, mock) = Gateway::mock(MockScript::load(path)?);
            Ok((Some(gateway), Some(mock)))
        }
        GatewayKind::Live => {
            let timeout = Duration::from_secs_f64(gw.model.request_timeout_secs);
            let transport = LiveTransport::from_env(timeout)?;
            let gateway = Gateway::new(Box::new(transport)).with_intent_journal(&out_dir.join(INTENT_FILE))?;
            Ok((Some(gateway), None))
        }
    }
}

impl Engine {
    fn new(config: &RunConfig, out_dir: &Path) -> Result<Self, RunError> {
        let (gateway, mock) = build_gateway(config, out_dir)?;
        let game = match config.mode {
            GameMode::Cournot => {
                let model = config.cournot_model()?;
                let baselines = baselines_for(&model, config);
                Game::Cournot {
                    model,
                    history: Vec::new(),
                    baselines,
                }
            }
            GameMode::Bertrand => {
                let market = config.bertrand_market();
                Game::Bertrand {
                    states: market.initial_states(),
                    market,
                    history: Vec::new(),
                }
            }
        };
        let n = config.n_firms();
        Ok(Self {
            config: config.clone(),
            gateway,
            mock,
            game,
            memories: vec![AgentMemory::default(); n],
            previous: vec![None; n],
        })
    }

    /// Replays a persisted round into the in-memory state.
    fn apply(&mut self, event: &RoundEvent, from_log: bool) {
        for a in &event.agents {
            self.memories[a.firm] = a.outcome.decision.memory();
            self.previous[a.firm] = Some(a.outcome.decision.clone());
            if from_log {
                if let Some(mock) = &self.mock {
                    mock.skip(a.firm, a.outcome.exchanges.len());
                }
            }
        }
        match (&mut self.game, &event.outcome) {
            (Game::Cournot { history, .. }, RoundOutcome::Cournot { record }) => history.push(record.clone()),
            (Game::Bertrand { states, history, .. }, RoundOutcome::Bertrand { records, states: next }) => {
                *states = next.clone();
                history.push(records.clone());
            }
            _ => unreachable!("log mode is checked before replay"),
        }
    }

    fn decide_all(&self, round: usize) -> Result<Vec<DecisionOutcome>, RunError> {
        let n = self.config.n_firms();
        let window_len = self.config.window_len();
        let last_profile = match &self.game {
            Game::Cournot { history, .. } => history
                .last()
                .map(|r| AllocationProfile(r.quantities.iter().map(|q| Allocation(q.clone())).collect())),
            Game::Bertrand { .. } => None,
        };
        let requests: Vec<DecisionRequest<'_>> = (0..n)
            .map(|i| {
                let game = match &self.game {
                    Game::Cournot {
                        model,
                        history,
                        baselines,
                    } => GameContext::Cournot(CournotContext {
                        model,
                        window: ObservationWindow::cournot(model, history, i, window_len),
                        last_profile: last_profile.as_ref(),
                        nash: baselines.nash.as_ref().map(|b| &b.result.profile),
                        monopoly: baselines.monopoly.as_ref().map(|b| &b.result.profile),
                    }),
                    Game::Bertrand {
                        market,
                        states,
                        history,
                    } => GameContext::Bertrand(BertrandContext {
                        view: BertrandFirmView {
                            mc: states[i].mc.clone(),
                            ladder: market.ladder.clone(),
                            endowment: market.endowment,
                            offered: offer_investments(&states[i], &market.ladder),
                        },
                        levels: states[i].levels.clone(),
                        window: ObservationWindow::bertrand(history, i, window_len),
                    }),
                };
                DecisionRequest {
                    round,
                    firm: i,
                    seed: self.config.seed,
                    spec: &self.config.firms[i].agent,
                    memory: &self.memories[i],
                    previous: self.previous[i].as_ref(),
                    game,
                }
            })
            .collect();
        let models: Vec<_> = (0..n).map(|i| self.config.model_config(i)).collect();
        let settings = &self.config.agents;
        let gateway = self.gateway.as_ref();
        let cap = self.config.gateway.as_ref().map_or(n, |g| g.max_in_flight).max(1);

        let mut results: Vec<Option<Result<DecisionOutcome, AgentError>>> = (0..n).map(|_| None).collect();
        let order: Vec<usize> = (0..n).collect();
        for chunk in order.chunks(cap) {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&i| {
                        let req = &requests[i];
                        let model = &models[i];
                        s.spawn(move || decide(req, settings, gateway, model))
                    })
                    .collect();
                for (h, &i) in handles.into_iter().zip(chunk) {
                    results[i] = Some(h.join().expect("decision thread panicked"));
                }
            });
        }
        results
            .into_iter()
            .map(|r| {
                r.expect("every firm decided")
                    .map_err(|source| RunError::Aborted { round, source })
            })
            .collect()
    }

    fn play_round(&self, round: usize) -> Result<RoundEvent, RunError> {
        let outcomes = self.decide_all(round)?;
        let market_err = |message: String| RunError::Market { round, message };
        let outcome = match &self.game {
            Game::Cournot { model, history, .. } => {
                let profile = AllocationProfile(
                    outcomes
                        .iter()
                        .map(|o| match &o.decision.action {
                            DecisionAction::Quantities { quantities } => Ok(Allocation(quantities.clone())),
                            other => Err(market_err(format!("expected quantities, got {other:?}"))),
                        })
                        .collect::<Result<_, _>>()?,
                );
                let prev = history.last().map(|r| r.cumulative_profits.as_slice());
                let record = clear_round(model, &profile, round, prev).map_err(|e| market_err(e.to_string()))?;
                RoundOutcome::Cournot { record }
            }
            Game::Bertrand { market, states, .. } => {
                let decisions: Vec<BertrandDecision> = outcomes
                    .iter()
                    .map(|o| match &o.decision.action {
                        DecisionAction::Prices { prices, investment } => Ok(BertrandDecision {
                            prices: prices.clone(),
                            investment: *investment,
                        }),
                        other => Err(market_err(format!("expected prices, got {other:?}"))),
                    })
                    .collect::<Result<_, _>>()?;
                let (next, records) =
                    clear_bertrand_round(market, states, &decisions, round).map_err(|e| market_err(e.to_string()))?;
                RoundOutcome::Bertrand { records, states: next }
            }
        };
        Ok(RoundEvent {
            round,
            agents: outcomes
                .into_iter()
                .enumerate()
                .map(|(firm, outcome)| AgentRound { firm, outcome })
                .collect(),
            outcome,
        })
    }

    fn summary(&self, log: &RunLog) -> RunSummary {
        let n = self.config.n_firms();
        let cumulative_profits = match &self.game {
            Game::Cournot { history, .. } => history.last().map_or(vec![0.0; n], |r| r.cumulative_profits.clone()),
            Game::Bertrand { states, .. } => states.iter().map(|s| s.cumulative_profit).collect(),
        };
        let baselines = match &self.game {
            Game::Cournot { baselines, .. } => Some(baselines.clone()),
            Game::Bertrand { .. } => None,
        };
        RunSummary {
            rounds_completed: log.rounds.len(),
            cumulative_profits,
            usage: UsageTotals::from_exchanges(n, log.rounds.iter().flat_map(|r| r.exchanges())),
            retry_events: log
                .rounds
                .iter()
                .flat_map(|r| &r.agents)
                .map(|a| a.outcome.retries.len())
                .sum(),
            fallbacks: log
                .rounds
                .iter()
                .flat_map(|r| &r.agents)
                .filter(|a| a.outcome.fallback.is_some())
                .count(),
            baselines,
        }
    }

    fn drive(mut self, mut log: RunLog, mut writer: LogWriter, opts: &RunOptions) -> Result<RunOutcome, RunError> {
        let start = log.rounds.len() + 1;
        for round in start..=self.config.rounds {
            if opts.stop_after.is_some_and(|k| round > k) {
                return Ok(RunOutcome { log, completed: false });
            }
            let event = self.play_round(round)?;
            writer.append(&LogEvent::Round(event.clone()))?;
            self.apply(&event, false);
            tracing::info!(round, "round cleared");
            log.rounds.push(event);
        }
        let summary = self.summary(&log);
        writer.append(&LogEvent::Summary(summary.clone()))?;
        log.summary = Some(summary);
        Ok(RunOutcome { log, completed: true })
    }
}

/// Runs a validated config from round 1, writing `out_dir/run.jsonl`.
pub fn run_experiment(config: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| RunError::OutputDir {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let path = out_dir.join(LOG_FILE);
    if path.exists() {
        return Err(RunError::Exists(path));
    }
    let engine = Engine::new(config, out_dir)?;
    let mut writer = LogWriter::create(&path)?;
    writer.append(&LogEvent::Config { config: config.clone() })?;
    engine.drive(RunLog::new(config.clone()), writer, opts)
}

/// Continues a run from its last persisted round.
pub fn resume_experiment(out_dir: &Path, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let path = out_dir.join(LOG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let log = RunLog::parse(&text)?;
    if log.is_complete() {
        return Ok(RunOutcome { log, completed: true });
    }
    log.config.validate()?;
    let mut engine = Engine::new(&log.config, out_dir)?;
    for event in &log.rounds {
        let matches = matches!(
            (&engine.game, &event.outcome),
            (Game::Cournot { .. }, RoundOutcome::Cournot { .. })
                | (Game::Bertrand { .. }, RoundOutcome::Bertrand { .. })
        );
        if !matches || event.agents.len() != log.config.n_firms() {
            return Err(LogError::Integrity {
                round: event.round,
                message: "round does not match the configured game".into(),
            }
            .into());
        }
        engine.apply(event, true);
    }
    let keep = text.rfind('\n').map_or(0, |i| i + 1) as u64;
    let writer = LogWriter::reopen(&path, keep)?;
    tracing::info!(from = log.rounds.len() + 1, "resuming run");
    engine.drive(log, writer, opts)
}
