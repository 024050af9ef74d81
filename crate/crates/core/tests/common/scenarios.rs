//! Scripted prompt scenarios rendered for the golden-file comparisons.

use oligolab_core::agent::prompt::{
    bertrand_prompt, cournot_prompt, BertrandFirmView, CournotFirmView, ObservationWindow, PromptStyle,
    BERTRAND_WINDOW, COURNOT_WINDOW,
};
use oligolab_core::agent::AgentMemory;
use oligolab_core::bertrand::{
    clear_bertrand_round, offer_investments, BertrandDecision, BertrandFirmState, BertrandMarket, BertrandRoundRecord,
    InvestmentKind,
};
use oligolab_core::market::{clear_round, Allocation, AllocationProfile, MarketModel, RoundRecord};

/// Fixture file name and renderer for every scenario.
pub const ALL: [(&str, fn() -> String); 6] = [
    ("cournot_cold_start.txt", cournot_cold_start),
    ("cournot_mid_run.txt", cournot_mid_run),
    ("cournot_full_window.txt", cournot_full_window),
    ("bertrand_cold_start.txt", bertrand_cold_start),
    ("bertrand_mid_run.txt", bertrand_mid_run),
    ("bertrand_investment_eligible.txt", bertrand_investment_eligible),
];

fn asymmetric() -> MarketModel {
    MarketModel::uniform(100.0, 2.0, vec![vec![40.0, 50.0], vec![50.0, 40.0]], vec![100.0, 100.0]).unwrap()
}

fn cournot_history(model: &MarketModel, rounds: usize) -> Vec<RoundRecord> {
    let mut out: Vec<RoundRecord> = Vec::new();
    for t in 1..=rounds {
        let shift = (t as f64 * 3.5).min(40.0);
        let profile = AllocationProfile(vec![
            Allocation(vec![50.0 + shift, 50.0 - shift]),
            Allocation(vec![45.0 - shift / 2.0, 40.0 + shift / 3.0]),
        ]);
        let prev = out.last().map(|r| r.cumulative_profits.clone());
        out.push(clear_round(model, &profile, t, prev.as_deref()).unwrap());
    }
    out
}

fn cournot_view(model: &MarketModel, firm: usize) -> CournotFirmView {
    CournotFirmView {
        costs: model.costs(firm).to_vec(),
        capacity: model.capacity(firm),
    }
}

pub fn cournot_cold_start() -> String {
    let model = asymmetric();
    let window = ObservationWindow::cournot(&model, &[], 0, COURNOT_WINDOW);
    let p = cournot_prompt(
        &cournot_view(&model, 0),
        &AgentMemory::default(),
        &window,
        PromptStyle::default(),
    )
    .unwrap();
    p
}

pub fn cournot_mid_run() -> String {
    let model = asymmetric();
    let history = cournot_history(&model, 3);
    let window = ObservationWindow::cournot(&model, &history, 1, COURNOT_WINDOW);
    let memory = AgentMemory {
        plans: "Rounds 4-6: hold Product B near 41 units and trim Product A by 2 units per round.".into(),
        insights: "Product B earns more per unit for me. The rival seems to be moving into Product A.".into(),
    };
    let p = cournot_prompt(&cournot_view(&model, 1), &memory, &window, PromptStyle::default()).unwrap();
    p
}

pub fn cournot_full_window() -> String {
    let model = asymmetric();
    let history = cournot_history(&model, 34);
    let window = ObservationWindow::cournot(&model, &history, 0, COURNOT_WINDOW);
    assert_eq!(window.entries.first().unwrap().round, 5);
    let memory = AgentMemory {
        plans: "Keep Product A at 90 and Product B at 10.".into(),
        insights: "Prices settle when I keep my total near capacity.".into(),
    };
    let p = cournot_prompt(&cournot_view(&model, 0), &memory, &window, PromptStyle::default()).unwrap();
    p
}

fn bertrand_history(
    market: &BertrandMarket,
    start: Vec<BertrandFirmState>,
    plays: &[[BertrandDecision; 2]],
) -> (Vec<BertrandFirmState>, Vec<Vec<BertrandRoundRecord>>) {
    let mut states = start;
    let mut history = Vec::new();
    for (k, d) in plays.iter().enumerate() {
        let (next, records) = clear_bertrand_round(market, &states, d, k + 1).unwrap();
        states = next;
        history.push(records);
    }
    (states, history)
}

fn price(a: f64, b: f64, investment: InvestmentKind) -> BertrandDecision {
    BertrandDecision {
        prices: vec![a, b],
        investment,
    }
}

fn bertrand_view(market: &BertrandMarket, state: &BertrandFirmState) -> BertrandFirmView {
    BertrandFirmView {
        mc: state.mc.clone(),
        ladder: market.ladder.clone(),
        endowment: market.endowment,
        offered: offer_investments(state, &market.ladder),
    }
}

pub fn bertrand_cold_start() -> String {
    let market = BertrandMarket::default();
    let states = market.initial_states();
    let window = ObservationWindow::bertrand(&[], 0, BERTRAND_WINDOW);
    let p = bertrand_prompt(
        &bertrand_view(&market, &states[0]),
        &AgentMemory::default(),
        &window,
        PromptStyle::default(),
    )
    .unwrap();
    p
}

pub fn bertrand_mid_run() -> String {
    let market = BertrandMarket::default();
    let none = InvestmentKind::None;
    let (states, history) = bertrand_history(
        &market,
        market.initial_states(),
        &[
            [price(110.0, 105.0, none), price(108.0, 112.0, none)],
            [price(104.0, 103.5, none), price(106.0, 109.0, none)],
            [price(102.0, 101.25, none), price(103.0, 107.0, none)],
        ],
    );
    let window = ObservationWindow::bertrand(&history, 1, BERTRAND_WINDOW);
    let memory = AgentMemory {
        plans: "Undercut on Product A by 1 while holding Product B.".into(),
        insights: "Sales fall quickly once my price is above the rival's.".into(),
    };
    let p = bertrand_prompt(
        &bertrand_view(&market, &states[1]),
        &memory,
        &window,
        PromptStyle::default(),
    )
    .unwrap();
    p
}

pub fn bertrand_investment_eligible() -> String {
    let market = BertrandMarket::default();
    let mut start = market.initial_states();
    start[0].cash = 31_250.0;
    let none = InvestmentKind::None;
    let (states, history) = bertrand_history(
        &market,
        start,
        &[
            [price(95.0, 104.0, InvestmentKind::PhaseOneA), price(101.0, 103.0, none)],
            [price(88.5, 103.0, none), price(100.5, 102.0, none)],
            [price(86.0, 102.5, none), price(100.0, 101.5, none)],
            [price(84.0, 102.0, none), price(99.0, 101.0, none)],
        ],
    );
    let state = &states[0];
    assert!(state.cash >= 10_000.0);
    assert_eq!(state.levels, vec![1, 0]);
    let window = ObservationWindow::bertrand(&history, 0, BERTRAND_WINDOW);
    let memory = AgentMemory {
        plans: "Buy the Phase II upgrade for Product A when cash allows, then cut its price to 70.".into(),
        insights: "The Phase I upgrade on Product A paid for higher volume at lower prices.".into(),
    };
    let p = bertrand_prompt(&bertrand_view(&market, state), &memory, &window, PromptStyle::default()).unwrap();
    assert!(p.contains("Invest in Phase II Product A"));
    p
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/golden")
        .join(name)
}
