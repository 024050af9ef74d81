mod common;

use common::oracle::{grid_best_response, grid_monopoly, Duopoly};
use oligolab_core::equilibrium::{
    best_response, best_response_qp, random_feasible_profile, solve_monopoly, solve_nash, solve_nash_random_starts,
    SolverConfig,
};
use oligolab_core::market::{firm_profit, validate_allocation, AllocationProfile, MarketModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model_of(d: &Duopoly) -> MarketModel {
    MarketModel::uniform(
        d.alpha,
        d.beta,
        d.costs.iter().map(|r| r.to_vec()).collect(),
        d.capacity.to_vec(),
    )
    .unwrap()
}

#[test]
fn nash_matches_closed_form_and_grid() {
    for d in [
        Duopoly::asymmetric(),
        Duopoly::symmetric(40.0),
        Duopoly::symmetric(50.0),
    ] {
        let model = model_of(&d);
        let nash = solve_nash(&model, &SolverConfig::default()).unwrap();
        let closed = d.closed_form_nash();
        for i in 0..2 {
            for j in 0..2 {
                assert!((nash.profile.firms()[i].0[j] - closed[i][j]).abs() < 1e-6);
            }
        }
        for i in 0..2 {
            let rival = nash.profile.firms()[1 - i].0.clone();
            let (grid, _) = grid_best_response(&d, i, [rival[0], rival[1]]);
            for j in 0..2 {
                assert!((grid[j] - nash.profile.firms()[i].0[j]).abs() <= 0.01 + 1e-9, "{d:?}");
            }
        }
    }
}

#[test]
fn monopoly_matches_grid_oracle() {
    for d in [
        Duopoly::asymmetric(),
        Duopoly::symmetric(50.0),
        Duopoly::symmetric(40.0),
    ] {
        let model = model_of(&d);
        let mono = solve_monopoly(&model).unwrap();
        let (q, best) = grid_monopoly(&d);
        assert!(
            (mono.joint_profit() - best).abs() < 1e-6,
            "{d:?}: {} vs {best}",
            mono.joint_profit()
        );
        let totals = mono.profile.totals(2, None);
        assert!((totals[0] - (q[0] + q[2])).abs() < 1e-6);
        assert!((totals[1] - (q[1] + q[3])).abs() < 1e-6);
    }
}

#[test]
fn random_starts_reach_the_same_profile() {
    let model = model_of(&Duopoly::asymmetric());
    let reference = solve_nash(&model, &SolverConfig::default()).unwrap();
    let results = solve_nash_random_starts(&model, &SolverConfig::default(), 20, 99).unwrap();
    assert_eq!(results.len(), 20);
    for r in results {
        assert!(
            r.profile.max_abs_diff(&reference.profile) < 1e-5,
            "seed {:?}",
            r.start_seed
        );
    }
}

#[test]
fn best_response_beats_random_alternatives() {
    let model = model_of(&Duopoly::asymmetric());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let profile = random_feasible_profile(&model, &mut rng);
        for firm in 0..2 {
            let br = best_response(&model, firm, &profile).unwrap();
            let mut with_br = profile.clone();
            with_br.0[firm] = br;
            let best = firm_profit(&model, &with_br, firm);
            for _ in 0..1000 {
                let alt = random_feasible_profile(&model, &mut rng).0[firm].clone();
                let mut with_alt = profile.clone();
                with_alt.0[firm] = alt;
                assert!(firm_profit(&model, &with_alt, firm) <= best + 1e-9);
            }
        }
    }
}

fn duopoly_strategy() -> impl Strategy<Value = Duopoly> {
    (
        60.0..150.0f64,
        0.5..5.0f64,
        prop::array::uniform4(0.0..55.0f64),
        prop::array::uniform2(5.0..150.0f64),
    )
        .prop_map(|(alpha, beta, c, k)| Duopoly {
            alpha,
            beta,
            costs: [[c[0], c[1]], [c[2], c[3]]],
            capacity: k,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nash_is_a_fixed_point(d in duopoly_strategy()) {
        let model = model_of(&d);
        let nash = solve_nash(&model, &SolverConfig::default()).unwrap();
        for firm in 0..2 {
            prop_assert!(validate_allocation(&model, firm, &nash.profile.firms()[firm]).is_feasible());
            let br = best_response(&model, firm, &nash.profile).unwrap();
            prop_assert!(br.max_abs_diff(&nash.profile.firms()[firm]) < 1e-6);
        }
    }

    #[test]
    fn monopoly_weakly_beats_nash(d in duopoly_strategy()) {
        let model = model_of(&d);
        let nash = solve_nash(&model, &SolverConfig::default()).unwrap();
        let mono = solve_monopoly(&model).unwrap();
        prop_assert!(mono.joint_profit() >= nash.joint_profit() - 1e-6);
        for firm in 0..2 {
            prop_assert!(validate_allocation(&model, firm, &mono.profile.firms()[firm]).is_feasible());
        }
    }

    #[test]
    fn monopoly_beats_random_joint_profiles(d in duopoly_strategy(), seed in any::<u64>()) {
        let model = model_of(&d);
        let mono = solve_monopoly(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let p: AllocationProfile = random_feasible_profile(&model, &mut rng);
            let joint = firm_profit(&model, &p, 0) + firm_profit(&model, &p, 1);
            prop_assert!(joint <= mono.joint_profit() + 1e-6);
        }
    }

    #[test]
    fn water_filling_matches_qp(d in duopoly_strategy(), seed in any::<u64>()) {
        let model = model_of(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_feasible_profile(&model, &mut rng);
        for firm in 0..2 {
            let rival = p.totals(2, Some(firm));
            let a = best_response(&model, firm, &p).unwrap();
            let b = best_response_qp(&model, firm, &rival).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-6);
        }
    }
}
