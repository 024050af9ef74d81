//! Cournot-Nash and full-collusion benchmark allocations.
//!
//! A firm's best response is a strictly concave, separable quadratic program
//! with nonnegativity bounds and one capacity constraint. Its KKT system is
//! solved exactly by sweeping the capacity multiplier across the sorted
//! market margins. The joint-profit ("monopoly") problem couples firms
//! through aggregate quantities and goes through the general active-set
//! solver in [`crate::qp`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::market::{firm_profit, Allocation, AllocationProfile, MarketModel};
use crate::qp::QuadProgram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tolerance > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "solver tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(ModelError::InvalidParameter(
                "solver max_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub profile: AllocationProfile,
    pub iterations: usize,
    pub converged: bool,
    /// Nash: max allocation change in the last sweep. Monopoly: joint profit
    /// given up by the canonical split.
    pub residual: f64,
    pub firm_profits: Vec<f64>,
    /// Seed of the random starting profile, when one was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_seed: Option<u64>,
}

impl EquilibriumResult {
    pub fn joint_profit(&self) -> f64 {
        self.firm_profits.iter().sum()
    }
}

/// Best response of `firm` when the other firms bring `rival_totals[j]`
/// units to market `j`.
pub fn best_response_to_totals(
    model: &MarketModel,
    firm: usize,
    rival_totals: &[f64],
) -> Result<Allocation, ModelError> {
    let m = model.n_commodities();
    if firm >= model.n_firms() {
        return Err(ModelError::InvalidParameter(format!(
            "firm index {firm} out of range for {} firms",
            model.n_firms()
        )));
    }
    if rival_totals.len() != m {
        return Err(ModelError::Shape(format!(
            "expected {m} rival totals, got {}",
            rival_totals.len()
        )));
    }
    if let Some(r) = rival_totals.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(ModelError::InvalidParameter(format!(
            "rival quantity {r} is not a finite nonnegative number"
        )));
    }
    for d in model.demand() {
        d.validate()?;
    }

    // Marginal profit of the first unit in each market, and the slope
    // weight: q_j(lambda) = max(0, beta_j * (margin_j - lambda) / 2).
    let costs = model.costs(firm);
    let margins: Vec<f64> = (0..m)
        .map(|j| {
            let d = model.demand()[j];
            d.alpha - rival_totals[j] / d.beta - costs[j]
        })
        .collect();
    let weights: Vec<f64> = model.demand().iter().map(|d| d.beta / 2.0).collect();
    let quantities_at = |lambda: f64| -> Vec<f64> {
        margins
            .iter()
            .zip(&weights)
            .map(|(mj, wj)| (wj * (mj - lambda)).max(0.0))
            .collect()
    };

    let capacity = model.capacity(firm);
    let unconstrained = quantities_at(0.0);
    if unconstrained.iter().sum::<f64>() <= capacity {
        return Ok(Allocation(unconstrained));
    }

    // Capacity binds: find lambda > 0 with sum_j q_j(lambda) = capacity.
    // Markets enter the active set in decreasing order of margin; ties keep
    // the lower commodity index first.
    let mut order: Vec<usize> = (0..m).filter(|&j| margins[j] > 0.0).collect();
    order.sort_by(|&a, &b| margins[b].total_cmp(&margins[a]).then(a.cmp(&b)));
    let mut weighted_margin = 0.0;
    let mut weight = 0.0;
    for (k, &j) in order.iter().enumerate() {
        weighted_margin += weights[j] * margins[j];
        weight += weights[j];
        let lambda = (weighted_margin - capacity) / weight;
        let next_margin = order.get(k + 1).map_or(f64::NEG_INFINITY, |&n| margins[n]);
        if lambda >= next_margin {
            let mut q = vec![0.0; m];
            for &a in &order[..=k] {
                q[a] = (weights[a] * (margins[a] - lambda)).max(0.0);
            }
            // Absorb rounding so the capacity holds exactly.
            let total: f64 = q.iter().sum();
            if total > capacity {
                let scale = capacity / total;
                q.iter_mut().for_each(|x| *x *= scale);
            }
            return Ok(Allocation(q));
        }
    }
    unreachable!("the last active set always satisfies the multiplier condition")
}

/// Best response of `firm` against the rest of `profile` (the firm's own
/// entry is ignored).
pub fn best_response(model: &MarketModel, firm: usize, profile: &AllocationProfile) -> Result<Allocation, ModelError> {
    if profile.len() != model.n_firms() {
        return Err(ModelError::Shape(format!(
            "profile has {} allocations for {} firms",
            profile.len(),
            model.n_firms()
        )));
    }
    let rivals = profile.totals(model.n_commodities(), Some(firm));
    best_response_to_totals(model, firm, &rivals)
}

fn require_duopoly(model: &MarketModel, what: &str) -> Result<(), ModelError> {
    if model.n_firms() != 2 {
        return Err(ModelError::Unsupported(format!(
            "{what} is defined for two firms, model has {}",
            model.n_firms()
        )));
    }
    Ok(())
}

fn profits_of(model: &MarketModel, profile: &AllocationProfile) -> Vec<f64> {
    (0..model.n_firms()).map(|i| firm_profit(model, profile, i)).collect()
}

/// Iterated best response for a duopoly, starting from each firm spreading
/// its capacity evenly over the markets.
pub fn solve_nash(model: &MarketModel, config: &SolverConfig) -> Result<EquilibriumResult, ModelError> {
    let m = model.n_commodities();
    let start = AllocationProfile(
        model
            .capacities()
            .iter()
            .map(|&k| Allocation::even_split(k, m))
            .collect(),
    );
    solve_nash_from(model, config, start)
}

/// Same iteration from an arbitrary feasible starting profile.
pub fn solve_nash_from(
    model: &MarketModel,
    config: &SolverConfig,
    start: AllocationProfile,
) -> Result<EquilibriumResult, ModelError> {
    require_duopoly(model, "best-response iteration")?;
    config.validate()?;
    let m = model.n_commodities();
    let mut current = start;
    let mut residual = f64::INFINITY;
    for iteration in 1..=config.max_iterations {
        let previous = current.clone();
        current.0[0] = best_response_to_totals(model, 0, &current.0[1].0)?;
        current.0[1] = best_response_to_totals(model, 1, &current.0[0].0)?;
        residual = current.max_abs_diff(&previous);
        tracing::trace!(iteration, residual, "best-response sweep");
        if residual < config.tolerance {
            let firm_profits = profits_of(model, &current);
            debug_assert_eq!(current.totals(m, None).len(), m);
            return Ok(EquilibriumResult {
                profile: current,
                iterations: iteration,
                converged: true,
                residual,
                firm_profits,
                start_seed: None,
            });
        }
    }
    Err(ModelError::ConvergenceFailure {
        iterations: config.max_iterations,
        residual,
    })
}

/// Random feasible profile: each firm draws a total in `[0, capacity]` and
/// spreads it with uniform random weights.
pub fn random_feasible_profile(model: &MarketModel, rng: &mut impl Rng) -> AllocationProfile {
    let m = model.n_commodities();
    AllocationProfile(
        model
            .capacities()
            .iter()
            .map(|&k| random_allocation(k, m, rng))
            .collect(),
    )
}

pub(crate) fn random_allocation(capacity: f64, m: usize, rng: &mut impl Rng) -> Allocation {
    let total = rng.random::<f64>() * capacity;
    let weights: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-12).collect();
    let sum: f64 = weights.iter().sum();
    Allocation(weights.iter().map(|w| w / sum * total).collect())
}

/// Runs the iteration from `starts` seeded random profiles and returns every
/// result; used to confirm the equilibrium does not depend on the start.
pub fn solve_nash_random_starts(
    model: &MarketModel,
    config: &SolverConfig,
    starts: usize,
    seed: u64,
) -> Result<Vec<EquilibriumResult>, ModelError> {
    (0..starts as u64)
        .map(|k| {
            let start_seed = seed.wrapping_add(k);
            let mut rng = ChaCha8Rng::seed_from_u64(start_seed);
            let start = random_feasible_profile(model, &mut rng);
            let mut result = solve_nash_from(model, config, start)?;
            result.start_seed = Some(start_seed);
            Ok(result)
        })
        .collect()
}

/// Joint-profit maximization with every firm keeping its own capacity.
///
/// The optimal aggregate per market is unique but its split across firms is
/// not when firms tie on cost; the returned profile is the minimum-norm
/// optimal split, which divides tied production evenly.
pub fn solve_monopoly(model: &MarketModel) -> Result<EquilibriumResult, ModelError> {
    let n = model.n_firms();
    let m = model.n_commodities();
    let dim = n * m;
    let idx = |f: usize, j: usize| f * m + j;

    // Maximize sum_j (alpha_j - Q_j/beta_j) Q_j - sum_fj c_fj q_fj.
    let mut h = DMatrix::zeros(dim, dim);
    let mut g = DVector::zeros(dim);
    for j in 0..m {
        let d = model.demand()[j];
        d.validate()?;
        for f in 0..n {
            g[idx(f, j)] = -(d.alpha - model.costs(f)[j]);
            for f2 in 0..n {
                h[(idx(f, j), idx(f2, j))] = 2.0 / d.beta;
            }
        }
    }
    let (a_in, b_in) = bounds_and_capacities(model);
    let joint = QuadProgram::new(h, g.clone()).with_inequalities(a_in.clone(), b_in.clone());
    let first = joint.solve(DVector::zeros(dim))?;

    // Second stage: among allocations with the optimal aggregates and the
    // optimal total cost, pick the one of minimum norm.
    let mut totals = DVector::zeros(m);
    for j in 0..m {
        totals[j] = (0..n).map(|f| first.x[idx(f, j)]).sum::<f64>();
    }
    let cost_row = DVector::from_iterator(dim, (0..dim).map(|k| model.costs(k / m)[k % m]));
    let optimal_cost = cost_row.dot(&first.x);
    let mut a_eq = DMatrix::zeros(m, dim);
    for j in 0..m {
        for f in 0..n {
            a_eq[(j, idx(f, j))] = 1.0;
        }
    }
    let mut a_in2 = DMatrix::zeros(a_in.nrows() + 1, dim);
    a_in2.rows_mut(0, a_in.nrows()).copy_from(&a_in);
    a_in2.set_row(a_in.nrows(), &cost_row.transpose());
    let mut b_in2 = DVector::zeros(b_in.len() + 1);
    b_in2.rows_mut(0, b_in.len()).copy_from(&b_in);
    b_in2[b_in.len()] = optimal_cost + 1e-13 * optimal_cost.abs().max(1.0);
    let canonical = QuadProgram::new(DMatrix::identity(dim, dim), DVector::zeros(dim))
        .with_equalities(a_eq, totals.clone())
        .with_inequalities(a_in2, b_in2)
        .solve(first.x.clone())?;

    // Clear solver dust: zero out negligible entries, then restore each
    // market's optimal total on its largest producer.
    let mut x = canonical.x.clone();
    let dust = 1e-9 * (1.0 + totals.amax());
    for v in x.iter_mut() {
        if *v < dust {
            *v = 0.0;
        }
    }
    for j in 0..m {
        let sum: f64 = (0..n).map(|f| x[idx(f, j)]).sum();
        let top = (0..n)
            .max_by(|&a, &b| x[idx(a, j)].total_cmp(&x[idx(b, j)]))
            .expect("at least one firm");
        if x[idx(top, j)] > 0.0 {
            x[idx(top, j)] = (x[idx(top, j)] + totals[j] - sum).max(0.0);
        }
    }

    let profile = AllocationProfile(
        (0..n)
            .map(|f| Allocation((0..m).map(|j| x[idx(f, j)]).collect()))
            .collect(),
    );
    let firm_profits = profits_of(model, &profile);
    let joint: f64 = firm_profits.iter().sum();
    Ok(EquilibriumResult {
        profile,
        iterations: first.iterations + canonical.iterations,
        converged: true,
        residual: (-first.objective - joint).abs(),
        firm_profits,
        start_seed: None,
    })
}

/// `-q <= 0` for every variable and `sum_j q_fj <= kappa_f` for every firm.
fn bounds_and_capacities(model: &MarketModel) -> (DMatrix<f64>, DVector<f64>) {
    let n = model.n_firms();
    let m = model.n_commodities();
    let dim = n * m;
    let mut a = DMatrix::zeros(dim + n, dim);
    let mut b = DVector::zeros(dim + n);
    for k in 0..dim {
        a[(k, k)] = -1.0;
    }
    for f in 0..n {
        for j in 0..m {
            a[(dim + f, f * m + j)] = 1.0;
        }
        b[dim + f] = model.capacity(f);
    }
    (a, b)
}

/// The same best response computed through the general QP solver. Kept as
/// an independent route for cross-checking.
pub fn best_response_qp(model: &MarketModel, firm: usize, rival_totals: &[f64]) -> Result<Allocation, ModelError> {
    let m = model.n_commodities();
    let costs = model.costs(firm);
    let mut h = DMatrix::zeros(m, m);
    let mut g = DVector::zeros(m);
    for j in 0..m {
        let d = model.demand()[j];
        h[(j, j)] = 2.0 / d.beta;
        g[j] = -(d.alpha - rival_totals[j] / d.beta - costs[j]);
    }
    let mut a = DMatrix::zeros(m + 1, m);
    let mut b = DVector::zeros(m + 1);
    for j in 0..m {
        a[(j, j)] = -1.0;
        a[(m, j)] = 1.0;
    }
    b[m] = model.capacity(firm);
    let sol = QuadProgram::new(h, g)
        .with_inequalities(a, b)
        .solve(DVector::zeros(m))?;
    Ok(Allocation(sol.x.iter().map(|v| v.max(0.0)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(costs: [[f64; 2]; 2]) -> MarketModel {
        MarketModel::uniform(
            100.0,
            2.0,
            costs.iter().map(|r| r.to_vec()).collect(),
            vec![100.0, 100.0],
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn interior_best_response() {
        let m = model([[40.0, 50.0], [50.0, 40.0]]);
        let br = best_response_to_totals(&m, 0, &[80.0 / 3.0, 140.0 / 3.0]).unwrap();
        assert!(close(&br.0, &[140.0 / 3.0, 80.0 / 3.0], 1e-9), "{br:?}");
    }

    #[test]
    fn capacity_binds_against_empty_market() {
        let m = model([[40.0, 40.0], [40.0, 40.0]]);
        let br = best_response_to_totals(&m, 0, &[0.0, 0.0]).unwrap();
        assert!(close(&br.0, &[50.0, 50.0], 1e-12), "{br:?}");
    }

    #[test]
    fn flooded_market_gets_nothing() {
        let m = model([[40.0, 50.0], [50.0, 40.0]]);
        // rival brings 150 to A: price at q=0 is 25 < cost 40
        let br = best_response_to_totals(&m, 0, &[150.0, 0.0]).unwrap();
        assert_eq!(br.0[0], 0.0);
        assert!((br.0[1] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_binding_with_unequal_margins() {
        // Small capacity: only the best market is served.
        let m = MarketModel::uniform(100.0, 2.0, vec![vec![40.0, 50.0], vec![40.0, 50.0]], vec![10.0, 10.0]).unwrap();
        let br = best_response_to_totals(&m, 0, &[0.0, 0.0]).unwrap();
        assert!(close(&br.0, &[10.0, 0.0], 1e-12), "{br:?}");
        // Capacity 30: lambda solves (60-l) + (50-l) = 30 -> l = 40, q = (20, 10)
        let m = MarketModel::uniform(100.0, 2.0, vec![vec![40.0, 50.0], vec![40.0, 50.0]], vec![30.0, 30.0]).unwrap();
        let br = best_response_to_totals(&m, 0, &[0.0, 0.0]).unwrap();
        assert!(close(&br.0, &[20.0, 10.0], 1e-12), "{br:?}");
    }

    #[test]
    fn nash_asymmetric() {
        let res = solve_nash(&model([[40.0, 50.0], [50.0, 40.0]]), &SolverConfig::default()).unwrap();
        assert!(res.converged && res.residual < 1e-8);
        assert!(close(&res.profile.0[0].0, &[140.0 / 3.0, 80.0 / 3.0], 1e-7));
        assert!(close(&res.profile.0[1].0, &[80.0 / 3.0, 140.0 / 3.0], 1e-7));
        assert!(close(&res.firm_profits, &[13000.0 / 9.0; 2], 1e-5));
    }

    #[test]
    fn nash_symmetric() {
        let res = solve_nash(&model([[40.0; 2]; 2]), &SolverConfig::default()).unwrap();
        for a in res.profile.firms() {
            assert!(close(&a.0, &[40.0, 40.0], 1e-7));
        }
        let res = solve_nash(&model([[50.0; 2]; 2]), &SolverConfig::default()).unwrap();
        for a in res.profile.firms() {
            assert!(close(&a.0, &[100.0 / 3.0; 2], 1e-7));
        }
    }

    #[test]
    fn nash_reports_convergence_failure() {
        let cfg = SolverConfig {
            tolerance: 1e-8,
            max_iterations: 3,
        };
        match solve_nash(&model([[40.0, 50.0], [50.0, 40.0]]), &cfg) {
            Err(ModelError::ConvergenceFailure { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-8);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn nash_requires_two_firms() {
        let m = MarketModel::uniform(100.0, 2.0, vec![vec![40.0, 50.0]; 3], vec![100.0; 3]).unwrap();
        assert!(matches!(
            solve_nash(&m, &SolverConfig::default()),
            Err(ModelError::Unsupported(_))
        ));
    }

    #[test]
    fn monopoly_asymmetric() {
        let res = solve_monopoly(&model([[40.0, 50.0], [50.0, 40.0]])).unwrap();
        assert!(close(&res.profile.0[0].0, &[60.0, 0.0], 1e-9), "{:?}", res.profile);
        assert!(close(&res.profile.0[1].0, &[0.0, 60.0], 1e-9), "{:?}", res.profile);
        assert!((res.joint_profit() - 3600.0).abs() < 1e-9);
    }

    #[test]
    fn monopoly_symmetric_splits_evenly() {
        let res = solve_monopoly(&model([[50.0; 2]; 2])).unwrap();
        for a in res.profile.firms() {
            assert!(close(&a.0, &[25.0, 25.0], 1e-9), "{:?}", res.profile);
        }
        assert!((res.joint_profit() - 2.0 * 1250.0).abs() < 1e-9);
    }

    #[test]
    fn monopoly_at_choke_price_produces_nothing() {
        let res = solve_monopoly(&model([[100.0; 2]; 2])).unwrap();
        assert!(res.profile.firms().iter().flat_map(|a| &a.0).all(|q| q.abs() < 1e-12));
        assert_eq!(res.joint_profit(), 0.0);
    }

    #[test]
    fn monopoly_respects_individual_capacities() {
        // Firm 1 is cheap everywhere but can only make 30 units in total.
        let m = MarketModel::uniform(100.0, 2.0, vec![vec![40.0, 40.0], vec![60.0, 60.0]], vec![30.0, 100.0]).unwrap();
        let res = solve_monopoly(&m).unwrap();
        assert!(res.profile.0[0].total() <= 30.0 + 1e-9);
        assert!(res.profile.0[1].total() <= 100.0 + 1e-9);
        // Firm 1's capacity shadow price is 20 (cost gap), so firm 2 tops up
        // each market to Q = 2*(100-60)/2 = 40 while firm 1 runs at capacity.
        let totals = res.profile.totals(2, None);
        assert!(close(&totals, &[40.0, 40.0], 1e-9), "{totals:?}");
        assert!(close(&res.profile.0[0].0, &[15.0, 15.0], 1e-9), "{:?}", res.profile);
    }

    #[test]
    fn qp_route_matches_closed_form_route() {
        let m = model([[40.0, 50.0], [50.0, 40.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let rivals = [rng.random::<f64>() * 150.0, rng.random::<f64>() * 150.0];
            for firm in 0..2 {
                let a = best_response_to_totals(&m, firm, &rivals).unwrap();
                let b = best_response_qp(&m, firm, &rivals).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-8, "{rivals:?}: {a:?} vs {b:?}");
            }
        }
    }
}
