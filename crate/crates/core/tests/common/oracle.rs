//! Independent brute-force and closed-form oracles for two-firm, two-market
//! Cournot models with identical linear demand in both markets.

#[derive(Debug, Clone, Copy)]
pub struct Duopoly {
    pub alpha: f64,
    pub beta: f64,
    pub costs: [[f64; 2]; 2],
    pub capacity: [f64; 2],
}

impl Duopoly {
    pub fn asymmetric() -> Self {
        Self {
            alpha: 100.0,
            beta: 2.0,
            costs: [[40.0, 50.0], [50.0, 40.0]],
            capacity: [100.0, 100.0],
        }
    }

    pub fn symmetric(c: f64) -> Self {
        Self {
            costs: [[c, c], [c, c]],
            ..Self::asymmetric()
        }
    }

    fn price(&self, total: f64) -> f64 {
        self.alpha - total / self.beta
    }

    /// Profit of `firm` with quantities `own` against rival quantities `rival`.
    pub fn profit(&self, firm: usize, own: [f64; 2], rival: [f64; 2]) -> f64 {
        (0..2)
            .map(|j| (self.price(own[j] + rival[j]) - self.costs[firm][j]) * own[j])
            .sum()
    }

    /// Joint profit for `q = [q1A, q1B, q2A, q2B]`.
    pub fn joint(&self, q: [f64; 4]) -> f64 {
        self.profit(0, [q[0], q[1]], [q[2], q[3]]) + self.profit(1, [q[2], q[3]], [q[0], q[1]])
    }

    /// Interior Nash quantities per market, valid when capacity is slack.
    pub fn closed_form_nash(&self) -> [[f64; 2]; 2] {
        let q = |i: usize, j: usize| {
            let k = 1 - i;
            self.beta * (self.alpha - 2.0 * self.costs[i][j] + self.costs[k][j]) / 3.0
        };
        [[q(0, 0), q(0, 1)], [q(1, 0), q(1, 1)]]
    }
}

/// Coarse-to-fine maximization over a grid in hundredths of a unit.
/// Each stage searches +-2 steps of the previous stage around its best point.
fn grid_search<const D: usize>(hi: [i64; D], objective: impl Fn(&[i64; D]) -> Option<f64>) -> ([i64; D], f64) {
    let steps = [500i64, 100, 20, 5, 1];
    let mut lo_b = [0i64; D];
    let mut hi_b = hi;
    let mut best = ([0i64; D], f64::NEG_INFINITY);
    for (s, &step) in steps.iter().enumerate() {
        if s > 0 {
            let radius = 2 * steps[s - 1];
            for d in 0..D {
                lo_b[d] = (best.0[d] - radius).max(0);
                hi_b[d] = (best.0[d] + radius).min(hi[d]);
            }
        }
        let counts: Vec<i64> = (0..D).map(|d| (hi_b[d] - lo_b[d]) / step + 1).collect();
        let total: i64 = counts.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            let mut point = [0i64; D];
            for d in 0..D {
                point[d] = lo_b[d] + (rem % counts[d]) * step;
                rem /= counts[d];
            }
            if let Some(v) = objective(&point) {
                if v > best.1 {
                    best = (point, v);
                }
            }
        }
    }
    best
}

fn hundredths(k: i64) -> f64 {
    k as f64 / 100.0
}

/// Best response of `firm` to fixed rival quantities, on a 0.01 grid.
pub fn grid_best_response(model: &Duopoly, firm: usize, rival: [f64; 2]) -> ([f64; 2], f64) {
    let cap = (model.capacity[firm] * 100.0).round() as i64;
    let (p, v) = grid_search([cap, cap], |q| {
        (q[0] + q[1] <= cap).then(|| model.profit(firm, [hundredths(q[0]), hundredths(q[1])], rival))
    });
    ([hundredths(p[0]), hundredths(p[1])], v)
}

/// Joint-profit maximizer on a 0.01 grid, each firm within its capacity.
pub fn grid_monopoly(model: &Duopoly) -> ([f64; 4], f64) {
    let c0 = (model.capacity[0] * 100.0).round() as i64;
    let c1 = (model.capacity[1] * 100.0).round() as i64;
    let (p, v) = grid_search([c0, c0, c1, c1], |q| {
        (q[0] + q[1] <= c0 && q[2] + q[3] <= c1).then(|| model.joint(q.map(hundredths)))
    });
    (p.map(hundredths), v)
}
