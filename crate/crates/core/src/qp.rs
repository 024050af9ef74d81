//! Primal active-set solver for small dense convex quadratic programs:
//!
//! ```text
//! minimize   1/2 x'Hx + g'x
//! subject to A_eq x  = b_eq
//!            A_in x <= b_in
//! ```
//!
//! `H` only needs to be positive semidefinite. Directions of zero curvature
//! inside the working-set subspace are followed to the boundary, so the
//! feasible region must be bounded along them (true for every problem built
//! in this crate, whose feasible sets are polytopes).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::ModelError;

#[derive(Debug, Clone)]
pub struct QuadProgram {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Length of the final step taken.
    pub last_step: f64,
}

const MAX_ITERATIONS: usize = 1000;

impl QuadProgram {
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    fn scale(&self) -> f64 {
        self.h.amax().max(self.g.amax()).max(1.0)
    }

    /// Solves from a feasible starting point.
    pub fn solve(&self, x0: DVector<f64>) -> Result<QpSolution, ModelError> {
        let n_eq = self.a_eq.nrows();
        let n_in = self.a_in.nrows();
        let feas_tol = 1e-9 * (1.0 + x0.amax());
        for i in 0..n_in {
            let slack = self.b_in[i] - self.a_in.row(i).dot(&x0.transpose());
            if slack < -feas_tol {
                return Err(ModelError::InvalidParameter(format!(
                    "QP start violates inequality {i} by {}",
                    -slack
                )));
            }
        }

        let mut x = x0;
        // Working set holds inequality indices; equalities are always active.
        let mut working: Vec<usize> = Vec::new();
        for i in 0..n_in {
            let slack = self.b_in[i] - self.a_in.row(i).dot(&x.transpose());
            if slack.abs() <= feas_tol {
                let mut trial = working.clone();
                trial.push(i);
                if self.rank(&trial) == n_eq + trial.len() {
                    working = trial;
                }
            }
        }

        let mut last_step = 0.0;
        // Consecutive iterations without movement; past a threshold the
        // smallest-index rule (Bland) replaces the steepest choices.
        let mut stalls = 0usize;
        for iteration in 1..=MAX_ITERATIONS {
            let bland = stalls > 2 * (n_in + 1);
            let grad = &self.h * &x + &self.g;
            let (step, is_ray) = self.subspace_step(&working, &grad)?;
            let step_norm = step.amax();

            if step_norm <= 1e-13 * (1.0 + x.amax()) {
                let mu = self.multipliers(&working, &grad);
                let mu_tol = 1e-9 * (1.0 + grad.amax() + mu.amax());
                let mut worst = None;
                let mut worst_mu = -mu_tol;
                for k in 0..working.len() {
                    let better = if bland {
                        worst.is_none_or(|w: usize| working[k] < working[w])
                    } else {
                        mu[n_eq + k] < worst_mu
                    };
                    if mu[n_eq + k] < -mu_tol && better {
                        worst_mu = mu[n_eq + k];
                        worst = Some(k);
                    }
                }
                match worst {
                    None => {
                        let objective = self.objective(&x);
                        return Ok(QpSolution {
                            x,
                            objective,
                            iterations: iteration,
                            last_step,
                        });
                    }
                    Some(k) => {
                        working.remove(k);
                        stalls += 1;
                        continue;
                    }
                }
            }

            // Ratio test against inactive inequalities.
            let mut alpha = if is_ray { f64::INFINITY } else { 1.0 };
            let mut blocking = None;
            for i in 0..n_in {
                if working.contains(&i) {
                    continue;
                }
                let row = self.a_in.row(i);
                let ap = row.dot(&step.transpose());
                if ap > 1e-14 * (1.0 + step_norm) {
                    let slack = (self.b_in[i] - row.dot(&x.transpose())).max(0.0);
                    let limit = slack / ap;
                    if limit < alpha {
                        alpha = limit;
                        blocking = Some(i);
                    }
                }
            }
            if !alpha.is_finite() {
                return Err(ModelError::InvalidParameter(
                    "QP objective is unbounded below on the feasible set".into(),
                ));
            }
            x += &step * alpha;
            last_step = alpha * step_norm;
            if last_step == 0.0 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        Err(ModelError::ConvergenceFailure {
            iterations: MAX_ITERATIONS,
            residual: last_step,
        })
    }

    fn working_matrix(&self, working: &[usize]) -> DMatrix<f64> {
        let n = self.g.len();
        let rows = self.a_eq.nrows() + working.len();
        let mut a = DMatrix::zeros(rows, n);
        for r in 0..self.a_eq.nrows() {
            a.set_row(r, &self.a_eq.row(r));
        }
        for (k, &i) in working.iter().enumerate() {
            a.set_row(self.a_eq.nrows() + k, &self.a_in.row(i));
        }
        a
    }

    fn rank(&self, working: &[usize]) -> usize {
        let a = self.working_matrix(working);
        if a.nrows() == 0 {
            return 0;
        }
        a.rank(1e-10 * a.amax().max(1.0))
    }

    /// Orthonormal basis of the null space of the working constraints.
    fn null_space(&self, working: &[usize]) -> DMatrix<f64> {
        let n = self.g.len();
        let a = self.working_matrix(working);
        if a.nrows() == 0 {
            return DMatrix::identity(n, n);
        }
        let gram = a.transpose() * &a;
        let eig = SymmetricEigen::new(gram);
        let tol = 1e-10 * eig.eigenvalues.amax().max(1.0);
        let cols: Vec<_> = (0..n)
            .filter(|&k| eig.eigenvalues[k].abs() <= tol)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }

    /// Newton step within the working subspace, or a zero-curvature descent
    /// ray when the reduced Hessian is singular along a descent direction.
    fn subspace_step(&self, working: &[usize], grad: &DVector<f64>) -> Result<(DVector<f64>, bool), ModelError> {
        let n = self.g.len();
        let z = self.null_space(working);
        if z.ncols() == 0 {
            return Ok((DVector::zeros(n), false));
        }
        let reduced_h = z.transpose() * &self.h * &z;
        let reduced_g = z.transpose() * grad;
        let eig = SymmetricEigen::new(reduced_h);
        let curv_tol = 1e-10 * eig.eigenvalues.amax().max(1e-300);
        let proj = eig.eigenvectors.transpose() * &reduced_g;
        let grad_tol = 1e-11 * self.scale().max(grad.amax());

        // Flat descent direction takes priority: the minimum over the
        // subspace does not exist, so walk until something blocks.
        let mut ray = DVector::zeros(z.ncols());
        let mut has_ray = false;
        for k in 0..z.ncols() {
            if eig.eigenvalues[k] <= curv_tol && proj[k].abs() > grad_tol {
                ray -= eig.eigenvectors.column(k) * proj[k];
                has_ray = true;
            }
        }
        if has_ray {
            return Ok((&z * ray, true));
        }

        let mut y = DVector::zeros(z.ncols());
        for k in 0..z.ncols() {
            if eig.eigenvalues[k] > curv_tol {
                y -= eig.eigenvectors.column(k) * (proj[k] / eig.eigenvalues[k]);
            }
        }
        Ok((&z * y, false))
    }

    /// Least-squares multipliers with `grad + A_w' mu = 0`.
    fn multipliers(&self, working: &[usize], grad: &DVector<f64>) -> DVector<f64> {
        let a = self.working_matrix(working);
        if a.nrows() == 0 {
            return DVector::zeros(0);
        }
        let at = a.transpose();
        let svd = at.svd(true, true);
        svd.solve(&(-grad), 1e-12).unwrap_or_else(|_| DVector::zeros(a.nrows()))
    }
}
