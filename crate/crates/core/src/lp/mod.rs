//! Linear programming with explicit dual extraction.
//!
//! Problems are stated as: minimize c.x subject to equality rows A x = b,
//! inequality rows G x <= h, and per-variable bounds lb <= x <= ub (either
//! side may be infinite). The solver is a bounded-variable revised simplex
//! written for exactness and determinism rather than raw speed.
//!
//! Dual conventions follow the Lagrangian
//!
//! L = c.x + lambda.(A x - b) + mu.(G x - h) + tau_up.(x - ub) - tau_lo.(lb... x)
//!
//! so stationarity reads c + A'lambda + G'mu + tau_upper - tau_lower = 0,
//! with mu, tau_lower, tau_upper all nonnegative. Under this sign choice the
//! equality dual on a demand-balance row is the negated system marginal price.

mod simplex;

/// One linear constraint row: coeffs . x (= or <=) rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// A bounded linear program in minimization form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub cost: Vec<f64>,
    pub eq: Vec<LinearRow>,
    pub ineq: Vec<LinearRow>,
    /// Per-variable (lower, upper); use f64::NEG_INFINITY / f64::INFINITY
    /// for absent sides.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            cost: vec![0.0; num_vars],
            eq: Vec::new(),
            ineq: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); num_vars],
        }
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars, "equality row width mismatch");
        self.eq.push(LinearRow { coeffs, rhs });
    }

    pub fn add_ineq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars, "inequality row width mismatch");
        self.ineq.push(LinearRow { coeffs, rhs });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution bundle. Dual vectors are only meaningful when status is Optimal;
/// objective is +inf for infeasible and -inf for unbounded problems.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// lambda per equality row (sign per the module Lagrangian).
    pub eq_duals: Vec<f64>,
    /// mu per inequality row, >= 0, zero on rows slack at the optimum.
    pub ineq_duals: Vec<f64>,
    /// tau_lower per variable, >= 0, zero unless the lower bound is active.
    pub lower_bound_duals: Vec<f64>,
    /// tau_upper per variable, >= 0, zero unless the upper bound is active.
    pub upper_bound_duals: Vec<f64>,
}

/// Absolute feasibility tolerance used throughout the solver.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Threshold below which a pivot or reduced cost is treated as zero.
pub const PIVOT_TOL: f64 = 1e-9;

/// Solves an LP. Infeasibility and unboundedness are reported through the
/// status, never by panicking; panics indicate a malformed program (ragged
/// rows or mismatched lengths).
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    simplex::solve(lp)
}

/// Largest KKT residual of a claimed optimal solution: primal feasibility,
/// stationarity, dual sign conditions, and complementary slackness.
pub fn check_kkt(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    let n = lp.num_vars;
    let mut worst = 0.0f64;

    for (row, lam) in lp.eq.iter().zip(&sol.eq_duals) {
        let act: f64 = row.coeffs.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        worst = worst.max((act - row.rhs).abs());
        let _ = lam;
    }
    for (row, &mu) in lp.ineq.iter().zip(&sol.ineq_duals) {
        let act: f64 = row.coeffs.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        worst = worst.max(act - row.rhs).max(-mu);
        worst = worst.max((mu * (row.rhs - act)).abs());
    }
    for j in 0..n {
        let (lb, ub) = lp.bounds[j];
        let x = sol.x[j];
        if lb.is_finite() {
            worst = worst.max(lb - x);
            worst = worst.max((sol.lower_bound_duals[j] * (x - lb)).abs());
        }
        if ub.is_finite() {
            worst = worst.max(x - ub);
            worst = worst.max((sol.upper_bound_duals[j] * (ub - x)).abs());
        }
        worst = worst.max(-sol.lower_bound_duals[j]).max(-sol.upper_bound_duals[j]);

        let mut grad = lp.cost[j];
        for (row, lam) in lp.eq.iter().zip(&sol.eq_duals) {
            grad += lam * row.coeffs[j];
        }
        for (row, mu) in lp.ineq.iter().zip(&sol.ineq_duals) {
            grad += mu * row.coeffs[j];
        }
        grad += sol.upper_bound_duals[j] - sol.lower_bound_duals[j];
        worst = worst.max(grad.abs());
    }
    worst
}

/// Dual objective under the module's sign conventions. Equals the primal
/// objective at an exact optimum (strong duality).
pub fn dual_objective(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    let mut obj = 0.0;
    for (row, lam) in lp.eq.iter().zip(&sol.eq_duals) {
        obj -= lam * row.rhs;
    }
    for (row, mu) in lp.ineq.iter().zip(&sol.ineq_duals) {
        obj -= mu * row.rhs;
    }
    for j in 0..lp.num_vars {
        let (lb, ub) = lp.bounds[j];
        if lb.is_finite() {
            obj += sol.lower_bound_duals[j] * lb;
        }
        if ub.is_finite() {
            obj -= sol.upper_bound_duals[j] * ub;
        }
    }
    obj
}
