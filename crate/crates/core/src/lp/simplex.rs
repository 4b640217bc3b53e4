//! Bounded-variable revised simplex with a dense explicit basis inverse.
//!
//! Structure: structural variables first, then one slack per kept inequality
//! row, then phase-1 artificials. Inequality rows that can never bind inside
//! the variable bound box are screened out up front and keep zero
//! multipliers; dropping them only removes redundant work, never solutions.
//!
//! Pivoting: Dantzig pricing (largest reduced cost, lowest index on ties)
//! with a switch to Bland's rule after a run of consecutive degenerate
//! pivots, which guarantees termination. The basis inverse is updated by
//! elementary row operations each pivot and refactorized from scratch at a
//! fixed cadence to keep drift in check.

use super::{LinearProgram, LpSolution, LpStatus, FEASIBILITY_TOL, PIVOT_TOL};
use crate::linalg::{self, Matrix};

const DEGENERATE_STREAK_LIMIT: usize = 30;
const REFACTOR_INTERVAL: usize = 64;
const MAX_ITERS: usize = 100_000;
const DRIVE_OUT_TOL: f64 = 1e-7;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Loc {
    Basic,
    Lower,
    Upper,
    Free,
}

enum Step {
    Optimal,
    Unbounded,
}

struct Engine {
    m: usize,
    n_struct: usize,
    first_artificial: usize,
    total: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    loc: Vec<Loc>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    bland: bool,
    degen_streak: usize,
    pivots_since_refactor: usize,
    iters: usize,
}

pub(super) fn solve(lp: &LinearProgram) -> LpSolution {
    let n = lp.num_vars;
    assert_eq!(lp.cost.len(), n, "cost length mismatch");
    assert_eq!(lp.bounds.len(), n, "bounds length mismatch");
    for row in lp.eq.iter().chain(&lp.ineq) {
        assert_eq!(row.coeffs.len(), n, "row width mismatch");
    }

    for &(lb, ub) in &lp.bounds {
        if lb > ub || lb.is_nan() || ub.is_nan() {
            return failed(lp, LpStatus::Infeasible);
        }
    }

    // Screen inequality rows that hold everywhere inside the bound box; the
    // remaining system keeps the same feasible set and optimal face, and the
    // dropped rows get mu = 0, which stays KKT-consistent.
    let kept: Vec<usize> = (0..lp.ineq.len())
        .filter(|&k| {
            let row = &lp.ineq[k];
            let mut max_act = 0.0f64;
            for (j, &c) in row.coeffs.iter().enumerate() {
                let (lb, ub) = lp.bounds[j];
                let term = if c > 0.0 {
                    c * ub
                } else if c < 0.0 {
                    c * lb
                } else {
                    0.0
                };
                if term.is_infinite() && term > 0.0 {
                    return true;
                }
                if term.is_nan() {
                    return true; // 0 * inf; treat conservatively
                }
                max_act += term;
            }
            max_act > row.rhs
        })
        .collect();

    let m_eq = lp.eq.len();
    let m = m_eq + kept.len();
    let n_slack = kept.len();
    let total_no_art = n + n_slack;

    let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(total_no_art);
    for j in 0..n {
        let mut col = Vec::new();
        for (r, row) in lp.eq.iter().enumerate() {
            if row.coeffs[j] != 0.0 {
                col.push((r, row.coeffs[j]));
            }
        }
        for (k, &orig) in kept.iter().enumerate() {
            let c = lp.ineq[orig].coeffs[j];
            if c != 0.0 {
                col.push((m_eq + k, c));
            }
        }
        cols.push(col);
    }
    for k in 0..n_slack {
        cols.push(vec![(m_eq + k, 1.0)]);
    }

    let mut lb: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    let mut ub: Vec<f64> = lp.bounds.iter().map(|b| b.1).collect();
    lb.extend(std::iter::repeat(0.0).take(n_slack));
    ub.extend(std::iter::repeat(f64::INFINITY).take(n_slack));

    let mut rhs: Vec<f64> = lp.eq.iter().map(|r| r.rhs).collect();
    rhs.extend(kept.iter().map(|&k| lp.ineq[k].rhs));

    // Nonbasic variables start at their nearest finite bound, free ones at 0.
    let mut x = vec![0.0; total_no_art];
    let mut loc = vec![Loc::Lower; total_no_art];
    for j in 0..n {
        if lb[j].is_finite() {
            loc[j] = Loc::Lower;
            x[j] = lb[j];
        } else if ub[j].is_finite() {
            loc[j] = Loc::Upper;
            x[j] = ub[j];
        } else {
            loc[j] = Loc::Free;
            x[j] = 0.0;
        }
    }
    for j in n..total_no_art {
        loc[j] = Loc::Lower;
        x[j] = 0.0;
    }

    let mut activity = vec![0.0; m];
    for j in 0..total_no_art {
        if x[j] != 0.0 {
            for &(r, c) in &cols[j] {
                activity[r] += c * x[j];
            }
        }
    }

    // Build the starting basis: a slack where it is feasible at value
    // rhs - activity, otherwise a signed artificial carrying the residual.
    let mut basis = vec![usize::MAX; m];
    let mut binv: Vec<Vec<f64>> = (0..m).map(|_| vec![0.0; m]).collect();
    let mut need_phase1 = false;
    for r in 0..m {
        let resid = rhs[r] - activity[r];
        let is_ineq = r >= m_eq;
        if is_ineq && resid >= 0.0 {
            let slack = n + (r - m_eq);
            basis[r] = slack;
            loc[slack] = Loc::Basic;
            x[slack] = resid;
            binv[r][r] = 1.0;
        } else {
            let sigma = if resid >= 0.0 { 1.0 } else { -1.0 };
            let art = cols.len();
            cols.push(vec![(r, sigma)]);
            lb.push(0.0);
            ub.push(f64::INFINITY);
            x.push(resid * sigma);
            loc.push(Loc::Basic);
            basis[r] = art;
            binv[r][r] = sigma;
            need_phase1 = true;
        }
    }
    let first_artificial = total_no_art;
    let total = cols.len();

    let mut eng = Engine {
        m,
        n_struct: n,
        first_artificial,
        total,
        cols,
        lb,
        ub,
        x,
        loc,
        basis,
        binv,
        rhs,
        bland: false,
        degen_streak: 0,
        pivots_since_refactor: 0,
        iters: 0,
    };

    if need_phase1 {
        let mut c1 = vec![0.0; eng.total];
        for j in eng.first_artificial..eng.total {
            c1[j] = 1.0;
        }
        match eng.run(&c1) {
            Step::Optimal => {}
            Step::Unbounded => unreachable!("phase-1 objective is bounded below by zero"),
        }
        let infeas: f64 = (eng.first_artificial..eng.total).map(|j| eng.x[j]).sum();
        if infeas > FEASIBILITY_TOL {
            return failed(lp, LpStatus::Infeasible);
        }
        eng.drive_out_artificials();
        for j in eng.first_artificial..eng.total {
            eng.ub[j] = 0.0;
            if eng.loc[j] != Loc::Basic {
                eng.loc[j] = Loc::Lower;
                eng.x[j] = 0.0;
            }
        }
    }

    let mut c2 = vec![0.0; eng.total];
    c2[..n].copy_from_slice(&lp.cost);
    let status = match eng.run(&c2) {
        Step::Optimal => LpStatus::Optimal,
        Step::Unbounded => {
            let mut sol = failed(lp, LpStatus::Unbounded);
            sol.x = eng.x[..n].to_vec();
            return sol;
        }
    };

    // Extract primal values and the full dual bundle.
    let mut xs = eng.x[..n].to_vec();
    for (j, v) in xs.iter_mut().enumerate() {
        let (lo, hi) = lp.bounds[j];
        if *v < lo && lo - *v <= FEASIBILITY_TOL {
            *v = lo;
        }
        if *v > hi && *v - hi <= FEASIBILITY_TOL {
            *v = hi;
        }
    }
    let objective: f64 = lp.cost.iter().zip(&xs).map(|(c, v)| c * v).sum();

    let y = eng.duals(&c2);
    let eq_duals: Vec<f64> = (0..m_eq).map(|r| -y[r]).collect();
    let mut ineq_duals = vec![0.0; lp.ineq.len()];
    for (k, &orig) in kept.iter().enumerate() {
        ineq_duals[orig] = (-y[m_eq + k]).max(0.0);
    }
    let mut lower_bound_duals = vec![0.0; n];
    let mut upper_bound_duals = vec![0.0; n];
    for j in 0..n {
        match eng.loc[j] {
            Loc::Basic | Loc::Free => {}
            Loc::Lower | Loc::Upper => {
                let d = eng.reduced_cost(j, &c2, &y);
                let pinned = lp.bounds[j].0 == lp.bounds[j].1;
                if eng.loc[j] == Loc::Lower && !pinned {
                    lower_bound_duals[j] = d.max(0.0);
                } else if eng.loc[j] == Loc::Upper && !pinned {
                    upper_bound_duals[j] = (-d).max(0.0);
                } else if d >= 0.0 {
                    lower_bound_duals[j] = d;
                } else {
                    upper_bound_duals[j] = -d;
                }
            }
        }
    }

    LpSolution {
        status,
        x: xs,
        objective,
        eq_duals,
        ineq_duals,
        lower_bound_duals,
        upper_bound_duals,
    }
}

fn failed(lp: &LinearProgram, status: LpStatus) -> LpSolution {
    LpSolution {
        status,
        x: vec![0.0; lp.num_vars],
        objective: match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Optimal => 0.0,
        },
        eq_duals: vec![0.0; lp.eq.len()],
        ineq_duals: vec![0.0; lp.ineq.len()],
        lower_bound_duals: vec![0.0; lp.num_vars],
        upper_bound_duals: vec![0.0; lp.num_vars],
    }
}

impl Engine {
    /// Runs simplex iterations to optimality for the given cost vector.
    fn run(&mut self, cost: &[f64]) -> Step {
        let mut polishes = 0;
        loop {
            self.iters += 1;
            assert!(
                self.iters < MAX_ITERS,
                "simplex exceeded its iteration budget; this is a solver bug"
            );
            if self.pivots_since_refactor >= REFACTOR_INTERVAL {
                self.refactor();
            }
            let y = self.duals(cost);
            let entering = self.price(cost, &y);
            let (j, dir) = match entering {
                Some(pick) => pick,
                None => {
                    // Polish once: refactorize, recompute, and confirm that
                    // optimality survives the cleaner numbers.
                    if polishes == 0 && self.pivots_since_refactor > 0 {
                        polishes += 1;
                        self.refactor();
                        continue;
                    }
                    return Step::Optimal;
                }
            };

            let w = self.ftran(j);
            let dirf = dir as f64;

            // Ratio test: how far can x_j move before a basic variable hits
            // a bound (or x_j itself flips to its opposite bound)?
            let t_flip = if self.lb[j].is_finite() && self.ub[j].is_finite() {
                self.ub[j] - self.lb[j]
            } else {
                f64::INFINITY
            };
            let mut t_rows = f64::INFINITY;
            for r in 0..self.m {
                let delta = -dirf * w[r];
                let b = self.basis[r];
                let t = if delta < -PIVOT_TOL {
                    if self.lb[b].is_finite() {
                        (self.x[b] - self.lb[b]) / (-delta)
                    } else {
                        continue;
                    }
                } else if delta > PIVOT_TOL {
                    if self.ub[b].is_finite() {
                        (self.ub[b] - self.x[b]) / delta
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                let t = t.max(0.0);
                if t < t_rows {
                    t_rows = t;
                }
            }

            if t_rows.is_infinite() && t_flip.is_infinite() {
                return Step::Unbounded;
            }

            if t_flip < t_rows - 1e-12 {
                // Bound flip: no basis change.
                let target = if dir > 0 { self.ub[j] } else { self.lb[j] };
                for r in 0..self.m {
                    if w[r] != 0.0 {
                        let b = self.basis[r];
                        self.x[b] -= dirf * t_flip * w[r];
                    }
                }
                self.x[j] = target;
                self.loc[j] = if dir > 0 { Loc::Upper } else { Loc::Lower };
                if t_flip > PIVOT_TOL {
                    self.degen_streak = 0;
                    self.bland = false;
                } else {
                    self.note_degenerate();
                }
                continue;
            }

            // Select the leaving row among those achieving the minimum ratio:
            // under Bland the lowest variable index, otherwise the largest
            // pivot magnitude for stability (ties to the lowest index).
            let mut leave: Option<usize> = None;
            for r in 0..self.m {
                let delta = -dirf * w[r];
                let b = self.basis[r];
                let t = if delta < -PIVOT_TOL {
                    if self.lb[b].is_finite() {
                        ((self.x[b] - self.lb[b]) / (-delta)).max(0.0)
                    } else {
                        continue;
                    }
                } else if delta > PIVOT_TOL {
                    if self.ub[b].is_finite() {
                        ((self.ub[b] - self.x[b]) / delta).max(0.0)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                if t > t_rows + 1e-12 {
                    continue;
                }
                leave = Some(match leave {
                    None => r,
                    Some(cur) => {
                        if self.bland {
                            if self.basis[r] < self.basis[cur] {
                                r
                            } else {
                                cur
                            }
                        } else if w[r].abs() > w[cur].abs() + 1e-15 {
                            r
                        } else if (w[r].abs() - w[cur].abs()).abs() <= 1e-15
                            && self.basis[r] < self.basis[cur]
                        {
                            r
                        } else {
                            cur
                        }
                    }
                });
            }
            let r = leave.expect("a blocking row exists when t_rows is finite");

            let t = t_rows;
            for row in 0..self.m {
                if w[row] != 0.0 {
                    let b = self.basis[row];
                    self.x[b] -= dirf * t * w[row];
                }
            }
            self.x[j] = match self.loc[j] {
                Loc::Lower => self.lb[j] + dirf * t,
                Loc::Upper => self.ub[j] + dirf * t,
                Loc::Free => dirf * t,
                Loc::Basic => unreachable!("entering variable cannot already be basic"),
            };

            let lv = self.basis[r];
            let delta = -dirf * w[r];
            if delta < 0.0 {
                self.x[lv] = self.lb[lv];
                self.loc[lv] = Loc::Lower;
            } else {
                self.x[lv] = self.ub[lv];
                self.loc[lv] = Loc::Upper;
            }
            self.loc[j] = Loc::Basic;
            self.basis[r] = j;
            self.pivot_update(r, &w);

            if t > PIVOT_TOL {
                self.degen_streak = 0;
                self.bland = false;
            } else {
                self.note_degenerate();
            }
        }
    }

    fn note_degenerate(&mut self) {
        self.degen_streak += 1;
        if self.degen_streak >= DEGENERATE_STREAK_LIMIT {
            self.bland = true;
        }
    }

    /// y = c_B' * Binv, skipping zero-cost basic variables.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r];
                for k in 0..self.m {
                    y[k] += cb * row[k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        let mut d = cost[j];
        for &(r, c) in &self.cols[j] {
            d -= y[r] * c;
        }
        d
    }

    /// Picks the entering variable, or None at optimality. Direction +1
    /// means increase from its current position, -1 decrease.
    fn price(&self, cost: &[f64], y: &[f64]) -> Option<(usize, i8)> {
        let mut pick: Option<(usize, i8, f64)> = None;
        for j in 0..self.total {
            if self.loc[j] == Loc::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j, cost, y);
            let dir = match self.loc[j] {
                Loc::Lower => {
                    if d < -PIVOT_TOL {
                        1i8
                    } else {
                        continue;
                    }
                }
                Loc::Upper => {
                    if d > PIVOT_TOL {
                        -1
                    } else {
                        continue;
                    }
                }
                Loc::Free => {
                    if d < -PIVOT_TOL {
                        1
                    } else if d > PIVOT_TOL {
                        -1
                    } else {
                        continue;
                    }
                }
                Loc::Basic => unreachable!(),
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = d.abs();
            match pick {
                Some((_, _, best)) if score <= best => {}
                _ => pick = Some((j, dir, score)),
            }
        }
        pick.map(|(j, dir, _)| (j, dir))
    }

    /// w = Binv * a_j for a sparse column.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for &(r, c) in &self.cols[j] {
            for i in 0..self.m {
                w[i] += self.binv[i][r] * c;
            }
        }
        w
    }

    /// Elementary row update of Binv after the basis change in row r.
    fn pivot_update(&mut self, r: usize, w: &[f64]) {
        let piv = w[r];
        debug_assert!(piv.abs() > 1e-12, "pivot {} too small", piv);
        let inv = 1.0 / piv;
        for k in 0..self.m {
            self.binv[r][k] *= inv;
        }
        let pivot_row = self.binv[r].clone();
        for i in 0..self.m {
            if i != r && w[i] != 0.0 {
                let f = w[i];
                let row = &mut self.binv[i];
                for k in 0..self.m {
                    row[k] -= f * pivot_row[k];
                }
            }
        }
        self.pivots_since_refactor += 1;
    }

    /// Rebuilds Binv from the basis columns and recomputes basic values.
    fn refactor(&mut self) {
        if self.m > 0 {
            let mut b = Matrix::zeros(self.m, self.m);
            for (r, &var) in self.basis.iter().enumerate() {
                for &(row, c) in &self.cols[var] {
                    b.set(row, r, c);
                }
            }
            let inv = linalg::invert(&b).expect("simplex basis must stay nonsingular");
            for r in 0..self.m {
                for k in 0..self.m {
                    self.binv[r][k] = inv.get(r, k);
                }
            }
            let mut activity = vec![0.0; self.m];
            for j in 0..self.total {
                if self.loc[j] != Loc::Basic && self.x[j] != 0.0 {
                    for &(row, c) in &self.cols[j] {
                        activity[row] += c * self.x[j];
                    }
                }
            }
            let resid: Vec<f64> = (0..self.m).map(|r| self.rhs[r] - activity[r]).collect();
            for r in 0..self.m {
                let mut v = 0.0;
                for k in 0..self.m {
                    v += self.binv[r][k] * resid[k];
                }
                self.x[self.basis[r]] = v;
            }
        }
        self.pivots_since_refactor = 0;
    }

    /// After phase 1, pivots zero-valued basic artificials out of the basis
    /// wherever a structural or slack column can replace them; rows left
    /// with a basic artificial are linearly dependent and keep it at zero.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let mut replacement: Option<usize> = None;
            for j in 0..self.first_artificial {
                if self.loc[j] == Loc::Basic {
                    continue;
                }
                let mut p = 0.0;
                for &(row, c) in &self.cols[j] {
                    p += self.binv[r][row] * c;
                }
                if p.abs() > DRIVE_OUT_TOL {
                    replacement = Some(j);
                    break;
                }
            }
            if let Some(j) = replacement {
                let w = self.ftran(j);
                let art = self.basis[r];
                self.loc[art] = Loc::Lower;
                self.x[art] = 0.0;
                self.loc[j] = Loc::Basic;
                self.basis[r] = j;
                self.pivot_update(r, &w);
            }
        }
    }
}
