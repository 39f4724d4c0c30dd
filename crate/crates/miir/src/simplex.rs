//! Dense bounded-variable primal simplex.
//!
//! Two phases with artificial variables, Dantzig pricing with a permanent
//! switch to Bland's rule after a degenerate streak, pivot tolerance 1e-9.
//! Every structural variable must carry finite bounds; fixed variables
//! (`lo == hi`) are folded out before the tableau is built.

use crate::error::SolveError;

pub const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const BLAND_TRIGGER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

/// Maximize `objective . x` subject to rows and variable bounds.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub objective: Vec<f64>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.lo.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Solve the LP. Returns the status, a full assignment (meaningful when
/// optimal), and the objective value.
pub fn solve_lp_simplex(p: &LpProblem) -> Result<(LpStatus, Vec<f64>, f64), SolveError> {
    let n = p.num_vars();
    for j in 0..n {
        if !(p.lo[j].is_finite() && p.hi[j].is_finite()) {
            return Err(SolveError::Numeric(format!("variable {j} has non-finite bounds")));
        }
        if p.lo[j] > p.hi[j] + FEAS_TOL {
            return Ok((LpStatus::Infeasible, vec![0.0; n], 0.0));
        }
    }

    // Fold fixed variables into row constants.
    let free: Vec<usize> = (0..n).filter(|&j| p.hi[j] - p.lo[j] > 1e-15).collect();
    let col_of: Vec<Option<usize>> = {
        let mut map = vec![None; n];
        for (col, &j) in free.iter().enumerate() {
            map[j] = Some(col);
        }
        map
    };
    let mut fixed_obj = 0.0;
    for j in 0..n {
        if col_of[j].is_none() {
            fixed_obj += p.objective[j] * p.lo[j];
        }
    }
    let mut rows = Vec::with_capacity(p.rows.len());
    for row in &p.rows {
        let mut rhs = row.rhs;
        let mut terms = Vec::with_capacity(row.terms.len());
        for &(j, a) in &row.terms {
            match col_of[j] {
                Some(col) => terms.push((col, a)),
                None => rhs -= a * p.lo[j],
            }
        }
        if terms.is_empty() {
            let ok = match row.rel {
                Rel::Le => rhs >= -FEAS_TOL,
                Rel::Ge => rhs <= FEAS_TOL,
                Rel::Eq => rhs.abs() <= FEAS_TOL,
            };
            if !ok {
                return Ok((LpStatus::Infeasible, vec![0.0; n], 0.0));
            }
            continue;
        }
        rows.push(LpRow { terms, rel: row.rel, rhs });
    }
    let reduced = LpProblem {
        lo: free.iter().map(|&j| p.lo[j]).collect(),
        hi: free.iter().map(|&j| p.hi[j]).collect(),
        rows,
        objective: free.iter().map(|&j| p.objective[j]).collect(),
    };

    let (status, reduced_x, reduced_obj) = Tableau::solve(&reduced)?;
    let mut full = vec![0.0; n];
    for j in 0..n {
        full[j] = match col_of[j] {
            Some(col) => reduced_x[col],
            None => p.lo[j],
        };
    }
    Ok((status, full, reduced_obj + fixed_obj))
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major m x ncols coefficient matrix, kept reduced on the basis.
    tab: Vec<f64>,
    /// Objective row (reduced costs), length ncols.
    obj: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    xval: Vec<f64>,
    basic: Vec<usize>,
    in_basis: Vec<bool>,
    bland: bool,
    degenerate_streak: usize,
}

impl Tableau {
    fn solve(p: &LpProblem) -> Result<(LpStatus, Vec<f64>, f64), SolveError> {
        let n = p.num_vars();
        let m = p.rows.len();
        if m == 0 {
            // Pure bound optimization.
            let mut x = vec![0.0; n];
            let mut obj = 0.0;
            for j in 0..n {
                x[j] = if p.objective[j] > 0.0 { p.hi[j] } else { p.lo[j] };
                obj += p.objective[j] * x[j];
            }
            return Ok((LpStatus::Optimal, x, obj));
        }

        // Columns: structural | slacks | artificials (added as needed).
        let mut lo = p.lo.clone();
        let mut hi = p.hi.clone();
        for row in &p.rows {
            match row.rel {
                Rel::Le => {
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                }
                Rel::Ge => {
                    lo.push(f64::NEG_INFINITY);
                    hi.push(0.0);
                }
                Rel::Eq => {
                    lo.push(0.0);
                    hi.push(0.0);
                }
            }
        }

        // Start structural vars at the bound nearer zero, slacks basic.
        let mut xval = vec![0.0; n];
        for j in 0..n {
            xval[j] = if p.lo[j].abs() <= p.hi[j].abs() { p.lo[j] } else { p.hi[j] };
        }

        let mut artificial_rows: Vec<(usize, f64)> = Vec::new();
        let mut slack_val = vec![0.0; m];
        for (i, row) in p.rows.iter().enumerate() {
            let body: f64 = row.terms.iter().map(|&(j, a)| a * xval[j]).sum();
            let want = row.rhs - body;
            let s_lo = lo[n + i];
            let s_hi = hi[n + i];
            let clamped = want.max(s_lo).min(s_hi);
            slack_val[i] = clamped;
            let excess = want - clamped;
            if excess.abs() > FEAS_TOL {
                artificial_rows.push((i, excess));
            }
        }

        let n_art = artificial_rows.len();
        let ncols = n + m + n_art;
        let mut tab = vec![0.0; m * ncols];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.terms {
                tab[i * ncols + j] += a;
            }
            tab[i * ncols + n + i] = 1.0;
        }
        for (k, &(i, excess)) in artificial_rows.iter().enumerate() {
            tab[i * ncols + n + m + k] = if excess >= 0.0 { 1.0 } else { -1.0 };
            lo.push(0.0);
            hi.push(f64::INFINITY);
        }

        let mut xfull = xval;
        xfull.extend_from_slice(&slack_val);
        for &(_, excess) in &artificial_rows {
            xfull.push(excess.abs());
        }

        let mut basic = vec![0usize; m];
        let mut in_basis = vec![false; ncols];
        let mut art_of_row = vec![None; m];
        for (k, &(i, _)) in artificial_rows.iter().enumerate() {
            art_of_row[i] = Some(n + m + k);
        }
        for i in 0..m {
            let b = art_of_row[i].unwrap_or(n + i);
            basic[i] = b;
            in_basis[b] = true;
        }

        let mut t = Tableau {
            m,
            ncols,
            tab,
            obj: vec![0.0; ncols],
            lo,
            hi,
            xval: xfull,
            basic,
            in_basis,
            bland: false,
            degenerate_streak: 0,
        };

        if n_art > 0 {
            // Phase 1: drive total artificial mass to zero.
            let mut phase1 = vec![0.0; ncols];
            for k in 0..n_art {
                phase1[n + m + k] = -1.0;
            }
            t.load_objective(&phase1);
            t.iterate()?;
            let infeas: f64 = (0..n_art).map(|k| t.xval[n + m + k]).sum();
            if infeas > 1e-6 {
                return Ok((LpStatus::Infeasible, vec![0.0; n], 0.0));
            }
            // Freeze artificials at zero so they never re-enter.
            for k in 0..n_art {
                let j = n + m + k;
                t.lo[j] = 0.0;
                t.hi[j] = 0.0;
                if !t.in_basis[j] {
                    t.xval[j] = 0.0;
                }
            }
        }

        let mut phase2 = vec![0.0; ncols];
        phase2[..n].copy_from_slice(&p.objective);
        t.load_objective(&phase2);
        t.iterate()?;

        let x: Vec<f64> = t.xval[..n].to_vec();
        let obj: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok((LpStatus::Optimal, x, obj))
    }

    /// Rebuild the reduced-cost row for a new objective.
    fn load_objective(&mut self, costs: &[f64]) {
        self.obj.copy_from_slice(costs);
        for i in 0..self.m {
            let cb = costs[self.basic[i]];
            if cb == 0.0 {
                continue;
            }
            let (obj, tab) = (&mut self.obj, &self.tab);
            let row = &tab[i * self.ncols..(i + 1) * self.ncols];
            for (o, &a) in obj.iter_mut().zip(row) {
                *o -= cb * a;
            }
        }
        self.bland = false;
        self.degenerate_streak = 0;
    }

    fn iterate(&mut self) -> Result<(), SolveError> {
        let max_iter = 200 * (self.m + self.ncols) + 2000;
        for _ in 0..max_iter {
            let Some((enter, dir)) = self.pick_entering() else {
                return Ok(());
            };
            self.step(enter, dir)?;
        }
        Err(SolveError::Numeric("iteration limit reached".into()))
    }

    /// Choose a nonbasic variable whose move improves the objective.
    /// `dir` is +1.0 when it increases from its lower bound, -1.0 otherwise.
    fn pick_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.in_basis[j] || self.hi[j] - self.lo[j] < 1e-15 {
                continue;
            }
            let d = self.obj[j];
            let at_lo = (self.xval[j] - self.lo[j]).abs() <= (self.xval[j] - self.hi[j]).abs();
            let candidate = if at_lo && d > PIVOT_TOL {
                Some((j, 1.0, d))
            } else if !at_lo && d < -PIVOT_TOL {
                Some((j, -1.0, -d))
            } else {
                None
            };
            if let Some((j, dir, score)) = candidate {
                if self.bland {
                    return Some((j, dir));
                }
                match best {
                    Some((_, _, s)) if s >= score => {}
                    _ => best = Some((j, dir, score)),
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn step(&mut self, enter: usize, dir: f64) -> Result<(), SolveError> {
        // Ratio test: the entering variable moves by `dir * delta`.
        let own_range = self.hi[enter] - self.lo[enter];
        let mut delta = own_range;
        let mut leave: Option<usize> = None; // row index
        for i in 0..self.m {
            let alpha = self.tab[i * self.ncols + enter];
            if alpha.abs() < PIVOT_TOL {
                continue;
            }
            let rate = -alpha * dir;
            let k = self.basic[i];
            let v = self.xval[k];
            let limit = if rate > 0.0 {
                if self.hi[k].is_finite() {
                    (self.hi[k] - v) / rate
                } else {
                    f64::INFINITY
                }
            } else if self.lo[k].is_finite() {
                (self.lo[k] - v) / rate
            } else {
                f64::INFINITY
            };
            let limit = limit.max(0.0);
            let replace = match leave {
                _ if limit < delta - 1e-12 => true,
                Some(r) if (limit - delta).abs() <= 1e-12 => {
                    if self.bland {
                        self.basic[i] < self.basic[r]
                    } else {
                        alpha.abs()
                            > self.tab[r * self.ncols + enter].abs()
                    }
                }
                _ => false,
            };
            if replace {
                delta = limit.min(delta);
                leave = Some(i);
            }
        }

        if !delta.is_finite() {
            return Err(SolveError::Numeric("unbounded direction".into()));
        }
        if delta <= 1e-12 {
            self.degenerate_streak += 1;
            if self.degenerate_streak > BLAND_TRIGGER {
                self.bland = true;
            }
        } else {
            self.degenerate_streak = 0;
        }

        // Apply the move to the variable values.
        let step = dir * delta;
        for i in 0..self.m {
            let alpha = self.tab[i * self.ncols + enter];
            if alpha != 0.0 {
                let k = self.basic[i];
                self.xval[k] -= alpha * step;
            }
        }
        self.xval[enter] += step;

        match leave {
            None => {
                // Bound flip, no basis change.
                Ok(())
            }
            Some(r) => {
                let out = self.basic[r];
                // Snap the leaving variable onto its bound.
                let v = self.xval[out];
                self.xval[out] = if (v - self.lo[out]).abs() <= (v - self.hi[out]).abs() {
                    self.lo[out]
                } else {
                    self.hi[out]
                };
                self.pivot(r, enter)?;
                self.in_basis[out] = false;
                self.in_basis[enter] = true;
                self.basic[r] = enter;
                Ok(())
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) -> Result<(), SolveError> {
        let ncols = self.ncols;
        let piv = self.tab[r * ncols + q];
        if piv.abs() < PIVOT_TOL {
            return Err(SolveError::Numeric("pivot below tolerance".into()));
        }
        let inv = 1.0 / piv;
        for v in &mut self.tab[r * ncols..(r + 1) * ncols] {
            *v *= inv;
        }
        // Split borrows: copy the pivot row once.
        let pivot_row: Vec<f64> = self.tab[r * ncols..(r + 1) * ncols].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = self.tab[i * ncols + q];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * ncols..(i + 1) * ncols];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            row[q] = 0.0;
        }
        let factor = self.obj[q];
        if factor != 0.0 {
            for (v, &p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            self.obj[q] = 0.0;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(lo: &[f64], hi: &[f64], obj: &[f64], rows: Vec<LpRow>) -> LpProblem {
        LpProblem { lo: lo.to_vec(), hi: hi.to_vec(), rows, objective: obj.to_vec() }
    }

    #[test]
    fn two_caps() {
        let p = problem(
            &[0.0, 0.0],
            &[10.0, 10.0],
            &[1.0, 1.0],
            vec![
                LpRow { terms: vec![(0, 1.0)], rel: Rel::Le, rhs: 1.0 },
                LpRow { terms: vec![(1, 1.0)], rel: Rel::Le, rhs: 1.0 },
            ],
        );
        let (status, x, obj) = solve_lp_simplex(&p).unwrap();
        assert_eq!(status, LpStatus::Optimal);
        assert!((obj - 2.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!((x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_bound_vs_row() {
        let p = problem(
            &[0.0],
            &[1.0],
            &[1.0],
            vec![LpRow { terms: vec![(0, 1.0)], rel: Rel::Ge, rhs: 2.0 }],
        );
        let (status, _, _) = solve_lp_simplex(&p).unwrap();
        assert_eq!(status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_rows_via_artificials() {
        // x + y = 3, x - y = 1 within [0, 5]^2, maximize y.
        let p = problem(
            &[0.0, 0.0],
            &[5.0, 5.0],
            &[0.0, 1.0],
            vec![
                LpRow { terms: vec![(0, 1.0), (1, 1.0)], rel: Rel::Eq, rhs: 3.0 },
                LpRow { terms: vec![(0, 1.0), (1, -1.0)], rel: Rel::Eq, rhs: 1.0 },
            ],
        );
        let (status, x, obj) = solve_lp_simplex(&p).unwrap();
        assert_eq!(status, LpStatus::Optimal);
        assert!((x[0] - 2.0).abs() < 1e-8);
        assert!((x[1] - 1.0).abs() < 1e-8);
        assert!((obj - 1.0).abs() < 1e-8);
    }

    #[test]
    fn classic_textbook_lp() {
        // max 3x + 5y; x <= 4; 2y <= 12; 3x + 2y <= 18.
        let p = problem(
            &[0.0, 0.0],
            &[100.0, 100.0],
            &[3.0, 5.0],
            vec![
                LpRow { terms: vec![(0, 1.0)], rel: Rel::Le, rhs: 4.0 },
                LpRow { terms: vec![(1, 2.0)], rel: Rel::Le, rhs: 12.0 },
                LpRow { terms: vec![(0, 3.0), (1, 2.0)], rel: Rel::Le, rhs: 18.0 },
            ],
        );
        let (status, x, obj) = solve_lp_simplex(&p).unwrap();
        assert_eq!(status, LpStatus::Optimal);
        assert!((obj - 36.0).abs() < 1e-8);
        assert!((x[0] - 2.0).abs() < 1e-8);
        assert!((x[1] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn negative_lower_bounds() {
        // max x + y with x in [-5, -1], y in [-2, 3], x + y >= -4.
        let p = problem(
            &[-5.0, -2.0],
            &[-1.0, 3.0],
            &[1.0, 1.0],
            vec![LpRow { terms: vec![(0, 1.0), (1, 1.0)], rel: Rel::Ge, rhs: -4.0 }],
        );
        let (status, x, obj) = solve_lp_simplex(&p).unwrap();
        assert_eq!(status, LpStatus::Optimal);
        assert!((x[0] + 1.0).abs() < 1e-8);
        assert!((x[1] - 3.0).abs() < 1e-8);
        assert!((obj - 2.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_variables_fold_away() {
        let p = problem(
            &[2.0, 0.0],
            &[2.0, 10.0],
            &[1.0, 1.0],
            vec![LpRow { terms: vec![(0, 1.0), (1, 1.0)], rel: Rel::Le, rhs: 5.0 }],
        );
        let (status, x, obj) = solve_lp_simplex(&p).unwrap();
        assert_eq!(status, LpStatus::Optimal);
        assert_eq!(x[0], 2.0);
        assert!((x[1] - 3.0).abs() < 1e-8);
        assert!((obj - 5.0).abs() < 1e-8);
    }
}
