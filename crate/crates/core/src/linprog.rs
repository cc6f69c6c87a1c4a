//! Dense two-phase primal simplex.
//!
//! Every problem is a maximization over variables with finite lower bounds
//! and optional upper bounds. The solver shifts variables to a zero lower
//! bound, turns upper bounds into rows, adds slack, surplus and artificial
//! columns, and runs phase one (minimize artificial mass) followed by phase
//! two on the original objective.
//!
//! Entering columns follow Dantzig's rule until the objective stalls for
//! [`STALL_THRESHOLD`] consecutive degenerate pivots; from then on Bland's
//! rule is used for the rest of the phase, which rules out cycling. All ties
//! go to the lowest index so the same input always takes the same path.

use std::fmt;

use thiserror::Error;

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_FLOOR: f64 = 1e-10;
/// Degenerate pivots in a row before switching to Bland's rule.
pub const STALL_THRESHOLD: usize = 32;

const RATIO_TIE_TOL: f64 = 1e-12;
const ZERO_SNAP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Shape(String),
    #[error("simplex iteration limit {limit} exceeded in phase {phase}; last basis {basis:?}")]
    IterationLimit {
        limit: usize,
        phase: u8,
        basis: Vec<usize>,
    },
    #[error("simplex returned a point violating constraint {row} by {violation:e}")]
    Numerical { row: usize, violation: f64 },
}

/// A linear program `maximize c'x` subject to row constraints and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    senses: Vec<RowSense>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<Option<f64>>,
}

impl LpProblem {
    /// Starts a problem with the given objective; all variables default to `[0, +inf)`.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![None; n],
        }
    }

    pub fn with_constraint(mut self, row: Vec<f64>, sense: RowSense, rhs: f64) -> Self {
        self.add_constraint(row, sense, rhs);
        self
    }

    pub fn add_constraint(&mut self, row: Vec<f64>, sense: RowSense, rhs: f64) {
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn with_bounds(mut self, var: usize, lower: f64, upper: Option<f64>) -> Self {
        self.set_bounds(var, lower, upper);
        self
    }

    /// Sets bounds of `var`. Out-of-range indices are reported by [`solve`].
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) {
        if var >= self.lower.len() {
            self.lower.resize(var + 1, 0.0);
            self.upper.resize(var + 1, None);
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn senses(&self) -> &[RowSense] {
        &self.senses
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[Option<f64>] {
        &self.upper
    }

    /// Checks the shape invariants.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if n == 0 {
            return Err(LpError::Shape("problem has no variables".into()));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Shape(format!(
                "bounds given for {} variables, objective has {n}",
                self.lower.len()
            )));
        }
        if self.rhs.len() != self.rows.len() || self.senses.len() != self.rows.len() {
            return Err(LpError::Shape(format!(
                "{} rows but {} right-hand sides",
                self.rows.len(),
                self.rhs.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::Shape(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) || !self.rhs[i].is_finite() {
                return Err(LpError::Shape(format!("row {i} has a non-finite entry")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Shape("objective has a non-finite entry".into()));
        }
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return Err(LpError::Shape(format!("variable {j} has a non-finite lower bound")));
            }
            if matches!(self.upper[j], Some(u) if u.is_nan()) {
                return Err(LpError::Shape(format!("variable {j} has a NaN upper bound")));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`, scaled by the row's magnitude.
    pub fn max_violation(&self, x: &[f64]) -> (usize, f64) {
        let mut worst = (0, 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = 1.0
                + self.rhs[i].abs()
                + row.iter().zip(x).map(|(a, v)| (a * v).abs()).sum::<f64>();
            let raw = match self.senses[i] {
                RowSense::Le => lhs - self.rhs[i],
                RowSense::Ge => self.rhs[i] - lhs,
                RowSense::Eq => (lhs - self.rhs[i]).abs(),
            };
            let v = raw / scale;
            if v > worst.1 {
                worst = (i, v);
            }
        }
        for (j, &v) in x.iter().enumerate() {
            let below = (self.lower[j] - v) / (1.0 + self.lower[j].abs());
            let above = self.upper[j].map_or(0.0, |u| (v - u) / (1.0 + u.abs()));
            let viol = below.max(above);
            if viol > worst.1 {
                worst = (self.rows.len() + j, viol);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present only when `status` is `Optimal`.
    pub objective: Option<f64>,
    /// Primal values; meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    /// `m` rows of `ncols + 1` entries, the last being the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    kinds: Vec<ColumnKind>,
    ncols: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let width = self.ncols + 1;
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][col] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f == 0.0 {
                continue;
            }
            for k in 0..width {
                row[k] -= f * pivot_row[k];
                if row[k].abs() < ZERO_SNAP {
                    row[k] = 0.0;
                }
            }
            row[col] = 0.0;
        }
        self.basis[r] = col;
    }

    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut d = costs.to_vec();
        d.push(0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = costs[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for (dk, rk) in d.iter_mut().zip(row) {
                *dk -= cb * rk;
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        d
    }

    /// Runs primal simplex iterations for `costs`; `allowed` masks out columns
    /// that may never enter.
    fn run_phase(
        &mut self,
        costs: &[f64],
        allowed: &[bool],
        phase: u8,
        limit: usize,
        iterations: &mut usize,
    ) -> Result<PhaseOutcome, LpError> {
        let mut d = self.reduced_costs(costs);
        let mut bland = false;
        let mut stalled = 0usize;
        loop {
            let entering = if bland {
                (0..self.ncols).find(|&j| allowed[j] && d[j] > OPTIMALITY_TOL)
            } else {
                let mut best: Option<usize> = None;
                for j in 0..self.ncols {
                    if allowed[j] && d[j] > OPTIMALITY_TOL && best.is_none_or(|b| d[j] > d[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a <= PIVOT_FLOOR {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - RATIO_TIE_TOL
                            || (ratio <= br + RATIO_TIE_TOL && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, step)) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };

            if *iterations >= limit {
                return Err(LpError::IterationLimit {
                    limit,
                    phase,
                    basis: self.basis.clone(),
                });
            }
            *iterations += 1;

            if step * d[col] <= RATIO_TIE_TOL {
                stalled += 1;
                if stalled >= STALL_THRESHOLD {
                    bland = true;
                }
            } else {
                stalled = 0;
            }

            self.pivot(r, col);
            let f = d[col];
            let pr = &self.rows[r];
            for (dk, rk) in d.iter_mut().zip(pr) {
                *dk -= f * rk;
            }
            d[col] = 0.0;
        }
    }
}

/// Solves `problem`. Infeasible and unbounded programs are reported through
/// [`LpSolution::status`]; errors are reserved for malformed input and
/// numerical breakdown.
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();

    // Shift x = lower + x' and collect rows in nonnegative-rhs form.
    let mut rows: Vec<(Vec<f64>, RowSense, f64)> = Vec::with_capacity(problem.num_rows() + n);
    for ((row, &sense), &b) in problem.rows.iter().zip(&problem.senses).zip(&problem.rhs) {
        let shift: f64 = row.iter().zip(&problem.lower).map(|(a, l)| a * l).sum();
        rows.push((row.clone(), sense, b - shift));
    }
    for j in 0..n {
        if let Some(u) = problem.upper[j] {
            if u.is_finite() {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                rows.push((row, RowSense::Le, u - problem.lower[j]));
            } else if u < 0.0 {
                return Ok(infeasible(n, 0));
            }
        }
    }
    for (row, sense, b) in rows.iter_mut() {
        if *b < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
            *sense = match *sense {
                RowSense::Le => RowSense::Ge,
                RowSense::Ge => RowSense::Le,
                RowSense::Eq => RowSense::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != RowSense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != RowSense::Le).count();
    let ncols = n + n_slack + n_art;

    let mut kinds = vec![ColumnKind::Structural; n];
    kinds.extend(std::iter::repeat_n(ColumnKind::Slack, n_slack));
    kinds.extend(std::iter::repeat_n(ColumnKind::Artificial, n_art));

    let mut tab_rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, n + n_slack);
    for (row, sense, b) in &rows {
        let mut t = vec![0.0; ncols + 1];
        t[..n].copy_from_slice(row);
        t[ncols] = *b;
        match sense {
            RowSense::Le => {
                t[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            RowSense::Ge => {
                t[next_slack] = -1.0;
                next_slack += 1;
                t[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            RowSense::Eq => {
                t[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        tab_rows.push(t);
    }

    let mut tab = Tableau {
        rows: tab_rows,
        basis,
        kinds,
        ncols,
    };
    let limit = 50 * (m + ncols).max(20);
    let mut iterations = 0usize;

    if n_art > 0 {
        let costs: Vec<f64> = tab
            .kinds
            .iter()
            .map(|k| if *k == ColumnKind::Artificial { -1.0 } else { 0.0 })
            .collect();
        let allowed = vec![true; ncols];
        tab.run_phase(&costs, &allowed, 1, limit, &mut iterations)?;
        let art_mass: f64 = (0..tab.rows.len())
            .filter(|&i| tab.kinds[tab.basis[i]] == ColumnKind::Artificial)
            .map(|i| tab.rhs(i))
            .sum();
        let b_scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if art_mass > FEASIBILITY_TOL * b_scale {
            return Ok(infeasible(n, iterations));
        }
        drive_out_artificials(&mut tab);
    }

    let mut costs = vec![0.0; ncols];
    costs[..n].copy_from_slice(&problem.objective);
    let allowed: Vec<bool> = tab
        .kinds
        .iter()
        .map(|k| *k != ColumnKind::Artificial)
        .collect();
    match tab.run_phase(&costs, &allowed, 2, limit, &mut iterations)? {
        PhaseOutcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                objective: None,
                x: vec![0.0; n],
                iterations,
            })
        }
        PhaseOutcome::Optimal => {}
    }

    let mut x = problem.lower.clone();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.rhs(i).max(0.0);
        }
    }
    let (row, violation) = problem.max_violation(&x);
    if violation > 1e3 * FEASIBILITY_TOL {
        return Err(LpError::Numerical { row, violation });
    }
    let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: Some(objective),
        x,
        iterations,
    })
}

fn infeasible(n: usize, iterations: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        objective: None,
        x: vec![0.0; n],
        iterations,
    }
}

/// Pivots zero-level artificials out of the basis; rows where no
/// non-artificial column can replace them are redundant and dropped.
fn drive_out_artificials(tab: &mut Tableau) {
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.kinds[tab.basis[i]] != ColumnKind::Artificial {
            i += 1;
            continue;
        }
        let replacement = (0..tab.ncols)
            .find(|&j| tab.kinds[j] != ColumnKind::Artificial && tab.rows[i][j].abs() > PIVOT_FLOOR);
        match replacement {
            Some(col) => {
                tab.pivot(i, col);
                i += 1;
            }
            None => {
                tab.rows.remove(i);
                tab.basis.remove(i);
            }
        }
    }
}
