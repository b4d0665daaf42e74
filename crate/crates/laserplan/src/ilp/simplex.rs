//! Bounded-variable primal simplex used for the scheduler's LP relaxations.
//!
//! Two-phase method: phase 1 drives artificial variables out of the basis,
//! phase 2 maximizes the true objective. Variables carry explicit
//! `[lower, upper]` bounds (binaries relax to `[0, 1]`, branch-and-bound
//! tightens them to a point), so bound constraints never materialize as rows.
//! The basis inverse is kept dense and rebuilt periodically; pivoting is
//! Dantzig's rule with a Bland fallback after a degeneracy streak, with all
//! ties broken by lowest index so identical inputs always take the identical
//! pivot path.

/// Row comparison sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// One constraint row: sparse coefficients over structural variables.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A maximization LP over bounded structural variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients, one per structural variable (maximized).
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { objective: f64, values: Vec<f64> },
    Infeasible,
    Unbounded,
}

#[derive(Debug, thiserror::Error)]
pub enum SimplexError {
    #[error("simplex failed to converge within {0} iterations")]
    Stalled(usize),
    #[error("variable {0} has lower bound {1} above upper bound {2}")]
    InvertedBounds(usize, f64, f64),
    #[error("unbounded-below variable {0} is not supported")]
    FreeVariable(usize),
}

const FEAS_TOL: f64 = 1e-8;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGEN_STREAK_FOR_BLAND: usize = 60;
const REFACTOR_EVERY: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VStat {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    /// Sparse columns over rows, structurals first, then logicals/artificials.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    stat: Vec<VStat>,
    /// Basic column per row.
    basis: Vec<usize>,
    /// Dense basis inverse, row-major m*m.
    binv: Vec<f64>,
    /// Values of the basic variables, one per row.
    xb: Vec<f64>,
    rhs: Vec<f64>,
    m: usize,
}

impl Tableau {
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.stat[j] {
            VStat::AtLower => self.lower[j],
            VStat::AtUpper => self.upper[j],
            VStat::Basic => unreachable!("basic variable has no bound value"),
        }
    }

    /// Effective right-hand side b - N x_N, then x_B = B^-1 * that.
    fn recompute_xb(&mut self) {
        let mut beff = self.rhs.clone();
        for j in 0..self.cols.len() {
            if self.stat[j] == VStat::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(r, a) in &self.cols[j] {
                    beff[r] -= a * v;
                }
            }
        }
        for i in 0..self.m {
            let mut acc = 0.0;
            for r in 0..self.m {
                acc += self.binv[i * self.m + r] * beff[r];
            }
            self.xb[i] = acc;
        }
    }

    /// Rebuild the dense basis inverse from scratch (Gauss-Jordan with
    /// partial pivoting) and refresh the basic values.
    fn refactor(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        // Assemble B column-by-column into an augmented [B | I] system.
        let mut aug = vec![0.0; m * 2 * m];
        for (i, &col) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[col] {
                aug[r * 2 * m + i] = a;
            }
        }
        for i in 0..m {
            aug[i * 2 * m + m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            for r in c + 1..m {
                if aug[r * 2 * m + c].abs() > aug[piv * 2 * m + c].abs() {
                    piv = r;
                }
            }
            let p = aug[piv * 2 * m + c];
            if p.abs() < 1e-12 {
                return Err(SimplexError::Stalled(0));
            }
            if piv != c {
                for k in 0..2 * m {
                    aug.swap(c * 2 * m + k, piv * 2 * m + k);
                }
            }
            let inv = 1.0 / p;
            for k in 0..2 * m {
                aug[c * 2 * m + k] *= inv;
            }
            for r in 0..m {
                if r != c {
                    let f = aug[r * 2 * m + c];
                    if f != 0.0 {
                        for k in 0..2 * m {
                            aug[r * 2 * m + k] -= f * aug[c * 2 * m + k];
                        }
                    }
                }
            }
        }
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = aug[i * 2 * m + m + k];
            }
        }
        self.recompute_xb();
        Ok(())
    }

    /// One simplex phase on objective `c` (maximization). Returns false when
    /// the phase proved unboundedness.
    fn optimize(&mut self, c: &[f64], iter_cap: usize) -> Result<bool, SimplexError> {
        let m = self.m;
        let ncols = self.cols.len();
        let mut degen_streak = 0usize;
        let mut pivots_since_refactor = 0usize;
        for iter in 0..iter_cap {
            // Simplex multipliers y = c_B B^-1.
            let mut y = vec![0.0; m];
            for (i, &col) in self.basis.iter().enumerate() {
                let cb = c[col];
                if cb != 0.0 {
                    for r in 0..m {
                        y[r] += cb * self.binv[i * m + r];
                    }
                }
            }
            // Price nonbasic columns; Dantzig rule, Bland under degeneracy.
            let bland = degen_streak >= DEGEN_STREAK_FOR_BLAND;
            let mut entering: Option<(usize, f64, f64)> = None; // (col, |d|, dir)
            for j in 0..ncols {
                if self.stat[j] == VStat::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut d = c[j];
                for &(r, a) in &self.cols[j] {
                    d -= y[r] * a;
                }
                let dir = match self.stat[j] {
                    VStat::AtLower if d > OPT_TOL => 1.0,
                    VStat::AtUpper if d < -OPT_TOL => -1.0,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, d.abs(), dir));
                    break;
                }
                if entering.as_ref().is_none_or(|&(_, best, _)| d.abs() > best) {
                    entering = Some((j, d.abs(), dir));
                }
            }
            let Some((j, _, dir)) = entering else {
                return Ok(true); // optimal for this phase
            };

            // Direction of basic change: x_B -= dir * theta * w.
            let mut w = vec![0.0; m];
            for &(r, a) in &self.cols[j] {
                for i in 0..m {
                    w[i] += self.binv[i * m + r] * a;
                }
            }

            // Ratio test with a Harris-style tie break: among rows hitting the
            // minimum step, take the largest pivot magnitude, then lowest row.
            let own_span = self.upper[j] - self.lower[j];
            let mut theta = own_span; // may be +inf
            let mut leave: Option<usize> = None;
            for (i, &wi) in w.iter().enumerate() {
                let bi = self.basis[i];
                let delta = dir * wi;
                let limit = if delta > PIVOT_TOL {
                    (self.xb[i] - self.lower[bi]) / delta
                } else if delta < -PIVOT_TOL {
                    if self.upper[bi].is_infinite() {
                        continue;
                    }
                    (self.upper[bi] - self.xb[i]) / -delta
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                if limit < theta - 1e-12 {
                    theta = limit;
                    leave = Some(i);
                } else if (limit - theta).abs() <= 1e-12 {
                    if let Some(cur) = leave {
                        if wi.abs() > w[cur].abs() {
                            leave = Some(i);
                        }
                    } else if limit < theta {
                        theta = limit;
                        leave = Some(i);
                    }
                }
            }

            if theta.is_infinite() {
                return Ok(false); // unbounded ray
            }
            if theta <= 1e-11 {
                degen_streak += 1;
            } else {
                degen_streak = 0;
            }

            match leave {
                None => {
                    // Entering variable flips to its opposite bound.
                    for (i, &wi) in w.iter().enumerate() {
                        self.xb[i] -= dir * theta * wi;
                    }
                    self.stat[j] = match self.stat[j] {
                        VStat::AtLower => VStat::AtUpper,
                        VStat::AtUpper => VStat::AtLower,
                        VStat::Basic => unreachable!(),
                    };
                }
                Some(r) => {
                    let pivot = w[r];
                    debug_assert!(pivot.abs() > PIVOT_TOL);
                    let old = self.basis[r];
                    let entering_value = self.nonbasic_value(j) + dir * theta;
                    for (i, &wi) in w.iter().enumerate() {
                        if i != r {
                            self.xb[i] -= dir * theta * wi;
                        }
                    }
                    // Leaving variable settles on the bound it ran into.
                    self.stat[old] = if dir * pivot > 0.0 {
                        VStat::AtLower
                    } else {
                        VStat::AtUpper
                    };
                    self.stat[j] = VStat::Basic;
                    self.basis[r] = j;
                    self.xb[r] = entering_value;
                    // Elementary row update of the dense inverse.
                    let inv = 1.0 / pivot;
                    for k in 0..m {
                        self.binv[r * m + k] *= inv;
                    }
                    for i in 0..m {
                        if i != r {
                            let f = w[i];
                            if f != 0.0 {
                                for k in 0..m {
                                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                                }
                            }
                        }
                    }
                    pivots_since_refactor += 1;
                    if pivots_since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                        pivots_since_refactor = 0;
                    }
                }
            }
            let _ = iter;
        }
        Err(SimplexError::Stalled(iter_cap))
    }
}

/// Solve a bounded-variable maximization LP with its own declared bounds.
#[cfg(test)]
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, SimplexError> {
    solve_lp_bounded(lp, &lp.lower, &lp.upper)
}

/// Solve `lp` with the variable bounds replaced by `struct_lower` /
/// `struct_upper` (used by branch-and-bound to fix binaries without cloning
/// the whole row set).
pub fn solve_lp_bounded(
    lp: &LinearProgram,
    struct_lower: &[f64],
    struct_upper: &[f64],
) -> Result<LpOutcome, SimplexError> {
    let n = lp.objective.len();
    debug_assert_eq!(struct_lower.len(), n);
    debug_assert_eq!(struct_upper.len(), n);
    for j in 0..n {
        if struct_lower[j] > struct_upper[j] + 1e-12 {
            return Err(SimplexError::InvertedBounds(j, struct_lower[j], struct_upper[j]));
        }
        if !struct_lower[j].is_finite() {
            return Err(SimplexError::FreeVariable(j));
        }
    }
    let m = lp.rows.len();

    // Assemble columns: structurals, then one logical per row, then
    // artificials where the initial point violates the row.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, row) in lp.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            debug_assert!(j < n);
            if a != 0.0 {
                cols[j].push((r, a));
            }
        }
    }
    let mut lower = struct_lower.to_vec();
    let mut upper = struct_upper.to_vec();
    // Structurals start at their (finite) lower bound; a fixed variable sits
    // at its single value, which AtLower covers.
    let mut stat = vec![VStat::AtLower; n];

    // Row residuals at that starting point decide which rows need an
    // artificial to form the identity starting basis.
    let mut residual = vec![0.0; m];
    for (r, row) in lp.rows.iter().enumerate() {
        let mut lhs = 0.0;
        for &(j, a) in &row.coeffs {
            lhs += a * lower[j];
        }
        residual[r] = row.rhs - lhs;
    }

    let mut basis = vec![usize::MAX; m];
    let mut rhs = vec![0.0; m];
    let mut artificials: Vec<usize> = Vec::new();
    for (r, row) in lp.rows.iter().enumerate() {
        rhs[r] = row.rhs;
        match row.sense {
            Sense::Le => {
                let s = cols.len();
                cols.push(vec![(r, 1.0)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                stat.push(VStat::AtLower);
                if residual[r] >= -FEAS_TOL {
                    basis[r] = s;
                } else {
                    let a = cols.len();
                    cols.push(vec![(r, -1.0)]);
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                    stat.push(VStat::AtLower);
                    artificials.push(a);
                    basis[r] = a;
                }
            }
            Sense::Ge => {
                let s = cols.len();
                cols.push(vec![(r, -1.0)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                stat.push(VStat::AtLower);
                if residual[r] <= FEAS_TOL {
                    basis[r] = s;
                } else {
                    let a = cols.len();
                    cols.push(vec![(r, 1.0)]);
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                    stat.push(VStat::AtLower);
                    artificials.push(a);
                    basis[r] = a;
                }
            }
            Sense::Eq => {
                let a = cols.len();
                let sign = if residual[r] >= 0.0 { 1.0 } else { -1.0 };
                cols.push(vec![(r, sign)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                stat.push(VStat::AtLower);
                artificials.push(a);
                basis[r] = a;
            }
        }
        stat[basis[r]] = VStat::Basic;
    }

    // The starting basis is diagonal with entries +-1 (slack, surplus, or
    // signed artificial), and a +-1 diagonal is its own inverse.
    let mut binv = vec![0.0; m * m];
    for (i, &col) in basis.iter().enumerate() {
        let &(_, a) = cols[col]
            .iter()
            .find(|&&(r, _)| r == i)
            .expect("starting basis column hits its own row");
        debug_assert!(a == 1.0 || a == -1.0);
        binv[i * m + i] = a;
    }
    let mut tab = Tableau { cols, lower, upper, stat, basis, binv, xb: vec![0.0; m], rhs, m };
    tab.recompute_xb();

    let ncols = tab.cols.len();
    let iter_cap = 60 * (m + ncols) + 10_000;

    if !artificials.is_empty() {
        let mut c1 = vec![0.0; ncols];
        for &a in &artificials {
            c1[a] = -1.0;
        }
        let finished = tab.optimize(&c1, iter_cap)?;
        debug_assert!(finished, "phase-1 objective is bounded by construction");
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, col)| artificials.contains(col))
            .map(|(i, _)| tab.xb[i])
            .sum();
        let nonbasic_art: f64 = artificials
            .iter()
            .filter(|&&a| tab.stat[a] != VStat::Basic)
            .map(|&a| tab.nonbasic_value(a))
            .sum();
        if infeas + nonbasic_art > 1e-7 {
            return Ok(LpOutcome::Infeasible);
        }
        // Lock artificials at zero for phase 2.
        for &a in &artificials {
            tab.upper[a] = 0.0;
            if tab.stat[a] == VStat::AtUpper {
                tab.stat[a] = VStat::AtLower;
            }
        }
    }

    let mut c2 = vec![0.0; ncols];
    c2[..n].copy_from_slice(&lp.objective);
    let bounded = tab.optimize(&c2, iter_cap)?;
    if !bounded {
        return Ok(LpOutcome::Unbounded);
    }

    let mut values = vec![0.0; n];
    for j in 0..n {
        values[j] = match tab.stat[j] {
            VStat::AtLower => struct_lower[j],
            VStat::AtUpper => struct_upper[j],
            VStat::Basic => {
                let i = tab.basis.iter().position(|&c| c == j).expect("basic column");
                tab.xb[i].clamp(struct_lower[j] - FEAS_TOL, struct_upper[j] + FEAS_TOL)
            }
        };
    }
    let objective = values.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
    Ok(LpOutcome::Optimal { objective, values })
}
