//! Dense two-phase primal simplex with Bland's rule.

use super::{Problem, SolverConfig, SolverError};
use crate::model::RowSense;

const PRICE_TOL: f64 = 1e-9;
const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    /// `x` in original variable space; `z` is the internal (minimization) objective.
    Optimal { x: Vec<f64>, z: f64 },
    Infeasible,
    Unbounded,
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum ColMap {
    Fixed(f64),
    /// x = lo + x'
    Shift(usize, f64),
    /// x = hi - x'
    Neg(usize, f64),
    /// x = x⁺ - x⁻
    Split(usize, usize),
}

struct Tableau {
    width: usize,
    a: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    pivot_tol: f64,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.a[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, s: usize) -> Result<(), SolverError> {
        let w = self.width;
        let p = self.a[r * w + s];
        if p.abs() < self.pivot_tol {
            return Err(SolverError::NumericalInstability { pivot: p });
        }
        let row: Vec<f64> = self.a[r * w..(r + 1) * w].iter().map(|v| v / p).collect();
        for i in 0..self.rows() {
            if i == r {
                continue;
            }
            let f = self.a[i * w + s];
            if f != 0.0 {
                let dst = &mut self.a[i * w..(i + 1) * w];
                for (d, v) in dst.iter_mut().zip(&row) {
                    *d -= f * v;
                }
                dst[s] = 0.0;
            }
        }
        let f = self.obj[s];
        if f != 0.0 {
            for (d, v) in self.obj.iter_mut().zip(&row) {
                *d -= f * v;
            }
            self.obj[s] = 0.0;
        }
        self.a[r * w..(r + 1) * w].copy_from_slice(&row);
        self.basis[r] = s;
        Ok(())
    }

    /// Runs pivots until optimal; `Ok(false)` means unbounded.
    fn optimize(&mut self, allowed: &[bool], limit: usize) -> Result<bool, SolverError> {
        for _ in 0..limit {
            let Some(s) = (0..allowed.len()).find(|&j| allowed[j] && self.obj[j] < -PRICE_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows() {
                let a = self.at(i, s);
                if a <= RATIO_TOL {
                    continue;
                }
                let t = self.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, t)),
                    Some((r, bt)) => {
                        let tie = (t - bt).abs() <= 1e-12 * (1.0 + bt.abs());
                        if t < bt && !tie || tie && self.basis[i] < self.basis[r] {
                            Some((i, t))
                        } else {
                            Some((r, bt))
                        }
                    }
                };
            }
            match best {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, s)?,
            }
        }
        Err(SolverError::IterationLimit(limit))
    }
}

/// Solves the relaxation of `p` with per-call variable bounds.
pub(crate) fn solve(p: &Problem, lower: &[f64], upper: &[f64], cfg: &SolverConfig) -> Result<LpOutcome, SolverError> {
    let n = p.names.len();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut bound_rows = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lower[j], upper[j]);
        if lo > hi + cfg.feasibility_tol * (1.0 + hi.abs().min(lo.abs())) {
            return Ok(LpOutcome::Infeasible);
        }
        let col = ncols;
        let m = if lo.is_finite() && hi.is_finite() && hi - lo <= 0.0 {
            ColMap::Fixed(lo)
        } else if lo.is_finite() {
            if hi.is_finite() {
                bound_rows.push((col, hi - lo));
            }
            ncols += 1;
            ColMap::Shift(col, lo)
        } else if hi.is_finite() {
            ncols += 1;
            ColMap::Neg(col, hi)
        } else {
            ncols += 2;
            ColMap::Split(col, col + 1)
        };
        maps.push(m);
    }
    let nstruct = ncols;

    // rows over structural columns: (dense coefficients, sense, rhs)
    let mut rows: Vec<(Vec<f64>, RowSense, f64)> = Vec::new();
    for (terms, sense, rhs) in &p.rows {
        let mut coef = vec![0.0; nstruct];
        let mut b = *rhs;
        for &(j, a) in terms {
            match maps[j] {
                ColMap::Fixed(v) => b -= a * v,
                ColMap::Shift(c, lo) => {
                    coef[c] += a;
                    b -= a * lo;
                }
                ColMap::Neg(c, hi) => {
                    coef[c] -= a;
                    b -= a * hi;
                }
                ColMap::Split(c1, c2) => {
                    coef[c1] += a;
                    coef[c2] -= a;
                }
            }
        }
        if coef.iter().all(|v| *v == 0.0) {
            let tol = cfg.feasibility_tol * (1.0 + rhs.abs());
            let ok = match sense {
                RowSense::Le => b >= -tol,
                RowSense::Ge => b <= tol,
                RowSense::Eq => b.abs() <= tol,
            };
            if !ok {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        rows.push((coef, *sense, b));
    }
    for (c, ub) in bound_rows {
        let mut coef = vec![0.0; nstruct];
        coef[c] = 1.0;
        rows.push((coef, RowSense::Le, ub));
    }

    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != RowSense::Eq).count();
    // first pass decides which rows need an artificial
    let mut slack_sign = Vec::with_capacity(m);
    let mut flip = Vec::with_capacity(m);
    for (_, sense, b) in &rows {
        let s = match sense {
            RowSense::Le => 1.0,
            RowSense::Ge => -1.0,
            RowSense::Eq => 0.0,
        };
        let f = *b < 0.0;
        flip.push(f);
        slack_sign.push(if f { -s } else { s });
    }
    let nart = slack_sign.iter().filter(|s| **s != 1.0).count();
    let total = nstruct + nslack + nart;
    let width = total + 1;
    let mut a = vec![0.0; m * width];
    let mut basis = vec![0; m];
    let mut unit_col = vec![0; m];
    let (mut next_slack, mut next_art) = (nstruct, nstruct + nslack);
    for (i, (coef, sense, b)) in rows.iter().enumerate() {
        let sg = if flip[i] { -1.0 } else { 1.0 };
        let row = &mut a[i * width..(i + 1) * width];
        for (d, v) in row.iter_mut().zip(coef) {
            *d = sg * v;
        }
        row[total] = sg * b;
        if *sense != RowSense::Eq {
            row[next_slack] = slack_sign[i];
            if slack_sign[i] == 1.0 {
                basis[i] = next_slack;
                unit_col[i] = next_slack;
            }
            next_slack += 1;
        }
        if slack_sign[i] != 1.0 {
            row[next_art] = 1.0;
            basis[i] = next_art;
            unit_col[i] = next_art;
            next_art += 1;
        }
    }
    let b0: Vec<f64> = (0..m).map(|i| a[i * width + total]).collect();
    let mut t = Tableau { width, a, obj: vec![0.0; width], basis, pivot_tol: cfg.pivot_tol };
    let is_art = |j: usize| j >= nstruct + nslack && j < total;
    let limit = 100_000.max(50 * (m + total));

    if nart > 0 {
        for j in nstruct + nslack..total {
            t.obj[j] = 1.0;
        }
        for i in 0..m {
            if is_art(t.basis[i]) {
                for j in 0..width {
                    t.obj[j] -= t.a[i * width + j];
                }
            }
        }
        let allowed = vec![true; total];
        t.optimize(&allowed, limit)?;
        let w = -t.obj[total];
        let scale = 1.0 + b0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if w > cfg.feasibility_tol * scale {
            return Ok(LpOutcome::Infeasible);
        }
        for r in 0..m {
            if !is_art(t.basis[r]) {
                continue;
            }
            let pick = (0..nstruct + nslack)
                .filter(|&j| t.at(r, j).abs() > RATIO_TOL)
                .max_by(|&x, &y| t.at(r, x).abs().total_cmp(&t.at(r, y).abs()).then(y.cmp(&x)));
            if let Some(s) = pick {
                t.pivot(r, s)?;
            }
        }
    }

    // phase 2 costs over structural columns
    let mut cost = vec![0.0; total];
    let mut obj_const = p.obj_const;
    for (j, map) in maps.iter().enumerate() {
        let c = p.c[j];
        match *map {
            ColMap::Fixed(v) => obj_const += c * v,
            ColMap::Shift(k, lo) => {
                cost[k] = c;
                obj_const += c * lo;
            }
            ColMap::Neg(k, hi) => {
                cost[k] = -c;
                obj_const += c * hi;
            }
            ColMap::Split(k1, k2) => {
                cost[k1] = c;
                cost[k2] = -c;
            }
        }
    }
    t.obj = vec![0.0; width];
    t.obj[..total].copy_from_slice(&cost);
    for i in 0..m {
        let cb = cost[t.basis[i]];
        if cb != 0.0 {
            for j in 0..width {
                t.obj[j] -= cb * t.a[i * width + j];
            }
        }
    }
    let allowed: Vec<bool> = (0..total).map(|j| !is_art(j)).collect();
    if !t.optimize(&allowed, limit)? {
        return Ok(LpOutcome::Unbounded);
    }

    // dual multipliers from the reduced costs of the initial identity columns
    let primal = -t.obj[total];
    let dual: f64 = (0..m).map(|i| -t.obj[unit_col[i]] * b0[i]).sum();
    if (primal - dual).abs() > 1e-6 * primal.abs().max(1.0) {
        return Err(SolverError::DualMismatch { primal, dual });
    }

    let mut xs = vec![0.0; total];
    for i in 0..m {
        xs[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            ColMap::Fixed(v) => v,
            ColMap::Shift(k, lo) => lo + xs[k],
            ColMap::Neg(k, hi) => hi - xs[k],
            ColMap::Split(k1, k2) => xs[k1] - xs[k2],
        })
        .collect();
    let violation = p.violation_within(&x, lower, upper);
    if violation > cfg.feasibility_tol {
        return Err(SolverError::InaccurateSolution { violation });
    }
    let z = p.c.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + p.obj_const;
    debug_assert!((z - (primal + obj_const)).abs() <= 1e-6 * z.abs().max(1.0));
    Ok(LpOutcome::Optimal { x, z })
}
