//! Dense two-phase simplex for `min cᵀx` subject to `Ax = b`, `x >= 0`.
//!
//! Bland's rule (lowest eligible index enters, lowest basic index breaks
//! ratio ties) rules out cycling. When phase one ends with a positive
//! residual, its duals form a Farkas certificate `y` with `yᵀA <= 0` and
//! `yᵀb > 0`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Pivot and reduced-cost tolerance.
    pub pivot_tol: f64,
    /// Phase-one residual above which the problem is declared infeasible.
    pub feasibility_tol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { pivot_tol: 1e-9, feasibility_tol: 1e-9, max_iterations: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    /// `farkas` satisfies `yᵀA <= 0` and `yᵀb > 0` up to round-off.
    Infeasible { farkas: Vec<f64>, residual: f64 },
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: usize,
    width: usize,
    /// `rows` constraint rows followed by the objective row; last column is
    /// the right-hand side (negated objective value in the objective row).
    cells: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, col: usize) -> f64 {
        self.cells[r * self.width + col]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.at(r, col);
        for v in &mut self.cells[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.cells.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations over entering columns `< allowed`.
    fn optimize(&mut self, allowed: usize, opts: &SimplexOptions, iterations: &mut usize) -> Option<bool> {
        let obj = self.rows;
        loop {
            let Some(col) = (0..allowed).find(|&j| self.at(obj, j) < -opts.pivot_tol) else {
                return Some(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, col);
                if a > opts.pivot_tol {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => ratio < best || (ratio == best && self.basis[r] < self.basis[lr]),
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Some(false);
            };
            *iterations += 1;
            if *iterations > opts.max_iterations {
                return None;
            }
            self.pivot(r, col);
        }
    }
}

/// Solves `min cᵀx, Ax = b, x >= 0` with `a` given as rows.
pub fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64], opts: &SimplexOptions) -> Result<LpOutcome> {
    let rows = a.len();
    let n = c.len();
    if b.len() != rows || a.iter().any(|row| row.len() != n) {
        return Err(Error::Shape(format!("LP with {rows} rows, {} right-hand sides and {n} costs", b.len())));
    }
    if a.iter().flatten().chain(b).chain(c).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite LP data".into()));
    }

    // rows are negated where needed so the artificial start is feasible
    let signs: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let width = n + rows + 1;
    let mut t = Tableau { rows, width, cells: vec![0.0; (rows + 1) * width], basis: (n..n + rows).collect() };
    for r in 0..rows {
        for j in 0..n {
            t.cells[r * width + j] = signs[r] * a[r][j];
        }
        t.cells[r * width + n + r] = 1.0;
        t.cells[r * width + width - 1] = signs[r] * b[r];
    }
    // phase one: minimize the sum of artificials
    for j in (0..n).chain(std::iter::once(width - 1)) {
        t.cells[rows * width + j] = -(0..rows).map(|r| t.at(r, j)).sum::<f64>();
    }

    let mut iterations = 0;
    if t.optimize(n, opts, &mut iterations).is_none() {
        return Ok(LpOutcome::IterationLimit);
    }
    let residual = -t.rhs(rows);
    if residual > opts.feasibility_tol {
        // reduced cost of artificial r is 1 - y_r
        let farkas = (0..rows).map(|r| signs[r] * (1.0 - t.at(rows, n + r))).collect();
        return Ok(LpOutcome::Infeasible { farkas, residual });
    }

    // move remaining artificials out of the basis where possible; rows with
    // no usable pivot are redundant and keep a zero artificial
    for r in 0..rows {
        if t.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t.at(r, j).abs() > opts.pivot_tol) {
                t.pivot(r, col);
            }
        }
    }

    // phase two objective row
    for j in 0..width {
        t.cells[rows * width + j] = if j < n { c[j] } else { 0.0 };
    }
    for r in 0..rows {
        let bj = t.basis[r];
        if bj < n && c[bj] != 0.0 {
            for j in 0..width {
                t.cells[rows * width + j] -= c[bj] * t.at(r, j);
            }
        }
    }
    match t.optimize(n, opts, &mut iterations) {
        None => Ok(LpOutcome::IterationLimit),
        Some(false) => Ok(LpOutcome::Unbounded),
        Some(true) => {
            let mut x = vec![0.0; n];
            for r in 0..rows {
                if t.basis[r] < n {
                    x[t.basis[r]] = t.rhs(r);
                }
            }
            let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
            Ok(LpOutcome::Optimal { x, objective })
        }
    }
}
