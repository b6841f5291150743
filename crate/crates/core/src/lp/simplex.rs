//! Dense revised simplex for packing LPs `max c'x  s.t.  A x <= b, x >= 0`
//! with `b >= 0` and a 0/1 constraint matrix stored column-wise.
//!
//! The slack basis is feasible from the start, so there is no phase one.
//! Pricing is Dantzig's rule with lowest-index tie breaking; after a streak of
//! degenerate pivots the solver switches to Bland's rule until progress resumes.

use crate::error::{McarError, Result};

/// Pricing and feasibility tolerance.
pub const TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;
const REFACTOR_EVERY: usize = 100;

/// 0/1 matrix in compressed sparse column form.
#[derive(Debug, Clone)]
pub struct BinaryColumns {
    pub rows: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl BinaryColumns {
    pub fn cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Row duals `y = c_B' B^-1`, clamped at zero.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau<'a> {
    a: &'a BinaryColumns,
    b: &'a [f64],
    c: &'a [f64],
    m: usize,
    n: usize,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    binv: Vec<f64>,
    xb: Vec<f64>,
}

impl<'a> Tableau<'a> {
    fn cost(&self, var: usize) -> f64 {
        if var < self.n {
            self.c[var]
        } else {
            0.0
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &var) in self.basis.iter().enumerate() {
            let cb = self.cost(var);
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yj, &v) in y.iter_mut().zip(row) {
                    *yj += cb * v;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, var: usize, y: &[f64]) -> f64 {
        if var < self.n {
            self.c[var] - self.a.column(var).iter().map(|&r| y[r]).sum::<f64>()
        } else {
            -y[var - self.n]
        }
    }

    fn entering_column(&self, var: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if var < self.n {
            let col = self.a.column(var);
            for (i, slot) in alpha.iter_mut().enumerate() {
                let row = &self.binv[i * m..(i + 1) * m];
                *slot = col.iter().map(|&r| row[r]).sum();
            }
        } else {
            let r = var - self.n;
            for (i, slot) in alpha.iter_mut().enumerate() {
                *slot = self.binv[i * m + r];
            }
        }
        alpha
    }

    fn pivot(&mut self, leave: usize, enter: usize, alpha: &[f64], step: f64) {
        let m = self.m;
        for (i, x) in self.xb.iter_mut().enumerate() {
            if i != leave {
                *x -= step * alpha[i];
                if *x < 0.0 && *x > -TOL {
                    *x = 0.0;
                }
            }
        }
        self.xb[leave] = step;

        let inv = 1.0 / alpha[leave];
        for v in &mut self.binv[leave * m..(leave + 1) * m] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.binv[leave * m..(leave + 1) * m].to_vec();
        for i in 0..m {
            let f = alpha[i];
            if i == leave || f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }

        let old = self.basis[leave];
        self.position[old] = None;
        self.position[enter] = Some(leave);
        self.basis[leave] = enter;
    }

    /// Recomputes `B^-1` and `x_B` from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = vec![0.0f64; m * m];
        for (k, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                for &r in self.a.column(var) {
                    bmat[r * m + k] = 1.0;
                }
            } else {
                bmat[(var - self.n) * m + k] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let (piv, best) = (col..m)
                .map(|r| (r, bmat[r * m + col].abs()))
                .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if best < 1e-12 {
                return Err(McarError::Solver("basis became singular during refactorization".into()));
            }
            if piv != col {
                for k in 0..m {
                    bmat.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = 1.0 / bmat[col * m + col];
            for k in 0..m {
                bmat[col * m + k] *= d;
                inv[col * m + k] *= d;
            }
            for r in 0..m {
                let f = bmat[r * m + col];
                if r == col || f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    bmat[r * m + k] -= f * bmat[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        // rows of `inv` now correspond to basis positions
        self.binv = inv;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(self.b).map(|(a, b)| a * b).sum();
            self.xb[i] = if v < 0.0 && v > -TOL { 0.0 } else { v };
        }
        Ok(())
    }
}

/// Solves `max c'x  s.t.  A x <= b, x >= 0` for a 0/1 matrix `A` and `b >= 0`.
pub fn solve_packing(a: &BinaryColumns, b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = a.rows;
    let n = a.cols();
    if b.len() != m || c.len() != n {
        return Err(McarError::Solver(format!(
            "dimension mismatch: {m} rows, {n} columns, |b| = {}, |c| = {}",
            b.len(),
            c.len()
        )));
    }
    if let Some(i) = b.iter().position(|&v| !(v >= 0.0)) {
        return Err(McarError::Solver(format!("right-hand side {i} is negative: {}", b[i])));
    }

    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut position = vec![None; n + m];
    for i in 0..m {
        position[n + i] = Some(i);
    }
    let mut t = Tableau {
        a,
        b,
        c,
        m,
        n,
        basis: (n..n + m).collect(),
        position,
        binv,
        xb: b.to_vec(),
    };

    let cap = 50 * (m + n);
    let mut iterations = 0;
    let mut streak = 0;
    let mut since_refactor = 0;
    loop {
        let y = t.duals();
        let bland = streak >= DEGENERATE_STREAK;
        let mut enter = None;
        let mut best = TOL;
        for var in 0..n + m {
            if t.position[var].is_some() {
                continue;
            }
            let d = t.reduced_cost(var, &y);
            if d > best {
                enter = Some(var);
                if bland {
                    break;
                }
                best = d;
            }
        }
        let Some(enter) = enter else { break };

        let alpha = t.entering_column(enter);
        let mut leave: Option<usize> = None;
        let mut step = f64::INFINITY;
        for i in 0..m {
            if alpha[i] <= PIVOT_TOL {
                continue;
            }
            let ratio = t.xb[i].max(0.0) / alpha[i];
            let better = match leave {
                None => true,
                Some(l) => {
                    ratio < step - 1e-13 || (ratio <= step + 1e-13 && t.basis[i] < t.basis[l])
                }
            };
            if better {
                leave = Some(i);
                step = ratio;
            }
        }
        let Some(leave) = leave else {
            return Err(McarError::Solver(format!("unbounded direction at column {enter}")));
        };

        streak = if step <= 1e-13 { streak + 1 } else { 0 };
        t.pivot(leave, enter, &alpha, step);
        iterations += 1;
        since_refactor += 1;
        if since_refactor >= REFACTOR_EVERY {
            t.refactor()?;
            since_refactor = 0;
        }
        if iterations > cap {
            return Err(McarError::Solver(format!(
                "iteration cap {cap} reached ({m} rows, {n} columns, degenerate streak {streak})"
            )));
        }
    }

    if since_refactor > 0 {
        t.refactor()?;
    }
    let mut x = vec![0.0; n];
    for (i, &var) in t.basis.iter().enumerate() {
        if var < n {
            x[var] = t.xb[i].max(0.0);
        }
    }
    let duals = t.duals().into_iter().map(|v| v.max(0.0)).collect();
    let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        x,
        duals,
        objective,
        iterations,
    })
}
