//! Sparse LU factorization of the simplex basis with product-form eta
//! updates between refactorizations.
//!
//! Left-looking elimination with partial pivoting by magnitude. Columns are
//! processed in order of increasing fill, which keeps the factors nearly
//! triangular for the slack-heavy bases the simplex produces.

use crate::error::{Error, Result};

/// Column-major sparse matrix used to describe a basis.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }
}

/// One product-form update: basis position and the transformed entering
/// column `d = B^{-1} a_e`.
struct Eta {
    pos: usize,
    diag: f64,
    /// Off-position entries of `d`.
    entries: Vec<(usize, f64)>,
}

/// LU factors plus the eta file accumulated since the last refactorization.
pub struct BasisFactors {
    n: usize,
    /// For elimination step k: strictly-lower column entries `(row, value)`.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// For step k: strictly-upper entries `(step, value)` of U's column k.
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    /// Pivot row (original id) of each step.
    pivot_row: Vec<usize>,
    /// Step at which each original row was pivoted.
    step_of_row: Vec<usize>,
    /// Basis position handled at each step.
    pos_of_step: Vec<usize>,
    etas: Vec<Eta>,
}

impl BasisFactors {
    /// Factorize the basis matrix. Fails on a numerically singular basis.
    pub fn factorize(basis: &CscMatrix) -> Result<Self> {
        let n = basis.n;
        // Process sparsest columns first.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&j| (basis.col_ptr[j + 1] - basis.col_ptr[j], j));

        let mut l_cols = vec![Vec::new(); n];
        let mut u_cols = vec![Vec::new(); n];
        let mut u_diag = vec![0.0; n];
        let mut pivot_row = vec![usize::MAX; n];
        let mut step_of_row = vec![usize::MAX; n];
        let mut pos_of_step = vec![usize::MAX; n];

        // Dense workspace over original row ids.
        let mut work = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::with_capacity(64);

        for (step, &col) in order.iter().enumerate() {
            let (rows, vals) = basis.col(col);
            let mut col_norm = 0.0f64;
            for (&r, &v) in rows.iter().zip(vals) {
                work[r] = v;
                touched.push(r);
                col_norm = col_norm.max(v.abs());
            }
            // Eliminate against all earlier steps in order; only steps whose
            // pivot row currently holds a nonzero do real work.
            let mut upper: Vec<(usize, f64)> = Vec::new();
            for k in 0..step {
                let pr = pivot_row[k];
                let y = work[pr];
                if y == 0.0 {
                    continue;
                }
                upper.push((k, y));
                work[pr] = 0.0;
                for &(r, lv) in &l_cols[k] {
                    if work[r] == 0.0 && lv != 0.0 {
                        touched.push(r);
                    }
                    work[r] -= y * lv;
                }
            }
            // Pivot: the largest remaining entry among unpivoted rows, ties
            // broken by the smallest row id.
            let mut best_row = usize::MAX;
            let mut best_val = 0.0f64;
            for &r in &touched {
                if step_of_row[r] != usize::MAX {
                    continue;
                }
                let a = work[r].abs();
                if a > best_val || (a > 0.0 && a == best_val && r < best_row) {
                    best_val = a;
                    best_row = r;
                }
            }
            if best_row == usize::MAX || best_val < 1e-11 * col_norm.max(1e-30) {
                return Err(Error::Numeric(format!(
                    "singular basis at elimination step {step} (column {col})"
                )));
            }
            let piv = work[best_row];
            let mut l_entries = Vec::new();
            for &r in &touched {
                let v = work[r];
                work[r] = 0.0;
                if r == best_row || v == 0.0 || step_of_row[r] != usize::MAX {
                    continue;
                }
                l_entries.push((r, v / piv));
            }
            touched.clear();
            l_cols[step] = l_entries;
            u_cols[step] = upper;
            u_diag[step] = piv;
            pivot_row[step] = best_row;
            step_of_row[best_row] = step;
            pos_of_step[step] = col;
        }

        Ok(BasisFactors {
            n,
            l_cols,
            u_cols,
            u_diag,
            pivot_row,
            step_of_row,
            pos_of_step,
            etas: Vec::new(),
        })
    }

    pub fn eta_count(&self) -> usize {
        self.etas.len()
    }

    /// Record a basis change: position `pos` is replaced by a column whose
    /// FTRAN image is `d` (dense, by basis position).
    pub fn push_eta(&mut self, pos: usize, d: &[f64]) -> Result<()> {
        let diag = d[pos];
        if diag.abs() < 1e-12 {
            return Err(Error::Numeric(format!(
                "eta pivot too small at position {pos}: {diag}"
            )));
        }
        let entries: Vec<(usize, f64)> = d
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta { pos, diag, entries });
        Ok(())
    }

    /// Solve `B x = rhs`. Input is indexed by constraint row, output by basis
    /// position.
    pub fn ftran(&self, rhs: &[f64], out: &mut Vec<f64>) {
        let n = self.n;
        // Forward: L y = P rhs, in step space.
        let mut work = rhs.to_vec();
        let mut y = vec![0.0f64; n];
        for k in 0..n {
            let v = work[self.pivot_row[k]];
            y[k] = v;
            if v != 0.0 {
                for &(r, lv) in &self.l_cols[k] {
                    work[r] -= lv * v;
                }
            }
        }
        // Backward: U xt = y, in step space.
        for k in (0..n).rev() {
            let xk = y[k] / self.u_diag[k];
            y[k] = xk;
            if xk != 0.0 {
                for &(i, uv) in &self.u_cols[k] {
                    y[i] -= uv * xk;
                }
            }
        }
        // Back to basis positions.
        out.clear();
        out.resize(n, 0.0);
        for k in 0..n {
            out[self.pos_of_step[k]] = y[k];
        }
        // Apply the eta file in chronological order.
        for eta in &self.etas {
            let xq = out[eta.pos] / eta.diag;
            out[eta.pos] = xq;
            if xq != 0.0 {
                for &(i, v) in &eta.entries {
                    out[i] -= v * xq;
                }
            }
        }
    }

    /// Solve `B^T y = c`. Input is indexed by basis position, output by
    /// constraint row.
    pub fn btran(&self, c: &[f64], out: &mut Vec<f64>) {
        let n = self.n;
        let mut cw = c.to_vec();
        // Eta transposes in reverse chronological order.
        for eta in self.etas.iter().rev() {
            let mut s = 0.0;
            for &(i, v) in &eta.entries {
                s += v * cw[i];
            }
            cw[eta.pos] = (cw[eta.pos] - s) / eta.diag;
        }
        // U^T v = c (step space, forward).
        let mut v = vec![0.0f64; n];
        for k in 0..n {
            let mut s = cw[self.pos_of_step[k]];
            for &(i, uv) in &self.u_cols[k] {
                s -= uv * v[i];
            }
            v[k] = s / self.u_diag[k];
        }
        // L^T w = v (backward).
        for k in (0..n).rev() {
            let mut s = v[k];
            for &(r, lv) in &self.l_cols[k] {
                s -= lv * v[self.step_of_row[r]];
            }
            v[k] = s;
        }
        out.clear();
        out.resize(n, 0.0);
        for k in 0..n {
            out[self.pivot_row[k]] = v[k];
        }
    }
}
