//! Bounded-variable two-phase revised simplex with sparse LU basis factors,
//! geometric-mean equilibration, Dantzig pricing and a Bland's-rule fallback
//! once a degeneracy streak is detected.
//!
//! Deterministic by construction: fixed iteration orders, index tie-breaks,
//! no randomization.

use super::lu::{BasisFactors, CscMatrix};
use super::{LinearProgram, LpSolution, LpStatus, Relation, SolverOptions};
use crate::error::{Error, Result};

const TOL_DUAL: f64 = 1e-9;
const TOL_PIV: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    FreeZero,
}

struct Worker<'a> {
    lp: &'a LinearProgram,
    opts: &'a SolverOptions,
    m: usize,
    n_struct: usize,
    n_total: usize,
    // Column-major scaled constraint matrix over structurals, slacks and
    // artificials.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    phase2_cost: Vec<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    x_basic: Vec<f64>,
    factors: Option<BasisFactors>,
    iterations: usize,
    bland: bool,
    degen_streak: usize,
    // Scratch buffers.
    buf_y: Vec<f64>,
    buf_d: Vec<f64>,
    buf_rhs: Vec<f64>,
    buf_cb: Vec<f64>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Round to the nearest power of two; keeps the equilibration exactly
/// invertible.
fn pow2_round(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return 1.0;
    }
    (2.0f64).powi(x.log2().round() as i32)
}

/// Basis snapshot for warm starts. Valid for a later instance with the same
/// structural variables whose rows extend the snapshot's rows in place.
#[derive(Debug, Clone)]
pub struct WarmStart {
    n_struct: usize,
    n_rows: usize,
    /// Per old row position: the occupying basic variable, encoded as
    /// `(kind, index)` with kind 0 = structural, 1 = slack, 2 = artificial.
    basis: Vec<(u8, usize)>,
    /// Nonbasic structural states: 0 lower, 1 upper, 2 free-zero, 3 basic.
    struct_state: Vec<u8>,
    /// Nonbasic slack states, same encoding.
    slack_state: Vec<u8>,
}

pub fn solve(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    Ok(solve_warm(lp, opts, None)?.0)
}

pub fn solve_warm(
    lp: &LinearProgram,
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
) -> Result<(LpSolution, WarmStart)> {
    let attempt = solve_attempt(lp, opts, warm)?;
    // A warm start can inherit a vertex whose residuals fail the optimality
    // gate; a cold solve settles it.
    if warm.is_some() && attempt.0.status == LpStatus::Numerical {
        return solve_attempt(lp, opts, None);
    }
    Ok(attempt)
}

fn solve_attempt(
    lp: &LinearProgram,
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
) -> Result<(LpSolution, WarmStart)> {
    let mut w = Worker::build(lp, opts);
    let warm = warm.filter(|ws| {
        ws.n_struct == w.n_struct
            && ws.n_rows <= w.m
            && ws.struct_state.len() == w.n_struct
    });
    match warm {
        Some(ws) => w.init_basis_warm(ws)?,
        None => w.init_basis()?,
    }
    // Phase 1: drive the artificial variables to zero.
    w.cost = vec![0.0; w.n_total];
    for i in 0..w.m {
        let a = w.n_struct + w.m + i;
        w.cost[a] = if w.lower[a] == 0.0 { 1.0 } else { -1.0 };
    }
    match w.run_phase(true)? {
        PhaseEnd::Unbounded => {
            return Err(Error::Numeric(
                "phase-1 objective is bounded by construction; unbounded ray means breakdown"
                    .into(),
            ))
        }
        PhaseEnd::IterationLimit => {
            let snap = w.snapshot();
            return Ok((w.finish(LpStatus::IterationLimit), snap));
        }
        PhaseEnd::Optimal => {}
    }
    let infeas: f64 = (0..w.m)
        .map(|i| w.var_value(w.n_struct + w.m + i).abs())
        .sum();
    let b_scale = 1.0 + w.b.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if infeas > 1e-7 * b_scale {
        let snap = w.snapshot();
        return Ok((w.finish(LpStatus::Infeasible), snap));
    }
    // Phase 2: fix artificials at zero and restore the true costs.
    for i in 0..w.m {
        let a = w.n_struct + w.m + i;
        w.lower[a] = 0.0;
        w.upper[a] = 0.0;
        if let VarState::AtUpper = w.state[a] {
            w.state[a] = VarState::AtLower;
        }
    }
    w.cost = w.phase2_cost.clone();
    let status = match w.run_phase(false)? {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::IterationLimit => LpStatus::IterationLimit,
    };
    if status == LpStatus::Optimal {
        // Fresh factorization purges eta-file drift before extraction.
        w.refactor()?;
    }
    let snap = w.snapshot();
    Ok((w.finish(status), snap))
}

impl<'a> Worker<'a> {
    fn build(lp: &'a LinearProgram, opts: &'a SolverOptions) -> Self {
        let m = lp.num_rows();
        let n_struct = lp.num_vars();
        let n_total = n_struct + 2 * m;

        // Geometric-mean equilibration over the structural coefficients,
        // scales rounded to powers of two.
        let mut row_scale = vec![1.0f64; m];
        let mut col_scale = vec![1.0f64; n_struct];
        if opts.scale {
            for _ in 0..2 {
                for (i, row) in lp.rows.iter().enumerate() {
                    let mut lo = f64::INFINITY;
                    let mut hi = 0.0f64;
                    for &(j, v) in &row.coeffs {
                        let a = (v * row_scale[i] * col_scale[j]).abs();
                        if a > 0.0 {
                            lo = lo.min(a);
                            hi = hi.max(a);
                        }
                    }
                    if hi > 0.0 {
                        row_scale[i] *= pow2_round(1.0 / (lo * hi).sqrt());
                    }
                }
                let mut col_lo = vec![f64::INFINITY; n_struct];
                let mut col_hi = vec![0.0f64; n_struct];
                for (i, row) in lp.rows.iter().enumerate() {
                    for &(j, v) in &row.coeffs {
                        let a = (v * row_scale[i] * col_scale[j]).abs();
                        if a > 0.0 {
                            col_lo[j] = col_lo[j].min(a);
                            col_hi[j] = col_hi[j].max(a);
                        }
                    }
                }
                for j in 0..n_struct {
                    if col_hi[j] > 0.0 {
                        col_scale[j] *= pow2_round(1.0 / (col_lo[j] * col_hi[j]).sqrt());
                    }
                }
            }
        }

        // Column-major storage: structurals, then slacks, then artificials.
        let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                entries[j].push((i, v * row_scale[i] * col_scale[j]));
            }
        }
        let mut col_ptr = Vec::with_capacity(n_total + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for e in &entries {
            for &(i, v) in e {
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        for i in 0..m {
            // Slack column.
            row_idx.push(i);
            values.push(1.0);
            col_ptr.push(row_idx.len());
        }
        for i in 0..m {
            // Artificial column.
            row_idx.push(i);
            values.push(1.0);
            col_ptr.push(row_idx.len());
        }

        let mut lower = Vec::with_capacity(n_total);
        let mut upper = Vec::with_capacity(n_total);
        for j in 0..n_struct {
            lower.push(lp.lower[j] / col_scale[j]);
            upper.push(lp.upper[j] / col_scale[j]);
        }
        for row in &lp.rows {
            match row.relation {
                Relation::Le => {
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                }
                Relation::Ge => {
                    lower.push(f64::NEG_INFINITY);
                    upper.push(0.0);
                }
                Relation::Eq => {
                    lower.push(0.0);
                    upper.push(0.0);
                }
            }
        }
        // Artificial bounds are fixed once the initial residuals are known.
        for _ in 0..m {
            lower.push(0.0);
            upper.push(0.0);
        }

        let mut phase2_cost = vec![0.0f64; n_total];
        for j in 0..n_struct {
            phase2_cost[j] = lp.objective[j] * col_scale[j];
        }

        let b: Vec<f64> = lp
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.rhs * row_scale[i])
            .collect();

        Worker {
            lp,
            opts,
            m,
            n_struct,
            n_total,
            col_ptr,
            row_idx,
            values,
            lower,
            upper,
            cost: vec![0.0; n_total],
            phase2_cost,
            b,
            row_scale,
            col_scale,
            state: vec![VarState::AtLower; n_total],
            basis: Vec::new(),
            x_basic: Vec::new(),
            factors: None,
            iterations: 0,
            bland: false,
            degen_streak: 0,
            buf_y: Vec::new(),
            buf_d: Vec::new(),
            buf_rhs: Vec::new(),
            buf_cb: Vec::new(),
        }
    }

    fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    fn max_iterations(&self) -> usize {
        if self.opts.max_iterations > 0 {
            self.opts.max_iterations
        } else {
            20 * (self.m + self.n_struct) + 2000
        }
    }

    /// Nonbasic variables sit at a bound (or zero when free); basic ones in
    /// `x_basic`.
    fn var_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(pos) => self.x_basic[pos],
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::FreeZero => 0.0,
        }
    }

    /// Capture the basis and nonbasic states for a later warm start.
    fn snapshot(&self) -> WarmStart {
        let encode = |s: VarState| -> u8 {
            match s {
                VarState::AtLower => 0,
                VarState::AtUpper => 1,
                VarState::FreeZero => 2,
                VarState::Basic(_) => 3,
            }
        };
        let basis = self
            .basis
            .iter()
            .map(|&v| {
                if v < self.n_struct {
                    (0u8, v)
                } else if v < self.n_struct + self.m {
                    (1u8, v - self.n_struct)
                } else {
                    (2u8, v - self.n_struct - self.m)
                }
            })
            .collect();
        WarmStart {
            n_struct: self.n_struct,
            n_rows: self.m,
            basis,
            struct_state: (0..self.n_struct).map(|j| encode(self.state[j])).collect(),
            slack_state: (0..self.m)
                .map(|i| encode(self.state[self.n_struct + i]))
                .collect(),
        }
    }

    /// Advanced start: reuse a previous basis over the shared row prefix and
    /// cover appended rows with their artificials. The shared-row subsystem
    /// reproduces the previous basic values exactly, so the start is as
    /// feasible as the snapshot was; new-row artificials absorb the rest.
    fn init_basis_warm(&mut self, ws: &WarmStart) -> Result<()> {
        let decode = |code: u8, lo: f64, hi: f64| -> VarState {
            match code {
                0 if lo.is_finite() => VarState::AtLower,
                1 if hi.is_finite() => VarState::AtUpper,
                0 | 1 | 2 => VarState::FreeZero,
                _ => VarState::FreeZero,
            }
        };
        for j in 0..self.n_struct {
            if ws.struct_state[j] != 3 {
                self.state[j] = decode(ws.struct_state[j], self.lower[j], self.upper[j]);
            }
        }
        for i in 0..ws.n_rows {
            let s = self.n_struct + i;
            if ws.slack_state[i] != 3 {
                self.state[s] = decode(ws.slack_state[i], self.lower[s], self.upper[s]);
            }
        }
        // Appended rows start with nonbasic slacks at their bound.
        for i in ws.n_rows..self.m {
            let s = self.n_struct + i;
            self.state[s] = if self.upper[s] == 0.0 && self.lower[s] == f64::NEG_INFINITY {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
        }
        // Old artificials stay fixed at zero and nonbasic unless the snapshot
        // kept them basic.
        for i in 0..self.m {
            let a = self.n_struct + self.m + i;
            self.lower[a] = 0.0;
            self.upper[a] = 0.0;
            self.state[a] = VarState::AtLower;
        }
        self.basis = Vec::with_capacity(self.m);
        for (pos, &(kind, idx)) in ws.basis.iter().enumerate() {
            let var = match kind {
                0 => idx,
                1 => self.n_struct + idx,
                _ => self.n_struct + self.m + idx,
            };
            self.basis.push(var);
            self.state[var] = VarState::Basic(pos);
        }
        // Artificials cover the appended rows.
        for i in ws.n_rows..self.m {
            let a = self.n_struct + self.m + i;
            self.basis.push(a);
            self.state[a] = VarState::Basic(i);
        }
        // Factorize; a stale basis that went singular falls back cold.
        let mut rhs_ok = self.refactor().is_ok();
        if rhs_ok {
            // Set artificial bounds for appended rows from their computed
            // values so the start is feasible there.
            for i in ws.n_rows..self.m {
                let a = self.n_struct + self.m + i;
                let pos = match self.state[a] {
                    VarState::Basic(p) => p,
                    _ => continue,
                };
                if self.x_basic[pos] >= 0.0 {
                    self.lower[a] = 0.0;
                    self.upper[a] = f64::INFINITY;
                } else {
                    self.lower[a] = f64::NEG_INFINITY;
                    self.upper[a] = 0.0;
                }
            }
            // Any old basic variable outside its bounds invalidates the
            // warm start: phase 1 only repairs artificial variables, so
            // inherited violations would otherwise survive to the answer.
            for pos in 0..self.m {
                let v = self.basis[pos];
                let x = self.x_basic[pos];
                let tol = 1e-9 * (1.0 + x.abs());
                if x < self.lower[v] - tol || x > self.upper[v] + tol {
                    if v >= self.n_struct + self.m {
                        continue; // artificial absorbing a new row
                    }
                    rhs_ok = false;
                    break;
                }
            }
        }
        if !rhs_ok {
            return self.init_basis();
        }
        Ok(())
    }

    /// Start from the all-artificial identity basis; artificial bounds take
    /// the sign of the initial residual so the start is feasible.
    fn init_basis(&mut self) -> Result<()> {
        for j in 0..self.n_struct {
            self.state[j] = if self.lower[j].is_finite() {
                VarState::AtLower
            } else if self.upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeZero
            };
        }
        for i in 0..self.m {
            let s = self.n_struct + i;
            self.state[s] = VarState::AtLower; // slack bounds include zero on the proper side
            if self.upper[s] == 0.0 && self.lower[s] == f64::NEG_INFINITY {
                self.state[s] = VarState::AtUpper;
            }
        }
        // Residual of the nonbasic point.
        let mut resid = self.b.clone();
        for j in 0..self.n_struct + self.m {
            let v = self.var_value(j);
            if v != 0.0 {
                let (rows, vals) = self.col(j);
                for (&i, &a) in rows.iter().zip(vals) {
                    resid[i] -= a * v;
                }
            }
        }
        self.basis = Vec::with_capacity(self.m);
        self.x_basic = Vec::with_capacity(self.m);
        for i in 0..self.m {
            let a = self.n_struct + self.m + i;
            if resid[i] >= 0.0 {
                self.lower[a] = 0.0;
                self.upper[a] = f64::INFINITY;
            } else {
                self.lower[a] = f64::NEG_INFINITY;
                self.upper[a] = 0.0;
            }
            self.state[a] = VarState::Basic(i);
            self.basis.push(a);
            self.x_basic.push(resid[i]);
        }
        self.refactor()
    }

    fn refactor(&mut self) -> Result<()> {
        let mut col_ptr = Vec::with_capacity(self.m + 1);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        col_ptr.push(0);
        for &v in &self.basis {
            let (r, x) = self.col(v);
            rows.extend_from_slice(r);
            vals.extend_from_slice(x);
            col_ptr.push(rows.len());
        }
        let csc = CscMatrix {
            n: self.m,
            col_ptr,
            row_idx: rows,
            values: vals,
        };
        self.factors = Some(BasisFactors::factorize(&csc)?);
        // Recompute basic values from scratch to purge accumulated drift.
        let mut rhs = self.b.clone();
        for j in 0..self.n_total {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.var_value(j);
            if v != 0.0 {
                let (r, x) = self.col(j);
                for (&i, &a) in r.iter().zip(x) {
                    rhs[i] -= a * v;
                }
            }
        }
        let mut xb = Vec::new();
        self.factors.as_ref().unwrap().ftran(&rhs, &mut xb);
        self.x_basic = xb;
        Ok(())
    }

    /// One simplex phase with the current cost vector. Phase 1 terminates
    /// as soon as the infeasibility reaches zero; chasing dual feasibility
    /// of the artificial costs would only spin on degenerate pivots.
    fn run_phase(&mut self, phase1: bool) -> Result<PhaseEnd> {
        let max_iter = self.max_iterations();
        let b_scale = 1.0 + self.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        loop {
            if self.iterations >= max_iter {
                return Ok(PhaseEnd::IterationLimit);
            }
            if phase1 {
                let infeas: f64 = (0..self.m)
                    .map(|pos| {
                        let v = self.basis[pos];
                        if v >= self.n_struct + self.m {
                            self.x_basic[pos].abs()
                        } else {
                            0.0
                        }
                    })
                    .sum();
                if infeas <= 1e-10 * b_scale {
                    return Ok(PhaseEnd::Optimal);
                }
            }
            // Duals of the current basis.
            self.buf_cb.clear();
            for &v in &self.basis {
                self.buf_cb.push(self.cost[v]);
            }
            let factors = self.factors.as_ref().expect("factorized");
            let mut y = std::mem::take(&mut self.buf_y);
            factors.btran(&self.buf_cb, &mut y);

            // Pricing: most negative improvement (Dantzig) or first eligible
            // (Bland).
            let mut enter = usize::MAX;
            let mut enter_score = TOL_DUAL;
            let mut enter_dir = 1.0f64;
            for j in 0..self.n_total {
                let st = self.state[j];
                if matches!(st, VarState::Basic(_)) {
                    continue;
                }
                if self.upper[j] - self.lower[j] <= 0.0 {
                    continue; // fixed
                }
                let (rows, vals) = self.col(j);
                let mut d = self.cost[j];
                for (&i, &a) in rows.iter().zip(vals) {
                    d -= y[i] * a;
                }
                let (eligible, dir) = match st {
                    VarState::AtLower => (d < -TOL_DUAL, 1.0),
                    VarState::AtUpper => (d > TOL_DUAL, -1.0),
                    VarState::FreeZero => (d.abs() > TOL_DUAL, -d.signum()),
                    VarState::Basic(_) => unreachable!(),
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    enter = j;
                    enter_dir = dir;
                    break;
                }
                if d.abs() > enter_score {
                    enter_score = d.abs();
                    enter = j;
                    enter_dir = dir;
                }
            }
            self.buf_y = y;
            if enter == usize::MAX {
                return Ok(PhaseEnd::Optimal);
            }

            // Direction through the basis.
            let mut rhs = std::mem::take(&mut self.buf_rhs);
            rhs.clear();
            rhs.resize(self.m, 0.0);
            {
                let (rows, vals) = self.col(enter);
                for (&i, &a) in rows.iter().zip(vals) {
                    rhs[i] = a;
                }
            }
            self.buf_rhs = rhs;
            let factors = self.factors.as_ref().expect("factorized");
            let mut d = std::mem::take(&mut self.buf_d);
            factors.ftran(&self.buf_rhs, &mut d);

            // Harris two-pass ratio test: pass one finds the relaxed step
            // limit allowing a small bound slack, pass two picks the largest
            // pivot among the blockers within the limit. Avoids the tiny
            // pivots that degrade the basis factors.
            let own_range = self.upper[enter] - self.lower[enter];
            const FEAS_SLACK: f64 = 1e-12;
            let exact_ratio = |pos: usize,
                               delta: f64,
                               basis: &[usize],
                               x_basic: &[f64],
                               lower: &[f64],
                               upper: &[f64]|
             -> Option<f64> {
                if delta > TOL_PIV {
                    let u = upper[basis[pos]];
                    u.is_finite()
                        .then(|| ((u - x_basic[pos]).max(0.0)) / delta)
                } else if delta < -TOL_PIV {
                    let l = lower[basis[pos]];
                    l.is_finite()
                        .then(|| ((x_basic[pos] - l).max(0.0)) / (-delta))
                } else {
                    None
                }
            };
            let mut t_limit = f64::INFINITY;
            for pos in 0..self.m {
                let delta = -enter_dir * d[pos];
                if delta > TOL_PIV {
                    let u = self.upper[self.basis[pos]];
                    if u.is_finite() {
                        let relaxed = ((u - self.x_basic[pos]).max(0.0) + FEAS_SLACK) / delta;
                        t_limit = t_limit.min(relaxed);
                    }
                } else if delta < -TOL_PIV {
                    let l = self.lower[self.basis[pos]];
                    if l.is_finite() {
                        let relaxed = ((self.x_basic[pos] - l).max(0.0) + FEAS_SLACK) / (-delta);
                        t_limit = t_limit.min(relaxed);
                    }
                }
            }
            let mut leave_pos = usize::MAX;
            let mut leave_piv = 0.0f64;
            let mut t_min = f64::INFINITY;
            if t_limit.is_finite() {
                for pos in 0..self.m {
                    let delta = -enter_dir * d[pos];
                    let t = match exact_ratio(
                        pos,
                        delta,
                        &self.basis,
                        &self.x_basic,
                        &self.lower,
                        &self.upper,
                    ) {
                        Some(t) => t,
                        None => continue,
                    };
                    if t > t_limit {
                        continue;
                    }
                    let piv = d[pos].abs();
                    if leave_pos == usize::MAX
                        || piv > leave_piv
                        || (piv == leave_piv && self.basis[pos] < self.basis[leave_pos])
                    {
                        leave_pos = pos;
                        leave_piv = piv;
                        t_min = t;
                    }
                }
            }

            let t_flip = if own_range.is_finite() { own_range } else { f64::INFINITY };
            if t_flip.is_infinite() && leave_pos == usize::MAX {
                self.buf_d = d;
                return Ok(PhaseEnd::Unbounded);
            }

            let step = t_min.min(t_flip);
            // Track degeneracy for the Bland fallback.
            if step > 1e-10 {
                self.degen_streak = 0;
                self.bland = false;
            } else {
                self.degen_streak += 1;
                if self.degen_streak > self.opts.degeneracy_threshold {
                    self.bland = true;
                }
            }

            if t_flip <= t_min {
                // Bound flip: the entering variable crosses to its other
                // bound without a basis change.
                for pos in 0..self.m {
                    if d[pos] != 0.0 {
                        self.x_basic[pos] -= enter_dir * t_flip * d[pos];
                    }
                }
                self.state[enter] = match self.state[enter] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    s => s,
                };
                self.iterations += 1;
                self.buf_d = d;
                continue;
            }

            let leave_var = self.basis[leave_pos];
            let enter_val = self.var_value(enter) + enter_dir * step;
            for pos in 0..self.m {
                if d[pos] != 0.0 {
                    self.x_basic[pos] -= enter_dir * step * d[pos];
                }
            }
            // The leaving variable lands on the bound that blocked.
            let delta_leave = -enter_dir * d[leave_pos];
            self.state[leave_var] = if delta_leave > 0.0 {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            self.basis[leave_pos] = enter;
            self.state[enter] = VarState::Basic(leave_pos);
            self.x_basic[leave_pos] = enter_val;
            self.iterations += 1;

            let need_refactor = {
                let f = self.factors.as_mut().expect("factorized");
                f.push_eta(leave_pos, &d).is_err() || f.eta_count() >= self.opts.refactor_every
            };
            self.buf_d = d;
            if need_refactor {
                self.refactor()?;
            }
        }
    }

    /// Unscale, compute duals and residual diagnostics, and package the
    /// outcome.
    fn finish(mut self, status: LpStatus) -> LpSolution {
        let n = self.n_struct;
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[j] = self.var_value(j) * self.col_scale[j];
        }
        // Duals from the final basis under phase-2 costs.
        self.buf_cb.clear();
        for &v in &self.basis {
            self.buf_cb.push(self.phase2_cost[v]);
        }
        let mut y_scaled = Vec::new();
        if let Some(f) = self.factors.as_ref() {
            f.btran(&self.buf_cb, &mut y_scaled);
        } else {
            y_scaled = vec![0.0; self.m];
        }
        let duals: Vec<f64> = (0..self.m)
            .map(|i| y_scaled[i] * self.row_scale[i])
            .collect();

        let objective = self.lp.objective_value(&x);

        // Residuals in the original space.
        let mut max_primal = 0.0f64;
        let mut compl = 0.0f64;
        for (i, row) in self.lp.rows.iter().enumerate() {
            let ax: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            let scale = 1.0 + row.rhs.abs() + ax.abs();
            let viol = match row.relation {
                Relation::Le => (ax - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - ax).max(0.0),
                Relation::Eq => (ax - row.rhs).abs(),
            };
            max_primal = max_primal.max(viol / scale);
            if !matches!(row.relation, Relation::Eq) {
                compl = compl.max((duals[i] * (ax - row.rhs)).abs() / scale);
            }
        }
        // Variable bounds and reduced-cost conditions. Reduced costs in the
        // original units, accumulated in one pass over the rows.
        let mut reduced = self.lp.objective.clone();
        for (i, row) in self.lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                reduced[j] -= duals[i] * v;
            }
        }
        let mut max_dual = 0.0f64;
        for j in 0..n {
            let d = reduced[j];
            let lo = self.lp.lower[j];
            let hi = self.lp.upper[j];
            let v = x[j];
            max_primal = max_primal.max((lo - v).max(0.0) / (1.0 + v.abs()));
            max_primal = max_primal.max((v - hi).max(0.0) / (1.0 + v.abs()));
            let dist_lo = if lo.is_finite() { v - lo } else { f64::INFINITY };
            let dist_hi = if hi.is_finite() { hi - v } else { f64::INFINITY };
            let at_lo = dist_lo.abs() <= 1e-7 * (1.0 + v.abs());
            let at_hi = dist_hi.abs() <= 1e-7 * (1.0 + v.abs());
            if at_lo && d >= 0.0 || at_hi && d <= 0.0 {
                // Correct sign.
            } else if at_lo || at_hi {
                max_dual = max_dual.max(d.abs());
            } else {
                max_dual = max_dual.max(d.abs());
                let dist = dist_lo.min(dist_hi);
                if dist.is_finite() {
                    compl = compl.max((d * dist).abs() / (1.0 + v.abs()));
                }
            }
        }
        // Row duals of inequality rows must carry the convention sign.
        for (i, row) in self.lp.rows.iter().enumerate() {
            match row.relation {
                Relation::Ge => max_dual = max_dual.max((-duals[i]).max(0.0)),
                Relation::Le => max_dual = max_dual.max(duals[i].max(0.0)),
                Relation::Eq => {}
            }
        }

        let status = if status == LpStatus::Optimal
            && (max_primal > 1e-7 || compl > 1e-6)
        {
            if std::env::var("MDTAX_SIMPLEX_DEBUG").is_ok() {
                for (i, row) in self.lp.rows.iter().enumerate() {
                    let ax: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
                    let scale = 1.0 + row.rhs.abs() + ax.abs();
                    let viol = match row.relation {
                        Relation::Le => (ax - row.rhs).max(0.0),
                        Relation::Ge => (row.rhs - ax).max(0.0),
                        Relation::Eq => (ax - row.rhs).abs(),
                    } / scale;
                    if viol > 5e-8 {
                        eprintln!("VIOL row {i} {}: {viol:.4e} (ax {ax:.12e} rhs {:.12e})", row.name, row.rhs);
                    }
                }
                for j in 0..n {
                    let v = x[j];
                    let bl = (self.lp.lower[j] - v).max(0.0) / (1.0 + v.abs());
                    let bu = (v - self.lp.upper[j]).max(0.0) / (1.0 + v.abs());
                    if bl.max(bu) > 5e-8 {
                        eprintln!("VIOL bound {} = {v:.10e} not in [{:.6e}, {:.6e}]", self.lp.var_names[j], self.lp.lower[j], self.lp.upper[j]);
                    }
                }
            }
            LpStatus::Numerical
        } else {
            status
        };

        LpSolution {
            status,
            x,
            duals,
            objective,
            max_primal_residual: max_primal,
            max_dual_residual: max_dual,
            complementarity: compl,
            iterations: self.iterations,
        }
    }
}
