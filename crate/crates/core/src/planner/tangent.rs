//! Families of tangent lines under-approximating a convex cost on an
//! interval to a requested precision.

use crate::cost::CostFn;
use crate::error::{Error, Result};

/// Tangent lines `t -> slope * t - intercept` of a convex cost, covering an
/// interval so that the cost exceeds the upper envelope of the lines by at
/// most `achieved_eps` everywhere on it.
#[derive(Debug, Clone)]
pub struct TangentFamily {
    pub cost: CostFn,
    /// Slopes, ascending (tangency points ascending).
    pub slopes: Vec<f64>,
    /// Conjugate values; line i is `slopes[i] * t - intercepts[i]`.
    pub intercepts: Vec<f64>,
    /// Tangency points, ascending.
    pub tangency: Vec<f64>,
    /// Envelope breakpoints between consecutive lines (length `len - 1`).
    breakpoints: Vec<f64>,
    pub interval: (f64, f64),
    pub achieved_eps: f64,
}

impl TangentFamily {
    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    pub fn line(&self, i: usize, t: f64) -> f64 {
        self.slopes[i] * t - self.intercepts[i]
    }

    /// Index of the line attaining the envelope at `t` (binary search over
    /// the breakpoints).
    pub fn best_index(&self, t: f64) -> usize {
        let mut lo = 0usize;
        let mut hi = self.breakpoints.len(); // == len - 1
        while lo < hi {
            let mid = (lo + hi) / 2;
            if t > self.breakpoints[mid] {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Envelope value at `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.line(self.best_index(t), t)
    }

    /// Gap `cost(t) - envelope(t)`; nonnegative up to roundoff.
    pub fn gap(&self, t: f64) -> f64 {
        self.cost.value(t) - self.envelope(t)
    }
}

/// Maximum of a unimodal function by golden-section search.
fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

impl TangentFamily {
    /// Family made of explicit tangency points (sorted ascending); the
    /// achieved precision is measured, not requested.
    pub fn from_tangencies(cost: CostFn, tangency: Vec<f64>, interval: (f64, f64)) -> Result<Self> {
        if tangency.is_empty() {
            return Err(Error::Argument("a tangent family needs at least one line".into()));
        }
        if tangency.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument("tangency points must be strictly increasing".into()));
        }
        let fam = finish_family(cost, tangency, interval, 0.0, false);
        let (_, worst, _) = worst_gap(&fam, interval.0);
        Ok(finish_family(
            cost,
            fam.tangency,
            interval,
            worst.max(0.0),
            true,
        ))
    }

    /// Single-tangent family.
    pub fn single(cost: CostFn, tangency: f64, interval: (f64, f64)) -> Result<Self> {
        Self::from_tangencies(cost, vec![tangency], interval)
    }
}

/// Default cap on family size.
pub const TANGENT_CAP: usize = 10_000;

/// Greedy tangent cover of `cost` on `[lo, hi]`: start from the endpoint
/// tangencies and recursively insert the tangency point where the envelope
/// gap is largest until the gap is at most `eps` everywhere.
pub fn build_tangents(cost: CostFn, interval: (f64, f64), eps: f64) -> Result<TangentFamily> {
    build_tangents_capped(cost, interval, eps, TANGENT_CAP)
}

pub fn build_tangents_capped(
    cost: CostFn,
    (lo, hi): (f64, f64),
    eps: f64,
    cap: usize,
) -> Result<TangentFamily> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Argument(format!(
            "tangent interval must be finite with lo < hi, got [{lo}, {hi}]"
        )));
    }
    if lo < cost.domain_lo() {
        return Err(Error::Argument(format!(
            "interval start {lo} is below the cost domain"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }

    if cost.is_linear() {
        // A single tangent is exact everywhere.
        return Ok(finish_family(cost, vec![0.5 * (lo + hi)], (lo, hi), 0.0, true));
    }

    // The task cost has an infinite derivative at zero, so the left endpoint
    // cannot carry a tangency when lo sits on the domain edge.
    let left_ok = lo > cost.domain_lo() || cost.deriv(lo).is_finite();
    let mut tangency: Vec<f64> = Vec::new();
    if left_ok {
        tangency.push(lo);
    } else {
        tangency.push(left_seed(cost, lo, hi, eps));
    }
    if *tangency.last().unwrap() < hi {
        tangency.push(hi);
    }

    loop {
        if tangency.len() > cap {
            return Err(Error::Resource(format!(
                "tangent family exceeded the cap of {cap} lines at eps = {eps:e}"
            )));
        }
        let fam = finish_family(cost, tangency.clone(), (lo, hi), 0.0, false);
        // Locate the worst gap across the subintervals.
        let (worst_t, worst_gap, left_edge) = worst_gap(&fam, lo);
        if worst_gap <= eps {
            return Ok(finish_family(cost, tangency, (lo, hi), worst_gap.max(0.0), true));
        }
        if left_edge && !left_ok {
            // The gap peaks at the un-tangentable domain edge; move a new
            // tangency close enough that the edge gap falls under eps.
            let first = tangency[0];
            let t_new = bisect_left_cover(cost, lo, first, 0.9 * eps);
            tangency.insert(0, t_new);
        } else {
            let pos = tangency.partition_point(|&a| a < worst_t);
            if pos < tangency.len() && (tangency[pos] - worst_t).abs() <= 0.0 {
                return Err(Error::Numeric(format!(
                    "tangent refinement stalled at t = {worst_t}"
                )));
            }
            tangency.insert(pos, worst_t);
        }
    }
}

/// Seed tangency for a domain-edge interval start: the point whose tangent
/// keeps the gap at `lo` within eps/2.
fn left_seed(cost: CostFn, lo: f64, hi: f64, eps: f64) -> f64 {
    bisect_left_cover(cost, lo, hi, 0.5 * eps).min(0.5 * (lo + hi))
}

/// Largest tangency point `t` in `(lo, limit)` whose tangent keeps
/// `cost(lo) - line(lo)` at most `target`; found by bisection (the edge gap
/// grows with the tangency point).
fn bisect_left_cover(cost: CostFn, lo: f64, limit: f64, target: f64) -> f64 {
    let edge_gap = |t: f64| cost.value(lo) - (cost.value(t) + (lo - t) * cost.deriv(t));
    let mut b = limit;
    // Start just above the edge, where the gap is necessarily tiny.
    let mut probe = (limit - lo) * 1e-12 + lo;
    while edge_gap(probe) > target && probe > lo + 1e-300 {
        probe = lo + (probe - lo) * 1e-3;
    }
    let mut a = probe.max(lo + 1e-300);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if edge_gap(mid) > target {
            b = mid;
        } else {
            a = mid;
        }
        if (b - a) <= 1e-14 * (1.0 + b.abs()) {
            break;
        }
    }
    a
}

/// Worst envelope gap over the interval: checks the edge segments and every
/// pair of consecutive tangents (unimodal gap, golden-section). Returns
/// `(location, gap, at_left_edge)`.
fn worst_gap(fam: &TangentFamily, lo: f64) -> (f64, f64, bool) {
    let mut best_t = lo;
    let mut best_gap = f64::NEG_INFINITY;
    let mut at_edge = false;
    // Left edge: the gap against the first line decreases toward the first
    // tangency, so the edge itself is the candidate.
    if fam.tangency[0] > lo {
        let g = fam.cost.value(lo) - fam.line(0, lo);
        if g > best_gap {
            best_gap = g;
            best_t = lo;
            at_edge = true;
        }
    }
    // Right edge, symmetric.
    let hi = fam.interval.1;
    if *fam.tangency.last().unwrap() < hi {
        let last = fam.len() - 1;
        let g = fam.cost.value(hi) - fam.line(last, hi);
        if g > best_gap {
            best_gap = g;
            best_t = hi;
            at_edge = false;
        }
    }
    for i in 0..fam.len().saturating_sub(1) {
        let (a, b) = (fam.tangency[i], fam.tangency[i + 1]);
        if b - a <= 1e-14 * (1.0 + b.abs()) {
            continue;
        }
        let f = |t: f64| fam.cost.value(t) - fam.line(i, t).max(fam.line(i + 1, t));
        let (t, g) = golden_max(a, b, f);
        if g > best_gap {
            best_gap = g;
            best_t = t;
            at_edge = false;
        }
    }
    (best_t, best_gap, at_edge)
}

fn finish_family(
    cost: CostFn,
    tangency: Vec<f64>,
    interval: (f64, f64),
    achieved: f64,
    verify: bool,
) -> TangentFamily {
    let slopes: Vec<f64> = tangency.iter().map(|&t| cost.deriv(t)).collect();
    let intercepts: Vec<f64> = tangency.iter().map(|&t| cost.conjugate_at(t)).collect();
    let mut breakpoints = Vec::with_capacity(slopes.len().saturating_sub(1));
    for i in 0..slopes.len().saturating_sub(1) {
        let ds = slopes[i + 1] - slopes[i];
        let bp = if ds.abs() > 0.0 {
            (intercepts[i + 1] - intercepts[i]) / ds
        } else {
            tangency[i]
        };
        breakpoints.push(bp);
    }
    let fam = TangentFamily {
        cost,
        slopes,
        intercepts,
        tangency,
        breakpoints,
        interval,
        achieved_eps: achieved,
    };
    if verify {
        debug_assert!(fam.slopes.windows(2).all(|w| w[0] <= w[1]));
    }
    fam
}
