//! Convex resource-cost functions, their derivatives and Legendre conjugates.
//!
//! The planner's objective is assembled from two kinds of costs: the cost of
//! providing consumption utility (increasing convex; the identity under
//! linear consumption preferences) and the cost of providing task disutility
//! `X(x) = -x^(2/rho)/2` (strictly decreasing, strictly convex for rho > 2).

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// A scalar convex cost with an evaluable derivative and conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFn {
    /// `C(t) = t`, the resource cost of consumption utility under linear
    /// consumption preferences.
    Linear,
    /// `C(t) = t^gamma` on `t >= 0` with `gamma > 1`; the cost of consumption
    /// utility when `u(c) = c^(1/gamma)`.
    Power { gamma: f64 },
    /// `X(t) = -t^(2/rho) / 2` on `t >= 0`; the cost of task disutility.
    Task { rho: f64 },
}

impl CostFn {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            CostFn::Linear => t,
            CostFn::Power { gamma } => t.powf(gamma),
            CostFn::Task { rho } => -0.5 * t.powf(2.0 / rho),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            CostFn::Linear => 1.0,
            CostFn::Power { gamma } => gamma * t.powf(gamma - 1.0),
            CostFn::Task { rho } => -(1.0 / rho) * t.powf(2.0 / rho - 1.0),
        }
    }

    /// `t * deriv(t)` evaluated without the 0 * inf indeterminacy at t = 0.
    pub fn deriv_times_t(&self, t: f64) -> f64 {
        match *self {
            CostFn::Linear => t,
            CostFn::Power { gamma } => gamma * t.powf(gamma),
            CostFn::Task { rho } => -(1.0 / rho) * t.powf(2.0 / rho),
        }
    }

    /// Tangency point whose tangent has the given slope.
    pub fn deriv_inv(&self, slope: f64) -> Result<f64> {
        match *self {
            CostFn::Linear => Err(Error::Domain(
                "a linear cost has a single slope; tangency point is arbitrary".into(),
            )),
            CostFn::Power { gamma } => {
                if !(slope > 0.0) {
                    return Err(Error::Domain(format!(
                        "power-cost slope must be positive, got {slope}"
                    )));
                }
                Ok((slope / gamma).powf(1.0 / (gamma - 1.0)))
            }
            CostFn::Task { rho } => {
                if !(slope < 0.0) {
                    return Err(Error::Domain(format!(
                        "task-cost slope must be negative, got {slope}"
                    )));
                }
                // slope = -(1/rho) t^(2/rho - 1)  =>  t = (-rho slope)^(rho/(2-rho))
                Ok((-rho * slope).powf(rho / (2.0 - rho)))
            }
        }
    }

    /// Legendre conjugate evaluated at a slope: `f*(s) = -f(a) + a s` with `a`
    /// the tangency point of slope `s`.
    pub fn conjugate(&self, slope: f64) -> Result<f64> {
        match *self {
            CostFn::Linear => {
                if (slope - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "linear cost only supports slope 1, got {slope}"
                    )));
                }
                Ok(0.0)
            }
            _ => {
                let a = self.deriv_inv(slope)?;
                Ok(-self.value(a) + a * slope)
            }
        }
    }

    /// Conjugate via a tangency point rather than a slope.
    pub fn conjugate_at(&self, a: f64) -> f64 {
        match *self {
            CostFn::Linear => 0.0,
            _ => -self.value(a) + a * self.deriv(a),
        }
    }

    /// Whether the curvature vanishes identically, making a single tangent
    /// exact on any interval.
    pub fn is_linear(&self) -> bool {
        matches!(self, CostFn::Linear)
    }

    /// Lower end of the domain.
    pub fn domain_lo(&self) -> f64 {
        match self {
            CostFn::Linear => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    /// Sign restriction on tangent slopes: +1 (nonnegative), -1 (nonpositive).
    pub fn slope_sign(&self) -> f64 {
        match self {
            CostFn::Task { .. } => -1.0,
            _ => 1.0,
        }
    }
}

/// The pair of cost functions used by the planner.
#[derive(Debug, Clone, Copy)]
pub struct CostFunctions {
    pub consumption: CostFn,
    pub task: CostFn,
}

impl CostFunctions {
    /// Linear consumption preferences (the calibration) with the task cost
    /// implied by `rho`.
    pub fn linear_consumption(params: &ModelParams) -> Self {
        CostFunctions {
            consumption: CostFn::Linear,
            task: CostFn::Task { rho: params.rho },
        }
    }
}

/// Resource cost of task disutility, `-(x^(2/rho))/2`.
///
/// When the argument is a physical task level raised to the power rho, this
/// equals `-(x_phys^2)/2`.
pub fn task_cost(x_util: f64, params: &ModelParams) -> Result<f64> {
    if !(x_util >= 0.0) || !x_util.is_finite() {
        return Err(Error::Domain(format!(
            "task disutility must be >= 0, got {x_util}"
        )));
    }
    Ok(CostFn::Task { rho: params.rho }.value(x_util))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::calibrated()
    }

    #[test]
    fn task_cost_examples() {
        let p = params();
        assert!((task_cost(1.0, &p).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(task_cost(0.0, &p).unwrap(), 0.0);
        // Physical level 1.35: cost of 1.35^rho utils is -(1.35^2)/2.
        let x_util = 1.35f64.powf(2.8);
        let got = task_cost(x_util, &p).unwrap();
        assert!((got - (-0.5 * 1.35 * 1.35)).abs() < 1e-12);
        assert!((got + 0.91125).abs() < 1e-10);
        assert!(task_cost(-0.1, &p).is_err());
    }

    #[test]
    fn task_cost_convexity_property() {
        // X(la + (1-l)b) <= l X(a) + (1-l) X(b), strictly for a != b.
        let p = params();
        let f = CostFn::Task { rho: p.rho };
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let a = 0.01 + 5.0 * next();
            let b = a + 0.05 + 5.0 * next();
            let l = 0.05 + 0.9 * next();
            let mid = f.value(l * a + (1.0 - l) * b);
            let chord = l * f.value(a) + (1.0 - l) * f.value(b);
            assert!(mid < chord, "convexity violated at a={a} b={b} l={l}");
            // Strictness bounded away from zero for separated points.
            if b - a > 0.5 {
                assert!(chord - mid > 1e-6);
            }
        }
    }

    #[test]
    fn conjugate_identity_and_support() {
        // The tangent line t -> s*t - f*(s) touches f at the tangency point
        // and lies weakly below f elsewhere.
        let p = params();
        for f in [
            CostFn::Task { rho: p.rho },
            CostFn::Power { gamma: 2.0 },
        ] {
            let mut state = 0xdeadbeefcafef00du64;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            for _ in 0..50 {
                let a = 0.05 + 4.0 * next();
                let s = f.deriv(a);
                let conj = f.conjugate(s).unwrap();
                // f*(f'(a)) = -f(a) + a f'(a)
                assert!((conj - (-f.value(a) + a * s)).abs() < 1e-12);
                let touch = s * a - conj;
                assert!((touch - f.value(a)).abs() < 1e-10);
                for _ in 0..100 {
                    let t = 0.01 + 6.0 * next();
                    assert!(s * t - conj <= f.value(t) + 1e-10);
                }
                // Round trip slope -> tangency.
                let back = f.deriv_inv(s).unwrap();
                assert!((back - a).abs() < 1e-9 * a.max(1.0));
            }
        }
    }

    #[test]
    fn linear_cost_is_exact() {
        let f = CostFn::Linear;
        assert_eq!(f.value(3.5), 3.5);
        assert_eq!(f.deriv(-2.0), 1.0);
        assert_eq!(f.conjugate(1.0).unwrap(), 0.0);
        assert!(f.conjugate(0.5).is_err());
    }

    #[test]
    fn slope_signs() {
        let p = params();
        assert_eq!(CostFn::Task { rho: p.rho }.slope_sign(), -1.0);
        assert_eq!(CostFn::Linear.slope_sign(), 1.0);
        // Task slopes are negative everywhere in the interior.
        let f = CostFn::Task { rho: p.rho };
        for t in [0.1, 1.0, 7.3] {
            assert!(f.deriv(t) < 0.0);
        }
    }
}
