//! Model parameters and their validity constraints.

use crate::error::{Error, Result};

/// Structural parameters of the economy.
///
/// The effort-disutility curvature `rho` must exceed 2; this is what makes
/// the resource cost of task disutility strictly convex and the whole
/// linearization approach applicable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Curvature of effort disutility (dimensionless, > 2).
    pub rho: f64,
    /// Disutility scale (> 0).
    pub kappa: f64,
    /// Wage-schedule convexity (>= 1).
    pub eta: f64,
    /// Flat tax rate of the positive economy, in [0, 1).
    pub tau_linear: f64,
    /// Wage intercept / minimum earnings (consumption units, >= 0).
    pub zeta: f64,
    /// Promised welfare level delivered by the planner (utils).
    pub promised_welfare: f64,
    /// Utility floor of the outside option (utils).
    pub outside_option: f64,
}

impl ModelParams {
    pub fn new(
        rho: f64,
        kappa: f64,
        eta: f64,
        tau_linear: f64,
        zeta: f64,
        promised_welfare: f64,
        outside_option: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            rho,
            kappa,
            eta,
            tau_linear,
            zeta,
            promised_welfare,
            outside_option,
        };
        p.validate()?;
        Ok(p)
    }

    /// Baseline calibration: rho = 2.8, kappa = 1/(2 rho), eta = 1.1,
    /// tau = 0.3, zeta = 0, outside option 0.
    pub fn calibrated() -> Self {
        ModelParams {
            rho: 2.8,
            kappa: 1.0 / 5.6,
            eta: 1.1,
            tau_linear: 0.3,
            zeta: 0.0,
            promised_welfare: 0.0,
            outside_option: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 2.0) || !self.rho.is_finite() {
            return Err(Error::Domain(format!(
                "rho must be > 2, got {}",
                self.rho
            )));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::Domain(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if !(self.eta >= 1.0) || !self.eta.is_finite() {
            return Err(Error::Domain(format!("eta must be >= 1, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.tau_linear) {
            return Err(Error::Domain(format!(
                "tau_linear must lie in [0, 1), got {}",
                self.tau_linear
            )));
        }
        if !(self.zeta >= 0.0) || !self.zeta.is_finite() {
            return Err(Error::Domain(format!(
                "zeta must be >= 0, got {}",
                self.zeta
            )));
        }
        if !self.promised_welfare.is_finite() || !self.outside_option.is_finite() {
            return Err(Error::Domain(
                "welfare levels must be finite".to_string(),
            ));
        }
        Ok(())
    }

    /// `kappa * rho`, the scale that appears in first-order conditions.
    pub fn kappa_rho(&self) -> f64 {
        self.kappa * self.rho
    }

    pub fn with_promised_welfare(mut self, u: f64) -> Self {
        self.promised_welfare = u;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau_linear = tau;
        self
    }
}
