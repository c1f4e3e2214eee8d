//! Positive-economy equilibrium: wages, the worker optimum, sorting, firm
//! inference, and pointwise identification of two-dimensional skills from
//! earnings records.

use crate::error::{Error, Result};
use crate::grid::SkillGrid;
use crate::params::ModelParams;

/// One input record: pre-tax earnings and relative task intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerRecord {
    /// Pre-tax earnings (consumption units, > 0).
    pub wage: f64,
    /// Relative manual intensity `x_m / x_c` (> 0).
    pub rel_intensity: f64,
    /// Sampling weight (>= 0).
    pub weight: f64,
}

impl WorkerRecord {
    pub fn new(wage: f64, rel_intensity: f64, weight: f64) -> Result<Self> {
        if !(wage > 0.0) || !wage.is_finite() {
            return Err(Error::Domain(format!("wage must be > 0, got {wage}")));
        }
        if !(rel_intensity > 0.0) || !rel_intensity.is_finite() {
            return Err(Error::Domain(format!(
                "relative intensity must be > 0, got {rel_intensity}"
            )));
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Domain(format!("weight must be >= 0, got {weight}")));
        }
        Ok(WorkerRecord {
            wage,
            rel_intensity,
            weight,
        })
    }
}

/// A worker with task inputs, skills and equilibrium firm assignment
/// recovered from a [`WorkerRecord`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifiedWorker {
    pub x_c: f64,
    pub x_m: f64,
    pub alpha_c: f64,
    pub alpha_m: f64,
    pub ell_c: f64,
    pub ell_m: f64,
    /// Project value of the firm employing this worker in equilibrium.
    pub z: f64,
}

/// Equilibrium wage schedule `w(x) = (x_c^2 + x_m^2)^eta / 2 + zeta`.
pub fn wage(x_c: f64, x_m: f64, params: &ModelParams) -> Result<f64> {
    if !(x_c >= 0.0) || !(x_m >= 0.0) {
        return Err(Error::Domain(format!(
            "task inputs must be >= 0, got ({x_c}, {x_m})"
        )));
    }
    let big_x = x_c * x_c + x_m * x_m;
    Ok(0.5 * big_x.powf(params.eta) + params.zeta)
}

/// Solve the worker's two first-order conditions for physical task inputs.
///
/// The two conditions are reduced to one scalar equation in the effective
/// skill `X = x_c^2 + x_m^2` using the constant task share implied by the
/// skill-ratio identity `alpha_m / alpha_c = (x_m / x_c)^((rho-2)/rho)`, and
/// the scalar root is found by safeguarded bisection plus Newton steps. The
/// worker problem is strictly concave for `eta < rho / 2`, so the root is
/// unique.
///
/// Returns `(x_c, x_m, ell_c, ell_m)`.
pub fn worker_solve(
    alpha_c: f64,
    alpha_m: f64,
    params: &ModelParams,
) -> Result<(f64, f64, f64, f64)> {
    if !(alpha_c > 0.0) || !(alpha_m > 0.0) {
        return Err(Error::Domain(format!(
            "skills must be > 0, got ({alpha_c}, {alpha_m})"
        )));
    }
    if params.zeta != 0.0 {
        return Err(Error::Domain(
            "the scalar reduction of the worker problem requires zeta = 0".into(),
        ));
    }
    let rho = params.rho;
    let eta = params.eta;
    if !(eta < rho / 2.0) {
        return Err(Error::Domain(format!(
            "worker problem is strictly concave only for eta < rho/2 (eta = {eta}, rho = {rho})"
        )));
    }
    // Task ratio from the skill-ratio identity.
    let ratio = (alpha_m / alpha_c).powf(rho / (rho - 2.0));
    let a = (1.0 - params.tau_linear) * eta;
    let share = 1.0 + ratio * ratio;
    let b = params.kappa_rho() / (share.powf((rho - 2.0) / 2.0) * alpha_c.powf(rho));
    // g(X) = A X^(eta-1) - B X^((rho-2)/2), positive near 0, negative at
    // infinity; unique sign change.
    let g = |x: f64| a * x.powf(eta - 1.0) - b * x.powf((rho - 2.0) / 2.0);
    let dg = |x: f64| {
        a * (eta - 1.0) * x.powf(eta - 2.0) - b * (rho - 2.0) / 2.0 * x.powf((rho - 4.0) / 2.0)
    };
    let (mut lo, mut hi) = (1e-12, 1e6);
    // Extreme skill or curvature combinations push the crossing beyond the
    // default bracket; expand geometrically before giving up.
    while g(hi) > 0.0 && hi < 1e30 {
        hi *= 10.0;
    }
    while g(lo) < 0.0 && lo > 1e-30 {
        lo /= 10.0;
    }
    if g(lo) <= 0.0 || g(hi) >= 0.0 {
        return Err(Error::Numeric(format!(
            "worker FOC has no sign change on [{lo:e}, {hi:e}]: g(lo) = {}, g(hi) = {}",
            g(lo),
            g(hi)
        )));
    }
    let mut x = (lo * hi).sqrt();
    let mut val = g(x);
    for _ in 0..200 {
        if val.abs() <= 1e-12 * (a * x.powf(eta - 1.0)).abs().max(1e-300) {
            break;
        }
        if val > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // Newton step, kept only when it stays inside the bracket.
        let d = dg(x);
        let newton = x - val / d;
        x = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        val = g(x);
    }
    let resid = val.abs() / (a * x.powf(eta - 1.0)).abs().max(1e-300);
    if resid > 1e-9 {
        return Err(Error::Numeric(format!(
            "worker FOC root-find stalled: X = {x}, relative residual = {resid:e}"
        )));
    }
    let x_c = (x / share).sqrt();
    let x_m = ratio * x_c;
    Ok((x_c, x_m, x_c / alpha_c, x_m / alpha_m))
}

/// Invert one earnings record into task inputs, skills and the equilibrium
/// project value.
pub fn identify_skills(record: &WorkerRecord, params: &ModelParams) -> Result<IdentifiedWorker> {
    let w = record.wage;
    if w <= params.zeta {
        return Err(Error::Domain(format!(
            "wage {w} is at or below minimum earnings {}",
            params.zeta
        )));
    }
    let eta = params.eta;
    let rho = params.rho;
    let ratio = record.rel_intensity;
    // Wage inversion pins the cognitive task level.
    let big_x = (2.0 * (w - params.zeta)).powf(1.0 / eta);
    let x_c = big_x.sqrt() / (1.0 + ratio * ratio).sqrt();
    let x_m = ratio * x_c;
    // The first-order condition then pins each skill level.
    let marginal = (1.0 - params.tau_linear) * eta * (2.0 * w).powf((eta - 1.0) / eta);
    let alpha_c_rho = params.kappa_rho() * x_c.powf(rho - 2.0) / marginal;
    let alpha_m_rho = params.kappa_rho() * x_m.powf(rho - 2.0) / marginal;
    let alpha_c = alpha_c_rho.powf(1.0 / rho);
    let alpha_m = alpha_m_rho.powf(1.0 / rho);
    Ok(IdentifiedWorker {
        x_c,
        x_m,
        alpha_c,
        alpha_m,
        ell_c: x_c / alpha_c,
        ell_m: x_m / alpha_m,
        z: infer_firm(big_x, params)?,
    })
}

/// Relative residuals of the two worker first-order conditions at the given
/// inputs; zero for exactly optimal ones.
pub fn worker_foc_residual(worker: &IdentifiedWorker, params: &ModelParams) -> (f64, f64) {
    let w = 0.5
        * (worker.x_c * worker.x_c + worker.x_m * worker.x_m).powf(params.eta)
        + params.zeta;
    let lhs = (1.0 - params.tau_linear) * params.eta * (2.0 * w).powf((params.eta - 1.0) / params.eta);
    let res = |x_s: f64, alpha_s: f64| {
        let rhs = params.kappa_rho() * x_s.powf(params.rho - 2.0) / alpha_s.powf(params.rho);
        (lhs - rhs) / lhs.abs().max(rhs.abs())
    };
    (
        res(worker.x_c, worker.alpha_c),
        res(worker.x_m, worker.alpha_m),
    )
}

/// Project value of the firm employing a team of effective skill `X`:
/// the derivative of the wage bill, `z = eta X^(eta-1)`.
pub fn infer_firm(big_x: f64, params: &ModelParams) -> Result<f64> {
    if !(big_x > 0.0) || !big_x.is_finite() {
        return Err(Error::Domain(format!(
            "effective skill must be > 0, got {big_x}"
        )));
    }
    Ok(params.eta * big_x.powf(params.eta - 1.0))
}

/// Frisch elasticity of total hours with respect to hourly productivity,
/// `1 / (rho - 1)`.
pub fn frisch_elasticity(rho: f64) -> Result<f64> {
    if !(rho > 1.0) {
        return Err(Error::Domain(format!(
            "Frisch elasticity requires rho > 1, got {rho}"
        )));
    }
    Ok(1.0 / (rho - 1.0))
}

/// Rank-to-rank pairing of effective skills with project values.
///
/// Both lists are sorted ascending and paired rank by rank; the resulting
/// total output `sum z X` is maximal over all pairings. Returns
/// `(worker index, firm index)` pairs in ascending skill order.
pub fn equilibrium_assignment(skills: &[f64], firms: &[f64]) -> Result<Vec<(usize, usize)>> {
    if skills.len() != firms.len() {
        return Err(Error::Argument(format!(
            "{} workers but {} firms",
            skills.len(),
            firms.len()
        )));
    }
    let mut wi: Vec<usize> = (0..skills.len()).collect();
    let mut fi: Vec<usize> = (0..firms.len()).collect();
    wi.sort_by(|&a, &b| skills[a].partial_cmp(&skills[b]).unwrap().then(a.cmp(&b)));
    fi.sort_by(|&a, &b| firms[a].partial_cmp(&firms[b]).unwrap().then(a.cmp(&b)));
    Ok(wi.into_iter().zip(fi).collect())
}

/// Aggregated task production from per-subtask log scores: the exponential
/// of their mean.
pub fn cobb_douglas_intensity(log_scores: &[f64]) -> Result<f64> {
    if log_scores.is_empty() {
        return Err(Error::Argument("no subtask scores".into()));
    }
    Ok((log_scores.iter().sum::<f64>() / log_scores.len() as f64).exp())
}

/// Firm value `Omega(z) = sup_X (z X - h(X))` with `h(X) = X^eta + 2 zeta`,
/// computed numerically on a log grid with golden-section refinement.
pub fn firm_value_conjugate(z: f64, params: &ModelParams) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("project value must be > 0, got {z}")));
    }
    if params.eta <= 1.0 {
        return Err(Error::Domain(
            "the firm-value conjugate is finite only for eta > 1".into(),
        ));
    }
    let eta = params.eta;
    let obj = |x: f64| z * x - x.powf(eta) - 2.0 * params.zeta;
    // Coarse log-grid scan.
    let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
    let n = 400;
    let xs: Vec<f64> = (0..=n)
        .map(|k| 1e-9 * (1e18f64).powf(k as f64 / n as f64))
        .collect();
    for (i, &x) in xs.iter().enumerate() {
        let v = obj(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement on the bracketing interval.
    let mut lo = xs[best_i.saturating_sub(1)];
    let mut hi = xs[(best_i + 1).min(n)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = obj(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = obj(x1);
        }
        if (hi - lo) <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(obj(0.5 * (lo + hi)))
}

/// Per-node positive-economy equilibrium quantities on a grid.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumNode {
    pub x_c: f64,
    pub x_m: f64,
    pub big_x: f64,
    pub wage: f64,
    pub z: f64,
    /// Worker utility under the flat tax, in planner units.
    pub utility: f64,
}

/// Solve the worker problem at every grid node under the current tax policy.
pub fn equilibrium_profile(grid: &SkillGrid, params: &ModelParams) -> Result<Vec<EquilibriumNode>> {
    let mut out = Vec::with_capacity(grid.node_count());
    for idx in 0..grid.node_count() {
        let (ac, am) = grid.alpha(idx);
        let (x_c, x_m, ell_c, ell_m) = worker_solve(ac, am, params)?;
        let w = wage(x_c, x_m, params)?;
        let big_x = x_c * x_c + x_m * x_m;
        let utility = (1.0 - params.tau_linear) * w
            - params.kappa * (ell_c.powf(params.rho) + ell_m.powf(params.rho));
        out.push(EquilibriumNode {
            x_c,
            x_m,
            big_x,
            wage: w,
            z: infer_firm(big_x, params)?,
            utility,
        });
    }
    Ok(out)
}

/// Mass-weighted utilitarian welfare of the positive-economy equilibrium;
/// the default promised welfare level for the planner.
pub fn equilibrium_welfare(grid: &SkillGrid, params: &ModelParams) -> Result<f64> {
    let profile = equilibrium_profile(grid, params)?;
    Ok(profile
        .iter()
        .zip(&grid.density)
        .map(|(n, &m)| m * n.utility)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn base(tau: f64, eta: f64) -> ModelParams {
        let mut p = ModelParams::calibrated();
        p.tau_linear = tau;
        p.eta = eta;
        p.zeta = 0.0;
        p
    }

    #[test]
    fn wage_examples() {
        let p = base(0.0, 1.0);
        assert!((wage(1.0, 1.0, &p).unwrap() - 1.0).abs() < 1e-15);
        let mut pz = p;
        pz.zeta = 0.3;
        assert!((wage(0.0, 0.0, &pz).unwrap() - 0.3).abs() < 1e-15);
        let p11 = base(0.0, 1.1);
        let w = wage(0.97, 0.97, &p11).unwrap();
        assert!((w - 1.0).abs() < 0.005, "w = {w}");
        assert!(wage(-0.1, 0.0, &p).is_err());
    }

    /// Closed-form oracle for the scalar reduction: the root of
    /// `A X^(eta-1) = B X^((rho-2)/2)` is `(A/B)^(2/(rho-2eta))`.
    fn closed_form_big_x(alpha_c: f64, alpha_m: f64, p: &ModelParams) -> f64 {
        let ratio = (alpha_m / alpha_c).powf(p.rho / (p.rho - 2.0));
        let share = 1.0 + ratio * ratio;
        let a = (1.0 - p.tau_linear) * p.eta;
        let b = p.kappa_rho() / (share.powf((p.rho - 2.0) / 2.0) * alpha_c.powf(p.rho));
        (a / b).powf(2.0 / (p.rho - 2.0 * p.eta))
    }

    #[test]
    fn worker_solve_baseline_row() {
        // Equal skills with alpha^rho = 1/2, no taxes, no firm dispersion.
        let p = base(0.0, 1.0);
        let alpha = 0.5f64.powf(1.0 / p.rho);
        let (x_c, x_m, ell_c, ell_m) = worker_solve(alpha, alpha, &p).unwrap();
        assert!((x_c - 1.0).abs() < 1e-9);
        assert!((x_m - 1.0).abs() < 1e-9);
        assert!((ell_c - 1.0 / alpha).abs() < 1e-9);
        assert!((ell_m - ell_c).abs() < 1e-12);
    }

    #[test]
    fn worker_solve_task_intensity_row() {
        // alpha_m^rho = 0.63, alpha_c^rho = 0.26 gives x близко (1.35, 0.45)
        // with ratio 3 at two-decimal precision.
        let p = base(0.0, 1.0);
        let am = 0.63f64.powf(1.0 / p.rho);
        let ac = 0.26f64.powf(1.0 / p.rho);
        let (x_c, x_m, _, _) = worker_solve(ac, am, &p).unwrap();
        assert!((x_m - 1.35).abs() < 0.02, "x_m = {x_m}");
        assert!((x_c - 0.45).abs() < 0.02, "x_c = {x_c}");
        assert!((x_m / x_c - 3.0).abs() < 0.07);
    }

    #[test]
    fn worker_solve_tax_row() {
        // tau = 0.3 with alpha^rho = 1/(2 * 0.7) restores unit tasks.
        let p = base(0.3, 1.0);
        let alpha = (1.0 / 1.4f64).powf(1.0 / p.rho);
        let (x_c, x_m, _, _) = worker_solve(alpha, alpha, &p).unwrap();
        assert!((x_c - 1.0).abs() < 1e-9);
        assert!((x_m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn worker_solve_matches_closed_form() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for eta in [1.0, 1.1, 1.3] {
            let p = base(0.2, eta);
            for _ in 0..200 {
                let ac = rng.random_range(0.5..2.0);
                let am = rng.random_range(0.5..2.0);
                let (x_c, x_m, _, _) = worker_solve(ac, am, &p).unwrap();
                let big_x = closed_form_big_x(ac, am, &p);
                assert!(
                    ((x_c * x_c + x_m * x_m) - big_x).abs() <= 1e-8 * big_x,
                    "X mismatch at ({ac}, {am}), eta {eta}"
                );
            }
        }
    }

    #[test]
    fn skill_ratio_identity_holds() {
        let p = base(0.1, 1.1);
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let ac = rng.random_range(0.5..2.0);
            let am = rng.random_range(0.5..2.0);
            let (x_c, x_m, _, _) = worker_solve(ac, am, &p).unwrap();
            let lhs = am / ac;
            let rhs = (x_m / x_c).powf((p.rho - 2.0) / p.rho);
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs());
        }
    }

    #[test]
    fn identify_table_rows() {
        // Baseline: unit wage, unit ratio.
        let p = base(0.0, 1.0);
        let w1 = identify_skills(&WorkerRecord::new(1.0, 1.0, 1.0).unwrap(), &p).unwrap();
        assert!((w1.x_c - 1.0).abs() < 1e-12);
        assert!((w1.x_m - 1.0).abs() < 1e-12);
        assert!((w1.alpha_c.powf(p.rho) - 0.5).abs() < 1e-12);
        // Wages row: w = 4 quadruples nothing but levels.
        let w3 = identify_skills(&WorkerRecord::new(4.0, 1.0, 1.0).unwrap(), &p).unwrap();
        assert!((w3.x_c - 2.0).abs() < 1e-12);
        assert!((w3.alpha_c.powf(p.rho) - 0.87).abs() < 0.005);
        // Firm dispersion row: eta = 1.1 compresses tasks and skills.
        let p11 = base(0.0, 1.1);
        let w5 = identify_skills(&WorkerRecord::new(1.0, 1.0, 1.0).unwrap(), &p11).unwrap();
        assert!((w5.x_c - 0.97).abs() < 0.005);
        assert!((w5.alpha_c.powf(p11.rho) - 0.42).abs() < 0.005);
    }

    #[test]
    fn identify_rejects_wage_below_floor() {
        let mut p = base(0.0, 1.0);
        p.zeta = 2.0;
        let r = WorkerRecord::new(1.5, 1.0, 1.0).unwrap();
        assert!(matches!(identify_skills(&r, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn foc_residual_examples() {
        let p = base(0.0, 1.1);
        let (x_c, x_m, _, _) = worker_solve(1.2, 0.8, &p).unwrap();
        let w = IdentifiedWorker {
            x_c,
            x_m,
            alpha_c: 1.2,
            alpha_m: 0.8,
            ell_c: x_c / 1.2,
            ell_m: x_m / 0.8,
            z: 1.0,
        };
        let (rc, rm) = worker_foc_residual(&w, &p);
        assert!(rc.abs() <= 1e-8 && rm.abs() <= 1e-8);
        // Table-1 row 2 at two-decimal precision.
        let p1 = base(0.0, 1.0);
        let rough = IdentifiedWorker {
            x_c: 0.45,
            x_m: 1.35,
            alpha_c: 0.26f64.powf(1.0 / p1.rho),
            alpha_m: 0.63f64.powf(1.0 / p1.rho),
            ell_c: 0.0,
            ell_m: 0.0,
            z: 1.0,
        };
        let (rc, rm) = worker_foc_residual(&rough, &p1);
        assert!(rc.abs() <= 2e-2 && rm.abs() <= 2e-2, "({rc}, {rm})");
        // A 10% bump in x_c breaks the first condition.
        let mut bumped = w;
        bumped.x_c *= 1.1;
        let (rc, _) = worker_foc_residual(&bumped, &p);
        assert!(rc.abs() > 1e-3);
    }

    #[test]
    fn identification_round_trip() {
        let p = base(0.3, 1.1);
        let mut rng = rand::rngs::StdRng::seed_from_u64(99);
        for _ in 0..500 {
            let ac = rng.random_range(0.5..2.0);
            let am = rng.random_range(0.5..2.0);
            let (x_c, x_m, _, _) = worker_solve(ac, am, &p).unwrap();
            let rec = WorkerRecord::new(
                wage(x_c, x_m, &p).unwrap(),
                x_m / x_c,
                1.0,
            )
            .unwrap();
            let ided = identify_skills(&rec, &p).unwrap();
            assert!((ided.alpha_c - ac).abs() <= 1e-6 * ac);
            assert!((ided.alpha_m - am).abs() <= 1e-6 * am);
        }
    }

    #[test]
    fn tax_invariance_of_tasks_under_unit_eta() {
        // With eta = 1, tasks identified from the same record do not move
        // with tau, while alpha^rho scales by 1/(1-tau).
        let rec = WorkerRecord::new(1.7, 2.0, 1.0).unwrap();
        let p0 = base(0.0, 1.0);
        let p3 = base(0.3, 1.0);
        let a = identify_skills(&rec, &p0).unwrap();
        let b = identify_skills(&rec, &p3).unwrap();
        assert!((a.x_c - b.x_c).abs() < 1e-12);
        assert!((a.x_m - b.x_m).abs() < 1e-12);
        let scale = b.alpha_c.powf(p0.rho) / a.alpha_c.powf(p0.rho);
        assert!((scale - 1.0 / 0.7).abs() < 1e-9);
    }

    #[test]
    fn monotone_identification() {
        let p = base(0.0, 1.1);
        // Fixed ratio, higher wage: weakly higher skills.
        let lo = identify_skills(&WorkerRecord::new(1.0, 1.5, 1.0).unwrap(), &p).unwrap();
        let hi = identify_skills(&WorkerRecord::new(2.5, 1.5, 1.0).unwrap(), &p).unwrap();
        assert!(hi.alpha_c >= lo.alpha_c && hi.alpha_m >= lo.alpha_m);
        // Fixed wage, higher manual ratio: higher alpha_m, lower alpha_c.
        let a = identify_skills(&WorkerRecord::new(1.0, 0.8, 1.0).unwrap(), &p).unwrap();
        let b = identify_skills(&WorkerRecord::new(1.0, 2.4, 1.0).unwrap(), &p).unwrap();
        assert!(b.alpha_m > a.alpha_m && b.alpha_c < a.alpha_c);
    }

    #[test]
    fn infer_firm_examples() {
        let p1 = base(0.0, 1.0);
        for x in [0.3, 1.0, 4.2] {
            assert!((infer_firm(x, &p1).unwrap() - 1.0).abs() < 1e-15);
        }
        let p11 = base(0.0, 1.1);
        assert!((infer_firm(1.0, &p11).unwrap() - 1.1).abs() < 1e-12);
        assert!(infer_firm(0.0, &p11).is_err());
    }

    #[test]
    fn firm_values_concentrate_around_mean() {
        // Lognormal-ish wage dispersion maps to a tight project-value band.
        let p = base(0.0, 1.1);
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        let zs: Vec<f64> = (0..4000)
            .map(|_| {
                let logw: f64 = rng.random_range(-1.8..1.8);
                let w = logw.exp();
                let big_x = (2.0 * w).powf(1.0 / p.eta);
                infer_firm(big_x, &p).unwrap()
            })
            .collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let min = zs.iter().cloned().fold(f64::INFINITY, f64::min) / mean;
        let max = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / mean;
        assert!(min > 0.5 && min < 0.95, "min/mean = {min}");
        assert!(max > 1.05 && max < 1.5, "max/mean = {max}");
    }

    #[test]
    fn frisch_examples() {
        assert!((frisch_elasticity(2.8).unwrap() - 0.5556).abs() < 1e-4);
        assert!((frisch_elasticity(2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((frisch_elasticity(3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(frisch_elasticity(1.0).is_err());
    }

    fn brute_force_best(skills: &[f64], firms: &[f64]) -> f64 {
        fn perms(v: &mut Vec<usize>, k: usize, skills: &[f64], firms: &[f64], best: &mut f64) {
            if k == v.len() {
                let total: f64 = v.iter().enumerate().map(|(i, &j)| skills[i] * firms[j]).sum();
                if total > *best {
                    *best = total;
                }
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                perms(v, k + 1, skills, firms, best);
                v.swap(k, i);
            }
        }
        let mut idx: Vec<usize> = (0..firms.len()).collect();
        let mut best = f64::NEG_INFINITY;
        perms(&mut idx, 0, skills, firms, &mut best);
        best
    }

    #[test]
    fn assignment_examples_and_brute_force() {
        let pairs = equilibrium_assignment(&[1.0], &[1.0]).unwrap();
        assert_eq!(pairs, vec![(0, 0)]);
        let pairs = equilibrium_assignment(&[1.0, 2.0], &[1.0, 3.0]).unwrap();
        let total: f64 = pairs.iter().map(|&(w, f)| [1.0, 2.0][w] * [1.0, 3.0][f]).sum();
        assert!((total - 7.0).abs() < 1e-15);
        // Symmetric firms: any pairing gives 6.
        let pairs = equilibrium_assignment(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        let total: f64 = pairs
            .iter()
            .map(|&(w, f)| [1.0, 2.0, 3.0][w] * [1.0f64, 1.0, 1.0][f])
            .sum();
        assert!((total - 6.0).abs() < 1e-15);
        assert!(equilibrium_assignment(&[1.0], &[1.0, 2.0]).is_err());
        // Rank pairing attains the permutation maximum on all short lists.
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for n in 1..=6 {
            for _ in 0..20 {
                let skills: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
                let firms: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
                let pairs = equilibrium_assignment(&skills, &firms).unwrap();
                let total: f64 = pairs.iter().map(|&(w, f)| skills[w] * firms[f]).sum();
                let best = brute_force_best(&skills, &firms);
                assert!((total - best).abs() <= 1e-12 * best.abs().max(1.0));
            }
        }
    }

    #[test]
    fn cobb_douglas_helper() {
        assert!((cobb_douglas_intensity(&[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let v = cobb_douglas_intensity(&[1.0, 3.0]).unwrap();
        assert!((v - (2.0f64).exp()).abs() < 1e-12);
        assert!(cobb_douglas_intensity(&[]).is_err());
    }

    #[test]
    fn firm_value_conjugate_matches_closed_form() {
        // Omega(z) = C_z z^(eta/(eta-1)) - 2 zeta with
        // C_z = (eta - 1) / eta^(eta/(eta-1)).
        let mut p = base(0.0, 1.1);
        p.zeta = 0.2;
        let eta = p.eta;
        let cz = (eta - 1.0) / eta.powf(eta / (eta - 1.0));
        for z in [0.5, 0.9, 1.1, 1.4] {
            let num = firm_value_conjugate(z, &p).unwrap();
            let closed = cz * z.powf(eta / (eta - 1.0)) - 2.0 * p.zeta;
            assert!(
                (num - closed).abs() <= 1e-7 * (1.0 + closed.abs()),
                "z = {z}: {num} vs {closed}"
            );
        }
        let p1 = base(0.0, 1.0);
        assert!(firm_value_conjugate(1.0, &p1).is_err());
    }
}
