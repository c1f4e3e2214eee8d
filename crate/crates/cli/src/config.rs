//! Run configuration: a single TOML file with sections, validated strictly
//! (unknown keys rejected), resolved into concrete model objects, and echoed
//! alongside every run's outputs so results can be reproduced exactly.

use mdtax::cost::CostFunctions;
use mdtax::grid::{GridSpacing, SkillGrid};
use mdtax::kde::{kde_smooth, SamplePoint};
use mdtax::params::ModelParams;
use mdtax::planner::{AssignmentOptions, FirmDistribution, RefineOptions};
use mdtax::positive::{equilibrium_profile, equilibrium_welfare};
use mdtax::stats::{normal_cdf, silverman_bandwidth};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub welfare: WelfareSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub assignment: AssignmentSection,
    #[serde(default)]
    pub identify: IdentifySection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub rho: f64,
    /// Defaults to 1 / (2 rho) when omitted.
    pub kappa: Option<f64>,
    pub eta: f64,
    pub tau: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub outside_option: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_c: usize,
    pub n_m: usize,
    pub alpha_c_range: [f64; 2],
    pub alpha_m_range: [f64; 2],
    #[serde(default = "default_spacing")]
    pub spacing: String,
}

fn default_spacing() -> String {
    "uniform".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    /// uniform | gaussian-mixture | sampled-mixture | csv
    #[serde(default = "default_density_kind")]
    pub kind: String,
    #[serde(default)]
    pub modes: Vec<MixtureMode>,
    /// Sample count for the sampled-mixture kind.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Kernel bandwidths; Silverman's rule per dimension when omitted.
    pub bandwidth: Option<[f64; 2]>,
    /// Density CSV path for the csv kind.
    pub path: Option<String>,
}

fn default_density_kind() -> String {
    "uniform".to_string()
}

fn default_samples() -> usize {
    20_000
}

impl Default for DensitySection {
    fn default() -> Self {
        DensitySection {
            kind: default_density_kind(),
            modes: Vec::new(),
            samples: default_samples(),
            bandwidth: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureMode {
    pub center_c: f64,
    pub center_m: f64,
    pub sigma_c: f64,
    pub sigma_m: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelfareSection {
    /// from-positive | explicit
    #[serde(default = "default_welfare_mode")]
    pub mode: String,
    #[serde(default)]
    pub value: f64,
    /// Added to the positive-equilibrium welfare in from-positive mode.
    #[serde(default)]
    pub margin: f64,
}

fn default_welfare_mode() -> String {
    "from-positive".to_string()
}

impl Default for WelfareSection {
    fn default() -> Self {
        WelfareSection {
            mode: default_welfare_mode(),
            value: 0.0,
            margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "d_target_eps")]
    pub target_eps: f64,
    #[serde(default = "d_initial_eps")]
    pub initial_eps: f64,
    #[serde(default = "d_shrink")]
    pub shrink: f64,
    #[serde(default = "d_refine_iters")]
    pub max_refine_iterations: usize,
    #[serde(default = "d_true")]
    pub lazy_constraints: bool,
    #[serde(default = "d_ic_batch")]
    pub ic_batch: usize,
    /// Cap on incentive-pair offsets (0 = no cap; certified runs leave it off).
    #[serde(default)]
    pub max_offset: usize,
    #[serde(default = "d_refactor")]
    pub refactor_every: usize,
    #[serde(default = "d_true")]
    pub scale_lp: bool,
    #[serde(default)]
    pub max_lp_iterations: usize,
}

fn d_target_eps() -> f64 {
    1e-6
}
fn d_initial_eps() -> f64 {
    1e-2
}
fn d_shrink() -> f64 {
    0.5
}
fn d_refine_iters() -> usize {
    80
}
fn d_true() -> bool {
    true
}
fn d_ic_batch() -> usize {
    1000
}
fn d_refactor() -> usize {
    100
}

impl Default for SolverSection {
    fn default() -> Self {
        toml::from_str("").expect("empty solver section has defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentSection {
    /// degenerate | from-eta | explicit
    #[serde(default = "default_firm_dist")]
    pub firm_dist: String,
    #[serde(default)]
    pub z_values: Vec<f64>,
    #[serde(default)]
    pub z_masses: Vec<f64>,
    #[serde(default = "d_max_outer")]
    pub max_outer: usize,
    #[serde(default = "d_assign_tol")]
    pub tol: f64,
}

fn default_firm_dist() -> String {
    "from-eta".to_string()
}
fn d_max_outer() -> usize {
    50
}
fn d_assign_tol() -> f64 {
    1e-9
}

impl Default for AssignmentSection {
    fn default() -> Self {
        toml::from_str("").expect("empty assignment section has defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifySection {
    #[serde(default = "d_winsor_lower")]
    pub winsor_lower: f64,
    #[serde(default = "d_winsor_upper")]
    pub winsor_upper: f64,
    #[serde(default = "d_malformed")]
    pub max_malformed_share: f64,
}

fn d_winsor_lower() -> f64 {
    5.0
}
fn d_winsor_upper() -> f64 {
    95.0
}
fn d_malformed() -> f64 {
    0.01
}

impl Default for IdentifySection {
    fn default() -> Self {
        toml::from_str("").expect("empty identify section has defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    #[serde(default = "d_rel_tol")]
    pub bunch_rel_tol: f64,
    #[serde(default = "d_el_quantile")]
    pub el_threshold_quantile: f64,
    #[serde(default = "d_el_mult")]
    pub el_threshold_multiplier: f64,
}

fn d_rel_tol() -> f64 {
    1e-4
}
fn d_el_quantile() -> f64 {
    95.0
}
fn d_el_mult() -> f64 {
    5.0
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        toml::from_str("").expect("empty analyze section has defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Earnings records for the identify command.
    #[serde(default)]
    pub input: Option<String>,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params_with_welfare(0.0)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !matches!(self.grid.spacing.as_str(), "uniform" | "geometric") {
            return Err(CliError::Config(format!(
                "grid.spacing must be uniform or geometric, got {:?}",
                self.grid.spacing
            )));
        }
        if !matches!(
            self.density.kind.as_str(),
            "uniform" | "gaussian-mixture" | "sampled-mixture" | "csv"
        ) {
            return Err(CliError::Config(format!(
                "density.kind {:?} is not one of uniform, gaussian-mixture, sampled-mixture, csv",
                self.density.kind
            )));
        }
        if matches!(self.density.kind.as_str(), "gaussian-mixture" | "sampled-mixture")
            && self.density.modes.is_empty()
        {
            return Err(CliError::Config(
                "mixture densities need at least one mode".to_string(),
            ));
        }
        if !matches!(self.welfare.mode.as_str(), "from-positive" | "explicit") {
            return Err(CliError::Config(format!(
                "welfare.mode must be from-positive or explicit, got {:?}",
                self.welfare.mode
            )));
        }
        if !matches!(
            self.assignment.firm_dist.as_str(),
            "degenerate" | "from-eta" | "explicit"
        ) {
            return Err(CliError::Config(format!(
                "assignment.firm_dist {:?} is not one of degenerate, from-eta, explicit",
                self.assignment.firm_dist
            )));
        }
        if self.assignment.firm_dist == "explicit" && self.assignment.z_values.is_empty() {
            return Err(CliError::Config(
                "explicit firm distribution needs z_values".to_string(),
            ));
        }
        Ok(())
    }

    pub fn params_with_welfare(&self, promised: f64) -> mdtax::Result<ModelParams> {
        ModelParams::new(
            self.model.rho,
            self.model
                .kappa
                .unwrap_or(1.0 / (2.0 * self.model.rho)),
            self.model.eta,
            self.model.tau,
            self.model.zeta,
            promised,
            self.model.outside_option,
        )
    }

    pub fn build_grid(&self, params: &ModelParams) -> Result<SkillGrid, CliError> {
        let spacing = match self.grid.spacing.as_str() {
            "uniform" => GridSpacing::Uniform,
            _ => GridSpacing::Geometric,
        };
        SkillGrid::regular(
            (self.grid.n_c, self.grid.n_m),
            (self.grid.alpha_c_range[0], self.grid.alpha_c_range[1]),
            (self.grid.alpha_m_range[0], self.grid.alpha_m_range[1]),
            spacing,
            params,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Node masses according to the density section. The csv kind is handled
    /// by the caller, which knows the input path.
    pub fn build_density(
        &self,
        grid: &SkillGrid,
    ) -> Result<Option<Vec<f64>>, CliError> {
        match self.density.kind.as_str() {
            "uniform" => Ok(Some(vec![1.0 / grid.node_count() as f64; grid.node_count()])),
            "gaussian-mixture" => {
                let mass = mixture_cell_masses(grid, &self.density.modes)?;
                Ok(Some(mass))
            }
            "sampled-mixture" => {
                let mut rng = rand::rngs::StdRng::seed_from_u64(self.seed);
                let total_w: f64 = self.density.modes.iter().map(|m| m.weight).sum();
                let mut points = Vec::with_capacity(self.density.samples);
                for _ in 0..self.density.samples {
                    let mut pick = rng.random_range(0.0..total_w);
                    let mut mode = &self.density.modes[0];
                    for m in &self.density.modes {
                        if pick < m.weight {
                            mode = m;
                            break;
                        }
                        pick -= m.weight;
                    }
                    // Box-Muller keeps the dependency surface small.
                    let (u1, u2): (f64, f64) =
                        (rng.random_range(1e-12..1.0), rng.random_range(0.0..1.0));
                    let r = (-2.0 * u1.ln()).sqrt();
                    let g1 = r * (2.0 * std::f64::consts::PI * u2).cos();
                    let g2 = r * (2.0 * std::f64::consts::PI * u2).sin();
                    points.push(SamplePoint {
                        alpha_c: mode.center_c + mode.sigma_c * g1,
                        alpha_m: mode.center_m + mode.sigma_m * g2,
                        weight: 1.0,
                    });
                }
                let bw = match self.density.bandwidth {
                    Some([hc, hm]) => (hc, hm),
                    None => {
                        let w: Vec<f64> = vec![1.0; points.len()];
                        let hc = silverman_bandwidth(
                            &points.iter().map(|p| p.alpha_c).collect::<Vec<_>>(),
                            &w,
                        )
                        .map_err(|e| CliError::Config(e.to_string()))?;
                        let hm = silverman_bandwidth(
                            &points.iter().map(|p| p.alpha_m).collect::<Vec<_>>(),
                            &w,
                        )
                        .map_err(|e| CliError::Config(e.to_string()))?;
                        (hc, hm)
                    }
                };
                let mass = kde_smooth(&points, grid, bw)
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                Ok(Some(mass))
            }
            "csv" => Ok(None),
            _ => unreachable!("validated"),
        }
    }

    pub fn resolve_welfare(
        &self,
        grid: &SkillGrid,
        params: &ModelParams,
    ) -> Result<f64, CliError> {
        match self.welfare.mode.as_str() {
            "explicit" => Ok(self.welfare.value),
            _ => {
                let w = equilibrium_welfare(grid, params)
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                Ok(w + self.welfare.margin)
            }
        }
    }

    pub fn build_firms(
        &self,
        grid: &SkillGrid,
        params: &ModelParams,
    ) -> Result<FirmDistribution, CliError> {
        match self.assignment.firm_dist.as_str() {
            "degenerate" => Ok(FirmDistribution::degenerate(1.0)),
            "explicit" => {
                let masses = if self.assignment.z_masses.is_empty() {
                    vec![1.0 / self.assignment.z_values.len() as f64; self.assignment.z_values.len()]
                } else {
                    self.assignment.z_masses.clone()
                };
                if masses.len() != self.assignment.z_values.len() {
                    return Err(CliError::Config(
                        "z_values and z_masses must have equal length".to_string(),
                    ));
                }
                FirmDistribution::from_weighted(
                    self.assignment
                        .z_values
                        .iter()
                        .cloned()
                        .zip(masses)
                        .collect(),
                )
                .map_err(|e| CliError::Config(e.to_string()))
            }
            _ => {
                // from-eta: project values implied by the positive economy on
                // this grid, with the node masses.
                let profile = equilibrium_profile(grid, params)
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                FirmDistribution::from_weighted(
                    profile
                        .iter()
                        .zip(&grid.density)
                        .map(|(n, &m)| (n.z, m))
                        .collect(),
                )
                .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    pub fn refine_options(&self, benchmark_mode: bool) -> RefineOptions {
        let mut opts = RefineOptions {
            target_eps: self.solver.target_eps,
            initial_eps: self.solver.initial_eps,
            shrink: self.solver.shrink,
            max_iterations: self.solver.max_refine_iterations,
            lazy: self.solver.lazy_constraints,
            ic_batch: self.solver.ic_batch,
            ..RefineOptions::default()
        };
        opts.solver.refactor_every = self.solver.refactor_every;
        opts.solver.scale = self.solver.scale_lp;
        opts.solver.max_iterations = self.solver.max_lp_iterations;
        if benchmark_mode {
            opts = opts.benchmark_mode();
        }
        opts
    }

    pub fn assignment_options(&self, benchmark_mode: bool) -> AssignmentOptions {
        AssignmentOptions {
            max_outer: self.assignment.max_outer,
            tol: self.assignment.tol,
            refine: self.refine_options(benchmark_mode),
            ..AssignmentOptions::default()
        }
    }

    pub fn costs(&self, params: &ModelParams) -> CostFunctions {
        CostFunctions::linear_consumption(params)
    }
}

/// Cell-integrated Gaussian-mixture masses on the grid, normalized to one.
fn mixture_cell_masses(grid: &SkillGrid, modes: &[MixtureMode]) -> Result<Vec<f64>, CliError> {
    let bounds = |coords: &[f64]| -> Vec<f64> {
        let n = coords.len();
        let mut b = Vec::with_capacity(n + 1);
        if n == 1 {
            return vec![coords[0] - 0.5, coords[0] + 0.5];
        }
        b.push(coords[0] - (coords[1] - coords[0]) / 2.0);
        for i in 1..n {
            b.push((coords[i - 1] + coords[i]) / 2.0);
        }
        b.push(coords[n - 1] + (coords[n - 1] - coords[n - 2]) / 2.0);
        b
    };
    let bc = bounds(&grid.alpha_c);
    let bm = bounds(&grid.alpha_m);
    let mut mass = vec![0.0; grid.node_count()];
    for mode in modes {
        if !(mode.sigma_c > 0.0) || !(mode.sigma_m > 0.0) || !(mode.weight > 0.0) {
            return Err(CliError::Config(
                "mixture modes need positive sigmas and weights".to_string(),
            ));
        }
        let m_c: Vec<f64> = (0..grid.n_c)
            .map(|i| {
                normal_cdf((bc[i + 1] - mode.center_c) / mode.sigma_c)
                    - normal_cdf((bc[i] - mode.center_c) / mode.sigma_c)
            })
            .collect();
        let m_m: Vec<f64> = (0..grid.n_m)
            .map(|j| {
                normal_cdf((bm[j + 1] - mode.center_m) / mode.sigma_m)
                    - normal_cdf((bm[j] - mode.center_m) / mode.sigma_m)
            })
            .collect();
        for i in 0..grid.n_c {
            for j in 0..grid.n_m {
                mass[grid.index(i, j)] += mode.weight * m_c[i] * m_m[j];
            }
        }
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(CliError::Config(
            "mixture density puts no mass on the grid".to_string(),
        ));
    }
    for m in &mut mass {
        *m /= total;
    }
    // Exact renormalization against accumulated roundoff.
    let resid: f64 = 1.0 - mass.iter().sum::<f64>();
    if let Some(first) = mass.first_mut() {
        *first += resid;
    }
    Ok(mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
rho = 2.8
eta = 1.1
tau = 0.3

[grid]
n_c = 4
n_m = 4
alpha_c_range = [1.0, 2.0]
alpha_m_range = [1.0, 2.0]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.solver.target_eps, 1e-6);
        assert_eq!(cfg.identify.winsor_lower, 5.0);
        assert_eq!(cfg.seed, 42);
        let params = cfg.params_with_welfare(0.0).unwrap();
        assert!((params.kappa - 1.0 / 5.6).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{MINIMAL}\n[solver]\nbogus_knob = 3\n");
        assert!(matches!(
            RunConfig::from_toml(&bad),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        let echoed = cfg.to_toml();
        let again = RunConfig::from_toml(&echoed).unwrap();
        assert_eq!(echoed, again.to_toml());
    }

    #[test]
    fn mixture_mass_normalizes() {
        let cfg = RunConfig::from_toml(&format!(
            "{MINIMAL}\n[density]\nkind = \"gaussian-mixture\"\nmodes = [{{ center_c = 1.5, center_m = 1.5, sigma_c = 0.2, sigma_m = 0.2 }}]\n"
        ))
        .unwrap();
        let params = cfg.params_with_welfare(0.0).unwrap();
        let grid = cfg.build_grid(&params).unwrap();
        let mass = cfg.build_density(&grid).unwrap().unwrap();
        let total: f64 = mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Mid-grid concentration.
        let mid = grid.index(2, 2);
        let corner = grid.index(0, 0);
        assert!(mass[mid] > mass[corner]);
    }
}
