//! Experiment configuration: one human-readable TOML file drives every
//! command. Defaults are explicit so the serialized copy in the manifest
//! records exactly what ran.

use serde::{Deserialize, Serialize};
use std::path::Path;

use steposc_core::dynamics::StepRegion;
use steposc_core::operator::StepMode;
use steposc_core::PotentialSpec;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub potential: PotentialSection,
    pub step: StepSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub classical: ClassicalSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            potential: PotentialSection::default(),
            step: StepSection::default(),
            grid: GridSection::default(),
            solver: SolverSection::default(),
            classical: ClassicalSection::default(),
            analysis: AnalysisSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub omega1: f64,
    pub omega2: f64,
    /// Linear-tilt coefficients (ε1, ε2): the axis minima shift to
    /// ε_i / ω_i². Energies are measured from the shifted minimum.
    pub eps1: f64,
    pub eps2: f64,
    /// Optional tabulated even wells: CSV files of half-axis samples "u,v".
    pub table1: Option<String>,
    pub table2: Option<String>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { omega1: 1.0, omega2: 1.0, eps1: 0.0, eps2: 0.0, table1: None, table2: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StepSection {
    pub q1_wall: f64,
    pub q2_wall: f64,
    /// "excluded" (exact Dirichlet) or "penalty" (1e28 diagonal).
    pub mode: String,
}

impl Default for StepSection {
    fn default() -> Self {
        Self { q1_wall: 0.0, q2_wall: 0.0, mode: "excluded".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub points_per_wavelength: f64,
    pub confinement: f64,
    pub h_override: Option<f64>,
    pub memory_budget_gb: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { points_per_wavelength: 8.0, confinement: 1.8, h_override: None, memory_budget_gb: 8.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Number of lowest levels to compute.
    pub levels: usize,
    /// Grid sizing headroom: the grid is built for E_levels · margin.
    pub e_max_margin: f64,
    /// Relative residual tolerance.
    pub tol: f64,
    /// Eigenvalues per slicing window.
    pub window: usize,
    pub max_restarts: usize,
    pub seed: u64,
    /// Store eigenvectors (needed by concentration and mixing).
    pub eigenvectors: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            levels: 100,
            e_max_margin: 1.08,
            tol: 1e-8,
            window: 64,
            max_restarts: 5,
            seed: 42,
            eigenvectors: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    /// Partial energies of the initial condition.
    pub e1: f64,
    pub e2: f64,
    /// Initial angle coordinates (radians).
    pub theta1: f64,
    pub theta2: f64,
    pub horizon_time: f64,
    pub sample_dt: f64,
    /// Integration steps per shortest period (tabulated wells only).
    pub steps_per_period: usize,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self {
            e1: 5.625,
            e2: 5.5,
            theta1: 0.3,
            theta2: -1.1,
            horizon_time: 200.0,
            sample_dt: 0.02,
            steps_per_period: 2048,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// "mean-spacing", "weyl" or "polynomial".
    pub unfold: String,
    pub poly_degree: usize,
    /// Discard this fraction of the lowest levels before spacing statistics.
    pub trim_fraction: f64,
    /// Collapse degenerate clusters tighter than tol × (mean spacing).
    pub degeneracy_tol: f64,
    /// Collapse degeneracies before spacing statistics (resonant systems).
    pub collapse_degeneracies: bool,
    /// Concentration threshold on the Ẽ indicator.
    pub threshold: f64,
    /// Eigenstate window [lo, hi] (1-based, inclusive) for concentration.
    pub window_lo: usize,
    pub window_hi: usize,
    /// Mixing-metric parameters.
    pub delta: f64,
    pub j_basis: usize,
    pub delta_n: usize,
    pub n_list: Vec<usize>,
    pub e_ref_index: usize,
    /// Perturbation sweep: pairs (ε1, ε2).
    pub eps_list: Vec<[f64; 2]>,
    /// Resonance index for EBK comparison tables (0 = no table).
    pub ebk_m: u32,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            unfold: "mean-spacing".into(),
            poly_degree: 6,
            trim_fraction: 0.0,
            degeneracy_tol: 1e-6,
            collapse_degeneracies: false,
            threshold: 0.7,
            window_lo: 1,
            window_hi: 20,
            delta: 0.01,
            j_basis: 400,
            delta_n: 10,
            n_list: vec![151, 201, 251, 301],
            e_ref_index: 301,
            eps_list: vec![[0.5, 0.25], [1.0, 0.5], [1.5, 0.75]],
            ebk_m: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Write the binary eigenvector store alongside the spectrum.
    pub eigenvector_store: bool,
    /// Also export eigenvectors as CSV for small grids (≤ this many nodes).
    pub csv_export_node_limit: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), eigenvector_store: true, csv_export_node_limit: 0 }
    }
}

/// A configuration failure with the offending field path.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at {}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError {
            field: "<toml>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            field: "<file>".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        let cfg = Self::from_toml_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field: &str, message: String| Err(ConfigError { field: field.into(), message });
        if self.potential.omega1 <= 0.0 {
            return fail("potential.omega1", format!("must be positive, got {}", self.potential.omega1));
        }
        if self.potential.omega2 <= 0.0 {
            return fail("potential.omega2", format!("must be positive, got {}", self.potential.omega2));
        }
        if self.step.q1_wall > 0.0 {
            return fail("step.q1_wall", format!("walls must be nonpositive, got {}", self.step.q1_wall));
        }
        if self.step.q2_wall > 0.0 {
            return fail("step.q2_wall", format!("walls must be nonpositive, got {}", self.step.q2_wall));
        }
        if self.step.mode != "excluded" && self.step.mode != "penalty" {
            return fail("step.mode", format!("expected \"excluded\" or \"penalty\", got {:?}", self.step.mode));
        }
        if self.grid.points_per_wavelength < 4.0 && self.grid.h_override.is_none() {
            return fail(
                "grid.points_per_wavelength",
                format!("must be >= 4, got {}", self.grid.points_per_wavelength),
            );
        }
        if self.grid.confinement <= 1.0 {
            return fail("grid.confinement", format!("must exceed 1, got {}", self.grid.confinement));
        }
        if self.solver.levels == 0 {
            return fail("solver.levels", "must be positive".into());
        }
        if self.solver.tol <= 0.0 || self.solver.tol >= 1.0 {
            return fail("solver.tol", format!("must be in (0, 1), got {}", self.solver.tol));
        }
        if self.solver.window == 0 {
            return fail("solver.window", "must be positive".into());
        }
        match self.analysis.unfold.as_str() {
            "mean-spacing" | "weyl" | "polynomial" => {}
            other => {
                return fail(
                    "analysis.unfold",
                    format!("expected \"mean-spacing\", \"weyl\" or \"polynomial\", got {other:?}"),
                )
            }
        }
        if !(0.0..0.9).contains(&self.analysis.trim_fraction) {
            return fail("analysis.trim_fraction", format!("must be in [0, 0.9), got {}", self.analysis.trim_fraction));
        }
        if self.analysis.window_lo == 0 || self.analysis.window_hi < self.analysis.window_lo {
            return fail(
                "analysis.window_lo",
                format!(
                    "window must be 1-based with lo <= hi, got [{}, {}]",
                    self.analysis.window_lo, self.analysis.window_hi
                ),
            );
        }
        if self.classical.e1 <= 0.0 || self.classical.e2 <= 0.0 {
            return fail("classical.e1", "partial energies must be positive".into());
        }
        Ok(())
    }

    /// Axis minima locations implied by the tilt coefficients.
    pub fn shifts(&self) -> (f64, f64) {
        (
            self.potential.eps1 / (self.potential.omega1 * self.potential.omega1),
            self.potential.eps2 / (self.potential.omega2 * self.potential.omega2),
        )
    }

    /// Build the two axis potentials.
    pub fn potentials(&self) -> Result<(PotentialSpec, PotentialSpec), ConfigError> {
        let (s1, s2) = self.shifts();
        let build = |axis: usize,
                     omega: f64,
                     shift: f64,
                     table: &Option<String>|
         -> Result<PotentialSpec, ConfigError> {
            match table {
                None => Ok(PotentialSpec::harmonic_shifted(omega, shift)),
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                        field: format!("potential.table{axis}"),
                        message: format!("{path}: {e}"),
                    })?;
                    let mut samples = Vec::new();
                    for (ln, line) in text.lines().enumerate() {
                        let line = line.trim();
                        if line.is_empty() || line.starts_with('#') || line.starts_with('u') {
                            continue;
                        }
                        let mut parts = line.split(',');
                        let parse = |s: Option<&str>| -> Option<f64> {
                            s.and_then(|t| t.trim().parse::<f64>().ok())
                        };
                        match (parse(parts.next()), parse(parts.next())) {
                            (Some(u), Some(vv)) => samples.push((u, vv)),
                            _ => {
                                return Err(ConfigError {
                                    field: format!("potential.table{axis}"),
                                    message: format!("{path}:{}: expected \"u,v\"", ln + 1),
                                })
                            }
                        }
                    }
                    PotentialSpec::tabulated_even(shift, &samples).map_err(|e| ConfigError {
                        field: format!("potential.table{axis}"),
                        message: e.to_string(),
                    })
                }
            }
        };
        Ok((
            build(1, self.potential.omega1, s1, &self.potential.table1)?,
            build(2, self.potential.omega2, s2, &self.potential.table2)?,
        ))
    }

    pub fn step_region(&self) -> Result<StepRegion, ConfigError> {
        StepRegion::new(self.step.q1_wall, self.step.q2_wall).map_err(|e| ConfigError {
            field: "step".into(),
            message: e.to_string(),
        })
    }

    pub fn step_mode(&self) -> StepMode {
        if self.step.mode == "penalty" {
            StepMode::Penalty
        } else {
            StepMode::ExcludedNodes
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut cfg = ExperimentConfig::default();
        cfg.step.q1_wall = 0.5;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "step.q1_wall");

        let mut cfg = ExperimentConfig::default();
        cfg.analysis.unfold = "fourier".into();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "analysis.unfold");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[potential]\nomega3 = 2.0\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn tilt_shifts_divide_by_omega_squared() {
        let mut cfg = ExperimentConfig::default();
        cfg.potential.omega2 = std::f64::consts::SQRT_2;
        cfg.potential.eps1 = 1.5;
        cfg.potential.eps2 = 0.75;
        let (s1, s2) = cfg.shifts();
        assert!((s1 - 1.5).abs() < 1e-15);
        assert!((s2 - 0.375).abs() < 1e-15);
    }
}
