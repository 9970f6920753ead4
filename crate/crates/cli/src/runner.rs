//! Command implementations: build the configured system, run the requested
//! pipeline, and write a manifest-carrying output bundle.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use steposc_core::dynamics::{
    self, ClassicalState, Horizon, IntegrateOptions, StepRegion, Trajectory,
};
use steposc_core::ebk::{self, FamilyLabel};
use steposc_core::eigen::{self, SolverConfig, Spectrum};
use steposc_core::error::CoreError;
use steposc_core::grid::{axis_grid, build_grid, Grid2D, GridOptions};
use steposc_core::operator::{build_hamiltonian, DiscreteHamiltonian, StepMode};
use steposc_core::solve1d;
use steposc_core::stats::{self, ReferenceLaw, UnfoldMethod};
use steposc_core::wavefn::{self, WavefunctionField};
use steposc_core::weyl;
use steposc_core::PotentialSpec;

use crate::config::{ConfigError, ExperimentConfig};
use crate::manifest::RunManifest;
use crate::outputs;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Convergence(String),
    Ingestion(String),
    Core(CoreError),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Convergence(msg) => write!(f, "convergence failure: {msg}"),
            RunError::Ingestion(msg) => write!(f, "ingestion error: {msg}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    /// Process exit code: 2 config, 3 convergence, 4 ingestion.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Convergence(_) => 3,
            RunError::Ingestion(_) => 4,
            RunError::Core(_) | RunError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Convergence { converged, requested, detail } => RunError::Convergence(
                format!("{converged}/{requested} eigenpairs converged: {detail}"),
            ),
            other => RunError::Core(other),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::InvalidData {
            RunError::Ingestion(e.to_string())
        } else {
            RunError::Io(e)
        }
    }
}

pub type RunResult<T> = Result<T, RunError>;

#[derive(Debug)]
pub struct CommandOutcome {
    pub bundle_dir: PathBuf,
    pub files: Vec<String>,
}

// ---------------------------------------------------------------------------
// shared system assembly
// ---------------------------------------------------------------------------

pub struct System {
    pub v1: PotentialSpec,
    pub v2: PotentialSpec,
    pub step: StepRegion,
    pub mode: StepMode,
}

pub fn system_from(cfg: &ExperimentConfig) -> RunResult<System> {
    cfg.validate()?;
    let (v1, v2) = cfg.potentials()?;
    Ok(System { v1, v2, step: cfg.step_region()?, mode: cfg.step_mode() })
}

/// Invert the Weyl count N(E) to an energy guess for a target level count.
pub fn energy_for_count(sys: &System, count: f64) -> RunResult<f64> {
    if count <= 0.0 {
        return Ok(0.0);
    }
    let n_of = |e: f64| weyl::weyl_count(e, &sys.v1, &sys.v2, &sys.step).unwrap_or(0.0);
    let mut hi = 1.0;
    while n_of(hi) < count {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(RunError::Core(CoreError::Numerics(
                "level-count inversion ran away".into(),
            )));
        }
    }
    let e = steposc_core::quad::brent_root(|e| n_of(e) - count, 0.0, hi, 1e-9 * hi)?;
    Ok(e)
}

pub fn solver_config(cfg: &ExperimentConfig, with_vectors: bool) -> SolverConfig {
    SolverConfig {
        k: cfg.solver.levels,
        tol: cfg.solver.tol,
        window_size: cfg.solver.window,
        max_restarts: cfg.solver.max_restarts,
        seed: cfg.solver.seed,
        with_vectors,
        ..SolverConfig::default()
    }
}

pub fn grid_options(cfg: &ExperimentConfig) -> GridOptions {
    GridOptions {
        points_per_wavelength: cfg.grid.points_per_wavelength,
        confinement: cfg.grid.confinement,
        h_override: cfg.grid.h_override,
        memory_budget_bytes: (cfg.grid.memory_budget_gb * 1024.0 * 1024.0 * 1024.0) as u64,
    }
}

/// Solve a contiguous index range with windows distributed across the rayon
/// pool. Deterministic: results are merged in plan order.
pub fn solve_parallel(
    h: &DiscreteHamiltonian,
    first: usize,
    count: usize,
    cfg: &SolverConfig,
    estimator: Option<&dyn Fn(f64) -> f64>,
) -> RunResult<Spectrum> {
    let plans = eigen::plan_windows(h, first, count, cfg.window_size, estimator)?;
    let solved: Vec<_> = plans
        .par_iter()
        .map(|plan| eigen::solve_window_plan(h, plan, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for (v, x) in solved {
        values.extend(v);
        vectors.extend(x);
    }
    let base = plans.iter().map(|p| p.count_below).min().unwrap_or(first);
    Ok(eigen::assemble_spectrum(h, first, count, base, values, vectors, cfg)?)
}

/// Merge two same-spacing grids into one covering both (lattices are anchored
/// at the origin, so the union is lattice-aligned).
pub fn union_grid(a: &Grid2D, b: &Grid2D) -> Grid2D {
    assert!((a.h[0] - b.h[0]).abs() < 1e-14 && (a.h[1] - b.h[1]).abs() < 1e-14);
    let mut extents = [[0.0; 2]; 2];
    let mut n = [0usize; 2];
    for axis in 0..2 {
        let lo = a.extents[axis][0].min(b.extents[axis][0]);
        let hi = a.extents[axis][1].max(b.extents[axis][1]);
        let lo_idx = (lo / a.h[axis]).round() as i64;
        let hi_idx = (hi / a.h[axis]).round() as i64;
        extents[axis] = [lo_idx as f64 * a.h[axis], hi_idx as f64 * a.h[axis]];
        n[axis] = (hi_idx - lo_idx - 1) as usize;
    }
    Grid2D { extents, n, h: a.h }
}

fn ensure_dir(dir: &Path) -> RunResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// classical
// ---------------------------------------------------------------------------

/// Initial condition from partial energies and angle coordinates.
pub fn state_at_angles(
    sys: &System,
    e1: f64,
    e2: f64,
    theta1: f64,
    theta2: f64,
) -> RunResult<ClassicalState> {
    let axis = |v: &PotentialSpec, e: f64, theta: f64| -> RunResult<(f64, f64)> {
        match v {
            PotentialSpec::Harmonic { omega, shift } => {
                let a = (2.0 * e).sqrt() / omega;
                Ok((shift + a * theta.cos(), -a * omega * theta.sin()))
            }
            _ => {
                let (q_min, q_max) = v.turning_points(e)?;
                let target = theta.abs();
                let q = steposc_core::quad::brent_root(
                    |q| v.angle_of(e, q, -1.0).unwrap_or(f64::NAN) - target,
                    q_min,
                    q_max,
                    1e-12,
                )?;
                let p_mag = (2.0 * (e - v.value(q))).max(0.0).sqrt();
                Ok((q, if theta >= 0.0 { -p_mag } else { p_mag }))
            }
        }
    };
    let (q1, p1) = axis(&sys.v1, e1, theta1)?;
    let (q2, p2) = axis(&sys.v2, e2, theta2)?;
    Ok(ClassicalState::new(q1, q2, p1, p2))
}

pub fn run_classical(cfg: &ExperimentConfig, out_dir: &Path) -> RunResult<CommandOutcome> {
    let t0 = Instant::now();
    let sys = system_from(cfg)?;
    ensure_dir(out_dir)?;
    let state = state_at_angles(
        &sys,
        cfg.classical.e1,
        cfg.classical.e2,
        cfg.classical.theta1,
        cfg.classical.theta2,
    )?;
    let opts = IntegrateOptions {
        sample_dt: cfg.classical.sample_dt,
        steps_per_period: cfg.classical.steps_per_period,
        ..IntegrateOptions::default()
    };
    let traj = dynamics::integrate_with_impacts(
        &state,
        &sys.v1,
        &sys.v2,
        &sys.step,
        Horizon::Time(cfg.classical.horizon_time),
        &opts,
    )?;
    outputs::write_trajectory_csv(&out_dir.join("trajectory.csv"), &traj)?;

    // angle image and folded billiard image
    let mut rows = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let (t1, t2) = dynamics::to_angle_coords(&sys.v1, &sys.v2, &s.state())?;
        let (x, y) = dynamics::fold_to_l(t1, t2);
        rows.push((s.t, t1, t2, x, y));
    }
    outputs::write_angles_csv(&out_dir.join("angles.csv"), &rows)?;

    let summary = classical_summary(&sys, &traj)?;
    std::fs::write(out_dir.join("summary.json"), summary)?;

    let mut manifest = RunManifest::new("classical", cfg.to_toml_string(), cfg.solver.seed);
    for f in ["trajectory.csv", "angles.csv", "summary.json"] {
        manifest.add_file(out_dir, f)?;
    }
    manifest.add_timing("total", t0.elapsed().as_secs_f64());
    manifest.write(out_dir)?;
    Ok(CommandOutcome {
        bundle_dir: out_dir.to_path_buf(),
        files: vec!["trajectory.csv".into(), "angles.csv".into(), "summary.json".into()],
    })
}

fn classical_summary(sys: &System, traj: &Trajectory) -> RunResult<String> {
    let first = traj.samples.first().expect("trajectory non-empty").state();
    let (e1, e2) = first.partial_energies(&sys.v1, &sys.v2);
    let mut drift1 = 0.0f64;
    let mut drift2 = 0.0f64;
    for s in &traj.samples {
        let (f1, f2) = s.state().partial_energies(&sys.v1, &sys.v2);
        drift1 = drift1.max(((f1 - e1) / e1).abs());
        drift2 = drift2.max(((f2 - e2) / e2).abs());
    }
    let summary = match dynamics::detect_periodicity(&sys.v1, &sys.v2, &sys.step, traj, 1e-8) {
        Ok(s) => s,
        Err(CoreError::CornerCollision { .. }) => dynamics::TrajectorySummary::aperiodic(),
        Err(e) => return Err(e.into()),
    };
    Ok(format!(
        "{{\n  \"e1\": {e1},\n  \"e2\": {e2},\n  \"impacts\": [{}, {}],\n  \"turns\": [{}, {}],\n  \"max_rel_energy_drift\": [{drift1:e}, {drift2:e}],\n  \"is_periodic\": {},\n  \"period\": {},\n  \"mu\": [{}, {}],\n  \"b\": [{}, {}]\n}}\n",
        traj.impacts.0,
        traj.impacts.1,
        traj.turns.0,
        traj.turns.1,
        summary.is_periodic,
        summary.period,
        summary.mu.0,
        summary.mu.1,
        summary.b.0,
        summary.b.1,
    ))
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

pub struct SpectrumArtifacts {
    pub grid: Grid2D,
    pub spectrum: Spectrum,
}

/// Build the grid and operator for the configured system, sized for the
/// requested level count, and solve.
pub fn compute_spectrum(
    cfg: &ExperimentConfig,
    with_vectors: bool,
) -> RunResult<SpectrumArtifacts> {
    let sys = system_from(cfg)?;
    let e_max = energy_for_count(&sys, cfg.solver.levels as f64 * cfg.solver.e_max_margin + 4.0)?;
    let grid = build_grid(&sys.v1, &sys.v2, e_max, &grid_options(cfg))?;
    let ham = build_hamiltonian(grid.clone(), &sys.v1, &sys.v2, &sys.step, sys.mode)?;
    let scfg = solver_config(cfg, with_vectors);
    let est = |count: f64| energy_for_count(&sys, count).unwrap_or(f64::NAN);
    let spectrum = solve_parallel(&ham, 0, cfg.solver.levels, &scfg, Some(&est))?;
    // scatter eigenvectors onto the full grid for storage/analysis
    let spectrum = if with_vectors {
        let vecs = spectrum.eigenvectors.as_ref().expect("vectors requested");
        let full: Vec<Vec<f64>> = vecs
            .iter()
            .zip(spectrum.eigenvalues.iter())
            .map(|(v, &e)| wavefn::field_from_solution(&ham, v, e).values)
            .collect();
        Spectrum { eigenvectors: Some(full), ..spectrum }
    } else {
        spectrum
    };
    Ok(SpectrumArtifacts { grid, spectrum })
}

pub fn run_spectrum(cfg: &ExperimentConfig, out_dir: &Path) -> RunResult<CommandOutcome> {
    let t0 = Instant::now();
    ensure_dir(out_dir)?;
    let with_vectors = cfg.solver.eigenvectors;
    let art = compute_spectrum(cfg, with_vectors)?;
    let mut files: Vec<String> = Vec::new();

    outputs::write_spectrum_csv(&out_dir.join("spectrum.csv"), &art.spectrum)?;
    files.push("spectrum.csv".into());

    if with_vectors && cfg.output.eigenvector_store {
        let fields = art.spectrum.eigenvectors.as_ref().unwrap();
        outputs::write_field_store(
            out_dir,
            "eigenvectors",
            &art.grid,
            art.spectrum.first_index,
            &art.spectrum.eigenvalues,
            fields,
        )?;
        files.push("eigenvectors.bin".into());
        files.push("eigenvectors.meta".into());
        if art.grid.len() <= cfg.output.csv_export_node_limit {
            for (i, f) in fields.iter().enumerate() {
                let name = format!("eigenvector_{i:04}.csv");
                outputs::write_field_csv(&out_dir.join(&name), &art.grid, f)?;
                files.push(name);
            }
        }
    }

    if cfg.analysis.ebk_m > 0 {
        files.extend(write_ebk_tables(cfg, &art, out_dir)?);
    }

    let max_res = art.spectrum.residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    let summary = format!(
        "{{\n  \"nodes\": {},\n  \"n1\": {},\n  \"n2\": {},\n  \"h\": {},\n  \"levels\": {},\n  \"max_residual\": {max_res:e},\n  \"e_min\": {},\n  \"e_max\": {}\n}}\n",
        art.grid.len(),
        art.grid.n[0],
        art.grid.n[1],
        art.grid.h[0],
        art.spectrum.len(),
        art.spectrum.eigenvalues.first().unwrap_or(&f64::NAN),
        art.spectrum.eigenvalues.last().unwrap_or(&f64::NAN),
    );
    std::fs::write(out_dir.join("run_summary.json"), summary)?;
    files.push("run_summary.json".into());

    let mut manifest = RunManifest::new("spectrum", cfg.to_toml_string(), cfg.solver.seed);
    for f in &files {
        manifest.add_file(out_dir, f)?;
    }
    manifest.add_timing("total", t0.elapsed().as_secs_f64());
    manifest.write(out_dir)?;
    Ok(CommandOutcome { bundle_dir: out_dir.to_path_buf(), files })
}

/// Resonance (m, spectral scale) of a frequency pair in the ω2 = ω1/m
/// convention; the configured system's ladder is `scale` times the
/// reference ladder.
pub fn resonance_of(omega1: f64, omega2: f64) -> Option<(u32, f64)> {
    let (lo, hi) = if omega1 <= omega2 { (omega1, omega2) } else { (omega2, omega1) };
    let ratio = hi / lo;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 {
        return None;
    }
    Some((m as u32, hi / m))
}

fn write_ebk_tables(
    cfg: &ExperimentConfig,
    art: &SpectrumArtifacts,
    out_dir: &Path,
) -> RunResult<Vec<String>> {
    let m = cfg.analysis.ebk_m;
    let Some((m_check, scale)) = resonance_of(cfg.potential.omega1, cfg.potential.omega2) else {
        return Err(RunError::Config(ConfigError {
            field: "analysis.ebk_m".into(),
            message: "EBK tables need a resonant frequency pair".into(),
        }));
    };
    if m_check != m {
        return Err(RunError::Config(ConfigError {
            field: "analysis.ebk_m".into(),
            message: format!("configured frequencies give m = {m_check}, not {m}"),
        }));
    }
    let mut files = Vec::new();
    // cluster the computed spectrum; the finest ladder spacing sets the scale
    let families = dynamics::resonant_family(m)?;
    let min_spacing = families
        .iter()
        .map(|f| match f.label {
            FamilyLabel::Single => scale / (1.5 * m as f64),
            FamilyLabel::I => scale / m as f64,
            FamilyLabel::II => 2.0 * scale / m as f64,
        })
        .fold(f64::INFINITY, f64::min);
    let clusters = stats::degeneracy_count(&art.spectrum.eigenvalues, 0.25 * min_spacing);

    for fam in &families {
        let e_top = *art.spectrum.eigenvalues.last().unwrap_or(&0.0);
        let k_max = (0..)
            .take_while(|&k| {
                ebk::ebk_level(k, m, fam.label).map(|e| scale * e <= e_top).unwrap_or(false)
            })
            .last()
            .unwrap_or(0);
        let ladder = ebk::ebk_ladder(m, *fam, k_max, scale)?;
        let name = format!("ebk_ladder_{}.csv", fam.label.name());
        outputs::write_ladder_csv(&out_dir.join(&name), &ladder.levels)?;
        files.push(name);

        // nearest-cluster comparison
        let name = format!("ebk_comparison_{}.csv", fam.label.name());
        let mut w = String::from("k,E_pred,E_fd,delta\n");
        for (k, e_pred) in &ladder.levels {
            let nearest = clusters
                .iter()
                .min_by(|a, b| (a.center - e_pred).abs().total_cmp(&(b.center - e_pred).abs()));
            if let Some(c) = nearest {
                w.push_str(&format!("{k},{e_pred},{},{}\n", c.center, c.center - e_pred));
            }
        }
        std::fs::write(out_dir.join(&name), w)?;
        files.push(name);
    }
    Ok(files)
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

pub fn run_stats(
    cfg: &ExperimentConfig,
    inputs: &[PathBuf],
    out_dir: &Path,
) -> RunResult<CommandOutcome> {
    let t0 = Instant::now();
    if inputs.is_empty() {
        return Err(RunError::Ingestion("stats needs at least one spectrum input".into()));
    }
    ensure_dir(out_dir)?;
    let sys = system_from(cfg)?;
    let mut files = Vec::new();
    for (idx, input) in inputs.iter().enumerate() {
        let sub = if inputs.len() == 1 {
            out_dir.to_path_buf()
        } else {
            let d = out_dir.join(format!("input_{idx}"));
            ensure_dir(&d)?;
            d
        };
        let levels = outputs::ingest_spectrum(input)?;
        let prefix = if inputs.len() == 1 { String::new() } else { format!("input_{idx}/") };
        files.extend(
            stats_pipeline(cfg, &sys, &levels, &sub)?
                .into_iter()
                .map(|f| format!("{prefix}{f}")),
        );
    }
    let mut manifest = RunManifest::new("stats", cfg.to_toml_string(), cfg.solver.seed);
    for f in &files {
        manifest.add_file(out_dir, f)?;
    }
    manifest.add_timing("total", t0.elapsed().as_secs_f64());
    manifest.write(out_dir)?;
    Ok(CommandOutcome { bundle_dir: out_dir.to_path_buf(), files })
}

fn stats_pipeline(
    cfg: &ExperimentConfig,
    sys: &System,
    levels_raw: &[f64],
    out_dir: &Path,
) -> RunResult<Vec<String>> {
    let mut files = Vec::new();

    // degeneracy report on the raw levels
    let mean_spacing = (levels_raw.last().unwrap() - levels_raw[0]) / (levels_raw.len() - 1) as f64;
    let cluster_tol = cfg.analysis.degeneracy_tol * mean_spacing;
    let clusters = stats::degeneracy_count(levels_raw, cluster_tol);
    let mut deg = String::from("{\n  \"clusters\": [\n");
    for (i, c) in clusters.iter().enumerate() {
        deg.push_str(&format!(
            "    {{\"center\": {}, \"multiplicity\": {}}}{}\n",
            c.center,
            c.multiplicity,
            if i + 1 < clusters.len() { "," } else { "" }
        ));
    }
    deg.push_str(&format!("  ],\n  \"tolerance\": {cluster_tol}\n}}\n"));
    std::fs::write(out_dir.join("degeneracy.json"), deg)?;
    files.push("degeneracy.json".into());

    // spacing statistics
    let mut levels: Vec<f64> = if cfg.analysis.collapse_degeneracies {
        clusters.iter().map(|c| c.center).collect()
    } else {
        levels_raw.to_vec()
    };
    if cfg.analysis.trim_fraction > 0.0 {
        levels = stats::trim_low_levels(&levels, cfg.analysis.trim_fraction);
    }
    let weyl_fn = |e: f64| weyl::weyl_count(e, &sys.v1, &sys.v2, &sys.step).unwrap_or(f64::NAN);
    let sample = match cfg.analysis.unfold.as_str() {
        "weyl" => stats::unfold(&levels, UnfoldMethod::Weyl(&weyl_fn))?,
        "polynomial" => stats::unfold(&levels, UnfoldMethod::Polynomial(cfg.analysis.poly_degree))?,
        _ => stats::unfold(&levels, UnfoldMethod::MeanSpacing)?,
    };
    outputs::write_spacing_cdf_csv(&out_dir.join("spacing_cdf.csv"), &sample)?;
    files.push("spacing_cdf.csv".into());
    if sample.spacings.len() >= 50 {
        let hist = stats::spacing_histogram(&sample, 40, 0.0, 4.0)?;
        outputs::write_histogram_csv(&out_dir.join("spacing_pdf.csv"), &hist)?;
        files.push("spacing_pdf.csv".into());
    }
    let ks = stats::ks_summary(&sample)?;
    let summary = format!(
        "{{\n  \"ks_poisson\": {},\n  \"ks_sp\": {},\n  \"ks_goe\": {},\n  \"n_levels\": {},\n  \"window\": [{}, {}],\n  \"unfold\": \"{}\"\n}}\n",
        ks.ks_poisson,
        ks.ks_semi_poisson,
        ks.ks_goe,
        ks.n_levels,
        sample.window.2,
        sample.window.3,
        sample.method,
    );
    std::fs::write(out_dir.join("spacing_summary.json"), summary)?;
    files.push("spacing_summary.json".into());

    // Weyl check
    if levels_raw.len() >= 100 {
        let curve = stats::weyl_check(levels_raw, &weyl_fn)?;
        let rows: Vec<(f64, f64, f64)> = curve
            .iter()
            .enumerate()
            .map(|(i, (e, _))| (*e, i as f64 + 1.0, weyl_fn(*e)))
            .collect();
        outputs::write_weyl_csv(&out_dir.join("weyl.csv"), &rows)?;
        files.push("weyl.csv".into());
    }
    Ok(files)
}

// ---------------------------------------------------------------------------
// concentration
// ---------------------------------------------------------------------------

pub fn run_concentration(
    cfg: &ExperimentConfig,
    bundle: &Path,
    out_dir: &Path,
) -> RunResult<CommandOutcome> {
    let t0 = Instant::now();
    ensure_dir(out_dir)?;
    let sys = system_from(cfg)?;
    if !bundle.join("eigenvectors.meta").exists() {
        return Err(RunError::Ingestion(format!(
            "{}: no eigenvector store in bundle (run spectrum with solver.eigenvectors = true)",
            bundle.display()
        )));
    }
    let manifest = RunManifest::load(bundle)
        .map_err(|e| RunError::Ingestion(format!("{}: {e}", bundle.display())))?;
    if let Err(msg) = manifest.verify(bundle)? {
        return Err(RunError::Ingestion(format!("{}: {msg}", bundle.display())));
    }
    let store = outputs::read_field_store(bundle, "eigenvectors")?;

    let lo = cfg.analysis.window_lo;
    let hi = cfg.analysis.window_hi;
    let first = store.first_index + 1; // 1-based index of the first stored state
    if lo < first || hi + 1 > first + store.fields.len() {
        return Err(RunError::Ingestion(format!(
            "window [{lo}, {hi}] outside the stored states [{}, {}]",
            first,
            first + store.fields.len() - 1
        )));
    }
    let states: Vec<WavefunctionField> = (lo..=hi)
        .map(|n| outputs::field_from_store(&store, n - first))
        .collect();

    // product reference states (step at origin only)
    let products = if sys.step.q1_wall == 0.0 && sys.step.q2_wall == 0.0 {
        let e_top = states.iter().map(|s| s.energy).fold(0.0f64, f64::max) + 1.0;
        let g1 = axis_grid(&store.grid, 0);
        let g2 = axis_grid(&store.grid, 1);
        let k1d = |v: &PotentialSpec, g: &steposc_core::grid::Grid1D| -> RunResult<usize> {
            let omega_floor = v.frequency(e_top).unwrap_or(1.0).max(1e-6);
            Ok(((e_top / omega_floor).ceil() as usize + 2).min(g.n - 1))
        };
        let s1 = solve1d::solve_1d(&sys.v1, k1d(&sys.v1, &g1)?, &g1)?;
        let s2 = solve1d::solve_1d(&sys.v2, k1d(&sys.v2, &g2)?, &g2)?;
        Some(wavefn::product_states(&s1, &s2, &store.grid, &sys.step, e_top)?)
    } else {
        None
    };

    let census = wavefn::concentration_census(
        &states,
        &sys.v1,
        &sys.v2,
        cfg.analysis.threshold,
        products.as_deref(),
    )?;
    outputs::write_census_jsonl(&out_dir.join("census.jsonl"), lo, &census.reports)?;
    let mut files: Vec<String> = vec!["census.jsonl".into()];

    // log-density fields and marginals for the window
    let logs: Vec<Vec<f64>> = states
        .iter()
        .map(|s| wavefn::log_density_export(s))
        .collect::<Result<_, _>>()?;
    let energies: Vec<f64> = states.iter().map(|s| s.energy).collect();
    outputs::write_field_store(out_dir, "logdensity", &store.grid, lo - 1, &energies, &logs)?;
    files.push("logdensity.bin".into());
    files.push("logdensity.meta".into());

    let mut marg = String::from("n,axis,coord,density\n");
    for (i, s) in states.iter().enumerate() {
        let (mh, mv) = wavefn::marginal_means(s);
        for (c, d) in mh.coords.iter().zip(mh.samples.iter()) {
            marg.push_str(&format!("{},horizontal,{c},{d}\n", lo + i));
        }
        for (c, d) in mv.coords.iter().zip(mv.samples.iter()) {
            marg.push_str(&format!("{},vertical,{c},{d}\n", lo + i));
        }
    }
    std::fs::write(out_dir.join("marginals.csv"), marg)?;
    files.push("marginals.csv".into());

    let product_fraction = census.product_like.len() as f64 / census.reports.len() as f64;
    let summary = format!(
        "{{\n  \"window\": [{lo}, {hi}],\n  \"fraction_concentrated\": {},\n  \"product_like\": {:?},\n  \"product_fraction\": {product_fraction},\n  \"threshold\": {}\n}}\n",
        census.fraction_concentrated,
        census.product_like.iter().map(|i| i + lo).collect::<Vec<_>>(),
        cfg.analysis.threshold,
    );
    std::fs::write(out_dir.join("concentration_summary.json"), summary)?;
    files.push("concentration_summary.json".into());

    let mut manifest = RunManifest::new("concentration", cfg.to_toml_string(), cfg.solver.seed);
    for f in &files {
        manifest.add_file(out_dir, f)?;
    }
    manifest.add_timing("total", t0.elapsed().as_secs_f64());
    manifest.write(out_dir)?;
    Ok(CommandOutcome { bundle_dir: out_dir.to_path_buf(), files })
}

// ---------------------------------------------------------------------------
// mixing
// ---------------------------------------------------------------------------

pub fn run_mixing(cfg: &ExperimentConfig, out_dir: &Path) -> RunResult<CommandOutcome> {
    let t0 = Instant::now();
    ensure_dir(out_dir)?;

    let n_max = cfg.analysis.n_list.iter().copied().max().unwrap_or(1);
    let basis_levels = cfg.analysis.j_basis.max(n_max + cfg.analysis.delta_n + 1) + 8;

    // unperturbed configuration
    let mut base_cfg = cfg.clone();
    base_cfg.potential.eps1 = 0.0;
    base_cfg.potential.eps2 = 0.0;
    base_cfg.solver.levels = basis_levels;
    let base_sys = system_from(&base_cfg)?;

    // one grid covering the union of every perturbed Hill region
    let e_max = energy_for_count(&base_sys, basis_levels as f64 * cfg.solver.e_max_margin + 4.0)?;
    let mut grid = build_grid(&base_sys.v1, &base_sys.v2, e_max, &grid_options(cfg))?;
    for eps in &cfg.analysis.eps_list {
        let mut pcfg = cfg.clone();
        pcfg.potential.eps1 = eps[0];
        pcfg.potential.eps2 = eps[1];
        let psys = system_from(&pcfg)?;
        let g = build_grid(&psys.v1, &psys.v2, e_max, &grid_options(cfg))?;
        grid = union_grid(&grid, &g);
    }

    // basis spectrum with vectors
    let ham0 = build_hamiltonian(grid.clone(), &base_sys.v1, &base_sys.v2, &base_sys.step, base_sys.mode)?;
    let mut scfg = solver_config(&base_cfg, true);
    scfg.k = basis_levels;
    let est0 = |count: f64| energy_for_count(&base_sys, count).unwrap_or(f64::NAN);
    let base_spec = solve_parallel(&ham0, 0, basis_levels, &scfg, Some(&est0))?;
    let basis_fields: Vec<WavefunctionField> = base_spec
        .eigenvectors
        .as_ref()
        .unwrap()
        .iter()
        .zip(base_spec.eigenvalues.iter())
        .map(|(v, &e)| wavefn::field_from_solution(&ham0, v, e))
        .collect();

    let e_ref = base_spec
        .eigenvalues
        .get(cfg.analysis.e_ref_index - 1)
        .copied()
        .ok_or_else(|| {
            RunError::Convergence(format!(
                "reference level {} not available in a {basis_levels}-level basis",
                cfg.analysis.e_ref_index
            ))
        })?;
    let mean_spacing =
        (base_spec.eigenvalues[basis_levels - 1] - base_spec.eigenvalues[0]) / (basis_levels - 1) as f64;
    let cluster_tol = cfg.analysis.degeneracy_tol * mean_spacing;

    let mut rows: Vec<(f64, f64, f64, usize, f64, f64)> = Vec::new();
    let mut warnings = Vec::new();
    for eps in &cfg.analysis.eps_list {
        let mut pcfg = cfg.clone();
        pcfg.potential.eps1 = eps[0];
        pcfg.potential.eps2 = eps[1];
        let psys = system_from(&pcfg)?;
        let ham = if eps[0] == 0.0 && eps[1] == 0.0 {
            ham0.clone()
        } else {
            build_hamiltonian(grid.clone(), &psys.v1, &psys.v2, &psys.step, psys.mode)?
        };
        let est = |count: f64| energy_for_count(&psys, count).unwrap_or(f64::NAN);
        for &n in &cfg.analysis.n_list {
            if n + cfg.analysis.delta_n > basis_levels {
                return Err(RunError::Convergence(format!(
                    "window N = {n} + dN = {} exceeds the basis depth {basis_levels}",
                    cfg.analysis.delta_n
                )));
            }
            let mut wcfg = solver_config(cfg, true);
            wcfg.k = cfg.analysis.delta_n + 1;
            let slice =
                solve_parallel(&ham, n - 1, cfg.analysis.delta_n + 1, &wcfg, Some(&est))?;
            let perturbed: Vec<WavefunctionField> = slice
                .eigenvectors
                .as_ref()
                .unwrap()
                .iter()
                .zip(slice.eigenvalues.iter())
                .map(|(v, &e)| wavefn::field_from_solution(&ham, v, e))
                .collect();
            let params = wavefn::MixingParams {
                n: n - 1,
                delta_n: cfg.analysis.delta_n,
                j: cfg.analysis.j_basis,
                delta: cfg.analysis.delta,
                cluster_tol,
            };
            let report = wavefn::mixing_metrics(
                &perturbed,
                &basis_fields,
                &base_spec.eigenvalues,
                &params,
            )?;
            if let Some(w) = &report.warning {
                warnings.push(format!("eps = ({}, {}), N = {n}: {w}", eps[0], eps[1]));
            }
            let e_n = base_spec.eigenvalues[n - 1];
            let x = wavefn::scaled_epsilon(eps[0], e_n, e_ref);
            rows.push((x, report.p, report.t, n, eps[0], eps[1]));
        }
    }

    outputs::write_mixing_csv(&out_dir.join("mixing.csv"), &rows)?;
    let mut files: Vec<String> = vec!["mixing.csv".into()];
    let summary = format!(
        "{{\n  \"e_ref\": {e_ref},\n  \"e_ref_index\": {},\n  \"j_basis\": {},\n  \"delta\": {},\n  \"warnings\": {:?}\n}}\n",
        cfg.analysis.e_ref_index, cfg.analysis.j_basis, cfg.analysis.delta, warnings,
    );
    std::fs::write(out_dir.join("mixing_summary.json"), summary)?;
    files.push("mixing_summary.json".into());

    let mut manifest = RunManifest::new("mixing", cfg.to_toml_string(), cfg.solver.seed);
    for f in &files {
        manifest.add_file(out_dir, f)?;
    }
    manifest.add_timing("total", t0.elapsed().as_secs_f64());
    manifest.write(out_dir)?;
    Ok(CommandOutcome { bundle_dir: out_dir.to_path_buf(), files })
}

// ---------------------------------------------------------------------------
// synthetic self-tests used by the stats presets
// ---------------------------------------------------------------------------

/// Spacing sample of a seeded synthetic Poisson spectrum; KS against
/// Poisson must be the smallest of the three laws.
pub fn poisson_self_test(seed: u64) -> RunResult<bool> {
    let levels = stats::synthetic_levels(ReferenceLaw::Poisson, 2000, seed);
    let sample = stats::unfold(&levels, UnfoldMethod::MeanSpacing)?;
    let ks = stats::ks_summary(&sample)?;
    Ok(ks.ks_poisson < ks.ks_semi_poisson && ks.ks_poisson < ks.ks_goe)
}
