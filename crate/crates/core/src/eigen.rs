//! Spectrum slicing: compute a contiguous run of the lowest eigenpairs of
//! the discrete Hamiltonian through inertia-verified shift-invert windows.
//!
//! The driver probes LDLᵀ inertias to place window boundaries in spectral
//! gaps (guided by a counting-function estimate when one is supplied), then
//! solves each window independently. Window contents are verified against
//! the inertia counts, so no eigenvalue can be silently missed; degenerate
//! clusters are resolved by the deflation restarts inside the window solver.

use alloc::vec::Vec;

use crate::banded::{factor_ldl_in_place, BandedSym};
use crate::error::{CoreError, Result};
use crate::lanczos::{solve_window, LanczosParams, WindowTarget};
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::operator::DiscreteHamiltonian;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Number of lowest eigenpairs.
    pub k: usize,
    /// Relative residual tolerance ‖Hx−λx‖ / max(1, |λ|).
    pub tol: f64,
    /// Lanczos Ritz acceptance tolerance.
    pub ritz_tol: f64,
    /// Target eigenvalues per window.
    pub window_size: usize,
    /// Lanczos iteration cap per window attempt (0 = automatic).
    pub max_lanczos: usize,
    /// Deflation restarts per window.
    pub max_restarts: usize,
    pub seed: u64,
    /// Keep eigenvectors (L²-normalized on the grid).
    pub with_vectors: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 50,
            tol: 1e-8,
            ritz_tol: 1e-10,
            window_size: 64,
            max_lanczos: 0,
            max_restarts: 5,
            seed: 42,
            with_vectors: false,
        }
    }
}

/// Sorted eigenvalues with residual norms and optional grid eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Global index of the first entry (0 = ground state).
    pub first_index: usize,
    pub eigenvalues: Vec<f64>,
    /// True relative residuals ‖Hx−λx‖ / max(1, |λ|).
    pub residuals: Vec<f64>,
    /// L²-normalized eigenvectors (weight h1·h2), when requested.
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// A planned slice [lo, hi) with its exact inertia bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct WindowPlan {
    pub lo: f64,
    pub hi: f64,
    /// Eigenvalues below `lo`.
    pub count_below: usize,
    /// Eigenvalues inside [lo, hi).
    pub expected: usize,
}

/// Shared probing state: factorization buffer plus the probe cache.
pub struct Slicer<'h> {
    h: &'h DiscreteHamiltonian,
    buf: Option<BandedSym>,
    /// (shift, eigenvalues strictly below), ascending in shift.
    probes: Vec<(f64, usize)>,
    scale: f64,
}

impl<'h> Slicer<'h> {
    pub fn new(h: &'h DiscreteHamiltonian) -> Self {
        // physical spectral scale: diagonal spread without the penalty rows
        let scale = h
            .diagonal()
            .iter()
            .copied()
            .filter(|d| *d < crate::operator::PENALTY * 0.5)
            .fold(1.0f64, f64::max);
        Self { h, buf: None, probes: Vec::new(), scale }
    }

    fn take_buf(&mut self) -> BandedSym {
        match self.buf.take() {
            Some(b) if b.n == self.h.dim() && b.b == self.h.bandwidth => b,
            _ => BandedSym::zeros(self.h.dim(), self.h.bandwidth),
        }
    }

    /// Factor H − σI (with deterministic shift nudging on pivot breakdown)
    /// and return the factored buffer plus the shift actually used.
    pub fn factor_at(&mut self, sigma: f64) -> Result<(BandedSym, f64, usize)> {
        let mut shift = sigma;
        let mut last_err = None;
        for attempt in 0..6 {
            let mut buf = self.take_buf();
            self.h.fill_banded(shift, &mut buf);
            match factor_ldl_in_place(&mut buf, 1e-14 * self.scale) {
                Ok(neg) => return Ok((buf, shift, neg)),
                Err(e) => {
                    self.buf = Some(buf);
                    last_err = Some(e);
                    let eps = self.scale * 1e-10 * 4.0f64.powi(attempt);
                    shift = sigma + if attempt % 2 == 0 { eps } else { -eps };
                }
            }
        }
        Err(last_err.unwrap_or_else(|| CoreError::Numerics("factorization failed".into())))
    }

    /// Number of eigenvalues strictly below σ.
    pub fn inertia(&mut self, sigma: f64) -> Result<usize> {
        if let Some(&(_, c)) = self
            .probes
            .iter()
            .find(|(s, _)| (*s - sigma).abs() <= 1e-14 * sigma.abs().max(1.0))
        {
            return Ok(c);
        }
        let (buf, shift, neg) = self.factor_at(sigma)?;
        self.buf = Some(buf);
        let pos = self.probes.partition_point(|(s, _)| *s < shift);
        self.probes.insert(pos, (shift, neg));
        Ok(neg)
    }

    /// Lower bound of the spectrum (Gershgorin).
    pub fn spectral_floor(&self) -> f64 {
        let row_off = 2.0 * (0.5 / (self.h.grid.h[0] * self.h.grid.h[0])
            + 0.5 / (self.h.grid.h[1] * self.h.grid.h[1]));
        self.h
            .diagonal()
            .iter()
            .fold(f64::MAX, |m, d| m.min(*d))
            - row_off
            - 1.0
    }
}

/// Place window boundaries so that each window holds at most `window_size`
/// eigenvalues and the global index range [first, first+count) is covered.
///
/// `estimator` maps a level count to an energy guess (e.g. inverted Weyl
/// counting); without one, boundaries come from bisection alone.
pub fn plan_windows(
    h: &DiscreteHamiltonian,
    first: usize,
    count: usize,
    window_size: usize,
    estimator: Option<&dyn Fn(f64) -> f64>,
) -> Result<Vec<WindowPlan>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = h.dim();
    if first + count > n {
        return Err(CoreError::Domain(alloc::format!(
            "requested eigenpairs [{first}, {}) of a dimension-{n} operator",
            first + count
        )));
    }
    let mut slicer = Slicer::new(h);
    let floor = slicer.spectral_floor();
    let goal = first + count;

    // bracket the top: an energy with inertia >= goal
    let mut hi_guess = match estimator {
        Some(est) => est(goal as f64 + 2.0),
        None => floor + 1.0,
    };
    let mut hi_count = slicer.inertia(hi_guess)?;
    let mut grow = (hi_guess - floor).abs().max(1.0);
    while hi_count < goal {
        hi_guess += grow;
        grow *= 2.0;
        hi_count = slicer.inertia(hi_guess)?;
        if !hi_guess.is_finite() {
            return Err(CoreError::Numerics("failed to bracket the requested spectrum range".into()));
        }
    }

    // bracket the bottom boundary for `first`
    let mut lo_bound = floor;
    if first > 0 {
        let mut guess = match estimator {
            Some(est) => est(first as f64),
            None => floor + 0.5 * (hi_guess - floor),
        };
        // walk down until inertia <= first
        let mut c = slicer.inertia(guess)?;
        let mut step = (hi_guess - floor).abs().max(1.0);
        while c > first {
            guess -= step;
            step *= 2.0;
            if guess < floor {
                guess = floor;
                break;
            }
            c = slicer.inertia(guess)?;
        }
        lo_bound = guess;
    }
    let lo_count = if first == 0 { 0 } else { slicer.inertia(lo_bound)? };

    // refine: subdivide any adjacent probe pair spanning too many eigenvalues
    let mut work = alloc::vec![(lo_bound, lo_count, hi_guess, hi_count)];
    let mut boundaries: Vec<(f64, usize)> = alloc::vec![(lo_bound, lo_count), (hi_guess, hi_count)];
    let mut guard = 0;
    while let Some((a, ca, b, cb)) = work.pop() {
        guard += 1;
        if guard > 4096 {
            return Err(CoreError::Numerics("window planning did not converge".into()));
        }
        // only the part of the spectrum covering [first, goal) needs slicing
        if cb <= first || ca >= goal {
            continue;
        }
        let inside = cb.saturating_sub(ca);
        if inside <= window_size || (b - a) < 1e-10 * b.abs().max(1.0) {
            continue;
        }
        // aim between count targets, preferring the estimator's geometry
        let target = ca + inside / 2;
        let mid = match estimator {
            Some(est) => {
                let g = est(target as f64);
                if g > a && g < b {
                    g
                } else {
                    0.5 * (a + b)
                }
            }
            None => 0.5 * (a + b),
        };
        let cm = slicer.inertia(mid)?;
        let pos = boundaries.partition_point(|(s, _)| *s < mid);
        boundaries.insert(pos, (mid, cm));
        work.push((a, ca, mid, cm));
        work.push((mid, cm, b, cb));
    }

    // assemble plans clipped to [first, first+count)
    let mut plans = Vec::new();
    for w in boundaries.windows(2) {
        let (a, ca) = w[0];
        let (b, cb) = w[1];
        if cb <= first || ca >= goal || cb == ca {
            continue;
        }
        plans.push(WindowPlan { lo: a, hi: b, count_below: ca, expected: cb - ca });
    }
    Ok(plans)
}

/// Solve one planned window; retries with larger budgets and finally splits
/// the window if the Lanczos run cannot account for every expected
/// eigenvalue.
pub fn solve_window_plan(
    h: &DiscreteHamiltonian,
    plan: &WindowPlan,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    solve_window_rec(h, plan, cfg, 0)
}

fn solve_window_rec(
    h: &DiscreteHamiltonian,
    plan: &WindowPlan,
    cfg: &SolverConfig,
    depth: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if plan.expected == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut slicer = Slicer::new(h);
    let auto_m = 4 * plan.expected + 48;
    let base_m = if cfg.max_lanczos > 0 { cfg.max_lanczos } else { auto_m };

    for round in 0..2 {
        let sigma = 0.5 * (plan.lo + plan.hi);
        let (factor, shift, _) = slicer.factor_at(sigma)?;
        let params = LanczosParams {
            max_m: base_m + round * base_m / 2,
            max_restarts: cfg.max_restarts,
            ritz_tol: cfg.ritz_tol,
            check_every: 16,
            seed: cfg.seed ^ (plan.count_below as u64) << 20 ^ (round as u64),
        };
        let target = WindowTarget { lo: plan.lo, hi: plan.hi, expected: plan.expected };
        match solve_window(h, &factor, shift, &target, &params) {
            Ok(sol) => return Ok((sol.values, sol.vectors)),
            Err(CoreError::Convergence { .. }) if round + 1 < 2 => continue,
            Err(CoreError::Convergence { .. }) if depth < 3 && plan.expected > 1 => {
                // split the window at a fresh inertia probe and recurse
                drop(factor);
                let mid = 0.5 * (plan.lo + plan.hi);
                let cm = slicer.inertia(mid)?;
                let cm = cm.clamp(plan.count_below, plan.count_below + plan.expected);
                let left = WindowPlan {
                    lo: plan.lo,
                    hi: mid,
                    count_below: plan.count_below,
                    expected: cm - plan.count_below,
                };
                let right = WindowPlan {
                    lo: mid,
                    hi: plan.hi,
                    count_below: cm,
                    expected: plan.count_below + plan.expected - cm,
                };
                let (mut lv, mut lx) = solve_window_rec(h, &left, cfg, depth + 1)?;
                let (rv, rx) = solve_window_rec(h, &right, cfg, depth + 1)?;
                lv.extend(rv);
                lx.extend(rx);
                return Ok((lv, lx));
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("retry loop always returns")
}

/// Eigenpairs with global indices [first, first + count), via sequential
/// window solves. The CLI layer parallelizes the same plan across threads.
pub fn slice_spectrum(
    h: &DiscreteHamiltonian,
    first: usize,
    count: usize,
    cfg: &SolverConfig,
    estimator: Option<&dyn Fn(f64) -> f64>,
) -> Result<Spectrum> {
    let plans = plan_windows(h, first, count, cfg.window_size, estimator)?;
    let mut values: Vec<f64> = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for plan in &plans {
        let (v, x) = solve_window_plan(h, plan, cfg)?;
        values.extend(v);
        vectors.extend(x);
    }
    let base = plans.iter().map(|p| p.count_below).min().unwrap_or(first);
    assemble_spectrum(h, first, count, base, values, vectors, cfg)
}

/// Merge window outputs into the final spectrum, computing true residuals
/// and applying the L² weight. `base` is the global index of the smallest
/// collected eigenvalue (window plans may start below `first`).
#[allow(clippy::too_many_arguments)]
pub fn assemble_spectrum(
    h: &DiscreteHamiltonian,
    first: usize,
    count: usize,
    base: usize,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    cfg: &SolverConfig,
) -> Result<Spectrum> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let skip = first.saturating_sub(base);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let mut out_vectors: Vec<Vec<f64>> = Vec::new();
    let weight = 1.0 / h.grid.cell_weight().sqrt();
    for &idx in order.iter().skip(skip) {
        if eigenvalues.len() == count {
            break;
        }
        let lam = values[idx];
        let x = &vectors[idx];
        let res = h.residual_norm(lam, x) / lam.abs().max(1.0);
        eigenvalues.push(lam);
        residuals.push(res);
        if cfg.with_vectors {
            out_vectors.push(x.iter().map(|v| v * weight).collect());
        }
    }
    if eigenvalues.len() != count {
        return Err(CoreError::Convergence {
            converged: eigenvalues.len(),
            requested: count,
            detail: "window plans did not cover the requested index range".into(),
        });
    }
    Ok(Spectrum {
        first_index: first,
        eigenvalues,
        residuals,
        eigenvectors: cfg.with_vectors.then_some(out_vectors),
    })
}

/// The `k` lowest eigenpairs.
pub fn lowest_eigenpairs(h: &DiscreteHamiltonian, cfg: &SolverConfig) -> Result<Spectrum> {
    slice_spectrum(h, 0, cfg.k, cfg, None)
}

/// Richardson extrapolation of matched eigenvalue lists computed at spacings
/// h and h/r (order-2 base scheme): E* = (r²·E_fine − E_coarse)/(r² − 1).
pub fn richardson(coarse: &[f64], fine: &[f64], ratio: f64) -> Vec<f64> {
    let r2 = ratio * ratio;
    coarse
        .iter()
        .zip(fine.iter())
        .map(|(c, f)| (r2 * f - c) / (r2 - 1.0))
        .collect()
}

/// Observed convergence order and extrapolated values from three grids in
/// refinement ratio 2.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// log2((E_h − E_{h/2}) / (E_{h/2} − E_{h/4})) per level.
    pub observed_order: Vec<f64>,
    /// Richardson-extrapolated values from the two finest grids.
    pub extrapolated: Vec<f64>,
    /// Levels whose differences did not shrink monotonically.
    pub non_monotone: Vec<usize>,
}

pub fn convergence_study(e_h: &[f64], e_h2: &[f64], e_h4: &[f64]) -> Result<ConvergenceReport> {
    let k = e_h.len().min(e_h2.len()).min(e_h4.len());
    if k == 0 {
        return Err(CoreError::Domain("convergence study needs matched eigenvalue lists".into()));
    }
    let mut observed_order = Vec::with_capacity(k);
    let mut non_monotone = Vec::new();
    for i in 0..k {
        let d1 = e_h[i] - e_h2[i];
        let d2 = e_h2[i] - e_h4[i];
        if d2 == 0.0 || d1 / d2 <= 0.0 {
            non_monotone.push(i);
            observed_order.push(f64::NAN);
        } else {
            observed_order.push((d1 / d2).abs().ln() / core::f64::consts::LN_2);
        }
    }
    Ok(ConvergenceReport {
        observed_order,
        extrapolated: richardson(&e_h2[..k], &e_h4[..k], 2.0),
        non_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StepRegion;
    use crate::grid::{axis_grid, build_grid, GridOptions};
    use crate::operator::{build_hamiltonian, StepMode};
    use crate::potential::PotentialSpec;
    use crate::tridiag;

    const SQRT2: f64 = core::f64::consts::SQRT_2;

    fn build(omega2: f64, e_max: f64, ppw: f64, step: Option<StepRegion>) -> DiscreteHamiltonian {
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(omega2);
        let opts = GridOptions { points_per_wavelength: ppw, ..GridOptions::default() };
        let grid = build_grid(&v1, &v2, e_max, &opts).unwrap();
        let far = StepRegion::new(-1e6, -1e6).unwrap();
        build_hamiltonian(grid, &v1, &v2, &step.unwrap_or(far), StepMode::ExcludedNodes).unwrap()
    }

    /// Matrix-exact oracle for the smooth (wall-free) operator: the 5-point
    /// FD Hamiltonian is a tensor sum, so its spectrum is exactly the set of
    /// sums of the two 1D tridiagonal spectra (computed here by independent
    /// Sturm bisection).
    fn tensor_oracle(ham: &DiscreteHamiltonian, v1: &PotentialSpec, v2: &PotentialSpec, k: usize) -> Vec<f64> {
        let mut per_axis: Vec<Vec<f64>> = Vec::new();
        for (axis, v) in [v1, v2].into_iter().enumerate() {
            let g = axis_grid(&ham.grid, axis);
            let d: Vec<f64> = (0..g.n).map(|i| 1.0 / (g.h * g.h) + v.value(g.coord(i))).collect();
            let e = alloc::vec![-0.5 / (g.h * g.h); g.n - 1];
            per_axis.push(tridiag::lowest_eigenvalues(&d, &e, (3 * k).min(g.n)));
        }
        let mut sums: Vec<f64> = per_axis[0]
            .iter()
            .flat_map(|a| per_axis[1].iter().map(move |b| a + b))
            .collect();
        sums.sort_by(f64::total_cmp);
        sums.truncate(k);
        sums
    }

    #[test]
    fn smooth_solver_matches_tensor_oracle() {
        let ham = build(SQRT2, 8.0, 8.0, None);
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(SQRT2);
        let cfg = SolverConfig { k: 12, with_vectors: true, ..SolverConfig::default() };
        let spec = lowest_eigenpairs(&ham, &cfg).unwrap();
        let oracle = tensor_oracle(&ham, &v1, &v2, 12);
        for (i, (got, want)) in spec.eigenvalues.iter().zip(oracle.iter()).enumerate() {
            assert!(
                (got - want).abs() < 1e-8 * want.max(1.0),
                "level {i}: {got} vs oracle {want}"
            );
        }
        for (i, r) in spec.residuals.iter().enumerate() {
            assert!(*r < 1e-8, "residual {i} = {r:.2e}");
        }
        // orthonormality of returned vectors (L² weight)
        let w = ham.grid.cell_weight();
        let vs = spec.eigenvectors.as_ref().unwrap();
        for a in 0..vs.len() {
            for b in a..vs.len() {
                let dot: f64 = vs[a].iter().zip(vs[b].iter()).map(|(x, y)| x * y).sum::<f64>() * w;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "({a},{b}): {dot}");
            }
        }
        // continuum sanity: low levels approximate (k1+1/2) + sqrt(2)(k2+1/2)
        assert!((spec.eigenvalues[0] - (0.5 + SQRT2 * 0.5)).abs() < 0.02);
    }

    #[test]
    fn degenerate_resonant_clusters_are_fully_resolved() {
        // ω = (1,1) on a symmetric grid: the tensor oracle has exactly
        // degenerate clusters (e_i + e_j = e_j + e_i); slicing plus deflation
        // restarts must find every copy
        let ham = build(1.0, 7.0, 7.0, None);
        let v = PotentialSpec::harmonic(1.0);
        let cfg = SolverConfig { k: 15, window_size: 6, ..SolverConfig::default() };
        let spec = lowest_eigenpairs(&ham, &cfg).unwrap();
        let oracle = tensor_oracle(&ham, &v, &v, 15);
        for (i, (got, want)) in spec.eigenvalues.iter().zip(oracle.iter()).enumerate() {
            assert!(
                (got - want).abs() < 1e-8 * want.max(1.0),
                "level {i}: {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn step_spectrum_dominates_smooth_spectrum() {
        // excluding the quadrant can only raise eigenvalues (Cauchy
        // interlacing on the matched grid)
        let smooth = build(1.0, 6.0, 8.0, None);
        let stepped = build(1.0, 6.0, 8.0, Some(StepRegion::origin()));
        let cfg = SolverConfig { k: 10, ..SolverConfig::default() };
        let es = lowest_eigenpairs(&smooth, &cfg).unwrap();
        let et = lowest_eigenpairs(&stepped, &cfg).unwrap();
        for i in 0..10 {
            assert!(
                et.eigenvalues[i] >= es.eigenvalues[i] - 1e-10,
                "level {i}: step {} < smooth {}",
                et.eigenvalues[i],
                es.eigenvalues[i]
            );
        }
    }

    #[test]
    fn penalty_and_excluded_modes_agree() {
        let v = PotentialSpec::harmonic(1.0);
        let opts = GridOptions { points_per_wavelength: 8.0, ..GridOptions::default() };
        let grid = build_grid(&v, &v, 6.0, &opts).unwrap();
        let step = StepRegion::origin();
        let hx = build_hamiltonian(grid.clone(), &v, &v, &step, StepMode::ExcludedNodes).unwrap();
        let hp = build_hamiltonian(grid, &v, &v, &step, StepMode::Penalty).unwrap();
        let cfg = SolverConfig { k: 12, ..SolverConfig::default() };
        let ex = lowest_eigenpairs(&hx, &cfg).unwrap();
        let ep = lowest_eigenpairs(&hp, &cfg).unwrap();
        for i in 0..12 {
            let rel = (ex.eigenvalues[i] - ep.eigenvalues[i]).abs() / ex.eigenvalues[i];
            assert!(
                rel < 1e-6,
                "level {i}: excluded {} vs penalty {}",
                ex.eigenvalues[i],
                ep.eigenvalues[i]
            );
        }
    }

    #[test]
    fn slice_with_nonzero_first_index_matches_full_run() {
        let ham = build(SQRT2, 8.0, 6.0, None);
        let cfg = SolverConfig { k: 20, ..SolverConfig::default() };
        let full = lowest_eigenpairs(&ham, &cfg).unwrap();
        let part = slice_spectrum(&ham, 8, 6, &cfg, None).unwrap();
        for i in 0..6 {
            assert!(
                (part.eigenvalues[i] - full.eigenvalues[8 + i]).abs()
                    < 1e-9 * full.eigenvalues[8 + i],
                "offset level {i}: {} vs {}",
                part.eigenvalues[i],
                full.eigenvalues[8 + i]
            );
        }
    }

    #[test]
    fn richardson_extrapolation_and_order_detection() {
        // synthetic second-order sequence E(h) = 3 + c h² (+ c' h⁴)
        let e = |h: f64| 3.0 + 0.7 * h * h + 0.02 * h * h * h * h;
        let report = convergence_study(&[e(0.4)], &[e(0.2)], &[e(0.1)]).unwrap();
        assert!((report.observed_order[0] - 2.0).abs() < 0.05, "{:?}", report.observed_order);
        assert!((report.extrapolated[0] - 3.0).abs() < 1e-4);
        assert!(report.non_monotone.is_empty());
    }
}
