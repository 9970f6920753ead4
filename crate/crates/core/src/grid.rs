//! Truncated 2D tensor grids for the finite-difference Hamiltonian.
//!
//! The lattice is anchored at the origin (node coordinates are integer
//! multiples of the spacing), so the step walls at 0 and the unshifted
//! potential minimum always land on nodes. Outer boundary nodes carry the
//! Dirichlet condition and are eliminated; only interior nodes are unknowns.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::potential::PotentialSpec;

/// Interior-node tensor grid.
#[derive(Debug, Clone)]
pub struct Grid2D {
    /// Outer Dirichlet boundary per axis: `[lo, hi]` with ψ = 0 at both.
    pub extents: [[f64; 2]; 2],
    /// Interior node counts per axis.
    pub n: [usize; 2],
    /// Spacings per axis.
    pub h: [f64; 2],
}

impl Grid2D {
    /// Coordinate of interior node `i` along `axis` (0-based).
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.extents[axis][0] + (i as f64 + 1.0) * self.h[axis]
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Total interior node count.
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index of node (i1, i2).
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n[1] + i2
    }

    /// Cell weight h1·h2 of the L² quadrature.
    pub fn cell_weight(&self) -> f64 {
        self.h[0] * self.h[1]
    }
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    /// Points per de Broglie wavelength at the target energy.
    pub points_per_wavelength: f64,
    /// Confinement factor c: the boundary satisfies V ≥ c·E_max.
    pub confinement: f64,
    /// Hard override of the spacing (both axes).
    pub h_override: Option<f64>,
    /// Rough memory budget for the banded factorization.
    pub memory_budget_bytes: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points_per_wavelength: 8.0,
            confinement: 1.8,
            h_override: None,
            memory_budget_bytes: 8 * 1024 * 1024 * 1024,
        }
    }
}

/// Size a grid for states up to `e_max`: spacing from the shortest
/// wavelength, extents from the confinement condition V(boundary) ≥ c·E_max,
/// snapped outward onto the origin-anchored lattice.
pub fn build_grid(
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    e_max: f64,
    opts: &GridOptions,
) -> Result<Grid2D> {
    if e_max <= 0.0 {
        return Err(CoreError::Domain("grid sizing needs a positive target energy".into()));
    }
    if opts.points_per_wavelength < 4.0 && opts.h_override.is_none() {
        return Err(CoreError::Domain(alloc::format!(
            "points_per_wavelength must be >= 4, got {}",
            opts.points_per_wavelength
        )));
    }
    let lambda_min = 2.0 * core::f64::consts::PI / (2.0 * e_max).sqrt();
    let h = opts.h_override.unwrap_or(lambda_min / opts.points_per_wavelength);

    let mut extents = [[0.0; 2]; 2];
    let mut n = [0usize; 2];
    for (axis, v) in [v1, v2].into_iter().enumerate() {
        let (q_lo, q_hi) = v.turning_points(opts.confinement * e_max)?;
        let lo_idx = (q_lo / h).floor() as i64;
        let hi_idx = (q_hi / h).ceil() as i64;
        extents[axis] = [lo_idx as f64 * h, hi_idx as f64 * h];
        let count = hi_idx - lo_idx - 1;
        if count < 3 {
            return Err(CoreError::Domain("grid degenerate: fewer than 3 interior nodes".into()));
        }
        n[axis] = count as usize;
    }

    let total = n[0] * n[1];
    let band = n[0].min(n[1]) + 1;
    let bytes = (band as u64 + 2) * total as u64 * 8;
    if bytes > opts.memory_budget_bytes {
        return Err(CoreError::Sizing {
            required_bytes: bytes,
            budget_bytes: opts.memory_budget_bytes,
            hint: alloc::format!(
                "grid is {} x {}; reduce points_per_wavelength (h = {h}), the confinement factor, or e_max",
                n[0], n[1]
            ),
        });
    }
    Ok(Grid2D { extents, n, h: [h, h] })
}

/// Interior nodes of one axis (a 1D restriction of the 2D sizing).
#[derive(Debug, Clone, Copy)]
pub struct Grid1D {
    pub lo: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid1D {
    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 1.0) * self.h
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

/// View one axis of a 2D grid as a 1D grid (same nodes).
pub fn axis_grid(grid: &Grid2D, axis: usize) -> Grid1D {
    Grid1D { lo: grid.extents[axis][0], n: grid.n[axis], h: grid.h[axis] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_matches_stated_formulas() {
        // ω = (1,1), E_max = 10, ppw = 8: h ≈ 0.175, extents ≈ [-6, 6]²
        let v = PotentialSpec::harmonic(1.0);
        let g = build_grid(&v, &v, 10.0, &GridOptions::default()).unwrap();
        assert!((g.h[0] - 0.1756).abs() < 2e-3, "h = {}", g.h[0]);
        for axis in 0..2 {
            assert!((g.extents[axis][0] + 6.0).abs() < 0.2, "{:?}", g.extents);
            assert!((g.extents[axis][1] - 6.0).abs() < 0.2);
        }
        // origin is a lattice point
        let frac = (g.extents[0][0] / g.h[0]).round() - g.extents[0][0] / g.h[0];
        assert!(frac.abs() < 1e-9);
    }

    #[test]
    fn sizing_is_monotone_in_energy() {
        let v = PotentialSpec::harmonic(1.0);
        let small = build_grid(&v, &v, 1.0, &GridOptions::default()).unwrap();
        let large = build_grid(&v, &v, 20.0, &GridOptions::default()).unwrap();
        assert!(small.n[0] < large.n[0]);
        assert!(small.h[0] > large.h[0]);
        assert!(small.extents[0][1] < large.extents[0][1]);
    }

    #[test]
    fn shifted_minimum_gives_asymmetric_extents() {
        let v1 = PotentialSpec::harmonic_shifted(1.0, 1.5);
        let v2 = PotentialSpec::harmonic_shifted(1.0, 0.75);
        let g = build_grid(&v1, &v2, 8.0, &GridOptions::default()).unwrap();
        assert!((g.extents[0][0] + g.extents[0][1] - 2.0 * 1.5).abs() < 2.0 * g.h[0]);
        assert!((g.extents[1][0] + g.extents[1][1] - 2.0 * 0.75).abs() < 2.0 * g.h[1]);
    }

    #[test]
    fn memory_budget_violation_reports_sizing_error() {
        let v = PotentialSpec::harmonic(1.0);
        let opts = GridOptions { memory_budget_bytes: 1024, ..GridOptions::default() };
        match build_grid(&v, &v, 50.0, &opts) {
            Err(CoreError::Sizing { required_bytes, hint, .. }) => {
                assert!(required_bytes > 1024);
                assert!(hint.contains("points_per_wavelength"));
            }
            other => panic!("expected sizing error, got {other:?}"),
        }
    }
}
