//! 1D Schrödinger solver on the tridiagonal finite-difference operator,
//! with parity labels for even wells (used by the product-state
//! construction and the WKB checks).

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::grid::Grid1D;
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::potential::PotentialSpec;
use crate::tridiag;

/// Sign symmetry of a 1D eigenfunction of an even well: even-index states
/// are even, odd-index states are odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_index(k: usize) -> Self {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum1D {
    pub grid: Grid1D,
    pub energies: Vec<f64>,
    /// L²-normalized on the grid: Σ ψ² h = 1.
    pub wavefunctions: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub parity: Vec<Parity>,
}

/// Lowest `k` eigenpairs of −½ d²/dq² + V with Dirichlet truncation.
pub fn solve_1d(v: &PotentialSpec, k: usize, grid: &Grid1D) -> Result<Spectrum1D> {
    let n = grid.n;
    if k >= n {
        return Err(CoreError::Domain(alloc::format!(
            "requested {k} levels of a {n}-point 1D grid"
        )));
    }
    let h = grid.h;
    let diag: Vec<f64> = (0..n).map(|i| 1.0 / (h * h) + v.value(grid.coord(i))).collect();
    let off = alloc::vec![-0.5 / (h * h); n - 1];

    let energies = tridiag::lowest_eigenvalues(&diag, &off, k);
    let mut wavefunctions = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (idx, &lam) in energies.iter().enumerate() {
        let mut x = tridiag::inverse_iteration(&diag, &off, lam, 101 + idx as u64);
        // deterministic sign: largest-magnitude component positive
        let (imax, _) = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty eigenvector");
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|t| *t = -*t);
        }
        // residual before the L² weight
        let mut acc2 = 0.0f64;
        for i in 0..n {
            let mut r = (diag[i] - lam) * x[i];
            if i > 0 {
                r += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                r += off[i] * x[i + 1];
            }
            acc2 += r * r;
        }
        residuals.push(acc2.sqrt() / lam.abs().max(1.0));
        let scale = 1.0 / h.sqrt();
        wavefunctions.push(x.into_iter().map(|t| t * scale).collect());
    }
    let parity = (0..k).map(Parity::of_index).collect();
    Ok(Spectrum1D { grid: *grid, energies, wavefunctions, residuals, parity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic_grid(e_max: f64, ppw: f64) -> Grid1D {
        let lambda = 2.0 * core::f64::consts::PI / (2.0 * e_max).sqrt();
        let h = lambda / ppw;
        let r = (2.0 * 1.8 * e_max).sqrt();
        let m = (r / h).ceil() as i64;
        Grid1D { lo: -(m as f64) * h, n: (2 * m - 1) as usize, h }
    }

    #[test]
    fn harmonic_ladder_at_ppw_10() {
        let v = PotentialSpec::harmonic(1.0);
        let grid = harmonic_grid(8.0, 10.0);
        let spec = solve_1d(&v, 8, &grid).unwrap();
        // second-order truncation: |dE| is about (h²/16)(E² + 1/4)
        let h = grid.h;
        for (j, e) in spec.energies.iter().enumerate() {
            let want = j as f64 + 0.5;
            let bound = 2.0 * h * h / 16.0 * (want * want + 0.25) + 1e-6;
            assert!(
                (e - want).abs() < bound,
                "level {j}: {e} vs {want} (bound {bound:.2e})"
            );
        }
        assert!((spec.energies[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn parity_labels_match_grid_symmetry() {
        let v = PotentialSpec::harmonic(1.0);
        let grid = harmonic_grid(6.0, 10.0);
        let spec = solve_1d(&v, 6, &grid).unwrap();
        let n = grid.n;
        for (k, psi) in spec.wavefunctions.iter().enumerate() {
            let sign = match spec.parity[k] {
                Parity::Even => 1.0,
                Parity::Odd => -1.0,
            };
            let mut worst = 0.0f64;
            let amp = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..n {
                let mirrored = sign * psi[n - 1 - i];
                worst = worst.max((psi[i] - mirrored).abs());
            }
            assert!(worst / amp < 1e-6, "state {k}: parity violation {worst}");
        }
    }

    #[test]
    fn normalization_is_weighted_l2() {
        let v = PotentialSpec::harmonic(1.0);
        let grid = harmonic_grid(6.0, 8.0);
        let spec = solve_1d(&v, 4, &grid).unwrap();
        for psi in &spec.wavefunctions {
            let norm: f64 = psi.iter().map(|x| x * x).sum::<f64>() * grid.h;
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quartic_ground_state_matches_shooting_oracle() {
        // shooting-method value for -ψ''/2 + q⁴ψ = Eψ, frozen from an
        // independent high-accuracy tail-to-origin integration:
        // E₀ = 0.667986259155777
        let v = PotentialSpec::tabulated_from_fn(0.0, 3.5, 4000, |u| u.powi(4)).unwrap();
        let grid = Grid1D { lo: -3.0, n: 1199, h: 6.0 / 1200.0 };
        let spec = solve_1d(&v, 1, &grid).unwrap();
        assert!(
            (spec.energies[0] - 0.667986259155777).abs() < 5e-5,
            "E0 = {}",
            spec.energies[0]
        );
    }

    #[test]
    fn oversized_request_is_domain_error() {
        let v = PotentialSpec::harmonic(1.0);
        let grid = Grid1D { lo: -2.0, n: 9, h: 0.4 };
        assert!(solve_1d(&v, 9, &grid).is_err());
    }
}
