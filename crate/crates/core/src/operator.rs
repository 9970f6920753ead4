//! Discrete Hamiltonian: 5-point Laplacian plus diagonal potential on the
//! truncated grid, with the step region enforced either by removing its
//! nodes (exact Dirichlet) or by a huge diagonal penalty.

use alloc::vec::Vec;

use crate::dynamics::StepRegion;
use crate::error::Result;
use crate::grid::Grid2D;
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::potential::PotentialSpec;

/// How the step region enters the discrete operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// Rows and columns of step nodes removed (exact Dirichlet).
    ExcludedNodes,
    /// Step nodes kept with `PENALTY` added on the diagonal.
    Penalty,
}

/// Diagonal penalty value representing the impenetrable region.
pub const PENALTY: f64 = 1e28;

const NO_NODE: u32 = u32::MAX;

/// Sparse symmetric operator −½∇²_h + diag(V1 + V2) with Dirichlet outer
/// boundary. Off-diagonal couplings are constant per axis, so only the
/// diagonal and an index map are stored.
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    pub grid: Grid2D,
    pub step_mode: StepMode,
    /// grid linear index -> unknown index (NO_NODE for removed nodes)
    pos: Vec<u32>,
    /// unknown index -> grid linear index
    kept: Vec<u32>,
    diag: Vec<f64>,
    /// coupling to axis-1 neighbors: −1/(2 h1²)
    cx: f64,
    /// coupling to axis-2 neighbors: −1/(2 h2²)
    cy: f64,
    /// max unknown-index distance between coupled nodes
    pub bandwidth: usize,
}

/// Assemble the discrete Hamiltonian.
pub fn build_hamiltonian(
    grid: Grid2D,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    step: &StepRegion,
    step_mode: StepMode,
) -> Result<DiscreteHamiltonian> {
    let (n1, n2) = (grid.n[0], grid.n[1]);
    let (h1, h2) = (grid.h[0], grid.h[1]);
    let tol = 1e-9 * h1.min(h2);
    // a node belongs to the step when it lies in the closed quadrant
    // {q1 <= wall1, q2 <= wall2}; the closure makes the discrete boundary
    // coincide with the wall lines when they are on-lattice
    let in_step = |q1: f64, q2: f64| q1 <= step.q1_wall + tol && q2 <= step.q2_wall + tol;

    let q1s = grid.axis_coords(0);
    let q2s = grid.axis_coords(1);
    let vdiag1: Vec<f64> = q1s.iter().map(|&q| v1.value(q)).collect();
    let vdiag2: Vec<f64> = q2s.iter().map(|&q| v2.value(q)).collect();
    let base = 1.0 / (h1 * h1) + 1.0 / (h2 * h2);

    let mut pos = alloc::vec![NO_NODE; n1 * n2];
    let mut kept = Vec::with_capacity(n1 * n2);
    let mut diag = Vec::with_capacity(n1 * n2);
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let lin = i1 * n2 + i2;
            let stepped = in_step(q1s[i1], q2s[i2]);
            if stepped && step_mode == StepMode::ExcludedNodes {
                continue;
            }
            pos[lin] = kept.len() as u32;
            kept.push(lin as u32);
            let mut d = base + vdiag1[i1] + vdiag2[i2];
            if stepped {
                d += PENALTY;
            }
            diag.push(d);
        }
    }

    // bandwidth: scan axis-1 couplings (axis-2 neighbors are adjacent or closer)
    let mut bandwidth = 1usize.min(kept.len().saturating_sub(1));
    for (u, &lin) in kept.iter().enumerate() {
        let lin = lin as usize;
        let i1 = lin / n2;
        if i1 + 1 < n1 {
            let nb = pos[lin + n2];
            if nb != NO_NODE {
                bandwidth = bandwidth.max(nb as usize - u);
            }
        }
    }

    Ok(DiscreteHamiltonian {
        grid,
        step_mode,
        pos,
        kept,
        diag,
        cx: -0.5 / (h1 * h1),
        cy: -0.5 / (h2 * h2),
        bandwidth,
    })
}

impl DiscreteHamiltonian {
    pub fn dim(&self) -> usize {
        self.kept.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Grid linear indices of the unknowns, in unknown order.
    pub fn kept_nodes(&self) -> &[u32] {
        &self.kept
    }

    /// Unknown index of a grid node, if it is an unknown.
    pub fn unknown_at(&self, i1: usize, i2: usize) -> Option<usize> {
        let p = self.pos[self.grid.index(i1, i2)];
        (p != NO_NODE).then_some(p as usize)
    }

    /// Coordinates of an unknown.
    pub fn coords_of(&self, unknown: usize) -> (f64, f64) {
        let lin = self.kept[unknown] as usize;
        let i1 = lin / self.grid.n[1];
        let i2 = lin % self.grid.n[1];
        (self.grid.coord(0, i1), self.grid.coord(1, i2))
    }

    /// y = H x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n2 = self.grid.n[1];
        let n1 = self.grid.n[0];
        for (u, &lin) in self.kept.iter().enumerate() {
            let lin = lin as usize;
            let i1 = lin / n2;
            let i2 = lin % n2;
            let mut acc = self.diag[u] * x[u];
            if i2 > 0 {
                let p = self.pos[lin - 1];
                if p != NO_NODE {
                    acc += self.cy * x[p as usize];
                }
            }
            if i2 + 1 < n2 {
                let p = self.pos[lin + 1];
                if p != NO_NODE {
                    acc += self.cy * x[p as usize];
                }
            }
            if i1 > 0 {
                let p = self.pos[lin - n2];
                if p != NO_NODE {
                    acc += self.cx * x[p as usize];
                }
            }
            if i1 + 1 < n1 {
                let p = self.pos[lin + n2];
                if p != NO_NODE {
                    acc += self.cx * x[p as usize];
                }
            }
            y[u] = acc;
        }
    }

    /// ‖Hx − λx‖₂ for a unit-2-norm vector.
    pub fn residual_norm(&self, lambda: f64, x: &[f64]) -> f64 {
        let mut y = alloc::vec![0.0; x.len()];
        self.matvec(x, &mut y);
        let mut acc = 0.0;
        for (yi, xi) in y.iter().zip(x.iter()) {
            let r = yi - lambda * xi;
            acc += r * r;
        }
        acc.sqrt()
    }

    /// Fill `dest` (lower banded, bandwidth `self.bandwidth`) with H − σI.
    pub fn fill_banded(&self, sigma: f64, dest: &mut crate::banded::BandedSym) {
        let b = self.bandwidth;
        debug_assert_eq!(dest.n, self.dim());
        debug_assert_eq!(dest.b, b);
        dest.a.iter_mut().for_each(|v| *v = 0.0);
        let n2 = self.grid.n[1];
        let n1 = self.grid.n[0];
        for (u, &lin) in self.kept.iter().enumerate() {
            let lin = lin as usize;
            let i1 = lin / n2;
            let i2 = lin % n2;
            let col = u * (b + 1);
            dest.a[col] = self.diag[u] - sigma;
            if i2 + 1 < n2 {
                let p = self.pos[lin + 1];
                if p != NO_NODE {
                    dest.a[col + (p as usize - u)] = self.cy;
                }
            }
            if i1 + 1 < n1 {
                let p = self.pos[lin + n2];
                if p != NO_NODE {
                    dest.a[col + (p as usize - u)] = self.cx;
                }
            }
        }
    }

    /// Infinity norm (max absolute row sum); a cheap spectral scale.
    pub fn inf_norm(&self) -> f64 {
        let row_off = 2.0 * (self.cx.abs() + self.cy.abs());
        self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs() + row_off))
    }
}
