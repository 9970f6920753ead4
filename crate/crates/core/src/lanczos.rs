//! Shift-invert Lanczos with full reorthogonalization and deflation restarts.
//!
//! One window of the spectrum slicer is served by a single banded LDLᵀ
//! factorization of H − σI: Lanczos runs on the solve operator, Ritz values θ
//! map back through λ = σ + 1/θ, and the eigenvalues nearest the shift
//! converge first. Degenerate clusters (single-vector Lanczos finds one copy
//! per invariant subspace) are handled by restarting with fresh seeded
//! vectors deflated against everything already converged.

use alloc::vec::Vec;

use crate::banded::{ldl_solve_in_place, BandedSym};
use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::operator::DiscreteHamiltonian;
use crate::rng::SplitMix64;
use crate::tridiag::eigen_ql;

/// One slice of the spectrum: all eigenvalues in [lo, hi), whose count is
/// known exactly from factorization inertias.
#[derive(Debug, Clone, Copy)]
pub struct WindowTarget {
    pub lo: f64,
    pub hi: f64,
    pub expected: usize,
}

#[derive(Debug)]
pub struct WindowSolution {
    /// Ascending eigenvalues inside the window.
    pub values: Vec<f64>,
    /// Unit-2-norm Ritz vectors matching `values`.
    pub vectors: Vec<Vec<f64>>,
    /// Lanczos residual estimates ‖(H−σ)⁻¹x − θx‖ scaled back to H units.
    pub residual_estimates: Vec<f64>,
    pub iterations: usize,
}

pub struct LanczosParams {
    pub max_m: usize,
    pub max_restarts: usize,
    /// Ritz acceptance: β|s| ≤ ritz_tol · |θ|.
    pub ritz_tol: f64,
    pub check_every: usize,
    pub seed: u64,
}

impl Default for LanczosParams {
    fn default() -> Self {
        Self { max_m: 256, max_restarts: 5, ritz_tol: 1e-10, check_every: 16, seed: 42 }
    }
}

struct Converged {
    theta: f64,
    /// Lanczos residual estimate β|s| in shift-invert units.
    est: f64,
    vector: Vec<f64>,
}

/// Run shift-invert Lanczos against a factored H − σI until every eigenvalue
/// expected inside the window has converged (or budgets run out).
pub fn solve_window(
    h: &DiscreteHamiltonian,
    factor: &BandedSym,
    sigma: f64,
    target: &WindowTarget,
    params: &LanczosParams,
) -> Result<WindowSolution> {
    let n = h.dim();
    if target.expected == 0 {
        return Ok(WindowSolution {
            values: Vec::new(),
            vectors: Vec::new(),
            residual_estimates: Vec::new(),
            iterations: 0,
        });
    }
    if target.expected >= n {
        return Err(CoreError::Domain(alloc::format!(
            "window expects {} eigenpairs of a dimension-{} operator",
            target.expected,
            n
        )));
    }
    let in_window = |lambda: f64| lambda >= target.lo && lambda < target.hi;
    let mut converged: Vec<Converged> = Vec::new();
    let mut total_iterations = 0usize;

    let mut basis: Vec<f64> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    for attempt in 0..=params.max_restarts {
        basis.clear();
        alpha.clear();
        beta.clear();

        let mut rng = SplitMix64::new(params.seed.wrapping_add(attempt as u64 * 0x1234_5678));
        let mut v: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
        orthogonalize_against(&mut v, &converged);
        if normalize(&mut v) < 1e-14 {
            continue;
        }
        basis.extend_from_slice(&v);
        let mut v_prev: Vec<f64> = alloc::vec![0.0; n];
        let mut w: Vec<f64> = alloc::vec![0.0; n];
        let mut best_count = count_window_converged(
            &alpha, &beta, sigma, target, params, &converged,
        );
        let mut last_progress = 0usize;

        for j in 0..params.max_m {
            total_iterations += 1;
            w.copy_from_slice(&v);
            ldl_solve_in_place(factor, &mut w);
            if j > 0 {
                let b = beta[j - 1];
                for (wi, pi) in w.iter_mut().zip(v_prev.iter()) {
                    *wi -= b * pi;
                }
            }
            let a = dot(&w, &v);
            alpha.push(a);
            for (wi, vi) in w.iter_mut().zip(v.iter()) {
                *wi -= a * vi;
            }
            // full reorthogonalization, two passes, against the Krylov basis
            // and the deflated converged vectors
            for _ in 0..2 {
                for k in 0..=j {
                    let u = &basis[k * n..(k + 1) * n];
                    let proj = dot(&w, u);
                    if proj != 0.0 {
                        for (wi, ui) in w.iter_mut().zip(u.iter()) {
                            *wi -= proj * ui;
                        }
                    }
                }
                orthogonalize_against(&mut w, &converged);
            }
            let b = dot(&w, &w).sqrt();
            if b < 1e-13 {
                beta.push(0.0);
                break;
            }
            beta.push(b);
            v_prev.copy_from_slice(&v);
            for (vi, wi) in v.iter_mut().zip(w.iter()) {
                *vi = wi / b;
            }
            basis.extend_from_slice(&v);

            let due = (j + 1) % params.check_every == 0 || j + 1 == params.max_m;
            if due {
                let now = count_window_converged(&alpha, &beta, sigma, target, params, &converged);
                if now > best_count {
                    best_count = now;
                    last_progress = j;
                }
                if now >= target.expected {
                    break;
                }
                if j - last_progress > 96 {
                    break; // stagnation: harvest and restart deflated
                }
            }
        }

        harvest(&alpha, &beta, &basis, n, sigma, target, params, &mut converged);
        if converged.len() >= target.expected {
            break;
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>, f64)> = converged
        .into_iter()
        .map(|c| {
            let lambda = sigma + 1.0 / c.theta;
            (lambda, c.vector, c.est / c.theta.abs())
        })
        .filter(|(lambda, _, _)| in_window(*lambda))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

    if pairs.len() != target.expected {
        return Err(CoreError::Convergence {
            converged: pairs.len(),
            requested: target.expected,
            detail: alloc::format!(
                "window [{}, {}) at shift {sigma}: inertia expects {}, Lanczos found {}",
                target.lo,
                target.hi,
                target.expected,
                pairs.len()
            ),
        });
    }
    let mut values = Vec::with_capacity(pairs.len());
    let mut vectors = Vec::with_capacity(pairs.len());
    let mut residual_estimates = Vec::with_capacity(pairs.len());
    for (lam, vec, res) in pairs {
        values.push(lam);
        vectors.push(vec);
        residual_estimates.push(res);
    }
    Ok(WindowSolution { values, vectors, residual_estimates, iterations: total_iterations })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orthogonalize_against(v: &mut [f64], converged: &[Converged]) {
    for c in converged {
        let proj = dot(v, &c.vector);
        if proj != 0.0 {
            for (vi, ci) in v.iter_mut().zip(c.vector.iter()) {
                *vi -= proj * ci;
            }
        }
    }
}

/// Count window eigenvalues that would be accepted right now (cheap check on
/// the current tridiagonal plus everything already deflated).
fn count_window_converged(
    alpha: &[f64],
    beta: &[f64],
    sigma: f64,
    target: &WindowTarget,
    params: &LanczosParams,
    converged: &[Converged],
) -> usize {
    let from_deflated = converged
        .iter()
        .filter(|c| {
            let lam = sigma + 1.0 / c.theta;
            lam >= target.lo && lam < target.hi
        })
        .count();
    let m = alpha.len();
    if m == 0 {
        return from_deflated;
    }
    let (thetas, svecs) = match eigen_ql(alpha, &beta[..m.saturating_sub(1)], true) {
        Ok(p) => p,
        Err(_) => return from_deflated,
    };
    let beta_last = if beta.len() >= m { beta[m - 1] } else { 0.0 };
    let mut count = from_deflated;
    for k in 0..m {
        let theta = thetas[k];
        if theta == 0.0 {
            continue;
        }
        let lam = sigma + 1.0 / theta;
        if lam < target.lo || lam >= target.hi {
            continue;
        }
        let est = beta_last * svecs[(m - 1) * m + k].abs();
        if est <= params.ritz_tol * theta.abs() {
            count += 1;
        }
    }
    count
}

/// Assemble converged Ritz vectors of the current factorization run and move
/// them into the deflation set (deduplicated against what is already there).
#[allow(clippy::too_many_arguments)]
fn harvest(
    alpha: &[f64],
    beta: &[f64],
    basis: &[f64],
    n: usize,
    sigma: f64,
    target: &WindowTarget,
    params: &LanczosParams,
    converged: &mut Vec<Converged>,
) {
    let m = alpha.len();
    if m == 0 {
        return;
    }
    let (thetas, svecs) = match eigen_ql(alpha, &beta[..m - 1], true) {
        Ok(p) => p,
        Err(_) => return,
    };
    let beta_last = beta[m - 1];
    for k in 0..m {
        let theta = thetas[k];
        if theta == 0.0 {
            continue;
        }
        let lam = sigma + 1.0 / theta;
        // keep a small margin so boundary-straddling duplicates are resolved
        // by the driver rather than dropped here
        let width = target.hi - target.lo;
        if lam < target.lo - 1e-9 * width || lam >= target.hi + 1e-9 * width {
            continue;
        }
        let est = beta_last * svecs[(m - 1) * m + k].abs();
        if est > params.ritz_tol * theta.abs() {
            continue;
        }
        // Ritz vector x = V s
        let mut x = alloc::vec![0.0; n];
        for j in 0..m {
            let s = svecs[j * m + k];
            if s == 0.0 {
                continue;
            }
            let u = &basis[j * n..(j + 1) * n];
            for (xi, ui) in x.iter_mut().zip(u.iter()) {
                *xi += s * ui;
            }
        }
        // deduplicate against already-deflated vectors
        let mut dup = false;
        for c in converged.iter() {
            if (sigma + 1.0 / c.theta - lam).abs() < 1e-8 * lam.abs().max(1.0) {
                let overlap = dot(&x, &c.vector).abs();
                if overlap > 0.5 {
                    dup = true;
                    break;
                }
            }
        }
        if dup {
            continue;
        }
        orthogonalize_against(&mut x, converged);
        if normalize(&mut x) < 0.5 {
            continue; // numerically inside the converged span already
        }
        converged.push(Converged { theta, est, vector: x });
    }
}
