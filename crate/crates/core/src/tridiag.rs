//! Symmetric tridiagonal eigensolvers: Sturm bisection for selected
//! eigenvalues, inverse iteration for their vectors, and implicit QL with
//! accumulation for the small dense problems arising inside Lanczos.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::rng::SplitMix64;

/// Number of eigenvalues strictly below `x` (Sturm sequence via LDLᵀ pivots).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let q_safe = if q.abs() < 1e-300 { 1e-300f64.copysign(q + 0.0) } else { q };
        q = (diag[i] - x) - off[i - 1] * off[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the whole spectrum.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for i in 0..n {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - l - r);
        hi = hi.max(diag[i] + l + r);
    }
    (lo - 1.0, hi + 1.0)
}

/// Lowest `k` eigenvalues by bisection, ascending.
pub fn lowest_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Vec<f64> {
    let n = diag.len();
    let k = k.min(n);
    let (glo, ghi) = gershgorin(diag, off);
    let mut out = Vec::with_capacity(k);
    for idx in 0..k {
        let (mut a, mut b) = (glo, ghi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if (b - a) <= 2.0 * f64::EPSILON * mid.abs().max(1.0) {
                break;
            }
            if sturm_count(diag, off, mid) <= idx {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// Eigenvector for an isolated eigenvalue by inverse iteration on the
/// tridiagonal LU (partial pivoting), seeded deterministically.
pub fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64, seed: u64) -> Vec<f64> {
    let n = diag.len();
    let mut rng = SplitMix64::new(seed ^ 0x9e3779b97f4a7c15);
    let mut v: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
    normalize(&mut v);
    // slight perturbation keeps the shifted matrix invertible
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1.0);
    let shifted = lambda + 1e-13 * scale;
    for _ in 0..4 {
        solve_tridiag_shifted(diag, off, shifted, &mut v);
        normalize(&mut v);
    }
    v
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Solve (T - shift) x = rhs in place by banded LU with partial pivoting.
fn solve_tridiag_shifted(diag: &[f64], off: &[f64], shift: f64, x: &mut [f64]) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    // working bands: sub (a), diag (b), super (c), super2 (d) for pivoting fill
    let mut a: Vec<f64> = (0..n).map(|i| if i > 0 { off[i - 1] } else { 0.0 }).collect();
    let mut b: Vec<f64> = diag.iter().map(|&d| d - shift).collect();
    let mut c: Vec<f64> = (0..n).map(|i| if i < n - 1 { off[i] } else { 0.0 }).collect();
    let mut d = alloc::vec![0.0; n];
    for i in 0..n - 1 {
        if a[i + 1].abs() > b[i].abs() {
            // swap rows i and i+1 column by column (cols i, i+1, i+2)
            let (bi, ai1) = (b[i], a[i + 1]);
            b[i] = ai1;
            a[i + 1] = bi;
            let (ci, bi1) = (c[i], b[i + 1]);
            c[i] = bi1;
            b[i + 1] = ci;
            let (di, ci1) = (d[i], c[i + 1]);
            d[i] = ci1;
            c[i + 1] = di;
            x.swap(i, i + 1);
        }
        let denom = if b[i] == 0.0 { 1e-300 } else { b[i] };
        let m = a[i + 1] / denom;
        b[i + 1] -= m * c[i];
        c[i + 1] -= m * d[i];
        x[i + 1] -= m * x[i];
    }
    // back substitution
    for i in (0..n).rev() {
        let mut acc = x[i];
        if i + 1 < n {
            acc -= c[i] * x[i + 1];
        }
        if i + 2 < n {
            acc -= d[i] * x[i + 2];
        }
        let denom = if b[i] == 0.0 { 1e-300 } else { b[i] };
        x[i] = acc / denom;
    }
}

/// Implicit QL with Wilkinson shifts and eigenvector accumulation, for the
/// small dense tridiagonal problems inside Lanczos. Returns eigenvalues
/// ascending; `z` holds the eigenvectors column-wise (z[i*n + k] is component
/// i of eigenvector k), starting from the identity.
pub fn eigen_ql(diag: &[f64], off: &[f64], with_vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = alloc::vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1.min(n)]);
    let mut z: Vec<f64> = if with_vectors {
        let mut id = alloc::vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        id
    } else {
        Vec::new()
    };

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find the first small off-diagonal beyond l
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(CoreError::Numerics("QL iteration did not converge".into()));
            }
            // Wilkinson-ish shift
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let bb = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - bb;
                if !z.is_empty() {
                    for k in 0..n {
                        f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // sort ascending, permuting vectors along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = if with_vectors {
        let mut out = alloc::vec![0.0; n * n];
        for (new_k, &old_k) in order.iter().enumerate() {
            for i in 0..n {
                out[i * n + new_k] = z[i * n + old_k];
            }
        }
        out
    } else {
        Vec::new()
    };
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_laplacian(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = alloc::vec![2.0; n];
        let e = alloc::vec![-1.0; n - 1];
        let analytic: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * core::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        (d, e, analytic)
    }

    #[test]
    fn sturm_bisection_matches_analytic_chain() {
        let (d, e, analytic) = free_laplacian(50);
        let got = lowest_eigenvalues(&d, &e, 10);
        for (g, a) in got.iter().zip(analytic.iter()) {
            assert!((g - a).abs() < 1e-11, "{g} vs {a}");
        }
    }

    #[test]
    fn ql_matches_bisection_and_is_orthogonal() {
        let n = 30;
        let mut rng = SplitMix64::new(5);
        let d: Vec<f64> = (0..n).map(|_| rng.symmetric() * 2.0).collect();
        let e: Vec<f64> = (0..n - 1).map(|_| rng.symmetric()).collect();
        let (vals, vecs) = eigen_ql(&d, &e, true).unwrap();
        let bis = lowest_eigenvalues(&d, &e, n);
        for (a, b) in vals.iter().zip(bis.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        // residual ‖T v − λ v‖ for every pair
        for k in 0..n {
            let mut worst = 0.0f64;
            for i in 0..n {
                let mut acc = d[i] * vecs[i * n + k];
                if i > 0 {
                    acc += e[i - 1] * vecs[(i - 1) * n + k];
                }
                if i + 1 < n {
                    acc += e[i] * vecs[(i + 1) * n + k];
                }
                worst = worst.max((acc - vals[k] * vecs[i * n + k]).abs());
            }
            assert!(worst < 1e-10, "eigenpair {k}: residual {worst}");
        }
        // orthonormality
        for a in 0..n {
            for b in a..n {
                let dot: f64 = (0..n).map(|i| vecs[i * n + a] * vecs[i * n + b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "({a},{b}) dot {dot}");
            }
        }
    }

    #[test]
    fn inverse_iteration_gives_true_eigenvectors() {
        let (d, e, analytic) = free_laplacian(40);
        for (k, lam) in analytic.iter().take(5).enumerate() {
            let v = inverse_iteration(&d, &e, *lam, 17 + k as u64);
            let mut worst = 0.0f64;
            for i in 0..40 {
                let mut acc = d[i] * v[i];
                if i > 0 {
                    acc += e[i - 1] * v[i - 1];
                }
                if i < 39 {
                    acc += e[i] * v[i + 1];
                }
                worst = worst.max((acc - lam * v[i]).abs());
            }
            assert!(worst < 1e-9, "eigenpair {k}: residual {worst}");
        }
    }
}
