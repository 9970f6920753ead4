//! Symmetric banded LDLᵀ factorization without pivoting.
//!
//! The shifted operators H − σI are indefinite for σ inside the spectrum, so
//! pivots are monitored: a near-zero pivot aborts the factorization and the
//! caller retries with a nudged shift. By Sylvester's law the number of
//! negative pivots equals the number of eigenvalues below σ, which is what
//! the spectrum-slicing driver uses to bracket windows and verify that no
//! eigenvalue was missed.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use crate::math::FloatExt;

/// Lower-triangle banded storage, column major: entry (j + r, j) lives at
/// `a[j*(b+1) + r]` for r in 0..=b.
#[derive(Debug, Clone)]
pub struct BandedSym {
    pub n: usize,
    pub b: usize,
    pub a: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self { n, b, a: alloc::vec![0.0; n * (b + 1)] }
    }

    /// Estimated bytes for a factorization of this size.
    pub fn byte_estimate(n: usize, b: usize) -> u64 {
        (n as u64) * (b as u64 + 1) * 8
    }
}

/// Factor A = LDLᵀ in place: D lands on the r = 0 slots, unit-lower L below.
/// Returns the number of negative pivots (the count of eigenvalues below the
/// shift baked into the matrix). `pivot_floor` is an absolute threshold (the
/// caller knows the physical scale; penalty rows would poison any scale
/// derived from the diagonal here); a pivot below it aborts with a numerics
/// error and the caller refills the buffer at a nudged shift.
pub fn factor_ldl_in_place(mat: &mut BandedSym, pivot_floor: f64) -> Result<usize> {
    let n = mat.n;
    let b = mat.b;
    let stride = b + 1;
    let floor = pivot_floor;
    let mut negative = 0usize;

    for j in 0..n {
        let dj = mat.a[j * stride];
        if dj.abs() < floor {
            return Err(CoreError::Numerics(alloc::format!(
                "LDLT breakdown at column {j}: pivot {dj:e} below {floor:e}"
            )));
        }
        if dj < 0.0 {
            negative += 1;
        }
        let len = b.min(n - 1 - j);
        if len == 0 {
            continue;
        }
        let inv = 1.0 / dj;
        // split borrows: column j is read, columns j+1..=j+len are updated
        let (head, tail) = mat.a.split_at_mut((j + 1) * stride);
        let wj = &head[j * stride..j * stride + len + 1];
        for k in 1..=len {
            let raw = wj[k];
            if raw == 0.0 {
                continue;
            }
            let ljk = raw * inv;
            let dst = &mut tail[(k - 1) * stride..(k - 1) * stride + (len - k) + 1];
            for (r, d) in dst.iter_mut().enumerate() {
                *d -= ljk * wj[k + r];
            }
        }
        for k in 1..=len {
            mat.a[j * stride + k] *= inv;
        }
    }
    Ok(negative)
}

/// Solve L D Lᵀ x = rhs in place, given a buffer factored by
/// [`factor_ldl_in_place`].
pub fn ldl_solve_in_place(f: &BandedSym, x: &mut [f64]) {
    let n = f.n;
    let b = f.b;
    let stride = b + 1;
    let a = &f.a;
    // forward: L z = rhs (unit lower)
    for j in 0..n {
        let xj = x[j];
        if xj != 0.0 {
            let len = b.min(n - 1 - j);
            let col = &a[j * stride + 1..j * stride + 1 + len];
            for (r, &l) in col.iter().enumerate() {
                x[j + 1 + r] -= l * xj;
            }
        }
    }
    for j in 0..n {
        x[j] /= a[j * stride];
    }
    // backward: Lᵀ x = z
    for j in (0..n).rev() {
        let len = b.min(n - 1 - j);
        let col = &a[j * stride + 1..j * stride + 1 + len];
        let mut acc = x[j];
        for (r, &l) in col.iter().enumerate() {
            acc -= l * x[j + 1 + r];
        }
        x[j] = acc;
    }
}


#[cfg(test)]
mod bench {
    use super::*;
    use crate::rng::SplitMix64;

    // manual probe: cargo test -p steposc-core --release bench_banded -- --ignored --nocapture
    #[test]
    #[ignore]
    fn bench_banded_factor_and_solve() {
        let n = 189_225;
        let b = 435;
        let mut rng = SplitMix64::new(1);
        let mut m = BandedSym::zeros(n, b);
        for j in 0..n {
            m.a[j * (b + 1)] = 40.0 + rng.uniform();
            let len = b.min(n - 1 - j);
            if len >= 1 {
                m.a[j * (b + 1) + 1] = -1.0;
            }
            if len == b {
                m.a[j * (b + 1) + b] = -1.0;
            }
        }
        let t0 = std::time::Instant::now();
        let neg = factor_ldl_in_place(&mut m, 1e-14).unwrap();
        let t_factor = t0.elapsed().as_secs_f64();
        let mut x: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
        let t1 = std::time::Instant::now();
        for _ in 0..20 {
            ldl_solve_in_place(&m, &mut x);
        }
        let t_solve = t1.elapsed().as_secs_f64() / 20.0;
        std::println!(
            "factor: {t_factor:.2} s ({:.2} GF/s), solve: {:.0} ms, neg={neg}",
            (n as f64) * (b as f64) * (b as f64) / t_factor / 1e9,
            t_solve * 1e3
        );
    }
}
