//! Adaptive quadrature and scalar root finding.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use crate::math::FloatExt;

/// Gauss–Kronrod 7–15 nodes on [-1, 1] (positive half; the rule is symmetric,
/// last entry is the center). Odd indices are the embedded Gauss-7 nodes.
const XGK: [f64; 7] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let hl = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, &x) in XGK.iter().enumerate() {
        let f1 = f(c - hl * x);
        let f2 = f(c + hl * x);
        kronrod += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    (kronrod * hl, ((kronrod - gauss) * hl).abs())
}

/// Adaptive integration of `f` on [a, b] to absolute-or-relative tolerance.
///
/// Bisects the interval with the largest Kronrod error estimate until the
/// summed estimate drops below `tol * max(1, |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(CoreError::Numerics(alloc::format!(
            "non-finite integration bounds [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let (v0, e0) = gk15(&f, a, b);
    // (a, b, value, error)
    let mut intervals: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v0, e0)];
    for _ in 0..4000 {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= tol * total.abs().max(1.0) {
            return Ok(total);
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty interval list");
        let (ia, ib, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (ia + ib);
        if mid <= ia || mid >= ib {
            // narrower than float resolution; accept the local estimate
            let (v, _) = gk15(&f, ia, ib);
            intervals.push((ia, ib, v, 0.0));
            continue;
        }
        let (vl, el) = gk15(&f, ia, mid);
        let (vr, er) = gk15(&f, mid, ib);
        intervals.push((ia, mid, vl, el));
        intervals.push((mid, ib, vr, er));
    }
    Err(CoreError::Numerics(alloc::format!(
        "quadrature on [{a}, {b}] did not reach tolerance {tol}"
    )))
}

/// Brent root finder on a bracketing interval [a, b] with f(a)·f(b) ≤ 0.
pub fn brent_root<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(CoreError::Numerics(alloc::format!(
            "root not bracketed on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(CoreError::Numerics(alloc::format!(
        "Brent iteration stalled near {b}"
    )))
}

/// Newton iteration safeguarded by a bracketing interval; any step that
/// leaves the bracket is replaced by bisection.
pub fn newton_safeguarded<F, D>(
    f: F,
    df: D,
    x0: f64,
    bracket_lo: f64,
    bracket_hi: f64,
    tol: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut a = bracket_lo;
    let mut b = bracket_hi;
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(CoreError::Numerics(alloc::format!(
            "root not bracketed on [{a}, {b}]"
        )));
    }
    let mut x = x0.clamp(a.min(b), a.max(b));
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        if (b - a).abs() <= tol {
            return Ok(0.5 * (a + b));
        }
        let dfx = df(x);
        let newton = if dfx != 0.0 { x - fx / dfx } else { f64::NAN };
        x = if newton.is_finite() && newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 8.0).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn integrates_sine_over_half_period() {
        let v = integrate(|x| x.sin(), 0.0, PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11, "v = {v}");
    }

    #[test]
    fn survives_integrable_log_singularity() {
        let v = integrate(|x| x.ln(), 1e-300_f64.max(0.0), 1.0, 1e-9).unwrap();
        assert!((v + 1.0).abs() < 1e-6, "v = {v}");
    }

    #[test]
    fn brent_finds_cosine_root() {
        let r = brent_root(|x| x.cos(), 1.0, 2.0, 1e-14).unwrap();
        assert!((r - PI / 2.0).abs() < 1e-12, "r = {r}");
    }

    #[test]
    fn newton_safeguarded_quadratic() {
        let r = newton_safeguarded(|x| x * x - 2.0, |x| 2.0 * x, 1.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2.0f64.sqrt()).abs() < 1e-12);
    }
}
