//! Phase-space volume of the step oscillator and the Weyl eigenvalue count.
//!
//! In action coordinates the volume below total energy E is
//!
//!   Vol(E) = ∫∫_{triangle}  −4 θ1 θ2 + 4π (θ1 + θ2)  dI1 dI2,
//!
//! where θ_i is the wall angle of axis i at its partial energy and saturates
//! to π on level sets that do not reach the wall (there the integrand is the
//! smooth 4π²). The expected number of levels below E divides this by the
//! squared Planck cell (2πħ)² with ħ = 1.

use crate::dynamics::StepRegion;
use crate::error::Result;
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::potential::PotentialSpec;
use crate::quad;

use core::f64::consts::PI;

/// Wall angle as a function of partial energy, saturated to π below the wall
/// height (level set does not reach the wall).
fn theta_or_pi(v: &PotentialSpec, wall: f64, e: f64) -> Result<f64> {
    if e <= v.value(wall) {
        return Ok(PI);
    }
    v.wall_angle(e, wall)
}

/// ∫_0^{I(x)} θ_wall dI for one axis, as a function of the partial-energy
/// budget x; the integration variable is energy with dI = dE/ω.
fn angle_action_profile(v: &PotentialSpec, wall: f64, x: f64, tol: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let v_wall = v.value(wall);
    if x <= v_wall {
        // entire range below the wall height: θ = π exactly
        return Ok(PI * v.action(x)?);
    }
    let lo = v_wall.max(0.0);
    let smooth_part = if lo > 0.0 { PI * v.action(lo)? } else { 0.0 };
    let wall_part = quad::integrate(
        |e| match (theta_or_pi(v, wall, e), v.frequency(e)) {
            (Ok(t), Ok(w)) => t / w,
            _ => 0.0,
        },
        lo,
        x,
        tol,
    )?;
    Ok(smooth_part + wall_part)
}

/// Phase-space volume Vol(E) of the step oscillator, by iterated adaptive
/// quadrature over the action triangle with the integrand kink (where the
/// wall angle saturates) split explicitly.
pub fn phase_volume(
    e: f64,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    step: &StepRegion,
) -> Result<f64> {
    if e <= 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-9;
    // inner axis-1 data as functions of the remaining energy budget
    let inner = |x: f64| -> Result<(f64, f64)> {
        if x <= 0.0 {
            return Ok((0.0, 0.0));
        }
        Ok((v1.action(x)?, angle_action_profile(v1, step.q1_wall, x, tol)?))
    };
    // outer integral over the axis-2 partial energy:
    //   ∫ [ (4π − 4θ2) A1(E−e2) + 4π θ2 I1(E−e2) ] dI2,  dI2 = de2/ω2
    let integrand = |e2: f64| -> f64 {
        let x = e - e2;
        let (th2, w2) = match (theta_or_pi(v2, step.q2_wall, e2), v2.frequency(e2)) {
            (Ok(t), Ok(w)) => (t, w),
            _ => return 0.0,
        };
        let (i1, a1) = match inner(x) {
            Ok(p) => p,
            Err(_) => return 0.0,
        };
        ((4.0 * PI - 4.0 * th2) * a1 + 4.0 * PI * th2 * i1) / w2
    };
    // split at the two kink locations: e2 = V2(wall2) and e2 = E − V1(wall1)
    let mut cuts = [0.0f64, e, v2.value(step.q2_wall), e - v1.value(step.q1_wall)];
    cuts.sort_unstable_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0].clamp(0.0, e), w[1].clamp(0.0, e));
        if b > a {
            total += quad::integrate(integrand, a, b, 1e-8)?;
        }
    }
    Ok(total)
}

/// Planck cell squared: (2πħ)² with ħ = 1.
pub const PLANCK_CELL_2D: f64 = 4.0 * PI * PI;

/// Weyl estimate of the number of levels below E: Vol(E)/(2πħ)².
pub fn weyl_count(e: f64, v1: &PotentialSpec, v2: &PotentialSpec, step: &StepRegion) -> Result<f64> {
    Ok(phase_volume(e, v1, v2, step)? / PLANCK_CELL_2D)
}

/// Closed-form volume for harmonic wells with the step at the origin:
/// 3π²E²/(2 ω1 ω2).
pub fn harmonic_origin_volume(e: f64, omega1: f64, omega2: f64) -> f64 {
    1.5 * PI * PI * e * e / (omega1 * omega2)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = core::f64::consts::SQRT_2;

    #[test]
    fn origin_step_harmonic_matches_closed_form() {
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(1.0);
        let step = StepRegion::origin();
        let vol = phase_volume(1.0, &v1, &v2, &step).unwrap();
        let expected = harmonic_origin_volume(1.0, 1.0, 1.0);
        assert!(
            ((vol - expected) / expected).abs() < 1e-7,
            "vol = {vol}, expected {expected}"
        );
    }

    #[test]
    fn origin_step_is_three_quarters_of_smooth_volume() {
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(2.0);
        let e = 3.0;
        let vol = phase_volume(e, &v1, &v2, &StepRegion::origin()).unwrap();
        let smooth = 2.0 * PI * PI * e * e / (1.0 * 2.0);
        assert!(
            (vol / smooth - 0.75).abs() < 1e-7,
            "ratio = {}",
            vol / smooth
        );
    }

    #[test]
    fn smooth_limit_recovered_for_deep_walls() {
        // walls far below the accessible region: no level set reaches them
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(SQRT2);
        let e = 2.0;
        let step = StepRegion::new(-10.0, -10.0).unwrap();
        let vol = phase_volume(e, &v1, &v2, &step).unwrap();
        let smooth = 2.0 * PI * PI * e * e / SQRT2;
        assert!(
            ((vol - smooth) / smooth).abs() < 1e-7,
            "vol = {vol}, smooth = {smooth}"
        );
    }

    // Monte-Carlo oracle over the 4D phase-space indicator for the shifted
    // wall-off-origin case; 1e7 samples give a ~0.05% standard error, the
    // assertion allows 3σ.
    #[test]
    fn off_origin_volume_agrees_with_monte_carlo_oracle() {
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(SQRT2);
        let step = StepRegion::new(-1.0, -1.0).unwrap();
        let e = 8.0;
        let vol = phase_volume(e, &v1, &v2, &step).unwrap();

        let mut rng = crate::rng::SplitMix64::new(0x5eed);
        let q1m = (2.0 * e).sqrt();
        let q2m = (2.0 * e).sqrt() / SQRT2;
        let p1m = (2.0 * e).sqrt();
        let p2m = (2.0 * e).sqrt();
        let n = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..n {
            let q1 = q1m * rng.symmetric();
            let q2 = q2m * rng.symmetric();
            let p1 = p1m * rng.symmetric();
            let p2 = p2m * rng.symmetric();
            if step.interior_contains(q1, q2) {
                continue;
            }
            let h = 0.5 * (p1 * p1 + p2 * p2) + v1.value(q1) + v2.value(q2);
            if h <= e {
                hits += 1;
            }
        }
        let box_vol = 16.0 * q1m * q2m * p1m * p2m;
        let frac = hits as f64 / n as f64;
        let mc = box_vol * frac;
        let sigma = box_vol * (frac * (1.0 - frac) / n as f64).sqrt();
        assert!(
            (vol - mc).abs() < 3.0 * sigma,
            "quadrature {vol} vs MC {mc} ± {sigma}"
        );
    }

    #[test]
    fn weyl_count_zero_at_zero_energy() {
        let v = PotentialSpec::harmonic(1.0);
        assert_eq!(weyl_count(0.0, &v, &v, &StepRegion::origin()).unwrap(), 0.0);
    }

    #[test]
    fn weyl_curve_shape_for_even_resonance() {
        // N(E) proportional to E² with the 3π²/(2ω1ω2) volume prefactor
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(2.0);
        let step = StepRegion::origin();
        for e in [2.0, 4.0, 8.0] {
            let n = weyl_count(e, &v1, &v2, &step).unwrap();
            let expected = harmonic_origin_volume(e, 1.0, 2.0) / PLANCK_CELL_2D;
            assert!(((n - expected) / expected).abs() < 1e-6, "N({e}) = {n}");
        }
    }

    #[test]
    fn volume_is_monotone_and_quadratic_at_origin() {
        let v1 = PotentialSpec::harmonic(1.0);
        let v2 = PotentialSpec::harmonic(1.0);
        let step = StepRegion::origin();
        let v_at = |e: f64| phase_volume(e, &v1, &v2, &step).unwrap();
        let (a, b, c) = (v_at(1.0), v_at(2.0), v_at(3.0));
        assert!(a < b && b < c);
        // quadratic: V(2)/V(1) = 4, V(3)/V(1) = 9
        assert!((b / a - 4.0).abs() < 1e-6);
        assert!((c / a - 9.0).abs() < 1e-6);
    }
}
