//! Confining 1D potentials and classical level-set geometry.
//!
//! A potential is even about its single minimum and confining; the minimum
//! value is 0 by convention (`V(shift) = 0`), so partial energies are always
//! measured from the bottom of the well. Harmonic wells are handled in closed
//! form; general even wells are given as a sampled half-table and evaluated
//! through a C¹ monotone (Fritsch–Carlson) cubic interpolant.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::quad;

/// C¹ monotone cubic interpolant on strictly increasing data.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Build the interpolant. `x` must be strictly increasing and `y`
    /// nondecreasing. Node derivatives come from 5-point Lagrange stencils
    /// (4th order, so the segment cubics are nearly C²), clamped into the
    /// Fritsch–Carlson monotonicity region.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 3 {
            return Err(CoreError::Domain(alloc::format!(
                "need >= 3 samples, got {}",
                x.len()
            )));
        }
        for w in x.windows(2) {
            if w[1] <= w[0] {
                return Err(CoreError::Domain("sample abscissae must be strictly increasing".into()));
            }
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = alloc::vec![0.0; n];
        for i in 0..n {
            d[i] = if n >= 5 {
                let lo = i.saturating_sub(2).min(n - 5);
                lagrange_derivative(&x[lo..lo + 5], &y[lo..lo + 5], x[i])
            } else if i == 0 {
                edge_slope(h[0], h[1], delta[0], delta[1])
            } else if i == n - 1 {
                edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3])
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                if delta[i - 1] * delta[i] <= 0.0 {
                    0.0
                } else {
                    (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
                }
            };
            // clamp into the monotone region of the adjacent segments
            let dl = if i > 0 { delta[i - 1] } else { delta[0] };
            let dr = if i < n - 1 { delta[i] } else { delta[n - 2] };
            if dl >= 0.0 && dr >= 0.0 {
                d[i] = d[i].clamp(0.0, 3.0 * dl.min(dr));
            }
        }
        Ok(Self { x, y, d })
    }

    fn segment(&self, q: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&q)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    /// Interpolated value; linear C¹ extension beyond the table ends.
    pub fn value(&self, q: f64) -> f64 {
        let n = self.x.len();
        if q <= self.x[0] {
            return self.y[0] + self.d[0] * (q - self.x[0]);
        }
        if q >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (q - self.x[n - 1]);
        }
        let i = self.segment(q);
        let h = self.x[i + 1] - self.x[i];
        let t = (q - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    /// Interpolated derivative.
    pub fn derivative(&self, q: f64) -> f64 {
        let n = self.x.len();
        if q <= self.x[0] {
            return self.d[0];
        }
        if q >= self.x[n - 1] {
            return self.d[n - 1];
        }
        let i = self.segment(q);
        let h = self.x[i + 1] - self.x[i];
        let t = (q - self.x[i]) / h;
        let dh00 = 6.0 * t * t - 6.0 * t;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * t * t - 2.0 * t;
        (dh00 * self.y[i] + dh01 * self.y[i + 1]) / h + dh10 * self.d[i] + dh11 * self.d[i + 1]
    }

    pub fn last_x(&self) -> f64 {
        *self.x.last().expect("non-empty table")
    }

    pub fn last_y(&self) -> f64 {
        *self.y.last().expect("non-empty table")
    }
}

/// Derivative at `at` of the Lagrange polynomial through the given nodes.
fn lagrange_derivative(xs: &[f64], ys: &[f64], at: f64) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for j in 0..n {
        let mut denom = 1.0;
        for k in 0..n {
            if k != j {
                denom *= xs[j] - xs[k];
            }
        }
        let mut dsum = 0.0;
        for m in 0..n {
            if m == j {
                continue;
            }
            let mut prod = 1.0;
            for k in 0..n {
                if k != j && k != m {
                    prod *= at - xs[k];
                }
            }
            dsum += prod;
        }
        acc += ys[j] * dsum / denom;
    }
    acc
}

/// Three-point one-sided slope estimate, clipped for monotonicity.
fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// A confining even 1D potential, optionally shifted so its minimum sits at
/// `q = shift`. `V(shift) = 0` in all cases.
#[derive(Debug, Clone)]
pub enum PotentialSpec {
    /// `V(q) = ω²(q − shift)²/2`.
    Harmonic { omega: f64, shift: f64 },
    /// Even well sampled on the right half: `half` maps u = |q − shift| ≥ 0
    /// to V, with `half.value(0) = 0` and V nondecreasing in u.
    TabulatedEven { shift: f64, half: MonotoneCubic },
}

impl PotentialSpec {
    pub fn harmonic(omega: f64) -> Self {
        PotentialSpec::Harmonic { omega, shift: 0.0 }
    }

    pub fn harmonic_shifted(omega: f64, shift: f64) -> Self {
        PotentialSpec::Harmonic { omega, shift }
    }

    /// Build an even tabulated well from half-axis samples `(u, V(u))`,
    /// u ≥ 0 ascending with V(0) = 0.
    pub fn tabulated_even(shift: f64, samples: &[(f64, f64)]) -> Result<Self> {
        if samples.is_empty() || samples[0].0 != 0.0 {
            return Err(CoreError::Domain("half-table must start at u = 0".into()));
        }
        if samples[0].1 != 0.0 {
            return Err(CoreError::Domain("V(0) must be 0 (minimum convention)".into()));
        }
        for w in samples.windows(2) {
            if w[1].1 < w[0].1 {
                return Err(CoreError::Domain("tabulated well must be nondecreasing away from its minimum".into()));
            }
        }
        let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
        Ok(PotentialSpec::TabulatedEven { shift, half: MonotoneCubic::new(x, y)? })
    }

    /// Sample a closure on a uniform half-grid; convenience for tests and
    /// for building quartic-like wells.
    pub fn tabulated_from_fn<F: Fn(f64) -> f64>(shift: f64, u_max: f64, n: usize, f: F) -> Result<Self> {
        let samples: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let u = u_max * i as f64 / n as f64;
                (u, f(u))
            })
            .collect();
        Self::tabulated_even(shift, &samples)
    }

    /// Location of the minimum.
    pub fn shift(&self) -> f64 {
        match self {
            PotentialSpec::Harmonic { shift, .. } => *shift,
            PotentialSpec::TabulatedEven { shift, .. } => *shift,
        }
    }

    pub fn is_harmonic(&self) -> bool {
        matches!(self, PotentialSpec::Harmonic { .. })
    }

    /// Potential value.
    pub fn value(&self, q: f64) -> f64 {
        match self {
            PotentialSpec::Harmonic { omega, shift } => {
                let x = q - shift;
                0.5 * omega * omega * x * x
            }
            PotentialSpec::TabulatedEven { shift, half } => half.value((q - shift).abs()),
        }
    }

    /// dV/dq.
    pub fn derivative(&self, q: f64) -> f64 {
        match self {
            PotentialSpec::Harmonic { omega, shift } => omega * omega * (q - shift),
            PotentialSpec::TabulatedEven { shift, half } => {
                let x = q - shift;
                if x >= 0.0 {
                    half.derivative(x)
                } else {
                    -half.derivative(-x)
                }
            }
        }
    }

    /// Turning points (q_min, q_max) of the level set at energy `e`.
    pub fn turning_points(&self, e: f64) -> Result<(f64, f64)> {
        if e <= 0.0 {
            return Err(CoreError::NoClassicalMotion { energy: e, v_min: 0.0 });
        }
        match self {
            PotentialSpec::Harmonic { omega, shift } => {
                let a = (2.0 * e).sqrt() / omega;
                Ok((shift - a, shift + a))
            }
            PotentialSpec::TabulatedEven { shift, half } => {
                // bracket on the half-axis, extending past the table if needed
                let mut hi = half.last_x();
                while half.value(hi) <= e {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(CoreError::Numerics("potential does not confine at this energy".into()));
                    }
                }
                let u = quad::brent_root(|u| half.value(u) - e, 0.0, hi, 1e-14)?;
                Ok((shift - u, shift + u))
            }
        }
    }

    /// Normalized action I(E) = (1/2π) ∮ p dq over the smooth level set.
    pub fn action(&self, e: f64) -> Result<f64> {
        match self {
            PotentialSpec::Harmonic { omega, .. } => {
                if e <= 0.0 {
                    return Err(CoreError::NoClassicalMotion { energy: e, v_min: 0.0 });
                }
                Ok(e / omega)
            }
            PotentialSpec::TabulatedEven { shift, .. } => {
                let (_, q_max) = self.turning_points(e)?;
                let ut = q_max - shift;
                // I = (2/π) ∫_0^{ut} sqrt(2(E - V)) du, with u = ut - s² to
                // remove the square-root singularity at the turning point
                let s_max = ut.sqrt();
                let val = quad::integrate(
                    |s| {
                        let u = ut - s * s;
                        let k = 2.0 * (e - self.value(shift + u));
                        2.0 * s * k.max(0.0).sqrt()
                    },
                    0.0,
                    s_max,
                    1e-11,
                )?;
                Ok(2.0 * val / core::f64::consts::PI)
            }
        }
    }

    /// Frequency ω(E) = dE/dI.
    pub fn frequency(&self, e: f64) -> Result<f64> {
        match self {
            PotentialSpec::Harmonic { omega, .. } => {
                if e <= 0.0 {
                    return Err(CoreError::NoClassicalMotion { energy: e, v_min: 0.0 });
                }
                Ok(*omega)
            }
            PotentialSpec::TabulatedEven { .. } => {
                let de = (1e-5 * e).max(1e-9);
                let i_hi = self.action(e + de)?;
                let i_lo = self.action(e - de)?;
                Ok(2.0 * de / (i_hi - i_lo))
            }
        }
    }

    /// Angle at which the smooth orbit at energy `e` crosses `q = q_wall`,
    /// with θ = 0 at the maximum of q. Returns π when the wall coincides
    /// with the inner turning point.
    pub fn wall_angle(&self, e: f64, q_wall: f64) -> Result<f64> {
        let v_wall = self.value(q_wall);
        if e < v_wall || (e == v_wall && q_wall > self.shift()) {
            return Err(CoreError::NoImpact { energy: e, v_wall });
        }
        let (q_min, q_max) = self.turning_points(e)?;
        if q_wall > self.shift() {
            return Err(CoreError::Domain(
                "wall on the far side of the minimum is not part of the step geometry".into(),
            ));
        }
        if e == v_wall {
            return Ok(core::f64::consts::PI);
        }
        match self {
            PotentialSpec::Harmonic { shift, .. } => {
                let a = q_max - shift;
                Ok(((q_wall - shift) / a).clamp(-1.0, 1.0).acos())
            }
            PotentialSpec::TabulatedEven { .. } => {
                let omega = self.frequency(e)?;
                let t = self.travel_time(e, q_wall, q_max, q_min)?;
                Ok((omega * t).min(core::f64::consts::PI))
            }
        }
    }

    /// Time along the p < 0 branch from q_max down to `q`, by quadrature of
    /// dt = dq / sqrt(2(E - V)) with the turning-point substitution.
    fn travel_time(&self, e: f64, q: f64, q_max: f64, q_min: f64) -> Result<f64> {
        if q <= q_min {
            // half period
            let s_max = (q_max - q_min).sqrt();
            return quad::integrate(
                |s| {
                    let qq = q_max - s * s;
                    let k = 2.0 * (e - self.value(qq));
                    if k <= 0.0 {
                        0.0
                    } else {
                        2.0 * s / k.sqrt()
                    }
                },
                0.0,
                s_max,
                1e-10,
            );
        }
        let s_max = (q_max - q).sqrt();
        quad::integrate(
            |s| {
                let qq = q_max - s * s;
                let k = 2.0 * (e - self.value(qq));
                if k <= 0.0 {
                    0.0
                } else {
                    2.0 * s / k.sqrt()
                }
            },
            0.0,
            s_max,
            1e-10,
        )
    }

    /// Direct wall action: (1/2π) ∮_{q ≥ q_wall} p dq, i.e. the loop integral
    /// restricted to the outer region. Coincides with the angle-fraction form
    /// `I·θ_wall/π` at q_wall = shift and differs elsewhere.
    pub fn wall_action_integral(&self, e: f64, q_wall: f64) -> Result<f64> {
        let v_wall = self.value(q_wall);
        if e < v_wall {
            return Err(CoreError::NoImpact { energy: e, v_wall });
        }
        let (q_min, q_max) = self.turning_points(e)?;
        let lo = q_wall.max(q_min);
        let ut = q_max - lo;
        let s_max = ut.sqrt();
        let val = quad::integrate(
            |s| {
                let q = q_max - s * s;
                let k = 2.0 * (e - self.value(q));
                2.0 * s * k.max(0.0).sqrt()
            },
            0.0,
            s_max,
            1e-11,
        )?;
        Ok(val / core::f64::consts::PI)
    }

    /// Angle coordinate of a phase-space point on the level set, in (-π, π],
    /// with θ = 0 at the maximum of q and θ increasing along the flow.
    pub fn angle_of(&self, e: f64, q: f64, p: f64) -> Result<f64> {
        match self {
            PotentialSpec::Harmonic { omega, shift } => {
                let theta = (-p / omega).atan2(q - shift);
                Ok(if theta == -core::f64::consts::PI {
                    core::f64::consts::PI
                } else {
                    theta
                })
            }
            PotentialSpec::TabulatedEven { .. } => {
                let (q_min, q_max) = self.turning_points(e)?;
                let omega = self.frequency(e)?;
                let t = self.travel_time(e, q.clamp(q_min, q_max), q_max, q_min)?;
                let theta = omega * t;
                Ok(if p > 0.0 { -theta } else { theta })
            }
        }
    }
}

/// Per-axis classical data on a level set at partial energy E.
#[derive(Debug, Clone)]
pub struct LevelSetGeometry {
    pub e: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Smooth action I(E).
    pub action: f64,
    /// Frequency ω(E) = dE/dI.
    pub omega: f64,
    /// Wall-crossing angle, present when the level set reaches the wall.
    pub theta_wall: Option<f64>,
}

impl LevelSetGeometry {
    /// Assemble the level-set data; `q_wall = None` describes the smooth
    /// (wall-free) axis.
    pub fn at(v: &PotentialSpec, e: f64, q_wall: Option<f64>) -> Result<Self> {
        let (q_min, q_max) = v.turning_points(e)?;
        let action = v.action(e)?;
        let omega = v.frequency(e)?;
        let theta_wall = match q_wall {
            None => None,
            Some(w) => match v.wall_angle(e, w) {
                Ok(t) => Some(t),
                Err(CoreError::NoImpact { .. }) => None,
                Err(err) => return Err(err),
            },
        };
        Ok(Self { e, q_min, q_max, action, omega, theta_wall })
    }

    /// Wall action in the angle-fraction form I·(2θ_wall)/(2π) used by the
    /// EBK conditions.
    pub fn wall_action(&self) -> Result<f64> {
        match self.theta_wall {
            Some(theta) => Ok(self.action * theta / core::f64::consts::PI),
            None => Err(CoreError::NoImpact { energy: self.e, v_wall: f64::INFINITY }),
        }
    }
}
