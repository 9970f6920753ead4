//! Wavefunction diagnostics: product/parity eigenstate construction, WKB
//! envelope checks, the concentrated-fraction counting argument,
//! perturbation-mixing metrics, marginal means and the concentration
//! indicator.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dynamics::StepRegion;
use crate::error::{CoreError, Result};
use crate::grid::Grid2D;
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::operator::DiscreteHamiltonian;
use crate::potential::PotentialSpec;
use crate::solve1d::{Parity, Spectrum1D};
use crate::stats;

/// A grid eigenfunction sampled on the full tensor grid (zeros on removed
/// step nodes), L²-normalized with weight h1·h2.
#[derive(Debug, Clone)]
pub struct WavefunctionField {
    pub grid: Grid2D,
    /// Row-major over (i1, i2).
    pub values: Vec<f64>,
    pub energy: f64,
}

impl WavefunctionField {
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_weight()).sqrt()
    }

    /// Weighted inner product ⟨self | other⟩.
    pub fn inner(&self, other: &WavefunctionField) -> Result<f64> {
        if self.grid.n != other.grid.n {
            return Err(CoreError::Domain("wavefunction grids do not match".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_weight())
    }
}

/// Scatter a solver eigenvector (defined on kept nodes) onto the full grid.
pub fn field_from_solution(
    h: &DiscreteHamiltonian,
    vector: &[f64],
    energy: f64,
) -> WavefunctionField {
    let mut values = alloc::vec![0.0; h.grid.len()];
    for (u, &lin) in h.kept_nodes().iter().enumerate() {
        values[lin as usize] = vector[u];
    }
    WavefunctionField { grid: h.grid.clone(), values, energy }
}

/// A product eigenstate of the step-at-origin system (both 1D indices odd).
#[derive(Debug, Clone)]
pub struct ProductState {
    pub k1: usize,
    pub k2: usize,
    pub energy: f64,
    pub field: WavefunctionField,
}

/// Build every odd-odd product state with energy below `e_max`, injected
/// onto the 2D grid, zeroed on the closed step quadrant and renormalized.
///
/// Valid only for the step at the origin: elsewhere the product is not an
/// eigenstate.
pub fn product_states(
    spec1: &Spectrum1D,
    spec2: &Spectrum1D,
    grid: &Grid2D,
    step: &StepRegion,
    e_max: f64,
) -> Result<Vec<ProductState>> {
    if step.q1_wall != 0.0 || step.q2_wall != 0.0 {
        return Err(CoreError::Domain(
            "product construction is only valid for the step at the origin".into(),
        ));
    }
    if spec1.grid.n != grid.n[0] || spec2.grid.n != grid.n[1] {
        return Err(CoreError::Domain("1D spectra do not match the 2D grid axes".into()));
    }
    let q1 = grid.axis_coords(0);
    let q2 = grid.axis_coords(1);
    let tol = 1e-9 * grid.h[0].min(grid.h[1]);
    let mut out = Vec::new();
    for (k1, e1) in spec1.energies.iter().enumerate() {
        if spec1.parity[k1] != Parity::Odd {
            continue;
        }
        for (k2, e2) in spec2.energies.iter().enumerate() {
            if spec2.parity[k2] != Parity::Odd {
                continue;
            }
            let energy = e1 + e2;
            if energy > e_max {
                break;
            }
            let psi1 = &spec1.wavefunctions[k1];
            let psi2 = &spec2.wavefunctions[k2];
            let mut values = alloc::vec![0.0; grid.len()];
            for i1 in 0..grid.n[0] {
                for i2 in 0..grid.n[1] {
                    if q1[i1] <= tol && q2[i2] <= tol {
                        continue; // closed quadrant: exactly zero
                    }
                    values[grid.index(i1, i2)] = psi1[i1] * psi2[i2];
                }
            }
            let mut field = WavefunctionField { grid: grid.clone(), values, energy };
            let norm = field.l2_norm();
            if norm <= 0.0 {
                return Err(CoreError::Numerics("degenerate product state".into()));
            }
            field.values.iter_mut().for_each(|v| *v /= norm);
            out.push(ProductState { k1, k2, energy, field });
        }
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}

/// Region classification of a WKB amplitude estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WkbSide {
    /// Oscillatory region: amplitude ∝ (2(E−V))^{−1/4}.
    Inside(f64),
    /// Tunneling region: envelope (2(V−E))^{−1/4} e^{−∫√(2(V−E))}.
    Outside(f64),
}

/// Leading-order WKB amplitude estimate at `q`, for decay-rate checks.
/// Fails within `cutoff` of the turning point where the approximation
/// breaks down.
pub fn wkb_profile(v: &PotentialSpec, e: f64, q: f64, cutoff: f64) -> Result<WkbSide> {
    let vq = v.value(q);
    let gap = e - vq;
    if gap.abs() < cutoff * e.abs().max(1.0) {
        return Err(CoreError::Domain(alloc::format!(
            "WKB invalid near the turning point: |E - V({q})| = {}",
            gap.abs()
        )));
    }
    if gap > 0.0 {
        Ok(WkbSide::Inside((2.0 * gap).powf(-0.25)))
    } else {
        let (q_min, q_max) = v.turning_points(e)?;
        let (lo, hi) = if q > q_max { (q_max, q) } else { (q, q_min) };
        let phase = crate::quad::integrate(
            |x| (2.0 * (v.value(x) - e)).max(0.0).sqrt(),
            lo,
            hi,
            1e-10,
        )?;
        Ok(WkbSide::Outside((-phase).exp() * (2.0 * -gap).powf(-0.25)))
    }
}

/// Counting prediction for the fraction of step-at-origin eigenstates that
/// are odd-odd products: (#odd-odd smooth levels ≤ E) / (¾ · #smooth levels
/// ≤ E). Tends to 1/3.
pub fn concentrated_fraction_prediction(
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    step: &StepRegion,
    e: f64,
) -> Result<f64> {
    if step.q1_wall != 0.0 || step.q2_wall != 0.0 {
        return Err(CoreError::Domain(
            "the counting argument applies to the step at the origin".into(),
        ));
    }
    let ladder = |v: &PotentialSpec| -> Result<Vec<f64>> {
        // 1D semiclassical levels I(E_k) = k + 1/2, exact for harmonic wells
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let target = k as f64 + 0.5;
            let e_k = match v {
                PotentialSpec::Harmonic { omega, .. } => omega * target,
                _ => {
                    // invert the action: I(E) is monotone increasing
                    let mut hi = e.max(1.0);
                    while v.action(hi)? < target {
                        hi *= 2.0;
                    }
                    crate::quad::brent_root(
                        |x| v.action(x).unwrap_or(f64::NAN) - target,
                        1e-12,
                        hi,
                        1e-12,
                    )?
                }
            };
            if e_k > e {
                break;
            }
            out.push(e_k);
            k += 1;
            if k > 100_000 {
                return Err(CoreError::Numerics("ladder enumeration ran away".into()));
            }
        }
        Ok(out)
    };
    let l1 = ladder(v1)?;
    let l2 = ladder(v2)?;
    let mut all = 0usize;
    let mut odd_odd = 0usize;
    for (k1, e1) in l1.iter().enumerate() {
        for (k2, e2) in l2.iter().enumerate() {
            if e1 + e2 <= e {
                all += 1;
                if k1 % 2 == 1 && k2 % 2 == 1 {
                    odd_odd += 1;
                }
            }
        }
    }
    if all == 0 {
        return Err(CoreError::Domain(alloc::format!("no smooth levels below E = {e}")));
    }
    Ok(odd_odd as f64 / (0.75 * all as f64))
}

/// Weighted overlap coefficients ⟨basis_j | psi⟩ with a Parseval guard.
pub fn overlap_coefficients(
    psi: &WavefunctionField,
    basis: &[WavefunctionField],
) -> Result<Vec<f64>> {
    let mut coeffs = Vec::with_capacity(basis.len());
    let mut mass = 0.0;
    for b in basis {
        let c = psi.inner(b)?;
        mass += c * c;
        coeffs.push(c);
    }
    if mass > 1.0 + 1e-6 {
        return Err(CoreError::Numerics(alloc::format!(
            "Parseval violation: captured mass {mass} exceeds 1"
        )));
    }
    Ok(coeffs)
}

/// Parameters of the mixing metrics (indices are 0-based level numbers).
#[derive(Debug, Clone)]
pub struct MixingParams {
    /// First analyzed level N.
    pub n: usize,
    /// Window extent ΔN (levels N..=N+ΔN enter the means).
    pub delta_n: usize,
    /// Basis truncation J (coefficients on basis levels 0..J).
    pub j: usize,
    /// Threshold δ of the mixing count T.
    pub delta: f64,
    /// Tolerance for grouping degenerate basis levels into clusters.
    pub cluster_tol: f64,
}

#[derive(Debug, Clone)]
pub struct MixingReport {
    /// Mean squared maximal projection (cluster-span convention).
    pub p: f64,
    /// Mean number of above-threshold contributions per unit captured mass.
    pub t: f64,
    /// Smallest captured mass Σ_j c² over the analyzed states.
    pub captured_min: f64,
    pub warning: Option<String>,
}

/// Compute P and T for perturbed states against an unperturbed basis.
///
/// `perturbed` must hold the eigenstates with global indices
/// params.n ..= params.n + params.delta_n (inclusive), `basis` the
/// unperturbed states 0..J with their energies, in order.
pub fn mixing_metrics(
    perturbed: &[WavefunctionField],
    basis: &[WavefunctionField],
    basis_energies: &[f64],
    params: &MixingParams,
) -> Result<MixingReport> {
    if perturbed.len() != params.delta_n + 1 {
        return Err(CoreError::Domain(alloc::format!(
            "expected {} perturbed states, got {}",
            params.delta_n + 1,
            perturbed.len()
        )));
    }
    if basis.len() < params.j || basis_energies.len() != basis.len() {
        return Err(CoreError::Domain(alloc::format!(
            "basis truncation J = {} exceeds the {} supplied basis states",
            params.j,
            basis.len()
        )));
    }
    let basis = &basis[..params.j];
    let clusters = stats::degeneracy_count(&basis_energies[..params.j], params.cluster_tol);

    let mut p_acc = 0.0;
    let mut count_above = 0usize;
    let mut mass_total = 0.0;
    let mut captured_min = f64::INFINITY;
    for psi in perturbed {
        let coeffs = overlap_coefficients(psi, basis)?;
        let mass: f64 = coeffs.iter().map(|c| c * c).sum();
        captured_min = captured_min.min(mass);
        // maximal projection onto degenerate cluster spans
        let mut max_proj = 0.0f64;
        for cl in &clusters {
            let proj: f64 = coeffs[cl.first_index..cl.first_index + cl.multiplicity]
                .iter()
                .map(|c| c * c)
                .sum();
            max_proj = max_proj.max(proj);
        }
        p_acc += max_proj;
        count_above += coeffs.iter().filter(|c| *c * *c > params.delta).count();
        mass_total += mass;
    }
    let n_states = perturbed.len() as f64;
    let warning = (captured_min < 0.9).then(|| {
        alloc::format!(
            "captured mass dropped to {captured_min:.3}: basis truncation J = {} may be too small",
            params.j
        )
    });
    Ok(MixingReport {
        p: p_acc / n_states,
        t: count_above as f64 / mass_total,
        captured_min,
        warning,
    })
}

/// Scaled perturbation abscissa ε·(E_N/E_ref)^{3/2}.
pub fn scaled_epsilon(eps: f64, e_n: f64, e_ref: f64) -> f64 {
    eps * (e_n / e_ref).powf(1.5)
}

/// Which axis a marginal integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalAxis {
    /// M^H(q2) = ∫ |ψ|² dq1.
    Horizontal,
    /// M^V(q1) = ∫ |ψ|² dq2.
    Vertical,
}

/// Density marginal along one axis; integrates to 1 for unit-norm fields.
#[derive(Debug, Clone)]
pub struct MarginalProfile {
    pub axis: MarginalAxis,
    pub coords: Vec<f64>,
    pub samples: Vec<f64>,
    pub argmax_index: usize,
    pub argmax_coord: f64,
}

fn profile(axis: MarginalAxis, coords: Vec<f64>, samples: Vec<f64>) -> MarginalProfile {
    // argmax with ties broken toward larger |q| (Hill-region boundary bias)
    let mut best = 0usize;
    for i in 1..samples.len() {
        let better = samples[i] > samples[best]
            || (samples[i] == samples[best] && coords[i].abs() > coords[best].abs());
        if better {
            best = i;
        }
    }
    let argmax_coord = coords[best];
    MarginalProfile { axis, coords, samples, argmax_index: best, argmax_coord }
}

/// Vertical and horizontal means (M^H, M^V) of a unit-norm field.
pub fn marginal_means(psi: &WavefunctionField) -> (MarginalProfile, MarginalProfile) {
    let g = &psi.grid;
    let (n1, n2) = (g.n[0], g.n[1]);
    let mut mh = alloc::vec![0.0; n2];
    let mut mv = alloc::vec![0.0; n1];
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let d = psi.values[g.index(i1, i2)];
            let d2 = d * d;
            mh[i2] += d2;
            mv[i1] += d2;
        }
    }
    mh.iter_mut().for_each(|x| *x *= g.h[0]);
    mv.iter_mut().for_each(|x| *x *= g.h[1]);
    (
        profile(MarginalAxis::Horizontal, g.axis_coords(1), mh),
        profile(MarginalAxis::Vertical, g.axis_coords(0), mv),
    )
}

/// Concentration label of one eigenstate.
#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub energy: f64,
    pub e_tilde: f64,
    /// argmax of M^V (a q1 coordinate).
    pub argmax_q1: f64,
    /// argmax of M^H (a q2 coordinate).
    pub argmax_q2: f64,
    pub concentrated: bool,
}

/// Concentration indicator Ẽ = (V1(argmax M^V) + V2(argmax M^H)) / E.
pub fn e_tilde(
    psi: &WavefunctionField,
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    threshold: f64,
) -> ConcentrationReport {
    let (mh, mv) = marginal_means(psi);
    let value = (v1.value(mv.argmax_coord) + v2.value(mh.argmax_coord)) / psi.energy;
    ConcentrationReport {
        energy: psi.energy,
        e_tilde: value,
        argmax_q1: mv.argmax_coord,
        argmax_q2: mh.argmax_coord,
        concentrated: value >= threshold,
    }
}

#[derive(Debug, Clone)]
pub struct Census {
    pub reports: Vec<ConcentrationReport>,
    /// Indices (into `reports`) of states matching a supplied product state
    /// with overlap² ≥ 0.9.
    pub product_like: Vec<usize>,
    pub fraction_concentrated: f64,
}

/// Per-state concentration reports over a window of eigenstates, with the
/// product-state subset flagged when reference products are supplied.
pub fn concentration_census(
    states: &[WavefunctionField],
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    threshold: f64,
    products: Option<&[ProductState]>,
) -> Result<Census> {
    let mut reports = Vec::with_capacity(states.len());
    let mut product_like = Vec::new();
    for (i, psi) in states.iter().enumerate() {
        reports.push(e_tilde(psi, v1, v2, threshold));
        if let Some(prods) = products {
            for p in prods {
                if (p.energy - psi.energy).abs() < 0.5 {
                    let c = psi.inner(&p.field)?;
                    if c * c >= 0.9 {
                        product_like.push(i);
                        break;
                    }
                }
            }
        }
    }
    let concentrated = reports.iter().filter(|r| r.concentrated).count();
    let fraction_concentrated =
        if reports.is_empty() { 0.0 } else { concentrated as f64 / reports.len() as f64 };
    Ok(Census { reports, product_like, fraction_concentrated })
}

/// The plotting transform Log(|ψ| + max|ψ|) sampled on the grid.
pub fn log_density_export(psi: &WavefunctionField) -> Result<Vec<f64>> {
    let max = psi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(CoreError::Domain("log-density of an identically zero field".into()));
    }
    Ok(psi.values.iter().map(|v| (v.abs() + max).ln()).collect())
}
