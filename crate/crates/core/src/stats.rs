//! Level-spacing statistics: unfolding, empirical distributions, reference
//! laws (Poisson, semi-Poisson, GOE-Wigner), Kolmogorov–Smirnov distances,
//! degeneracy clustering and the Weyl-count check.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::rng::SplitMix64;

use core::f64::consts::PI;

/// How raw levels are mapped to unit-mean spacings.
pub enum UnfoldMethod<'a> {
    /// Divide nearest-neighbor spacings by their sample mean.
    MeanSpacing,
    /// Map levels through a smooth counting function N(E), then renormalize.
    Weyl(&'a dyn Fn(f64) -> f64),
    /// Fit a polynomial counting function of the given degree, map, and
    /// renormalize.
    Polynomial(usize),
}

impl UnfoldMethod<'_> {
    pub fn tag(&self) -> &'static str {
        match self {
            UnfoldMethod::MeanSpacing => "mean-spacing",
            UnfoldMethod::Weyl(_) => "weyl",
            UnfoldMethod::Polynomial(_) => "polynomial",
        }
    }
}

/// Unfolded nearest-neighbor spacings with provenance.
#[derive(Debug, Clone)]
pub struct SpacingSample {
    /// Nonnegative spacings with sample mean 1.
    pub spacings: Vec<f64>,
    /// (first level index, last level index, E_lo, E_hi) of the window.
    pub window: (usize, usize, f64, f64),
    pub method: &'static str,
}

/// Unfold a sorted level sequence into unit-mean spacings.
///
/// Exact duplicates (beyond 1e-12 of the local scale) are rejected here:
/// degenerate levels must be collapsed first (see [`collapse_degeneracies`]).
pub fn unfold(levels: &[f64], method: UnfoldMethod<'_>) -> Result<SpacingSample> {
    if levels.len() < 2 {
        return Err(CoreError::Domain("unfolding needs at least two levels".into()));
    }
    let scale = levels.last().unwrap().abs().max(1.0);
    for w in levels.windows(2) {
        if w[1] < w[0] {
            return Err(CoreError::Domain("levels must be sorted ascending".into()));
        }
        if w[1] - w[0] <= 1e-12 * scale {
            return Err(CoreError::Domain(
                "degenerate levels in statistics mode: collapse clusters before unfolding".into(),
            ));
        }
    }
    let tag = method.tag();
    let mapped: Vec<f64> = match method {
        UnfoldMethod::MeanSpacing => levels.to_vec(),
        UnfoldMethod::Weyl(counting) => levels.iter().map(|&e| counting(e)).collect(),
        UnfoldMethod::Polynomial(degree) => {
            let coeffs = fit_counting_polynomial(levels, degree)?;
            levels.iter().map(|&e| eval_poly(&coeffs, scale_to_unit(levels, e))).collect()
        }
    };
    let mut spacings: Vec<f64> = mapped.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    if mean <= 0.0 {
        return Err(CoreError::Numerics("unfolding produced a nonpositive mean spacing".into()));
    }
    spacings.iter_mut().for_each(|s| *s /= mean);
    Ok(SpacingSample {
        spacings,
        window: (0, levels.len() - 1, levels[0], *levels.last().unwrap()),
        method: tag,
    })
}

fn scale_to_unit(levels: &[f64], e: f64) -> f64 {
    let lo = levels[0];
    let hi = *levels.last().unwrap();
    if hi > lo {
        2.0 * (e - lo) / (hi - lo) - 1.0
    } else {
        0.0
    }
}

/// Least-squares fit of the counting staircase N(E_i) ≈ i + ½ by a
/// polynomial in the affinely rescaled energy.
fn fit_counting_polynomial(levels: &[f64], degree: usize) -> Result<Vec<f64>> {
    let n = levels.len();
    let m = degree + 1;
    if degree == 0 || degree > 12 || n <= m {
        return Err(CoreError::Domain(alloc::format!(
            "polynomial unfolding degree {degree} unusable for {n} levels"
        )));
    }
    // normal equations in the rescaled variable
    let mut ata = alloc::vec![0.0; m * m];
    let mut atb = alloc::vec![0.0; m];
    for (i, &e) in levels.iter().enumerate() {
        let x = scale_to_unit(levels, e);
        let mut pow = alloc::vec![0.0; m];
        let mut p = 1.0;
        for slot in pow.iter_mut() {
            *slot = p;
            p *= x;
        }
        let target = i as f64 + 0.5;
        for a in 0..m {
            atb[a] += pow[a] * target;
            for b in 0..m {
                ata[a * m + b] += pow[a] * pow[b];
            }
        }
    }
    solve_dense(&mut ata, &mut atb, m)?;
    Ok(atb)
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Result<()> {
    for col in 0..m {
        let (pivot, _) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        if a[pivot * m + col].abs() < 1e-300 {
            return Err(CoreError::Numerics("singular normal equations in polynomial fit".into()));
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..m {
                a[r * m + k] -= f * a[col * m + k];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..m).rev() {
        let mut acc = b[col];
        for k in col + 1..m {
            acc -= a[col * m + k] * b[k];
        }
        b[col] = acc / a[col * m + col];
    }
    Ok(())
}

/// Histogram of a spacing sample (default 40 bins on [0, 4]); bin values are
/// probability densities.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u32>,
    pub density: Vec<f64>,
}

pub fn spacing_histogram(sample: &SpacingSample, bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if sample.spacings.len() < 50 {
        return Err(CoreError::Domain(alloc::format!(
            "histogram mode needs >= 50 spacings, got {}",
            sample.spacings.len()
        )));
    }
    if bins == 0 || hi <= lo {
        return Err(CoreError::Domain("bad histogram binning".into()));
    }
    let mut counts = alloc::vec![0u32; bins];
    let width = (hi - lo) / bins as f64;
    for &s in &sample.spacings {
        if s >= lo && s < hi {
            counts[((s - lo) / width) as usize] += 1;
        }
    }
    let norm = 1.0 / (sample.spacings.len() as f64 * width);
    let density = counts.iter().map(|&c| c as f64 * norm).collect();
    Ok(Histogram { lo, hi, counts, density })
}

/// Exact empirical CDF (right-continuous step function).
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: &SpacingSample) -> Result<Self> {
        if sample.spacings.is_empty() {
            return Err(CoreError::Domain("empty spacing sample".into()));
        }
        let mut sorted = sample.spacings.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn value(&self, s: f64) -> f64 {
        let k = self.sorted.partition_point(|&x| x <= s);
        k as f64 / self.sorted.len() as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.sorted
    }
}

/// Reference nearest-neighbor spacing laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceLaw {
    Poisson,
    SemiPoisson,
    GoeWigner,
}

impl ReferenceLaw {
    pub fn name(&self) -> &'static str {
        match self {
            ReferenceLaw::Poisson => "poisson",
            ReferenceLaw::SemiPoisson => "semi-poisson",
            ReferenceLaw::GoeWigner => "goe-wigner",
        }
    }

    /// Cumulative distribution: Poisson 1−e^{−s}; semi-Poisson
    /// 1−e^{−2s}(2s+1); GOE-Wigner 1−e^{−πs²/4}.
    pub fn cdf(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(CoreError::Domain(alloc::format!("negative spacing {s}")));
        }
        Ok(self.cdf_raw(s))
    }

    pub(crate) fn cdf_raw(&self, s: f64) -> f64 {
        match self {
            ReferenceLaw::Poisson => 1.0 - (-s).exp(),
            ReferenceLaw::SemiPoisson => 1.0 - (-2.0 * s).exp() * (2.0 * s + 1.0),
            ReferenceLaw::GoeWigner => 1.0 - (-PI * s * s / 4.0).exp(),
        }
    }

    pub fn pdf(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(CoreError::Domain(alloc::format!("negative spacing {s}")));
        }
        Ok(match self {
            ReferenceLaw::Poisson => (-s).exp(),
            ReferenceLaw::SemiPoisson => 4.0 * s * (-2.0 * s).exp(),
            ReferenceLaw::GoeWigner => 0.5 * PI * s * (-PI * s * s / 4.0).exp(),
        })
    }

    /// Draw a spacing by inverse-CDF (GOE, Poisson) or as a Gamma(2) sum
    /// (semi-Poisson).
    pub fn sample(&self, rng: &mut SplitMix64) -> f64 {
        match self {
            ReferenceLaw::Poisson => -rng.uniform_open().ln(),
            ReferenceLaw::SemiPoisson => {
                -0.5 * (rng.uniform_open().ln() + rng.uniform_open().ln())
            }
            ReferenceLaw::GoeWigner => (-4.0 * rng.uniform_open().ln() / PI).sqrt(),
        }
    }
}

/// Kolmogorov–Smirnov distance: the sup over sample points of
/// |empirical CDF − reference CDF|, with the right-continuous empirical CDF
/// (ties counted together).
pub fn ks_distance(sample: &SpacingSample, law: ReferenceLaw) -> Result<f64> {
    if sample.spacings.is_empty() {
        return Err(CoreError::Domain("empty spacing sample".into()));
    }
    let mut sorted = sample.spacings.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let f_emp = j as f64 / n;
        let f = law.cdf_raw(sorted[i].max(0.0));
        sup = sup.max((f - f_emp).abs());
        i = j;
    }
    Ok(sup)
}

/// Greedy clustering of sorted levels by gap tolerance.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub center: f64,
    pub multiplicity: usize,
    pub first_index: usize,
}

pub fn degeneracy_count(levels: &[f64], tol: f64) -> Vec<Cluster> {
    let mut clusters = Vec::new();
    if levels.is_empty() {
        return clusters;
    }
    let mut start = 0;
    for i in 1..=levels.len() {
        if i == levels.len() || levels[i] - levels[i - 1] > tol {
            let group = &levels[start..i];
            clusters.push(Cluster {
                center: group.iter().sum::<f64>() / group.len() as f64,
                multiplicity: group.len(),
                first_index: start,
            });
            start = i;
        }
    }
    clusters
}

/// Replace each degenerate cluster by its mean.
pub fn collapse_degeneracies(levels: &[f64], tol: f64) -> Vec<f64> {
    degeneracy_count(levels, tol).into_iter().map(|c| c.center).collect()
}

/// Empirical-over-predicted counting ratio curve: for each level E_i the
/// ratio (i+1)/N(E_i).
pub fn weyl_check(levels: &[f64], counting: &dyn Fn(f64) -> f64) -> Result<Vec<(f64, f64)>> {
    if levels.len() < 100 {
        return Err(CoreError::Domain(alloc::format!(
            "weyl check needs >= 100 levels, got {}",
            levels.len()
        )));
    }
    Ok(levels
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let pred = counting(e);
            (e, if pred > 0.0 { (i as f64 + 1.0) / pred } else { f64::NAN })
        })
        .collect())
}

/// Synthetic levels whose counting function is exactly `inverse` of the
/// supplied N(E): E_i = N⁻¹(i + 1).
pub fn synthetic_weyl_levels(count: usize, inverse_counting: &dyn Fn(f64) -> f64) -> Vec<f64> {
    (0..count).map(|i| inverse_counting(i as f64 + 1.0)).collect()
}

/// A seeded synthetic spectrum whose spacings follow the law (for self-tests
/// of the statistics pipeline).
pub fn synthetic_levels(law: ReferenceLaw, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut levels = Vec::with_capacity(count);
    let mut e = 0.0;
    for _ in 0..count {
        e += law.sample(&mut rng);
        levels.push(e);
    }
    levels
}

#[derive(Debug, Clone)]
pub struct KsSummary {
    pub ks_poisson: f64,
    pub ks_semi_poisson: f64,
    pub ks_goe: f64,
    pub n_levels: usize,
}

/// Convenience bundle of the three KS distances.
pub fn ks_summary(sample: &SpacingSample) -> Result<KsSummary> {
    Ok(KsSummary {
        ks_poisson: ks_distance(sample, ReferenceLaw::Poisson)?,
        ks_semi_poisson: ks_distance(sample, ReferenceLaw::SemiPoisson)?,
        ks_goe: ks_distance(sample, ReferenceLaw::GoeWigner)?,
        n_levels: sample.spacings.len() + 1,
    })
}

/// Trim the lowest `fraction` of levels (non-semiclassical regime).
pub fn trim_low_levels(levels: &[f64], fraction: f64) -> Vec<f64> {
    let skip = (levels.len() as f64 * fraction) as usize;
    levels[skip.min(levels.len())..].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use proptest::prelude::*;

    #[test]
    fn uniform_ladder_unfolds_to_unit_spacings() {
        let levels: Vec<f64> = (0..200).map(|k| 1.3 + 0.37 * k as f64).collect();
        let s = unfold(&levels, UnfoldMethod::MeanSpacing).unwrap();
        for v in &s.spacings {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_spacing_output_has_exactly_unit_mean() {
        let levels = synthetic_levels(ReferenceLaw::Poisson, 500, 42);
        let s = unfold(&levels, UnfoldMethod::MeanSpacing).unwrap();
        let mean = s.spacings.iter().sum::<f64>() / s.spacings.len() as f64;
        assert!((mean - 1.0).abs() < 1e-9, "mean = {mean}");
    }

    #[test]
    fn duplicate_levels_are_rejected() {
        let levels = [1.0, 2.0, 2.0, 3.0];
        assert!(unfold(&levels, UnfoldMethod::MeanSpacing).is_err());
        let unsorted = [2.0, 1.0];
        assert!(unfold(&unsorted, UnfoldMethod::MeanSpacing).is_err());
    }

    #[test]
    fn weyl_unfolding_straightens_quadratic_growth() {
        // levels with N(E) = E²: E_i = sqrt(i+1); Weyl unfolding recovers a
        // uniform ladder
        let levels: Vec<f64> = (0..400).map(|i| ((i + 1) as f64).sqrt()).collect();
        let s = unfold(&levels, UnfoldMethod::Weyl(&|e| e * e)).unwrap();
        for v in &s.spacings {
            assert!((v - 1.0).abs() < 1e-9, "spacing {v}");
        }
    }

    #[test]
    fn polynomial_unfolding_close_to_weyl_on_smooth_counting() {
        let levels: Vec<f64> = (0..600).map(|i| ((i + 1) as f64).sqrt() * 1.7).collect();
        let s = unfold(&levels, UnfoldMethod::Polynomial(4)).unwrap();
        let mean = s.spacings.iter().sum::<f64>() / s.spacings.len() as f64;
        assert!((mean - 1.0).abs() < 1e-9);
        // interior spacings should be near 1 (edges may wobble slightly)
        for v in &s.spacings[20..s.spacings.len() - 20] {
            assert!((v - 1.0).abs() < 0.08, "spacing {v}");
        }
    }

    #[test]
    fn reference_cdf_identities() {
        // closed-form values at s = 1
        let sp = ReferenceLaw::SemiPoisson.cdf(1.0).unwrap();
        assert!((sp - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-12);
        assert!((sp - 0.59399415029016192).abs() < 1e-12);
        let goe = ReferenceLaw::GoeWigner.cdf(1.0).unwrap();
        assert!((goe - (1.0 - (-PI / 4.0).exp())).abs() < 1e-12);
        assert!((goe - 0.54406187223400376).abs() < 1e-12);
        let p = ReferenceLaw::Poisson.cdf(1.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        for law in [ReferenceLaw::Poisson, ReferenceLaw::SemiPoisson, ReferenceLaw::GoeWigner] {
            assert_eq!(law.cdf(0.0).unwrap(), 0.0);
            assert!(law.cdf(-0.1).is_err());
        }
    }

    #[test]
    fn reference_pdfs_integrate_to_one() {
        for law in [ReferenceLaw::Poisson, ReferenceLaw::SemiPoisson, ReferenceLaw::GoeWigner] {
            let total = quad::integrate(|s| law.pdf(s).unwrap(), 0.0, 60.0, 1e-12).unwrap();
            assert!((total - 1.0).abs() < 1e-9, "{}: {total}", law.name());
            // CDF consistency at a few points
            for s in [0.3, 1.0, 2.5] {
                let by_quad = quad::integrate(|t| law.pdf(t).unwrap(), 0.0, s, 1e-12).unwrap();
                assert!((by_quad - law.cdf(s).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cdf_monotone_to_one() {
        for law in [ReferenceLaw::Poisson, ReferenceLaw::SemiPoisson, ReferenceLaw::GoeWigner] {
            let mut prev = 0.0;
            for i in 0..=300 {
                let s = i as f64 * 0.05;
                let c = law.cdf(s).unwrap();
                assert!(c >= prev - 1e-15 && c <= 1.0);
                prev = c;
            }
            assert!(prev > 0.999999);
        }
    }

    #[test]
    fn all_ones_sample_against_poisson() {
        let levels: Vec<f64> = (0..101).map(|k| k as f64).collect();
        let s = unfold(&levels, UnfoldMethod::MeanSpacing).unwrap();
        let d = ks_distance(&s, ReferenceLaw::Poisson).unwrap();
        // sup over sample points: |F_emp(1) - F_P(1)| = |1 - (1 - 1/e)|
        assert!((d - (-1.0f64).exp()).abs() < 1e-9, "d = {d}");
        let ec = Ecdf::new(&s).unwrap();
        assert_eq!(ec.value(0.999999), 0.0);
        assert_eq!(ec.value(1.0), 1.0);
    }

    #[test]
    fn ks_self_distance_small_over_many_seeds() {
        for law in [ReferenceLaw::Poisson, ReferenceLaw::SemiPoisson, ReferenceLaw::GoeWigner] {
            for seed in 0..20u64 {
                let spacings: Vec<f64> = {
                    let mut rng = SplitMix64::new(1000 + seed);
                    (0..10_000).map(|_| law.sample(&mut rng)).collect()
                };
                let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
                let sample = SpacingSample {
                    spacings: spacings.iter().map(|s| s / mean).collect(),
                    window: (0, 0, 0.0, 0.0),
                    method: "synthetic",
                };
                let d = ks_distance(&sample, law).unwrap();
                assert!(d < 0.025, "{} seed {seed}: KS {d}", law.name());
            }
        }
    }

    #[test]
    fn synthetic_samples_identify_their_law() {
        for law in [ReferenceLaw::Poisson, ReferenceLaw::SemiPoisson, ReferenceLaw::GoeWigner] {
            let levels = synthetic_levels(law, 4000, 7);
            let s = unfold(&levels, UnfoldMethod::MeanSpacing).unwrap();
            let own = ks_distance(&s, law).unwrap();
            for other in [ReferenceLaw::Poisson, ReferenceLaw::SemiPoisson, ReferenceLaw::GoeWigner]
            {
                if other != law {
                    let foreign = ks_distance(&s, other).unwrap();
                    assert!(
                        own < foreign,
                        "{}: own {own} vs {} {foreign}",
                        law.name(),
                        other.name()
                    );
                }
            }
        }
    }

    #[test]
    fn degeneracy_multiplicities_sum_to_input_length() {
        let levels = [1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0 + 5e-10, 3.0 + 1e-9, 7.0];
        let clusters = degeneracy_count(&levels, 1e-6);
        let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
        assert_eq!(total, levels.len());
        assert_eq!(clusters.len(), 4);
        assert_eq!(clusters[0].multiplicity, 2);
        assert_eq!(clusters[2].multiplicity, 3);
        let collapsed = collapse_degeneracies(&levels, 1e-6);
        assert_eq!(collapsed.len(), 4);
    }

    #[test]
    fn smooth_resonant_degeneracy_pattern() {
        // smooth ω = (1,1): level E = k+1 has multiplicity k+1
        let mut levels: Vec<f64> = (0..20)
            .flat_map(|a| (0..20).map(move |b| (a as f64 + 0.5) + (b as f64 + 0.5)))
            .collect();
        levels.sort_by(f64::total_cmp);
        let clusters = degeneracy_count(&levels[..55], 1e-9);
        for (k, c) in clusters.iter().take(9).enumerate() {
            assert_eq!(c.multiplicity, k + 1, "cluster at {}", c.center);
            assert!((c.center - (k as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn weyl_check_is_identity_on_synthetic_weyl_levels() {
        let levels = synthetic_weyl_levels(300, &|n| n.sqrt());
        let curve = weyl_check(&levels, &|e| e * e).unwrap();
        for (e, ratio) in curve {
            assert!((ratio - 1.0).abs() < 1e-12, "ratio at {e}: {ratio}");
        }
    }

    proptest! {
        /// KS distance is invariant under affine rescaling of the input
        /// levels (mean-spacing unfolding consumes only spacing ratios).
        #[test]
        fn ks_invariant_under_affine_maps(
            seed in 0u64..1000,
            scale in 0.1f64..50.0,
            offset in -100.0f64..100.0,
        ) {
            let levels = synthetic_levels(ReferenceLaw::SemiPoisson, 300, seed);
            let mapped: Vec<f64> = levels.iter().map(|e| offset + scale * e).collect();
            let a = unfold(&levels, UnfoldMethod::MeanSpacing).unwrap();
            let b = unfold(&mapped, UnfoldMethod::MeanSpacing).unwrap();
            for law in [ReferenceLaw::Poisson, ReferenceLaw::SemiPoisson, ReferenceLaw::GoeWigner] {
                let da = ks_distance(&a, law).unwrap();
                let db = ks_distance(&b, law).unwrap();
                prop_assert!((da - db).abs() < 1e-9);
            }
        }

        /// Degeneracy clustering conserves the level count for any input.
        #[test]
        fn clustering_conserves_count(
            mut raw in proptest::collection::vec(-50.0f64..50.0, 1..200),
            tol in 1e-9f64..1.0,
        ) {
            raw.sort_by(f64::total_cmp);
            let clusters = degeneracy_count(&raw, tol);
            let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
            prop_assert_eq!(total, raw.len());
        }
    }
}
