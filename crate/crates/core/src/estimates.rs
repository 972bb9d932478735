//! Empirical constants for the composition and distance estimates on `Diff^r(S¹)`.
//!
//! The constants in these estimates are existential. Here they are fitted as the
//! largest observed ratio over seeded random band-limited samples, so a fit is a
//! lower estimate of the true constant and its stability across seeds is the
//! quantity of interest.

use std::f64::consts::TAU;

use rand::Rng;

use crate::circle::{compose, dist_cr, invert, norm_cr, norm_only, CircleDiffeo, DiffMetricConfig};
use crate::error::{Error, Result};

/// Random band-limited diffeomorphisms
/// `t ↦ t + s + Σ_k a_k/(2πk) sin 2πk(t − p_k)`, `1 ≤ k ≤ max_mode`, with `Σ a_k ≤ strength`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomDiffeoSpec {
    pub max_mode: usize,
    /// Bound on `sup |φ′|`; below 1 so every sample is monotone.
    pub strength: f64,
}

impl Default for RandomDiffeoSpec {
    fn default() -> Self {
        Self { max_mode: 4, strength: 0.6 }
    }
}

fn random_displacement<R: Rng + ?Sized>(rng: &mut R, n: usize, spec: &RandomDiffeoSpec) -> Vec<f64> {
    let weights: Vec<f64> = (0..spec.max_mode).map(|_| rng.gen::<f64>()).collect();
    let total: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let scale = spec.strength * rng.gen::<f64>() / total;
    let modes: Vec<(f64, f64, f64)> =
        weights.iter().enumerate().map(|(i, w)| ((i + 1) as f64, w * scale, rng.gen::<f64>())).collect();
    (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            modes.iter().map(|&(k, a, p)| a / (TAU * k) * (TAU * k * (t - p)).sin()).sum::<f64>()
        })
        .collect()
}

pub fn random_diffeo<R: Rng + ?Sized>(rng: &mut R, n: usize, spec: &RandomDiffeoSpec) -> Result<CircleDiffeo> {
    if spec.max_mode == 0 || !(spec.strength > 0.0 && spec.strength < 1.0) || 2 * spec.max_mode >= n {
        return Err(Error::InvalidParameter(format!("random diffeo spec {spec:?} on a {n}-point grid")));
    }
    let shift = rng.gen::<f64>() - 0.5;
    let disp = random_displacement(rng, n, spec).into_iter().map(|v| v + shift).collect();
    CircleDiffeo::from_displacement(disp)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Fit of `‖h∘g‖_{C^r} ≤ M_r ‖h‖_{C^r} (1 + ‖g‖_{C^r})^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionFit {
    pub r: f64,
    pub samples: usize,
    /// Largest observed ratio: the smallest `M_r` consistent with every sample.
    pub m_r: f64,
    pub median_ratio: f64,
}

impl CompositionFit {
    /// Relative difference of two fits, `|a/b − 1|` with the larger in the numerator.
    pub fn spread(&self, other: &CompositionFit) -> f64 {
        self.m_r.max(other.m_r) / self.m_r.min(other.m_r) - 1.0
    }
}

/// `‖h∘g‖ / (‖h‖ (1 + ‖g‖)^r)` for one pair.
pub fn composition_ratio(h: &CircleDiffeo, g: &CircleDiffeo, r: f64, cfg: &DiffMetricConfig) -> Result<f64> {
    let hg = compose(h, g)?;
    let lhs = norm_only(&hg, r, cfg.epsilon0)?;
    let nh = norm_only(h, r, cfg.epsilon0)?;
    let ng = norm_only(g, r, cfg.epsilon0)?;
    Ok(lhs / (nh * (1.0 + ng).powf(r)))
}

pub fn fit_composition_constant<R: Rng + ?Sized>(
    rng: &mut R,
    r: f64,
    samples: usize,
    spec: &RandomDiffeoSpec,
    cfg: &DiffMetricConfig,
) -> Result<CompositionFit> {
    let mut ratios = Vec::with_capacity(samples);
    for _ in 0..samples {
        let h = random_diffeo(rng, cfg.grid_size, spec)?;
        let g = random_diffeo(rng, cfg.grid_size, spec)?;
        ratios.push(composition_ratio(&h, &g, r, cfg)?);
    }
    let m_r = ratios.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(CompositionFit { r, samples, m_r, median_ratio: median(ratios) })
}

/// Fit of the conjugated-distance estimate
/// `d_{C^r}(g h₁ g̃, g h₂ g̃) ≤ M (‖g‖_{C^q}(1+‖g̃‖_{C^r})^r + ‖g̃⁻¹‖_{C^q}(1+‖g⁻¹‖_{C^r})^r) d_{C^r}(h₁, h₂)^ρ`
/// with `ρ = q − r`, distances by the norm-difference proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceFit {
    pub r: f64,
    pub q: f64,
    /// Samples with both proxies in the `δ₀` regime; only these enter the fit.
    pub samples: usize,
    pub rejected: usize,
    pub m: f64,
    pub median_ratio: f64,
}

impl DistanceFit {
    pub fn spread(&self, other: &DistanceFit) -> f64 {
        self.m.max(other.m) / self.m.min(other.m) - 1.0
    }
}

/// Perturbation sizes, relative to `δ₀ / |h₁|`, are log-uniform over this range.
const PERTURB_DECADES: (f64, f64) = (-4.0, -1.0);

pub fn fit_distance_constant<R: Rng + ?Sized>(
    rng: &mut R,
    r: f64,
    q: f64,
    samples: usize,
    spec: &RandomDiffeoSpec,
    cfg: &DiffMetricConfig,
) -> Result<DistanceFit> {
    let rho = q - r;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < q - r <= 1, got r = {r}, q = {q}")));
    }
    let n = cfg.grid_size;
    let mut ratios = Vec::with_capacity(samples);
    let mut rejected = 0;
    for _ in 0..samples {
        let g = random_diffeo(rng, n, spec)?;
        let gt = random_diffeo(rng, n, spec)?;
        let h1 = random_diffeo(rng, n, spec)?;
        let size = norm_cr(&h1, r, cfg)?.size;
        let eta = cfg.delta0 / size * 10f64.powf(rng.gen_range(PERTURB_DECADES.0..PERTURB_DECADES.1));
        let bump = random_displacement(rng, n, &RandomDiffeoSpec { strength: 1.0 - f64::EPSILON, ..*spec });
        let h2 = CircleDiffeo::from_displacement(h1.displacement().iter().zip(&bump).map(|(a, b)| a + eta * b).collect())?;
        let d = dist_cr(&h1, &h2, r, cfg)?;
        let lhs = dist_cr(&compose(&compose(&g, &h1)?, &gt)?, &compose(&compose(&g, &h2)?, &gt)?, r, cfg)?;
        if !d.in_regime || !lhs.in_regime || d.value == 0.0 {
            rejected += 1;
            continue;
        }
        let gi = invert(&g, cfg.inversion_tol)?;
        let gti = invert(&gt, cfg.inversion_tol)?;
        let factor = norm_only(&g, q, cfg.epsilon0)? * (1.0 + norm_only(&gt, r, cfg.epsilon0)?).powf(r)
            + norm_only(&gti, q, cfg.epsilon0)? * (1.0 + norm_only(&gi, r, cfg.epsilon0)?).powf(r);
        ratios.push(lhs.value / (factor * d.value.powf(rho)));
    }
    let m = ratios.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok(DistanceFit { r, q, samples: ratios.len(), rejected, m, median_ratio: median(ratios) })
}

/// Steps used to discretize the inverse of a straight-line path.
pub const PATH_STEPS: usize = 32;

/// Length of the straight-line path `p_s = (1−s)g + s h` in displacement space, plus
/// the length of `s ↦ p_s⁻¹`, in the order-wise `max_i max_t ∫ |∂_s D^i p_s| ds` form.
///
/// The forward part is exact; the inverse part sums increments over `steps` pieces,
/// which is a lower estimate of its length and an upper estimate of the distance.
pub fn path_length(g: &CircleDiffeo, h: &CircleDiffeo, r: f64, cfg: &DiffMetricConfig, steps: usize) -> Result<f64> {
    let k = r.floor() as usize;
    let diff = CircleDiffeo::from_displacement(h.displacement().iter().zip(g.displacement()).map(|(a, b)| a - b).collect())?;
    let forward = (0..=k)
        .map(|i| diff.interpolant().derivative_samples(i, 2).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0f64, f64::max);
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let mut acc = vec![Vec::<f64>::new(); k + 1];
    for step in 0..=steps {
        let s = step as f64 / steps as f64;
        let p = CircleDiffeo::from_displacement(
            g.displacement().iter().zip(h.displacement()).map(|(a, b)| (1.0 - s) * a + s * b).collect(),
        )?;
        let pi = invert(&p, cfg.inversion_tol)?;
        let ders: Vec<Vec<f64>> = (0..=k).map(|i| pi.interpolant().derivative_samples(i, 2)).collect();
        if let Some(prev) = &prev {
            for i in 0..=k {
                if acc[i].is_empty() {
                    acc[i] = vec![0.0; ders[i].len()];
                }
                for (a, (x, y)) in acc[i].iter_mut().zip(ders[i].iter().zip(&prev[i])) {
                    *a += (x - y).abs();
                }
            }
        }
        prev = Some(ders);
    }
    let inverse = acc.iter().map(|v| v.iter().fold(0.0f64, |m, &x| m.max(x))).fold(0.0f64, f64::max);
    Ok(forward + inverse)
}

/// Agreement between the norm-difference proxy and straight-line path lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonFit {
    pub r: f64,
    pub samples: usize,
    pub rejected: usize,
    /// `max(proxy/path, path/proxy)` over samples.
    pub kappa: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

pub fn compare_proxy_to_path<R: Rng + ?Sized>(
    rng: &mut R,
    r: f64,
    samples: usize,
    spec: &RandomDiffeoSpec,
    cfg: &DiffMetricConfig,
) -> Result<ComparisonFit> {
    let n = cfg.grid_size;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut kept = 0;
    let mut rejected = 0;
    for _ in 0..samples {
        let g = random_diffeo(rng, n, spec)?;
        let size = norm_cr(&g, r, cfg)?.size;
        let eta = cfg.delta0 / size * 10f64.powf(rng.gen_range(PERTURB_DECADES.0..PERTURB_DECADES.1));
        let bump = random_displacement(rng, n, &RandomDiffeoSpec { strength: 1.0 - f64::EPSILON, ..*spec });
        let h = CircleDiffeo::from_displacement(g.displacement().iter().zip(&bump).map(|(a, b)| a + eta * b).collect())?;
        let proxy = dist_cr(&g, &h, r, cfg)?;
        if !proxy.in_regime || proxy.value == 0.0 {
            rejected += 1;
            continue;
        }
        let ratio = proxy.value / path_length(&g, &h, r, cfg, PATH_STEPS)?;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        kept += 1;
    }
    let kappa = if kept == 0 { f64::NAN } else { hi.max(1.0 / lo) };
    Ok(ComparisonFit { r, samples: kept, rejected, kappa, min_ratio: lo, max_ratio: hi })
}
