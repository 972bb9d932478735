//! Orientation-preserving diffeomorphisms of the circle `S¹ = ℝ/ℤ`.
//!
//! A diffeomorphism is stored through its lift `g(t) = t + φ(t)` with a
//! 1-periodic displacement `φ` sampled on the uniform grid `t_j = j/N`.
//! Off-grid values come from the trigonometric interpolant of `φ`, so
//! composition, inversion and differentiation are spectrally accurate for
//! smooth maps. Sup norms are grid sups over grid points and midpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::TrigInterpolant;

/// Grid refinement used for sup norms: grid points plus midpoints.
pub const SUP_REFINE: usize = 2;

/// Arc-length distance on `ℝ/ℤ`.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Anything that acts on the circle through a degree-one lift.
///
/// `apply` and `apply_inv` work on lifts: `apply(t + 1) = apply(t) + 1`.
pub trait CircleMap {
    fn apply(&self, t: f64) -> f64;
    fn apply_inv(&self, t: f64) -> f64;
    fn deriv(&self, t: f64) -> f64;

    fn deriv_inv(&self, t: f64) -> f64 {
        1.0 / self.deriv(self.apply_inv(t))
    }
}

/// Safeguarded Newton solve of `f(s) = target` for an increasing lift `f`
/// whose root is known to lie in `[lo, hi]`.
pub(crate) fn monotone_solve(
    f: impl Fn(f64) -> (f64, f64),
    target: f64,
    guess: f64,
    mut lo: f64,
    mut hi: f64,
    max_iter: usize,
) -> (f64, f64) {
    let mut s = guess.clamp(lo, hi);
    let mut best = (s, f64::INFINITY);
    for _ in 0..max_iter {
        let (v, d) = f(s);
        let r = v - target;
        if r.abs() < best.1 {
            best = (s, r.abs());
        }
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - r / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 1e-16 * (1.0 + s.abs()) {
            let (v, _) = f(next);
            if (v - target).abs() < best.1 {
                best = (next, (v - target).abs());
            }
            break;
        }
        s = next;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffMetricConfig {
    /// Cutoff radius for Hölder quotients, as a fraction of the circle.
    pub epsilon0: f64,
    /// Closeness threshold under which the norm-difference proxy is trusted.
    pub delta0: f64,
    pub inversion_tol: f64,
    pub grid_size: usize,
}

impl Default for DiffMetricConfig {
    fn default() -> Self {
        Self { epsilon0: 0.25, delta0: 0.1, inversion_tol: 1e-10, grid_size: 256 }
    }
}

impl DiffMetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0 <= 0.5) {
            return Err(Error::InvalidParameter(format!("epsilon0 = {} not in (0, 1/2]", self.epsilon0)));
        }
        if !(self.delta0 > 0.0 && self.inversion_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.grid_size < 8 || !self.grid_size.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size {} is not a power of two >= 8", self.grid_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleDiffeo {
    phi: TrigInterpolant,
}

impl CircleDiffeo {
    pub fn identity(n: usize) -> Self {
        Self { phi: TrigInterpolant::new(vec![0.0; n]) }
    }

    pub fn rotation(n: usize, a: f64) -> Self {
        Self::from_displacement_unchecked(vec![a; n])
    }

    /// Builds a diffeomorphism from displacement samples, checking monotonicity.
    pub fn from_displacement(samples: Vec<f64>) -> Result<Self> {
        let g = Self::from_displacement_unchecked(samples);
        let min_d = g.min_derivative();
        if !(min_d > 0.0) {
            return Err(Error::MonotonicityLost { min_derivative: min_d });
        }
        Ok(g)
    }

    /// Shifts the lift by an integer so the mean displacement lies in `[-1/2, 1/2)`.
    fn from_displacement_unchecked(mut samples: Vec<f64>) -> Self {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let shift = (mean + 0.5).floor();
        if shift != 0.0 {
            samples.iter_mut().for_each(|s| *s -= shift);
        }
        Self { phi: TrigInterpolant::new(samples) }
    }

    /// Samples `map` at the grid points of an `n`-point grid.
    pub fn sample<M: CircleMap + ?Sized>(map: &M, n: usize) -> Result<Self> {
        let samples = (0..n)
            .map(|j| {
                let t = j as f64 / n as f64;
                map.apply(t) - t
            })
            .collect();
        Self::from_displacement(samples)
    }

    pub fn grid_size(&self) -> usize {
        self.phi.len()
    }

    pub fn displacement(&self) -> &[f64] {
        self.phi.samples()
    }

    pub fn interpolant(&self) -> &TrigInterpolant {
        &self.phi
    }

    pub fn grid_point(&self, j: usize) -> f64 {
        j as f64 / self.grid_size() as f64
    }

    /// Smallest value of `1 + φ'` over grid points and midpoints.
    pub fn min_derivative(&self) -> f64 {
        self.phi
            .derivative_samples(1, SUP_REFINE)
            .into_iter()
            .fold(f64::INFINITY, |m, d| m.min(1.0 + d))
    }

    pub fn max_derivative(&self) -> f64 {
        self.phi
            .derivative_samples(1, SUP_REFINE)
            .into_iter()
            .fold(f64::NEG_INFINITY, |m, d| m.max(1.0 + d))
    }

    /// Lipschitz bound for both the map and its inverse.
    pub fn bi_lipschitz(&self) -> f64 {
        let d = self.phi.derivative_samples(1, SUP_REFINE);
        let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(1.0 + v), hi.max(1.0 + v)));
        hi.max(1.0 / lo)
    }

    /// Values of the lift on the refined grid `j / (refine N)`.
    pub fn lift_on_refined(&self, refine: usize) -> Vec<f64> {
        let m = self.grid_size() * refine;
        self.phi
            .derivative_samples(0, refine)
            .into_iter()
            .enumerate()
            .map(|(j, p)| j as f64 / m as f64 + p)
            .collect()
    }

    fn solve_inverse(&self, t: f64) -> (f64, f64) {
        let s = self.phi.samples();
        let (lo_phi, hi_phi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let pad = 0.5 * (hi_phi - lo_phi) + 1e-9;
        let guess = t - self.phi.eval(t);
        monotone_solve(
            |u| {
                let (v, d) = self.phi.eval_with_derivative(u);
                (u + v, 1.0 + d)
            },
            t,
            guess,
            t - hi_phi - pad,
            t - lo_phi + pad,
            80,
        )
    }
}

impl CircleMap for CircleDiffeo {
    fn apply(&self, t: f64) -> f64 {
        t + self.phi.eval(t)
    }

    fn apply_inv(&self, t: f64) -> f64 {
        self.solve_inverse(t).0
    }

    fn deriv(&self, t: f64) -> f64 {
        1.0 + self.phi.eval_with_derivative(t).1
    }
}

/// `g ∘ h`, sampled on the common grid.
pub fn compose(g: &CircleDiffeo, h: &CircleDiffeo) -> Result<CircleDiffeo> {
    check_same_grid(g, h)?;
    let samples = h
        .displacement()
        .iter()
        .enumerate()
        .map(|(j, &ph)| {
            let t = h.grid_point(j);
            ph + g.phi.eval(t + ph)
        })
        .collect();
    CircleDiffeo::from_displacement(samples)
}

fn check_same_grid(g: &CircleDiffeo, h: &CircleDiffeo) -> Result<()> {
    if g.grid_size() != h.grid_size() {
        return Err(Error::InvalidParameter(format!(
            "grid sizes differ: {} vs {}",
            g.grid_size(),
            h.grid_size()
        )));
    }
    Ok(())
}

/// `g⁻¹` by bracketed Newton root-finding at each grid point.
pub fn invert(g: &CircleDiffeo, inversion_tol: f64) -> Result<CircleDiffeo> {
    let n = g.grid_size();
    let mut samples = Vec::with_capacity(n);
    for j in 0..n {
        let t = g.grid_point(j);
        let (s, residual) = g.solve_inverse(t);
        if !(residual <= inversion_tol) {
            return Err(Error::ToleranceNotMet { residual, tol: inversion_tol });
        }
        samples.push(s - t);
    }
    CircleDiffeo::from_displacement(samples)
}

/// `D^k g` on the refined grid: `1 + φ'` for `k = 1`, `φ^{(k)}` above.
pub fn derivative(g: &CircleDiffeo, order: usize) -> Result<Vec<f64>> {
    derivative_refined(g, order, 1)
}

pub(crate) fn derivative_refined(g: &CircleDiffeo, order: usize, refine: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::InvalidParameter("derivative order must be >= 1".into()));
    }
    let tail_fraction = g.phi.tail_fraction(order);
    if tail_fraction > 0.01 {
        return Err(Error::OrderTooHigh { order, tail_fraction });
    }
    let mut d = g.phi.derivative_samples(order, refine);
    if order == 1 {
        d.iter_mut().for_each(|v| *v += 1.0);
    }
    Ok(d)
}

fn holder_quotient(values: &[f64], alpha: f64, epsilon0: f64) -> f64 {
    let m = values.len();
    let mut best = 0.0f64;
    for gap in 1..m {
        let d = gap as f64 / m as f64;
        if d >= epsilon0 {
            break;
        }
        let scale = d.powf(-alpha);
        for i in 0..m {
            let q = (values[i] - values[(i + gap) % m]).abs() * scale;
            best = best.max(q);
        }
    }
    best
}

/// Lower estimate of the `α`-Hölder seminorm of `D^k g` over pairs closer than `ε₀`.
///
/// `k = 0` uses the displacement itself. `α = 1` encodes the Lipschitz case.
pub fn holder_seminorm(g: &CircleDiffeo, k: usize, alpha: f64, epsilon0: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} not in (0, 1]")));
    }
    let values = if k == 0 {
        g.phi.derivative_samples(0, SUP_REFINE)
    } else {
        derivative_refined(g, k, SUP_REFINE)?
    };
    Ok(holder_quotient(&values, alpha, epsilon0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    /// Entry 0 is `max_t d(g(t), t)`; entry `i ≥ 1` is `max_t |D^i g|`.
    pub c_norm: Vec<f64>,
    pub holder_seminorm: f64,
    /// `‖g‖_{C^r}`.
    pub norm: f64,
    /// `‖g⁻¹‖_{C^r}`.
    pub inverse_norm: f64,
    /// `|g|_{C^r} = ‖g‖_{C^r} + ‖g⁻¹‖_{C^r}`.
    pub size: f64,
    /// Composition constant `M_r`, filled in by [`crate::estimates::fit_composition_constant`].
    pub composition_constant: Option<f64>,
}

fn split_order(r: f64) -> Result<(usize, f64)> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("smoothness r = {r} must be >= 1")));
    }
    let k = r.floor();
    Ok((k as usize, r - k))
}

/// Order-wise sup norms and Hölder term of `‖g‖_{C^r}` (without the inverse).
fn norm_parts(g: &CircleDiffeo, r: f64, epsilon0: f64) -> Result<(Vec<f64>, f64, f64)> {
    let (k, alpha) = split_order(r)?;
    let mut c_norm = Vec::with_capacity(k + 1);
    let disp = g.phi.derivative_samples(0, SUP_REFINE);
    c_norm.push(disp.iter().fold(0.0f64, |m, &p| m.max(circle_dist(p, 0.0))));
    for i in 1..=k {
        let d = derivative_refined(g, i, SUP_REFINE)?;
        c_norm.push(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let holder = if alpha > 0.0 { holder_seminorm(g, k, alpha, epsilon0)? } else { 0.0 };
    let norm = c_norm[0] + c_norm[1..].iter().fold(0.0f64, |m, &v| m.max(v)) + holder;
    Ok((c_norm, holder, norm))
}

/// `‖g‖_{C^r}`, the inverse's norm, and the size `|g|_{C^r}`.
pub fn norm_cr(g: &CircleDiffeo, r: f64, cfg: &DiffMetricConfig) -> Result<NormReport> {
    let (c_norm, holder, norm) = norm_parts(g, r, cfg.epsilon0)?;
    let inv = invert(g, cfg.inversion_tol)?;
    let (_, _, inverse_norm) = norm_parts(&inv, r, cfg.epsilon0)?;
    Ok(NormReport {
        c_norm,
        holder_seminorm: holder,
        norm,
        inverse_norm,
        size: norm + inverse_norm,
        composition_constant: None,
    })
}

/// Only `‖g‖_{C^r}`, skipping the inverse.
pub fn norm_only(g: &CircleDiffeo, r: f64, epsilon0: f64) -> Result<f64> {
    Ok(norm_parts(g, r, epsilon0)?.2)
}

/// `(d₀(g, h), d_{C⁰}(g, h))`.
pub fn dist_c0(g: &CircleDiffeo, h: &CircleDiffeo, inversion_tol: f64) -> Result<(f64, f64)> {
    check_same_grid(g, h)?;
    let d0 = sup_dist(g, h);
    let gi = invert(g, inversion_tol)?;
    let hi = invert(h, inversion_tol)?;
    Ok((d0, d0 + sup_dist(&gi, &hi)))
}

/// `d₀` over grid points and midpoints.
pub fn sup_dist(g: &CircleDiffeo, h: &CircleDiffeo) -> f64 {
    let a = g.phi.derivative_samples(0, SUP_REFINE);
    let b = h.phi.derivative_samples(0, SUP_REFINE);
    a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max(circle_dist(*x, *y)))
}

/// `d_{C⁰}` when both inverses are already known.
pub fn dist_c0_with_inverses(g: &CircleDiffeo, g_inv: &CircleDiffeo, h: &CircleDiffeo, h_inv: &CircleDiffeo) -> f64 {
    sup_dist(g, h) + sup_dist(g_inv, h_inv)
}

/// Result of [`dist_cr`]: the norm-difference proxy and whether it lies in
/// the regime where it is Lipschitz-equivalent to the path distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistCr {
    pub value: f64,
    pub in_regime: bool,
}

/// `‖u‖_{C^r}` for a periodic difference of lifts `u`, given as a [`TrigInterpolant`].
fn difference_norm(u: &TrigInterpolant, r: f64, epsilon0: f64) -> Result<f64> {
    let (k, alpha) = split_order(r)?;
    let vals = u.derivative_samples(0, SUP_REFINE);
    let mut total = vals.iter().fold(0.0f64, |m, &v| m.max(circle_dist(v, 0.0)));
    let mut top = 0.0f64;
    let mut last = Vec::new();
    for i in 1..=k {
        let d = u.derivative_samples(i, SUP_REFINE);
        top = top.max(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        last = d;
    }
    total += top;
    if alpha > 0.0 {
        total += holder_quotient(&last, alpha, epsilon0);
    }
    Ok(total)
}

fn lift_difference(g: &CircleDiffeo, h: &CircleDiffeo) -> TrigInterpolant {
    let mut u: Vec<f64> = g.displacement().iter().zip(h.displacement()).map(|(a, b)| a - b).collect();
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let shift = mean.round();
    u.iter_mut().for_each(|v| *v -= shift);
    TrigInterpolant::new(u)
}

/// `‖g − h‖_{C^r} + ‖g⁻¹ − h⁻¹‖_{C^r}`, flagged by the `δ₀ |g|_{C^r}⁻¹` regime.
pub fn dist_cr(g: &CircleDiffeo, h: &CircleDiffeo, r: f64, cfg: &DiffMetricConfig) -> Result<DistCr> {
    check_same_grid(g, h)?;
    let gi = invert(g, cfg.inversion_tol)?;
    let hi = invert(h, cfg.inversion_tol)?;
    let value = difference_norm(&lift_difference(g, h), r, cfg.epsilon0)?
        + difference_norm(&lift_difference(&gi, &hi), r, cfg.epsilon0)?;
    let size = norm_only(g, r, cfg.epsilon0)? + norm_only(&gi, r, cfg.epsilon0)?;
    Ok(DistCr { value, in_regime: value < cfg.delta0 / size })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sine(n: usize, eps: f64) -> CircleDiffeo {
        let s = (0..n).map(|j| eps / TAU * (TAU * j as f64 / n as f64).sin()).collect();
        CircleDiffeo::from_displacement(s).unwrap()
    }

    #[test]
    fn compose_identity_is_exact() {
        let g = sine(64, 0.3);
        let c = compose(&CircleDiffeo::identity(64), &g).unwrap();
        assert_eq!(c.displacement(), g.displacement());
    }

    #[test]
    fn rotations_form_a_group() {
        let c = compose(&CircleDiffeo::rotation(32, 0.3), &CircleDiffeo::rotation(32, 0.45)).unwrap();
        // 0.75 is renormalized to the lift -0.25
        assert!(c.displacement().iter().all(|&p| (p + 0.25).abs() < 1e-15));
        let inv = invert(&CircleDiffeo::rotation(32, 0.3), 1e-12).unwrap();
        assert!(inv.displacement().iter().all(|&p| (p + 0.3).abs() < 1e-15));
    }

    #[test]
    fn compose_matches_dense_evaluation() {
        // oracle: closed-form g(g(t)) on a 16x finer grid
        let g = sine(256, 0.1);
        let gg = compose(&g, &g).unwrap();
        let exact = |t: f64| {
            let f = |s: f64| s + 0.1 / TAU * (TAU * s).sin();
            f(f(t))
        };
        assert!(gg.apply(0.0).abs() < 1e-15);
        let fine = 256 * 16;
        let worst = (0..fine)
            .map(|j| j as f64 / fine as f64)
            .map(|t| (gg.apply(t) - exact(t)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "worst {worst}");
        assert!((gg.apply(0.25) - exact(0.25)).abs() < 1e-13);
    }

    #[test]
    fn inversion_residual_against_bisection() {
        let g = sine(256, 0.2);
        let gi = invert(&g, 1e-10).unwrap();
        let f = |s: f64| s + 0.2 / TAU * (TAU * s).sin();
        for j in 0..256 {
            let t = j as f64 / 256.0;
            // bisection oracle
            let (mut lo, mut hi) = (t - 0.1, t + 0.1);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < t {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            assert!((gi.apply(t) - lo).abs() < 1e-12);
            assert!((g.apply(gi.apply(t)) - t).abs() <= 1e-10);
        }
    }

    #[test]
    fn derivative_of_rigid_maps() {
        let d = derivative(&CircleDiffeo::identity(32), 1).unwrap();
        assert!(d.iter().all(|&v| v == 1.0));
        let r = CircleDiffeo::rotation(32, 0.17);
        assert!(derivative(&r, 1).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(derivative(&r, 2).unwrap().iter().all(|&v| v.abs() < 1e-15));
        assert!(matches!(derivative(&r, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn derivative_at_zero_matches_finite_differences() {
        let g = sine(256, 0.1);
        let f = |s: f64| s + 0.1 / TAU * (TAU * s).sin();
        let h = 1e-5;
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let d = derivative(&g, 1).unwrap();
        assert!((d[0] - 1.1).abs() < 1e-8);
        assert!((d[0] - fd).abs() < 1e-8);
    }

    #[test]
    fn rough_samples_refuse_high_order() {
        let s: Vec<f64> = (0..64).map(|j| if j % 2 == 0 { 1e-4 } else { -1e-4 }).collect();
        let g = CircleDiffeo::from_displacement(s).unwrap();
        assert!(matches!(derivative(&g, 1), Err(Error::OrderTooHigh { .. })));
    }

    #[test]
    fn monotonicity_is_enforced() {
        let s = (0..64).map(|j| 0.3 * (TAU * j as f64 / 64.0).sin()).collect();
        assert!(matches!(CircleDiffeo::from_displacement(s), Err(Error::MonotonicityLost { .. })));
    }

    #[test]
    fn c1_norms_of_rigid_maps() {
        let cfg = DiffMetricConfig { grid_size: 32, ..Default::default() };
        let id = norm_cr(&CircleDiffeo::identity(32), 1.0, &cfg).unwrap();
        assert_eq!(id.norm, 1.0);
        assert_eq!(id.size, 2.0);
        let half = norm_cr(&CircleDiffeo::rotation(32, 0.5), 1.0, &cfg).unwrap();
        assert!((half.norm - 1.5).abs() < 1e-15);
        assert_eq!(half.c_norm.len(), 2);
    }

    #[test]
    fn holder_seminorm_matches_fine_pairwise_sup() {
        for g in [CircleDiffeo::rotation(64, 0.2), CircleDiffeo::identity(64)] {
            assert!(holder_seminorm(&g, 1, 0.5, 0.25).unwrap() < 1e-14);
        }
        let g = sine(256, 0.1);
        let got = holder_seminorm(&g, 1, 1.0, 0.25).unwrap();
        // oracle: brute-force pairwise sup of |D g(t) - D g(t')| / |t - t'| on an 8x finer grid
        let m = 256 * 8;
        let dg = |t: f64| 1.0 + 0.1 * (TAU * t).cos();
        let mut best = 0.0f64;
        for i in 0..m {
            for gap in 1..(m / 4) {
                let (t, u) = (i as f64 / m as f64, (i + gap) as f64 / m as f64);
                best = best.max((dg(t) - dg(u)).abs() / (u - t));
            }
        }
        assert!((got - best).abs() / best < 0.02, "{got} vs {best}");
    }

    #[test]
    fn c0_distance_of_rotation() {
        let (d0, dc0) = dist_c0(&CircleDiffeo::rotation(32, 0.7), &CircleDiffeo::identity(32), 1e-12).unwrap();
        assert!((d0 - 0.3).abs() < 1e-12);
        assert!((dc0 - 0.6).abs() < 1e-12);
        let g = sine(32, 0.3);
        assert_eq!(dist_c0(&g, &g, 1e-12).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn cr_distance_of_small_rotation() {
        let cfg = DiffMetricConfig { grid_size: 32, ..Default::default() };
        let d = dist_cr(&CircleDiffeo::rotation(32, 0.01), &CircleDiffeo::identity(32), 1.0, &cfg).unwrap();
        assert!((d.value - 0.02).abs() < 1e-12);
        assert!(d.in_regime);
        let g = sine(32, 0.3);
        assert_eq!(dist_cr(&g, &g, 1.5, &cfg).unwrap().value, 0.0);
    }
}
