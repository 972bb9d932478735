use rand::Rng;

use super::{CocycleGenerator, OrbitTape};
use crate::circle::{dist_cr, norm_cr};
use crate::error::Result;
use crate::stats::fit_power_law;
use crate::torus::TorusPoint;

/// Base points sampled by [`estimate_beta`].
const BETA_POINTS: usize = 50;
/// Base distances per point: `10^{-3}, 10^{-7/3}, 10^{-5/3}, 10^{-1}`.
const BETA_SCALES: [f64; 4] = [1e-3, 4.641588833612779e-3, 2.154434690031884e-2, 1e-1];

/// Hölder exponent and constant of `x ↦ A_x` in `d_{C^q}` from a log-log regression
/// over 200 pairs.
///
/// The exponent is the regression slope; the constant is the largest observed
/// ratio `d_{C^q}(A_x, A_y) / d(x, y)^β`. Constant generators report `(1, 0)`.
pub fn estimate_beta<R: Rng + ?Sized>(gen: &CocycleGenerator, rng: &mut R) -> Result<(f64, f64)> {
    if gen.family.is_constant() {
        return Ok((1.0, 0.0));
    }
    let mut scales = Vec::with_capacity(BETA_POINTS * BETA_SCALES.len());
    let mut dists = Vec::with_capacity(scales.capacity());
    for _ in 0..BETA_POINTS {
        let x = TorusPoint::random(rng);
        let ax = gen.value(x)?;
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        for &d in &BETA_SCALES {
            let y = x.translate([d * angle.cos(), d * angle.sin()]);
            let ay = gen.value(y)?;
            scales.push(d);
            dists.push(dist_cr(&ax, &ay, gen.q, &gen.fiber)?.value);
        }
    }
    let Some(fit) = fit_power_law(&scales, &dists) else {
        return Ok((1.0, 0.0));
    };
    let beta = fit.slope;
    let c = scales.iter().zip(&dists).fold(0.0f64, |m, (d, v)| m.max(v / d.powf(beta)));
    Ok((beta, c))
}

/// `σ = max_x max(‖DA_x‖, ‖DA_x⁻¹‖)` as a grid sup over `res × res` base points and
/// fiber grid points plus midpoints.
pub fn estimate_sigma(gen: &CocycleGenerator, res: usize) -> Result<f64> {
    let mut sigma = 1.0f64;
    for i in 0..res {
        for j in 0..res {
            let x = TorusPoint::new(i as f64 / res as f64, j as f64 / res as f64);
            let (lo, hi) = gen.factor(x)?.derivative_range(gen.grid_size());
            sigma = sigma.max(hi).max(1.0 / lo);
        }
    }
    Ok(sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaFit {
    pub eta: f64,
    pub k_const: f64,
    /// RMS residual of the least-squares fit of `log |𝒜ⁿ_x|_{C^q}` against `n`.
    pub fit_residual: f64,
    /// Largest `n` reached before the fiber grid stopped resolving the products.
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BunchingReport {
    pub lambda: f64,
    pub sigma: f64,
    pub beta: f64,
    pub holder_constant: Option<f64>,
    /// `θ = σ λ^β`.
    pub theta: f64,
    pub q: f64,
    pub r: f64,
    /// `ρ = q − r`.
    pub rho: f64,
    pub eta_fit: Option<EtaFit>,
    pub e1_ok: bool,
    pub e3_ok: bool,
    pub e3prime_ok: bool,
}

impl BunchingReport {
    /// Fills in the flags from measured numbers.
    pub fn from_measurements(
        lambda: f64,
        sigma: f64,
        beta: f64,
        holder_constant: Option<f64>,
        q: f64,
        r: f64,
        eta_fit: Option<EtaFit>,
    ) -> Self {
        let theta = sigma * lambda.powf(beta);
        let rho = q - r;
        let lb = lambda.powf(beta);
        let k = q.ceil() - 1.0;
        let (e3_ok, e3prime_ok) = if rho > 0.0 {
            let e3 = eta_fit.is_some_and(|f| f.eta.powf(2.0 * (r + 1.0) / rho) * lb < 1.0);
            (e3, sigma.powf(2.0 * (r + 1.0) * (k + 1.0) / rho) * lb < 1.0)
        } else {
            (false, false)
        };
        Self { lambda, sigma, beta, holder_constant, theta, q, r, rho, eta_fit, e1_ok: theta < 1.0, e3_ok, e3prime_ok }
    }

    /// Report with `β = 1`, exact for trigonometric-polynomial families, and a measured `σ`;
    /// skips the Hölder regression and the growth fit.
    pub fn lipschitz(gen: &CocycleGenerator, r: f64) -> Result<Self> {
        let sigma = estimate_sigma(gen, 64)?;
        Ok(Self::from_measurements(gen.base.lambda_s(), sigma, 1.0, None, gen.q, r, None))
    }
}

/// Measures `σ`, `β`, `c`, and fits `η`, `K` from `|𝒜ⁿ_x|_{C^q}` for `n ≤ 20` at eight sampled points.
pub fn bunching_report<R: Rng + ?Sized>(gen: &CocycleGenerator, r: f64, rng: &mut R) -> Result<BunchingReport> {
    let sigma = estimate_sigma(gen, 64)?;
    let (beta, c) = estimate_beta(gen, rng)?;
    let points: Vec<TorusPoint> = (0..8).map(|_| TorusPoint::random(rng)).collect();
    let mut ns = Vec::new();
    let mut logs = Vec::new();
    'outer: for n in 1..=20usize {
        let mut worst = 0.0f64;
        for &x in &points {
            let size = gen.evaluate(x, n as i64).and_then(|g| norm_cr(&g, gen.q, &gen.fiber));
            match size {
                Ok(rep) => worst = worst.max(rep.size),
                Err(_) => break 'outer,
            }
        }
        ns.push(n as f64);
        logs.push(worst.ln());
    }
    let eta_fit = crate::stats::fit_line(&ns, &logs).map(|fit| {
        let log_eta = fit.slope;
        let log_k = ns.iter().zip(&logs).fold(f64::NEG_INFINITY, |m, (n, l)| m.max(l - n * log_eta));
        EtaFit { eta: log_eta.exp(), k_const: log_k.exp(), fit_residual: fit.rms, n_max: ns.len() }
    });
    Ok(BunchingReport::from_measurements(gen.base.lambda_s(), sigma, beta, Some(c), gen.q, r, eta_fit))
}

/// `max |log D𝒜ⁿ_x(t)|` for `n = 0..=n_max` over sampled base points and the fiber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProfile {
    pub max_abs_log_deriv: Vec<f64>,
}

impl GrowthProfile {
    pub fn max_over(&self, range: std::ops::RangeInclusive<usize>) -> f64 {
        self.max_abs_log_deriv[range].iter().fold(0.0, |m, &v| m.max(v))
    }
}

pub fn derivative_growth(gen: &CocycleGenerator, points: &[TorusPoint], n_max: usize) -> Result<GrowthProfile> {
    let grid = gen.grid_size();
    let mut out = vec![0.0f64; n_max + 1];
    for &x in points {
        let tape = OrbitTape::forward(gen, x, n_max)?;
        for j in 0..grid {
            tape.trace(j as f64 / grid as f64, |n, _, l| out[n] = out[n].max(l.abs()));
        }
    }
    Ok(GrowthProfile { max_abs_log_deriv: out })
}

/// Result of [`super::check_bounded`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedCheck {
    pub n_max: usize,
    /// `sup ‖D𝒜ⁿ_x‖` over sampled points, `n ≤ n_max`, fiber grid.
    pub sup_deriv: f64,
    /// `sup ‖D(𝒜ⁿ_x)⁻¹‖` over the same samples.
    pub sup_inv_deriv: f64,
    /// `sup ‖DΦ‖ · sup ‖DΦ⁻¹‖`.
    pub bound: f64,
    pub ok: bool,
}

/// `(sup D𝒜ⁿ_x, sup (D𝒜ⁿ_x)⁻¹)` over `1 ≤ n ≤ n_max`, sampled points and the fiber grid.
pub(super) fn trajectory_extremes(gen: &CocycleGenerator, points: &[TorusPoint], n_max: usize) -> Result<(f64, f64)> {
    let grid = gen.grid_size();
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for &x in points {
        let tape = OrbitTape::forward(gen, x, n_max)?;
        for j in 0..grid {
            tape.trace(j as f64 / grid as f64, |_, _, l| {
                hi = hi.max(l);
                lo = lo.min(l);
            });
        }
    }
    Ok((hi.exp(), (-lo).exp()))
}
