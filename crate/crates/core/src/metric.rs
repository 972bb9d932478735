//! Invariant metrics on the circle fiber.
//!
//! A metric on `S¹` is `τ(v, v) = ρ(t)·v²` for a positive density `ρ`; the space
//! of such metrics at one point is flat, with distance `sup |log ρ − log ρ'|`.
//! A bounded cocycle carries an invariant family built by averaging the
//! pullbacks of Lebesgue along forward orbits:
//!
//! `log ρ_x(t) = (2/N) Σ_{n<N} log D𝒜ⁿ_x(t)`.
//!
//! Pulling `ρ_{fx}` back by `A_x` shifts the sum by one term, so the invariance
//! defect at `(x, t)` is exactly `(2/N)|log D𝒜^N_x(t)|`.

use rand::Rng;
use rayon::prelude::*;

use crate::circle::CircleMap;
use crate::cocycle::{derivative_growth, CocycleGenerator, OrbitTape};
use crate::error::{Error, Result};
use crate::holonomy::HolonomySolver;
use crate::spectral::TrigInterpolant;
use crate::stats::fit_power_law;
use crate::torus::{Side, TorusPoint};

/// Largest `|g(g⁻¹(s)) − s|` accepted when resampling through `g⁻¹`.
const PUSH_TOL: f64 = 1e-10;

/// Late-to-early growth of `max |log D𝒜ⁿ|` above which the probe reports an unbounded cocycle.
pub const GROWTH_RATIO: f64 = 1.25;

/// Below this, derivative logs are rounding noise and the probe passes.
const GROWTH_FLOOR: f64 = 1e-9;

/// A positive density on the circle, stored as `log ρ` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    log: TrigInterpolant,
}

impl Density {
    /// `ρ ≡ 1` on an `n`-point grid.
    pub fn lebesgue(n: usize) -> Self {
        Self::from_log(vec![0.0; n])
    }

    /// From samples of `log ρ` at `j/n`; `n` must be a power of two.
    pub fn from_log(samples: Vec<f64>) -> Self {
        Self { log: TrigInterpolant::new(samples) }
    }

    pub fn grid_size(&self) -> usize {
        self.log.len()
    }

    pub fn log_samples(&self) -> &[f64] {
        self.log.samples()
    }

    pub fn log_at(&self, t: f64) -> f64 {
        self.log.eval(t)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.log_at(t).exp()
    }

    /// Mean of `log ρ` over the fiber.
    pub fn log_mean(&self) -> f64 {
        self.log.mean()
    }

    /// `sup |log ρ − log ρ'|` over the grid; both densities must share it.
    pub fn dist(&self, other: &Density) -> f64 {
        assert_eq!(self.grid_size(), other.grid_size());
        self.log_samples().iter().zip(other.log_samples()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `g_*ρ`, with `(g_*ρ)(g(t)) = ρ(t) / Dg(t)²`, resampled on the grid of `rho`.
pub fn pushforward_metric<G: CircleMap + ?Sized>(rho: &Density, g: &G) -> Result<Density> {
    let n = rho.grid_size();
    let samples = (0..n)
        .map(|j| {
            let s = j as f64 / n as f64;
            let u = g.apply_inv(s);
            let residual = (g.apply(u) - s).abs();
            if residual > PUSH_TOL {
                return Err(Error::ToleranceNotMet { residual, tol: PUSH_TOL });
            }
            Ok(rho.log_at(u) - 2.0 * g.deriv(u).ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Density::from_log(samples))
}

/// Cesàro log-density along the forward orbit of `x`, and `log D𝒜^N_x`, at each `t`.
fn cesaro(gen: &CocycleGenerator, x: TorusPoint, n_avg: usize, ts: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let tape = OrbitTape::forward(gen, x, n_avg)?;
    let scale = 2.0 / n_avg as f64;
    let mut logs = Vec::with_capacity(ts.len());
    let mut ends = Vec::with_capacity(ts.len());
    for &t in ts {
        let (mut sum, mut end) = (0.0, 0.0);
        tape.trace(t, |n, _, l| {
            if n < n_avg {
                sum += l;
            } else {
                end = l;
            }
        });
        logs.push(scale * sum);
        ends.push(end);
    }
    Ok((logs, ends))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    /// The base grid is `((i + o₁)/m, (j + o₂)/m)` with `m = resolution` and `o = offset`.
    pub resolution: usize,
    /// Non-dyadic, so that no grid orbit is periodic in floating point.
    pub offset: [f64; 2],
    pub fiber_n: usize,
    /// Averaging length `N`.
    pub n_avg: usize,
    /// Grid index whose fiber mean of `log ρ` is zero.
    pub anchor: usize,
    pub probe_points: usize,
    pub probe_len: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            resolution: 16,
            offset: [0.618_033_988_749_894_9, 0.414_213_562_373_095_1],
            fiber_n: 64,
            n_avg: 10_000,
            anchor: 0,
            probe_points: 4,
            probe_len: 64,
        }
    }
}

impl MetricOptions {
    pub fn point(&self, idx: usize) -> TorusPoint {
        let m = self.resolution as f64;
        let (i, j) = ((idx / self.resolution) as f64, (idx % self.resolution) as f64);
        TorusPoint::new((i + self.offset[0]) / m, (j + self.offset[1]) / m)
    }

    fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.anchor >= self.resolution * self.resolution {
            return Err(Error::InvalidParameter(format!(
                "anchor {} outside a {}x{} grid",
                self.anchor, self.resolution, self.resolution
            )));
        }
        if self.fiber_n < 4 || !self.fiber_n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("fiber grid {} must be a power of two >= 4", self.fiber_n)));
        }
        if self.n_avg < 2 || self.probe_len < 8 {
            return Err(Error::InvalidParameter("averaging and probe lengths too short".into()));
        }
        Ok(())
    }
}

/// The metric family `{τ_x}` on a uniform base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricFamily {
    gen: CocycleGenerator,
    opts: MetricOptions,
    /// Normalized `log ρ`, `fiber_n` samples per grid point.
    log_rho: Vec<f64>,
    /// `log D𝒜^N_x(t_j)` on the same grid.
    endpoint: Vec<f64>,
    offset: f64,
}

impl MetricFamily {
    pub fn options(&self) -> &MetricOptions {
        &self.opts
    }

    pub fn resolution(&self) -> usize {
        self.opts.resolution
    }

    pub fn fiber_n(&self) -> usize {
        self.opts.fiber_n
    }

    pub fn n_avg(&self) -> usize {
        self.opts.n_avg
    }

    pub fn len(&self) -> usize {
        self.opts.resolution * self.opts.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> TorusPoint {
        self.opts.point(idx)
    }

    pub fn fiber_point(&self, j: usize) -> f64 {
        j as f64 / self.opts.fiber_n as f64
    }

    pub fn log_rho(&self, idx: usize) -> &[f64] {
        let n = self.opts.fiber_n;
        &self.log_rho[idx * n..(idx + 1) * n]
    }

    pub fn density(&self, idx: usize) -> Density {
        Density::from_log(self.log_rho(idx).to_vec())
    }

    /// The constant subtracted from every raw average to normalize the anchor.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `(2/N) max |log D𝒜^N_x(t)|` over the grid: the exact invariance defect.
    pub fn telescoping_bound(&self) -> f64 {
        2.0 / self.opts.n_avg as f64 * self.endpoint.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// Largest `|log ρ_x(t) − mean_t log ρ_x|`: the scale for relative residuals.
    pub fn spread(&self) -> f64 {
        self.log_rho
            .chunks(self.opts.fiber_n)
            .map(|c| {
                let mean = c.iter().sum::<f64>() / c.len() as f64;
                c.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()))
            })
            .fold(0.0, f64::max)
    }

    /// Normalized `log ρ_y(t)` at any base point and fiber points, recomputed from the orbit of `y`.
    pub fn eval_log(&self, y: TorusPoint, ts: &[f64]) -> Result<Vec<f64>> {
        let (logs, _) = cesaro(&self.gen, y, self.opts.n_avg, ts)?;
        Ok(logs.into_iter().map(|l| l - self.offset).collect())
    }
}

/// Averages pullbacks of Lebesgue along forward orbits of every grid point.
///
/// A short probe of `max |log D𝒜ⁿ|` at a few grid points runs first; growth by more
/// than [`GROWTH_RATIO`] between the first and last quarter of the probe fails with
/// `Unbounded`.
pub fn build_invariant_metric(gen: &CocycleGenerator, opts: MetricOptions) -> Result<MetricFamily> {
    opts.validate()?;
    probe_growth(gen, &opts)?;
    let n = opts.fiber_n;
    let m = opts.resolution;
    let ts: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let rows = (0..m * m)
        .into_par_iter()
        .map(|idx| cesaro(gen, opts.point(idx), opts.n_avg, &ts))
        .collect::<Result<Vec<_>>>()?;
    let offset = rows[opts.anchor].0.iter().sum::<f64>() / n as f64;
    let mut log_rho = Vec::with_capacity(m * m * n);
    let mut endpoint = Vec::with_capacity(m * m * n);
    for (logs, ends) in rows {
        log_rho.extend(logs.into_iter().map(|l| l - offset));
        endpoint.extend(ends);
    }
    Ok(MetricFamily { gen: gen.clone(), opts, log_rho, endpoint, offset })
}

fn probe_growth(gen: &CocycleGenerator, opts: &MetricOptions) -> Result<()> {
    let stride = (opts.resolution * opts.resolution / opts.probe_points.max(1)).max(1);
    let points: Vec<TorusPoint> = (0..opts.probe_points).map(|i| opts.point(i * stride)).collect();
    let len = opts.probe_len;
    let prof = derivative_growth(gen, &points, len)?;
    let early = prof.max_over(1..=len / 4);
    let late = prof.max_over(len - len / 4..=len);
    if late > GROWTH_FLOOR && late > GROWTH_RATIO * early {
        return Err(Error::Unbounded {
            detail: format!("max |log D A^n| grew from {early:.4} (n <= {}) to {late:.4} (n <= {len})", len / 4),
        });
    }
    Ok(())
}

/// Sampling plan for [`metric_residuals`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSamples {
    /// Fiber gaps, in grid steps, for the fiber Hölder fit.
    pub fiber_gaps: Vec<usize>,
    pub leaf_points: usize,
    pub leaf_scales: Vec<f64>,
    pub holonomy_pairs: usize,
    pub side: Side,
}

impl Default for MetricSamples {
    fn default() -> Self {
        Self {
            fiber_gaps: vec![1, 2, 4],
            leaf_points: 4,
            leaf_scales: vec![0.02, 0.04, 0.08, 0.16],
            holonomy_pairs: 10,
            side: Side::Stable,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// `max R(x, t) = max |log ρ_{fx}(A_x t) + 2 log DA_x(t) − log ρ_x(t)|`.
    pub isometry: f64,
    /// [`MetricFamily::telescoping_bound`].
    pub telescoping_bound: f64,
    /// `max |R(x, t) − (2/N)|log D𝒜^N_x(t)||`, pointwise.
    pub telescoping_gap: f64,
    pub fiber_slope: f64,
    pub leaf_slope: f64,
    pub leaf_constant: f64,
    /// `max sup_t |log ρ_y(H t) + 2 log DH(t) − log ρ_x(t)|` over holonomy pairs.
    pub holonomy_invariance: f64,
    /// The holonomy residual divided by [`MetricFamily::spread`].
    pub holonomy_relative: f64,
    pub spread: f64,
}

/// Isometry, regularity and holonomy-invariance residuals of a metric family.
///
/// `ρ_{fx}` and `ρ_y` off the grid are recomputed from their own orbits, not
/// interpolated from the stored samples.
pub fn metric_residuals<R: Rng + ?Sized>(
    family: &MetricFamily,
    solver: &HolonomySolver<'_>,
    spec: &MetricSamples,
    rng: &mut R,
) -> Result<MetricReport> {
    let gen = &family.gen;
    let n = family.fiber_n();
    let scale = 2.0 / family.n_avg() as f64;
    let per_point = (0..family.len())
        .into_par_iter()
        .map(|idx| {
            let x = family.point(idx);
            // the orbit of the computed image is the tail of the orbit of `x`
            let fx = gen.base.apply_f(x, 1);
            let a = gen.factor(x)?;
            let (images, logs): (Vec<f64>, Vec<f64>) = (0..n).map(|j| a.eval_log(family.fiber_point(j))).unzip();
            let pulled = family.eval_log(fx, &images)?;
            let own = family.log_rho(idx);
            let ends = &family.endpoint[idx * n..(idx + 1) * n];
            let (mut worst, mut gap) = (0.0f64, 0.0f64);
            for j in 0..n {
                let r = (pulled[j] + 2.0 * logs[j] - own[j]).abs();
                worst = worst.max(r);
                gap = gap.max((r - scale * ends[j].abs()).abs());
            }
            Ok((worst, gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let isometry = per_point.iter().fold(0.0f64, |m, p| m.max(p.0));
    let telescoping_gap = per_point.iter().fold(0.0f64, |m, p| m.max(p.1));

    let gaps: Vec<usize> = spec.fiber_gaps.iter().copied().filter(|&g| g > 0 && g < n / 2).collect();
    let moduli: Vec<f64> = gaps
        .iter()
        .map(|&g| {
            (0..family.len())
                .flat_map(|idx| {
                    let row = family.log_rho(idx);
                    (0..n).map(move |j| (row[(j + g) % n] - row[j]).abs())
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let dists: Vec<f64> = gaps.iter().map(|&g| g as f64 / n as f64).collect();
    let fiber_slope = fit_power_law(&dists, &moduli).map_or(f64::NAN, |f| f.slope);

    let base = &gen.base;
    let ts: Vec<f64> = (0..n).map(|j| family.fiber_point(j)).collect();
    let mut leaf_d = Vec::new();
    let mut leaf_v = Vec::new();
    for _ in 0..spec.leaf_points {
        let idx = rng.gen_range(0..family.len());
        let x = family.point(idx);
        for &ell in &spec.leaf_scales {
            let y = base.leaf_point(x, spec.side, ell);
            let ly = family.eval_log(y, &ts)?;
            let d = ly.iter().zip(family.log_rho(idx)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            leaf_d.push(x.dist(&y));
            leaf_v.push(d);
        }
    }
    let (leaf_slope, leaf_constant) = fit_power_law(&leaf_d, &leaf_v).map_or((f64::NAN, f64::NAN), |f| (f.slope, f.intercept.exp()));

    let half = 0.5 * base.r_loc();
    let mut holonomy_invariance = 0.0f64;
    for _ in 0..spec.holonomy_pairs {
        let idx = rng.gen_range(0..family.len());
        let x = family.point(idx);
        let ell = rng.gen_range(-half..half);
        let h = solver.local(x, spec.side, ell)?;
        let y = base.leaf_point(x, spec.side, ell);
        let images: Vec<f64> = ts.iter().map(|&t| h.value.apply(t)).collect();
        let ly = family.eval_log(y, &images)?;
        for (j, &t) in ts.iter().enumerate() {
            let r = (ly[j] + 2.0 * h.value.deriv(t).ln() - family.log_rho(idx)[j]).abs();
            holonomy_invariance = holonomy_invariance.max(r);
        }
    }
    let spread = family.spread();
    let holonomy_relative = if spread > 0.0 { holonomy_invariance / spread } else { holonomy_invariance };
    Ok(MetricReport {
        isometry,
        telescoping_bound: family.telescoping_bound(),
        telescoping_gap,
        fiber_slope,
        leaf_slope,
        leaf_constant,
        holonomy_invariance,
        holonomy_relative,
        spread,
    })
}
