//! Stable and unstable holonomies as truncated limits
//! `H_{x,y} = lim (𝒜ⁿ_y)⁻¹ ∘ 𝒜ⁿ_x` with a geometric tail certificate.
//!
//! Truncations are evaluated pointwise at the fiber grid: the forward product
//! along the orbit of `x` is advanced one factor per step, and the inverse
//! product along the orbit of `y` is replayed in full. The `y` orbit is
//! generated as `y_k = x_k + ℓ μ^k e`, never by iterating `y` itself, so the
//! exponentially small separation is not swamped by rounding.

use rand::Rng;

use crate::circle::{circle_dist, compose, dist_c0_with_inverses, CircleDiffeo, CircleMap};
use crate::cocycle::{apply_all, apply_all_inv, apply_all_log, push_factor, BunchingReport, CocycleGenerator, FiberMap};
use crate::error::{Error, Result};
use crate::stats::{fit_line, fit_power_law};
use crate::torus::{Side, TorusPoint, LEAF_TOL};

/// Increments at or below this size are rounding noise.
pub const INCREMENT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomyConfig {
    /// Requested bound on the remaining `d_{C⁰}` error.
    pub tol: f64,
    pub max_n: usize,
    /// Steps before a missing contraction is treated as failure.
    pub warmup: usize,
    /// Number of trailing increments used to fit the ratio.
    pub window: usize,
    /// Fitted ratios at or above this abort the computation.
    pub abort_theta: f64,
}

impl Default for HolonomyConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_n: 200, warmup: 8, window: 10, abort_theta: 0.95 }
    }
}

/// Trailing increments that enter the geometric majorant of the latest one.
const ENVELOPE: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyApprox {
    pub value: CircleDiffeo,
    pub inverse: CircleDiffeo,
    pub side: Side,
    pub x: TorusPoint,
    pub leaf_param: f64,
    pub truncation: usize,
    /// Certified `d_{C⁰}` distance to the limit, assuming geometric decay at `measured_theta`.
    pub tail_bound: f64,
    /// Block-maximum ratio over the trailing window, as used by the stopping rule.
    pub measured_theta: f64,
    /// Geometric rate of all increments above the floor, from a log-linear least-squares fit.
    pub fitted_theta: f64,
    pub last_increment: f64,
    /// `d_{C⁰}` increments between consecutive truncations, starting at `n = 1`.
    pub increments: Vec<f64>,
}

impl HolonomyApprox {
    fn identity(x: TorusPoint, side: Side, n: usize) -> Self {
        let id = CircleDiffeo::identity(n);
        Self {
            value: id.clone(),
            inverse: id,
            side,
            x,
            leaf_param: 0.0,
            truncation: 0,
            tail_bound: 0.0,
            measured_theta: 0.0,
            fitted_theta: 0.0,
            last_increment: 0.0,
            increments: Vec::new(),
        }
    }

    pub fn dist_to_id(&self) -> f64 {
        let id = CircleDiffeo::identity(self.value.grid_size());
        dist_c0_with_inverses(&self.value, &self.inverse, &id, &id)
    }

    /// `d_{C⁰}` to another approximation, using the stored inverses.
    pub fn dist(&self, other: &HolonomyApprox) -> f64 {
        dist_c0_with_inverses(&self.value, &self.inverse, &other.value, &other.inverse)
    }
}

/// Ratio of the trailing increments and the resulting tail bound.
///
/// The bound uses the larger of the measured ratio and `prior`, the rate `σλ^β` when
/// it is known. The ratio compares the largest increment in each half of the window, so orbits that
/// pass near symmetric configurations, where single increments nearly cancel, still
/// show their geometric envelope.
fn certify(incs: &[f64], window: usize, prior: f64) -> Option<(f64, f64)> {
    let n = incs.len();
    let w = window.min(n) & !1;
    if w < 4 {
        return None;
    }
    let half = w / 2;
    let block_max = |s: &[f64]| s.iter().fold(0.0f64, |m, &d| m.max(d));
    let early = block_max(&incs[n - w..n - half]);
    let late = block_max(&incs[n - half..]);
    if early <= INCREMENT_FLOOR {
        // the whole window is rounding noise
        return (late <= INCREMENT_FLOOR).then_some((0.0, late.max(early)));
    }
    let measured = (late.max(INCREMENT_FLOOR) / early).powf(1.0 / half as f64);
    let theta = measured.max(prior);
    let env = incs[n.saturating_sub(ENVELOPE)..]
        .iter()
        .enumerate()
        .map(|(i, d)| d * theta.powi((n.min(ENVELOPE) - 1 - i) as i32))
        .fold(0.0f64, f64::max);
    let tail = if theta < 1.0 { env * theta / (1.0 - theta) } else { f64::INFINITY };
    Some((measured, tail))
}

/// `exp` of the slope of `log δ_n` against `n`, over increments above the floor.
fn fitted_rate(incs: &[f64]) -> f64 {
    let (ns, logs): (Vec<f64>, Vec<f64>) =
        incs.iter().enumerate().filter(|(_, d)| **d > INCREMENT_FLOOR).map(|(i, d)| (i as f64, d.ln())).unzip();
    fit_line(&ns, &logs).map_or(0.0, |f| f.slope.exp())
}

/// Pair orbit data for one side: step factors along `x` and along `y`.
struct PairOrbit {
    fx: Vec<FiberMap>,
    fy: Vec<FiberMap>,
    x: TorusPoint,
    ell: f64,
}

impl PairOrbit {
    fn new(x: TorusPoint, ell: f64) -> Self {
        Self { fx: Vec::new(), fy: Vec::new(), x, ell }
    }
}

pub struct HolonomySolver<'a> {
    gen: &'a CocycleGenerator,
    cfg: HolonomyConfig,
    /// `σλ^β` from the bunching report; zero when unknown.
    prior_theta: f64,
}

impl<'a> HolonomySolver<'a> {
    /// Refuses generators whose report fails `σ λ^β < 1`. Tail bounds use at least the
    /// reported rate `σλ^β`.
    pub fn new(gen: &'a CocycleGenerator, report: &BunchingReport, cfg: HolonomyConfig) -> Result<Self> {
        if !report.e1_ok {
            return Err(Error::BunchingViolated { theta: report.theta });
        }
        Ok(Self { gen, cfg, prior_theta: report.theta })
    }

    /// Skips the bunching gate, for experiments that probe non-convergence. Tail bounds
    /// rest on the measured ratio alone.
    pub fn unchecked(gen: &'a CocycleGenerator, cfg: HolonomyConfig) -> Self {
        Self { gen, cfg, prior_theta: 0.0 }
    }

    pub fn config(&self) -> &HolonomyConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &CocycleGenerator {
        self.gen
    }

    fn leaf_multiplier(&self, side: Side) -> f64 {
        match side {
            Side::Stable => self.gen.base.mu(Side::Stable),
            Side::Unstable => 1.0 / self.gen.base.mu(Side::Unstable),
        }
    }

    /// Advances the pair one step and returns the raw step factors at `x` and `y`.
    fn extend(&self, orbit: &mut PairOrbit, side: Side) -> Result<(FiberMap, FiberMap)> {
        let base = &self.gen.base;
        let y = base.leaf_point(orbit.x, side, orbit.ell);
        let next_x = base.apply_f(orbit.x, if side == Side::Stable { 1 } else { -1 });
        let next_ell = orbit.ell * self.leaf_multiplier(side);
        let next_y = base.leaf_point(next_x, side, next_ell);
        let ax = self.gen.step_factor_between(orbit.x, next_x, side)?;
        let ay = self.gen.step_factor_between(y, next_y, side)?;
        push_factor(&mut orbit.fx, ax.clone());
        push_factor(&mut orbit.fy, ay.clone());
        orbit.x = next_x;
        orbit.ell = next_ell;
        Ok((ax, ay))
    }

    /// Holonomy between `x` and `y`, which must lie on the local `side` leaf of `x`.
    pub fn between(&self, x: TorusPoint, y: TorusPoint, side: Side) -> Result<HolonomyApprox> {
        let (ell, transverse) = self.gen.base.leaf_coordinate(x, y, side);
        if transverse > LEAF_TOL {
            return Err(Error::NotOnLeaf { leaf: if side == Side::Stable { "stable" } else { "unstable" }, residual: transverse });
        }
        self.local(x, side, ell)
    }

    pub fn stable(&self, x: TorusPoint, ell: f64) -> Result<HolonomyApprox> {
        self.local(x, Side::Stable, ell)
    }

    pub fn unstable(&self, x: TorusPoint, ell: f64) -> Result<HolonomyApprox> {
        self.local(x, Side::Unstable, ell)
    }

    /// Holonomy to `leaf_point(x, side, ell)` with `|ell| ≤ r_loc`.
    pub fn local(&self, x: TorusPoint, side: Side, ell: f64) -> Result<HolonomyApprox> {
        self.run(x, side, ell, 0)
    }

    /// As [`Self::local`], then `extra` further truncation steps past the stopping point.
    pub fn local_with_extra_steps(&self, x: TorusPoint, side: Side, ell: f64, extra: usize) -> Result<HolonomyApprox> {
        self.run(x, side, ell, extra)
    }

    fn run(&self, x: TorusPoint, side: Side, ell: f64, extra: usize) -> Result<HolonomyApprox> {
        let r_loc = self.gen.base.r_loc();
        if ell.abs() > r_loc * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "leaf parameter {ell} exceeds r_loc = {r_loc}; use the global-leaf holonomy"
            )));
        }
        let grid = self.gen.grid_size();
        if ell == 0.0 {
            return Ok(HolonomyApprox::identity(x, side, grid));
        }
        let ts: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();
        let mut orbit = PairOrbit::new(x, ell);
        // forward images 𝒜ⁿ_x t and 𝒜ⁿ_y t
        let mut ux = ts.clone();
        let mut uy = ts.clone();
        let mut h = ts.clone();
        let mut hi = ts.clone();
        let mut incs: Vec<f64> = Vec::new();
        let mut stop: Option<(usize, f64, f64)> = None;
        // while both orbits carry the same factors the holonomy is exactly the identity
        let mut identical = true;
        let mut n = 0;
        loop {
            n += 1;
            let (ax, ay) = self.extend(&mut orbit, side)?;
            identical &= ax == ay;
            let mut d_fwd = 0.0f64;
            let mut d_inv = 0.0f64;
            for j in 0..grid {
                ux[j] = ax.apply(ux[j]);
                uy[j] = ay.apply(uy[j]);
                if identical {
                    continue;
                }
                let hn = apply_all_inv(&orbit.fy, ux[j]);
                let hin = apply_all_inv(&orbit.fx, uy[j]);
                d_fwd = d_fwd.max(circle_dist(hn, h[j]));
                d_inv = d_inv.max(circle_dist(hin, hi[j]));
                h[j] = hn;
                hi[j] = hin;
            }
            let delta = d_fwd + d_inv;
            incs.push(delta);
            if let Some((n_stop, _, _)) = stop {
                if n >= n_stop + extra {
                    break;
                }
                continue;
            }
            if incs.iter().all(|&d| d <= INCREMENT_FLOOR) {
                stop = Some((n, 0.0, delta));
            } else if let Some((theta, tail)) = certify(&incs, self.cfg.window, self.prior_theta) {
                if theta < self.cfg.abort_theta && tail <= self.cfg.tol {
                    stop = Some((n, theta, tail));
                } else if theta >= self.cfg.abort_theta && n >= self.cfg.warmup.max(self.cfg.window) {
                    return Err(Error::NoContraction { theta, steps: n });
                }
            }
            if stop.is_some() && extra == 0 {
                break;
            }
            if n >= self.cfg.max_n {
                let theta = certify(&incs, self.cfg.window, self.prior_theta).map_or(f64::NAN, |c| c.0);
                return Err(Error::NoContraction { theta, steps: n });
            }
        }
        let (_, mut theta, mut tail) = stop.expect("loop exits only after stopping");
        if extra > 0 {
            if let Some((t, b)) = certify(&incs, self.cfg.window, self.prior_theta) {
                if t < 1.0 {
                    theta = t;
                    tail = b;
                }
            }
        }
        let value = CircleDiffeo::from_displacement(h.iter().zip(&ts).map(|(v, t)| v - t).collect())?;
        let inverse = CircleDiffeo::from_displacement(hi.iter().zip(&ts).map(|(v, t)| v - t).collect())?;
        Ok(HolonomyApprox {
            value,
            inverse,
            side,
            x,
            leaf_param: ell,
            truncation: n,
            tail_bound: tail,
            measured_theta: theta,
            fitted_theta: fitted_rate(&incs),
            last_increment: *incs.last().unwrap_or(&0.0),
            increments: incs,
        })
    }

    /// Smallest `n` with `λⁿ |ℓ| < r_loc / 2`; an exact tie moves to the next `n`.
    pub fn pullback_steps(&self, ell: f64) -> usize {
        let lambda = self.gen.base.lambda_s();
        let ratio = ell.abs() / (0.5 * self.gen.base.r_loc());
        if ratio < 1.0 {
            return 0;
        }
        (ratio.ln() / (1.0 / lambda).ln()).floor() as usize + 1
    }

    /// Holonomy along a whole leaf: `H_{x,y} = (𝒜ⁿ_y)⁻¹ ∘ H_{fⁿx,fⁿy} ∘ 𝒜ⁿ_x` with `n`
    /// from [`Self::pullback_steps`]; delegates to [`Self::local`] for local pairs.
    pub fn global(&self, x: TorusPoint, side: Side, ell: f64) -> Result<HolonomyApprox> {
        if ell.abs() <= self.gen.base.r_loc() {
            return self.local(x, side, ell);
        }
        self.conjugated_through(x, side, ell, self.pullback_steps(ell), None)
    }

    /// `(𝒜ⁿ_y)⁻¹ ∘ H_{fⁿx,fⁿy} ∘ 𝒜ⁿ_x` with the inner holonomy computed afresh, or supplied.
    pub fn conjugated_through(
        &self,
        x: TorusPoint,
        side: Side,
        ell: f64,
        n: usize,
        inner: Option<HolonomyApprox>,
    ) -> Result<HolonomyApprox> {
        let mut orbit = PairOrbit::new(x, ell);
        for _ in 0..n {
            self.extend(&mut orbit, side)?;
        }
        let inner = match inner {
            Some(h) => h,
            None => self.local(orbit.x, side, orbit.ell)?,
        };
        let grid = self.gen.grid_size();
        let mut h = Vec::with_capacity(grid);
        let mut hi = Vec::with_capacity(grid);
        for j in 0..grid {
            let t = j as f64 / grid as f64;
            h.push(apply_all_inv(&orbit.fy, inner.value.apply(apply_all(&orbit.fx, t))) - t);
            hi.push(apply_all_inv(&orbit.fx, inner.inverse.apply(apply_all(&orbit.fy, t))) - t);
        }
        // Lipschitz constants of (𝒜ⁿ_y)⁻¹ and (𝒜ⁿ_x)⁻¹ scale the inner certificate
        let lip = [&orbit.fx, &orbit.fy]
            .iter()
            .map(|fs| {
                let m = 2 * grid;
                let min_log = (0..m).map(|j| apply_all_log(fs, j as f64 / m as f64).1).fold(f64::INFINITY, f64::min);
                (-min_log).exp()
            })
            .fold(1.0f64, f64::max);
        Ok(HolonomyApprox {
            value: CircleDiffeo::from_displacement(h)?,
            inverse: CircleDiffeo::from_displacement(hi)?,
            side,
            x,
            leaf_param: ell,
            truncation: inner.truncation + n,
            tail_bound: lip * inner.tail_bound,
            measured_theta: inner.measured_theta,
            fitted_theta: inner.fitted_theta,
            last_increment: inner.last_increment,
            increments: inner.increments,
        })
    }
}

/// Sampling plan for [`holonomy_property_residuals`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropertySamples {
    pub triples: usize,
    pub h2_pairs: usize,
    pub h2_max_n: usize,
    /// Base points for the Hölder fit; each uses every scale in `h3_scales`.
    pub h3_points: usize,
    pub h3_scales: Vec<f64>,
    pub side: Side,
}

impl Default for PropertySamples {
    fn default() -> Self {
        let h3_scales = (0..6).map(|i| 10f64.powf(-3.0 + 0.4 * i as f64)).collect();
        Self { triples: 50, h2_pairs: 10, h2_max_n: 5, h3_points: 10, h3_scales, side: Side::Stable }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyPropertyReport {
    /// `max d_{C⁰}(H_{y,z} ∘ H_{x,y}, H_{x,z})`.
    pub h1_composition: f64,
    /// `max d_{C⁰}(H_{x,y}⁻¹, H_{y,x})`.
    pub h1_inverse: f64,
    /// `max d_{C⁰}(H_{x,y}, (𝒜ⁿ_y)⁻¹ ∘ H_{fⁿx,fⁿy} ∘ 𝒜ⁿ_x)` over `1 ≤ n ≤ h2_max_n`.
    pub h2: f64,
    pub h3_slope: f64,
    pub h3_constant: f64,
    /// `(δ, ω(δ))`: modulus of continuity of the sampled maps `H_{x,y}` on the fiber.
    pub h5_modulus: Vec<(f64, f64)>,
    pub max_theta: f64,
    pub max_tail: f64,
}

fn modulus_of_continuity(h: &CircleDiffeo, gaps: &[usize]) -> Vec<f64> {
    let lift = h.lift_on_refined(1);
    let n = lift.len();
    gaps.iter()
        .map(|&g| {
            (0..n)
                .map(|i| {
                    let j = i + g;
                    let a = if j >= n { lift[j - n] + 1.0 } else { lift[j] };
                    (a - lift[i]).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Residuals of the composition, inverse, invariance and Hölder properties over random samples.
pub fn holonomy_property_residuals<R: Rng + ?Sized>(
    solver: &HolonomySolver<'_>,
    spec: &PropertySamples,
    rng: &mut R,
) -> Result<HolonomyPropertyReport> {
    let base = &solver.gen.base;
    let side = spec.side;
    let half = 0.5 * base.r_loc();
    let mut max_theta = 0.0f64;
    let mut max_tail = 0.0f64;
    let mut note = |h: &HolonomyApprox| {
        max_theta = max_theta.max(h.measured_theta);
        max_tail = max_tail.max(h.tail_bound);
    };
    let mut h1_composition = 0.0f64;
    let mut h1_inverse = 0.0f64;
    let grid = solver.gen.grid_size();
    let gaps: Vec<usize> = (0..6).map(|i| 1usize << i).filter(|g| *g < grid).collect();
    let mut h5 = vec![0.0f64; gaps.len()];
    for _ in 0..spec.triples {
        let x = TorusPoint::random(rng);
        let a = rng.gen_range(-half..half);
        let b = rng.gen_range(-half..half);
        let y = base.leaf_point(x, side, a);
        let hxy = solver.local(x, side, a)?;
        let hyz = solver.local(y, side, b - a)?;
        let hxz = solver.local(x, side, b)?;
        let hyx = solver.local(y, side, -a)?;
        for h in [&hxy, &hyz, &hxz, &hyx] {
            note(h);
        }
        let comp = compose(&hyz.value, &hxy.value)?;
        let comp_inv = compose(&hxy.inverse, &hyz.inverse)?;
        h1_composition = h1_composition.max(dist_c0_with_inverses(&comp, &comp_inv, &hxz.value, &hxz.inverse));
        h1_inverse = h1_inverse.max(dist_c0_with_inverses(&hxy.inverse, &hxy.value, &hyx.value, &hyx.inverse));
        for (slot, w) in h5.iter_mut().zip(modulus_of_continuity(&hxy.value, &gaps)) {
            *slot = slot.max(w);
        }
    }
    let mut h2 = 0.0f64;
    for _ in 0..spec.h2_pairs {
        let x = TorusPoint::random(rng);
        let ell = rng.gen_range(-half..half);
        let direct = solver.local(x, side, ell)?;
        note(&direct);
        for n in 1..=spec.h2_max_n {
            let pulled = solver.conjugated_through(x, side, ell, n, None)?;
            h2 = h2.max(direct.dist(&pulled));
        }
    }
    let mut scales = Vec::new();
    let mut dists = Vec::new();
    for _ in 0..spec.h3_points {
        let x = TorusPoint::random(rng);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        for &s in &spec.h3_scales {
            let h = solver.local(x, side, sign * s)?;
            note(&h);
            scales.push(s);
            dists.push(h.dist_to_id());
        }
    }
    let (h3_slope, h3_constant) = match fit_power_law(&scales, &dists) {
        Some(f) => {
            let c = scales.iter().zip(&dists).fold(0.0f64, |m, (s, d)| m.max(d / s.powf(f.slope)));
            (f.slope, c)
        }
        None => (f64::NAN, 0.0),
    };
    let h5_modulus = gaps.iter().map(|&g| g as f64 / grid as f64).zip(h5).collect();
    Ok(HolonomyPropertyReport { h1_composition, h1_inverse, h2, h3_slope, h3_constant, h5_modulus, max_theta, max_tail })
}
