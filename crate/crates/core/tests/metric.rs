mod common;

use std::f64::consts::TAU;

use common::{alpha_field, rotation_field, wave_phi};
use holonomy_core::circle::CircleDiffeo;
use holonomy_core::cocycle::{synthesize_bounded, CocycleGenerator, TrigPoly2};
use holonomy_core::holonomy::{HolonomyConfig, HolonomySolver};
use holonomy_core::metric::{
    build_invariant_metric, metric_residuals, pushforward_metric, Density, MetricFamily, MetricOptions, MetricSamples,
};
use holonomy_core::torus::TorusPoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Closed form of `wave_phi()` at `x`: shift, amplitude and phase of the single mode.
fn phi_params(x: TorusPoint) -> (f64, f64, f64) {
    (0.05 * (TAU * x.x1()).cos(), 0.3, 0.1 * (TAU * x.x2()).sin())
}

/// `2 log DΦ_x⁻¹(t)`, inverting `Φ_x` by bisection.
fn oracle_log_density(x: TorusPoint, t: f64) -> f64 {
    let (shift, amp, phase) = phi_params(x);
    let phi = |s: f64| s + shift + amp / TAU * (TAU * (s - phase)).sin();
    let (mut lo, mut hi) = (t - shift - 0.1, t - shift + 0.1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    -2.0 * (1.0 + amp * (TAU * (s - phase)).cos()).ln()
}

fn bounded() -> CocycleGenerator {
    let theta = TrigPoly2::constant(0.31).with_cos([0, 1], 0.07);
    synthesize_bounded(&rotation_field(alpha_field()), theta, wave_phi()).unwrap()
}

/// Largest deviation from the oracle after fitting one additive constant, over the spread.
fn oracle_relative_error(fam: &MetricFamily) -> f64 {
    let mut diffs = Vec::new();
    for idx in 0..fam.len() {
        let x = fam.point(idx);
        for (j, l) in fam.log_rho(idx).iter().enumerate() {
            diffs.push(l - oracle_log_density(x, fam.fiber_point(j)));
        }
    }
    let c = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().fold(0.0f64, |m, d| m.max((d - c).abs())) / fam.spread()
}

#[test]
fn pushforward_matches_finite_differences() {
    let n = 64;
    let c = 0.1;
    let disp = (0..n).map(|j| c / TAU * (TAU * j as f64 / n as f64).sin()).collect();
    let g = CircleDiffeo::from_displacement(disp).unwrap();
    let pushed = pushforward_metric(&Density::lebesgue(n), &g).unwrap();
    let lift = |t: f64| t + c / TAU * (TAU * t).sin();
    for &t in &[0.0, 0.13, 0.5, 0.81] {
        let h = 1e-5;
        let dg = (lift(t + h) - lift(t - h)) / (2.0 * h);
        assert!((pushed.at(lift(t)) - dg.powi(-2)).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn pushforward_composes() {
    let n = 64;
    let g = CircleDiffeo::from_displacement((0..n).map(|j| 0.02 * (TAU * j as f64 / n as f64).cos()).collect()).unwrap();
    let h = CircleDiffeo::from_displacement((0..n).map(|j| 0.015 * (2.0 * TAU * j as f64 / n as f64).sin()).collect())
        .unwrap();
    let gh = holonomy_core::circle::compose(&g, &h).unwrap();
    let rho = Density::from_log((0..n).map(|j| 0.3 * (TAU * j as f64 / n as f64).sin()).collect());
    let step = pushforward_metric(&pushforward_metric(&rho, &h).unwrap(), &g).unwrap();
    assert!(step.dist(&pushforward_metric(&rho, &gh).unwrap()) < 1e-8);
}

#[test]
fn bounded_cocycle_metric_matches_oracle() {
    let gen = bounded();
    let opts = MetricOptions { resolution: 8, fiber_n: 32, n_avg: 2000, ..Default::default() };
    let fam = build_invariant_metric(&gen, opts).unwrap();
    assert!(fam.log_rho(opts.anchor).iter().sum::<f64>().abs() / 32.0 < 1e-12);
    let rel = oracle_relative_error(&fam);
    assert!(rel < 0.05, "relative error {rel}");

    let solver = HolonomySolver::unchecked(&gen, HolonomyConfig::default());
    let spec = MetricSamples { leaf_points: 2, holonomy_pairs: 4, ..Default::default() };
    let rep = metric_residuals(&fam, &solver, &spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(rep.telescoping_gap < 1e-10, "{rep:?}");
    assert!((rep.isometry - rep.telescoping_bound).abs() < 1e-10, "{rep:?}");
    assert!(rep.holonomy_relative < 0.05, "{rep:?}");
    assert!(rep.fiber_slope > 0.9, "{rep:?}");
    assert!(rep.leaf_slope > 0.8, "{rep:?}");
}

#[test]
fn doubling_n_halves_the_defect() {
    let gen = bounded();
    let opts = MetricOptions { resolution: 4, fiber_n: 32, n_avg: 1000, ..Default::default() };
    let a = build_invariant_metric(&gen, opts).unwrap().telescoping_bound();
    let b = build_invariant_metric(&gen, MetricOptions { n_avg: 2000, ..opts }).unwrap().telescoping_bound();
    assert!((0.4..=0.6).contains(&(b / a)), "{a} {b}");
}
