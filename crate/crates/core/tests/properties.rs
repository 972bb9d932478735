//! Property tests for the structural invariants.

mod common;

use std::f64::consts::TAU;

use holonomy_core::circle::{
    circle_dist, compose, dist_c0, dist_cr, invert, sup_dist, CircleDiffeo, CircleMap, DiffMetricConfig,
};
use holonomy_core::cocycle::{apply_all, apply_all_log, TrigPoly2};
use holonomy_core::estimates::{random_diffeo, RandomDiffeoSpec};
use holonomy_core::holonomy::{HolonomyConfig, HolonomySolver};
use holonomy_core::metric::{pushforward_metric, Density};
use holonomy_core::torus::{AnosovBase, Side, TorusPoint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 64;

fn diffeo(seed: u64) -> CircleDiffeo {
    random_diffeo(&mut ChaCha8Rng::seed_from_u64(seed), N, &RandomDiffeoSpec::default()).unwrap()
}

/// A diffeo close to `g`: its displacement plus `eps` times a smooth bump.
fn nearby(g: &CircleDiffeo, eps: f64, phase: f64) -> CircleDiffeo {
    let disp = g
        .displacement()
        .iter()
        .enumerate()
        .map(|(j, v)| v + eps * (TAU * (j as f64 / N as f64 - phase)).sin())
        .collect();
    CircleDiffeo::from_displacement(disp).unwrap()
}

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| TorusPoint::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inverse_round_trip(seed in any::<u64>()) {
        let g = diffeo(seed);
        let id = CircleDiffeo::identity(N);
        let gi = invert(&g, 1e-10).unwrap();
        prop_assert!(dist_c0(&compose(&g, &gi).unwrap(), &id, 1e-10).unwrap().1 <= 1e-9);
        for j in 0..N {
            let t = j as f64 / N as f64;
            prop_assert!((g.apply(g.apply_inv(t)) - t).abs() <= 1e-10);
        }
    }

    #[test]
    fn composition_is_associative(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (f, g, h) = (diffeo(a), diffeo(b), diffeo(c));
        let left = compose(&compose(&f, &g).unwrap(), &h).unwrap();
        let right = compose(&f, &compose(&g, &h).unwrap()).unwrap();
        prop_assert!(sup_dist(&left, &right) <= 1e-8);
        prop_assert!(left.min_derivative() > 0.0);
    }

    #[test]
    fn dc0_is_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let (g, h) = (diffeo(a), diffeo(b));
        let d1 = dist_c0(&g, &h, 1e-10).unwrap();
        let d2 = dist_c0(&h, &g, 1e-10).unwrap();
        prop_assert!((d1.0 - d2.0).abs() <= 1e-15 && (d1.1 - d2.1).abs() <= 1e-12);
    }

    #[test]
    fn proxy_triangle_inequality(seed in any::<u64>(), e1 in 1e-5..1e-3f64, e2 in 1e-5..1e-3f64, p in 0.0..1.0f64) {
        let cfg = DiffMetricConfig { grid_size: N, ..Default::default() };
        let g = diffeo(seed);
        let h = nearby(&g, e1, p);
        let k = nearby(&h, e2, p + 0.3);
        let gh = dist_cr(&g, &h, 1.0, &cfg).unwrap();
        let hk = dist_cr(&h, &k, 1.0, &cfg).unwrap();
        let gk = dist_cr(&g, &k, 1.0, &cfg).unwrap();
        prop_assume!(gh.in_regime && hk.in_regime && gk.in_regime);
        prop_assert!(gk.value <= gh.value + hk.value + 1e-12);
    }

    #[test]
    fn anosov_map_round_trip(x in point(), n in 1i64..12) {
        let f = AnosovBase::cat_map();
        let y = f.apply_f(f.apply_f(x, n), -n);
        // rounding of size ε·λⁿ on the way out, expanded by λⁿ on the way back
        prop_assert!(x.dist(&y) <= 4.0 * f64::EPSILON * f.lambda_u().powi(2 * n as i32));
    }

    #[test]
    fn leaves_are_invariant_and_contracted(x in point(), ell in -0.2..0.2f64) {
        let f = AnosovBase::cat_map();
        for side in [Side::Stable, Side::Unstable] {
            let y = f.leaf_point(x, side, ell);
            let (coord, transverse) = f.leaf_coordinate(x, y, side);
            prop_assert!((coord - ell).abs() <= 1e-14 && transverse <= 1e-14);
            let (fx, fy) = (f.apply_f(x, 1), f.apply_f(y, 1));
            let (c1, t1) = f.leaf_coordinate(fx, fy, side);
            prop_assert!((c1 - f.mu(side) * ell).abs() <= 1e-13 && t1 <= 1e-13);
        }
    }

    #[test]
    fn bracket_lands_on_both_leaves(x in point(), a in -0.15..0.15f64, b in -0.15..0.15f64) {
        let f = AnosovBase::cat_map();
        let z = f.leaf_point(f.leaf_point(x, Side::Stable, a), Side::Unstable, b);
        let (y, a2, b2) = f.bracket(x, z).unwrap();
        prop_assert!((a - a2).abs() <= 1e-13 && (b - b2).abs() <= 1e-13);
        prop_assert!(f.leaf_coordinate(x, y, Side::Stable).1 <= 1e-13);
        prop_assert!(f.leaf_coordinate(y, z, Side::Unstable).1 <= 1e-13);
    }

    #[test]
    fn cocycle_equation(x in point(), n in 0i64..6, m in 0i64..6, t in 0.0..1.0f64) {
        let g = common::perturbed(0.2);
        let whole = g.product_factors(x, n + m).unwrap();
        let first = g.product_factors(x, n).unwrap();
        let second = g.product_factors(g.base.apply_f(x, n), m).unwrap();
        let via = apply_all(&second, apply_all(&first, t));
        prop_assert!((apply_all(&whole, t) - via).abs() <= 1e-12);
        // chain rule for the log-derivative
        let (_, l_whole) = apply_all_log(&whole, t);
        let (s, l1) = apply_all_log(&first, t);
        let (_, l2) = apply_all_log(&second, s);
        prop_assert!((l_whole - l1 - l2).abs() <= 1e-12);
    }

    #[test]
    fn negative_powers_invert(x in point(), n in 1i64..6, t in 0.0..1.0f64) {
        let g = common::perturbed(0.2);
        let fwd = g.product_factors(x, n).unwrap();
        let back = g.product_factors(g.base.apply_f(x, n), -n).unwrap();
        prop_assert!((apply_all(&back, apply_all(&fwd, t)) - t).abs() <= 1e-12);
    }

    #[test]
    fn pushforward_contravariance(a in any::<u64>(), b in any::<u64>(), amp in 0.0..0.5f64) {
        // compositions are resampled, so this needs the default fiber grid
        let n = 256;
        let spec = RandomDiffeoSpec { max_mode: 3, strength: 0.3 };
        let g = random_diffeo(&mut ChaCha8Rng::seed_from_u64(a), n, &spec).unwrap();
        let h = random_diffeo(&mut ChaCha8Rng::seed_from_u64(b), n, &spec).unwrap();
        let rho = Density::from_log((0..n).map(|j| amp * (TAU * j as f64 / n as f64).cos()).collect());
        let two_steps = pushforward_metric(&pushforward_metric(&rho, &h).unwrap(), &g).unwrap();
        let one_step = pushforward_metric(&rho, &compose(&g, &h).unwrap()).unwrap();
        prop_assert!(two_steps.dist(&one_step) <= 1e-8);
        prop_assert!(two_steps.log_samples().iter().all(|l| l.is_finite()));
    }

    #[test]
    fn rotations_preserve_lebesgue(a in -1.0..1.0f64) {
        let leb = Density::lebesgue(N);
        prop_assert!(pushforward_metric(&leb, &CircleDiffeo::rotation(N, a)).unwrap().dist(&leb) <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn holonomy_inverse_pairs(x in point(), ell in -0.1..0.1f64) {
        let gen = common::perturbed(0.1);
        let solver = HolonomySolver::unchecked(&gen, HolonomyConfig::default());
        let base = &gen.base;
        for side in [Side::Stable, Side::Unstable] {
            let h = solver.local(x, side, ell).unwrap();
            let back = solver.local(base.leaf_point(x, side, ell), side, -ell).unwrap();
            let tol = h.tail_bound + back.tail_bound + 1e-10;
            for j in 0..N {
                let t = j as f64 / N as f64;
                prop_assert!(circle_dist(back.value.apply(h.value.apply(t)), t) <= 2.0 * tol);
            }
        }
    }

    #[test]
    fn rotation_valued_cocycles_have_rotation_holonomies(x in point(), ell in -0.1..0.1f64) {
        let gen = common::rotation_field(TrigPoly2::constant(0.1).with_cos([1, 0], 0.04));
        let solver = HolonomySolver::unchecked(&gen, HolonomyConfig::default());
        let h = solver.local(x, Side::Stable, ell).unwrap();
        let shift = h.value.displacement()[0];
        prop_assert!(h.value.displacement().iter().all(|d| (d - shift).abs() <= 1e-12));
    }
}
