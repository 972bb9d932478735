mod common;

use common::*;
use holonomy_core::cocycle::{synthesize_cohomologous, CocycleGenerator, Family, FiberMap};
use holonomy_core::conjugacy::*;
use holonomy_core::holonomy::{HolonomyConfig, HolonomySolver};
use holonomy_core::torus::{AnosovBase, SuPath, TorusPoint};
use holonomy_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 256;

fn small() -> FieldOptions {
    FieldOptions { resolution: 8, ..Default::default() }
}

fn identity_gen() -> CocycleGenerator {
    CocycleGenerator::new(AnosovBase::cat_map(), Family::identity(), 2.0).unwrap()
}

#[test]
fn rotation_cycle_weight_matches_scalar_sum() {
    let alpha = alpha_field().with_sin([0, 1], 0.03);
    let g = rotation_field(alpha.clone());
    let s = HolonomySolver::unchecked(&g, HolonomyConfig::default());
    for ell in [0.05, 0.1] {
        let cycle = SuPath::bracket_cycle(&g.base, TorusPoint::ORIGIN, ell);
        let cw = cycle_weight(&s, &cycle).unwrap();
        let c = scalar_bracket_cycle(&alpha, TorusPoint::ORIGIN, ell);
        let w = cw.weight.value.interpolant().mean();
        assert!(2.0 * frac_dist(w - c) <= cw.weight.accumulated_error, "{ell}: {w} vs {c}");
        assert!((cw.obstruction - 2.0 * frac_dist(c)).abs() <= cw.weight.accumulated_error);
        assert!(cw.obstruction > 100.0 * cw.weight.accumulated_error);
    }
}

#[test]
fn reversed_cycle_gives_inverse_weight() {
    let g = perturbed(0.1);
    let s = HolonomySolver::unchecked(&g, HolonomyConfig::default());
    let cycle = SuPath::bracket_cycle(&g.base, TorusPoint::new(0.3, 0.6), 0.08);
    let fwd = cycle_weight(&s, &cycle).unwrap().weight;
    let back = cycle_weight(&s, &cycle.reversed(&g.base)).unwrap().weight;
    let inv = fwd.as_field_value().inverted();
    assert!(inv.dist(&back.as_field_value()) <= 2.0 * (fwd.accumulated_error + back.accumulated_error));
}

#[test]
fn constant_cycles_are_trivial() {
    let g = constant();
    let s = HolonomySolver::unchecked(&g, HolonomyConfig::default());
    let cw = cycle_weight(&s, &SuPath::bracket_cycle(&g.base, TorusPoint::new(0.7, 0.2), 0.1)).unwrap();
    assert!(cw.obstruction <= cw.weight.accumulated_error.max(1e-13));
    let tails = cw.weight.leg_tails.len();
    assert_eq!(tails, 4);
}

#[test]
fn path_weight_error_stays_within_leg_budget() {
    let g = perturbed(0.1);
    let cfg = HolonomyConfig::default();
    let s = HolonomySolver::unchecked(&g, cfg);
    let path = g.base.build_su_path(TorusPoint::new(0.1, 0.1), TorusPoint::new(0.6, 0.3), 0.2).unwrap();
    let w = path_weight(&s, &path).unwrap();
    assert!(w.accumulated_error <= 3.0 * cfg.tol * path.len() as f64, "{:e} over {} legs", w.accumulated_error, path.len());
}

#[test]
fn transport_recovers_synthesized_conjugacy() {
    let b = perturbed(0.1);
    let phi = wave_phi();
    let a = synthesize_cohomologous(&b, phi.clone()).unwrap();
    let (sa, sb) = (HolonomySolver::unchecked(&a, HolonomyConfig::default()), HolonomySolver::unchecked(&b, HolonomyConfig::default()));
    let x = TorusPoint::new(0.15, 0.4);
    let phi_x = FieldValue::from_map(&phi.at(x), N).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..3 {
        let y = TorusPoint::random(&mut rng);
        let path = a.base.build_su_path(x, y, a.base.r_loc()).unwrap();
        let phi_y = transport_value(&sa, Partner::Cocycle(&sb), &phi_x, &path).unwrap();
        assert!(phi_y.dist_to_map(&phi.at(y)) <= 1e-4);
        let pi = check_path_independence(&sa, Partner::Cocycle(&sb), &phi_x, x, y, a.base.r_loc()).unwrap();
        assert!(pi.residual <= 1e-4 && !pi.violated(), "{pi:?}");
    }
    // an empty path leaves the value untouched
    let same = transport_value(&sa, Partner::Cocycle(&sb), &phi_x, &SuPath::new(x)).unwrap();
    assert_eq!(same, phi_x);
}

#[test]
fn independent_rotation_fields_are_detected() {
    let alpha_a = alpha_field();
    let alpha_b = alpha_field().with_sin([1, 1], 0.04);
    let (ga, gb) = (rotation_field(alpha_a), rotation_field(alpha_b));
    let (sa, sb) = (HolonomySolver::unchecked(&ga, HolonomyConfig::default()), HolonomySolver::unchecked(&gb, HolonomyConfig::default()));
    let id = FieldValue::identity(N);
    let worst = [TorusPoint::new(0.3, 0.7), TorusPoint::new(0.55, 0.2), TorusPoint::new(0.8, 0.9)]
        .iter()
        .map(|&y| check_path_independence(&sa, Partner::Cocycle(&sb), &id, TorusPoint::ORIGIN, y, 0.2).unwrap())
        .fold(0.0f64, |m, p| m.max(p.residual / p.bound));
    assert!(worst >= OBSTRUCTION_FACTOR, "ratio {worst}");
    let r = build_conjugacy(&sa, Partner::Cocycle(&sb), TorusPoint::ORIGIN, id, small());
    assert!(matches!(r, Err(Error::PathIndependenceViolated { .. })));
}

#[test]
fn field_residuals_for_synthesized_pair() {
    let b = perturbed(0.1);
    let phi = wave_phi();
    let a = synthesize_cohomologous(&b, phi.clone()).unwrap();
    let (sa, sb) = (HolonomySolver::unchecked(&a, HolonomyConfig::default()), HolonomySolver::unchecked(&b, HolonomyConfig::default()));
    let x0 = TorusPoint::ORIGIN;
    let anchor = FieldValue::from_map(&phi.at(x0), N).unwrap();
    let (mut field, checks) = build_conjugacy(&sa, Partner::Cocycle(&sb), x0, anchor.clone(), small()).unwrap();
    assert_eq!(checks.len(), 10);
    assert_eq!(field.anchor().1, &anchor);
    let truth = (0..field.len()).map(|i| field.value(i).dist_to_map(&phi.at(field.point(i)))).fold(0.0f64, f64::max);
    assert!(truth <= 1e-3, "ground truth {truth:e}");

    let res = conjugacy_residual(&sa, Partner::Cocycle(&sb), &field).unwrap();
    assert!(res.max <= 1e-3);
    assert!(res.max <= OBSTRUCTION_FACTOR * field.max_error(), "{:e} vs {:e}", res.max, field.max_error());

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = IntertwiningSamples { pairs: 10, truncate_a: false };
    let it = intertwining_residual(&sa, Partner::Cocycle(&sb), &field, spec, &mut rng).unwrap();
    assert!(it.max <= 1e-3, "{it:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cut = intertwining_residual(&sa, Partner::Cocycle(&sb), &field, IntertwiningSamples { truncate_a: true, ..spec }, &mut rng).unwrap();
    assert!(cut.max >= 10.0 * cut.max_error, "{cut:?}");
    assert!((cut.max - cut.max_holonomy_size).abs() <= 0.5 * cut.max_holonomy_size);

    // a bump of size about 0.1 at one point shows up in the residual there
    let idx = field.index(3, 5);
    let bump = FieldValue::from_map(&FiberMap::Wave { shift: 0.0, modes: vec![(1.0, 0.6, 0.2)] }, N).unwrap();
    let bumped = field.value(idx).compose(&bump).unwrap();
    field.set_value(idx, bumped);
    let res = conjugacy_residual(&sa, Partner::Cocycle(&sb), &field).unwrap();
    assert!(res.per_point[idx] >= 0.05, "{}", res.per_point[idx]);
}

#[test]
fn builds_with_different_leg_limits_agree() {
    let b = perturbed(0.1);
    let phi = wave_phi();
    let a = synthesize_cohomologous(&b, phi.clone()).unwrap();
    let (sa, sb) = (HolonomySolver::unchecked(&a, HolonomyConfig::default()), HolonomySolver::unchecked(&b, HolonomyConfig::default()));
    let anchor = FieldValue::from_map(&phi.at(TorusPoint::ORIGIN), N).unwrap();
    let opts = FieldOptions { resolution: 4, max_leg: None, spot_checks: 2 };
    let (f1, _) = build_conjugacy(&sa, Partner::Cocycle(&sb), TorusPoint::ORIGIN, anchor.clone(), opts).unwrap();
    let (f2, _) = build_conjugacy(&sa, Partner::Cocycle(&sb), TorusPoint::ORIGIN, anchor, FieldOptions { max_leg: Some(0.05), ..opts }).unwrap();
    for i in 0..f1.len() {
        assert!(f1.value(i).dist(f2.value(i)) <= f1.value(i).error + f2.value(i).error);
    }
    // the transport relation holds along a fresh path between two lattice points
    let (x, y) = (f1.point(1), f1.point(6));
    let path = a.base.build_su_path(x, y, 0.1).unwrap();
    let wa = path_weight(&sa, &path).unwrap().as_field_value();
    let wb = path_weight(&sb, &path).unwrap().as_field_value();
    let rhs = f1.value(6).compose(&wb.compose(&f1.value(1).inverted()).unwrap()).unwrap();
    assert!(wa.dist(&rhs) <= wa.error + rhs.error + f1.value(1).error + f1.value(6).error);
}

#[test]
fn coboundary_reduces_to_identity() {
    let phi = wave_phi();
    let a = synthesize_cohomologous(&identity_gen(), phi.clone()).unwrap();
    let sa = HolonomySolver::unchecked(&a, HolonomyConfig::default());
    let x0 = TorusPoint::new(0.125, 0.375);
    let anchor = FieldValue::from_map(&phi.at(x0), N).unwrap();
    let Reduction::Reduced { b_const, field, cycles } = constant_reduction(&sa, x0, anchor, small()).unwrap() else {
        panic!("coboundary reported as obstructed");
    };
    assert_eq!(cycles.len(), 6);
    assert!(b_const.dist_to_id() <= 1e-3, "{:e}", b_const.dist_to_id());
    let pp = intertwining_residual(&sa, Partner::Constant(&b_const.value), &field, IntertwiningSamples { pairs: 10, truncate_a: false }, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!(pp.max <= 1e-3, "{pp:?}");
    let res = conjugacy_residual(&sa, Partner::Constant(&b_const.value), &field).unwrap();
    assert!(res.max <= 1e-3);
}

#[test]
fn rotation_field_reduction_is_obstructed() {
    let alpha = alpha_field();
    let g = rotation_field(alpha.clone());
    let s = HolonomySolver::unchecked(&g, HolonomyConfig::default());
    let x0 = TorusPoint::new(0.25, 0.5);
    match constant_reduction(&s, x0, FieldValue::identity(N), small()).unwrap() {
        Reduction::Obstructed { worst, .. } => {
            let c = scalar_bracket_cycle(&alpha, worst.center, worst.scale);
            let oracle = 2.0 * frac_dist(c);
            assert!((worst.obstruction - oracle).abs() <= 0.1 * oracle, "{} vs {oracle}", worst.obstruction);
        }
        Reduction::Reduced { .. } => panic!("rotation field is not cohomologous to a constant"),
    }
}

#[test]
fn cycle_scan_records_each_scale_and_sign() {
    let g = perturbed(0.1);
    let s = HolonomySolver::unchecked(&g, HolonomyConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let centers: Vec<TorusPoint> = (0..2).map(|_| TorusPoint::random(&mut rng)).collect();
    let recs = cycle_scan(&s, &centers, &CYCLE_SCALES).unwrap();
    assert_eq!(recs.len(), 12);
    assert!(recs.iter().all(|r| r.error_bound > 0.0 && r.obstruction >= 0.0));
}
