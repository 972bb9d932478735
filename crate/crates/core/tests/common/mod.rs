#![allow(dead_code)]

use holonomy_core::cocycle::{CocycleGenerator, Family, PhiFamily, TrigPoly2, WaveMode};
use holonomy_core::torus::{AnosovBase, Side, TorusPoint};

pub const CAT: [[f64; 2]; 2] = [[2.0, 1.0], [1.0, 1.0]];
pub const CAT_INV: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 2.0]];

/// Eigen-data of the cat map in closed form: `(λ, e)` for each side.
pub fn cat_eigen(side: Side) -> (f64, [f64; 2]) {
    let s5 = 5f64.sqrt();
    let lam = match side {
        Side::Stable => (3.0 - s5) / 2.0,
        Side::Unstable => (3.0 + s5) / 2.0,
    };
    // 2a + b = λ a
    let (a, b) = (1.0, lam - 2.0);
    let n = (a * a + b * b).sqrt();
    (lam, [a / n, b / n])
}

fn step(m: &[[f64; 2]; 2], p: [f64; 2]) -> [f64; 2] {
    [
        (m[0][0] * p[0] + m[0][1] * p[1]).rem_euclid(1.0),
        (m[1][0] * p[0] + m[1][1] * p[1]).rem_euclid(1.0),
    ]
}

/// Rotation number `c` of the holonomy `R_c` of a rotation-field cocycle over the cat map,
/// summed directly along the orbits until the terms drop below `1e-18`.
pub fn scalar_holonomy(alpha: &TrigPoly2, x: TorusPoint, side: Side, ell: f64) -> f64 {
    let (lam, e) = cat_eigen(side);
    let at = |p: [f64; 2]| alpha.eval(TorusPoint(p));
    let mut c = 0.0;
    match side {
        Side::Stable => {
            // Σ_{n≥0} α(fⁿx) − α(fⁿy)
            let mut p = x.0;
            let mut d = ell;
            for _ in 0..200 {
                let term = at(p) - at([p[0] + d * e[0], p[1] + d * e[1]]);
                c += term;
                if d.abs() < 1e-18 {
                    break;
                }
                p = step(&CAT, p);
                d *= lam;
            }
        }
        Side::Unstable => {
            // Σ_{i≥1} α(f⁻ⁱy) − α(f⁻ⁱx)
            let mut p = x.0;
            let mut d = ell;
            for _ in 0..200 {
                p = step(&CAT_INV, p);
                d /= lam;
                c += at([p[0] + d * e[0], p[1] + d * e[1]]) - at(p);
                if d.abs() < 1e-18 {
                    break;
                }
            }
        }
    }
    c
}

/// Rotation number of the cycle weight of a bracket cycle `s ℓ, u ℓ, s −ℓ, u −ℓ` at `x`.
pub fn scalar_bracket_cycle(alpha: &TrigPoly2, x: TorusPoint, ell: f64) -> f64 {
    let (_, es) = cat_eigen(Side::Stable);
    let (_, eu) = cat_eigen(Side::Unstable);
    let mut p = x;
    let mut c = 0.0;
    for (side, l, e) in [(Side::Stable, ell, es), (Side::Unstable, ell, eu), (Side::Stable, -ell, es), (Side::Unstable, -ell, eu)] {
        c += scalar_holonomy(alpha, p, side, l);
        p = TorusPoint::new(p.x1() + l * e[0], p.x2() + l * e[1]);
    }
    c
}

/// Distance of `c` to the nearest integer.
pub fn frac_dist(c: f64) -> f64 {
    (c - c.round()).abs()
}

pub fn alpha_field() -> TrigPoly2 {
    TrigPoly2::constant(0.1).with_cos([1, 0], 0.05)
}

pub fn rotation_field(alpha: TrigPoly2) -> CocycleGenerator {
    CocycleGenerator::new(AnosovBase::cat_map(), Family::RotationField { alpha }, 2.0).unwrap()
}

pub fn perturbed(eps: f64) -> CocycleGenerator {
    let fam = Family::PerturbedRotation {
        alpha: TrigPoly2::constant(0.1).with_cos([1, 0], 0.05),
        eps: TrigPoly2::constant(eps),
        phase: TrigPoly2::default().with_sin([0, 1], 0.3).with_cos([1, 1], 0.1),
    };
    CocycleGenerator::new(AnosovBase::cat_map(), fam, 2.0).unwrap()
}

pub fn constant() -> CocycleGenerator {
    CocycleGenerator::new(AnosovBase::cat_map(), Family::Constant { alpha: 0.2, eps: 0.3, phase: 0.1 }, 2.0).unwrap()
}

pub fn wave_phi() -> PhiFamily {
    PhiFamily::Wave {
        shift: TrigPoly2::default().with_cos([1, 0], 0.05),
        modes: vec![WaveMode { m: 1, amp: TrigPoly2::constant(0.3), phase: TrigPoly2::default().with_sin([0, 1], 0.1) }],
    }
}
