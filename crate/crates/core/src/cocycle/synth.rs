use super::diagnostics::{trajectory_extremes, BoundedCheck};
use super::{CocycleGenerator, Family, PhiFamily, TrigPoly2};
use crate::error::Result;
use crate::torus::TorusPoint;

/// `A_x = Φ_{fx} ∘ B_x ∘ Φ_x⁻¹`, so that `Φ` is a known conjugacy from `B` to `A`.
pub fn synthesize_cohomologous(b: &CocycleGenerator, phi: PhiFamily) -> Result<CocycleGenerator> {
    phi.validate()?;
    let family = Family::Conjugated { inner: Box::new(b.family.clone()), phi };
    CocycleGenerator::with_fiber(b.base.clone(), family, b.q, b.fiber)
}

/// `A_x = Φ_{fx} ∘ R_{θ(x)} ∘ Φ_x⁻¹`, conjugate to an isometric cocycle.
pub fn synthesize_bounded(template: &CocycleGenerator, theta: TrigPoly2, phi: PhiFamily) -> Result<CocycleGenerator> {
    let rot = CocycleGenerator { family: Family::RotationField { alpha: theta }, ..template.clone() };
    synthesize_cohomologous(&rot, phi)
}

impl PhiFamily {
    /// Bounds `(inf DΦ, sup DΦ)` over all base points, from the coefficient sizes.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        match self {
            PhiFamily::Identity => (1.0, 1.0),
            PhiFamily::Wave { modes, .. } => {
                let total: f64 = modes.iter().map(|m| m.amp.sup_bound()).sum();
                (1.0 - total, 1.0 + total)
            }
        }
    }
}

/// Compares `sup_{n ≤ n_max} ‖D𝒜ⁿ_x‖` with the chain-rule bound `sup‖DΦ‖ · sup‖DΦ⁻¹‖`.
pub fn check_bounded(gen: &CocycleGenerator, phi: &PhiFamily, points: &[TorusPoint], n_max: usize) -> Result<BoundedCheck> {
    let (sup_deriv, sup_inv_deriv) = trajectory_extremes(gen, points, n_max)?;
    let (lo, hi) = phi.derivative_bounds();
    let bound = hi / lo;
    let ok = sup_deriv <= bound * (1.0 + 1e-9) && sup_inv_deriv <= bound * (1.0 + 1e-9);
    Ok(BoundedCheck { n_max, sup_deriv, sup_inv_deriv, bound, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::{compose, dist_c0, invert};
    use crate::cocycle::{derivative_growth, WaveMode};
    use crate::torus::AnosovBase;

    fn phi() -> PhiFamily {
        PhiFamily::Wave {
            shift: TrigPoly2::default().with_cos([1, 0], 0.05),
            modes: vec![WaveMode {
                m: 1,
                amp: TrigPoly2::constant(0.3),
                phase: TrigPoly2::default().with_sin([0, 1], 0.1),
            }],
        }
    }

    fn b() -> CocycleGenerator {
        let fam = Family::PerturbedRotation {
            alpha: TrigPoly2::constant(0.2).with_cos([1, 1], 0.03),
            eps: TrigPoly2::constant(0.1),
            phase: TrigPoly2::default(),
        };
        CocycleGenerator::new(AnosovBase::cat_map(), fam, 2.0).unwrap()
    }

    fn points(k: usize) -> Vec<TorusPoint> {
        (0..k).map(|i| TorusPoint::new(0.137 * i as f64 + 0.01, 0.291 * i as f64 + 0.02)).collect()
    }

    #[test]
    fn identity_phi_reproduces_b() {
        let a = synthesize_cohomologous(&b(), PhiFamily::Identity).unwrap();
        for x in points(5) {
            assert!(dist_c0(&a.value(x).unwrap(), &b().value(x).unwrap(), 1e-12).unwrap().1 < 1e-14);
        }
    }

    #[test]
    fn conjugacy_equation_holds_at_samples() {
        let bg = b();
        let a = synthesize_cohomologous(&bg, phi()).unwrap();
        let n = a.grid_size();
        for x in points(100) {
            let px = phi().diffeo(x, n).unwrap();
            let pfx = phi().diffeo(a.base.apply_f(x, 1), n).unwrap();
            let rhs = compose(&compose(&pfx, &bg.value(x).unwrap()).unwrap(), &invert(&px, 1e-13).unwrap()).unwrap();
            let res = dist_c0(&a.value(x).unwrap(), &rhs, 1e-12).unwrap().1;
            assert!(res <= 1e-9, "{res}");
        }
    }

    #[test]
    fn coboundary_of_identity() {
        let id = CocycleGenerator { family: Family::identity(), ..b() };
        let a = synthesize_cohomologous(&id, phi()).unwrap();
        let x = TorusPoint::new(0.3, 0.6);
        let fx = a.base.apply_f(x, 1);
        let m = a.factor(x).unwrap();
        let (pfx, px) = (phi().at(fx), phi().at(x));
        use crate::circle::CircleMap;
        for &t in &[0.0, 0.2, 0.77] {
            assert!((m.apply(t) - pfx.apply(px.apply_inv(t))).abs() < 1e-14);
        }
    }

    #[test]
    fn bounded_synthesis_respects_chain_rule_bound() {
        let theta = TrigPoly2::constant(0.31).with_cos([0, 1], 0.07);
        let g = synthesize_bounded(&b(), theta.clone(), phi()).unwrap();
        let check = check_bounded(&g, &phi(), &points(4), 200).unwrap();
        assert!(check.ok, "{check:?}");
        let plain = synthesize_bounded(&b(), theta, PhiFamily::Identity).unwrap();
        let c = check_bounded(&plain, &PhiFamily::Identity, &points(2), 50).unwrap();
        assert!((c.sup_deriv - 1.0).abs() < 1e-14 && c.ok);
    }

    #[test]
    fn unconjugated_perturbation_grows() {
        let fam = Family::PerturbedRotation {
            alpha: TrigPoly2::constant(0.2).with_cos([1, 0], 0.1),
            eps: TrigPoly2::constant(0.5),
            phase: TrigPoly2::default().with_sin([0, 1], 0.4).with_cos([1, 1], 0.2),
        };
        let g = CocycleGenerator::new(AnosovBase::cat_map(), fam, 2.0).unwrap();
        let prof = derivative_growth(&g, &points(4), 50).unwrap();
        let late = prof.max_over(40..=50);
        assert!(late > 1.4 * prof.max_over(1..=10), "{:?}", prof.max_abs_log_deriv);
        // a rotation conjugated by the same-size wave stays below log(1.3/0.7)
        assert!(late > 3.0 * (1.3f64 / 0.7).ln());
    }
}
