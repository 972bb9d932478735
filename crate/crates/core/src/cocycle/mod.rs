//! Cocycles over a toral automorphism generated by parametric families of
//! circle diffeomorphisms.
//!
//! A generator assigns to every base point `x` a fiber map `A(x)` with a
//! closed form. Products `𝒜ⁿ_x = A(f^{n-1}x) ∘ ⋯ ∘ A(x)` are evaluated
//! pointwise along fiber trajectories, and only the final product is
//! resampled into a [`CircleDiffeo`].

mod diagnostics;
mod synth;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::circle::{monotone_solve, CircleDiffeo, CircleMap, DiffMetricConfig};
use crate::error::{Error, Result};
use crate::torus::{AnosovBase, Side, TorusPoint};

pub use diagnostics::{
    bunching_report, derivative_growth, estimate_beta, estimate_sigma, BoundedCheck, BunchingReport, EtaFit,
    GrowthProfile,
};
pub use synth::{check_bounded, synthesize_bounded, synthesize_cohomologous};

/// Largest `|n|` accepted by [`CocycleGenerator::evaluate`].
pub const MAX_PRODUCT_LEN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `c + Σ (a_k cos 2π⟨k,x⟩ + b_k sin 2π⟨k,x⟩)` on the torus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigPoly2 {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly2 {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn with_cos(mut self, k: [i32; 2], a: f64) -> Self {
        self.terms.push(TrigTerm { k, cos: a, sin: 0.0 });
        self
    }

    pub fn with_sin(mut self, k: [i32; 2], b: f64) -> Self {
        self.terms.push(TrigTerm { k, cos: 0.0, sin: b });
        self
    }

    pub fn eval(&self, x: TorusPoint) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| {
            let arg = TAU * (t.k[0] as f64 * x.x1() + t.k[1] as f64 * x.x2());
            let (s, c) = arg.sin_cos();
            acc + t.cos * c + t.sin * s
        })
    }

    /// Upper bound for `sup |p − c|`.
    pub fn oscillation_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.hypot(t.sin)).sum()
    }

    pub fn sup_bound(&self) -> f64 {
        self.constant.abs() + self.oscillation_bound()
    }

    /// Lipschitz constant bound with respect to the Euclidean metric on the torus.
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| TAU * (t.k[0] as f64).hypot(t.k[1] as f64) * t.cos.hypot(t.sin))
            .sum()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| (t.cos == 0.0 && t.sin == 0.0) || t.k == [0, 0])
    }

    /// The same polynomial with every non-constant coefficient multiplied by `s`.
    pub fn scale_oscillation(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|t| TrigTerm { k: t.k, cos: s * t.cos, sin: s * t.sin }).collect();
        Self { constant: self.constant, terms }
    }
}

/// One mode of a [`PhiFamily::Wave`] conjugating family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveMode {
    pub m: u32,
    pub amp: TrigPoly2,
    #[serde(default)]
    pub phase: TrigPoly2,
}

/// Families `x ↦ Φ_x` of circle diffeomorphisms used as conjugacies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "coeffs", rename_all = "snake_case")]
pub enum PhiFamily {
    Identity,
    /// `Φ_x(t) = t + shift(x) + Σ amp_m(x)/(2πm) · sin 2πm(t − phase_m(x))`.
    Wave {
        #[serde(default)]
        shift: TrigPoly2,
        #[serde(default)]
        modes: Vec<WaveMode>,
    },
}

impl PhiFamily {
    pub fn validate(&self) -> Result<()> {
        if let PhiFamily::Wave { modes, .. } = self {
            let total: f64 = modes.iter().map(|m| m.amp.sup_bound()).sum();
            if modes.iter().any(|m| m.m == 0) {
                return Err(Error::InvalidParameter("wave mode number must be >= 1".into()));
            }
            if total >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "wave amplitudes may sum to {total} >= 1; maps would not be monotone"
                )));
            }
        }
        Ok(())
    }

    pub fn at(&self, x: TorusPoint) -> FiberMap {
        match self {
            PhiFamily::Identity => FiberMap::Rotation(0.0),
            PhiFamily::Wave { shift, modes } => FiberMap::Wave {
                shift: shift.eval(x),
                modes: modes.iter().map(|w| (w.m as f64, w.amp.eval(x), w.phase.eval(x))).collect(),
            },
        }
    }

    /// `Φ_x` resampled on an `n`-point grid.
    pub fn diffeo(&self, x: TorusPoint, n: usize) -> Result<CircleDiffeo> {
        CircleDiffeo::sample(&self.at(x), n)
    }

    pub fn is_identity(&self) -> bool {
        match self {
            PhiFamily::Identity => true,
            PhiFamily::Wave { shift, modes } => {
                shift.is_constant() && shift.constant == 0.0 && modes.iter().all(|m| m.amp.sup_bound() == 0.0)
            }
        }
    }
}

/// Parametric cocycle families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "coeffs", rename_all = "snake_case")]
pub enum Family {
    /// `A(x) ≡ t ↦ α + p + M_a(t − p)` with `a = ε/(2+ε)`.
    Constant {
        #[serde(default)]
        alpha: f64,
        #[serde(default)]
        eps: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `A(x) = R_{α(x)}`.
    RotationField { alpha: TrigPoly2 },
    /// `A(x)(t) = α(x) + p(x) + M_{a(x)}(t − p(x))`, `a = ε/(2+ε)`, where `M_a` is the
    /// lift of the Blaschke factor `z ↦ (z + a)/(1 + a z)`. Its derivative ranges over
    /// `[1/(1+ε), 1+ε]`.
    PerturbedRotation {
        #[serde(default)]
        alpha: TrigPoly2,
        eps: TrigPoly2,
        #[serde(default)]
        phase: TrigPoly2,
    },
    /// `A_x = Φ_{fx} ∘ B_x ∘ Φ_x⁻¹` for the inner family `B`.
    Conjugated { inner: Box<Family>, phi: PhiFamily },
    /// The inverse-time cocycle `x ↦ A(f⁻¹x)⁻¹`; the generator's base must be `f⁻¹`.
    InverseTime { forward: Box<Family> },
}

fn blaschke_a(eps: f64) -> Result<f64> {
    if !(eps > -1.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("perturbation eps = {eps} must exceed -1")));
    }
    Ok(eps / (2.0 + eps))
}

impl Family {
    pub fn identity() -> Self {
        Family::Constant { alpha: 0.0, eps: 0.0, phase: 0.0 }
    }

    /// `A(x)` as a closed-form fiber map; `base` is the generator's base.
    pub fn factor(&self, base: &AnosovBase, x: TorusPoint) -> Result<FiberMap> {
        self.factor_to(base, x, base.apply_f(x, 1))
    }

    /// `A(x)` with the image point `fx` supplied by the caller, so that products along an
    /// orbit generated in closed form use the same points on both sides of each factor.
    pub fn factor_to(&self, base: &AnosovBase, x: TorusPoint, fx: TorusPoint) -> Result<FiberMap> {
        Ok(match self {
            Family::Constant { alpha, eps, phase } => {
                if *eps == 0.0 {
                    FiberMap::Rotation(*alpha)
                } else {
                    FiberMap::Mobius { shift: *alpha, center: *phase, a: blaschke_a(*eps)? }
                }
            }
            Family::RotationField { alpha } => FiberMap::Rotation(alpha.eval(x)),
            Family::PerturbedRotation { alpha, eps, phase } => {
                FiberMap::Mobius { shift: alpha.eval(x), center: phase.eval(x), a: blaschke_a(eps.eval(x))? }
            }
            Family::Conjugated { inner, phi } => {
                let b = inner.factor_to(base, x, fx)?;
                FiberMap::Chain(vec![FiberMap::Inverse(Box::new(phi.at(x))), b, phi.at(fx)])
            }
            Family::InverseTime { forward } => {
                // over f⁻¹ the image fx is the forward preimage of x
                FiberMap::Inverse(Box::new(forward.factor_to(&base.inverse(), fx, x)?))
            }
        })
    }

    /// Ground-truth conjugacy attached by synthesis, if any.
    pub fn ground_truth(&self) -> Option<(&Family, &PhiFamily)> {
        match self {
            Family::Conjugated { inner, phi } => Some((inner, phi)),
            _ => None,
        }
    }

    pub fn is_rotation_valued(&self) -> bool {
        match self {
            Family::Constant { eps, .. } => *eps == 0.0,
            Family::RotationField { .. } => true,
            Family::PerturbedRotation { eps, .. } => eps.sup_bound() == 0.0,
            Family::Conjugated { inner, phi } => inner.is_rotation_valued() && phi.is_identity(),
            Family::InverseTime { forward } => forward.is_rotation_valued(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Family::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Family::Constant { eps, .. } => blaschke_a(*eps).map(|_| ()),
            Family::RotationField { .. } => Ok(()),
            Family::PerturbedRotation { eps, .. } => {
                let lo = eps.constant - eps.oscillation_bound();
                blaschke_a(lo).map(|_| ())
            }
            Family::Conjugated { inner, phi } => {
                inner.validate()?;
                phi.validate()
            }
            Family::InverseTime { forward } => forward.validate(),
        }
    }
}

/// Closed-form maps of the circle, acting on lifts.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberMap {
    Rotation(f64),
    /// `t ↦ shift + center + M_a(t − center)`.
    Mobius { shift: f64, center: f64, a: f64 },
    /// `t ↦ t + shift + Σ amp/(2πm) sin 2πm(t − phase)` with modes `(m, amp, phase)`.
    Wave { shift: f64, modes: Vec<(f64, f64, f64)> },
    /// Applied left to right: the first entry acts first.
    Chain(Vec<FiberMap>),
    Inverse(Box<FiberMap>),
}

/// Lift of the Blaschke factor with real parameter `a`, fixing `0`.
fn blaschke(a: f64, s: f64) -> f64 {
    let (sn, cs) = (TAU * s).sin_cos();
    s - (a * sn).atan2(1.0 + a * cs) / PI
}

fn blaschke_deriv(a: f64, s: f64) -> f64 {
    (1.0 - a * a) / (1.0 + 2.0 * a * (TAU * s).cos() + a * a)
}

fn wave_eval(shift: f64, modes: &[(f64, f64, f64)], t: f64) -> (f64, f64) {
    let mut v = t + shift;
    let mut d = 1.0;
    for &(m, amp, phase) in modes {
        let (sn, cs) = (TAU * m * (t - phase)).sin_cos();
        v += amp / (TAU * m) * sn;
        d += amp * cs;
    }
    (v, d)
}

impl FiberMap {
    /// Value and derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            FiberMap::Rotation(a) => (t + a, 1.0),
            FiberMap::Mobius { shift, center, a } => {
                let s = t - center;
                (shift + center + blaschke(*a, s), blaschke_deriv(*a, s))
            }
            FiberMap::Wave { shift, modes } => wave_eval(*shift, modes, t),
            FiberMap::Chain(maps) => maps.iter().fold((t, 1.0), |(v, d), m| {
                let (v2, d2) = m.eval(v);
                (v2, d * d2)
            }),
            FiberMap::Inverse(inner) => {
                let s = inner.apply_inv(t);
                (s, 1.0 / inner.eval(s).1)
            }
        }
    }

    /// Value and `log` of the derivative at `t`; chains accumulate logs.
    pub fn eval_log(&self, t: f64) -> (f64, f64) {
        match self {
            FiberMap::Chain(maps) => maps.iter().fold((t, 0.0), |(v, l), m| {
                let (v2, l2) = m.eval_log(v);
                (v2, l + l2)
            }),
            FiberMap::Inverse(inner) => {
                let s = inner.apply_inv(t);
                (s, -inner.eval_log(s).1)
            }
            _ => {
                let (v, d) = self.eval(t);
                (v, d.ln())
            }
        }
    }

    /// The inverse map, in closed form where one exists.
    pub fn inverse(&self) -> FiberMap {
        match self {
            FiberMap::Rotation(a) => FiberMap::Rotation(-a),
            FiberMap::Mobius { shift, center, a } => {
                FiberMap::Chain(vec![
                    FiberMap::Rotation(-shift),
                    FiberMap::Mobius { shift: 0.0, center: *center, a: -a },
                ])
            }
            FiberMap::Chain(maps) => FiberMap::Chain(maps.iter().rev().map(|m| m.inverse()).collect()),
            FiberMap::Inverse(inner) => (**inner).clone(),
            FiberMap::Wave { .. } => FiberMap::Inverse(Box::new(self.clone())),
        }
    }

    /// Lower and upper bounds of the derivative over the fiber points `j / (2n)`.
    pub fn derivative_range(&self, n: usize) -> (f64, f64) {
        let m = 2 * n;
        (0..m).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
            let d = self.eval(j as f64 / m as f64).1;
            (lo.min(d), hi.max(d))
        })
    }
}

impl CircleMap for FiberMap {
    fn apply(&self, t: f64) -> f64 {
        match self {
            FiberMap::Rotation(a) => t + a,
            FiberMap::Mobius { shift, center, a } => shift + center + blaschke(*a, t - center),
            FiberMap::Chain(maps) => maps.iter().fold(t, |v, m| m.apply(v)),
            FiberMap::Inverse(inner) => inner.apply_inv(t),
            FiberMap::Wave { .. } => self.eval(t).0,
        }
    }

    fn apply_inv(&self, t: f64) -> f64 {
        match self {
            FiberMap::Rotation(a) => t - a,
            FiberMap::Mobius { shift, center, a } => center + blaschke(-a, t - shift - center),
            FiberMap::Chain(maps) => maps.iter().rev().fold(t, |v, m| m.apply_inv(v)),
            FiberMap::Inverse(inner) => inner.apply(t),
            FiberMap::Wave { shift, modes } => {
                let spread: f64 = modes.iter().map(|&(m, amp, _)| amp.abs() / (TAU * m)).sum();
                let guess = t - shift;
                monotone_solve(
                    |s| wave_eval(*shift, modes, s),
                    t,
                    guess,
                    guess - spread - 1e-12,
                    guess + spread + 1e-12,
                    60,
                )
                .0
            }
        }
    }

    fn deriv(&self, t: f64) -> f64 {
        self.eval(t).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocycleGenerator {
    pub base: AnosovBase,
    pub family: Family,
    /// Declared fiber smoothness `q`.
    pub q: f64,
    pub fiber: DiffMetricConfig,
}

impl CocycleGenerator {
    pub fn new(base: AnosovBase, family: Family, q: f64) -> Result<Self> {
        Self::with_fiber(base, family, q, DiffMetricConfig::default())
    }

    pub fn with_fiber(base: AnosovBase, family: Family, q: f64, fiber: DiffMetricConfig) -> Result<Self> {
        family.validate()?;
        fiber.validate()?;
        if !(q >= 1.0) {
            return Err(Error::InvalidParameter(format!("smoothness q = {q} must be >= 1")));
        }
        Ok(Self { base, family, q, fiber })
    }

    pub fn grid_size(&self) -> usize {
        self.fiber.grid_size
    }

    /// `A(x)` as a closed-form map.
    pub fn factor(&self, x: TorusPoint) -> Result<FiberMap> {
        self.family.factor(&self.base, x)
    }

    /// `A(x)` resampled on the fiber grid.
    pub fn value(&self, x: TorusPoint) -> Result<CircleDiffeo> {
        CircleDiffeo::sample(&self.factor(x)?, self.grid_size())
    }

    /// The generator of the inverse-time cocycle over `f⁻¹`.
    pub fn inverse_time(&self) -> Self {
        let family = match &self.family {
            Family::InverseTime { forward } => (**forward).clone(),
            f => Family::InverseTime { forward: Box::new(f.clone()) },
        };
        Self { base: self.base.inverse(), family, q: self.q, fiber: self.fiber }
    }

    /// Maps whose composition, first entry innermost, is `𝒜ⁿ_x`. Adjacent inverse pairs are cancelled.
    pub fn product_factors(&self, x: TorusPoint, n: i64) -> Result<Vec<FiberMap>> {
        if n.unsigned_abs() as usize > MAX_PRODUCT_LEN {
            return Err(Error::InvalidParameter(format!("product length {n} exceeds budget {MAX_PRODUCT_LEN}")));
        }
        let mut out = Vec::with_capacity(n.unsigned_abs() as usize);
        let mut p = x;
        if n >= 0 {
            for _ in 0..n {
                let next = self.base.apply_f(p, 1);
                push_factor(&mut out, self.family.factor_to(&self.base, p, next)?);
                p = next;
            }
        } else {
            for _ in 0..(-n) {
                let prev = self.base.apply_f(p, -1);
                push_factor(&mut out, FiberMap::Inverse(Box::new(self.family.factor_to(&self.base, prev, p)?)));
                p = prev;
            }
        }
        Ok(out)
    }

    /// `𝒜ⁿ_x`, with `𝒜⁻ⁿ_x = (𝒜ⁿ_{f⁻ⁿx})⁻¹`.
    pub fn evaluate(&self, x: TorusPoint, n: i64) -> Result<CircleDiffeo> {
        let factors = self.product_factors(x, n)?;
        let grid = self.grid_size();
        let samples = (0..grid)
            .map(|j| {
                let t = j as f64 / grid as f64;
                apply_all(&factors, t) - t
            })
            .collect();
        CircleDiffeo::from_displacement(samples)
    }

    /// The factors used to step a leaf pair one unit toward the limit:
    /// `A(x)` for stable pairs, `A(f⁻¹x)⁻¹` for unstable pairs.
    pub fn step_factor(&self, x: TorusPoint, side: Side) -> Result<(FiberMap, TorusPoint)> {
        let next = match side {
            Side::Stable => self.base.apply_f(x, 1),
            Side::Unstable => self.base.apply_f(x, -1),
        };
        Ok((self.step_factor_between(x, next, side)?, next))
    }

    /// As [`Self::step_factor`] with the next orbit point supplied.
    pub fn step_factor_between(&self, x: TorusPoint, next: TorusPoint, side: Side) -> Result<FiberMap> {
        match side {
            Side::Stable => self.family.factor_to(&self.base, x, next),
            Side::Unstable => Ok(FiberMap::Inverse(Box::new(self.family.factor_to(&self.base, next, x)?))),
        }
    }
}

/// Appends `m` to a product list (first entry innermost), flattening chains and
/// dropping adjacent pairs `g⁻¹ ∘ g` that are structurally identical.
pub fn push_factor(factors: &mut Vec<FiberMap>, m: FiberMap) {
    match m {
        FiberMap::Chain(maps) => maps.into_iter().for_each(|f| push_factor(factors, f)),
        FiberMap::Inverse(inner) => match *inner {
            FiberMap::Chain(maps) => {
                maps.into_iter().rev().for_each(|f| push_factor(factors, FiberMap::Inverse(Box::new(f))))
            }
            FiberMap::Inverse(x) => push_factor(factors, *x),
            other => push_atom(factors, FiberMap::Inverse(Box::new(other))),
        },
        other => push_atom(factors, other),
    }
}

fn push_atom(factors: &mut Vec<FiberMap>, m: FiberMap) {
    let cancels = match (factors.last(), &m) {
        (Some(FiberMap::Inverse(prev)), next) => **prev == *next,
        (Some(prev), FiberMap::Inverse(next)) => *prev == **next,
        _ => false,
    };
    if cancels {
        factors.pop();
    } else {
        factors.push(m);
    }
}

/// The products `𝒜ⁿ_x`, `1 ≤ n ≤ len`, along one forward orbit, stored so that every
/// intermediate product can be evaluated while adjacent inverse pairs still cancel.
///
/// Step `n` first applies its committed factors to the running state, then the pending
/// factors on a copy; only the pending tail can be cancelled by the next step.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTape {
    steps: Vec<(Vec<FiberMap>, Vec<FiberMap>)>,
}

impl OrbitTape {
    pub fn forward(gen: &CocycleGenerator, x: TorusPoint, n: usize) -> Result<Self> {
        let mut steps = Vec::with_capacity(n);
        let mut pending: Vec<FiberMap> = Vec::new();
        let mut p = x;
        for _ in 0..n {
            let next = gen.base.apply_f(p, 1);
            push_factor(&mut pending, gen.family.factor_to(&gen.base, p, next)?);
            let keep = pending.len().min(1);
            let commit: Vec<FiberMap> = pending.drain(..pending.len() - keep).collect();
            steps.push((commit, pending.clone()));
            p = next;
        }
        Ok(Self { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Calls `visit(n, 𝒜ⁿ_x(t), log D𝒜ⁿ_x(t))` for `n = 1..=len`.
    pub fn trace(&self, t: f64, mut visit: impl FnMut(usize, f64, f64)) {
        let (mut v, mut l) = (t, 0.0);
        for (i, (commit, pending)) in self.steps.iter().enumerate() {
            (v, l) = commit.iter().fold((v, l), |(v, l), m| {
                let (v2, l2) = m.eval_log(v);
                (v2, l + l2)
            });
            let (pv, pl) = pending.iter().fold((v, l), |(v, l), m| {
                let (v2, l2) = m.eval_log(v);
                (v2, l + l2)
            });
            visit(i + 1, pv, pl);
        }
    }
}

pub fn apply_all(factors: &[FiberMap], t: f64) -> f64 {
    factors.iter().fold(t, |v, m| m.apply(v))
}

pub fn apply_all_inv(factors: &[FiberMap], t: f64) -> f64 {
    factors.iter().rev().fold(t, |v, m| m.apply_inv(v))
}

/// Value and `log D` of the composition of `factors` at `t`.
pub fn apply_all_log(factors: &[FiberMap], t: f64) -> (f64, f64) {
    factors.iter().fold((t, 0.0), |(v, l), m| {
        let (v2, l2) = m.eval_log(v);
        (v2, l + l2)
    })
}
