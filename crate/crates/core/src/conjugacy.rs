//! Cycle weights, transport of conjugacy values along su-paths, and fields
//! `x ↦ Φ_x` rebuilt from a single anchor value.
//!
//! All error figures are `d_{C⁰}` bounds assembled from the holonomy tail
//! certificates, Lipschitz constants of the factors, and the aliasing estimate
//! of each interpolated diffeomorphism that is evaluated off its grid.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;

use crate::circle::{circle_dist, compose, dist_c0_with_inverses, CircleDiffeo, CircleMap};
use crate::cocycle::FiberMap;
use crate::error::{Error, Result};
use crate::holonomy::{HolonomyApprox, HolonomySolver};
use crate::torus::{AnosovBase, Side, SuPath, TorusPoint};

/// Residuals above this multiple of the certified error count as obstructions.
pub const OBSTRUCTION_FACTOR: f64 = 10.0;

/// Leg scales of the bracket cycles scanned by [`constant_reduction`].
pub const CYCLE_SCALES: [f64; 3] = [0.02, 0.05, 0.1];

/// Allowance for floating-point rounding in one pointwise composition.
const ROUNDING: f64 = 1e-14;

/// Closure tolerance for su-cycles.
const CLOSURE_TOL: f64 = 1e-12;

/// Leg-length ratio of the second path used by path-independence checks.
const ALT_LEG_RATIO: f64 = 0.3;

fn interp_error(g: &CircleDiffeo) -> f64 {
    g.interpolant().aliasing_estimate() + ROUNDING
}

/// A diffeomorphism with its inverse and a `d_{C⁰}` error bound for the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub value: CircleDiffeo,
    pub inverse: CircleDiffeo,
    pub error: f64,
}

impl FieldValue {
    pub fn identity(n: usize) -> Self {
        let id = CircleDiffeo::identity(n);
        Self { value: id.clone(), inverse: id, error: 0.0 }
    }

    /// Samples a closed-form map and its closed-form inverse.
    pub fn from_map(map: &FiberMap, n: usize) -> Result<Self> {
        let value = CircleDiffeo::sample(map, n)?;
        let inverse = CircleDiffeo::sample(&map.inverse(), n)?;
        let error = interp_error(&value) + interp_error(&inverse);
        Ok(Self { value, inverse, error })
    }

    pub fn grid_size(&self) -> usize {
        self.value.grid_size()
    }

    /// `d_{C⁰}` to another value.
    pub fn dist(&self, other: &FieldValue) -> f64 {
        dist_c0_with_inverses(&self.value, &self.inverse, &other.value, &other.inverse)
    }

    pub fn dist_to_id(&self) -> f64 {
        self.dist(&FieldValue::identity(self.grid_size()))
    }

    /// `d_{C⁰}` to a closed-form map, evaluated on the grid.
    pub fn dist_to_map(&self, map: &FiberMap) -> f64 {
        let n = self.grid_size();
        let (mut d, mut di) = (0.0f64, 0.0f64);
        for j in 0..n {
            let t = j as f64 / n as f64;
            d = d.max(circle_dist(self.value.apply(t), map.apply(t)));
            di = di.max(circle_dist(self.inverse.apply(t), map.apply_inv(t)));
        }
        d + di
    }

    fn lip(&self) -> f64 {
        self.value.bi_lipschitz()
    }

    /// `self ∘ inner`, with the error of both operands propagated.
    pub fn compose(&self, inner: &FieldValue) -> Result<FieldValue> {
        let value = compose(&self.value, &inner.value)?;
        let inverse = compose(&inner.inverse, &self.inverse)?;
        let error = self.lip().max(1.0) * inner.error
            + inner.lip().max(1.0) * self.error
            + interp_error(&self.value)
            + interp_error(&inner.inverse);
        Ok(FieldValue { value, inverse, error })
    }

    pub fn inverted(&self) -> FieldValue {
        FieldValue { value: self.inverse.clone(), inverse: self.value.clone(), error: self.error }
    }
}

impl From<&HolonomyApprox> for FieldValue {
    fn from(h: &HolonomyApprox) -> Self {
        let error = h.tail_bound + interp_error(&h.value) + interp_error(&h.inverse);
        FieldValue { value: h.value.clone(), inverse: h.inverse.clone(), error }
    }
}

/// Composition of leg holonomies along an su-path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathWeight {
    pub value: CircleDiffeo,
    pub inverse: CircleDiffeo,
    pub path: SuPath,
    /// Sum of the propagated leg certificates and composition errors.
    pub accumulated_error: f64,
    /// Certified tail bound of each leg.
    pub leg_tails: Vec<f64>,
}

impl PathWeight {
    pub fn as_field_value(&self) -> FieldValue {
        FieldValue { value: self.value.clone(), inverse: self.inverse.clone(), error: self.accumulated_error }
    }

    pub fn dist_to_id(&self) -> f64 {
        self.as_field_value().dist_to_id()
    }

    pub fn dist(&self, other: &PathWeight) -> f64 {
        dist_c0_with_inverses(&self.value, &self.inverse, &other.value, &other.inverse)
    }
}

fn leg_holonomy(solver: &HolonomySolver<'_>, start: TorusPoint, side: Side, ell: f64) -> Result<HolonomyApprox> {
    if ell.abs() <= solver.generator().base.r_loc() {
        solver.local(start, side, ell)
    } else {
        solver.global(start, side, ell)
    }
}

/// `H_{x_{k−1},x_k} ∘ ⋯ ∘ H_{x₀,x₁}` along `path`.
pub fn path_weight(solver: &HolonomySolver<'_>, path: &SuPath) -> Result<PathWeight> {
    let mut acc = FieldValue::identity(solver.generator().grid_size());
    let mut leg_tails = Vec::with_capacity(path.len());
    for leg in &path.legs {
        let h = leg_holonomy(solver, leg.start, leg.side, leg.ell)?;
        leg_tails.push(h.tail_bound);
        acc = FieldValue::from(&h).compose(&acc)?;
    }
    Ok(PathWeight {
        value: acc.value,
        inverse: acc.inverse,
        path: path.clone(),
        accumulated_error: acc.error,
        leg_tails,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleWeight {
    pub weight: PathWeight,
    /// `d_{C⁰}(weight, Id)`.
    pub obstruction: f64,
}

/// Weight of a closed su-path and its distance to the identity.
pub fn cycle_weight(solver: &HolonomySolver<'_>, cycle: &SuPath) -> Result<CycleWeight> {
    let gap = cycle.closure_gap(&solver.generator().base);
    if gap > CLOSURE_TOL {
        return Err(Error::NotClosed { gap });
    }
    let weight = path_weight(solver, cycle)?;
    let obstruction = weight.dist_to_id();
    Ok(CycleWeight { weight, obstruction })
}

/// The cocycle on the `B` side of a conjugacy problem.
#[derive(Clone, Copy)]
pub enum Partner<'s, 'g> {
    Cocycle(&'s HolonomySolver<'g>),
    /// A constant cocycle; all of its holonomies are the identity.
    Constant(&'s CircleDiffeo),
}

impl Partner<'_, '_> {
    fn path_weight(&self, path: &SuPath, n: usize) -> Result<FieldValue> {
        match self {
            Partner::Cocycle(s) => Ok(path_weight(s, path)?.as_field_value()),
            Partner::Constant(_) => Ok(FieldValue::identity(n)),
        }
    }

    fn holonomy(&self, x: TorusPoint, side: Side, ell: f64, n: usize) -> Result<FieldValue> {
        match self {
            Partner::Cocycle(s) => Ok(FieldValue::from(&leg_holonomy(s, x, side, ell)?)),
            Partner::Constant(_) => Ok(FieldValue::identity(n)),
        }
    }

    /// `B_x` and `B_x⁻¹` at `t`.
    fn eval(&self, x: TorusPoint, t: f64) -> Result<(f64, f64)> {
        match self {
            Partner::Cocycle(s) => {
                let b = s.generator().factor(x)?;
                Ok((b.apply(t), b.apply_inv(t)))
            }
            Partner::Constant(g) => Ok((g.apply(t), g.apply_inv(t))),
        }
    }
}

/// `Φ_y = 𝓗^{𝒜,P}_{x,y} ∘ Φ_x ∘ (𝓗^{ℬ,P}_{x,y})⁻¹` for a path `P` from `x` to `y`.
pub fn transport_value(a: &HolonomySolver<'_>, b: Partner<'_, '_>, phi_x: &FieldValue, path: &SuPath) -> Result<FieldValue> {
    if path.is_empty() {
        return Ok(phi_x.clone());
    }
    let n = a.generator().grid_size();
    let wa = path_weight(a, path)?.as_field_value();
    let wb = b.path_weight(path, n)?;
    wa.compose(&phi_x.compose(&wb.inverted())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathIndependence {
    pub x: TorusPoint,
    pub y: TorusPoint,
    /// `d_{C⁰}` between the values transported along the two paths.
    pub residual: f64,
    /// Sum of both transport error bounds.
    pub bound: f64,
}

impl PathIndependence {
    pub fn violated(&self) -> bool {
        self.residual > OBSTRUCTION_FACTOR * self.bound
    }
}

/// Transports `Φ_x` to `y` along two su-paths built with leg limits `max_leg` and
/// `0.3·max_leg` and compares the results.
pub fn check_path_independence(
    a: &HolonomySolver<'_>,
    b: Partner<'_, '_>,
    phi_x: &FieldValue,
    x: TorusPoint,
    y: TorusPoint,
    max_leg: f64,
) -> Result<PathIndependence> {
    let base = &a.generator().base;
    let p1 = base.build_su_path(x, y, max_leg)?;
    let p2 = base.build_su_path(x, y, ALT_LEG_RATIO * max_leg)?;
    let v1 = transport_value(a, b, phi_x, &p1)?;
    let v2 = transport_value(a, b, phi_x, &p2)?;
    Ok(PathIndependence { x, y, residual: v1.dist(&v2), bound: v1.error + v2.error })
}

/// Values `Φ_x` on the lattice `{(i/m, j/m)}`, which every integer matrix maps into itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyField {
    resolution: usize,
    anchor: usize,
    max_leg: f64,
    values: Vec<FieldValue>,
}

impl ConjugacyField {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.resolution + j
    }

    pub fn point(&self, idx: usize) -> TorusPoint {
        lattice_point(self.resolution, idx)
    }

    pub fn anchor(&self) -> (TorusPoint, &FieldValue) {
        (self.point(self.anchor), &self.values[self.anchor])
    }

    pub fn value(&self, idx: usize) -> &FieldValue {
        &self.values[idx]
    }

    pub fn values(&self) -> &[FieldValue] {
        &self.values
    }

    pub fn max_error(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.error))
    }

    /// Index of the lattice point nearest to `y`.
    pub fn nearest(&self, y: TorusPoint) -> usize {
        let m = self.resolution;
        let snap = |c: f64| ((c * m as f64).round() as usize) % m;
        snap(y.x1()) * m + snap(y.x2())
    }

    /// Index of `f(point(idx))`, by exact integer arithmetic.
    pub fn image_index(&self, base: &AnosovBase, idx: usize) -> usize {
        let m = self.resolution as i64;
        let (i, j) = ((idx / self.resolution) as i64, (idx % self.resolution) as i64);
        let a = base.matrix();
        let ii = (a[0][0] * i + a[0][1] * j).rem_euclid(m);
        let jj = (a[1][0] * i + a[1][1] * j).rem_euclid(m);
        (ii * m + jj) as usize
    }

    /// `Φ_y` at an arbitrary point: transported from the nearest lattice value along a short path.
    pub fn lookup(&self, a: &HolonomySolver<'_>, b: Partner<'_, '_>, y: TorusPoint) -> Result<FieldValue> {
        let z = self.nearest(y);
        let path = a.generator().base.build_su_path(self.point(z), y, self.max_leg)?;
        transport_value(a, b, &self.values[z], &path)
    }

    /// Replaces one stored value, e.g. to test that residuals detect the change.
    pub fn set_value(&mut self, idx: usize, v: FieldValue) {
        self.values[idx] = v;
    }
}

fn lattice_point(m: usize, idx: usize) -> TorusPoint {
    TorusPoint::new((idx / m) as f64 / m as f64, (idx % m) as f64 / m as f64)
}

fn lattice_index(m: usize, x: TorusPoint) -> Result<usize> {
    let snap = |c: f64| {
        let s = c * m as f64;
        let r = s.round();
        ((s - r).abs() <= 1e-9).then_some(r as usize % m)
    };
    match (snap(x.x1()), snap(x.x2())) {
        (Some(i), Some(j)) => Ok(i * m + j),
        _ => Err(Error::InvalidParameter(format!("anchor {x} is not a point of the {m}x{m} lattice"))),
    }
}

/// Options for [`build_conjugacy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    /// Lattice resolution `m`.
    pub resolution: usize,
    /// Leg limit for tree edges and lookups; defaults to `r_loc`.
    pub max_leg: Option<f64>,
    /// Number of lattice points checked for path independence before the build.
    pub spot_checks: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { resolution: 32, max_leg: None, spot_checks: 10 }
    }
}

/// Parent of every lattice point in a breadth-first tree rooted at `root`, grouped by depth.
fn bfs_levels(m: usize, root: usize) -> Vec<Vec<(usize, usize)>> {
    let mut parent = vec![usize::MAX; m * m];
    parent[root] = root;
    let mut levels = Vec::new();
    let mut frontier = vec![root];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        let mut queue: VecDeque<usize> = frontier.into_iter().collect();
        while let Some(p) = queue.pop_front() {
            let (i, j) = (p / m, p % m);
            for (di, dj) in [(1, 0), (m - 1, 0), (0, 1), (0, m - 1)] {
                let q = ((i + di) % m) * m + (j + dj) % m;
                if parent[q] == usize::MAX {
                    parent[q] = p;
                    next.push(q);
                }
            }
        }
        if !next.is_empty() {
            levels.push(next.iter().map(|&q| (q, parent[q])).collect());
        }
        frontier = next;
    }
    levels
}

/// Rebuilds `Φ` on the lattice from the anchor value by transport along tree edges.
///
/// Before the build, values transported along two different paths are compared at
/// `spot_checks` lattice points; a disagreement beyond ten times the certified error
/// is reported as [`Error::PathIndependenceViolated`].
pub fn build_conjugacy(
    a: &HolonomySolver<'_>,
    b: Partner<'_, '_>,
    x0: TorusPoint,
    phi_x0: FieldValue,
    opts: FieldOptions,
) -> Result<(ConjugacyField, Vec<PathIndependence>)> {
    let m = opts.resolution;
    if m < 2 {
        return Err(Error::InvalidParameter("lattice resolution must be at least 2".into()));
    }
    let base = &a.generator().base;
    let max_leg = opts.max_leg.unwrap_or(base.r_loc());
    let root = lattice_index(m, x0)?;
    let x0 = lattice_point(m, root);

    let total = m * m;
    let picks: Vec<usize> = (1..=opts.spot_checks).map(|k| (root + k * total / (opts.spot_checks + 1)) % total).collect();
    let checks: Vec<PathIndependence> = picks
        .par_iter()
        .map(|&q| check_path_independence(a, b, &phi_x0, x0, lattice_point(m, q), max_leg))
        .collect::<Result<_>>()?;
    if let Some(bad) = checks.iter().find(|c| c.violated()) {
        return Err(Error::PathIndependenceViolated { residual: bad.residual, bound: bad.bound });
    }

    let mut values: Vec<Option<FieldValue>> = vec![None; total];
    values[root] = Some(phi_x0);
    for level in bfs_levels(m, root) {
        let computed: Vec<(usize, FieldValue)> = level
            .par_iter()
            .map(|&(q, p)| {
                let parent = values[p].as_ref().expect("parents precede children");
                let path = base.build_su_path(lattice_point(m, p), lattice_point(m, q), max_leg)?;
                Ok((q, transport_value(a, b, parent, &path)?))
            })
            .collect::<Result<_>>()?;
        for (q, v) in computed {
            values[q] = Some(v);
        }
    }
    let values = values.into_iter().map(|v| v.expect("tree spans the lattice")).collect();
    Ok((ConjugacyField { resolution: m, anchor: root, max_leg, values }, checks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyResidual {
    /// `d_{C⁰}(A_x, Φ_{fx} ∘ B_x ∘ Φ_x⁻¹)` per lattice point.
    pub per_point: Vec<f64>,
    pub max: f64,
    pub worst: usize,
}

/// `max_x d_{C⁰}(A_x, Φ_{fx} ∘ B_x ∘ Φ_x⁻¹)` over the lattice; `fx` is again a lattice point.
pub fn conjugacy_residual(a: &HolonomySolver<'_>, b: Partner<'_, '_>, field: &ConjugacyField) -> Result<ConjugacyResidual> {
    let gen = a.generator();
    let n = gen.grid_size();
    let per_point: Vec<f64> = (0..field.len())
        .into_par_iter()
        .map(|idx| {
            let x = field.point(idx);
            let ax = gen.factor(x)?;
            let phi_x = field.value(idx);
            let phi_fx = field.value(field.image_index(&gen.base, idx));
            let (mut d, mut di) = (0.0f64, 0.0f64);
            for j in 0..n {
                let t = j as f64 / n as f64;
                let (bt, _) = b.eval(x, phi_x.inverse.apply(t))?;
                d = d.max(circle_dist(ax.apply(t), phi_fx.value.apply(bt)));
                let (_, bit) = b.eval(x, phi_fx.inverse.apply(t))?;
                di = di.max(circle_dist(ax.apply_inv(t), phi_x.value.apply(bit)));
            }
            Ok(d + di)
        })
        .collect::<Result<_>>()?;
    let (worst, max) = per_point.iter().enumerate().fold((0, 0.0f64), |(wi, wm), (i, &r)| if r > wm { (i, r) } else { (wi, wm) });
    Ok(ConjugacyResidual { per_point, max, worst })
}

/// Sampling plan for [`intertwining_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwiningSamples {
    pub pairs: usize,
    /// Replace `H^𝒜` by its zero-step truncation, the identity.
    pub truncate_a: bool,
}

impl Default for IntertwiningSamples {
    fn default() -> Self {
        Self { pairs: 50, truncate_a: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwiningReport {
    /// `max d_{C⁰}(H^𝒜_{x,y}, Φ_y ∘ H^ℬ_{x,y} ∘ Φ_x⁻¹)`.
    pub max: f64,
    /// Largest certified error of the two sides among the sampled pairs.
    pub max_error: f64,
    /// Largest `d_{C⁰}(H^𝒜_{x,y}, Id)` among the sampled pairs.
    pub max_holonomy_size: f64,
}

/// Compares holonomies of `A` with conjugated holonomies of `B` on random local leaf pairs
/// starting at lattice points. `Φ_y` is looked up through the field, so the check also
/// exercises the path independence of the construction.
pub fn intertwining_residual<R: Rng + ?Sized>(
    a: &HolonomySolver<'_>,
    b: Partner<'_, '_>,
    field: &ConjugacyField,
    spec: IntertwiningSamples,
    rng: &mut R,
) -> Result<IntertwiningReport> {
    let gen = a.generator();
    let n = gen.grid_size();
    let half = 0.5 * gen.base.r_loc();
    let samples: Vec<(usize, Side, f64)> = (0..spec.pairs)
        .map(|_| {
            let idx = rng.gen_range(0..field.len());
            let side = if rng.gen::<bool>() { Side::Stable } else { Side::Unstable };
            (idx, side, rng.gen_range(-half..half))
        })
        .collect();
    let rows: Vec<(f64, f64, f64)> = samples
        .par_iter()
        .map(|&(idx, side, ell)| {
            let x = field.point(idx);
            let y = gen.base.leaf_point(x, side, ell);
            let ha = FieldValue::from(&leg_holonomy(a, x, side, ell)?);
            let hb = b.holonomy(x, side, ell, n)?;
            let phi_y = field.lookup(a, b, y)?;
            let rhs = phi_y.compose(&hb.compose(&field.value(idx).inverted())?)?;
            let lhs = if spec.truncate_a { FieldValue::identity(n) } else { ha.clone() };
            Ok((lhs.dist(&rhs), lhs.error + rhs.error, ha.dist_to_id()))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().fold(
        IntertwiningReport { max: 0.0, max_error: 0.0, max_holonomy_size: 0.0 },
        |r, (d, e, h)| IntertwiningReport {
            max: r.max.max(d),
            max_error: r.max_error.max(e),
            max_holonomy_size: r.max_holonomy_size.max(h),
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub center: TorusPoint,
    /// Signed leg length of the bracket cycle.
    pub scale: f64,
    pub obstruction: f64,
    pub error_bound: f64,
}

impl CycleRecord {
    pub fn obstructed(&self) -> bool {
        self.obstruction > OBSTRUCTION_FACTOR * self.error_bound
    }
}

/// Cycle weights of the bracket 4-cycles `s ℓ, u ℓ, s −ℓ, u −ℓ` at each center, for `±` each scale.
pub fn cycle_scan(solver: &HolonomySolver<'_>, centers: &[TorusPoint], scales: &[f64]) -> Result<Vec<CycleRecord>> {
    let base = &solver.generator().base;
    let jobs: Vec<(TorusPoint, f64)> =
        centers.iter().flat_map(|&c| scales.iter().flat_map(move |&s| [(c, s), (c, -s)])).collect();
    jobs.par_iter()
        .map(|&(center, scale)| {
            let cw = cycle_weight(solver, &SuPath::bracket_cycle(base, center, scale))?;
            Ok(CycleRecord { center, scale, obstruction: cw.obstruction, error_bound: cw.weight.accumulated_error })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    Reduced {
        /// The constant cocycle value `B`.
        b_const: FieldValue,
        field: ConjugacyField,
        cycles: Vec<CycleRecord>,
    },
    Obstructed {
        worst: CycleRecord,
        cycles: Vec<CycleRecord>,
    },
}

/// Tries to conjugate `A` to a constant cocycle.
///
/// Scans bracket cycles at `x0`. When none is obstructed, the constant value is
/// `B = Φ_{x₀}⁻¹ ∘ (𝓗^{𝒜,P}_{x₀,fx₀})⁻¹ ∘ A_{x₀} ∘ Φ_{x₀}` for the constructed path `P`
/// from `x₀` to `fx₀`, and the field is `Φ_y = 𝓗^{𝒜}_{x₀,y} ∘ Φ_{x₀}`.
pub fn constant_reduction(
    a: &HolonomySolver<'_>,
    x0: TorusPoint,
    phi_x0: FieldValue,
    opts: FieldOptions,
) -> Result<Reduction> {
    let gen = a.generator();
    let n = gen.grid_size();
    let cycles = cycle_scan(a, &[x0], &CYCLE_SCALES)?;
    if let Some(worst) = cycles
        .iter()
        .filter(|c| c.obstructed())
        .max_by(|p, q| p.obstruction.total_cmp(&q.obstruction))
    {
        return Ok(Reduction::Obstructed { worst: *worst, cycles });
    }
    let max_leg = opts.max_leg.unwrap_or(gen.base.r_loc());
    let path = gen.base.build_su_path(x0, gen.base.apply_f(x0, 1), max_leg)?;
    let w = path_weight(a, &path)?.as_field_value();
    let ax0 = FieldValue::from_map(&gen.factor(x0)?, n)?;
    let b_const = phi_x0.inverted().compose(&w.inverted().compose(&ax0.compose(&phi_x0)?)?)?;
    let (field, _) = build_conjugacy(a, Partner::Constant(&b_const.value), x0, phi_x0, opts)?;
    Ok(Reduction::Reduced { b_const, field, cycles })
}
