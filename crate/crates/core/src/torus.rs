//! Hyperbolic automorphisms of the 2-torus, their linear stable and unstable
//! foliations, brackets, and su-paths built from brackets.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leaf membership tolerance in eigen coordinates.
pub const LEAF_TOL: f64 = 1e-12;

/// Longest run of matrix steps applied at once by [`AnosovBase::apply_f`].
const CHUNK: u32 = 8;

/// Legs shorter than this are dropped while building paths.
const NEGLIGIBLE_LEG: f64 = 1e-14;

fn reduce(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `v mod 1` in `(-1/2, 1/2]`.
pub fn shortest(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(pub [f64; 2]);

impl TorusPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self([reduce(x1), reduce(x2)])
    }

    pub const ORIGIN: TorusPoint = TorusPoint([0.0, 0.0]);

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(rng.gen::<f64>(), rng.gen::<f64>())
    }

    pub fn x1(&self) -> f64 {
        self.0[0]
    }

    pub fn x2(&self) -> f64 {
        self.0[1]
    }

    /// Shortest displacement vector from `self` to `other`; ties go to `+1/2`.
    pub fn displacement_to(&self, other: &TorusPoint) -> [f64; 2] {
        [shortest(other.0[0] - self.0[0]), shortest(other.0[1] - self.0[1])]
    }

    pub fn translate(&self, v: [f64; 2]) -> Self {
        Self::new(self.0[0] + v[0], self.0[1] + v[1])
    }

    pub fn dist(&self, other: &TorusPoint) -> f64 {
        let d = self.displacement_to(other);
        d[0].hypot(d[1])
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.0[0], self.0[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[serde(rename = "s")]
    Stable,
    #[serde(rename = "u")]
    Unstable,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Stable => "s",
            Side::Unstable => "u",
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Stable => Side::Unstable,
            Side::Unstable => Side::Stable,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnosovBase {
    matrix: [[i64; 2]; 2],
    det: i64,
    /// Signed eigenvalues.
    mu_s: f64,
    mu_u: f64,
    e_s: [f64; 2],
    e_u: [f64; 2],
    /// Rows of the inverse of the eigenvector matrix `[e_s e_u]`.
    to_eigen: [[f64; 2]; 2],
    r_loc: f64,
}

fn unit_eigenvector(m: [[i64; 2]; 2], mu: f64) -> [f64; 2] {
    let [[a, b], [c, d]] = m.map(|r| r.map(|v| v as f64));
    let v1 = [b, mu - a];
    let v2 = [mu - d, c];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    // one fixed orientation: first nonzero coordinate positive
    let s = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
    [s * v[0] / n, s * v[1] / n]
}

impl AnosovBase {
    pub fn new(matrix: [[i64; 2]; 2], r_loc: f64) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        let det = a * d - b * c;
        if det.abs() != 1 {
            return Err(Error::InvalidParameter(format!("matrix determinant {det} is not +-1")));
        }
        if !(r_loc > 0.0 && r_loc < 0.5) {
            return Err(Error::InvalidParameter(format!("r_loc = {r_loc} not in (0, 1/2)")));
        }
        let tr = (a + d) as f64;
        let disc = tr * tr - 4.0 * det as f64;
        if disc <= 0.0 {
            return Err(Error::InvalidParameter("eigenvalues are not real and distinct".into()));
        }
        let root = disc.sqrt();
        // the larger-magnitude root computed directly, the other from the determinant
        let big = if tr >= 0.0 { 0.5 * (tr + root) } else { 0.5 * (tr - root) };
        let small = det as f64 / big;
        if !(small.abs() < 1.0 && big.abs() > 1.0) {
            return Err(Error::InvalidParameter("matrix is not hyperbolic".into()));
        }
        let e_s = unit_eigenvector(matrix, small);
        let e_u = unit_eigenvector(matrix, big);
        let det_e = e_s[0] * e_u[1] - e_u[0] * e_s[1];
        let to_eigen = [[e_u[1] / det_e, -e_u[0] / det_e], [-e_s[1] / det_e, e_s[0] / det_e]];
        Ok(Self { matrix, det, mu_s: small, mu_u: big, e_s, e_u, to_eigen, r_loc })
    }

    pub fn cat_map() -> Self {
        Self::new([[2, 1], [1, 1]], 0.2).expect("cat map is hyperbolic")
    }

    /// The base for `f⁻¹`: stable and unstable roles swap.
    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.matrix;
        let s = self.det;
        Self::new([[s * d, -s * b], [-s * c, s * a]], self.r_loc).expect("inverse of a hyperbolic matrix")
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.matrix
    }

    pub fn r_loc(&self) -> f64 {
        self.r_loc
    }

    pub fn with_r_loc(&self, r_loc: f64) -> Result<Self> {
        Self::new(self.matrix, r_loc)
    }

    /// Contraction rate `λ = λ_s`.
    pub fn lambda_s(&self) -> f64 {
        self.mu_s.abs()
    }

    pub fn lambda_u(&self) -> f64 {
        self.mu_u.abs()
    }

    pub fn mu(&self, side: Side) -> f64 {
        match side {
            Side::Stable => self.mu_s,
            Side::Unstable => self.mu_u,
        }
    }

    pub fn eigenvector(&self, side: Side) -> [f64; 2] {
        match side {
            Side::Stable => self.e_s,
            Side::Unstable => self.e_u,
        }
    }

    /// `max(‖M e_s − μ_s e_s‖, ‖M e_u − μ_u e_u‖)`.
    pub fn eigen_residual(&self) -> f64 {
        let m = self.matrix.map(|r| r.map(|v| v as f64));
        [(self.e_s, self.mu_s), (self.e_u, self.mu_u)]
            .iter()
            .map(|(e, mu)| {
                let r0 = m[0][0] * e[0] + m[0][1] * e[1] - mu * e[0];
                let r1 = m[1][0] * e[0] + m[1][1] * e[1] - mu * e[1];
                r0.hypot(r1)
            })
            .fold(0.0, f64::max)
    }

    /// Bound on `max(|a|, |b|) / |v|` for `v = a e_s + b e_u`.
    pub fn basis_condition(&self) -> f64 {
        self.to_eigen.iter().map(|r| r[0].hypot(r[1])).fold(0.0, f64::max)
    }

    /// Coordinates `(a, b)` with `v = a e_s + b e_u`.
    pub fn eigen_coords(&self, v: [f64; 2]) -> (f64, f64) {
        let t = &self.to_eigen;
        (t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1])
    }

    fn step_matrix(&self, k: u32, forward: bool) -> [[i64; 2]; 2] {
        let [[a, b], [c, d]] = self.matrix;
        let base = if forward { self.matrix } else { [[self.det * d, -self.det * b], [-self.det * c, self.det * a]] };
        let mut p = [[1, 0], [0, 1]];
        for _ in 0..k {
            p = [
                [p[0][0] * base[0][0] + p[0][1] * base[1][0], p[0][0] * base[0][1] + p[0][1] * base[1][1]],
                [p[1][0] * base[0][0] + p[1][1] * base[1][0], p[1][0] * base[0][1] + p[1][1] * base[1][1]],
            ];
        }
        p
    }

    /// `fⁿ(x)`, applying exact integer powers of at most 8 steps followed by reduction mod 1.
    pub fn apply_f(&self, x: TorusPoint, n: i64) -> TorusPoint {
        let forward = n >= 0;
        let mut left = n.unsigned_abs();
        let mut p = x;
        while left > 0 {
            let k = left.min(CHUNK as u64) as u32;
            let m = self.step_matrix(k, forward);
            let [x1, x2] = p.0;
            // entries of an 8-step power stay far below 2^53, so each product is exact up to one rounding
            p = TorusPoint::new(
                (m[0][0] as f64).mul_add(x1, m[0][1] as f64 * x2),
                (m[1][0] as f64).mul_add(x1, m[1][1] as f64 * x2),
            );
            left -= k as u64;
        }
        p
    }

    pub fn leaf_point(&self, x: TorusPoint, side: Side, ell: f64) -> TorusPoint {
        let e = self.eigenvector(side);
        x.translate([ell * e[0], ell * e[1]])
    }

    /// Eigen coordinate of `y` along the `side` leaf through `x`, and the transverse residual.
    pub fn leaf_coordinate(&self, x: TorusPoint, y: TorusPoint, side: Side) -> (f64, f64) {
        let (a, b) = self.eigen_coords(x.displacement_to(&y));
        match side {
            Side::Stable => (a, b.abs()),
            Side::Unstable => (b, a.abs()),
        }
    }

    /// `y = W^s_loc(x) ∩ W^u_loc(z)` with `z − x = a e_s + b e_u`.
    pub fn bracket(&self, x: TorusPoint, z: TorusPoint) -> Result<(TorusPoint, f64, f64)> {
        let (a, b) = self.eigen_coords(x.displacement_to(&z));
        if a.abs() > self.r_loc || b.abs() > self.r_loc {
            return Err(Error::OutOfLocalRange { a, b, r_loc: self.r_loc });
        }
        let y = self.leaf_point(x, Side::Stable, a);
        let (_, rs) = self.leaf_coordinate(x, y, Side::Stable);
        if rs > LEAF_TOL {
            return Err(Error::NotOnLeaf { leaf: "stable", residual: rs });
        }
        let (_, ru) = self.leaf_coordinate(y, z, Side::Unstable);
        if ru > LEAF_TOL {
            return Err(Error::NotOnLeaf { leaf: "unstable", residual: ru });
        }
        Ok((y, a, b))
    }

    /// An su-path from `x` to `y` through brackets of a subdivided straight segment.
    pub fn build_su_path(&self, x: TorusPoint, y: TorusPoint, max_leg_length: f64) -> Result<SuPath> {
        if !(max_leg_length > 0.0 && max_leg_length <= self.r_loc) {
            return Err(Error::InvalidParameter(format!(
                "max leg length {max_leg_length} not in (0, r_loc = {}]",
                self.r_loc
            )));
        }
        let d = x.displacement_to(&y);
        let len = d[0].hypot(d[1]);
        let mut path = SuPath::new(x);
        if len == 0.0 {
            return Ok(path);
        }
        let h = max_leg_length.min(0.5 * self.r_loc) / self.basis_condition();
        let steps = ((len / h).floor() as usize + 1).max(1);
        let mut cur = x;
        for i in 1..=steps {
            let f = i as f64 / steps as f64;
            let target = x.translate([f * d[0], f * d[1]]);
            let (_, a, b) = self.bracket(cur, target)?;
            path.push(self, Side::Stable, a, max_leg_length);
            path.push(self, Side::Unstable, b, max_leg_length);
            cur = path.end(self);
        }
        Ok(path)
    }

    /// Leg-count bound `2⌈d/h⌉ + 2` for the step `h` used by [`Self::build_su_path`].
    pub fn leg_bound(&self, x: TorusPoint, y: TorusPoint, max_leg_length: f64) -> usize {
        let h = max_leg_length.min(0.5 * self.r_loc) / self.basis_condition();
        2 * (x.dist(&y) / h).ceil() as usize + 2
    }

    /// Ratios `d(f^k x, f^k y) / d(f^{k-1} x, f^{k-1} y)` for `k = 1..=n`, with `f⁻¹` on the unstable side.
    ///
    /// The pair is propagated in eigen coordinates. Iterating both points in floating
    /// point would amplify the rounding of the transverse component by `λ_u` per step.
    pub fn contraction_ratios(&self, x: TorusPoint, y: TorusPoint, side: Side, n: usize) -> Vec<f64> {
        let (mut a, mut b) = self.eigen_coords(x.displacement_to(&y));
        let (ms, mu) = match side {
            Side::Stable => (self.mu_s, self.mu_u),
            Side::Unstable => (1.0 / self.mu_s, 1.0 / self.mu_u),
        };
        let norm = |a: f64, b: f64| {
            let v = [a * self.e_s[0] + b * self.e_u[0], a * self.e_s[1] + b * self.e_u[1]];
            v[0].hypot(v[1])
        };
        let mut prev = norm(a, b);
        (0..n)
            .map(|_| {
                a *= ms;
                b *= mu;
                let next = norm(a, b);
                let r = next / prev;
                prev = next;
                r
            })
            .collect()
    }

    /// Whether `d(f^k x, f^k y) ≤ λ^k d(x, y)` for all `1 ≤ k ≤ n` (`f⁻¹` on the unstable side).
    pub fn contraction_check(&self, x: TorusPoint, y: TorusPoint, side: Side, n: usize) -> bool {
        let (_, transverse) = self.leaf_coordinate(x, y, side);
        if transverse > LEAF_TOL {
            return false;
        }
        let lambda = self.lambda_s();
        let mut bound = 1.0;
        let mut ratio = 1.0;
        self.contraction_ratios(x, y, side, n).into_iter().all(|r| {
            bound *= lambda;
            ratio *= r;
            ratio <= bound * (1.0 + 1e-12)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub start: TorusPoint,
    pub side: Side,
    pub ell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuPath {
    pub start: TorusPoint,
    pub legs: Vec<Leg>,
}

impl SuPath {
    pub fn new(start: TorusPoint) -> Self {
        Self { start, legs: Vec::new() }
    }

    pub fn from_legs(base: &AnosovBase, start: TorusPoint, legs: &[(Side, f64)]) -> Self {
        let mut p = Self::new(start);
        for &(side, ell) in legs {
            p.legs.push(Leg { start: p.end(base), side, ell });
        }
        p
    }

    /// Bracket 4-cycle `s ℓ, u ℓ, s −ℓ, u −ℓ` at `x`.
    pub fn bracket_cycle(base: &AnosovBase, x: TorusPoint, ell: f64) -> Self {
        Self::from_legs(
            base,
            x,
            &[(Side::Stable, ell), (Side::Unstable, ell), (Side::Stable, -ell), (Side::Unstable, -ell)],
        )
    }

    fn push(&mut self, base: &AnosovBase, side: Side, ell: f64, max_leg: f64) {
        if ell.abs() <= NEGLIGIBLE_LEG {
            return;
        }
        if let Some(last) = self.legs.last_mut() {
            if last.side == side && (last.ell + ell).abs() <= max_leg {
                last.ell += ell;
                if last.ell == 0.0 {
                    self.legs.pop();
                }
                return;
            }
        }
        let start = self.end(base);
        self.legs.push(Leg { start, side, ell });
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn end(&self, base: &AnosovBase) -> TorusPoint {
        match self.legs.last() {
            Some(l) => base.leaf_point(l.start, l.side, l.ell),
            None => self.start,
        }
    }

    /// Replays the legs from `start` and returns the largest mismatch with a recorded leg start,
    /// together with the replayed endpoint.
    pub fn replay(&self, base: &AnosovBase) -> (f64, TorusPoint) {
        let mut cur = self.start;
        let mut worst = 0.0f64;
        for l in &self.legs {
            worst = worst.max(cur.dist(&l.start));
            cur = base.leaf_point(cur, l.side, l.ell);
        }
        (worst, cur)
    }

    pub fn max_leg_length(&self) -> f64 {
        self.legs.iter().fold(0.0, |m, l| m.max(l.ell.abs()))
    }

    /// The same path traversed backwards.
    pub fn reversed(&self, base: &AnosovBase) -> Self {
        let end = self.end(base);
        let legs = self
            .legs
            .iter()
            .rev()
            .map(|l| Leg { start: base.leaf_point(l.start, l.side, l.ell), side: l.side, ell: -l.ell })
            .collect();
        Self { start: end, legs }
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&self, other: &SuPath) -> Self {
        let mut legs = self.legs.clone();
        legs.extend_from_slice(&other.legs);
        Self { start: self.start, legs }
    }

    /// Distance between endpoint and start.
    pub fn closure_gap(&self, base: &AnosovBase) -> f64 {
        self.end(base).dist(&self.start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cat_map_eigen_data() {
        let b = AnosovBase::cat_map();
        assert!((b.lambda_s() * b.lambda_u() - 1.0).abs() < 1e-12);
        assert!(b.eigen_residual() < 1e-12);
        assert!((b.lambda_s() - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hyperbolic() {
        assert!(AnosovBase::new([[1, 1], [0, 1]], 0.2).is_err());
        assert!(AnosovBase::new([[0, -1], [1, 0]], 0.2).is_err());
        assert!(AnosovBase::new([[2, 0], [0, 1]], 0.2).is_err());
    }

    #[test]
    fn apply_f_examples() {
        let b = AnosovBase::cat_map();
        for n in [-7, 0, 3, 40] {
            assert_eq!(b.apply_f(TorusPoint::ORIGIN, n), TorusPoint::ORIGIN);
        }
        // (2·1/2 + 1/2, 1/2 + 1/2) = (3/2, 1) mod 1
        assert_eq!(b.apply_f(TorusPoint::new(0.5, 0.5), 1), TorusPoint::new(0.5, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = TorusPoint::random(&mut rng);
            assert!(b.apply_f(b.apply_f(x, 3), -3).dist(&x) < 1e-12);
        }
    }

    #[test]
    fn negative_trace_and_orientation_reversing() {
        for m in [[[-2, 1], [1, -1]], [[1, 1], [1, 0]], [[3, 2], [1, 1]]] {
            let b = AnosovBase::new(m, 0.2).unwrap();
            assert!(b.eigen_residual() < 1e-12, "{m:?}");
            let x = TorusPoint::new(0.3, 0.1);
            let y = b.leaf_point(x, Side::Stable, 0.05);
            let d = b.apply_f(x, 1).dist(&b.apply_f(y, 1));
            assert!((d - 0.05 * b.lambda_s()).abs() < 1e-14);
            let inv = b.inverse();
            assert!((inv.lambda_s() - b.lambda_s()).abs() < 1e-14);
            assert!(b.apply_f(inv.apply_f(x, 4), 4).dist(&x) < 1e-12);
        }
    }

    #[test]
    fn shortest_breaks_ties_upward() {
        assert_eq!(shortest(0.5), 0.5);
        assert_eq!(shortest(-0.5), 0.5);
        assert!((shortest(0.7) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn bracket_examples() {
        let b = AnosovBase::cat_map();
        let x = TorusPoint::new(0.2, 0.9);
        let (y, a, c) = b.bracket(x, x).unwrap();
        assert_eq!((y, a, c), (x, 0.0, 0.0));
        let z = b.leaf_point(x, Side::Stable, 0.07);
        let (y, a, c) = b.bracket(x, z).unwrap();
        assert!(y.dist(&z) < 1e-15 && (a - 0.07).abs() < 1e-15 && c.abs() < 1e-15);
        assert!(b.bracket(TorusPoint::ORIGIN, TorusPoint::new(0.01, 0.0)).is_ok());
        assert!(matches!(
            b.bracket(TorusPoint::ORIGIN, TorusPoint::new(0.3, 0.0)),
            Err(Error::OutOfLocalRange { .. })
        ));
    }

    #[test]
    fn su_path_examples() {
        let b = AnosovBase::cat_map();
        let x = TorusPoint::new(0.1, 0.4);
        assert!(b.build_su_path(x, x, 0.2).unwrap().is_empty());
        let y = b.leaf_point(x, Side::Unstable, 0.15);
        let p = b.build_su_path(x, y, 0.2).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.legs[0].side, Side::Unstable);
        let y = TorusPoint::new(0.3, 0.7);
        let p = b.build_su_path(TorusPoint::ORIGIN, y, 0.2).unwrap();
        assert!(p.end(&b).dist(&y) < 1e-12);
        assert!(p.len() <= b.leg_bound(TorusPoint::ORIGIN, y, 0.2));
        assert!(p.max_leg_length() <= 0.2);
        let (mismatch, end) = p.replay(&b);
        assert!(mismatch < 1e-12 && end.dist(&y) < 1e-12);
    }

    #[test]
    fn contraction_examples() {
        let b = AnosovBase::cat_map();
        let x = TorusPoint::new(0.3, 0.6);
        let y = b.leaf_point(x, Side::Stable, 0.05);
        assert!(b.contraction_check(x, y, Side::Stable, 0));
        assert!(b.contraction_check(x, y, Side::Stable, 10));
        for r in b.contraction_ratios(x, y, Side::Stable, 10) {
            assert!((r - b.lambda_s()).abs() < 1e-12);
        }
        let yu = b.leaf_point(x, Side::Unstable, 0.05);
        assert!(b.contraction_check(x, yu, Side::Unstable, 10));
        assert!(!b.contraction_check(x, yu, Side::Stable, 1));
    }

    #[test]
    fn bracket_cycle_closes() {
        let b = AnosovBase::cat_map();
        let c = SuPath::bracket_cycle(&b, TorusPoint::new(0.4, 0.4), 0.1);
        assert!(c.closure_gap(&b) < 1e-15);
        let r = c.reversed(&b);
        assert_eq!(r.legs[0].side, Side::Unstable);
        assert!((r.legs[0].ell - 0.1).abs() < 1e-15);
    }
}
