//! Hyperbolic toral automorphisms on the 2-torus and their ergodic sums.
//!
//! Points are stored as doubles reduced with `x - floor(x)`. Orbits of a
//! chaotic map lose pointwise accuracy after a few dozen steps; statistics
//! over many orbits stay meaningful, and the homoclinic orbits (whose exact
//! values matter) are computed from their stable/unstable decomposition
//! instead of by iteration.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::TorusError;
use crate::mc::{self, Estimate};

/// Maximum orbit length for a single trajectory.
pub const MAX_ORBIT_LEN: usize = 10_000_000;

#[inline]
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // -1e-18 - floor(-1e-18) rounds to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x1: f64,
    x2: f64,
}

impl TorusPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self {
            x1: wrap_unit(x1),
            x2: wrap_unit(x2),
        }
    }

    pub fn origin() -> Self {
        Self { x1: 0.0, x2: 0.0 }
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(rng.random::<f64>(), rng.random::<f64>())
    }

    /// Euclidean distance on the flat torus to the nearest lattice translate of `other`.
    pub fn torus_distance(&self, other: &TorusPoint) -> f64 {
        let d = |a: f64, b: f64| {
            let t = (a - b).abs();
            t.min(1.0 - t)
        };
        d(self.x1, other.x1).hypot(d(self.x2, other.x2))
    }
}

/// An integer unimodular hyperbolic matrix acting on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 2]", into = "[[i64; 2]; 2]")]
pub struct ToralAutomorphism {
    a: i64,
    b: i64,
    c: i64,
    d: i64,
    /// Expanding eigenvalue (signed).
    mu_u: f64,
    /// Contracting eigenvalue (signed), `det / mu_u`.
    mu_s: f64,
    unstable_slope: f64,
    stable_slope: f64,
}

impl ToralAutomorphism {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self, TorusError> {
        let det = a * d - b * c;
        if det.abs() != 1 {
            return Err(TorusError::NotUnimodular { a, b, c, d, det });
        }
        let trace = a + d;
        // eigenvalues on the unit circle: |trace| <= 2 when det = 1, trace = 0 when det = -1
        if (det == 1 && trace.abs() <= 2) || (det == -1 && trace == 0) {
            return Err(TorusError::NotHyperbolic { trace });
        }
        // hyperbolic implies b != 0 (otherwise the eigenvalues are the integers a, d)
        let tr = trace as f64;
        let disc = ((trace * trace - 4 * det) as f64).sqrt();
        let mu_u = if trace > 0 { (tr + disc) / 2.0 } else { (tr - disc) / 2.0 };
        let mu_s = det as f64 / mu_u;
        let unstable_slope = (mu_u - a as f64) / b as f64;
        let stable_slope = (mu_s - a as f64) / b as f64;
        Ok(Self {
            a,
            b,
            c,
            d,
            mu_u,
            mu_s,
            unstable_slope,
            stable_slope,
        })
    }

    /// The matrix [[2, 1], [1, 1]].
    pub fn cat_map() -> Self {
        Self::new(2, 1, 1, 1).expect("cat map is hyperbolic")
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    /// Expanding eigenvalue modulus, > 1.
    pub fn lambda(&self) -> f64 {
        self.mu_u.abs()
    }

    pub fn unstable_eigenvalue(&self) -> f64 {
        self.mu_u
    }

    pub fn stable_eigenvalue(&self) -> f64 {
        self.mu_s
    }

    pub fn unstable_slope(&self) -> f64 {
        self.unstable_slope
    }

    pub fn stable_slope(&self) -> f64 {
        self.stable_slope
    }

    pub fn inverse(&self) -> Self {
        let det = self.det();
        Self::new(det * self.d, -det * self.b, -det * self.c, det * self.a)
            .expect("inverse of a hyperbolic automorphism is hyperbolic")
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d).expect("transpose is hyperbolic")
    }

    /// Linear action on the lift, no reduction.
    #[inline]
    pub fn apply_lift(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a as f64 * v[0] + self.b as f64 * v[1],
            self.c as f64 * v[0] + self.d as f64 * v[1],
        ]
    }

    #[inline]
    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        let v = self.apply_lift([p.x1, p.x2]);
        TorusPoint::new(v[0], v[1])
    }

    /// Action of the transpose on integer frequency vectors: `(k . A x) = (A^T k) . x`.
    pub fn transpose_on_frequency(&self, k: (i64, i64)) -> (i64, i64) {
        (self.a * k.0 + self.c * k.1, self.b * k.0 + self.d * k.1)
    }

    /// Orbit `p, A p, ..., A^{n-1} p`.
    pub fn orbit(&self, p: &TorusPoint, n: usize) -> Vec<TorusPoint> {
        let mut out = Vec::with_capacity(n);
        let mut x = *p;
        for _ in 0..n {
            out.push(x);
            x = self.apply(&x);
        }
        out
    }
}

impl TryFrom<[[i64; 2]; 2]> for ToralAutomorphism {
    type Error = TorusError;
    fn try_from(m: [[i64; 2]; 2]) -> Result<Self, Self::Error> {
        Self::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl From<ToralAutomorphism> for [[i64; 2]; 2] {
    fn from(m: ToralAutomorphism) -> Self {
        m.entries()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: (i64, i64),
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// A finite real trigonometric polynomial on the torus without constant term:
/// `f(x) = sum c cos(2 pi k.x) + s sin(2 pi k.x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TrigTerm>", into = "Vec<TrigTerm>")]
pub struct TrigObservable {
    terms: Vec<TrigTerm>,
}

impl TrigObservable {
    pub fn new(terms: Vec<TrigTerm>) -> Result<Self, TorusError> {
        if terms.iter().any(|t| t.freq == (0, 0)) {
            return Err(TorusError::NotCentered);
        }
        if terms.iter().any(|t| !t.cos.is_finite() || !t.sin.is_finite()) {
            return Err(TorusError::InvalidArgument("non-finite coefficient".into()));
        }
        let mut obs = Self { terms: Vec::new() };
        for t in terms {
            obs.add_term(t);
        }
        Ok(obs)
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `sin(2 pi x1)`.
    pub fn sin_x1() -> Self {
        Self::new(vec![TrigTerm {
            freq: (1, 0),
            cos: 0.0,
            sin: 1.0,
        }])
        .unwrap()
    }

    /// Merges `t` into the term list, folding `-k` onto `k`.
    fn add_term(&mut self, t: TrigTerm) {
        let (k, c, s) = canonical(t);
        if let Some(existing) = self.terms.iter_mut().find(|e| e.freq == k) {
            existing.cos += c;
            existing.sin += s;
        } else {
            self.terms.push(TrigTerm { freq: k, cos: c, sin: s });
        }
        self.terms.retain(|e| e.cos != 0.0 || e.sin != 0.0);
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Always true for a constructed value; kept as an explicit check for callers.
    pub fn is_centered(&self) -> bool {
        self.terms.iter().all(|t| t.freq != (0, 0))
    }

    #[inline]
    pub fn eval(&self, p: &TorusPoint) -> f64 {
        self.eval_lift(p.x1, p.x2)
    }

    #[inline]
    pub fn eval_lift(&self, x1: f64, x2: f64) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let phase = TAU * wrap_unit(t.freq.0 as f64 * x1 + t.freq.1 as f64 * x2);
            let (s, c) = phase.sin_cos();
            acc += t.cos * c + t.sin * s;
        }
        acc
    }

    /// Lipschitz constant with respect to the flat metric.
    pub fn lipschitz(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                TAU * (t.freq.0 as f64).hypot(t.freq.1 as f64) * t.cos.hypot(t.sin)
            })
            .sum()
    }

    /// Sup norm bound `sum sqrt(c^2 + s^2)`.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.hypot(t.sin)).sum()
    }

    /// `f o A`, exactly, as another trigonometric polynomial.
    pub fn compose(&self, m: &ToralAutomorphism) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            out.add_term(TrigTerm {
                freq: m.transpose_on_frequency(t.freq),
                cos: t.cos,
                sin: t.sin,
            });
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            out.add_term(TrigTerm {
                freq: t.freq,
                cos: t.cos * factor,
                sin: t.sin * factor,
            });
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for t in &other.terms {
            out.add_term(*t);
        }
        out
    }

    /// The coboundary `g o A - g`.
    pub fn coboundary(g: &Self, m: &ToralAutomorphism) -> Self {
        g.compose(m).plus(&g.scaled(-1.0))
    }
}

fn canonical(t: TrigTerm) -> ((i64, i64), f64, f64) {
    let (k1, k2) = t.freq;
    if k1 < 0 || (k1 == 0 && k2 < 0) {
        // cos(-a) = cos a, sin(-a) = -sin a
        ((-k1, -k2), t.cos, -t.sin)
    } else {
        ((k1, k2), t.cos, t.sin)
    }
}

impl TryFrom<Vec<TrigTerm>> for TrigObservable {
    type Error = TorusError;
    fn try_from(v: Vec<TrigTerm>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<TrigObservable> for Vec<TrigTerm> {
    fn from(o: TrigObservable) -> Self {
        o.terms
    }
}

pub fn apply_automorphism(m: &ToralAutomorphism, p: &TorusPoint) -> TorusPoint {
    m.apply(p)
}

/// `S_n f(p) = sum_{k<n} f(A^k p)`; `S_0 = 0`.
pub fn ergodic_sum(m: &ToralAutomorphism, f: &TrigObservable, p: &TorusPoint, n: usize) -> f64 {
    let mut x = *p;
    let mut s = 0.0;
    for _ in 0..n {
        s += f.eval(&x);
        x = m.apply(&x);
    }
    s
}

/// Prefix sums `S_0, S_1, ..., S_n` along the orbit of `p`.
pub fn ergodic_sums(m: &ToralAutomorphism, f: &TrigObservable, p: &TorusPoint, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = *p;
    let mut s = 0.0;
    out.push(0.0);
    for _ in 0..n {
        s += f.eval(&x);
        out.push(s);
        x = m.apply(&x);
    }
    out
}

/// Monte Carlo Green-Kubo sum `int f^2 + 2 sum_{k=1}^{k_max} <f, f o A^k>` under Lebesgue measure.
pub fn green_kubo_sigma2(
    m: &ToralAutomorphism,
    f: &TrigObservable,
    k_max: usize,
    samples: usize,
    seed: u64,
) -> Result<Estimate, TorusError> {
    if k_max < 1 || samples < 1 {
        return Err(TorusError::InvalidArgument("k_max and samples must be >= 1".into()));
    }
    if !f.is_centered() {
        return Err(TorusError::NotCentered);
    }
    if f.is_zero() {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let per_sample = mc::par_samples(seed, samples, |_, rng| {
        let x0 = TorusPoint::uniform(rng);
        let f0 = f.eval(&x0);
        let mut x = x0;
        let mut cross = 0.0;
        for _ in 0..k_max {
            x = m.apply(&x);
            cross += f.eval(&x);
        }
        f0 * f0 + 2.0 * f0 * cross
    });
    Ok(Estimate::from_samples(&per_sample))
}

/// Exact Green-Kubo variance of a trigonometric polynomial, computed in frequency space.
///
/// `<f, f o A^k>` only pairs frequencies `k` and `(A^T)^k k'` that coincide up to sign; hyperbolic
/// orbits of nonzero frequencies grow geometrically, so the sum is finite and exact.
pub fn green_kubo_sigma2_exact(m: &ToralAutomorphism, f: &TrigObservable) -> f64 {
    let inner = |g: &TrigObservable, h: &TrigObservable| -> f64 {
        let mut s = 0.0;
        for a in g.terms() {
            for b in h.terms() {
                if a.freq == b.freq {
                    s += 0.5 * (a.cos * b.cos + a.sin * b.sin);
                }
            }
        }
        s
    };
    let max_freq = f
        .terms()
        .iter()
        .map(|t| t.freq.0.abs().max(t.freq.1.abs()))
        .max()
        .unwrap_or(0) as f64;
    // once every frequency of f o A^k exceeds those of f by far, no further overlap is possible
    let horizon = ((max_freq.max(1.0) * 4.0).ln() / m.lambda().ln()).ceil() as usize + 8;
    let mut total = inner(f, f);
    let mut g = f.clone();
    for _ in 0..horizon {
        g = g.compose(m);
        total += 2.0 * inner(f, &g);
    }
    total
}

/// The two homoclinic points of the origin, lifted to the plane, with their stable and
/// unstable displacements from lattice points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicPair {
    pub x0_tilde: [f64; 2],
    pub xm1_tilde: [f64; 2],
    /// `x0_tilde - (1, 0)`, on the stable line.
    x0_stable: [f64; 2],
    /// `x0_tilde - (1, 1)`, on the unstable line.
    x0_unstable: [f64; 2],
    xm1_stable: [f64; 2],
    xm1_unstable: [f64; 2],
    mu_u: f64,
    mu_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomoclinicBranch {
    X0,
    Xm1,
}

impl HomoclinicPair {
    /// `A^k x~ mod 1` for any integer `k`, via the stable part for `k >= 0` and the
    /// unstable part for `k < 0`.
    pub fn orbit_point(&self, branch: HomoclinicBranch, k: i64) -> TorusPoint {
        let (st, un) = match branch {
            HomoclinicBranch::X0 => (self.x0_stable, self.x0_unstable),
            HomoclinicBranch::Xm1 => (self.xm1_stable, self.xm1_unstable),
        };
        let (v, factor) = if k >= 0 {
            (st, self.mu_s.powi(k as i32))
        } else {
            (un, self.mu_u.powi(k as i32))
        };
        TorusPoint::new(v[0] * factor, v[1] * factor)
    }

    /// Bound `C` such that the distance of either orbit to the origin is at most `C lambda^{-|k|}`.
    pub fn decay_constant(&self) -> f64 {
        let n = |v: [f64; 2]| v[0].hypot(v[1]);
        n(self.x0_stable)
            .max(n(self.x0_unstable))
            .max(n(self.xm1_stable))
            .max(n(self.xm1_unstable))
    }
}

/// Intersects the stable line through `p` with the unstable line through `q`.
fn intersect(stable_slope: f64, p: [f64; 2], unstable_slope: f64, q: [f64; 2]) -> Result<[f64; 2], TorusError> {
    // p + t (1, s) = q + r (1, u)
    let denom = stable_slope - unstable_slope;
    if denom.abs() < 1e-14 {
        return Err(TorusError::NotHyperbolic { trace: 2 });
    }
    // first coordinate: p0 + t = q0 + r; second: p1 + t s = q1 + r u
    // r = p0 - q0 + t  =>  t (s - u) = q1 - p1 + u (p0 - q0)
    let t = (q[1] - p[1] + unstable_slope * (p[0] - q[0])) / denom;
    Ok([p[0] + t, p[1] + t * stable_slope])
}

pub fn homoclinic_points(m: &ToralAutomorphism) -> Result<HomoclinicPair, TorusError> {
    let s = m.stable_slope();
    let u = m.unstable_slope();
    let x0 = intersect(s, [1.0, 0.0], u, [1.0, 1.0])?;
    let xm1 = intersect(s, [1.0, -1.0], u, [1.0, 1.0])?;
    Ok(HomoclinicPair {
        x0_tilde: x0,
        xm1_tilde: xm1,
        x0_stable: [x0[0] - 1.0, x0[1]],
        x0_unstable: [x0[0] - 1.0, x0[1] - 1.0],
        xm1_stable: [xm1[0] - 1.0, xm1[1] + 1.0],
        xm1_unstable: [xm1[0] - 1.0, xm1[1] - 1.0],
        mu_u: m.unstable_eigenvalue(),
        mu_s: m.stable_eigenvalue(),
    })
}

/// Truncated homoclinic sum and a geometric bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicSum {
    pub value: f64,
    pub tail_bound: f64,
}

/// `sum_{k=-K}^{K} (f(A^k x~_0) - f(A^k x~_{-1}))`.
pub fn homoclinic_sum(m: &ToralAutomorphism, f: &TrigObservable, k_max: usize) -> Result<HomoclinicSum, TorusError> {
    if k_max < 1 {
        return Err(TorusError::InvalidArgument("K must be >= 1".into()));
    }
    if f.is_zero() {
        return Ok(HomoclinicSum {
            value: 0.0,
            tail_bound: 0.0,
        });
    }
    let pair = homoclinic_points(m)?;
    let k = k_max as i64;
    let terms: Vec<f64> = (-k..=k)
        .map(|j| {
            f.eval(&pair.orbit_point(HomoclinicBranch::X0, j))
                - f.eval(&pair.orbit_point(HomoclinicBranch::Xm1, j))
        })
        .collect();
    let lambda = m.lambda();
    // each omitted term on either side is at most Lip * 2C * lambda^{-|j|}
    let tail = 2.0 * 2.0 * f.lipschitz() * pair.decay_constant() * lambda.powi(-(k as i32 + 1))
        / (1.0 - 1.0 / lambda);
    Ok(HomoclinicSum {
        value: mc::pairwise_sum(&terms),
        tail_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cat_map_fixes_origin() {
        let a = ToralAutomorphism::cat_map();
        assert_eq!(a.apply(&TorusPoint::origin()), TorusPoint::origin());
    }

    #[test]
    fn cat_map_direct_arithmetic() {
        let a = ToralAutomorphism::cat_map();
        let p = a.apply(&TorusPoint::new(0.5, 0.25));
        assert!(close(p.x1(), 0.25, 1e-15) && close(p.x2(), 0.75, 1e-15));
    }

    #[test]
    fn eigen_structure_of_cat_map() {
        let a = ToralAutomorphism::cat_map();
        let sqrt5 = 5f64.sqrt();
        assert!(close(a.lambda(), (3.0 + sqrt5) / 2.0, 1e-15));
        assert!(close(a.unstable_slope(), (sqrt5 - 1.0) / 2.0, 1e-15));
        assert!(close(a.stable_slope(), -(1.0 + sqrt5) / 2.0, 1e-15));
        for (slope, mu) in [
            (a.unstable_slope(), a.unstable_eigenvalue()),
            (a.stable_slope(), a.stable_eigenvalue()),
        ] {
            let v = a.apply_lift([1.0, slope]);
            assert!(close(v[0], mu, 1e-12) && close(v[1], mu * slope, 1e-12));
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(
            ToralAutomorphism::new(2, 0, 0, 1),
            Err(TorusError::NotUnimodular { .. })
        ));
        assert!(matches!(
            ToralAutomorphism::new(1, 1, 0, 1),
            Err(TorusError::NotHyperbolic { .. })
        ));
        assert!(matches!(
            ToralAutomorphism::new(0, 1, 1, 0),
            Err(TorusError::NotHyperbolic { trace: 0 })
        ));
        // det -1 with trace 1: eigenvalues (1 +- sqrt 5) / 2
        let g = ToralAutomorphism::new(1, 1, 1, 0).unwrap();
        assert!((g.lambda() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(homoclinic_points(&g).is_ok());
        let m = ToralAutomorphism::new(3, 1, 1, 0).unwrap();
        assert_eq!(m.det(), -1);
        assert!(m.lambda() > 1.0);
    }

    #[test]
    fn inverse_is_explicit() {
        let inv = ToralAutomorphism::cat_map().inverse();
        assert_eq!(inv.entries(), [[1, -1], [-1, 2]]);
    }

    #[test]
    fn trig_observable_rejects_constant_term() {
        let err = TrigObservable::new(vec![TrigTerm {
            freq: (0, 0),
            cos: 1.0,
            sin: 0.0,
        }]);
        assert_eq!(err, Err(TorusError::NotCentered));
    }

    #[test]
    fn ergodic_sum_base_cases() {
        let a = ToralAutomorphism::cat_map();
        let f = TrigObservable::sin_x1();
        assert_eq!(ergodic_sum(&a, &f, &TorusPoint::new(0.3, 0.7), 0), 0.0);
        assert!(close(ergodic_sum(&a, &f, &TorusPoint::new(0.25, 0.1), 1), 1.0, 1e-15));
    }

    #[test]
    fn ergodic_sum_matches_unrolled_loop() {
        let a = ToralAutomorphism::cat_map();
        let f = TrigObservable::sin_x1();
        // hand-unrolled: (x1, x2) -> (2 x1 + x2, x1 + x2) mod 1
        let (mut x1, mut x2) = (0.1f64, 0.2f64);
        let mut expected = 0.0;
        for _ in 0..5 {
            expected += (TAU * x1).sin();
            let n1 = (2.0 * x1 + x2).rem_euclid(1.0);
            let n2 = (x1 + x2).rem_euclid(1.0);
            x1 = n1;
            x2 = n2;
        }
        let got = ergodic_sum(&a, &f, &TorusPoint::new(0.1, 0.2), 5);
        assert!(close(got, expected, 1e-12), "{got} vs {expected}");
    }

    #[test]
    fn green_kubo_of_zero_is_zero() {
        let a = ToralAutomorphism::cat_map();
        let e = green_kubo_sigma2(&a, &TrigObservable::zero(), 10, 100, 1).unwrap();
        assert_eq!(e, Estimate::new(0.0, 0.0));
    }

    #[test]
    fn green_kubo_sin_is_one_half() {
        let a = ToralAutomorphism::cat_map();
        let f = TrigObservable::sin_x1();
        let e = green_kubo_sigma2(&a, &f, 20, 20_000, 3).unwrap();
        assert!(e.stderr > 0.0);
        assert!(e.within(0.5, 3.0), "{e:?}");
        assert!(close(green_kubo_sigma2_exact(&a, &f), 0.5, 1e-15));
    }

    #[test]
    fn green_kubo_of_coboundary_vanishes() {
        let a = ToralAutomorphism::cat_map();
        let g = TrigObservable::sin_x1();
        let f = TrigObservable::coboundary(&g, &a);
        // f o A^k pairs with f only for k = 0, 1: 1 + 2 * (-1/2)
        assert!(close(green_kubo_sigma2_exact(&a, &f), 0.0, 1e-15));
        let e = green_kubo_sigma2(&a, &f, 20, 20_000, 4).unwrap();
        assert!(e.within(0.0, 3.0), "{e:?}");
        // telescoping: S_n f = g(A^n x) - g(x)
        let p = TorusPoint::new(0.37, 0.81);
        let s = ergodic_sum(&a, &f, &p, 7);
        let tele = g.eval(&a.orbit(&p, 8)[7]) - g.eval(&p);
        assert!(close(s, tele, 1e-10));
    }

    #[test]
    fn sin_is_orthogonal_to_its_iterates() {
        let a = ToralAutomorphism::cat_map();
        let f = TrigObservable::sin_x1();
        let samples = 20_000;
        for k in 1..=20usize {
            let vals = mc::par_samples(100 + k as u64, samples, |_, rng| {
                let x = TorusPoint::uniform(rng);
                let y = a.orbit(&x, k + 1)[k];
                f.eval(&x) * f.eval(&y)
            });
            let e = Estimate::from_samples(&vals);
            assert!(e.within(0.0, 3.5), "lag {k}: {e:?}");
        }
    }

    /// Generic 2x2 solve by Cramer's rule.
    fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            (r[0] * m[1][1] - m[0][1] * r[1]) / det,
            (m[0][0] * r[1] - r[0] * m[1][0]) / det,
        ]
    }

    #[test]
    fn homoclinic_points_of_cat_map() {
        let a = ToralAutomorphism::cat_map();
        let pair = homoclinic_points(&a).unwrap();
        let (s, u) = (a.stable_slope(), a.unstable_slope());
        // y - s x = -s (stable through (1,0)); y - u x = 1 - u (unstable through (1,1))
        let x0 = solve2([[-s, 1.0], [-u, 1.0]], [-s, 1.0 - u]);
        assert!(close(pair.x0_tilde[0], x0[0], 1e-12) && close(pair.x0_tilde[1], x0[1], 1e-12));
        assert!(close(x0[0], 0.552786, 1e-6) && close(x0[1], 0.723607, 1e-6));
        let xm1 = solve2([[-s, 1.0], [-u, 1.0]], [-1.0 - s, 1.0 - u]);
        assert!(close(pair.xm1_tilde[0], xm1[0], 1e-12) && close(pair.xm1_tilde[1], xm1[1], 1e-12));
        let [x, y] = pair.xm1_tilde;
        assert!((y - (-1.0 + s * (x - 1.0))).abs() <= 1e-12);
        assert!((y - (1.0 + u * (x - 1.0))).abs() <= 1e-12);
    }

    /// Numbers `(p + q sqrt5) / 10` with exact integer parts.
    #[derive(Clone, Copy)]
    struct QSqrt5 {
        p: i128,
        q: i128,
    }

    impl QSqrt5 {
        /// Signed distance to the nearest integer, evaluated through the conjugate to avoid
        /// cancellation: `p' + q sqrt5 = (p'^2 - 5 q^2) / (p' - q sqrt5)`.
        fn dist_to_integer(&self) -> f64 {
            let approx = (self.p as f64 + self.q as f64 * 5f64.sqrt()) / 10.0;
            let m = approx.round() as i128;
            let pp = self.p - 10 * m;
            let num = pp * pp - 5 * self.q * self.q;
            let den = pp as f64 - self.q as f64 * 5f64.sqrt();
            (num as f64 / den / 10.0).abs()
        }
    }

    #[test]
    fn homoclinic_orbit_decays_geometrically_exact_arithmetic() {
        let a = ToralAutomorphism::cat_map();
        let pair = homoclinic_points(&a).unwrap();
        let lambda = a.lambda();
        // x0 = ((10 - 2 sqrt5)/10, (5 + sqrt5)/10); iterate A exactly on Z[sqrt5]/10
        let mut v = [QSqrt5 { p: 10, q: -2 }, QSqrt5 { p: 5, q: 1 }];
        let approx = [(10.0 - 2.0 * 5f64.sqrt()) / 10.0, (5.0 + 5f64.sqrt()) / 10.0];
        assert!(close(approx[0], pair.x0_tilde[0], 1e-15) && close(approx[1], pair.x0_tilde[1], 1e-15));
        for k in 1..=30 {
            v = [
                QSqrt5 { p: 2 * v[0].p + v[1].p, q: 2 * v[0].q + v[1].q },
                QSqrt5 { p: v[0].p + v[1].p, q: v[0].q + v[1].q },
            ];
            let exact = v[0].dist_to_integer().hypot(v[1].dist_to_integer());
            let got = pair
                .orbit_point(HomoclinicBranch::X0, k)
                .torus_distance(&TorusPoint::origin());
            let bound = pair.decay_constant() * lambda.powi(-k as i32);
            assert!(exact <= bound * (1.0 + 1e-9), "k={k}: {exact} > {bound}");
            assert!((got - exact).abs() <= 1e-15, "k={k}: {got} vs {exact}");
        }
    }

    #[test]
    fn homoclinic_sum_of_zero() {
        let a = ToralAutomorphism::cat_map();
        let h = homoclinic_sum(&a, &TrigObservable::zero(), 40).unwrap();
        assert_eq!((h.value, h.tail_bound), (0.0, 0.0));
    }

    #[test]
    fn homoclinic_sum_converges_and_is_nonzero_for_sin() {
        let a = ToralAutomorphism::cat_map();
        let f = TrigObservable::sin_x1();
        let h40 = homoclinic_sum(&a, &f, 40).unwrap();
        let h50 = homoclinic_sum(&a, &f, 50).unwrap();
        assert!((h40.value - h50.value).abs() <= 1e-8);
        assert!(h40.value.abs() > 10.0 * h40.tail_bound, "{h40:?}");
        for k in [5usize, 10, 20] {
            let hk = homoclinic_sum(&a, &f, k).unwrap();
            let href = homoclinic_sum(&a, &f, k + 20).unwrap();
            assert!((hk.value - href.value).abs() <= hk.tail_bound, "K={k}");
        }
    }

    proptest! {
        #[test]
        fn inverse_round_trip(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
            let a = ToralAutomorphism::cat_map();
            let p = TorusPoint::new(x1, x2);
            let q = a.inverse().apply(&a.apply(&p));
            prop_assert!(q.torus_distance(&p) <= 1e-12);
        }

        #[test]
        fn cocycle_law(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, m in 0usize..100, n in 0usize..100) {
            let a = ToralAutomorphism::cat_map();
            let f = TrigObservable::sin_x1();
            let p = TorusPoint::new(x1, x2);
            let lhs = ergodic_sum(&a, &f, &p, m + n);
            let am = a.orbit(&p, m + 1)[m];
            let rhs = ergodic_sum(&a, &f, &p, m) + ergodic_sum(&a, &f, &am, n);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn points_stay_in_unit_square(x1 in -1e6f64..1e6, x2 in -1e6f64..1e6) {
            let p = TorusPoint::new(x1, x2);
            prop_assert!((0.0..1.0).contains(&p.x1()) && (0.0..1.0).contains(&p.x2()));
        }
    }
}
