//! Occupation counts, random walk in random scenery, Brownian local time and samplers
//! for the limit `int L_1(x) dW_+(x) + int L_1(-x) dW_-(x)`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, SceneryError};
use crate::fiber::{FlowLine, Frame};
use crate::mc::{self, standard_normal};
use crate::skew::{SkewObservable, SkewState, SkewSystem};
use crate::stats::EmpiricalLaw;
use crate::torus::{ergodic_sums, TorusPoint};

/// `N(n, p) = #{k < n : S_k f in [p, p + 1)}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub n: usize,
    pub counts: BTreeMap<i64, u64>,
}

impl OccupationProfile {
    pub fn from_sums(sums: &[f64]) -> Self {
        let mut counts = BTreeMap::new();
        for &s in sums {
            *counts.entry(s.floor() as i64).or_insert(0) += 1;
        }
        Self { n: sums.len(), counts }
    }

    pub fn get(&self, p: i64) -> u64 {
        self.counts.get(&p).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Bins `S_0, ..., S_{n-1}` of the roof along the base orbit of `x`.
pub fn occupation_counts(sys: &SkewSystem, x: &TorusPoint, n: usize) -> OccupationProfile {
    let sums = ergodic_sums(sys.automorphism(), sys.roof(), x, n.saturating_sub(1));
    OccupationProfile::from_sums(&sums[..n.min(sums.len())])
}

/// Walk step law and scenery variance of a random walk in random scenery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneryConfig {
    /// Integer steps with their probabilities.
    pub walk_support: Vec<(i64, f64)>,
    /// Variance of the centered Gaussian scenery values.
    pub scenery_variance: f64,
}

impl SceneryConfig {
    /// Lazy nearest-neighbour walk with the requested step variance: `P(+-m) = v / (2 m^2)`,
    /// `P(0) = 1 - v / m^2`, using the smallest integer `m` with `m^2 >= v`.
    pub fn lazy(walk_variance: f64, scenery_variance: f64) -> Result<Self, SceneryError> {
        if !(walk_variance > 0.0 && walk_variance.is_finite()) {
            return Err(SceneryError::InvalidArgument(format!("walk variance {walk_variance} must be > 0")));
        }
        if !(scenery_variance >= 0.0 && scenery_variance.is_finite()) {
            return Err(SceneryError::InvalidArgument(format!(
                "scenery variance {scenery_variance} must be >= 0"
            )));
        }
        let m = walk_variance.sqrt().ceil().max(1.0);
        let p = walk_variance / (2.0 * m * m);
        let mi = m as i64;
        let mut walk_support = vec![(-mi, p), (mi, p)];
        if 1.0 - 2.0 * p > 0.0 {
            walk_support.insert(1, (0, 1.0 - 2.0 * p));
        }
        Ok(Self {
            walk_support,
            scenery_variance,
        })
    }

    pub fn walk_variance(&self) -> f64 {
        self.walk_support.iter().map(|&(s, p)| p * (s * s) as f64).sum()
    }

    pub fn walk_mean(&self) -> f64 {
        self.walk_support.iter().map(|&(s, p)| p * s as f64).sum()
    }

    pub fn validate(&self) -> Result<(), SceneryError> {
        let total: f64 = self.walk_support.iter().map(|p| p.1).sum();
        if self.walk_support.is_empty() || self.walk_support.iter().any(|p| !(p.1 >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(SceneryError::InvalidArgument("walk probabilities must be >= 0 and sum to 1".into()));
        }
        if self.walk_mean().abs() > 1e-12 {
            return Err(SceneryError::InvalidArgument("walk steps must be centered".into()));
        }
        if !(self.scenery_variance >= 0.0) {
            return Err(SceneryError::InvalidArgument("scenery variance must be >= 0".into()));
        }
        Ok(())
    }

    #[inline]
    fn draw_step<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(s, p) in &self.walk_support {
            acc += p;
            if u < acc {
                return s;
            }
        }
        self.walk_support.last().map_or(0, |p| p.0)
    }
}

/// Recorded draws of one random-walk-in-scenery sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwrsTrace {
    pub steps: Vec<i64>,
    pub scenery: BTreeMap<i64, f64>,
    pub value: f64,
}

/// Scenery generated on first visit; sites live in a vector indexed from `-offset`.
struct LazyScenery {
    offset: i64,
    values: Vec<f64>,
    seen: Vec<bool>,
    std: f64,
}

impl LazyScenery {
    fn new(reach: i64, std: f64) -> Self {
        let len = (2 * reach + 1) as usize;
        Self {
            offset: reach,
            values: vec![0.0; len],
            seen: vec![false; len],
            std,
        }
    }

    #[inline]
    fn at<R: Rng + ?Sized>(&mut self, site: i64, rng: &mut R) -> f64 {
        let i = (site + self.offset) as usize;
        if !self.seen[i] {
            self.values[i] = self.std * standard_normal(rng);
            self.seen[i] = true;
        }
        self.values[i]
    }
}

fn rwrs_run<R: Rng + ?Sized>(cfg: &SceneryConfig, n: usize, rng: &mut R, mut record: Option<&mut RwrsTrace>) -> f64 {
    let reach = cfg.walk_support.iter().map(|p| p.0.abs()).max().unwrap_or(1) * n as i64;
    let mut scenery = LazyScenery::new(reach, cfg.scenery_variance.sqrt());
    let mut pos = 0i64;
    let mut acc = 0.0;
    for k in 0..n {
        if k > 0 {
            let s = cfg.draw_step(rng);
            pos += s;
            if let Some(r) = record.as_deref_mut() {
                r.steps.push(s);
            }
        }
        let xi = scenery.at(pos, rng);
        if let Some(r) = record.as_deref_mut() {
            r.scenery.insert(pos, xi);
        }
        acc += xi;
    }
    acc * (n as f64).powf(-0.75)
}

/// `n^{-3/4} sum_{k<n} xi_{X_1 + ... + X_k}` with the walk started at 0.
pub fn rwrs_sample(cfg: &SceneryConfig, n: usize, seed: u64) -> f64 {
    rwrs_run(cfg, n, &mut mc::stream(seed, 0), None)
}

pub fn rwrs_trace(cfg: &SceneryConfig, n: usize, seed: u64) -> RwrsTrace {
    let mut t = RwrsTrace {
        steps: Vec::with_capacity(n),
        scenery: BTreeMap::new(),
        value: 0.0,
    };
    t.value = rwrs_run(cfg, n, &mut mc::stream(seed, 0), Some(&mut t));
    t
}

/// `samples` independent draws of [`rwrs_sample`] on streams `(seed, i)`.
pub fn rwrs_law(cfg: &SceneryConfig, n: usize, samples: usize, seed: u64) -> Result<EmpiricalLaw, SceneryError> {
    cfg.validate()?;
    if n == 0 || samples == 0 {
        return Err(SceneryError::InvalidArgument("n and samples must be >= 1".into()));
    }
    let values = mc::par_samples(seed, samples, |_, rng| rwrs_run(cfg, n, rng, None));
    EmpiricalLaw::new(values, n, 0.75, seed).map_err(|e| SceneryError::InvalidArgument(e.to_string()))
}

/// Occupation density on a uniform grid: bin `i` covers `[origin + i dx, origin + (i + 1) dx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeProfile {
    pub origin: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl LocalTimeProfile {
    pub fn total_mass(&self) -> f64 {
        self.dx * self.values.iter().sum::<f64>()
    }

    /// `int L^2 dx` of the histogram density.
    pub fn l2_squared(&self) -> f64 {
        self.dx * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    /// Left edge of bin `i`.
    pub fn bin_left(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx
    }
}

/// Occupation measure of a path sampled at equal times on `[0, 1]`: each of the first
/// `len - 1` points carries time `1 / (len - 1)`. Bins are aligned to multiples of `dx`.
pub fn local_time(path: &[f64], dx: f64) -> Result<LocalTimeProfile, SceneryError> {
    if path.len() < 2 {
        return Err(SceneryError::PathTooShort(path.len()));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(SceneryError::InvalidArgument(format!("bin width {dx} must be > 0")));
    }
    let pts = &path[..path.len() - 1];
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = hi - lo;
    if range > 0.0 && dx > range {
        return Err(SceneryError::BinTooWide { dx, range });
    }
    let first = (lo / dx).floor() as i64;
    let last = (hi / dx).floor() as i64;
    let mut values = vec![0.0; (last - first + 1) as usize];
    let w = 1.0 / (pts.len() as f64 * dx);
    for &x in pts {
        values[((x / dx).floor() as i64 - first) as usize] += w;
    }
    Ok(LocalTimeProfile {
        origin: first as f64 * dx,
        dx,
        values,
    })
}

/// Brownian path on `[0, 1]` with variance `sigma^2` per unit time, `1 / dt` steps.
pub fn brownian_path<R: Rng + ?Sized>(sigma: f64, dt: f64, rng: &mut R) -> Vec<f64> {
    let steps = (1.0 / dt).round().max(1.0) as usize;
    let sd = sigma * (1.0 / steps as f64).sqrt();
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = 0.0;
    path.push(x);
    for _ in 0..steps {
        x += sd * standard_normal(rng);
        path.push(x);
    }
    path
}

/// Resolution of the limit-law sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitGrid {
    pub dx: f64,
    pub dt: f64,
}

impl Default for LimitGrid {
    fn default() -> Self {
        Self { dx: 0.02, dt: 1e-4 }
    }
}

fn ks_limit_draw<R: Rng + ?Sized>(sigma: f64, sigma2_capital: f64, grid: LimitGrid, rng: &mut R) -> f64 {
    let path = brownian_path(sigma, grid.dt, rng);
    // dx is far below the path range except with negligible probability; fall back to
    // the path range so the draw is always defined
    let lt = match local_time(&path, grid.dx) {
        Ok(lt) => lt,
        Err(SceneryError::BinTooWide { range, .. }) => local_time(&path, range).expect("dx equals range"),
        Err(e) => unreachable!("{e}"),
    };
    // one normal per bin: bins at x >= 0 carry increments of W_+, bins at x < 0 of W_-
    let sd = (sigma2_capital * lt.dx).sqrt();
    let mut acc = 0.0;
    for &l in &lt.values {
        acc += l * sd * standard_normal(rng);
    }
    acc
}

/// One draw of `int_0^inf L_1(x) dW_+(x) + int_0^inf L_1(-x) dW_-(x)`, where the driving
/// Brownian motion has variance `sigma^2` per unit time and `W_+-` have variance
/// `sigma2_capital` per unit length.
pub fn ks_limit_sample(sigma: f64, sigma2_capital: f64, grid: LimitGrid, seed: u64) -> Result<f64, SceneryError> {
    check_limit_args(sigma, sigma2_capital, grid)?;
    Ok(ks_limit_draw(sigma, sigma2_capital, grid, &mut mc::stream(seed, 0)))
}

pub fn ks_limit_law(
    sigma: f64,
    sigma2_capital: f64,
    grid: LimitGrid,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalLaw, SceneryError> {
    check_limit_args(sigma, sigma2_capital, grid)?;
    if samples == 0 {
        return Err(SceneryError::InvalidArgument("samples must be >= 1".into()));
    }
    let values = mc::par_samples(seed, samples, |_, rng| ks_limit_draw(sigma, sigma2_capital, grid, rng));
    EmpiricalLaw::new(values, 0, 0.75, seed).map_err(|e| SceneryError::InvalidArgument(e.to_string()))
}

fn check_limit_args(sigma: f64, sigma2_capital: f64, grid: LimitGrid) -> Result<(), SceneryError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SceneryError::InvalidArgument(format!("sigma {sigma} must be > 0")));
    }
    if !(sigma2_capital >= 0.0 && sigma2_capital.is_finite()) {
        return Err(SceneryError::InvalidArgument(format!("Sigma^2 {sigma2_capital} must be >= 0")));
    }
    if !(grid.dx > 0.0 && grid.dt > 0.0 && grid.dt <= 1.0) {
        return Err(SceneryError::InvalidArgument(format!("bad grid {grid:?}")));
    }
    Ok(())
}

/// Variance of the limit law: `(8/3) Sigma^2 / (sqrt(2 pi) sigma)`.
pub fn limit_variance(sigma: f64, sigma2_capital: f64) -> f64 {
    8.0 / 3.0 * sigma2_capital / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, 16 points.
pub fn gauss_legendre_16() -> [(f64, f64); 16] {
    // nodes and weights on [-1, 1], positive half
    const X: [f64; 8] = [
        0.095_012_509_837_637_44,
        0.281_603_550_779_258_9,
        0.458_016_777_657_227_4,
        0.617_876_244_402_643_8,
        0.755_404_408_355_003,
        0.865_631_202_387_831_7,
        0.944_575_023_073_232_6,
        0.989_400_934_991_649_9,
    ];
    const W: [f64; 8] = [
        0.189_450_610_455_068_5,
        0.182_603_415_044_923_6,
        0.169_156_519_395_002_5,
        0.149_595_988_816_576_7,
        0.124_628_971_255_533_9,
        0.095_158_511_682_492_78,
        0.062_253_523_938_647_89,
        0.027_152_459_411_754_09,
    ];
    let mut out = [(0.0, 0.0); 16];
    for i in 0..8 {
        out[7 - i] = (0.5 * (1.0 - X[i]), 0.5 * W[i]);
        out[8 + i] = (0.5 * (1.0 + X[i]), 0.5 * W[i]);
    }
    out
}

/// `Phi(y) = int_0^1 phi(y g_t) dt` by 16-point Gauss-Legendre.
pub fn flow_average(sys: &SkewSystem, phi: &SkewObservable, y: &Frame) -> Result<f64, GeometryError> {
    let mut acc = 0.0;
    for (t, w) in gauss_legendre_16() {
        acc += w * phi.fiber.eval(&sys.group().flow_reduced(y, t)?);
    }
    Ok(acc)
}

/// Both parts of the occupation decomposition of a Birkhoff sum, before normalisation:
/// `sum_p N(n, p) Phi(y g_p)` and `sum_{k<n} phi(y g_{S_k f})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub occupation_term: f64,
    pub birkhoff_term: f64,
}

/// Computes both sums with one fiber flow per visited integer level.
pub fn decompose(sys: &SkewSystem, phi: &SkewObservable, s: &SkewState, n: usize) -> Result<Decomposition, GeometryError> {
    let sums = ergodic_sums(sys.automorphism(), sys.roof(), &s.base, n.saturating_sub(1));
    let mut by_level: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &v in &sums[..n.min(sums.len())] {
        let p = v.floor() as i64;
        by_level.entry(p).or_default().push(v - p as f64);
    }
    let mut occupation_term = 0.0;
    let mut birkhoff_term = 0.0;
    let mut line = FlowLine::new(sys.group(), s.fiber);
    for (&p, fracs) in &by_level {
        let yp = line.node(p)?;
        occupation_term += fracs.len() as f64 * flow_average(sys, phi, &yp)?;
        for &u in fracs {
            birkhoff_term += phi.fiber.eval(&sys.group().flow_reduced(&yp, u)?);
        }
    }
    Ok(Decomposition {
        occupation_term,
        birkhoff_term,
    })
}

/// `n^{-3/4} (sum_p N(n, p) Phi(y g_p) - sum_{k<n} phi(y g_{S_k f}))` for a fiber observable.
pub fn decomposition_residual(sys: &SkewSystem, phi: &SkewObservable, s: &SkewState, n: usize) -> Result<f64, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidArgument("n must be >= 1".into()));
    }
    let d = decompose(sys, phi, s, n)?;
    Ok((d.occupation_term - d.birkhoff_term) * (n as f64).powf(-0.75))
}

/// Law of `n^{-3/4} sum_p N(n, p) Phi(y g_p)` over product-measure starts.
pub fn occupation_weighted_law(
    sys: &SkewSystem,
    phi: &SkewObservable,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalLaw, GeometryError> {
    if n == 0 || samples == 0 {
        return Err(GeometryError::InvalidArgument("n and samples must be >= 1".into()));
    }
    let scale = (n as f64).powf(-0.75);
    let values: Result<Vec<f64>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
        let s = SkewState::sample(sys.group(), rng)?;
        let sums = ergodic_sums(sys.automorphism(), sys.roof(), &s.base, n - 1);
        let prof = OccupationProfile::from_sums(&sums);
        let mut line = FlowLine::new(sys.group(), s.fiber);
        let mut acc = 0.0;
        for (&p, &c) in &prof.counts {
            let yp = line.node(p)?;
            acc += c as f64 * flow_average(sys, phi, &yp)?;
        }
        Ok(acc * scale)
    })
    .into_iter()
    .collect();
    Ok(EmpiricalLaw::new(values?, n, 0.75, seed).expect("finite non-empty sample"))
}

/// Summary of the normalised decomposition residual over product-measure starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub n: usize,
    pub threshold: f64,
    /// Fraction of starts with `|residual| > threshold`.
    pub exceedance: mc::Estimate,
    pub mean_abs: mc::Estimate,
}

pub fn residual_exceedance(
    sys: &SkewSystem,
    phi: &SkewObservable,
    n: usize,
    threshold: f64,
    samples: usize,
    seed: u64,
) -> Result<ResidualStats, GeometryError> {
    if samples < 2 {
        return Err(GeometryError::InvalidArgument("samples must be >= 2".into()));
    }
    let rs: Result<Vec<f64>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
        let s = SkewState::sample(sys.group(), rng)?;
        decomposition_residual(sys, phi, &s, n)
    })
    .into_iter()
    .collect();
    let rs = rs?;
    let hits: Vec<f64> = rs.iter().map(|r| if r.abs() > threshold { 1.0 } else { 0.0 }).collect();
    let abs: Vec<f64> = rs.iter().map(|r| r.abs()).collect();
    Ok(ResidualStats {
        n,
        threshold,
        exceedance: mc::Estimate::from_samples(&hits),
        mean_abs: mc::Estimate::from_samples(&abs),
    })
}
