//! Estimators and scaling fits: correlation series, variance scans, distances between
//! empirical laws, and the tail, mixing and occupation checks.

use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GeometryError, StatsError};
use crate::fiber::{BumpObservable, FlowLine, FuchsianGroup};
use crate::mc::{self, pairwise_sum, variance_estimate, Estimate};
use crate::skew::{SkewObservable, SkewState, SkewSystem};
use crate::torus::{ergodic_sum, ergodic_sums, TorusPoint};

// ---------------------------------------------------------------- fitting

/// Straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub points: usize,
}

/// Least squares line. With `sigmas` the fit is weighted by `1 / sigma^2` and the
/// propagated errors are inflated by `sqrt(chi^2 / dof)` when that exceeds one;
/// without, errors come from the residual scatter.
pub fn linear_fit(xs: &[f64], ys: &[f64], sigmas: Option<&[f64]>) -> Result<LinearFit, StatsError> {
    let n = xs.len();
    if n != ys.len() || sigmas.is_some_and(|s| s.len() != n) {
        return Err(StatsError::InvalidArgument("fit inputs differ in length".into()));
    }
    if n < 2 {
        return Err(StatsError::TooFewPoints { usable: n });
    }
    let w: Vec<f64> = match sigmas {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; n],
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidArgument("weights must be finite (sigma > 0)".into()));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        sw += w[i];
        sx += w[i] * xs[i];
        sy += w[i] * ys[i];
        sxx += w[i] * xs[i] * xs[i];
        sxy += w[i] * xs[i] * ys[i];
    }
    let delta = sw * sxx - sx * sx;
    if !(delta > 0.0) {
        return Err(StatsError::InvalidArgument("fit abscissae are degenerate".into()));
    }
    let slope = (sw * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let chi2: f64 = (0..n).map(|i| w[i] * (ys[i] - intercept - slope * xs[i]).powi(2)).sum();
    let dof = n as f64 - 2.0;
    let scale = match (sigmas, dof > 0.0) {
        (Some(_), true) => (chi2 / dof).max(1.0),
        (Some(_), false) => 1.0,
        (None, true) => chi2 / dof,
        (None, false) => f64::NAN,
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (scale * sw / delta).sqrt(),
        intercept_stderr: (scale * sxx / delta).sqrt(),
        points: n,
    })
}

/// `|value| ~ constant * x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub log_constant: f64,
    pub fit_stderr: f64,
    pub log_constant_stderr: f64,
    pub fit_range: (f64, f64),
    pub points: usize,
}

impl ExponentFit {
    pub fn constant(&self) -> f64 {
        self.log_constant.exp()
    }
}

/// Points in `range` that pass the significance filter `|v| > 3 stderr` (any nonzero
/// value passes when its stderr is zero).
fn significant(xs: &[f64], values: &[f64], stderrs: Option<&[f64]>, range: (f64, f64)) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let se = stderrs.map_or(0.0, |s| s[i]);
        let v = values[i];
        if xs[i] >= range.0 && xs[i] <= range.1 && xs[i] > 0.0 && v.is_finite() && v != 0.0 && v.abs() > 3.0 * se {
            out.push((xs[i], v, se));
        }
    }
    out
}

/// Log-log fit of `|value|` against `x` over `range`.
///
/// When every retained point has a positive stderr the fit is weighted by the
/// propagated log errors `stderr / |value|`; exact inputs use ordinary least squares.
pub fn fit_power_law(
    xs: &[f64],
    values: &[f64],
    stderrs: Option<&[f64]>,
    range: (f64, f64),
) -> Result<ExponentFit, StatsError> {
    if xs.len() != values.len() || stderrs.is_some_and(|s| s.len() != xs.len()) {
        return Err(StatsError::InvalidArgument("fit inputs differ in length".into()));
    }
    let pts = significant(xs, values, stderrs, range);
    if pts.len() < 3 {
        return Err(StatsError::TooFewPoints { usable: pts.len() });
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    let weighted = pts.iter().all(|p| p.2 > 0.0);
    let sig: Vec<f64> = pts.iter().map(|p| p.2 / p.1.abs()).collect();
    let fit = linear_fit(&lx, &ly, weighted.then_some(&sig[..]))?;
    Ok(ExponentFit {
        exponent: fit.slope,
        log_constant: fit.intercept,
        fit_stderr: fit.slope_stderr,
        log_constant_stderr: fit.intercept_stderr,
        fit_range: range,
        points: pts.len(),
    })
}

/// Constant `C` in `value ~ C x^exponent` for a known exponent: inverse-variance weighted
/// mean of `value / x^exponent` over `range`.
pub fn fit_constant(
    xs: &[f64],
    values: &[f64],
    stderrs: &[f64],
    exponent: f64,
    range: (f64, f64),
) -> Result<Estimate, StatsError> {
    let pts = significant(xs, values, Some(stderrs), range);
    if pts.is_empty() {
        return Err(StatsError::TooFewPoints { usable: 0 });
    }
    if pts.iter().any(|p| p.2 == 0.0) {
        let r: Vec<f64> = pts.iter().map(|p| p.1 / p.0.powf(exponent)).collect();
        return Ok(Estimate::new(mc::mean(&r), 0.0));
    }
    let (mut sw, mut swr) = (0.0, 0.0);
    for &(x, v, se) in &pts {
        let s = x.powf(exponent);
        let w = (s / se).powi(2);
        sw += w;
        swr += w * v / s;
    }
    Ok(Estimate::new(swr / sw, sw.sqrt().recip()))
}

// ---------------------------------------------------------------- correlations

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl CorrelationSeries {
    pub fn fit(&self, range: (f64, f64)) -> Result<ExponentFit, StatsError> {
        let xs: Vec<f64> = self.lags.iter().map(|&k| k as f64).collect();
        fit_power_law(&xs, &self.values, Some(&self.stderrs), range)
    }

    pub fn get(&self, lag: usize) -> Option<Estimate> {
        let i = self.lags.iter().position(|&k| k == lag)?;
        Some(Estimate::new(self.values[i], self.stderrs[i]))
    }
}

fn check_increasing(xs: &[usize], what: &str) -> Result<(), StatsError> {
    if xs.is_empty() || xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::InvalidArgument(format!("{what} must be non-empty and strictly increasing")));
    }
    Ok(())
}

/// `<phi o T^k, phi>` for every lag in one pass per base orbit.
///
/// Each sample draws one base point and `fiber_starts` independent Haar frames; the
/// sample value is the average of `phi(T^k(x, y_j)) phi(x, y_j)` over the frames. The
/// draw order is the base point first, then the frames.
pub fn correlation_series(
    sys: &SkewSystem,
    phi: &SkewObservable,
    lags: &[usize],
    samples: usize,
    fiber_starts: usize,
    seed: u64,
) -> Result<CorrelationSeries, Error> {
    check_increasing(lags, "lags")?;
    if samples < 2 || fiber_starts < 1 {
        return Err(StatsError::InvalidArgument("need samples >= 2 and fiber_starts >= 1".into()).into());
    }
    let k_max = *lags.last().expect("non-empty");
    let rows: Result<Vec<Vec<f64>>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
        let x = TorusPoint::uniform(rng);
        let sums = ergodic_sums(sys.automorphism(), sys.roof(), &x, k_max);
        let base_at: Vec<TorusPoint> = match &phi.base {
            Some(_) => sys.automorphism().orbit(&x, k_max + 1),
            None => Vec::new(),
        };
        let base_val = |k: usize| phi.base.as_ref().map_or(0.0, |b| b.eval(&base_at[k]));
        let mut acc = vec![0.0; lags.len()];
        for _ in 0..fiber_starts {
            let y = sys.group().sample_haar(rng)?.frame;
            let v0 = phi.fiber.eval(&y) + base_val(0);
            let mut line = FlowLine::new(sys.group(), y);
            for (j, &k) in lags.iter().enumerate() {
                let z = line.at(sums[k])?;
                acc[j] += v0 * (phi.fiber.eval(&z) + base_val(k));
            }
        }
        Ok(acc.into_iter().map(|a| a / fiber_starts as f64).collect())
    })
    .into_iter()
    .collect();
    let rows = rows?;
    let mut values = Vec::with_capacity(lags.len());
    let mut stderrs = Vec::with_capacity(lags.len());
    for j in 0..lags.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let e = Estimate::from_samples(&col);
        values.push(e.value);
        stderrs.push(e.stderr);
    }
    Ok(CorrelationSeries {
        lags: lags.to_vec(),
        values,
        stderrs,
        samples,
        seed,
    })
}

/// `sqrt(2 pi k) sigma(f) <phi o T^k, phi>`, which tends to `Sigma^2(phi)`.
pub fn correlation_constant(series: &CorrelationSeries, lag: usize, sigma: f64) -> Option<Estimate> {
    let e = series.get(lag)?;
    let s = (2.0 * PI * lag as f64).sqrt() * sigma;
    Some(Estimate::new(e.value * s, e.stderr * s))
}

// ---------------------------------------------------------------- variance scans

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSeries {
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    pub series: VarianceSeries,
    pub fit: Option<ExponentFit>,
    pub fit_error: Option<String>,
}

impl VarianceSeries {
    pub fn fit(&self, range: (f64, f64)) -> Result<ExponentFit, StatsError> {
        let xs: Vec<f64> = self.ns.iter().map(|&k| k as f64).collect();
        fit_power_law(&xs, &self.values, Some(&self.stderrs), range)
    }

    /// Constant of `Var ~ C n^exponent` at a fixed exponent.
    pub fn constant_at(&self, exponent: f64, range: (f64, f64)) -> Result<Estimate, StatsError> {
        let xs: Vec<f64> = self.ns.iter().map(|&k| k as f64).collect();
        fit_constant(&xs, &self.values, &self.stderrs, exponent, range)
    }
}

/// Sample variance of the Birkhoff sums at each `n`; all lengths come from the same
/// trajectories, read off as partial sums of one orbit of length `max(n_list)`.
pub fn variance_scan(
    sys: &SkewSystem,
    phi: &SkewObservable,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<VarianceScan, Error> {
    check_increasing(n_list, "n_list")?;
    if samples < 2 {
        return Err(StatsError::InvalidArgument("need samples >= 2".into()).into());
    }
    let n_max = *n_list.last().expect("non-empty");
    let rows: Result<Vec<Vec<f64>>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
        let s = SkewState::sample(sys.group(), rng)?;
        let mut out = Vec::with_capacity(n_list.len());
        let mut next = 0;
        sys.birkhoff_partial_sums(phi, &s, n_max, |k, v| {
            if next < n_list.len() && n_list[next] == k {
                out.push(v);
                next += 1;
            }
        })?;
        Ok(out)
    })
    .into_iter()
    .collect();
    let rows = rows?;
    let mut values = Vec::new();
    let mut stderrs = Vec::new();
    for j in 0..n_list.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let e = variance_estimate(&col);
        values.push(e.value);
        stderrs.push(e.stderr);
    }
    let series = VarianceSeries {
        ns: n_list.to_vec(),
        values,
        stderrs,
        samples,
        seed,
    };
    let range = (n_list[0] as f64, n_max as f64);
    let (fit, fit_error) = match series.fit(range) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(VarianceScan { series, fit, fit_error })
}

/// `(8/3) Sigma^2 / (sqrt(2 pi) sigma)`, the constant of the `n^{3/2}` variance growth.
pub fn corollary_constant(sigma2: f64, sigma2_capital: f64) -> f64 {
    8.0 / 3.0 * sigma2_capital / ((2.0 * PI).sqrt() * sigma2.sqrt())
}

// ---------------------------------------------------------------- empirical laws

/// A seeded Monte Carlo sample of a real random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLaw {
    n: usize,
    exponent: f64,
    seed: u64,
    values: Vec<f64>,
}

/// Metadata stored next to a raw little-endian `f64` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub n: usize,
    pub exponent: f64,
    pub seed: u64,
    pub count: usize,
    pub dtype: String,
}

impl EmpiricalLaw {
    pub fn new(values: Vec<f64>, n: usize, exponent: f64, seed: u64) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptyLaw);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::InvalidArgument("law contains non-finite values".into()));
        }
        Ok(Self {
            n,
            exponent,
            seed,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mc::mean(&self.values)
    }

    pub fn variance(&self) -> f64 {
        variance_estimate(&self.values).value
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("law serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let raw: Self = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        Ok(Self::new(raw.values, raw.n, raw.exponent, raw.seed)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), Error> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, Error> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes the values as raw little-endian `f64` and the metadata to `<path>.json`.
    pub fn save_raw(&self, path: &Path) -> Result<(), Error> {
        let mut f = fs::File::create(path)?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&buf)?;
        let side = RawSidecar {
            n: self.n,
            exponent: self.exponent,
            seed: self.seed,
            count: self.values.len(),
            dtype: "f64le".into(),
        };
        fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&side).map_err(|e| Error::Serde(e.to_string()))?)?;
        Ok(())
    }

    pub fn load_raw(path: &Path) -> Result<Self, Error> {
        let side: RawSidecar = serde_json::from_str(&fs::read_to_string(Self::sidecar_path(path))?)
            .map_err(|e| Error::Serde(e.to_string()))?;
        let bytes = fs::read(path)?;
        if side.dtype != "f64le" || bytes.len() != 8 * side.count {
            return Err(Error::Serde(format!(
                "raw column has {} bytes, sidecar declares {} values of {}",
                bytes.len(),
                side.count,
                side.dtype
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self::new(values, side.n, side.exponent, side.seed)?)
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &EmpiricalLaw, b: &EmpiricalLaw) -> f64 {
    let (a, b) = (sorted(&a.values), sorted(&b.values));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `max_t |E e^{itA} - E e^{itB}|` over the empirical characteristic functions.
pub fn char_fn_distance(a: &EmpiricalLaw, b: &EmpiricalLaw, t_grid: &[f64]) -> f64 {
    let cf = |law: &EmpiricalLaw, t: f64| -> (f64, f64) {
        let c: Vec<f64> = law.values.iter().map(|x| (t * x).cos()).collect();
        let s: Vec<f64> = law.values.iter().map(|x| (t * x).sin()).collect();
        (mc::mean(&c), mc::mean(&s))
    };
    t_grid
        .iter()
        .map(|&t| {
            let (ca, sa) = cf(a, t);
            let (cb, sb) = cf(b, t);
            (ca - cb).hypot(sa - sb)
        })
        .fold(0.0, f64::max)
}

/// `count` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

// ---------------------------------------------------------------- tails

/// `P(S_n f > threshold)` by plain Monte Carlo over uniform starts.
pub fn tail_probability(sys: &SkewSystem, n: usize, threshold: f64, samples: usize, seed: u64) -> Estimate {
    let hits = mc::par_samples(seed, samples, |_, rng| {
        let x = TorusPoint::uniform(rng);
        if ergodic_sum(sys.automorphism(), sys.roof(), &x, n) > threshold {
            1.0
        } else {
            0.0
        }
    });
    Estimate::from_samples(&hits)
}

/// `n^{1 - beta}`.
pub fn tail_threshold(n: usize, beta: f64) -> f64 {
    (n as f64).powf(1.0 - beta)
}

/// Settings of the population estimator of small tail probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloningConfig {
    pub clones: usize,
    pub replicas: usize,
    /// Exponential tilt `s` in the weight `exp(s f(x))` applied at every step.
    pub tilt: f64,
    /// Size of the perturbation along the unstable direction given to duplicated clones.
    pub jitter: f64,
}

/// A tail probability from independent replicas of the population estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: usize,
    pub threshold: f64,
    /// Mean of the replica estimates and its standard error.
    pub prob: Estimate,
    pub replica_probs: Vec<f64>,
}

/// `P(S_n f > threshold)` with a tilted population dynamics: clones are weighted by
/// `exp(tilt f(x))` at every step and resampled, so the population follows the
/// tilted orbit measure while the running product of mean weights estimates
/// `E exp(tilt S_n f)`. Reweighting the final clones by `exp(-tilt S_n f)` gives an
/// unbiased estimate of the tail. Duplicates are shifted by `jitter` along the
/// unstable direction so that copies separate; this is a vanishing random
/// perturbation of the map.
pub fn tail_probability_cloning(
    sys: &SkewSystem,
    n: usize,
    threshold: f64,
    cfg: &CloningConfig,
    seed: u64,
) -> Result<TailEstimate, StatsError> {
    if cfg.clones < 2 || cfg.replicas < 2 || !cfg.tilt.is_finite() || !(cfg.jitter >= 0.0) {
        return Err(StatsError::InvalidArgument(format!("bad cloning configuration {cfg:?}")));
    }
    let m = sys.automorphism();
    let f = sys.roof();
    let u = m.unstable_slope();
    let norm = (1.0 + u * u).sqrt();
    let dir = (1.0 / norm, u / norm);
    let replica_probs = mc::par_samples(seed, cfg.replicas, |_, rng| {
        let mut xs: Vec<TorusPoint> = (0..cfg.clones).map(|_| TorusPoint::uniform(rng)).collect();
        let mut ss = vec![0.0f64; cfg.clones];
        let mut log_z = 0.0;
        let mut w = vec![0.0; cfg.clones];
        let mut next_x = xs.clone();
        let mut next_s = ss.clone();
        for _ in 0..n {
            for i in 0..cfg.clones {
                let v = f.eval(&xs[i]);
                w[i] = (cfg.tilt * v).exp();
                ss[i] += v;
                xs[i] = m.apply(&xs[i]);
            }
            let total = pairwise_sum(&w);
            log_z += (total / cfg.clones as f64).ln();
            // systematic resampling
            let step = total / cfg.clones as f64;
            let mut pos = step * rng.random::<f64>();
            let mut acc = w[0];
            let mut src = 0;
            let mut last_src = usize::MAX;
            for i in 0..cfg.clones {
                while pos > acc && src + 1 < cfg.clones {
                    src += 1;
                    acc += w[src];
                }
                let mut x = xs[src];
                if src == last_src && cfg.jitter > 0.0 {
                    let e = cfg.jitter * mc::standard_normal(rng);
                    x = TorusPoint::new(x.x1() + e * dir.0, x.x2() + e * dir.1);
                }
                next_x[i] = x;
                next_s[i] = ss[src];
                last_src = src;
                pos += step;
            }
            std::mem::swap(&mut xs, &mut next_x);
            std::mem::swap(&mut ss, &mut next_s);
        }
        // log of mean_i exp(-tilt s_i) 1{s_i > threshold}, then add log Z
        let terms: Vec<f64> = ss.iter().filter(|&&s| s > threshold).map(|&s| -cfg.tilt * s).collect();
        if terms.is_empty() {
            return 0.0;
        }
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
        (log_z + mx + (sum / cfg.clones as f64).ln()).exp()
    });
    Ok(TailEstimate {
        n,
        threshold,
        prob: Estimate::from_samples(&replica_probs),
        replica_probs,
    })
}

/// Tilt that centres the tilted law of `S_n f` near `threshold` in the Gaussian regime.
pub fn default_tilt(n: usize, threshold: f64, sigma2: f64) -> f64 {
    threshold / (sigma2 * n as f64)
}

/// Tail probabilities over several `n` with a bootstrap of the log-probability slope
/// against `n^{1 - 2 beta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailScan {
    pub beta: f64,
    pub points: Vec<TailEstimate>,
    pub slope: f64,
    /// Bootstrap quantiles (2.5%, 97.5%) of the slope.
    pub slope_interval: (f64, f64),
}

impl TailScan {
    pub fn strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].prob.value < w[0].prob.value)
    }
}

pub fn tail_scan(
    sys: &SkewSystem,
    ns: &[usize],
    beta: f64,
    sigma2: f64,
    clones: usize,
    replicas: usize,
    seed: u64,
) -> Result<TailScan, StatsError> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(StatsError::InvalidArgument(format!("beta {beta} must lie in (0, 1/2)")));
    }
    check_increasing(ns, "n list")?;
    let mut points = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let threshold = tail_threshold(n, beta);
        let cfg = CloningConfig {
            clones,
            replicas,
            tilt: default_tilt(n, threshold, sigma2),
            jitter: 1e-9,
        };
        points.push(tail_probability_cloning(sys, n, threshold, &cfg, mc::derive_seed(seed, &format!("tail-{i}")))?);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(1.0 - 2.0 * beta)).collect();
    let slope_of = |probs: &[f64]| -> Option<f64> {
        if probs.iter().any(|&p| !(p > 0.0)) {
            return None;
        }
        let ys: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
        linear_fit(&xs, &ys, None).ok().map(|f| f.slope)
    };
    let central: Vec<f64> = points.iter().map(|p| p.prob.value).collect();
    let slope = slope_of(&central).unwrap_or(f64::NAN);
    let mut rng = mc::stream(mc::derive_seed(seed, "tail-bootstrap"), 0);
    let mut boot = Vec::new();
    for _ in 0..2000 {
        let probs: Vec<f64> = points
            .iter()
            .map(|p| {
                let r = &p.replica_probs;
                let draw: Vec<f64> = (0..r.len()).map(|_| r[rng.random_range(0..r.len())]).collect();
                mc::mean(&draw)
            })
            .collect();
        boot.push(slope_of(&probs).unwrap_or(f64::NAN));
    }
    let interval = if boot.iter().any(|b| b.is_nan()) {
        (f64::NAN, f64::NAN)
    } else {
        let b = sorted(&boot);
        (b[(0.025 * b.len() as f64) as usize], b[(0.975 * b.len() as f64) as usize - 1])
    };
    Ok(TailScan {
        beta,
        points,
        slope,
        slope_interval: interval,
    })
}

// ---------------------------------------------------------------- mixing

/// `Cov(prod_i phi_i(y g_{t_i}), prod_j psi_j(y g_{s_j + T}))` along Haar-started flows.
pub fn multi_correlation(
    group: &FuchsianGroup,
    left: &[(&BumpObservable, f64)],
    right: &[(&BumpObservable, f64)],
    gap: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, Error> {
    let ts: Vec<f64> = left.iter().map(|p| p.1).collect();
    let ss: Vec<f64> = right.iter().map(|p| p.1).collect();
    if left.is_empty() || right.is_empty() || ts.windows(2).any(|w| w[0] > w[1]) || ss.windows(2).any(|w| w[0] > w[1]) {
        return Err(StatsError::InvalidArgument("time lists must be non-empty and sorted".into()).into());
    }
    if ts.last().is_some_and(|&t| t > 0.0) || ss.first().is_some_and(|&s| s < 0.0) || !(gap > 0.0) {
        return Err(StatsError::InvalidArgument("need t_i <= 0 <= s_j and T > 0".into()).into());
    }
    if samples < 2 {
        return Err(StatsError::InvalidArgument("need samples >= 2".into()).into());
    }
    let pairs: Result<Vec<(f64, f64)>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
        let y = group.sample_haar(rng)?.frame;
        // left times are walked backwards from 0, right times forwards
        let mut a = 1.0;
        let mut z = y;
        let mut t_prev = 0.0;
        for &(phi, t) in left.iter().rev() {
            z = group.flow_reduced(&z, t - t_prev)?;
            t_prev = t;
            a *= phi.eval(&z);
        }
        let mut b = 1.0;
        let mut z = y;
        let mut t_prev = 0.0;
        for &(psi, s) in right {
            z = group.flow_reduced(&z, s + gap - t_prev)?;
            t_prev = s + gap;
            b *= psi.eval(&z);
        }
        Ok((a, b))
    })
    .into_iter()
    .collect();
    let pairs = pairs?;
    let ma = mc::mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let mb = mc::mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let centred: Vec<f64> = pairs.iter().map(|&(a, b)| (a - ma) * (b - mb)).collect();
    let e = Estimate::from_samples(&centred);
    let nf = samples as f64;
    Ok(Estimate::new(e.value * nf / (nf - 1.0), e.stderr))
}

/// `|multi_correlation|` over several gaps with a fit of `ln |cov|` against the gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingScan {
    pub gaps: Vec<f64>,
    pub covariances: Vec<Estimate>,
    /// Weighted by the propagated log errors; `None` when a covariance is exactly zero.
    pub fit: Option<LinearFit>,
}

pub fn mixing_scan(
    group: &FuchsianGroup,
    left: &[(&BumpObservable, f64)],
    right: &[(&BumpObservable, f64)],
    gaps: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MixingScan, Error> {
    let mut covariances = Vec::with_capacity(gaps.len());
    for (i, &gap) in gaps.iter().enumerate() {
        covariances.push(multi_correlation(group, left, right, gap, samples, mc::derive_seed(seed, &format!("gap-{i}")))?);
    }
    let fit = if gaps.len() >= 3 && covariances.iter().all(|c| c.value != 0.0 && c.stderr > 0.0) {
        let ys: Vec<f64> = covariances.iter().map(|c| c.value.abs().ln()).collect();
        let sig: Vec<f64> = covariances.iter().map(|c| c.stderr / c.value.abs()).collect();
        linear_fit(gaps, &ys, Some(&sig)).ok()
    } else {
        None
    };
    Ok(MixingScan {
        gaps: gaps.to_vec(),
        covariances,
        fit,
    })
}

// ---------------------------------------------------------------- occupation moments

/// Moments of `N(n, I) = #{k < n : S_k f in I}` for `I = [0, 1)` and sub-intervals of
/// length `1 / [n^epsilon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationMoments {
    pub n: usize,
    /// `[n^epsilon]`, the number of sub-intervals of `I`.
    pub parts: usize,
    pub mean: Estimate,
    pub second: Estimate,
    pub third: Estimate,
    /// `[n^eps] E[N(I) N(J)]`.
    pub cross_ij: Estimate,
    /// `[n^eps]^2 E[N(J) N(K)]`.
    pub cross_jk: Estimate,
}

pub fn occupation_moments(sys: &SkewSystem, n: usize, epsilon: f64, samples: usize, seed: u64) -> Result<OccupationMoments, StatsError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(StatsError::InvalidArgument(format!("epsilon {epsilon} must lie in (0, 1/2)")));
    }
    if n < 16 || samples < 2 {
        return Err(StatsError::InvalidArgument("need n >= 16 and samples >= 2".into()));
    }
    let parts = ((n as f64).powf(epsilon).floor() as usize).max(1);
    let pf = parts as f64;
    let rows = mc::par_samples(seed, samples, |_, rng| {
        let x = TorusPoint::uniform(rng);
        let j = rng.random_range(0..parts);
        let k = rng.random_range(0..parts);
        let sums = ergodic_sums(sys.automorphism(), sys.roof(), &x, n - 1);
        let (mut ni, mut nj, mut nk) = (0.0, 0.0, 0.0);
        for &s in &sums {
            if (0.0..1.0).contains(&s) {
                ni += 1.0;
                let cell = ((s * pf) as usize).min(parts - 1);
                if cell == j {
                    nj += 1.0;
                }
                if cell == k {
                    nk += 1.0;
                }
            }
        }
        [ni, ni * ni, ni * ni * ni, pf * ni * nj, pf * pf * nj * nk]
    });
    let col = |c: usize| Estimate::from_samples(&rows.iter().map(|r| r[c]).collect::<Vec<_>>());
    Ok(OccupationMoments {
        n,
        parts,
        mean: col(0),
        second: col(1),
        third: col(2),
        cross_ij: col(3),
        cross_jk: col(4),
    })
}

/// [`occupation_moments`] over an `n` grid with power-law fits of the first three moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationScan {
    pub moments: Vec<OccupationMoments>,
    pub mean_fit: Option<ExponentFit>,
    pub second_fit: Option<ExponentFit>,
    pub third_fit: Option<ExponentFit>,
}

pub fn occupation_scan(sys: &SkewSystem, ns: &[usize], epsilon: f64, samples: usize, seed: u64) -> Result<OccupationScan, StatsError> {
    check_increasing(ns, "n list")?;
    let moments = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| occupation_moments(sys, n, epsilon, samples, mc::derive_seed(seed, &format!("moments-{i}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let range = (xs[0], *xs.last().expect("non-empty"));
    let fit = |pick: fn(&OccupationMoments) -> Estimate| {
        let v: Vec<f64> = moments.iter().map(|m| pick(m).value).collect();
        let e: Vec<f64> = moments.iter().map(|m| pick(m).stderr).collect();
        fit_power_law(&xs, &v, Some(&e), range).ok()
    };
    Ok(OccupationScan {
        mean_fit: fit(|m| m.mean),
        second_fit: fit(|m| m.second),
        third_fit: fit(|m| m.third),
        moments,
    })
}
