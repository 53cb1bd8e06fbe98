//! Autocorrelation of fiber observables along the geodesic flow and its integral.

use serde::{Deserialize, Serialize};

use super::group::FuchsianGroup;
use super::observable::BumpObservable;
use crate::error::GeometryError;
use crate::mc::{self, Estimate};
use crate::stats::{linear_fit, LinearFit};

/// `rho(b) = int phi(y g_b) phi(y) dnu(y)` by Monte Carlo over Haar starts.
pub fn fiber_autocorrelation(
    phi: &BumpObservable,
    group: &FuchsianGroup,
    b: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, GeometryError> {
    if phi.is_zero() {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let vals: Result<Vec<f64>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
        let y = group.sample_haar(rng)?.frame;
        let z = group.flow_reduced(&y, b)?;
        Ok(phi.eval(&y) * phi.eval(&z))
    })
    .into_iter()
    .collect();
    Ok(Estimate::from_samples(&vals?))
}

/// Quadrature settings for [`sigma2_capital`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Config {
    pub b_max: f64,
    pub step: f64,
    pub samples: usize,
    pub seed: u64,
    /// Length of the stretch of trajectory each sample averages over.
    pub window: f64,
    /// Lag window used to fit the exponential decay of `|rho|`.
    pub fit_window: (f64, f64),
}

impl Default for Sigma2Config {
    fn default() -> Self {
        Self {
            b_max: 30.0,
            step: 0.25,
            samples: 50_000,
            seed: 0x5eed_0002,
            window: 100.0,
            fit_window: (2.0, 12.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sigma2Report {
    /// Integral of `rho` over `[-b_max, b_max]`; `stderr` already includes `tail_bound`.
    pub sigma2: Estimate,
    pub statistical_stderr: f64,
    pub tail_bound: f64,
    /// Fit of `ln |rho(b)|` against `b` over the fit window, when enough lags are significant.
    pub decay: Option<LinearFit>,
    /// `(b, rho(b))` on the nonnegative half of the grid.
    pub rho: Vec<(f64, Estimate)>,
}

/// `Sigma^2(phi) = int_R rho(b) db`, trapezoid rule on `[-b_max, b_max]`.
///
/// Each sample follows one Haar-started orbit on the grid `j * step` and, using the
/// invariance of Haar measure under the flow, averages `phi(y_i) phi(y_{i+m})` over all
/// base times `i` in a stretch of length `window`. Samples are independent, so the
/// standard errors account for the correlation between lags and base times.
pub fn sigma2_capital(phi: &BumpObservable, group: &FuchsianGroup, cfg: &Sigma2Config) -> Result<Sigma2Report, GeometryError> {
    if !(cfg.b_max > 0.0 && cfg.step > 0.0 && cfg.step <= cfg.b_max) {
        return Err(GeometryError::InvalidArgument(format!(
            "need 0 < step <= b_max, got step {} and b_max {}",
            cfg.step, cfg.b_max
        )));
    }
    if cfg.samples < 2 || !(cfg.window >= 0.0) {
        return Err(GeometryError::InvalidArgument("sigma2 needs at least 2 samples and window >= 0".into()));
    }
    let m = (cfg.b_max / cfg.step).round() as usize;
    let h = cfg.b_max / m as f64;
    let base_times = (cfg.window / h).round() as usize + 1;
    if phi.is_zero() {
        return Ok(Sigma2Report {
            sigma2: Estimate::new(0.0, 0.0),
            statistical_stderr: 0.0,
            tail_bound: 0.0,
            decay: None,
            rho: (0..=m).map(|j| (j as f64 * h, Estimate::new(0.0, 0.0))).collect(),
        });
    }

    // trapezoid weights on lags -m..=m
    let weight = |lag: usize| if lag == m { 0.5 * h } else { h };
    // per sample: [integral, rho(0), ..., rho(m)]
    let rows: Result<Vec<Vec<f64>>, GeometryError> = mc::par_samples(cfg.seed, cfg.samples, |_, rng| {
        let len = base_times + 2 * m;
        let mut v = Vec::with_capacity(len);
        let mut y = group.sample_haar(rng)?.frame;
        v.push(phi.eval(&y));
        for _ in 1..len {
            y = group.flow_reduced(&y, h)?;
            v.push(phi.eval(&y));
        }
        let mut row = vec![0.0; m + 2];
        for i in m..m + base_times {
            let vi = v[i];
            row[1] += vi * vi;
            let mut integral = h * vi;
            for lag in 1..=m {
                let pair = v[i + lag] + v[i - lag];
                row[lag + 1] += 0.5 * vi * pair;
                integral += weight(lag) * pair;
            }
            row[0] += vi * integral;
        }
        let scale = 1.0 / base_times as f64;
        for r in row.iter_mut() {
            *r *= scale;
        }
        Ok(row)
    })
    .into_iter()
    .collect();
    let rows = rows?;

    let column = |c: usize| -> Estimate {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        Estimate::from_samples(&col)
    };
    let integral = column(0);
    let rho: Vec<(f64, Estimate)> = (0..=m).map(|j| (j as f64 * h, column(j + 1))).collect();

    let decay = fit_decay(&rho, cfg.fit_window);
    let tail_bound = match decay {
        // both tails of C e^{r b} beyond b_max
        Some(fit) if fit.slope < 0.0 => 2.0 * (fit.intercept + fit.slope * cfg.b_max).exp() / -fit.slope,
        _ => f64::INFINITY,
    };
    if !(tail_bound <= 0.01 * integral.value.abs()) {
        log::warn!(
            "sigma2 tail beyond b_max = {} is {:.3e}, more than 1% of the integral {:.4e}; increase b_max",
            cfg.b_max,
            tail_bound,
            integral.value
        );
    }
    let tail_err = if tail_bound.is_finite() { tail_bound } else { 0.0 };
    Ok(Sigma2Report {
        sigma2: Estimate::new(integral.value, integral.stderr + tail_err),
        statistical_stderr: integral.stderr,
        tail_bound,
        decay,
        rho,
    })
}

/// Fit of `ln |rho(b)|` against `b` along the envelope of the oscillation.
///
/// `rho` oscillates (the spectral parameter of the first Laplace eigenvalue is complex), so
/// only lags in `window` that are significant at 3 sigma and are local maxima of `|rho|` on
/// the grid enter an ordinary least-squares fit.
pub fn fit_decay(rho: &[(f64, Estimate)], window: (f64, f64)) -> Option<LinearFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (j, &(b, e)) in rho.iter().enumerate() {
        let a = e.value.abs();
        if b < window.0 || b > window.1 || a <= 3.0 * e.stderr {
            continue;
        }
        let left = j.checked_sub(1).map_or(0.0, |i| rho[i].1.value.abs());
        let right = rho.get(j + 1).map_or(0.0, |r| r.1.value.abs());
        if a >= left && a >= right {
            xs.push(b);
            ys.push(a.ln());
        }
    }
    if xs.len() < 3 {
        return None;
    }
    linear_fit(&xs, &ys, None).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::observable::BumpParams;

    fn setup() -> (FuchsianGroup, BumpObservable) {
        let g = FuchsianGroup::bolza();
        let phi = BumpObservable::new(&g, BumpParams::default()).unwrap();
        (g, phi)
    }

    #[test]
    fn zero_observable() {
        let g = FuchsianGroup::bolza();
        let phi = BumpObservable::zero(&g);
        let r = sigma2_capital(&phi, &g, &Sigma2Config::default()).unwrap();
        assert_eq!(r.sigma2, Estimate::new(0.0, 0.0));
        assert_eq!(fiber_autocorrelation(&phi, &g, 3.0, 10, 1).unwrap().value, 0.0);
    }

    #[test]
    fn lag_zero_is_positive_norm() {
        let (g, phi) = setup();
        let e = fiber_autocorrelation(&phi, &g, 0.0, 20_000, 5).unwrap();
        assert!(e.value > 3.0 * e.stderr);
    }

    #[test]
    fn stationarity_symmetry() {
        let (g, phi) = setup();
        for b in [0.5, 1.5, 3.0] {
            let p = fiber_autocorrelation(&phi, &g, b, 40_000, 11).unwrap();
            let m = fiber_autocorrelation(&phi, &g, -b, 40_000, 12).unwrap();
            let se = (p.stderr.powi(2) + m.stderr.powi(2)).sqrt();
            assert!((p.value - m.value).abs() <= 3.0 * se, "b={b}: {p:?} vs {m:?}");
        }
    }

    #[test]
    fn decorrelated_at_long_lag() {
        let (g, phi) = setup();
        let e = fiber_autocorrelation(&phi, &g, 20.0, 40_000, 13).unwrap();
        assert!(e.within(0.0, 3.0), "{e:?}");
    }

    #[test]
    fn rejects_bad_grid() {
        let (g, phi) = setup();
        let cfg = Sigma2Config {
            step: 0.0,
            ..Sigma2Config::default()
        };
        assert!(sigma2_capital(&phi, &g, &cfg).is_err());
    }

    // Independent oracle: separate Monte Carlo passes per lag, combined by the trapezoid rule.
    #[test]
    fn matches_lagwise_quadrature() {
        let (g, phi) = setup();
        let (b_max, h) = (8.0, 0.5);
        let m = 16;
        let mut value = 0.0;
        let mut var = 0.0;
        for j in 0..=m {
            let e = fiber_autocorrelation(&phi, &g, j as f64 * h, 20_000, 100 + j as u64).unwrap();
            let w = match j {
                0 => h,
                j if j == m => h,
                _ => 2.0 * h,
            };
            value += w * e.value;
            var += (w * e.stderr).powi(2);
        }
        let cfg = Sigma2Config {
            b_max,
            step: h,
            samples: 5_000,
            seed: 31,
            ..Sigma2Config::default()
        };
        let r = sigma2_capital(&phi, &g, &cfg).unwrap();
        let se = (var + r.statistical_stderr.powi(2)).sqrt();
        assert!((r.sigma2.value - value).abs() <= 3.0 * se, "{:?} vs {value} +- {}", r.sigma2, var.sqrt());
    }

    #[test]
    fn decay_fit_uses_envelope() {
        let rho: Vec<(f64, Estimate)> = (0..=48)
            .map(|j| {
                let b = j as f64 * 0.25;
                (b, Estimate::new((-0.5 * b).exp() * (1.9 * b).cos(), 1e-9))
            })
            .collect();
        let fit = fit_decay(&rho, (2.0, 12.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn quadrature_refinement_agrees() {
        let (g, phi) = setup();
        let coarse = Sigma2Config {
            b_max: 12.0,
            step: 0.5,
            samples: 2_000,
            seed: 21,
            ..Sigma2Config::default()
        };
        let fine = Sigma2Config {
            b_max: 24.0,
            step: 0.25,
            samples: 2_000,
            seed: 22,
            ..Sigma2Config::default()
        };
        let a = sigma2_capital(&phi, &g, &coarse).unwrap();
        let b = sigma2_capital(&phi, &g, &fine).unwrap();
        let se = (a.sigma2.stderr.powi(2) + b.sigma2.stderr.powi(2)).sqrt();
        assert!((a.sigma2.value - b.sigma2.value).abs() <= 3.0 * se, "{:?} vs {:?}", a.sigma2, b.sigma2);
        assert!(b.sigma2.value > -3.0 * b.sigma2.stderr);
    }
}
