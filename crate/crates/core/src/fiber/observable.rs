//! Centered observables on the quotient, built as finite Poincare series of a
//! compactly supported bump on PSL(2, R).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::group::{FuchsianGroup, ReducedFrame};
use crate::error::GeometryError;
use crate::mc::{self, Estimate};

/// `exp(1 - 1 / (1 - s^2))` on `|s| < 1`, zero outside; smooth with peak value 1.
#[inline]
pub fn smooth_bump(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

/// Composite Simpson rule with `n` (even) panels.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Serializable parameters of a bump observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub center: Frame,
    /// Support radius in hyperbolic distance between base points.
    pub plane_width: f64,
    /// Support half-width in frame angle (radians, at most pi/2).
    pub angle_width: f64,
    pub amplitude: f64,
}

impl Default for BumpParams {
    fn default() -> Self {
        Self {
            center: Frame::identity(),
            plane_width: 1.2,
            angle_width: 1.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Translate {
    gamma: Frame,
    /// `center^{-1} gamma`, so that `cosh d(c i, gamma y i) = |shifted y|^2 / 2`.
    shifted: Frame,
}

/// `phi(Gamma y) = sum_gamma h(gamma y) - mean_offset` where
/// `h(g) = amplitude * bump(d(c i, g i) / plane_width) * bump(angle(g, c) / angle_width)`.
///
/// For a reduced `y` only the cached elements whose translate of the support can meet
/// the fundamental domain contribute, so the finite sum is the full Poincare series.
#[derive(Debug, Clone)]
pub struct BumpObservable {
    params: BumpParams,
    mean_offset: f64,
    center_angle: f64,
    cosh_plane_width: f64,
    translates: Vec<Translate>,
}

impl BumpObservable {
    /// Builds the observable and centers it with the exact Haar mean of the series.
    pub fn new(group: &FuchsianGroup, params: BumpParams) -> Result<Self, GeometryError> {
        let BumpParams {
            center,
            plane_width,
            angle_width,
            amplitude,
        } = params;
        if !(plane_width > 0.0 && plane_width.is_finite()) {
            return Err(GeometryError::InvalidArgument(format!("plane_width {plane_width} must be > 0")));
        }
        if !(angle_width > 0.0 && angle_width <= PI / 2.0) {
            return Err(GeometryError::InvalidArgument(format!(
                "angle_width {angle_width} must lie in (0, pi/2]"
            )));
        }
        if !amplitude.is_finite() {
            return Err(GeometryError::InvalidArgument("amplitude must be finite".into()));
        }
        let needed = group.domain_radius() + center.dist_to_center() + plane_width;
        let translates = group
            .ball_within(needed)?
            .iter()
            .map(|e| Translate {
                gamma: e.element,
                shifted: center.inverse().mul(&e.element),
            })
            .collect();
        let mut obs = Self {
            params,
            mean_offset: 0.0,
            center_angle: center.frame_angle(),
            cosh_plane_width: plane_width.cosh(),
            translates,
        };
        obs.mean_offset = obs.exact_series_mean(group);
        Ok(obs)
    }

    /// The zero observable.
    pub fn zero(group: &FuchsianGroup) -> Self {
        Self::new(
            group,
            BumpParams {
                amplitude: 0.0,
                ..BumpParams::default()
            },
        )
        .expect("default bump fits the default cache")
    }

    pub fn params(&self) -> &BumpParams {
        &self.params
    }

    pub fn mean_offset(&self) -> f64 {
        self.mean_offset
    }

    pub fn is_zero(&self) -> bool {
        self.params.amplitude == 0.0 && self.mean_offset == 0.0
    }

    /// Replaces the centering constant (e.g. with a Monte Carlo calibration).
    pub fn with_mean_offset(mut self, offset: f64) -> Self {
        self.mean_offset = offset;
        self
    }

    /// Number of group elements in the finite Poincare sum.
    pub fn series_len(&self) -> usize {
        self.translates.len()
    }

    /// `int_G h dHaar / vol(Gamma \ G)` by one-dimensional quadrature: Haar measure is
    /// `dA dtheta / pi` normalised by the surface area, and `h` factors into a radial
    /// part around `c i` and an angular part.
    fn exact_series_mean(&self, group: &FuchsianGroup) -> f64 {
        let p = &self.params;
        if p.amplitude == 0.0 {
            return 0.0;
        }
        let radial = 2.0 * PI * simpson(|r| smooth_bump(r / p.plane_width) * r.sinh(), 0.0, p.plane_width, 20_000);
        let angular = simpson(|u| smooth_bump(u / p.angle_width), -p.angle_width, p.angle_width, 20_000) / PI;
        p.amplitude * radial * angular / group.surface_area()
    }

    #[inline]
    fn bump_on_group(&self, t: &Translate, y: &Frame) -> f64 {
        let m = t.shifted.mul(y);
        let ch = 0.5 * m.norm2();
        if ch >= self.cosh_plane_width {
            return 0.0;
        }
        let r = ch.max(1.0).acosh();
        let radial = smooth_bump(r / self.params.plane_width);
        let theta = t.gamma.mul(y).frame_angle();
        let mut delta = (theta - self.center_angle).abs();
        if delta > PI / 2.0 {
            delta = PI - delta;
        }
        if delta >= self.params.angle_width {
            return 0.0;
        }
        self.params.amplitude * radial * smooth_bump(delta / self.params.angle_width)
    }

    /// Uncentered Poincare sum at a reduced frame.
    #[inline]
    pub fn series(&self, y: &Frame) -> f64 {
        if self.params.amplitude == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for t in &self.translates {
            s += self.bump_on_group(t, y);
        }
        s
    }

    /// Centered value at a reduced frame.
    #[inline]
    pub fn eval(&self, y: &Frame) -> f64 {
        self.series(y) - self.mean_offset
    }

    /// Monte Carlo estimate of the Haar mean of the uncentered series; an independent
    /// check of the quadrature centering.
    pub fn calibrate_monte_carlo(&self, group: &FuchsianGroup, samples: usize, seed: u64) -> Result<Estimate, GeometryError> {
        let vals: Result<Vec<f64>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
            let (y, _) = group.sample_haar_counted(rng)?;
            Ok(self.series(&y))
        })
        .into_iter()
        .collect();
        Ok(Estimate::from_samples(&vals?))
    }
}

/// Value of the centered observable at a reduced frame.
pub fn evaluate_observable(phi: &BumpObservable, group: &FuchsianGroup, y: &ReducedFrame) -> Result<f64, GeometryError> {
    let needed = group.domain_radius() + phi.params.center.dist_to_center() + phi.params.plane_width;
    if needed > group.cache_radius() + 1e-12 {
        return Err(GeometryError::CacheTooSmall {
            cache: group.cache_radius(),
            needed,
        });
    }
    Ok(phi.eval(&y.frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::frame::Frame;
    use proptest::prelude::*;
    use rand::Rng;

    fn setup() -> (FuchsianGroup, BumpObservable) {
        let g = FuchsianGroup::bolza();
        let phi = BumpObservable::new(&g, BumpParams::default()).unwrap();
        (g, phi)
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let g = FuchsianGroup::bolza();
        let phi = BumpObservable::zero(&g);
        assert_eq!(phi.mean_offset(), 0.0);
        let y = g.sample_haar_seeded(3).unwrap();
        assert_eq!(evaluate_observable(&phi, &g, &y).unwrap(), 0.0);
    }

    #[test]
    fn bump_is_one_at_center() {
        let (_, phi) = setup();
        assert!((phi.series(&Frame::identity()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_mean_agrees_with_monte_carlo() {
        let (g, phi) = setup();
        let mc = phi.calibrate_monte_carlo(&g, 100_000, 99).unwrap();
        assert!(mc.within(phi.mean_offset(), 3.0), "{mc:?} vs {}", phi.mean_offset());
    }

    #[test]
    fn centered_over_haar_samples() {
        let (g, phi) = setup();
        let vals: Vec<f64> = mc::par_samples(1234, 100_000, |_, rng| {
            let y = g.sample_haar(rng).unwrap();
            evaluate_observable(&phi, &g, &y).unwrap()
        });
        let e = Estimate::from_samples(&vals);
        assert!(e.within(0.0, 3.0), "{e:?}");
    }

    #[test]
    fn oversized_support_is_a_configuration_error() {
        let g = FuchsianGroup::regular_octagon(3.0).unwrap();
        let err = BumpObservable::new(&g, BumpParams::default()).unwrap_err();
        assert!(matches!(err, GeometryError::CacheTooSmall { .. }));
    }

    #[test]
    fn wide_bump_uses_neighbouring_translates() {
        let g = FuchsianGroup::bolza();
        let phi = BumpObservable::new(
            &g,
            BumpParams {
                plane_width: 2.4,
                ..BumpParams::default()
            },
        )
        .unwrap();
        assert!(phi.series_len() > 9);
        // invariance must still hold when several translates overlap the domain
        let mut rng = mc::stream(8, 0);
        for _ in 0..200 {
            let y = g.sample_haar(&mut rng).unwrap().frame;
            let k = rng.random_range(0..8);
            let moved = g.reduce(&g.generators()[k].mul(&y)).unwrap();
            assert!((phi.eval(&y) - phi.eval(&moved.frame)).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn quotient_invariance(seed in 0u64..1_000_000, k in 0usize..8, depth in 1usize..4) {
            let (g, phi) = setup();
            let mut rng = mc::stream(seed, 0);
            let y = g.sample_haar(&mut rng).unwrap().frame;
            let mut moved = y;
            for j in 0..depth {
                moved = g.generators()[(k + 3 * j) % 8].mul(&moved);
            }
            let r = g.reduce(&moved).unwrap();
            prop_assert!((phi.eval(&y) - phi.eval(&r.frame)).abs() < 1e-9);
        }
    }
}
